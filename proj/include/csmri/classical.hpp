#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "csmri/kspace.hpp"
#include "csmri/tensor.hpp"

namespace csmri {

using Vector = Eigen::VectorXd;
using LinearMap = std::function<Vector(const Vector&)>;

enum class CoarseSolver { dense_direct, conjugate_gradient };

struct TwoGridConfig {
  int nu0 = 1;  // pre-relaxation sweeps
  int nu1 = 0;  // post-relaxation sweeps
  double relax_step = 1.0;
  CoarseSolver coarse_solver = CoarseSolver::dense_direct;
  int cycles = 1;
  int cg_max_iters = 500;
  double cg_tolerance = 1e-12;
};

void validate(const TwoGridConfig& cfg);

// Richardson sweeps x <- x + step (rhs - A x). Throws DivergenceError if the
// residual norm grows, which for symmetric A means step >= 2 / lambda_max(A).
Vector richardson_sweeps(const LinearMap& apply_a, const Vector& rhs, Vector x, double step, int sweeps);

// Galerkin coarse matrix restrict * A * prolong, assembled column by column.
Eigen::MatrixXd galerkin_operator(const LinearMap& apply_a, const LinearMap& restrict, const LinearMap& prolong,
                                  Eigen::Index coarse_dim);

// Two-grid cycles on A x = rhs: nu0 sweeps, restricted residual solved on the
// coarse grid with the Galerkin operator, prolonged correction added, nu1
// sweeps. A must be symmetric positive semi-definite and prolong a positive
// multiple of restrict^T. The dense coarse solve returns a solution of the
// coarse system even when it is singular, and throws SingularSystem when the
// coarse system has no solution.
Vector two_grid_cycle(const LinearMap& apply_a, const Vector& rhs, const Vector& x0, const LinearMap& restrict,
                      const LinearMap& prolong, const TwoGridConfig& cfg);

// Grid transfers for `channels` stacked rows x cols planes (rows, cols even),
// periodic boundary. prolong_bilinear = 4 * restrict_full_weighting^T.
Vector prolong_bilinear(const Vector& coarse, int rows, int cols, int channels);
Vector restrict_full_weighting(const Vector& fine, int rows, int cols, int channels);

// Complex field <-> stacked (real plane, imaginary plane) vector.
Vector to_real_vector(const ComplexField& z);
ComplexField from_real_vector(const Vector& v, int rows, int cols);

// Two-grid solve of the normal equations T^H T x = T^H y over complex images
// starting from x = 0. The field overload returns the complex solution.
ComplexField classical_cs_twogrid_field(const MeasurementOp& op, const ComplexField& y, const TwoGridConfig& cfg);
Image classical_cs_twogrid(const MeasurementOp& op, const ComplexField& y, const TwoGridConfig& cfg);

struct FistaTvConfig {
  double lam = 0.01;
  int iters = 100;
  int tv_inner = 20;
};

struct FistaTvResult {
  Image image;
  // Objective after each iteration, non-increasing.
  std::vector<double> objective;
};

// Isotropic TV with forward differences and Neumann boundary.
double total_variation(const Image& x);
// argmin_x 0.5 ||x - z||^2 + weight * TV(x), fast dual projection.
Image tv_prox(const Image& z, double weight, int inner_iters);
double fista_tv_objective(const MeasurementOp& op, const ComplexField& y, const Image& x, double lam);

// Monotone FISTA on 0.5 ||T x - y||^2 + lam TV(x) over real images, started at
// Re(T^H y). Throws DivergenceError (carrying the iterate) if the candidate
// objective rises above the current one five iterations in a row.
FistaTvResult fista_tv(const MeasurementOp& op, const ComplexField& y, const FistaTvConfig& cfg);

}  // namespace csmri
