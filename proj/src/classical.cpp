#include "csmri/classical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "csmri/errors.hpp"

namespace csmri {
namespace {

class CoarseSolve {
 public:
  CoarseSolve(const LinearMap& apply_a, const LinearMap& restrict, const LinearMap& prolong, Eigen::Index dim,
              const TwoGridConfig& cfg)
      : cfg_(cfg), apply_a_(apply_a), restrict_(restrict), prolong_(prolong) {
    if (cfg.coarse_solver == CoarseSolver::dense_direct) {
      matrix_ = galerkin_operator(apply_a, restrict, prolong, dim);
      ldlt_.compute(matrix_);
    }
  }

  // `scale` is the magnitude the consistency check is measured against.
  Vector solve(const Vector& rhs, double scale) {
    if (cfg_.coarse_solver == CoarseSolver::conjugate_gradient) return conjugate_gradient(rhs);
    if (ldlt_.info() == Eigen::Success) {
      Vector e = ldlt_.solve(rhs);
      if (consistent(e, rhs, scale)) return e;
    }
    // Semi-definite coarse operators (e.g. from undersampled normal
    // equations) fall back to the minimum-norm solution.
    if (!eigen_.has_value()) eigen_.emplace(matrix_);
    const Vector& lambda = eigen_->eigenvalues();
    const double cutoff = 1e-10 * std::max(lambda.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    Vector coeff = eigen_->eigenvectors().transpose() * rhs;
    for (Eigen::Index i = 0; i < coeff.size(); ++i) coeff[i] = lambda[i] > cutoff ? coeff[i] / lambda[i] : 0.0;
    Vector e = eigen_->eigenvectors() * coeff;
    if (!consistent(e, rhs, scale)) {
      throw SingularSystem("coarse operator is singular and the restricted residual is outside its range");
    }
    return e;
  }

 private:
  bool consistent(const Vector& e, const Vector& rhs, double scale) const {
    scale = std::max({rhs.norm(), scale, std::numeric_limits<double>::min()});
    const double mismatch = (matrix_ * e - rhs).norm();
    return std::isfinite(mismatch) && mismatch <= 1e-8 * scale * std::max(1.0, matrix_.norm());
  }

  Vector apply(const Vector& v) const { return restrict_(apply_a_(prolong_(v))); }

  Vector conjugate_gradient(const Vector& rhs) const {
    Vector e = Vector::Zero(rhs.size());
    Vector r = rhs;
    Vector p = r;
    double rr = r.squaredNorm();
    const double stop = cfg_.cg_tolerance * cfg_.cg_tolerance * std::max(rr, std::numeric_limits<double>::min());
    for (int it = 0; it < cfg_.cg_max_iters && rr > stop; ++it) {
      const Vector ap = apply(p);
      const double pap = p.dot(ap);
      if (pap <= 0.0) break;  // direction in the null space
      const double step = rr / pap;
      e += step * p;
      r -= step * ap;
      const double rr_next = r.squaredNorm();
      p = r + (rr_next / rr) * p;
      rr = rr_next;
    }
    return e;
  }

  const TwoGridConfig& cfg_;
  const LinearMap& apply_a_;
  const LinearMap& restrict_;
  const LinearMap& prolong_;
  Eigen::MatrixXd matrix_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
  std::optional<Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>> eigen_;
};

// Periodic 1D prolongation along one axis of a stacked array.
// fine[2i] = c[i]; fine[2i+1] = (c[i] + c[i+1]) / 2.
void prolong_axis(const double* coarse, double* fine, int n_coarse, int stride_coarse, int stride_fine) {
  for (int i = 0; i < n_coarse; ++i) {
    const double a = coarse[i * stride_coarse];
    const double b = coarse[((i + 1) % n_coarse) * stride_coarse];
    fine[(2 * i) * stride_fine] = a;
    fine[(2 * i + 1) * stride_fine] = 0.5 * (a + b);
  }
}

// Transpose of prolong_axis: c[i] = f[2i] + (f[2i+1] + f[2i-1]) / 2.
void prolong_axis_transpose(const double* fine, double* coarse, int n_coarse, int stride_fine, int stride_coarse) {
  const int n_fine = 2 * n_coarse;
  for (int i = 0; i < n_coarse; ++i) {
    const double center = fine[(2 * i) * stride_fine];
    const double right = fine[(2 * i + 1) * stride_fine];
    const double left = fine[((2 * i - 1 + n_fine) % n_fine) * stride_fine];
    coarse[i * stride_coarse] = center + 0.5 * (left + right);
  }
}

void check_transfer_dims(int rows, int cols) {
  if (rows < 2 || cols < 2 || rows % 2 || cols % 2) throw InvalidArgument("grid transfer needs even dimensions");
}

// forward differences, Neumann: last row/column difference is zero
void gradient(const Image& x, std::vector<double>& gx, std::vector<double>& gy) {
  const int rows = x.rows();
  const int cols = x.cols();
  gx.assign(x.size(), 0.0);
  gy.assign(x.size(), 0.0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * cols + c;
      if (r + 1 < rows) gy[i] = x[i + cols] - x[i];
      if (c + 1 < cols) gx[i] = x[i + 1] - x[i];
    }
  }
}

}  // namespace

void validate(const TwoGridConfig& cfg) {
  if (cfg.nu0 < 1) throw InvalidArgument("two-grid: nu0 must be >= 1");
  if (cfg.nu1 < 0) throw InvalidArgument("two-grid: nu1 must be >= 0");
  if (!(cfg.relax_step > 0.0)) throw InvalidArgument("two-grid: relax_step must be positive");
  if (cfg.cycles < 1) throw InvalidArgument("two-grid: cycles must be >= 1");
}

Vector richardson_sweeps(const LinearMap& apply_a, const Vector& rhs, Vector x, double step, int sweeps) {
  if (sweeps <= 0) return x;
  Vector r = rhs - apply_a(x);
  double previous = r.norm();
  const double floor = 1e-14 * rhs.norm();
  for (int s = 0; s < sweeps; ++s) {
    x += step * r;
    r = rhs - apply_a(x);
    const double current = r.norm();
    if (!std::isfinite(current) || current > previous * (1.0 + 1e-8) + floor) {
      throw DivergenceError("relaxation residual grew from " + std::to_string(previous) + " to " +
                                std::to_string(current) + "; step length exceeds 2 / lambda_max",
                            std::vector<double>(x.data(), x.data() + x.size()));
    }
    previous = current;
  }
  return x;
}

Eigen::MatrixXd galerkin_operator(const LinearMap& apply_a, const LinearMap& restrict, const LinearMap& prolong,
                                  Eigen::Index coarse_dim) {
  Eigen::MatrixXd m(coarse_dim, coarse_dim);
  Vector unit = Vector::Zero(coarse_dim);
  for (Eigen::Index j = 0; j < coarse_dim; ++j) {
    unit[j] = 1.0;
    m.col(j) = restrict(apply_a(prolong(unit)));
    unit[j] = 0.0;
  }
  // symmetrize away round-off
  return 0.5 * (m + m.transpose());
}

Vector two_grid_cycle(const LinearMap& apply_a, const Vector& rhs, const Vector& x0, const LinearMap& restrict,
                      const LinearMap& prolong, const TwoGridConfig& cfg) {
  validate(cfg);
  if (x0.size() != rhs.size()) throw ShapeMismatch("two-grid: x0 and rhs sizes differ");
  const Eigen::Index coarse_dim = restrict(Vector::Zero(rhs.size())).size();
  CoarseSolve coarse(apply_a, restrict, prolong, coarse_dim, cfg);
  const double scale = restrict(rhs).norm();
  Vector x = x0;
  for (int cycle = 0; cycle < cfg.cycles; ++cycle) {
    x = richardson_sweeps(apply_a, rhs, std::move(x), cfg.relax_step, cfg.nu0);
    const Vector residual = rhs - apply_a(x);
    const Vector correction = coarse.solve(restrict(residual), scale);
    x += prolong(correction);
    x = richardson_sweeps(apply_a, rhs, std::move(x), cfg.relax_step, cfg.nu1);
  }
  return x;
}

Vector prolong_bilinear(const Vector& coarse, int rows, int cols, int channels) {
  check_transfer_dims(rows, cols);
  const int cr = rows / 2;
  const int cc = cols / 2;
  if (coarse.size() != static_cast<Eigen::Index>(channels) * cr * cc) throw ShapeMismatch("prolong: size mismatch");
  Vector fine(static_cast<Eigen::Index>(channels) * rows * cols);
  std::vector<double> half(static_cast<std::size_t>(rows) * cc);
  for (int ch = 0; ch < channels; ++ch) {
    const double* src = coarse.data() + static_cast<std::ptrdiff_t>(ch) * cr * cc;
    double* dst = fine.data() + static_cast<std::ptrdiff_t>(ch) * rows * cols;
    for (int c = 0; c < cc; ++c) prolong_axis(src + c, half.data() + c, cr, cc, cc);
    for (int r = 0; r < rows; ++r) prolong_axis(half.data() + r * cc, dst + r * cols, cc, 1, 1);
  }
  return fine;
}

Vector restrict_full_weighting(const Vector& fine, int rows, int cols, int channels) {
  check_transfer_dims(rows, cols);
  const int cr = rows / 2;
  const int cc = cols / 2;
  if (fine.size() != static_cast<Eigen::Index>(channels) * rows * cols) throw ShapeMismatch("restrict: size mismatch");
  Vector coarse(static_cast<Eigen::Index>(channels) * cr * cc);
  std::vector<double> half(static_cast<std::size_t>(rows) * cc);
  for (int ch = 0; ch < channels; ++ch) {
    const double* src = fine.data() + static_cast<std::ptrdiff_t>(ch) * rows * cols;
    double* dst = coarse.data() + static_cast<std::ptrdiff_t>(ch) * cr * cc;
    for (int r = 0; r < rows; ++r) prolong_axis_transpose(src + r * cols, half.data() + r * cc, cc, 1, 1);
    for (int c = 0; c < cc; ++c) prolong_axis_transpose(half.data() + c, dst + c, cr, cc, cc);
  }
  coarse *= 0.25;
  return coarse;
}

Vector to_real_vector(const ComplexField& z) {
  const auto n = static_cast<Eigen::Index>(z.size());
  Vector v(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v[i] = z[static_cast<std::size_t>(i)].real();
    v[n + i] = z[static_cast<std::size_t>(i)].imag();
  }
  return v;
}

ComplexField from_real_vector(const Vector& v, int rows, int cols) {
  ComplexField z(rows, cols);
  const auto n = static_cast<Eigen::Index>(z.size());
  if (v.size() != 2 * n) throw ShapeMismatch("from_real_vector: size mismatch");
  for (Eigen::Index i = 0; i < n; ++i) z[static_cast<std::size_t>(i)] = Complex(v[i], v[n + i]);
  return z;
}

ComplexField classical_cs_twogrid_field(const MeasurementOp& op, const ComplexField& y, const TwoGridConfig& cfg) {
  const int rows = op.rows();
  const int cols = op.cols();
  const LinearMap apply_a = [&](const Vector& v) {
    return to_real_vector(op.normal(from_real_vector(v, rows, cols)));
  };
  const LinearMap restrict = [&](const Vector& v) { return restrict_full_weighting(v, rows, cols, 2); };
  const LinearMap prolong = [&](const Vector& v) { return prolong_bilinear(v, rows, cols, 2); };
  const Vector rhs = to_real_vector(op.adjoint(y));
  const Vector x = two_grid_cycle(apply_a, rhs, Vector::Zero(rhs.size()), restrict, prolong, cfg);
  return from_real_vector(x, rows, cols);
}

Image classical_cs_twogrid(const MeasurementOp& op, const ComplexField& y, const TwoGridConfig& cfg) {
  return magnitude(classical_cs_twogrid_field(op, y, cfg));
}

double total_variation(const Image& x) {
  std::vector<double> gx, gy;
  gradient(x, gx, gy);
  double tv = 0.0;
  for (std::size_t i = 0; i < gx.size(); ++i) tv += std::sqrt(gx[i] * gx[i] + gy[i] * gy[i]);
  return tv;
}

Image tv_prox(const Image& z, double weight, int inner_iters) {
  if (weight <= 0.0) return z;
  const int rows = z.rows();
  const int cols = z.cols();
  const std::size_t n = z.size();
  // Dual fields p (vertical) and q (horizontal); L(p, q) = -div(p, q).
  std::vector<double> p(n, 0.0), q(n, 0.0), rp(n, 0.0), rq(n, 0.0), pp(n), qp(n);
  auto primal = [&](const std::vector<double>& a, const std::vector<double>& b) {
    Image x = z;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const std::size_t i = static_cast<std::size_t>(r) * cols + c;
        double div = 0.0;
        if (r + 1 < rows) div += a[i];
        if (r > 0) div -= a[i - cols];
        if (c + 1 < cols) div += b[i];
        if (c > 0) div -= b[i - 1];
        // x = z - weight * L(p, q), L(p, q)_i = p_i + q_i - p_{i-up} - q_{i-left}
        x[i] -= weight * div;
      }
    }
    return x;
  };
  double t = 1.0;
  const double step = 1.0 / (8.0 * weight);
  std::vector<double> gx, gy;
  for (int it = 0; it < inner_iters; ++it) {
    const Image x = primal(rp, rq);
    gradient(x, gx, gy);
    pp = p;
    qp = q;
    for (std::size_t i = 0; i < n; ++i) {
      // L^T x = -grad x
      const double a = rp[i] - step * gy[i];
      const double b = rq[i] - step * gx[i];
      const double scale = std::max(1.0, std::sqrt(a * a + b * b));
      p[i] = a / scale;
      q[i] = b / scale;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double momentum = (t - 1.0) / t_next;
    for (std::size_t i = 0; i < n; ++i) {
      rp[i] = p[i] + momentum * (p[i] - pp[i]);
      rq[i] = q[i] + momentum * (q[i] - qp[i]);
    }
    t = t_next;
  }
  return primal(p, q);
}

double fista_tv_objective(const MeasurementOp& op, const ComplexField& y, const Image& x, double lam) {
  ComplexField r = op.forward(x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
  op.project(r);
  const double fit = norm2(r);
  return 0.5 * fit * fit + (lam > 0.0 ? lam * total_variation(x) : 0.0);
}

FistaTvResult fista_tv(const MeasurementOp& op, const ComplexField& y, const FistaTvConfig& cfg) {
  if (cfg.lam < 0.0) throw InvalidArgument("fista_tv: lambda must be >= 0");
  if (cfg.iters < 1) throw InvalidArgument("fista_tv: iters must be >= 1");
  if (cfg.tv_inner < 1) throw InvalidArgument("fista_tv: tv_inner must be >= 1");
  if (y.rows() != op.rows() || y.cols() != op.cols()) throw ShapeMismatch("fista_tv: data shape mismatch");

  // Re(T^H T) has norm <= 1 under the unitary transform, so the step is 1.
  const Image back = real_part(op.adjoint(y));
  Image x = back;
  Image x_prev = x;
  Image momentum_point = x;
  double t = 1.0;
  double current = fista_tv_objective(op, y, x, cfg.lam);
  FistaTvResult result;
  int rising = 0;
  double previous_candidate = current;
  const double floor = 1e-12 * std::max(norm2(y) * norm2(y), current);
  for (int k = 0; k < cfg.iters; ++k) {
    Image grad = real_part(op.normal(to_complex(momentum_point)));
    Image step_point = momentum_point;
    for (std::size_t i = 0; i < x.size(); ++i) step_point[i] -= grad[i] - back[i];
    const Image candidate = tv_prox(step_point, cfg.lam, cfg.tv_inner);
    const double candidate_obj = fista_tv_objective(op, y, candidate, cfg.lam);

    // Rejected candidates are expected near the optimum because the prox is
    // inexact; divergence means the candidates themselves keep growing.
    const bool growing = !std::isfinite(candidate_obj) ||
                         (candidate_obj > current * (1.0 + 1e-3) + floor && candidate_obj > previous_candidate);
    rising = growing ? rising + 1 : 0;
    if (rising >= 5 || !std::isfinite(candidate_obj)) {
      throw DivergenceError("fista_tv: objective increased for 5 consecutive iterations",
                            std::vector<double>(x.values().begin(), x.values().end()));
    }
    previous_candidate = candidate_obj;
    x_prev = x;
    if (candidate_obj <= current) {
      x = candidate;
      current = candidate_obj;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    for (std::size_t i = 0; i < x.size(); ++i) {
      momentum_point[i] = x[i] + (t / t_next) * (candidate[i] - x[i]) + ((t - 1.0) / t_next) * (x[i] - x_prev[i]);
    }
    t = t_next;
    result.objective.push_back(current);
  }
  result.image = std::move(x);
  return result;
}

}  // namespace csmri
