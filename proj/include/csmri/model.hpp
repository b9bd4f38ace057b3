#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "csmri/kspace.hpp"
#include "csmri/tensor.hpp"

namespace csmri {

struct ModelConfig {
  int p = 32;       // channel width
  int k = 8;        // distillation depth
  int stages = 13;  // n_s, odd
  std::vector<double> ratios{0.1, 0.2, 0.3, 0.4, 0.5};

  // Ablation switches. The defaults are the full network.
  bool use_correction = true;   // off: the prolonged-correction channel is zero
  bool condition_eta = true;    // off: per-stage free step lengths, independent of the ratio
  bool condition_beta = true;   // off: the noise-level channel is zero
  bool share_correction = false;
  bool share_prior = false;
};

void validate(const ModelConfig& cfg);
// 1-based index of the deep-supervision stage, (n_s + 1) / 2.
inline int mid_stage(const ModelConfig& cfg) { return (cfg.stages + 1) / 2; }

// Convolution: weight (out, in, kh, kw), bias (out). The prolongation is a
// transposed convolution whose weight is stored (in, out, kh, kw).
struct Conv {
  Tensor weight;
  Tensor bias;
};

// Fully connected: weight (out, in), bias (out).
struct Dense {
  Tensor weight;
  Tensor bias;
};

struct ResBlock {
  Conv conv1;
  Conv conv2;
};

// Restriction, coarse solution operator and prolongation of one stage.
struct CorrectionParams {
  Conv restrict;  // 2x2 stride 2, 2 -> 2
  Conv sol_in;    // 3x3, 2 -> p
  std::array<ResBlock, 4> blocks;
  Conv sol_out;   // 3x3, p -> 2
  Conv prolong;   // transposed 2x2 stride 2, 2 -> 1
};

// Geometric prior distillation of one stage.
struct PriorParams {
  Conv distill_a;               // 3x3, 3 -> p
  std::vector<Conv> distill_b;  // (k - 1) x 3x3, p -> p
  Conv fuse;                    // 1x1, 3 + k p -> 1
};

struct ConditionParams {
  Dense trunk1;     // 1 -> p
  Dense trunk2;     // p -> p
  Dense eta_head;   // p -> n_s, empty when condition_eta is off
  Dense beta_head;  // p -> n_s, empty when condition_beta is off
  Tensor eta_free;  // (n_s), present only when condition_eta is off
};

struct ModelParams {
  std::vector<CorrectionParams> correction;  // one entry when shared
  std::vector<PriorParams> prior;            // one entry when shared
  ConditionParams condition;

  const CorrectionParams& correction_at(int stage) const {
    return correction.size() == 1 ? correction[0] : correction[static_cast<std::size_t>(stage)];
  }
  CorrectionParams& correction_at(int stage) {
    return correction.size() == 1 ? correction[0] : correction[static_cast<std::size_t>(stage)];
  }
  const PriorParams& prior_at(int stage) const {
    return prior.size() == 1 ? prior[0] : prior[static_cast<std::size_t>(stage)];
  }
  PriorParams& prior_at(int stage) {
    return prior.size() == 1 ? prior[0] : prior[static_cast<std::size_t>(stage)];
  }
};

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};
struct ConstNamedTensor {
  std::string name;
  const Tensor* tensor;
};

// Every learnable tensor in initialization order. Names look like
// "correction.03.blocks.2.conv1.weight", "prior.01.fuse.bias",
// "condition.eta_head.weight".
std::vector<NamedTensor> named_parameters(ModelParams& params);
std::vector<ConstNamedTensor> named_parameters(const ModelParams& params);

// Parameter family of a tensor name: restrict, sol, prolong, distill, fuse,
// trunk, heads (eta/beta heads and free step lengths).
std::string parameter_family(const std::string& name);

// Correctly shaped, all-zero parameters.
ModelParams zero_params(const ModelConfig& cfg);
ModelParams zeros_like(const ModelParams& params);

// Kaiming-normal weights (fan-in, ReLU gain: std = sqrt(2 / fan_in)), zero
// biases, drawn in named_parameters order from one seeded stream. Fan-in of a
// (in, out, k, k) transposed weight is out * k * k. All values are rounded to
// float so checkpoints round-trip exactly.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

struct ParamCount {
  std::size_t restrict = 0;
  std::size_t solution = 0;
  std::size_t prolong = 0;
  std::size_t distill = 0;
  std::size_t fuse = 0;
  std::size_t trunk = 0;
  std::size_t eta_head = 0;
  std::size_t beta_head = 0;
  std::size_t free_steps = 0;
  std::size_t total = 0;
};
ParamCount param_count(const ModelParams& params);

// Throws ShapeMismatch if params do not have the shapes cfg implies.
void check_params(const ModelParams& params, const ModelConfig& cfg);

struct Hyper {
  std::vector<double> eta;
  std::vector<double> beta;
};

// Step lengths and noise levels for a sampling ratio; softplus keeps both
// strictly positive.
Hyper condition(const ConditionParams& params, const ModelConfig& cfg, double alpha);

// h = x - eta Re(T^H (T x - y))
Image pre_relax(const Image& x_prev, double eta, const MeasurementOp& op, const ComplexField& y);

// Forward caches needed by the backward pass.
struct SolutionTape {
  Tensor input;
  std::array<Tensor, 4> block_in;
  std::array<Tensor, 4> block_pre;  // conv1 output before ReLU
  Tensor body;                      // input of sol_out
};

struct StageTape {
  Image x_prev;
  Image data_grad;   // Re(T^H (T x_prev - y))
  Image h;
  Tensor residual;   // (2, m, n) view of y - T h
  Tensor coarse;     // (2, m/2, n/2) restricted residual
  SolutionTape solution;
  Tensor coarse_image;  // (2, m/2, n/2) coarse inverse DFT of the solution output
  Tensor correction;    // (1, m, n) prolonged correction
  Tensor features;      // (3 + k p, m, n) fusion input [m, u_1 .. u_k]
  double eta = 0.0;
  double beta = 0.0;
};

struct ConditionTape {
  double alpha = 0.0;
  std::vector<double> a1, a2, z_eta, z_beta;  // pre-activations
};

struct Tape {
  ConditionTape condition;
  std::vector<StageTape> stages;
};

// out = r + sol_out(blocks(sol_in(r))), block u -> u + conv2(ReLU(conv1(u))).
Tensor solution_operator(const CorrectionParams& params, const Tensor& coarse, SolutionTape* tape = nullptr);

// m = [h, prolong(F^H_coarse S(restrict(y - T h))), beta]
Tensor correction(const CorrectionParams& params, const Image& h, const MeasurementOp& op, const ComplexField& y,
                  double beta, bool enabled = true, StageTape* tape = nullptr);

// x = fuse([m, u_1, ..., u_k]), u_1 = ReLU(A m), u_j = ReLU(B_{j-1} u_{j-1}).
Image prior_distill(const PriorParams& params, const Tensor& m, StageTape* tape = nullptr);

struct ForwardResult {
  Image x0;
  Image x_mid;
  Image x_final;
  std::vector<Image> trace;  // stage outputs x_1 .. x_{n_s}
  Hyper hyper;
};

// Unrolled reconstruction from x0 = |T^H y|. alpha is only the condition
// input; any value in (0, 1] is accepted regardless of the mask.
ForwardResult forward_pass(const ModelParams& params, const ModelConfig& cfg, const MeasurementOp& op,
                           const ComplexField& y, double alpha, Tape* tape = nullptr);

// Accumulates into grad the parameter gradient of a scalar loss whose
// gradients with respect to x_mid and x_final are given.
void backward_pass(const ModelParams& params, const ModelConfig& cfg, const MeasurementOp& op, const Tape& tape,
                   const Image& d_mid, const Image& d_final, ModelParams& grad);

}  // namespace csmri
