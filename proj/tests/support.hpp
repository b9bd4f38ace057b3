#pragma once

#include <cmath>
#include <numbers>

#include "csmri/kspace.hpp"
#include "csmri/rng.hpp"
#include "csmri/tensor.hpp"

namespace csmri::fixtures {

inline Image random_image(int rows, int cols, Rng& rng) {
  Image x = Tensor::image(rows, cols);
  for (double& v : x.values()) v = rng.uniform();
  return x;
}

inline ComplexField random_field(int rows, int cols, Rng& rng) {
  ComplexField z(rows, cols);
  for (auto& v : z.values()) v = {rng.normal(), rng.normal()};
  return z;
}

// Direct O((mn)^2) evaluation of the centered unitary DFT.
inline ComplexField brute_dft(const ComplexField& x) {
  const int m = x.rows();
  const int n = x.cols();
  ComplexField out(m, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m) * n);
  for (int ku = 0; ku < m; ++ku) {
    for (int kv = 0; kv < n; ++kv) {
      Complex acc{};
      for (int r = 0; r < m; ++r) {
        for (int c = 0; c < n; ++c) {
          const double phase = -2.0 * std::numbers::pi *
                               (static_cast<double>((ku - m / 2) * (r - m / 2)) / m +
                                static_cast<double>((kv - n / 2) * (c - n / 2)) / n);
          acc += x.at(r, c) * Complex(std::cos(phase), std::sin(phase));
        }
      }
      out.at(ku, kv) = acc * scale;
    }
  }
  return out;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace csmri::fixtures

#include <string>
#include <vector>

#include "csmri/data.hpp"
#include "csmri/model.hpp"
#include "csmri/training.hpp"

namespace csmri::fixtures {

struct GradProbe {
  std::string name;
  std::string family;
  std::size_t index;
  double analytic;
  double numeric;
  double rel_error;
};

struct GradProblem {
  ModelConfig cfg;
  ModelParams params;
  MeasurementOp op;
  ComplexField y;
  Image target;
  double alpha;

  double objective(const ModelParams& p) const {
    const ForwardResult out = forward_pass(p, cfg, op, y, alpha);
    return loss(out.x_mid, out.x_final, target);
  }

  ModelParams gradient() const {
    Tape tape;
    const ForwardResult out = forward_pass(params, cfg, op, y, alpha, &tape);
    Image d_mid, d_final;
    loss_gradient(out.x_mid, out.x_final, target, 1.0, d_mid, d_final);
    ModelParams grad = zeros_like(params);
    backward_pass(params, cfg, op, tape, d_mid, d_final, grad);
    return grad;
  }
};

// Zero biases leave ReLU inputs exactly at the kink wherever the masked
// residual vanishes; small random biases move the check point off it.
inline void jitter_biases(ModelParams& params, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& nt : named_parameters(params)) {
    if (nt.tensor->rank() == 1) {
      for (double& v : nt.tensor->values()) v = 0.05 * rng.normal();
    }
  }
}

// 16x16 phantom, 30% Cartesian, n_s = 3, p = 8, k = 2.
inline GradProblem small_grad_problem() {
  ModelConfig cfg;
  cfg.p = 8;
  cfg.k = 2;
  cfg.stages = 3;
  const Dataset data = make_phantoms(2, 16, 16, 11);
  MeasurementOp op(make_mask(16, 16, 0.3, MaskFamily::cartesian, 5));
  ModelParams params = init_params(cfg, 21);
  jitter_biases(params, 99);
  const Image target = data.images[1];
  ComplexField y = op.forward(target);
  return {cfg, params, op, y, target, 0.3};
}

// Central differences on `per_family` randomly chosen scalars of every
// parameter family.
inline std::vector<GradProbe> gradient_check(const GradProblem& prob, int per_family, std::uint64_t seed,
                                             double h = 1e-6) {
  const ModelParams grad = prob.gradient();
  const auto named = named_parameters(prob.params);
  const auto named_grad = named_parameters(grad);
  const std::vector<std::string> families{"restrict", "sol", "prolong", "distill", "fuse", "trunk", "heads"};
  Rng rng(seed);
  std::vector<GradProbe> probes;
  for (const auto& family : families) {
    std::vector<std::size_t> members;
    for (std::size_t t = 0; t < named.size(); ++t) {
      if (parameter_family(named[t].name) == family) members.push_back(t);
    }
    for (int i = 0; i < per_family; ++i) {
      const std::size_t t = members[rng.below(members.size())];
      const std::size_t idx = rng.below(named[t].tensor->size());
      ModelParams plus = prob.params;
      ModelParams minus = prob.params;
      (*named_parameters(plus)[t].tensor)[idx] += h;
      (*named_parameters(minus)[t].tensor)[idx] -= h;
      const double numeric = (prob.objective(plus) - prob.objective(minus)) / (2.0 * h);
      const double analytic = (*named_grad[t].tensor)[idx];
      const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
      probes.push_back({named[t].name, family, idx, analytic, numeric, std::abs(analytic - numeric) / scale});
    }
  }
  return probes;
}

}  // namespace csmri::fixtures
