#include "csmri/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <functional>

#include "csmri/errors.hpp"
#include "csmri/fft.hpp"
#include "csmri/kernels.hpp"
#include "csmri/rng.hpp"

namespace csmri {
namespace {

using kernels::ConvGeometry;
using kernels::Dims;

constexpr ConvGeometry kSame3{3, 1, 1};
constexpr ConvGeometry kPoint{1, 1, 0};
constexpr ConvGeometry kStride2{2, 2, 0};

Dims dims_of(const Tensor& t) { return {t.channels(), t.rows(), t.cols()}; }

Conv make_conv(int out, int in, int kernel) { return {Tensor({out, in, kernel, kernel}), Tensor({out})}; }
Conv make_conv_transpose(int in, int out, int kernel) { return {Tensor({in, out, kernel, kernel}), Tensor({out})}; }
Dense make_dense(int out, int in) { return {Tensor({out, in}), Tensor({out})}; }

Tensor conv_forward(const Conv& c, const Tensor& x, ConvGeometry g) {
  const Dims xd = dims_of(x);
  if (c.weight.dim(1) != xd.channels) {
    throw ShapeMismatch("conv: weight expects " + std::to_string(c.weight.dim(1)) + " input channels, got " +
                        std::to_string(xd.channels));
  }
  const Dims yd = kernels::conv_output_dims(xd, c.weight.dim(0), g);
  Tensor y({yd.channels, yd.rows, yd.cols});
  kernels::parallel::conv2d_forward(x.values(), xd, c.weight.values(), c.bias.values(), g, y.values(), yd);
  return y;
}

Tensor conv_backward(const Conv& c, const Tensor& x, const Tensor& dy, ConvGeometry g, Conv& grad) {
  const Dims xd = dims_of(x);
  const Dims yd = dims_of(dy);
  kernels::parallel::conv2d_backward_weight(x.values(), xd, dy.values(), yd, g, grad.weight.values(),
                                            grad.bias.values());
  Tensor dx({xd.channels, xd.rows, xd.cols});
  kernels::parallel::conv2d_backward_input(dy.values(), yd, c.weight.values(), g, dx.values(), xd);
  return dx;
}

// Transposed convolution, weight (in, out, k, k): the adjoint of a strided
// convolution applied forward.
Tensor conv_transpose_forward(const Conv& c, const Tensor& x, ConvGeometry g) {
  const Dims xd = dims_of(x);
  if (c.weight.dim(0) != xd.channels) throw ShapeMismatch("transposed conv: input channel mismatch");
  const int out = c.weight.dim(1);
  const Dims yd{out, (xd.rows - 1) * g.stride - 2 * g.pad + g.kernel, (xd.cols - 1) * g.stride - 2 * g.pad + g.kernel};
  Tensor y({yd.channels, yd.rows, yd.cols});
  kernels::parallel::conv2d_backward_input(x.values(), xd, c.weight.values(), g, y.values(), yd);
  for (int ch = 0; ch < out; ++ch) {
    for (double& v : y.channel(ch)) v += c.bias[static_cast<std::size_t>(ch)];
  }
  return y;
}

Tensor conv_transpose_backward(const Conv& c, const Tensor& x, const Tensor& dy, ConvGeometry g, Conv& grad) {
  const Dims xd = dims_of(x);
  const Dims yd = dims_of(dy);
  // In convolution terms the transposed layer's output is the conv input and
  // its input is the conv output.
  kernels::parallel::conv2d_backward_weight(dy.values(), yd, x.values(), xd, g, grad.weight.values(), {});
  for (int ch = 0; ch < yd.channels; ++ch) {
    double s = 0.0;
    for (double v : dy.channel(ch)) s += v;
    grad.bias[static_cast<std::size_t>(ch)] += s;
  }
  Tensor dx({xd.channels, xd.rows, xd.cols});
  kernels::parallel::conv2d_forward(dy.values(), yd, c.weight.values(), {}, g, dx.values(), xd);
  return dx;
}

void relu_inplace(Tensor& t) {
  for (double& v : t.values()) v = v > 0.0 ? v : 0.0;
}

// dx = dy where the forward activation was positive
void relu_mask(Tensor& grad, const Tensor& activation) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(activation[i] > 0.0)) grad[i] = 0.0;
  }
}

// Floored at the smallest normal double: exp(z) underflows below z = -745.
double softplus(double z) {
  return std::max(std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))), std::numeric_limits<double>::min());
}
double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<double> dense_forward(const Dense& d, const std::vector<double>& x) {
  const int out = d.weight.dim(0);
  const int in = d.weight.dim(1);
  std::vector<double> y(static_cast<std::size_t>(out));
  for (int o = 0; o < out; ++o) {
    double acc = d.bias[static_cast<std::size_t>(o)];
    for (int i = 0; i < in; ++i) acc += d.weight[static_cast<std::size_t>(o) * in + i] * x[static_cast<std::size_t>(i)];
    y[static_cast<std::size_t>(o)] = acc;
  }
  return y;
}

std::vector<double> dense_backward(const Dense& d, const std::vector<double>& x, const std::vector<double>& dy,
                                   Dense& grad) {
  const int out = d.weight.dim(0);
  const int in = d.weight.dim(1);
  std::vector<double> dx(static_cast<std::size_t>(in), 0.0);
  for (int o = 0; o < out; ++o) {
    const double g = dy[static_cast<std::size_t>(o)];
    grad.bias[static_cast<std::size_t>(o)] += g;
    for (int i = 0; i < in; ++i) {
      grad.weight[static_cast<std::size_t>(o) * in + i] += g * x[static_cast<std::size_t>(i)];
      dx[static_cast<std::size_t>(i)] += d.weight[static_cast<std::size_t>(o) * in + i] * g;
    }
  }
  return dx;
}

std::vector<double> relu(std::vector<double> v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
  return v;
}

// Re(T^H T x) for a real image x.
Image normal_real(const MeasurementOp& op, const Image& x) { return real_part(op.normal(to_complex(x))); }

void check_image(const Image& x, const MeasurementOp& op, const char* where) {
  if (x.rank() != 3 || x.channels() != 1 || x.rows() != op.rows() || x.cols() != op.cols()) {
    throw ShapeMismatch(std::string(where) + ": image " + shape_string(x.shape()) + " does not match operator " +
                        std::to_string(op.rows()) + "x" + std::to_string(op.cols()));
  }
}

template <class ParamsT, class Out, class Fn>
void visit_conv(const std::string& name, ParamsT& c, Out& out, Fn make) {
  out.push_back(make(name + ".weight", c.weight));
  out.push_back(make(name + ".bias", c.bias));
}

template <class ParamsT, class Out, class Fn>
void collect(ParamsT& params, Out& out, Fn make) {
  char buf[32];
  for (std::size_t s = 0; s < params.correction.size(); ++s) {
    std::snprintf(buf, sizeof buf, "correction.%02zu", s + 1);
    const std::string base = buf;
    auto& c = params.correction[s];
    visit_conv(base + ".restrict", c.restrict, out, make);
    visit_conv(base + ".sol_in", c.sol_in, out, make);
    for (std::size_t b = 0; b < c.blocks.size(); ++b) {
      visit_conv(base + ".blocks." + std::to_string(b) + ".conv1", c.blocks[b].conv1, out, make);
      visit_conv(base + ".blocks." + std::to_string(b) + ".conv2", c.blocks[b].conv2, out, make);
    }
    visit_conv(base + ".sol_out", c.sol_out, out, make);
    visit_conv(base + ".prolong", c.prolong, out, make);
  }
  for (std::size_t s = 0; s < params.prior.size(); ++s) {
    std::snprintf(buf, sizeof buf, "prior.%02zu", s + 1);
    const std::string base = buf;
    auto& pr = params.prior[s];
    visit_conv(base + ".distill_a", pr.distill_a, out, make);
    for (std::size_t j = 0; j < pr.distill_b.size(); ++j) {
      visit_conv(base + ".distill_b." + std::to_string(j), pr.distill_b[j], out, make);
    }
    visit_conv(base + ".fuse", pr.fuse, out, make);
  }
  auto& cond = params.condition;
  visit_conv("condition.trunk1", cond.trunk1, out, make);
  visit_conv("condition.trunk2", cond.trunk2, out, make);
  if (!cond.eta_head.weight.empty()) visit_conv("condition.eta_head", cond.eta_head, out, make);
  if (!cond.beta_head.weight.empty()) visit_conv("condition.beta_head", cond.beta_head, out, make);
  if (!cond.eta_free.empty()) out.push_back(make("condition.eta_free", cond.eta_free));
}

// fan-in used for Kaiming scaling; empty for biases
std::size_t fan_in(const std::string& name, const Tensor& t) {
  if (t.rank() == 4) {
    if (name.find(".prolong.") != std::string::npos) return static_cast<std::size_t>(t.dim(1)) * t.dim(2) * t.dim(3);
    return static_cast<std::size_t>(t.dim(1)) * t.dim(2) * t.dim(3);
  }
  if (t.rank() == 2) return static_cast<std::size_t>(t.dim(1));
  return 0;
}

}  // namespace

void validate(const ModelConfig& cfg) {
  if (cfg.p < 1) throw InvalidArgument("model: p must be >= 1");
  if (cfg.k < 1) throw InvalidArgument("model: k must be >= 1");
  if (cfg.stages < 1 || cfg.stages % 2 == 0) throw InvalidArgument("model: stage count must be odd and >= 1");
  for (double r : cfg.ratios) {
    if (!(r > 0.0 && r <= 1.0)) throw InvalidArgument("model: training ratios must lie in (0, 1]");
  }
}

std::vector<NamedTensor> named_parameters(ModelParams& params) {
  std::vector<NamedTensor> out;
  collect(params, out, [](const std::string& n, Tensor& t) { return NamedTensor{n, &t}; });
  return out;
}

std::vector<ConstNamedTensor> named_parameters(const ModelParams& params) {
  std::vector<ConstNamedTensor> out;
  collect(params, out, [](const std::string& n, const Tensor& t) { return ConstNamedTensor{n, &t}; });
  return out;
}

std::string parameter_family(const std::string& name) {
  if (name.find(".restrict.") != std::string::npos) return "restrict";
  if (name.find(".prolong.") != std::string::npos) return "prolong";
  if (name.find(".sol_in.") != std::string::npos || name.find(".sol_out.") != std::string::npos ||
      name.find(".blocks.") != std::string::npos) {
    return "sol";
  }
  if (name.find(".distill_") != std::string::npos) return "distill";
  if (name.find(".fuse.") != std::string::npos) return "fuse";
  if (name.find(".trunk") != std::string::npos) return "trunk";
  if (name.find("_head.") != std::string::npos || name.find("eta_free") != std::string::npos) return "heads";
  return "other";
}

ModelParams zero_params(const ModelConfig& cfg) {
  validate(cfg);
  const int p = cfg.p;
  ModelParams params;
  const int n_corr = cfg.share_correction ? 1 : cfg.stages;
  const int n_prior = cfg.share_prior ? 1 : cfg.stages;
  for (int s = 0; s < n_corr; ++s) {
    CorrectionParams c;
    c.restrict = make_conv(2, 2, 2);
    c.sol_in = make_conv(p, 2, 3);
    for (auto& b : c.blocks) b = {make_conv(p, p, 3), make_conv(p, p, 3)};
    c.sol_out = make_conv(2, p, 3);
    c.prolong = make_conv_transpose(2, 1, 2);
    params.correction.push_back(std::move(c));
  }
  for (int s = 0; s < n_prior; ++s) {
    PriorParams pr;
    pr.distill_a = make_conv(p, 3, 3);
    for (int j = 0; j + 1 < cfg.k; ++j) pr.distill_b.push_back(make_conv(p, p, 3));
    pr.fuse = make_conv(1, 3 + cfg.k * p, 1);
    params.prior.push_back(std::move(pr));
  }
  auto& cond = params.condition;
  cond.trunk1 = make_dense(p, 1);
  cond.trunk2 = make_dense(p, p);
  if (cfg.condition_eta) {
    cond.eta_head = make_dense(cfg.stages, p);
  } else {
    cond.eta_free = Tensor({cfg.stages});
  }
  if (cfg.condition_beta) cond.beta_head = make_dense(cfg.stages, p);
  return params;
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams out = params;
  for (auto& nt : named_parameters(out)) nt.tensor->fill(0.0);
  return out;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams params = zero_params(cfg);
  Rng rng(seed);
  for (auto& nt : named_parameters(params)) {
    const std::size_t fan = fan_in(nt.name, *nt.tensor);
    if (fan == 0) continue;
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan));
    for (double& v : nt.tensor->values()) v = static_cast<float>(std_dev * rng.normal());
  }
  return params;
}

ParamCount param_count(const ModelParams& params) {
  ParamCount count;
  for (const auto& nt : named_parameters(params)) {
    const std::string family = parameter_family(nt.name);
    const std::size_t n = nt.tensor->size();
    if (family == "restrict") count.restrict += n;
    else if (family == "sol") count.solution += n;
    else if (family == "prolong") count.prolong += n;
    else if (family == "distill") count.distill += n;
    else if (family == "fuse") count.fuse += n;
    else if (family == "trunk") count.trunk += n;
    else if (nt.name.starts_with("condition.eta_head.")) count.eta_head += n;
    else if (nt.name.starts_with("condition.beta_head.")) count.beta_head += n;
    else count.free_steps += n;
    count.total += n;
  }
  return count;
}

void check_params(const ModelParams& params, const ModelConfig& cfg) {
  const ModelParams expected = zero_params(cfg);
  const auto want = named_parameters(expected);
  const auto got = named_parameters(params);
  if (want.size() != got.size()) {
    throw ShapeMismatch("parameters have " + std::to_string(got.size()) + " tensors, config implies " +
                        std::to_string(want.size()));
  }
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i].name != got[i].name || want[i].tensor->shape() != got[i].tensor->shape()) {
      throw ShapeMismatch("parameter " + got[i].name + " " + shape_string(got[i].tensor->shape()) +
                          " does not match config (" + want[i].name + " " +
                          shape_string(want[i].tensor->shape()) + ")");
    }
  }
}

namespace {

struct ConditionEval {
  Hyper hyper;
  ConditionTape tape;
  std::vector<double> t1, t2;
};

ConditionEval eval_condition(const ConditionParams& params, const ModelConfig& cfg, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("condition: alpha must lie in (0, 1]");
  ConditionEval ev;
  ev.tape.alpha = alpha;
  ev.tape.a1 = dense_forward(params.trunk1, {alpha});
  ev.t1 = relu(ev.tape.a1);
  ev.tape.a2 = dense_forward(params.trunk2, ev.t1);
  ev.t2 = relu(ev.tape.a2);
  const auto n = static_cast<std::size_t>(cfg.stages);
  ev.hyper.eta.resize(n);
  ev.hyper.beta.assign(n, 0.0);
  if (cfg.condition_eta) {
    ev.tape.z_eta = dense_forward(params.eta_head, ev.t2);
  } else {
    ev.tape.z_eta.assign(params.eta_free.values().begin(), params.eta_free.values().end());
  }
  for (std::size_t i = 0; i < n; ++i) ev.hyper.eta[i] = softplus(ev.tape.z_eta[i]);
  if (cfg.condition_beta) {
    ev.tape.z_beta = dense_forward(params.beta_head, ev.t2);
    for (std::size_t i = 0; i < n; ++i) ev.hyper.beta[i] = softplus(ev.tape.z_beta[i]);
  }
  return ev;
}

void condition_backward(const ConditionParams& params, const ModelConfig& cfg, const ConditionTape& tape,
                        const std::vector<double>& d_eta, const std::vector<double>& d_beta, ConditionParams& grad) {
  const auto n = static_cast<std::size_t>(cfg.stages);
  std::vector<double> dz_eta(n), dz_beta(n);
  for (std::size_t i = 0; i < n; ++i) dz_eta[i] = d_eta[i] * sigmoid(tape.z_eta[i]);
  const std::vector<double> t1 = relu(tape.a1);
  const std::vector<double> t2 = relu(tape.a2);
  std::vector<double> dt2(t2.size(), 0.0);
  if (cfg.condition_eta) {
    const auto d = dense_backward(params.eta_head, t2, dz_eta, grad.eta_head);
    for (std::size_t i = 0; i < dt2.size(); ++i) dt2[i] += d[i];
  } else {
    for (std::size_t i = 0; i < n; ++i) grad.eta_free[i] += dz_eta[i];
  }
  if (cfg.condition_beta) {
    for (std::size_t i = 0; i < n; ++i) dz_beta[i] = d_beta[i] * sigmoid(tape.z_beta[i]);
    const auto d = dense_backward(params.beta_head, t2, dz_beta, grad.beta_head);
    for (std::size_t i = 0; i < dt2.size(); ++i) dt2[i] += d[i];
  }
  for (std::size_t i = 0; i < dt2.size(); ++i) {
    if (!(tape.a2[i] > 0.0)) dt2[i] = 0.0;
  }
  std::vector<double> dt1 = dense_backward(params.trunk2, t1, dt2, grad.trunk2);
  for (std::size_t i = 0; i < dt1.size(); ++i) {
    if (!(tape.a1[i] > 0.0)) dt1[i] = 0.0;
  }
  dense_backward(params.trunk1, {tape.alpha}, dt1, grad.trunk1);
}

Tensor solution_backward(const CorrectionParams& params, const SolutionTape& tape, const Tensor& d_out,
                         CorrectionParams& grad) {
  Tensor d_input = d_out;  // outer skip
  Tensor d_body = conv_backward(params.sol_out, tape.body, d_out, kSame3, grad.sol_out);
  for (int b = 3; b >= 0; --b) {
    const auto ub = static_cast<std::size_t>(b);
    Tensor activated = tape.block_pre[ub];
    relu_inplace(activated);
    Tensor d_act = conv_backward(params.blocks[ub].conv2, activated, d_body, kSame3, grad.blocks[ub].conv2);
    relu_mask(d_act, tape.block_pre[ub]);
    d_body += conv_backward(params.blocks[ub].conv1, tape.block_in[ub], d_act, kSame3, grad.blocks[ub].conv1);
  }
  d_input += conv_backward(params.sol_in, tape.input, d_body, kSame3, grad.sol_in);
  return d_input;
}

// Gradient with respect to the stage input h through the correction branch;
// the h channel itself is handled by the caller.
Image correction_backward(const CorrectionParams& params, const MeasurementOp& op, const StageTape& tape,
                          const Tensor& d_corr, CorrectionParams& grad) {
  const Tensor d_coarse_image = conv_transpose_backward(params.prolong, tape.coarse_image, d_corr, kStride2, grad.prolong);
  // coarse_image = ifft2c(s); the adjoint is fft2c.
  const Tensor d_solution = to_channels(fft2c(from_channels(d_coarse_image)));
  const Tensor d_coarse = solution_backward(params, tape.solution, d_solution, grad);
  const Tensor d_residual = conv_backward(params.restrict, tape.residual, d_coarse, kStride2, grad.restrict);
  // residual = y - T h
  Image dh = real_part(op.adjoint(from_channels(d_residual)));
  dh *= -1.0;
  return dh;
}

void prior_backward(const PriorParams& params, const StageTape& tape, const Image& dx, int k, int p,
                    PriorParams& grad, Tensor& dm) {
  Tensor d_features = conv_backward(params.fuse, tape.features, dx, kPoint, grad.fuse);
  const int rows = dx.rows();
  const int cols = dx.cols();
  const std::size_t plane = static_cast<std::size_t>(rows) * cols;
  auto slice = [&](const Tensor& t, int first, int count) {
    Tensor s({count, rows, cols});
    std::copy_n(t.data() + first * plane, count * plane, s.data());
    return s;
  };
  dm = slice(d_features, 0, 3);
  // carried gradient of u_j, including the fusion path
  Tensor d_u = slice(d_features, 3 + (k - 1) * p, p);
  for (int j = k; j >= 1; --j) {
    const Tensor u = slice(tape.features, 3 + (j - 1) * p, p);
    relu_mask(d_u, u);
    if (j >= 2) {
      const Tensor u_prev = slice(tape.features, 3 + (j - 2) * p, p);
      const auto idx = static_cast<std::size_t>(j - 2);
      Tensor d_prev = conv_backward(params.distill_b[idx], u_prev, d_u, kSame3, grad.distill_b[idx]);
      d_prev += slice(d_features, 3 + (j - 2) * p, p);
      d_u = std::move(d_prev);
    } else {
      const Tensor m = slice(tape.features, 0, 3);
      dm += conv_backward(params.distill_a, m, d_u, kSame3, grad.distill_a);
    }
  }
}

}  // namespace

Hyper condition(const ConditionParams& params, const ModelConfig& cfg, double alpha) {
  return eval_condition(params, cfg, alpha).hyper;
}

Image pre_relax(const Image& x_prev, double eta, const MeasurementOp& op, const ComplexField& y) {
  check_image(x_prev, op, "pre_relax");
  ComplexField r = op.forward(x_prev);
  if (!r.same_shape(y)) throw ShapeMismatch("pre_relax: data shape mismatch");
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
  const Image g = real_part(op.adjoint(r));
  Image h = x_prev;
  for (std::size_t i = 0; i < h.size(); ++i) h[i] -= eta * g[i];
  return h;
}

Tensor solution_operator(const CorrectionParams& params, const Tensor& coarse, SolutionTape* tape) {
  if (coarse.rank() != 3 || coarse.channels() != 2) {
    throw ShapeMismatch("solution operator expects (2, rows, cols), got " + shape_string(coarse.shape()));
  }
  Tensor u = conv_forward(params.sol_in, coarse, kSame3);
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    Tensor pre = conv_forward(params.blocks[b].conv1, u, kSame3);
    Tensor act = pre;
    relu_inplace(act);
    Tensor next = conv_forward(params.blocks[b].conv2, act, kSame3);
    next += u;
    if (tape) {
      tape->block_in[b] = std::move(u);
      tape->block_pre[b] = std::move(pre);
    }
    u = std::move(next);
  }
  Tensor out = conv_forward(params.sol_out, u, kSame3);
  out += coarse;
  if (tape) {
    tape->input = coarse;
    tape->body = std::move(u);
  }
  return out;
}

Tensor correction(const CorrectionParams& params, const Image& h, const MeasurementOp& op, const ComplexField& y,
                  double beta, bool enabled, StageTape* tape) {
  check_image(h, op, "correction");
  const int rows = h.rows();
  const int cols = h.cols();
  if (rows % 2 || cols % 2) throw InvalidArgument("correction: image dimensions must be even");
  if (!y.same_shape(op.forward(h))) throw ShapeMismatch("correction: data shape mismatch");

  Tensor m({3, rows, cols});
  std::copy(h.values().begin(), h.values().end(), m.channel(0).begin());
  std::fill(m.channel(2).begin(), m.channel(2).end(), beta);
  if (!enabled) return m;

  ComplexField r = op.forward(h);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = y[i] - r[i];
  op.project(r);
  Tensor residual = to_channels(r);
  Tensor coarse = conv_forward(params.restrict, residual, kStride2);
  Tensor solved = solution_operator(params, coarse, tape ? &tape->solution : nullptr);
  Tensor coarse_image = to_channels(ifft2c(from_channels(solved)));
  Tensor corr = conv_transpose_forward(params.prolong, coarse_image, kStride2);
  std::copy(corr.values().begin(), corr.values().end(), m.channel(1).begin());
  if (tape) {
    tape->residual = std::move(residual);
    tape->coarse = std::move(coarse);
    tape->coarse_image = std::move(coarse_image);
    tape->correction = std::move(corr);
  }
  return m;
}

Image prior_distill(const PriorParams& params, const Tensor& m, StageTape* tape) {
  if (m.rank() != 3 || m.channels() != 3) {
    throw ShapeMismatch("prior_distill expects (3, rows, cols), got " + shape_string(m.shape()));
  }
  const int p = params.distill_a.weight.dim(0);
  const int k = static_cast<int>(params.distill_b.size()) + 1;
  const int rows = m.rows();
  const int cols = m.cols();
  const std::size_t plane = static_cast<std::size_t>(rows) * cols;
  Tensor features({3 + k * p, rows, cols});
  std::copy(m.values().begin(), m.values().end(), features.data());
  Tensor u = conv_forward(params.distill_a, m, kSame3);
  relu_inplace(u);
  std::copy(u.values().begin(), u.values().end(), features.data() + 3 * plane);
  for (int j = 2; j <= k; ++j) {
    u = conv_forward(params.distill_b[static_cast<std::size_t>(j - 2)], u, kSame3);
    relu_inplace(u);
    std::copy(u.values().begin(), u.values().end(), features.data() + (3 + (j - 1) * p) * plane);
  }
  Image x = conv_forward(params.fuse, features, kPoint);
  if (tape) tape->features = std::move(features);
  return x;
}

ForwardResult forward_pass(const ModelParams& params, const ModelConfig& cfg, const MeasurementOp& op,
                           const ComplexField& y, double alpha, Tape* tape) {
  validate(cfg);
  if (params.prior.empty() || params.correction.empty()) throw ShapeMismatch("forward_pass: empty parameters");
  if (static_cast<int>(params.prior.size()) != (cfg.share_prior ? 1 : cfg.stages) ||
      static_cast<int>(params.correction.size()) != (cfg.share_correction ? 1 : cfg.stages) ||
      params.prior.front().distill_a.weight.dim(0) != cfg.p ||
      static_cast<int>(params.prior.front().distill_b.size()) != cfg.k - 1) {
    throw ShapeMismatch("forward_pass: parameters do not match the model configuration");
  }
  if (y.rows() != op.rows() || y.cols() != op.cols()) throw ShapeMismatch("forward_pass: data shape mismatch");

  ConditionEval cond = eval_condition(params.condition, cfg, alpha);
  ForwardResult result;
  result.hyper = cond.hyper;
  result.x0 = zero_fill(op, y);
  if (tape) {
    tape->condition = cond.tape;
    tape->stages.assign(static_cast<std::size_t>(cfg.stages), StageTape{});
  }
  Image x = result.x0;
  for (int s = 0; s < cfg.stages; ++s) {
    const auto us = static_cast<std::size_t>(s);
    StageTape* st = tape ? &tape->stages[us] : nullptr;
    const double eta = cond.hyper.eta[us];
    const double beta = cond.hyper.beta[us];
    Image h = pre_relax(x, eta, op, y);
    const Tensor m = correction(params.correction_at(s), h, op, y, beta, cfg.use_correction, st);
    Image next = prior_distill(params.prior_at(s), m, st);
    if (st) {
      st->x_prev = std::move(x);
      ComplexField r = op.forward(st->x_prev);
      for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
      st->data_grad = real_part(op.adjoint(r));
      st->h = std::move(h);
      st->eta = eta;
      st->beta = beta;
    }
    result.trace.push_back(next);
    x = std::move(next);
  }
  result.x_mid = result.trace[static_cast<std::size_t>(mid_stage(cfg) - 1)];
  result.x_final = result.trace.back();
  return result;
}

void backward_pass(const ModelParams& params, const ModelConfig& cfg, const MeasurementOp& op, const Tape& tape,
                   const Image& d_mid, const Image& d_final, ModelParams& grad) {
  const auto n = static_cast<std::size_t>(cfg.stages);
  if (tape.stages.size() != n) throw InvalidArgument("backward_pass: tape does not match the configuration");
  std::vector<double> d_eta(n, 0.0), d_beta(n, 0.0);
  Image dx = d_final;
  const int mid = mid_stage(cfg) - 1;
  for (int s = cfg.stages - 1; s >= 0; --s) {
    const auto us = static_cast<std::size_t>(s);
    const StageTape& st = tape.stages[us];
    if (s == mid) dx += d_mid;

    Tensor dm;
    prior_backward(params.prior_at(s), st, dx, cfg.k, cfg.p, grad.prior_at(s), dm);
    Image dh = Tensor::image(dm.rows(), dm.cols());
    std::copy(dm.channel(0).begin(), dm.channel(0).end(), dh.values().begin());
    if (cfg.condition_beta) {
      double sum = 0.0;
      for (double v : dm.channel(2)) sum += v;
      d_beta[us] = sum;
    }
    if (cfg.use_correction) {
      Tensor d_corr({1, dm.rows(), dm.cols()});
      std::copy(dm.channel(1).begin(), dm.channel(1).end(), d_corr.values().begin());
      dh += correction_backward(params.correction_at(s), op, st, d_corr, grad.correction_at(s));
    }
    // h = x_prev - eta * data_grad(x_prev)
    d_eta[us] = -dot(dh.values(), st.data_grad.values());
    Image through = normal_real(op, dh);
    through *= -st.eta;
    dh += through;
    dx = std::move(dh);
  }
  condition_backward(params.condition, cfg, tape.condition, d_eta, d_beta, grad.condition);
}

}  // namespace csmri
