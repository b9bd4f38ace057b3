#include "csmri/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include <zlib.h>

#include "csmri/errors.hpp"

namespace csmri {

void validate(const TrainConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw InvalidArgument("train: lr must be > 0");
  if (cfg.epochs < 1) throw InvalidArgument("train: epochs must be >= 1");
  if (cfg.batch < 1) throw InvalidArgument("train: batch must be >= 1");
  if (cfg.ratios.empty()) throw InvalidArgument("train: ratio list is empty");
  for (double r : cfg.ratios) {
    if (!(r > 0.0 && r <= 1.0)) throw InvalidArgument("train: ratios must lie in (0, 1]");
  }
  if (!(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0) || !(cfg.adam_beta2 >= 0.0 && cfg.adam_beta2 < 1.0) ||
      !(cfg.adam_eps > 0.0)) {
    throw InvalidArgument("train: invalid Adam constants");
  }
}

double loss(const Image& x_mid, const Image& x_final, const Image& target) {
  require_same_shape(x_mid, target, "loss");
  require_same_shape(x_final, target, "loss");
  double sum = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    sum += std::abs(x_mid[i] - target[i]) + std::abs(x_final[i] - target[i]);
  }
  return sum / static_cast<double>(target.size());
}

double batch_loss(const std::vector<Image>& mids, const std::vector<Image>& finals, const std::vector<Image>& targets) {
  if (mids.size() != targets.size() || finals.size() != targets.size() || targets.empty()) {
    throw ShapeMismatch("batch_loss: batch sizes differ or are empty");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) sum += loss(mids[i], finals[i], targets[i]);
  return sum / static_cast<double>(targets.size());
}

void loss_gradient(const Image& x_mid, const Image& x_final, const Image& target, double scale, Image& d_mid,
                   Image& d_final) {
  require_same_shape(x_mid, target, "loss_gradient");
  require_same_shape(x_final, target, "loss_gradient");
  const double w = scale / static_cast<double>(target.size());
  auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
  d_mid = Tensor::zeros_like(target);
  d_final = Tensor::zeros_like(target);
  for (std::size_t i = 0; i < target.size(); ++i) {
    d_mid[i] = w * sign(x_mid[i] - target[i]);
    d_final[i] = w * sign(x_final[i] - target[i]);
  }
}

Image flip_horizontal(const Image& x) {
  Image out = x;
  for (int c = 0; c < x.channels(); ++c) {
    for (int r = 0; r < x.rows(); ++r) {
      for (int col = 0; col < x.cols(); ++col) out.at(c, r, col) = x.at(c, r, x.cols() - 1 - col);
    }
  }
  return out;
}

Image flip_vertical(const Image& x) {
  Image out = x;
  for (int c = 0; c < x.channels(); ++c) {
    for (int r = 0; r < x.rows(); ++r) {
      for (int col = 0; col < x.cols(); ++col) out.at(c, r, col) = x.at(c, x.rows() - 1 - r, col);
    }
  }
  return out;
}

Image augment(const Image& x, Rng& rng) {
  const bool h = rng.coin(0.5);
  const bool v = rng.coin(0.5);
  Image out = h ? flip_horizontal(x) : x;
  return v ? flip_vertical(out) : out;
}

AdamState make_adam_state(const ModelParams& params) { return {zeros_like(params), zeros_like(params), 0}; }

void adam_step(ModelParams& params, const ModelParams& grad, AdamState& state, const TrainConfig& cfg) {
  auto p = named_parameters(params);
  const auto g = named_parameters(grad);
  auto m = named_parameters(state.m);
  auto v = named_parameters(state.v);
  if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
    throw ShapeMismatch("adam_step: gradient and parameter structures differ");
  }
  ++state.step;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < p.size(); ++t) {
    Tensor& pt = *p[t].tensor;
    const Tensor& gt = *g[t].tensor;
    Tensor& mt = *m[t].tensor;
    Tensor& vt = *v[t].tensor;
    for (std::size_t i = 0; i < pt.size(); ++i) {
      mt[i] = b1 * mt[i] + (1.0 - b1) * gt[i];
      vt[i] = b2 * vt[i] + (1.0 - b2) * gt[i] * gt[i];
      const double update = cfg.lr * (mt[i] / c1) / (std::sqrt(vt[i] / c2) + cfg.adam_eps);
      pt[i] = static_cast<float>(pt[i] - update);
    }
  }
}

std::shared_ptr<const SamplingMask> MaskCache::get(MaskFamily family, double ratio, int rows, int cols) {
  const auto key = std::make_tuple(static_cast<int>(family), ratio, rows, cols);
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    it = cache_.emplace(key, std::make_shared<const SamplingMask>(make_mask(rows, cols, ratio, family, seed_))).first;
  }
  return it->second;
}

double mean_psnr(const ModelParams& params, const ModelConfig& cfg, const std::vector<Image>& images,
                 const MeasurementOp& op, double alpha) {
  if (images.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (const Image& x : images) {
    const ForwardResult out = forward_pass(params, cfg, op, op.forward(x), alpha);
    sum += psnr(out.x_final, x);
  }
  return sum / static_cast<double>(images.size());
}

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& train_cfg, const Dataset& data,
                  const TrainOptions& options) {
  validate(model_cfg);
  validate(train_cfg);
  if (data.images.empty()) throw InvalidArgument("train: dataset is empty");
  const int rows = data.rows();
  const int cols = data.cols();
  if (rows % 2 || cols % 2) throw InvalidArgument("train: image dimensions must be even");
  for (const Image& x : data.images) {
    if (x.rows() != rows || x.cols() != cols) throw ShapeMismatch("train: images differ in shape");
  }

  std::vector<Image> train_images = data.images;
  std::vector<Image> val_images;
  if (options.validation) {
    val_images = options.validation->images;
  } else {
    const std::size_t held = data.images.size() / 10;
    val_images.assign(train_images.end() - static_cast<std::ptrdiff_t>(held), train_images.end());
    train_images.resize(train_images.size() - held);
  }

  TrainResult result;
  if (options.initial) {
    check_params(*options.initial, model_cfg);
    result.params = *options.initial;
  } else {
    result.params = init_params(model_cfg, derive_seed(train_cfg.seed, 0x1417));
  }
  AdamState adam = make_adam_state(result.params);
  MaskCache masks(train_cfg.seed);
  auto mask_for = [&](double ratio) {
    auto mask = masks.get(train_cfg.mask_family, ratio, rows, cols);
    if (options.on_mask) options.on_mask(mask);
    return mask;
  };

  ModelParams grad = zeros_like(result.params);
  for (int e = 0; e < train_cfg.epochs; ++e) {
    const int epoch = options.first_epoch + e;
    Rng rng(derive_seed(train_cfg.seed, 0x100000000ULL + static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> order(train_images.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double loss_sum = 0.0;
    int in_batch = 0;
    auto step = [&]() {
      for (auto& nt : named_parameters(grad)) *nt.tensor *= 1.0 / in_batch;
      adam_step(result.params, grad, adam, train_cfg);
      for (auto& nt : named_parameters(grad)) nt.tensor->fill(0.0);
      in_batch = 0;
    };
    for (std::size_t s = 0; s < order.size(); ++s) {
      const double ratio = train_cfg.ratios[rng.below(train_cfg.ratios.size())];
      const Image target = train_cfg.augment ? augment(train_images[order[s]], rng) : train_images[order[s]];
      const MeasurementOp op(mask_for(ratio));
      Tape tape;
      const ForwardResult out = forward_pass(result.params, model_cfg, op, op.forward(target), ratio, &tape);
      const double l = loss(out.x_mid, out.x_final, target);
      if (!std::isfinite(l)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", sample " + std::to_string(s),
                            epoch, static_cast<int>(s));
      }
      loss_sum += l;
      Image d_mid, d_final;
      loss_gradient(out.x_mid, out.x_final, target, 1.0, d_mid, d_final);
      backward_pass(result.params, model_cfg, op, tape, d_mid, d_final, grad);
      if (++in_batch == train_cfg.batch) step();
    }
    if (in_batch > 0) step();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(order.size());
    rec.val_psnr = std::numeric_limits<double>::quiet_NaN();
    if (!val_images.empty()) {
      double sum = 0.0;
      for (double ratio : train_cfg.ratios) {
        sum += mean_psnr(result.params, model_cfg, val_images, MeasurementOp(mask_for(ratio)), ratio);
      }
      rec.val_psnr = sum / static_cast<double>(train_cfg.ratios.size());
    }
    result.history.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec, result.params);
  }
  return result;
}

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw InvalidArgument(std::string(what) + " config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw InvalidArgument(std::string("unknown ") + what + " config key '" + key + "'");
  }
}

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config key '") + key + "': " + e.what());
  }
}

std::uint32_t swap_bytes(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

std::uint32_t checksum(const std::vector<float>& v) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(v.data()), static_cast<uInt>(v.size() * sizeof(float))));
}

std::vector<float> to_little_endian(const Tensor& t) {
  std::vector<float> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    float f = static_cast<float>(t[i]);
    if constexpr (std::endian::native == std::endian::big) f = std::bit_cast<float>(swap_bytes(std::bit_cast<std::uint32_t>(f)));
    out[i] = f;
  }
  return out;
}

}  // namespace

nlohmann::ordered_json to_json(const ModelConfig& cfg) {
  nlohmann::ordered_json j;
  j["p"] = cfg.p;
  j["k"] = cfg.k;
  j["stages"] = cfg.stages;
  j["ratios"] = cfg.ratios;
  j["use_correction"] = cfg.use_correction;
  j["condition_eta"] = cfg.condition_eta;
  j["condition_beta"] = cfg.condition_beta;
  j["share_correction"] = cfg.share_correction;
  j["share_prior"] = cfg.share_prior;
  return j;
}

nlohmann::ordered_json to_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["lr"] = cfg.lr;
  j["epochs"] = cfg.epochs;
  j["batch"] = cfg.batch;
  j["seed"] = cfg.seed;
  j["ratios"] = cfg.ratios;
  j["mask_family"] = to_string(cfg.mask_family);
  j["augment"] = cfg.augment;
  j["adam_beta1"] = cfg.adam_beta1;
  j["adam_beta2"] = cfg.adam_beta2;
  j["adam_eps"] = cfg.adam_eps;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig cfg) {
  reject_unknown(j,
                 {"p", "k", "stages", "ratios", "use_correction", "condition_eta", "condition_beta",
                  "share_correction", "share_prior"},
                 "model");
  read_key(j, "p", cfg.p);
  read_key(j, "k", cfg.k);
  read_key(j, "stages", cfg.stages);
  read_key(j, "ratios", cfg.ratios);
  read_key(j, "use_correction", cfg.use_correction);
  read_key(j, "condition_eta", cfg.condition_eta);
  read_key(j, "condition_beta", cfg.condition_beta);
  read_key(j, "share_correction", cfg.share_correction);
  read_key(j, "share_prior", cfg.share_prior);
  validate(cfg);
  return cfg;
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig cfg) {
  reject_unknown(j,
                 {"lr", "epochs", "batch", "seed", "ratios", "mask_family", "augment", "adam_beta1", "adam_beta2",
                  "adam_eps"},
                 "train");
  read_key(j, "lr", cfg.lr);
  read_key(j, "epochs", cfg.epochs);
  read_key(j, "batch", cfg.batch);
  read_key(j, "seed", cfg.seed);
  read_key(j, "ratios", cfg.ratios);
  if (j.contains("mask_family")) {
    std::string family;
    read_key(j, "mask_family", family);
    cfg.mask_family = parse_mask_family(family);
  }
  read_key(j, "augment", cfg.augment);
  read_key(j, "adam_beta1", cfg.adam_beta1);
  read_key(j, "adam_beta2", cfg.adam_beta2);
  read_key(j, "adam_eps", cfg.adam_eps);
  validate(cfg);
  return cfg;
}

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt) {
  check_params(ckpt.params, ckpt.model);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw CheckpointError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());

  nlohmann::ordered_json manifest;
  manifest["format"] = "csmri-checkpoint";
  manifest["version"] = 1;
  manifest["model"] = to_json(ckpt.model);
  manifest["train"] = to_json(ckpt.train);
  manifest["epoch"] = ckpt.epoch;
  auto history = nlohmann::ordered_json::array();
  for (const auto& rec : ckpt.history) {
    nlohmann::ordered_json h;
    h["epoch"] = rec.epoch;
    h["loss"] = rec.loss;
    h["val_psnr"] = std::isfinite(rec.val_psnr) ? nlohmann::ordered_json(rec.val_psnr) : nlohmann::ordered_json();
    history.push_back(h);
  }
  manifest["history"] = history;
  auto tensors = nlohmann::ordered_json::array();
  for (const auto& nt : named_parameters(ckpt.params)) {
    const std::vector<float> blob = to_little_endian(*nt.tensor);
    const std::string file = nt.name + ".f32";
    std::ofstream out(dir / file, std::ios::binary);
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size() * sizeof(float)));
    if (!out) throw CheckpointError("failed writing " + (dir / file).string());
    nlohmann::ordered_json t;
    t["name"] = nt.name;
    t["shape"] = nt.tensor->shape();
    t["file"] = file;
    t["count"] = blob.size();
    t["crc32"] = checksum(blob);
    tensors.push_back(t);
  }
  manifest["tensors"] = tensors;
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw CheckpointError("missing manifest in " + dir.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint("unreadable manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != "csmri-checkpoint") throw CheckpointError("not a checkpoint: " + dir.string());

  Checkpoint ckpt;
  ckpt.model = model_config_from_json(manifest.at("model"));
  ckpt.train = train_config_from_json(manifest.at("train"));
  ckpt.epoch = manifest.at("epoch").get<int>();
  for (const auto& h : manifest.at("history")) {
    EpochRecord rec;
    rec.epoch = h.at("epoch").get<int>();
    rec.loss = h.at("loss").get<double>();
    rec.val_psnr = h.at("val_psnr").is_null() ? std::numeric_limits<double>::quiet_NaN() : h.at("val_psnr").get<double>();
    ckpt.history.push_back(rec);
  }

  ckpt.params = zero_params(ckpt.model);
  auto params = named_parameters(ckpt.params);
  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != params.size()) {
    throw CheckpointError("checkpoint lists " + std::to_string(tensors.size()) + " tensors, config implies " +
                          std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = tensors[i];
    const std::string name = t.at("name").get<std::string>();
    if (name != params[i].name) throw CheckpointError("missing tensor " + params[i].name + " (found " + name + ")");
    if (t.at("shape").get<std::vector<int>>() != params[i].tensor->shape()) {
      throw CheckpointError("tensor " + name + " shape disagrees with the model config");
    }
    const auto count = t.at("count").get<std::size_t>();
    if (count != params[i].tensor->size()) throw CheckpointError("tensor " + name + " count disagrees with its shape");
    const auto path = dir / t.at("file").get<std::string>();
    std::error_code ec;
    const auto bytes = std::filesystem::file_size(path, ec);
    if (ec) throw CheckpointError("missing blob " + path.string());
    if (bytes != count * sizeof(float)) {
      throw CorruptCheckpoint("blob " + path.string() + " has " + std::to_string(bytes) + " bytes, expected " +
                              std::to_string(count * sizeof(float)));
    }
    std::vector<float> blob(count);
    std::ifstream bin(path, std::ios::binary);
    bin.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(bytes));
    if (!bin) throw CorruptCheckpoint("short read on " + path.string());
    if (checksum(blob) != t.at("crc32").get<std::uint32_t>()) throw CorruptCheckpoint("checksum mismatch in " + path.string());
    for (std::size_t k = 0; k < count; ++k) {
      float f = blob[k];
      if constexpr (std::endian::native == std::endian::big) f = std::bit_cast<float>(swap_bytes(std::bit_cast<std::uint32_t>(f)));
      (*params[i].tensor)[k] = f;
    }
  }
  return ckpt;
}

}  // namespace csmri
