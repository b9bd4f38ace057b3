#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "csmri/data.hpp"
#include "csmri/kspace.hpp"
#include "csmri/model.hpp"
#include "csmri/rng.hpp"

namespace csmri {

struct TrainConfig {
  double lr = 1e-4;
  int epochs = 500;
  int batch = 1;
  std::uint64_t seed = 0;
  std::vector<double> ratios{0.1, 0.2, 0.3, 0.4, 0.5};
  MaskFamily mask_family = MaskFamily::cartesian;
  bool augment = true;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

void validate(const TrainConfig& cfg);

// (||x_mid - t||_1 + ||x_final - t||_1) / (m n)
double loss(const Image& x_mid, const Image& x_final, const Image& target);
// Mean of the per-sample losses.
double batch_loss(const std::vector<Image>& mids, const std::vector<Image>& finals, const std::vector<Image>& targets);
// Gradients of loss() with respect to x_mid and x_final, scaled by `scale`.
// The subgradient of |.| at 0 is taken as 0.
void loss_gradient(const Image& x_mid, const Image& x_final, const Image& target, double scale, Image& d_mid,
                   Image& d_final);

Image flip_horizontal(const Image& x);
Image flip_vertical(const Image& x);
// Horizontal flip with probability 1/2, then vertical flip with probability
// 1/2; the horizontal coin is drawn first.
Image augment(const Image& x, Rng& rng);

struct AdamState {
  ModelParams m;
  ModelParams v;
  long long step = 0;
};

AdamState make_adam_state(const ModelParams& params);
// One Adam update; parameters are rounded to float afterwards.
void adam_step(ModelParams& params, const ModelParams& grad, AdamState& state, const TrainConfig& cfg);

// One fixed mask per (family, ratio, shape) for the lifetime of the cache,
// generated from the master seed.
class MaskCache {
 public:
  explicit MaskCache(std::uint64_t seed) : seed_(seed) {}
  std::shared_ptr<const SamplingMask> get(MaskFamily family, double ratio, int rows, int cols);
  std::size_t size() const { return cache_.size(); }

 private:
  std::uint64_t seed_;
  std::map<std::tuple<int, double, int, int>, std::shared_ptr<const SamplingMask>> cache_;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;      // mean training loss over the epoch
  double val_psnr = 0.0;  // NaN when there is no validation set
};

struct TrainOptions {
  // Explicit validation set; otherwise the last 10% (rounded down) of the
  // training data is held out.
  const Dataset* validation = nullptr;
  // Starting point for resumed runs; fresh Kaiming initialization otherwise.
  const ModelParams* initial = nullptr;
  int first_epoch = 1;
  std::function<void(const EpochRecord&, const ModelParams&)> on_epoch;
  // Observes every mask lookup (tests use it to check mask identity).
  std::function<void(const std::shared_ptr<const SamplingMask>&)> on_mask;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> history;
};

// Epochs first_epoch .. first_epoch + epochs - 1. Each epoch visits the
// training images in a seeded shuffled order; per sample a ratio is drawn
// uniformly from cfg.ratios, y = T x is synthesized with the cached mask, and
// every `batch` samples one Adam step is taken on the mean loss.
TrainResult train(const ModelConfig& model_cfg, const TrainConfig& train_cfg, const Dataset& data,
                  const TrainOptions& options = {});

// Mean PSNR of the final output over images, at one ratio.
double mean_psnr(const ModelParams& params, const ModelConfig& cfg, const std::vector<Image>& images,
                 const MeasurementOp& op, double alpha);

nlohmann::ordered_json to_json(const ModelConfig& cfg);
nlohmann::ordered_json to_json(const TrainConfig& cfg);
// Missing keys keep their defaults; unknown keys throw InvalidArgument.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  ModelParams params;
  int epoch = 0;
  std::vector<EpochRecord> history;
};

// Directory with manifest.json and one <name>.f32 little-endian blob per
// tensor, in named_parameters order.
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
// Throws CheckpointError for missing or mismatched tensors and
// CorruptCheckpoint for blobs whose size or checksum disagree with the manifest.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace csmri
