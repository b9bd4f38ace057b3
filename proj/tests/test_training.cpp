#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "csmri/errors.hpp"
#include "csmri/training.hpp"
#include "support.hpp"

using namespace csmri;
namespace fs = std::filesystem;

namespace {

ModelConfig toy_model() {
  ModelConfig cfg;
  cfg.p = 8;
  cfg.k = 2;
  cfg.stages = 3;
  cfg.ratios = {0.3};
  return cfg;
}

Image image2x2(double a, double b, double c, double d) {
  Image x = Tensor::image(2, 2);
  x[0] = a;
  x[1] = b;
  x[2] = c;
  x[3] = d;
  return x;
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
  const auto na = named_parameters(a);
  const auto nb = named_parameters(b);
  if (na.size() != nb.size()) return false;
  for (std::size_t i = 0; i < na.size(); ++i) {
    if (na[i].name != nb[i].name || !(*na[i].tensor == *nb[i].tensor)) return false;
  }
  return true;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Loss, Examples) {
  const Image t = image2x2(0.1, 0.2, 0.3, 0.4);
  const Image plus_one = image2x2(1.1, 1.2, 1.3, 1.4);
  EXPECT_NEAR(loss(t, plus_one, t), 1.0, 1e-15);
  EXPECT_EQ(loss(t, t, t), 0.0);
  EXPECT_THROW(loss(t, t, Tensor::image(2, 3)), ShapeMismatch);
}

TEST(Loss, HandComputed2x2) {
  const Image target = image2x2(0.5, -1.0, 2.0, 0.25);
  const Image mid = image2x2(0.75, -1.5, 2.0, 1.0);
  const Image fin = image2x2(0.5, 0.0, 1.5, -0.25);
  // mid: 0.25 + 0.5 + 0 + 0.75 = 1.5; final: 0 + 1 + 0.5 + 0.5 = 2.0
  EXPECT_NEAR(loss(mid, fin, target), 3.5 / 4.0, 1e-12);

  Image d_mid, d_final;
  loss_gradient(mid, fin, target, 2.0, d_mid, d_final);
  EXPECT_EQ(d_mid, image2x2(0.5, -0.5, 0.0, 0.5));
  EXPECT_EQ(d_final, image2x2(0.0, 0.5, -0.5, -0.5));
}

TEST(Loss, BatchMeanIsPermutationInvariant) {
  Rng rng(1);
  std::vector<Image> mids, finals, targets;
  for (int i = 0; i < 5; ++i) {
    mids.push_back(fixtures::random_image(4, 4, rng));
    finals.push_back(fixtures::random_image(4, 4, rng));
    targets.push_back(fixtures::random_image(4, 4, rng));
  }
  const double a = batch_loss(mids, finals, targets);
  double direct = 0.0;
  for (int i = 0; i < 5; ++i) direct += loss(mids[i], finals[i], targets[i]);
  EXPECT_NEAR(a, direct / 5.0, 1e-15);
  const std::vector<int> perm{3, 0, 4, 1, 2};
  std::vector<Image> m2, f2, t2;
  for (int i : perm) {
    m2.push_back(mids[i]);
    f2.push_back(finals[i]);
    t2.push_back(targets[i]);
  }
  EXPECT_NEAR(batch_loss(m2, f2, t2), a, 1e-15);
}

TEST(Augment, FlipsAreInvolutions) {
  Rng rng(2);
  const Image x = fixtures::random_image(6, 8, rng);
  EXPECT_EQ(flip_horizontal(flip_horizontal(x)), x);
  EXPECT_EQ(flip_vertical(flip_vertical(x)), x);
  EXPECT_NE(flip_horizontal(x), x);
  EXPECT_EQ(flip_horizontal(x).at(0, 2, 0), x.at(0, 2, 7));
  EXPECT_EQ(flip_vertical(x).at(0, 0, 3), x.at(0, 5, 3));
}

TEST(Augment, SymmetricImageUnchanged) {
  Image x = Tensor::image(4, 4);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) x.at(0, r, c) = std::min(std::min(r, 3 - r), std::min(c, 3 - c));
  }
  Rng rng(3);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(augment(x, rng), x);
}

TEST(Augment, FlipFrequencies) {
  Rng rng(4);
  Image x = Tensor::image(2, 2);
  x[0] = 1.0;  // top-left marker tells which flips were applied
  int horizontal = 0, vertical = 0;
  for (int i = 0; i < 1000; ++i) {
    const Image a = augment(x, rng);
    horizontal += a.at(0, 0, 1) == 1.0 || a.at(0, 1, 1) == 1.0;
    vertical += a.at(0, 1, 0) == 1.0 || a.at(0, 1, 1) == 1.0;
  }
  EXPECT_GE(horizontal, 450);
  EXPECT_LE(horizontal, 550);
  EXPECT_GE(vertical, 450);
  EXPECT_LE(vertical, 550);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  const ModelConfig cfg = toy_model();
  ModelParams p = init_params(cfg, 1);
  fixtures::jitter_biases(p, 2);
  for (auto& nt : named_parameters(p)) {
    for (double& v : nt.tensor->values()) v = static_cast<float>(v);
  }
  const ModelParams before = p;
  AdamState state = make_adam_state(p);
  const TrainConfig tcfg;
  for (int i = 0; i < 3; ++i) adam_step(p, zeros_like(p), state, tcfg);
  EXPECT_TRUE(params_equal(p, before));
  EXPECT_EQ(state.step, 3);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  const ModelConfig cfg = toy_model();
  ModelParams p = zero_params(cfg);
  ModelParams g = zeros_like(p);
  g.condition.trunk1.weight[0] = 3.0;
  g.condition.trunk1.weight[1] = -0.5;
  AdamState state = make_adam_state(p);
  TrainConfig tcfg;
  tcfg.lr = 0.01;
  adam_step(p, g, state, tcfg);
  EXPECT_NEAR(p.condition.trunk1.weight[0], -0.01, 1e-8);
  EXPECT_NEAR(p.condition.trunk1.weight[1], 0.01, 1e-8);
  EXPECT_EQ(p.condition.trunk1.weight[2], 0.0);
}

TEST(Train, RejectsBadConfig) {
  TrainConfig tcfg;
  tcfg.ratios = {};
  const Dataset d = make_phantoms(2, 16, 16, 0);
  EXPECT_THROW(train(toy_model(), tcfg, d), InvalidArgument);
  tcfg = {};
  tcfg.lr = 0.0;
  EXPECT_THROW(train(toy_model(), tcfg, d), InvalidArgument);
  tcfg = {};
  tcfg.ratios = {0.3, 1.5};
  EXPECT_THROW(train(toy_model(), tcfg, d), InvalidArgument);
}

TEST(Train, MasksAreFrozenAcrossEpochs) {
  const Dataset d = make_phantoms(4, 16, 16, 1);
  TrainConfig tcfg;
  tcfg.epochs = 3;
  tcfg.ratios = {0.2, 0.4};
  tcfg.lr = 1e-3;
  std::set<const SamplingMask*> seen;
  std::set<double> ratios_seen;
  TrainOptions opts;
  opts.on_mask = [&](const std::shared_ptr<const SamplingMask>& m) {
    seen.insert(m.get());
    ratios_seen.insert(m->alpha);
  };
  ModelConfig cfg = toy_model();
  cfg.ratios = tcfg.ratios;
  train(cfg, tcfg, d, opts);
  EXPECT_EQ(seen.size(), ratios_seen.size());
  EXPECT_LE(seen.size(), 2u);
}

TEST(Train, DeterministicUnderSeed) {
  const Dataset d = make_phantoms(5, 16, 16, 2);
  TrainConfig tcfg;
  tcfg.epochs = 2;
  tcfg.ratios = {0.2, 0.4};
  tcfg.lr = 1e-3;
  tcfg.seed = 7;
  const TrainResult a = train(toy_model(), tcfg, d);
  const TrainResult b = train(toy_model(), tcfg, d);
  EXPECT_TRUE(params_equal(a.params, b.params));
  ASSERT_EQ(a.history.size(), 2u);
  EXPECT_EQ(a.history[1].loss, b.history[1].loss);
  tcfg.seed = 8;
  EXPECT_FALSE(params_equal(a.params, train(toy_model(), tcfg, d).params));
}

TEST(Train, SingletonRatioMatchesRepeatedRatio) {
  const Dataset d = make_phantoms(4, 16, 16, 3);
  TrainConfig tcfg;
  tcfg.epochs = 2;
  tcfg.lr = 1e-3;
  tcfg.ratios = {0.3};
  const TrainResult a = train(toy_model(), tcfg, d);
  tcfg.ratios = {0.3, 0.3, 0.3};
  const TrainResult b = train(toy_model(), tcfg, d);
  EXPECT_TRUE(params_equal(a.params, b.params));
}

TEST(Train, ValidationHoldOut) {
  const Dataset d = make_phantoms(10, 16, 16, 4);
  TrainConfig tcfg;
  tcfg.epochs = 1;
  tcfg.ratios = {0.3};
  const TrainResult r = train(toy_model(), tcfg, d);
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_TRUE(std::isfinite(r.history[0].val_psnr));
  const Dataset small = make_phantoms(5, 16, 16, 4);
  EXPECT_TRUE(std::isnan(train(toy_model(), tcfg, small).history[0].val_psnr));
}

TEST(Train, LossDecreasesOnToyProblem) {
  const Dataset d = make_phantoms(20, 32, 32, 5);
  TrainConfig tcfg;
  tcfg.epochs = 30;
  tcfg.ratios = {0.3};
  tcfg.seed = 3;
  const TrainResult r = train(toy_model(), tcfg, d);
  ASSERT_EQ(r.history.size(), 30u);
  EXPECT_LT(r.history.back().loss, r.history.front().loss);
}

TEST(Config, JsonRoundTripAndUnknownKeys) {
  ModelConfig m = toy_model();
  m.share_prior = true;
  TrainConfig t;
  t.lr = 0.02;
  t.mask_family = MaskFamily::pseudo_radial;
  const ModelConfig m2 = model_config_from_json(to_json(m));
  EXPECT_EQ(m2.p, 8);
  EXPECT_EQ(m2.stages, 3);
  EXPECT_TRUE(m2.share_prior);
  const TrainConfig t2 = train_config_from_json(to_json(t));
  EXPECT_EQ(t2.lr, 0.02);
  EXPECT_EQ(t2.mask_family, MaskFamily::pseudo_radial);
  EXPECT_THROW(model_config_from_json(nlohmann::json{{"p", 8}, {"width", 3}}), InvalidArgument);
  EXPECT_THROW(train_config_from_json(nlohmann::json{{"learning_rate", 0.1}}), InvalidArgument);
  EXPECT_THROW(model_config_from_json(nlohmann::json{{"stages", 4}}), InvalidArgument);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto dir = fresh_dir("csmri_ckpt_roundtrip");
  Checkpoint ckpt;
  ckpt.model = toy_model();
  ckpt.params = init_params(ckpt.model, 3);
  fixtures::jitter_biases(ckpt.params, 4);
  for (auto& nt : named_parameters(ckpt.params)) {
    for (double& v : nt.tensor->values()) v = static_cast<float>(v);
  }
  ckpt.epoch = 17;
  ckpt.history = {{1, 0.5, 20.0}, {2, 0.25, std::nan("")}};
  save_checkpoint(dir, ckpt);
  const Checkpoint back = load_checkpoint(dir);
  EXPECT_TRUE(params_equal(back.params, ckpt.params));
  EXPECT_EQ(param_count(back.params).total, param_count(ckpt.params).total);
  EXPECT_EQ(back.epoch, 17);
  ASSERT_EQ(back.history.size(), 2u);
  EXPECT_EQ(back.history[0].loss, 0.5);
  EXPECT_TRUE(std::isnan(back.history[1].val_psnr));
  EXPECT_EQ(back.model.p, 8);
  fs::remove_all(dir);
}

TEST(Checkpoint, TruncatedBlobIsCorrupt) {
  const auto dir = fresh_dir("csmri_ckpt_truncated");
  Checkpoint ckpt;
  ckpt.model = toy_model();
  ckpt.params = init_params(ckpt.model, 5);
  save_checkpoint(dir, ckpt);
  const fs::path blob = dir / "prior.01.fuse.weight.f32";
  ASSERT_TRUE(fs::exists(blob));
  fs::resize_file(blob, fs::file_size(blob) - 4);
  EXPECT_THROW(load_checkpoint(dir), CorruptCheckpoint);
  fs::remove_all(dir);
}

TEST(Checkpoint, FlippedByteIsCorrupt) {
  const auto dir = fresh_dir("csmri_ckpt_flipped");
  Checkpoint ckpt;
  ckpt.model = toy_model();
  ckpt.params = init_params(ckpt.model, 6);
  save_checkpoint(dir, ckpt);
  const fs::path blob = dir / "correction.01.sol_in.weight.f32";
  std::fstream f(blob, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(5);
  f.put('\x7f');
  f.close();
  EXPECT_THROW(load_checkpoint(dir), CorruptCheckpoint);
  fs::remove_all(dir);
}

TEST(Checkpoint, MissingTensorIsReported) {
  const auto dir = fresh_dir("csmri_ckpt_missing");
  Checkpoint ckpt;
  ckpt.model = toy_model();
  ckpt.params = init_params(ckpt.model, 7);
  save_checkpoint(dir, ckpt);
  fs::remove(dir / "condition.trunk1.bias.f32");
  EXPECT_THROW(load_checkpoint(dir), CheckpointError);
  EXPECT_THROW(load_checkpoint(dir / "nowhere"), CheckpointError);
  fs::remove_all(dir);
}
