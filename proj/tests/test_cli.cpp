#include <gtest/gtest.h>

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "csmri/kspace.hpp"
#include "csmri/training.hpp"

namespace fs = std::filesystem;
using csmri::cli::run;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("csmri_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& leaf) const { return (dir_ / leaf).string(); }

  // Small network and data so that a full train run takes well under a second.
  std::vector<std::string> toy_train(const std::string& out, const std::string& epochs) const {
    return {"train", "--out", out, "--epochs", epochs, "--count", "10", "--size", "16",
            "--p", "4", "--k", "1", "--stages", "3", "--lr", "0.01", "--seed", "4"};
  }

  fs::path dir_;
};

TEST_F(CliTest, MaskRerunIsByteIdentical) {
  const std::vector<std::string> args{"mask", "--family", "random2d", "--alpha", "0.25", "--size", "32",
                                      "--seed", "9", "--out", path("a")};
  ASSERT_EQ(invoke(args).code, 0);
  auto again = args;
  again.back() = path("b");
  ASSERT_EQ(invoke(again).code, 0);
  for (const char* leaf : {"mask_random2d_0.25.png", "mask_random2d_0.25.json"}) {
    EXPECT_FALSE(slurp(dir_ / "a" / leaf).empty());
    EXPECT_EQ(slurp(dir_ / "a" / leaf), slurp(dir_ / "b" / leaf)) << leaf;
  }
}

TEST_F(CliTest, MaskWritesOnePairPerRatio) {
  ASSERT_EQ(invoke({"mask", "--alpha", "0.1,0.2,0.5", "--size", "32", "--out", path("m")}).code, 0);
  int png = 0, json = 0;
  for (const auto& entry : fs::directory_iterator(dir_ / "m")) {
    png += entry.path().extension() == ".png";
    json += entry.path().extension() == ".json";
  }
  EXPECT_EQ(png, 3);
  EXPECT_EQ(json, 3);
  const auto mask = csmri::load_mask(dir_ / "m" / "mask_cartesian_0.2");
  EXPECT_EQ(mask.rows, 32);
  EXPECT_DOUBLE_EQ(mask.alpha, 0.2);
}

TEST_F(CliTest, MaskRejectsOutOfRangeRatio) {
  for (const char* alpha : {"0", "1.5", "-0.1", "abc"}) {
    const auto r = invoke({"mask", "--alpha", alpha, "--out", path("m")});
    EXPECT_EQ(r.code, csmri::cli::kExitUsage) << alpha;
    EXPECT_FALSE(r.err.empty());
  }
  EXPECT_FALSE(fs::exists(dir_ / "m"));
}

TEST_F(CliTest, UnknownSubcommandAndFamilyAreUsageErrors) {
  EXPECT_EQ(invoke({"frobnicate"}).code, csmri::cli::kExitUsage);
  EXPECT_EQ(invoke({}).code, csmri::cli::kExitUsage);
  EXPECT_EQ(invoke({"mask", "--alpha", "0.3", "--family", "spiral"}).code, csmri::cli::kExitUsage);
}

TEST_F(CliTest, HelpExitsCleanly) {
  const auto r = invoke({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("recon"), std::string::npos);
}

TEST_F(CliTest, TrainWritesCheckpointHistoryAndConfig) {
  const auto r = invoke(toy_train(path("t"), "2"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("epoch 2"), std::string::npos);
  const auto ckpt = csmri::load_checkpoint(dir_ / "t" / "checkpoint");
  EXPECT_EQ(ckpt.epoch, 2);
  EXPECT_EQ(ckpt.model.p, 4);
  EXPECT_EQ(ckpt.train.seed, 4u);
  const std::string history = slurp(dir_ / "t" / "history.csv");
  EXPECT_EQ(history.rfind("epoch,loss,val_psnr\n", 0), 0u);
  EXPECT_EQ(std::count(history.begin(), history.end(), '\n'), 3);
  const auto config = nlohmann::json::parse(slurp(dir_ / "t" / "config.json"));
  EXPECT_EQ(config["model"]["stages"], 3);
  EXPECT_EQ(config["data"]["size"], 16);
}

TEST_F(CliTest, ResumeContinuesEpochNumbering) {
  ASSERT_EQ(invoke(toy_train(path("t"), "2")).code, 0);
  auto args = toy_train(path("u"), "3");
  args.push_back("--resume");
  args.push_back(path("t/checkpoint"));
  const auto r = invoke(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("epoch 3 "), std::string::npos);
  EXPECT_NE(r.out.find("epoch 5 "), std::string::npos);
  EXPECT_EQ(r.out.find("epoch 1 "), std::string::npos);
  const auto ckpt = csmri::load_checkpoint(dir_ / "u" / "checkpoint");
  EXPECT_EQ(ckpt.epoch, 5);
  ASSERT_EQ(ckpt.history.size(), 5u);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(ckpt.history[static_cast<std::size_t>(i)].epoch, i + 1);
}

TEST_F(CliTest, ConfigFileAndSetOverridesCompose) {
  {
    std::ofstream cfg(dir_ / "run.json");
    cfg << R"({"model": {"p": 4, "k": 1, "stages": 3}, "train": {"epochs": 1, "lr": 0.5}, "data": {"count": 10, "size": 16}})";
  }
  const auto r = invoke({"train", "--config", path("run.json"), "--out", path("t"), "--lr", "0.01", "--set",
                         "train.ratios=[0.3]", "--set", "data.seed=7"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto config = nlohmann::json::parse(slurp(dir_ / "t" / "config.json"));
  EXPECT_DOUBLE_EQ(config["train"]["lr"].get<double>(), 0.01);
  EXPECT_EQ(config["train"]["ratios"], nlohmann::json::array({0.3}));
  EXPECT_EQ(config["model"]["ratios"], nlohmann::json::array({0.3}));
  EXPECT_EQ(config["data"]["seed"], 7);
  EXPECT_EQ(config["model"]["p"], 4);
}

TEST_F(CliTest, UnknownConfigKeyIsRejected) {
  {
    std::ofstream cfg(dir_ / "bad.json");
    cfg << R"({"model": {"p": 4, "widht": 3}})";
  }
  const auto r = invoke({"train", "--config", path("bad.json"), "--out", path("t")});
  EXPECT_EQ(r.code, csmri::cli::kExitUsage);
  EXPECT_NE(r.err.find("widht"), std::string::npos);
  EXPECT_EQ(invoke({"train", "--out", path("t"), "--set", "optim.lr=1"}).code, csmri::cli::kExitUsage);
  EXPECT_EQ(invoke({"train", "--out", path("t"), "--set", "train.epochs=0"}).code, csmri::cli::kExitUsage);
}

TEST_F(CliTest, MissingDatasetDirectoryFails) {
  auto r = invoke({"train", "--out", path("t"), "--source", "files"});
  EXPECT_EQ(r.code, csmri::cli::kExitFailure);
  EXPECT_FALSE(r.err.empty());
  r = invoke({"train", "--out", path("t"), "--data", path("nowhere")});
  EXPECT_EQ(r.code, csmri::cli::kExitFailure);
}

TEST_F(CliTest, ZeroFillAtFullSamplingHitsTheCap) {
  const auto r = invoke({"recon", "--method", "zerofill", "--alpha", "1", "--count", "2", "--size", "32", "--out",
                         path("r")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto metrics = nlohmann::json::parse(slurp(dir_ / "r" / "metrics.json"));
  EXPECT_DOUBLE_EQ(metrics["m_psnr"].get<double>(), 99.99);
  EXPECT_DOUBLE_EQ(metrics["m_ssim"].get<double>(), 1.0);
  EXPECT_EQ(metrics["images"].size(), 2u);
  EXPECT_TRUE(fs::exists(dir_ / "r" / "recon_001.png"));
  EXPECT_EQ(slurp(dir_ / "r" / "metrics.csv").rfind("index,psnr,ssim\n", 0), 0u);
}

TEST_F(CliTest, TraceWritesEveryStage) {
  auto args = toy_train(path("t"), "1");
  *(std::find(args.begin(), args.end(), "--stages") + 1) = "13";
  ASSERT_EQ(invoke(args).code, 0);
  const auto r = invoke({"recon", "--checkpoint", path("t/checkpoint"), "--trace", "--alpha", "0.3", "--count", "1",
                         "--size", "16", "--out", path("r")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (int s = 1; s <= 13; ++s) {
    char leaf[32];
    std::snprintf(leaf, sizeof leaf, "stage_%02d.png", s);
    EXPECT_TRUE(fs::exists(dir_ / "r" / "trace_000" / leaf)) << leaf;
  }
  EXPECT_FALSE(fs::exists(dir_ / "r" / "trace_000" / "stage_14.png"));
  const auto trace = nlohmann::json::parse(slurp(dir_ / "r" / "trace_000" / "trace.json"));
  EXPECT_EQ(trace["stages"], 13);
  EXPECT_EQ(trace["mid"], 7);
  EXPECT_EQ(trace["final"], 13);
  EXPECT_TRUE(fs::exists(dir_ / "r" / "trace_000" / "grid.png"));
}

TEST_F(CliTest, TraceNeedsTheNetwork) {
  EXPECT_EQ(invoke({"recon", "--method", "zerofill", "--trace", "--out", path("r")}).code, csmri::cli::kExitUsage);
  EXPECT_EQ(invoke({"recon", "--method", "cgpd", "--out", path("r")}).code, csmri::cli::kExitUsage);
}

TEST_F(CliTest, NoiseDoesNotImprovePsnr) {
  const std::vector<std::string> base{"recon", "--method", "zerofill", "--alpha", "0.4", "--count", "3",
                                      "--size", "32"};
  auto clean = base;
  clean.insert(clean.end(), {"--out", path("clean")});
  auto noisy = base;
  noisy.insert(noisy.end(), {"--noise-std", "0.1", "--out", path("noisy")});
  ASSERT_EQ(invoke(clean).code, 0);
  ASSERT_EQ(invoke(noisy).code, 0);
  const auto a = nlohmann::json::parse(slurp(dir_ / "clean" / "metrics.json"));
  const auto b = nlohmann::json::parse(slurp(dir_ / "noisy" / "metrics.json"));
  EXPECT_LE(b["m_psnr"].get<double>(), a["m_psnr"].get<double>());
}

TEST_F(CliTest, EvalCsvIsDeterministicAndOrdered) {
  const std::vector<std::string> base{"eval", "--methods", "zerofill,fista_tv", "--alphas", "0.1,0.3,0.5",
                                      "--iters", "20", "--count", "2", "--size", "32", "--out"};
  auto a = base;
  a.push_back(path("a"));
  auto b = base;
  b.push_back(path("b"));
  ASSERT_EQ(invoke(a).code, 0);
  ASSERT_EQ(invoke(b).code, 0);
  const std::string csv = slurp(dir_ / "a" / "eval.csv");
  EXPECT_EQ(csv, slurp(dir_ / "b" / "eval.csv"));
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "method,family,alpha,m_psnr,m_ssim");
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0].rfind("zerofill,cartesian,0.1,", 0), 0u);
  EXPECT_EQ(rows[5].rfind("fista_tv,cartesian,0.5,", 0), 0u);
  EXPECT_TRUE(fs::exists(dir_ / "a" / "psnr_cartesian.png"));

  const auto json = nlohmann::json::parse(slurp(dir_ / "a" / "eval.json"));
  ASSERT_EQ(json["rows"].size(), 6u);
  const double p1 = json["rows"][0]["m_psnr"], p3 = json["rows"][1]["m_psnr"], p5 = json["rows"][2]["m_psnr"];
  EXPECT_LT(p1, p3);
  EXPECT_LT(p3, p5);
}

TEST_F(CliTest, EvalRejectsUnknownMethod) {
  EXPECT_EQ(invoke({"eval", "--methods", "zerofill,magic", "--out", path("e")}).code, csmri::cli::kExitUsage);
}

}  // namespace
