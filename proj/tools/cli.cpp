#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <algorithm>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>

#include "csmri/classical.hpp"
#include "csmri/data.hpp"
#include "csmri/errors.hpp"
#include "csmri/image_io.hpp"
#include "csmri/kspace.hpp"
#include "csmri/model.hpp"
#include "csmri/training.hpp"
#include "plot.hpp"

namespace csmri::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataConfig {
  std::string source = "phantom";  // phantom | files
  std::string path;
  int count = 20;
  int size = 32;
  std::uint64_t seed = 0;
};

ordered_json to_json(const DataConfig& d) {
  ordered_json j;
  j["source"] = d.source;
  j["path"] = d.path;
  j["count"] = d.count;
  j["size"] = d.size;
  j["seed"] = d.seed;
  return j;
}

DataConfig data_config_from_json(const json& j) {
  const std::set<std::string> known{"source", "path", "count", "size", "seed"};
  if (!j.is_object()) throw InvalidArgument("data config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw InvalidArgument("unknown data config key '" + key + "'");
  }
  DataConfig d;
  try {
    if (j.contains("source")) d.source = j.at("source").get<std::string>();
    if (j.contains("path")) d.path = j.at("path").get<std::string>();
    if (j.contains("count")) d.count = j.at("count").get<int>();
    if (j.contains("size")) d.size = j.at("size").get<int>();
    if (j.contains("seed")) d.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("data config: ") + e.what());
  }
  if (d.source != "phantom" && d.source != "files") throw InvalidArgument("data source must be 'phantom' or 'files'");
  return d;
}

Dataset load_dataset(const DataConfig& d) {
  if (d.source == "files") {
    if (d.path.empty()) throw InvalidArgument("--source files needs a dataset directory (--data)");
    return load_images(d.path);
  }
  return make_phantoms(d.count, d.size, d.size, d.seed);
}

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
};

ordered_json to_json(const RunConfig& rc) {
  ordered_json j;
  j["model"] = to_json(rc.model);
  j["train"] = to_json(rc.train);
  j["data"] = to_json(rc.data);
  return j;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument("config file " + path.string() + ": " + e.what());
  }
}

// "section.key=value"; the value is parsed as JSON and falls back to a string.
void apply_assignment(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw InvalidArgument("--set expects section.key=value, got '" + assignment + "'");
  }
  const std::string section = assignment.substr(0, dot);
  const std::string key = assignment.substr(dot + 1, eq - dot - 1);
  const std::string text = assignment.substr(eq + 1);
  if (section != "model" && section != "train" && section != "data") {
    throw InvalidArgument("unknown config section '" + section + "'");
  }
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  j[section][key] = value;
}

// Defaults <- config file <- explicit flags <- --set assignments.
RunConfig resolve(const std::string& config_path, const json& flags, const std::vector<std::string>& sets) {
  json j = json::object();
  j["model"] = json::object();
  j["train"] = json::object();
  j["data"] = json::object();
  if (!config_path.empty()) {
    const json file = read_json_file(config_path);
    if (!file.is_object()) throw InvalidArgument("config file must hold a JSON object");
    for (const auto& [key, value] : file.items()) {
      if (key != "model" && key != "train" && key != "data") throw InvalidArgument("unknown config section '" + key + "'");
      if (!value.is_object()) throw InvalidArgument("config section '" + key + "' must be an object");
      j[key].update(value);
    }
  }
  for (const auto& [section, values] : flags.items()) j[section].update(values);
  for (const auto& s : sets) apply_assignment(j, s);

  RunConfig rc;
  rc.train = train_config_from_json(j["train"]);
  if (!j["model"].contains("ratios")) j["model"]["ratios"] = rc.train.ratios;
  rc.model = model_config_from_json(j["model"]);
  rc.data = data_config_from_json(j["data"]);
  return rc;
}

std::string format_ratio(double alpha) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", alpha);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void check_finite(const Image& x, const std::string& what) {
  for (double v : x.values()) {
    if (!std::isfinite(v)) throw std::runtime_error(what + " contains non-finite values");
  }
}

CLI::Validator ratio_check() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        double v = 0.0;
        try {
          v = std::stod(s);
        } catch (const std::exception&) {
          return "not a number: " + s;
        }
        if (!(v > 0.0 && v <= 1.0)) return "sampling ratio must lie in (0, 1], got " + s;
        return {};
      },
      "RATIO in (0,1]");
}

CLI::Validator family_check() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        try {
          parse_mask_family(s);
        } catch (const InvalidArgument& e) {
          return e.what();
        }
        return {};
      },
      "cartesian|pseudo_radial|random2d");
}

// ---------------------------------------------------------------- mask

struct MaskArgs {
  std::vector<std::string> families{"cartesian"};
  std::vector<double> alphas;
  int size = 256;
  int cols = 0;
  std::uint64_t seed = 0;
  std::string out = ".";
};

int cmd_mask(const MaskArgs& a, std::ostream& out) {
  fs::create_directories(a.out);
  const int cols = a.cols > 0 ? a.cols : a.size;
  for (const std::string& name : a.families) {
    const MaskFamily family = parse_mask_family(name);
    for (double alpha : a.alphas) {
      const SamplingMask mask = make_mask(a.size, cols, alpha, family, a.seed);
      const fs::path stem = fs::path(a.out) / ("mask_" + to_string(family) + "_" + format_ratio(alpha));
      save_mask(mask, stem);
      out << stem.string() << ".png  " << mask.count() << " samples, ratio " << mask.achieved_ratio() << '\n';
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::string out;
  std::string resume;
  std::vector<std::string> sets;
  json flags = json::object();
};

void write_history(const fs::path& path, const std::vector<EpochRecord>& history) {
  std::string text = "epoch,loss,val_psnr\n";
  char buf[96];
  for (const auto& rec : history) {
    std::snprintf(buf, sizeof buf, "%d,%.8g,%.6f\n", rec.epoch, rec.loss, rec.val_psnr);
    text += buf;
  }
  write_text(path, text);
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  RunConfig rc;
  try {
    rc = resolve(a.config, a.flags, a.sets);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  std::optional<Checkpoint> resumed;
  if (!a.resume.empty()) {
    resumed = load_checkpoint(a.resume);
    rc.model = resumed->model;
  }
  const Dataset data = load_dataset(rc.data);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  ordered_json echo = to_json(rc);
  if (resumed) echo["resume"] = a.resume;
  write_text(dir / "config.json", echo.dump(2) + "\n");

  std::vector<EpochRecord> history = resumed ? resumed->history : std::vector<EpochRecord>{};
  TrainOptions options;
  if (resumed) {
    options.initial = &resumed->params;
    options.first_epoch = resumed->epoch + 1;
  }
  options.on_epoch = [&](const EpochRecord& rec, const ModelParams&) {
    history.push_back(rec);
    char line[128];
    std::snprintf(line, sizeof line, "epoch %d  loss %.6f  val_psnr %.3f\n", rec.epoch, rec.loss, rec.val_psnr);
    out << line << std::flush;
    write_history(dir / "history.csv", history);
  };
  const TrainResult result = train(rc.model, rc.train, data, options);

  Checkpoint ckpt;
  ckpt.model = rc.model;
  ckpt.train = rc.train;
  ckpt.params = result.params;
  ckpt.epoch = history.empty() ? 0 : history.back().epoch;
  ckpt.history = history;
  save_checkpoint(dir / "checkpoint", ckpt);
  out << "checkpoint written to " << (dir / "checkpoint").string() << '\n';
  for (const auto& rec : result.history) {
    if (!std::isfinite(rec.loss)) return kExitFailure;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- recon / eval

const std::set<std::string> kMethods{"cgpd", "zerofill", "fista_tv", "classical_twogrid"};

struct MethodArgs {
  std::string checkpoint;
  std::optional<std::uint64_t> mask_seed;
  double noise_std = 0.0;
  std::uint64_t noise_seed = 0;
  double lam = 0.005;
  int fista_iters = 100;
  int cycles = 1;
  double relax_step = 1.0;
  std::vector<std::string> sets;
  json data_flags = json::object();
  std::string out;
};

struct Reconstructor {
  std::optional<Checkpoint> ckpt;
  FistaTvConfig fista;
  TwoGridConfig twogrid;

  Image operator()(const std::string& method, const MeasurementOp& op, const ComplexField& y, double alpha,
                   ForwardResult* trace = nullptr) const {
    if (method == "zerofill") return zero_fill(op, y);
    if (method == "fista_tv") return fista_tv(op, y, fista).image;
    if (method == "classical_twogrid") return classical_cs_twogrid(op, y, twogrid);
    if (!ckpt) throw UsageError("method cgpd needs --checkpoint");
    ForwardResult r = forward_pass(ckpt->params, ckpt->model, op, y, alpha);
    Image x = r.x_final;
    if (trace) *trace = std::move(r);
    return x;
  }
};

Reconstructor make_reconstructor(const MethodArgs& a, bool needs_checkpoint) {
  Reconstructor rec;
  if (needs_checkpoint && a.checkpoint.empty()) throw UsageError("method cgpd needs --checkpoint");
  if (!a.checkpoint.empty()) rec.ckpt = load_checkpoint(a.checkpoint);
  rec.fista = {a.lam, a.fista_iters, 20};
  rec.twogrid.cycles = a.cycles;
  rec.twogrid.relax_step = a.relax_step;
  return rec;
}

DataConfig resolve_data(const MethodArgs& a) {
  json j = {{"count", 5}, {"seed", 1}};
  j.update(a.data_flags);
  for (const auto& s : a.sets) {
    json wrapper = json::object();
    apply_assignment(wrapper, s);
    if (!wrapper.contains("data") || wrapper.size() != 1) throw InvalidArgument("only data.* may be set here: " + s);
    j.update(wrapper["data"]);
  }
  return data_config_from_json(j);
}

std::uint64_t mask_seed_for(const MethodArgs& a, const Reconstructor& rec) {
  if (a.mask_seed) return *a.mask_seed;
  return rec.ckpt ? rec.ckpt->train.seed : 0;
}

ComplexField measure(const MeasurementOp& op, const Image& x, double noise_std, std::uint64_t noise_seed,
                     std::size_t index) {
  ComplexField y = op.forward(x);
  if (noise_std > 0.0) y = add_gaussian_noise(y, op.mask(), noise_std, derive_seed(noise_seed, index));
  return y;
}

struct ReconArgs {
  MethodArgs common;
  std::string method = "cgpd";
  std::string family = "cartesian";
  double alpha = 0.3;
  bool trace = false;
};

int cmd_recon(const ReconArgs& a, std::ostream& out) {
  if (a.trace && a.method != "cgpd") throw UsageError("--trace is only available for --method cgpd");
  DataConfig data_cfg;
  try {
    data_cfg = resolve_data(a.common);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const Reconstructor rec = make_reconstructor(a.common, a.method == "cgpd");
  const Dataset data = load_dataset(data_cfg);
  const MaskFamily family = parse_mask_family(a.family);
  const std::uint64_t mask_seed = mask_seed_for(a.common, rec);
  const MeasurementOp op(make_mask(data.rows(), data.cols(), a.alpha, family, mask_seed));

  const fs::path dir(a.common.out);
  fs::create_directories(dir);
  ordered_json echo;
  echo["method"] = a.method;
  echo["family"] = to_string(family);
  echo["alpha"] = a.alpha;
  echo["mask_seed"] = mask_seed;
  echo["noise_std"] = a.common.noise_std;
  echo["noise_seed"] = a.common.noise_seed;
  echo["checkpoint"] = a.common.checkpoint;
  echo["data"] = to_json(data_cfg);
  write_text(dir / "config.json", echo.dump(2) + "\n");

  ordered_json metrics = echo;
  metrics.erase("data");
  metrics.erase("checkpoint");
  auto rows = ordered_json::array();
  std::string csv = "index,psnr,ssim\n";
  double sum_psnr = 0.0, sum_ssim = 0.0;
  char buf[128];
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Image& truth = data.images[i];
    const ComplexField y = measure(op, truth, a.common.noise_std, a.common.noise_seed, i);
    ForwardResult trace;
    const Image x = rec(a.method, op, y, a.alpha, a.trace ? &trace : nullptr);
    check_finite(x, "reconstruction " + std::to_string(i));
    std::snprintf(buf, sizeof buf, "recon_%03zu.png", i);
    save_image(dir / buf, x);
    const MetricRecord m = evaluate(x, truth);
    sum_psnr += m.psnr;
    sum_ssim += m.ssim;
    rows.push_back({{"index", i}, {"psnr", m.psnr}, {"ssim", m.ssim}});
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f\n", i, m.psnr, m.ssim);
    csv += buf;

    if (a.trace) {
      std::snprintf(buf, sizeof buf, "trace_%03zu", i);
      const fs::path tdir = dir / buf;
      fs::create_directories(tdir);
      const int n = static_cast<int>(trace.trace.size());
      for (int s = 0; s < n; ++s) {
        std::snprintf(buf, sizeof buf, "stage_%02d.png", s + 1);
        save_image(tdir / buf, trace.trace[static_cast<std::size_t>(s)]);
      }
      const int mid = mid_stage(rec.ckpt->model);
      ordered_json tj{{"stages", n}, {"mid", mid}, {"final", n}};
      write_text(tdir / "trace.json", tj.dump(2) + "\n");
      plot::trace_grid(tdir / "grid.png", trace.trace, mid, &truth);
    }
  }
  const double n = static_cast<double>(data.size());
  metrics["images"] = rows;
  metrics["m_psnr"] = sum_psnr / n;
  metrics["m_ssim"] = sum_ssim / n;
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");
  write_text(dir / "metrics.csv", csv);
  std::snprintf(buf, sizeof buf, "%s %s %.2f: M-PSNR %.3f dB, M-SSIM %.4f over %zu images\n", a.method.c_str(),
                to_string(family).c_str(), a.alpha, sum_psnr / n, sum_ssim / n, data.size());
  out << buf;
  return std::isfinite(sum_psnr) && std::isfinite(sum_ssim) ? kExitOk : kExitFailure;
}

struct EvalArgs {
  MethodArgs common;
  std::vector<std::string> methods{"zerofill", "fista_tv"};
  std::vector<std::string> families{"cartesian"};
  std::vector<double> alphas{0.1, 0.2, 0.3, 0.4, 0.5};
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  for (const auto& m : a.methods) {
    if (!kMethods.contains(m)) throw UsageError("unknown method '" + m + "'");
  }
  DataConfig data_cfg;
  try {
    data_cfg = resolve_data(a.common);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const bool needs_ckpt = std::find(a.methods.begin(), a.methods.end(), "cgpd") != a.methods.end();
  const Reconstructor rec = make_reconstructor(a.common, needs_ckpt);
  const Dataset data = load_dataset(data_cfg);
  const std::uint64_t mask_seed = mask_seed_for(a.common, rec);

  const fs::path dir(a.common.out);
  fs::create_directories(dir);
  ordered_json echo;
  echo["methods"] = a.methods;
  echo["families"] = a.families;
  echo["alphas"] = a.alphas;
  echo["mask_seed"] = mask_seed;
  echo["noise_std"] = a.common.noise_std;
  echo["noise_seed"] = a.common.noise_seed;
  echo["checkpoint"] = a.common.checkpoint;
  echo["data"] = to_json(data_cfg);
  write_text(dir / "config.json", echo.dump(2) + "\n");

  std::string csv = "method,family,alpha,m_psnr,m_ssim\n";
  auto rows = ordered_json::array();
  std::map<std::string, std::vector<plot::Series>> plots;
  bool finite = true;
  char buf[160];
  for (const std::string& method : a.methods) {
    for (const std::string& fname : a.families) {
      const MaskFamily family = parse_mask_family(fname);
      plot::Series series{method, {}, {}};
      for (double alpha : a.alphas) {
        const MeasurementOp op(make_mask(data.rows(), data.cols(), alpha, family, mask_seed));
        double sum_psnr = 0.0, sum_ssim = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
          const ComplexField y = measure(op, data.images[i], a.common.noise_std, a.common.noise_seed, i);
          const Image x = rec(method, op, y, alpha);
          const MetricRecord m = evaluate(x, data.images[i]);
          sum_psnr += m.psnr;
          sum_ssim += m.ssim;
        }
        const double m_psnr = sum_psnr / static_cast<double>(data.size());
        const double m_ssim = sum_ssim / static_cast<double>(data.size());
        finite = finite && std::isfinite(m_psnr) && std::isfinite(m_ssim);
        std::snprintf(buf, sizeof buf, "%s,%s,%s,%.6f,%.6f\n", method.c_str(), to_string(family).c_str(),
                      format_ratio(alpha).c_str(), m_psnr, m_ssim);
        csv += buf;
        out << buf;
        rows.push_back({{"method", method}, {"family", to_string(family)}, {"alpha", alpha}, {"m_psnr", m_psnr},
                        {"m_ssim", m_ssim}});
        series.x.push_back(alpha);
        series.y.push_back(m_psnr);
      }
      plots[to_string(family)].push_back(std::move(series));
    }
  }
  write_text(dir / "eval.csv", csv);
  write_text(dir / "eval.json", ordered_json{{"rows", rows}}.dump(2) + "\n");
  if (!finite) return kExitFailure;
  for (const auto& [family, series] : plots) {
    plot::line_plot(dir / ("psnr_" + family + ".png"), series, "M-PSNR VS RATIO (" + family + ")", "SAMPLING RATIO",
                    "M-PSNR (DB)");
  }
  return kExitOk;
}

// ---------------------------------------------------------------- wiring

void add_data_flags(CLI::App* sub, json& flags, const std::string& section) {
  auto* source = sub->add_option("--source", "Dataset source: phantom or files")
                     ->check(CLI::IsMember({"phantom", "files"}));
  source->each([&flags, section](const std::string& v) { flags[section]["source"] = v; });
  sub->add_option("--data", "Directory of grayscale PNG/PGM images")->each([&flags, section](const std::string& v) {
    if (!flags[section].contains("source")) flags[section]["source"] = "files";
    flags[section]["path"] = v;
  });
  sub->add_option("--count", "Number of phantoms")->check(CLI::PositiveNumber)->each([&flags, section](const std::string& v) {
    flags[section]["count"] = std::stoi(v);
  });
  sub->add_option("--size", "Phantom side length (even)")->check(CLI::PositiveNumber)->each(
      [&flags, section](const std::string& v) { flags[section]["size"] = std::stoi(v); });
  sub->add_option("--data-seed", "Phantom generator seed")->each([&flags, section](const std::string& v) {
    flags[section]["seed"] = std::stoull(v);
  });
}

void add_method_flags(CLI::App* sub, MethodArgs& m) {
  sub->add_option("--checkpoint", m.checkpoint, "Checkpoint directory (required for cgpd)");
  sub->add_option("--mask-seed", m.mask_seed, "Mask seed (default: the checkpoint's training seed, else 0)");
  sub->add_option("--noise-std", m.noise_std, "Std of complex Gaussian k-space noise")->check(CLI::NonNegativeNumber);
  sub->add_option("--noise-seed", m.noise_seed, "Noise seed");
  sub->add_option("--lam", m.lam, "TV weight for fista_tv")->check(CLI::NonNegativeNumber);
  sub->add_option("--iters", m.fista_iters, "FISTA iterations")->check(CLI::PositiveNumber);
  sub->add_option("--cycles", m.cycles, "Two-grid cycles for classical_twogrid")->check(CLI::PositiveNumber);
  sub->add_option("--relax-step", m.relax_step, "Richardson step for classical_twogrid")->check(CLI::PositiveNumber);
  sub->add_option("--set", m.sets, "Override data.key=value");
  sub->add_option("--out", m.out, "Output directory")->required();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compressed-sensing MRI reconstruction toolkit", "csmri"};
  app.require_subcommand(1);

  MaskArgs mask_args;
  auto* mask = app.add_subcommand("mask", "Generate sampling masks");
  mask->add_option("--family", mask_args.families, "Mask families")->delimiter(',')->check(family_check());
  mask->add_option("--alpha", mask_args.alphas, "Sampling ratios")->delimiter(',')->required()->check(ratio_check());
  mask->add_option("--size", mask_args.size, "Rows (and columns unless --cols)")->check(CLI::PositiveNumber);
  mask->add_option("--cols", mask_args.cols, "Columns")->check(CLI::PositiveNumber);
  mask->add_option("--seed", mask_args.seed, "Seed");
  mask->add_option("--out", mask_args.out, "Output directory");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a reconstruction network");
  json& tf = train_args.flags;
  train_cmd->add_option("--config", train_args.config, "JSON run config {model, train, data}");
  train_cmd->add_option("--out", train_args.out, "Output directory")->required();
  train_cmd->add_option("--resume", train_args.resume, "Checkpoint directory to continue from");
  train_cmd->add_option("--set", train_args.sets, "Override section.key=value (JSON value)");
  train_cmd->add_option("--p", "Channel width")->each([&tf](const std::string& v) { tf["model"]["p"] = std::stoi(v); });
  train_cmd->add_option("--k", "Distillation depth")->each([&tf](const std::string& v) { tf["model"]["k"] = std::stoi(v); });
  train_cmd->add_option("--stages", "Stage count (odd)")->each([&tf](const std::string& v) {
    tf["model"]["stages"] = std::stoi(v);
  });
  train_cmd->add_option("--lr", "Learning rate")->each([&tf](const std::string& v) { tf["train"]["lr"] = std::stod(v); });
  train_cmd->add_option("--epochs", "Epochs")->each([&tf](const std::string& v) { tf["train"]["epochs"] = std::stoi(v); });
  train_cmd->add_option("--batch", "Batch size")->each([&tf](const std::string& v) { tf["train"]["batch"] = std::stoi(v); });
  train_cmd->add_option("--seed", "Training seed")->each([&tf](const std::string& v) {
    tf["train"]["seed"] = std::stoull(v);
  });
  train_cmd->add_option("--ratios", "Training ratios, comma separated")
      ->delimiter(',')
      ->check(ratio_check())
      ->each([&tf](const std::string& v) {
        if (!tf["train"].contains("ratios")) tf["train"]["ratios"] = json::array();
        tf["train"]["ratios"].push_back(std::stod(v));
      });
  train_cmd->add_option("--family", "Mask family")->check(family_check())->each([&tf](const std::string& v) {
    tf["train"]["mask_family"] = v;
  });
  train_cmd->add_flag("--no-augment", "Disable flip augmentation")->each([&tf](const std::string&) {
    tf["train"]["augment"] = false;
  });
  add_data_flags(train_cmd, tf, "data");

  ReconArgs recon_args;
  auto* recon = app.add_subcommand("recon", "Reconstruct images from simulated measurements");
  recon->add_option("--method", recon_args.method, "cgpd | zerofill | fista_tv | classical_twogrid")
      ->check(CLI::IsMember(kMethods));
  recon->add_option("--family", recon_args.family, "Mask family")->check(family_check());
  recon->add_option("--alpha", recon_args.alpha, "Sampling ratio")->check(ratio_check());
  recon->add_flag("--trace", recon_args.trace, "Write per-stage images");
  add_method_flags(recon, recon_args.common);
  json recon_data = json::object();
  add_data_flags(recon, recon_data, "data");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Sweep methods x families x ratios");
  eval->add_option("--methods", eval_args.methods, "Methods")->delimiter(',')->check(CLI::IsMember(kMethods));
  eval->add_option("--families", eval_args.families, "Mask families")->delimiter(',')->check(family_check());
  eval->add_option("--alphas", eval_args.alphas, "Sampling ratios")->delimiter(',')->check(ratio_check());
  add_method_flags(eval, eval_args.common);
  json eval_data = json::object();
  add_data_flags(eval, eval_data, "data");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (mask->parsed()) return cmd_mask(mask_args, out);
    if (train_cmd->parsed()) return cmd_train(train_args, out);
    if (recon->parsed()) {
      recon_args.common.data_flags = recon_data.value("data", json::object());
      return cmd_recon(recon_args, out);
    }
    eval_args.common.data_flags = eval_data.value("data", json::object());
    return cmd_eval(eval_args, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace csmri::cli
