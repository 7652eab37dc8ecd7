// Command-line driver: dataset generation, two-stage training, evaluation,
// ablation grids and plot-data export.
//
// Exit codes: 0 success, 1 usage/config, 2 I/O, 3 divergence, 4 shape mismatch.

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mislas/calib.hpp"
#include "mislas/io.hpp"
#include "mislas/trainer.hpp"

namespace fs = std::filesystem;
using namespace mislas;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kDiverged = 3, kShape = 4 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

fs::path default_out(const std::string& command) {
  if (const char* env = std::getenv("MISLAS_OUT_DIR"); env && *env) return fs::path(env) / command;
  return fs::path("mislas-out") / command;
}

fs::path resolve_out(const std::string& flag, const std::string& command) {
  return flag.empty() ? default_out(command) : fs::path(flag);
}

std::string fmt_pct(const std::optional<double>& v) {
  if (!v) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << *v;
  return os.str();
}

std::string fmt_pct(double v) { return fmt_pct(std::optional<double>(v)); }

// --- gen-data ------------------------------------------------------------

struct GenDataArgs {
  int classes = 10;
  long nmax = 1000;
  long nmin = 10;
  long dim = 16;
  double spread = 0.4;
  std::uint64_t seed = 0;
  long test_per_class = 100;
  std::string out;
};

int cmd_gen_data(const GenDataArgs& a) {
  std::vector<long> counts;
  try {
    counts = make_longtail_profile(a.nmax, a.nmin, a.classes);
    if (a.dim < 2) throw DomainError("--dim must be >= 2");
    if (!(a.spread > 0.0)) throw DomainError("--spread must be positive");
    if (a.test_per_class < 1) throw DomainError("--test-per-class must be >= 1");
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  const LongTailedDataset ds = gen_gaussian_blobs(counts, a.dim, a.spread, a.seed, a.test_per_class);
  const fs::path out = resolve_out(a.out, "gen-data");
  io::save_dataset(ds, out);

  long many = 0, medium = 0, few = 0;
  for (Split s : ds.splits) {
    if (s == Split::Many) ++many;
    if (s == Split::Medium) ++medium;
    if (s == Split::Few) ++few;
  }
  std::cout << "wrote " << out.string() << "\n"
            << "classes " << ds.num_classes() << ", train " << ds.train.size() << ", test " << ds.test.size() << "\n"
            << "imbalance factor beta = " << io::format_double(ds.imbalance_factor()) << "\n"
            << "splits: many " << many << ", medium " << medium << ", few " << few << "\n";
  return kOk;
}

// --- shared loaders ------------------------------------------------------

// Malformed files are reported as I/O failures rather than usage errors.
LongTailedDataset read_dataset(const fs::path& dir) {
  try {
    return io::load_dataset(dir);
  } catch (const DomainError& e) {
    throw IoError(dir.string() + ": " + e.what());
  }
}

Model read_checkpoint(const fs::path& manifest) {
  try {
    return io::load_checkpoint(manifest);
  } catch (const DomainError& e) {
    throw IoError(manifest.string() + ": " + e.what());
  }
}

LongTailedDataset dataset_from_config(const json& cfg, const fs::path& base_dir) {
  if (!cfg.contains("dataset")) throw UsageError("dataset: missing (set it in the config or pass --data)");
  const json& d = cfg.at("dataset");
  if (d.contains("path")) {
    fs::path p = d.at("path").get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    return read_dataset(p);
  }
  if (d.contains("synthetic")) {
    const json& s = d.at("synthetic");
    try {
      const auto counts = make_longtail_profile(s.at("nmax").get<long>(), s.at("nmin").get<long>(),
                                                s.at("classes").get<int>());
      return gen_gaussian_blobs(counts, s.at("dim").get<long>(), s.at("spread").get<double>(),
                                s.value("seed", std::uint64_t{0}), s.value("test_per_class", 100L));
    } catch (const json::exception& e) {
      throw UsageError(std::string("dataset.synthetic: ") + e.what());
    } catch (const DomainError& e) {
      throw UsageError(std::string("dataset.synthetic: ") + e.what());
    }
  }
  throw UsageError("dataset: expected 'path' or 'synthetic'");
}

struct RunInputs {
  json raw;
  TrainConfig cfg;
  LongTailedDataset ds;
};

RunInputs load_run_inputs(const std::string& config_path, const std::string& preset, const std::string& data) {
  if (config_path.empty() == preset.empty()) throw UsageError("pass exactly one of --config or --preset");
  RunInputs in;
  fs::path base = fs::current_path();
  if (!preset.empty()) {
    try {
      in.raw = io::preset(preset);
    } catch (const DomainError& e) {
      throw UsageError(e.what());
    }
  } else {
    try {
      in.raw = json::parse(io::read_file(config_path));
    } catch (const json::parse_error& e) {
      throw UsageError(std::string("config is not valid JSON: ") + e.what());
    }
    base = fs::path(config_path).parent_path();
  }
  try {
    in.cfg = io::config_from_json(in.raw);
  } catch (const DomainError& e) {
    throw UsageError(std::string("config rejected: ") + e.what());
  }
  if (!data.empty()) {
    in.ds = read_dataset(data);
    in.raw["dataset"] = {{"path", fs::absolute(data).lexically_normal().string()}};
  } else {
    in.ds = dataset_from_config(in.raw, base);
  }
  return in;
}

Model load_model_for(const std::string& checkpoint, const LongTailedDataset& ds) {
  Model m = read_checkpoint(checkpoint);
  if (m.backbone.config().input_dim != ds.dim()) {
    throw ShapeMismatch("checkpoint expects " + std::to_string(m.backbone.config().input_dim) +
                        " input features, dataset has " + std::to_string(ds.dim()));
  }
  if (m.num_classes() != ds.num_classes()) {
    throw ShapeMismatch("checkpoint has " + std::to_string(m.num_classes()) + " classes, dataset has " +
                        std::to_string(ds.num_classes()));
  }
  return m;
}

// Fails fast on an unwritable output directory before a long run.
void ensure_writable(const fs::path& dir) {
  const fs::path probe = dir / ".write-probe";
  io::write_file(probe, "");
  std::error_code ec;
  fs::remove(probe, ec);
}

// --- train ---------------------------------------------------------------

struct RunArgs {
  std::string config;
  std::string preset;
  std::string data;
  std::string out;
  int workers = 1;
};

int cmd_train(const RunArgs& a) {
  RunInputs in = load_run_inputs(a.config, a.preset, a.data);
  const fs::path out = resolve_out(a.out, "train");
  ensure_writable(out);
  const RunResult r = run_pipeline(in.cfg, in.ds);

  io::save_checkpoint(r.stage1_model, out / "stage1.json");
  io::save_checkpoint(r.model, out / "model.json");
  io::write_file(out / "metrics.csv", io::metrics_csv(r.curve));
  json manifest;
  json echo = io::config_to_json(in.cfg);
  echo["dataset"] = in.raw.at("dataset");
  if (in.raw.contains("name")) echo["name"] = in.raw.at("name");
  manifest["config"] = echo;
  manifest["metrics"] = {{"stage1", io::eval_json(r.stage1)}, {"final", io::eval_json(r.final_metrics)}};
  manifest["artifacts"] = {{"checkpoint", "model.json"}, {"stage1_checkpoint", "stage1.json"},
                           {"metrics_csv", "metrics.csv"}};
  if (in.cfg.stage2_enabled && in.cfg.stage2_loss == Stage2Loss::LAS) {
    const auto schedule = SmoothingSchedule::make(in.cfg.related_fn, in.cfg.eps1, in.cfg.epsK, in.ds.class_counts);
    io::write_file(out / "schedule.json", io::schedule_json(schedule).dump(2) + "\n");
    manifest["artifacts"]["schedule"] = "schedule.json";
  }
  io::write_file(out / "manifest.json", manifest.dump(2) + "\n");

  std::cout << "stage 1: acc " << fmt_pct(r.stage1.accuracy) << "  ece " << fmt_pct(r.stage1.ece) << "\n"
            << "final:   acc " << fmt_pct(r.final_metrics.accuracy) << "  ece " << fmt_pct(r.final_metrics.ece)
            << "  (" << to_string(r.final_metrics.direction) << ")\n"
            << "wrote " << out.string() << "\n";
  return kOk;
}

// --- ablate --------------------------------------------------------------

int cmd_ablate(const RunArgs& a) {
  RunInputs in = load_run_inputs(a.config, a.preset, a.data);
  if (a.workers < 1) throw UsageError("--workers must be >= 1");
  const fs::path out = resolve_out(a.out, "ablate");
  ensure_writable(out);
  const auto cells = run_ablation_grid(in.cfg, in.ds, a.workers);

  std::string csv = "mu,sl,las,accuracy,ece,many,medium,few,error\n";
  json rows = json::array();
  std::cout << "MU  SL  LAS |   acc     ece\n";
  for (const auto& c : cells) {
    auto flag = [](bool b) { return b ? "1" : "0"; };
    csv += std::string(flag(c.mixup)) + "," + flag(c.shift_bn) + "," + flag(c.las) + ",";
    json row = {{"mu", c.mixup}, {"sl", c.shift_bn}, {"las", c.las}};
    if (c.result) {
      const auto& m = c.result->final_metrics;
      auto opt = [](const std::optional<double>& v) { return v ? io::format_double(*v) : std::string(); };
      csv += io::format_double(m.accuracy) + "," + io::format_double(m.ece) + "," + opt(m.splits.many) + "," +
             opt(m.splits.medium) + "," + opt(m.splits.few) + ",\n";
      row["metrics"] = io::eval_json(m);
      std::cout << (c.mixup ? " x " : " - ") << " " << (c.shift_bn ? " x " : " - ") << " " << (c.las ? " x " : " - ")
                << " | " << std::setw(6) << fmt_pct(m.accuracy) << "  " << std::setw(6) << fmt_pct(m.ece) << "\n";
    } else {
      std::string err = c.error;
      for (char& ch : err) {
        if (ch == ',' || ch == '\n') ch = ' ';
      }
      csv += ",,,,," + err + "\n";
      row["error"] = c.error;
      std::cout << (c.mixup ? " x " : " - ") << " " << (c.shift_bn ? " x " : " - ") << " " << (c.las ? " x " : " - ")
                << " | failed: " << c.error << "\n";
    }
    rows.push_back(row);
  }
  json echo = io::config_to_json(in.cfg);
  echo["dataset"] = in.raw.at("dataset");
  io::write_file(out / "ablation.csv", csv);
  io::write_file(out / "ablation.json", json({{"config", echo}, {"cells", rows}}).dump(2) + "\n");
  std::cout << "wrote " << out.string() << "\n";
  return kOk;
}

// --- checkpoint consumers -----------------------------------------------

struct ModelArgs {
  std::string checkpoint;
  std::string data;
  int bins = 15;
  std::string out;
};

void check_bins(int bins) {
  if (bins < 1) throw UsageError("--bins must be >= 1");
}

int cmd_eval(const ModelArgs& a) {
  check_bins(a.bins);
  const LongTailedDataset ds = read_dataset(a.data);
  Model m = load_model_for(a.checkpoint, ds);
  PredictionLog log;
  const EvalMetrics em = evaluate(m, ds.test, ds.splits, a.bins, &log);
  std::cout << "  All    ECE    Many   Medium  Few\n"
            << std::setw(6) << fmt_pct(em.accuracy) << " " << std::setw(6) << fmt_pct(em.ece) << " " << std::setw(6)
            << fmt_pct(em.splits.many) << " " << std::setw(7) << fmt_pct(em.splits.medium) << " " << std::setw(6)
            << fmt_pct(em.splits.few) << "\n"
            << "direction: " << to_string(em.direction) << "\n";
  if (!a.out.empty()) {
    io::write_file(fs::path(a.out) / "eval.json", io::eval_json(em).dump(2) + "\n");
  }
  return kOk;
}

int cmd_reliability(const ModelArgs& a) {
  check_bins(a.bins);
  const LongTailedDataset ds = read_dataset(a.data);
  Model m = load_model_for(a.checkpoint, ds);
  const fs::path out = resolve_out(a.out, "reliability");
  PredictionLog log;
  evaluate(m, ds.test, ds.splits, a.bins, &log);
  const CalibrationReport rep = ece(log, a.bins);
  io::write_file(out / "reliability.csv", io::reliability_csv(rep.rows));
  io::write_file(out / "calibration.json", io::calibration_json(rep, split_accuracy(log, ds.splits)).dump(2) + "\n");
  std::cout << "ECE " << fmt_pct(rep.ece_percent) << "% over " << a.bins << " bins (" << to_string(rep.direction)
            << ")\nwrote " << out.string() << "\n";
  return kOk;
}

int cmd_weight_norms(const ModelArgs& a) {
  const LongTailedDataset ds = read_dataset(a.data);
  Model m = load_model_for(a.checkpoint, ds);
  const fs::path out = resolve_out(a.out, "weight-norms");
  io::write_file(out / "weight_norms.csv", io::weight_norms_csv(weight_norms(m.head), ds.class_counts));
  std::cout << "wrote " << (out / "weight_norms.csv").string() << "\n";
  return kOk;
}

int cmd_distributions(const ModelArgs& a) {
  const LongTailedDataset ds = read_dataset(a.data);
  Model m = load_model_for(a.checkpoint, ds);
  const fs::path out = resolve_out(a.out, "distributions");
  PredictionLog log;
  evaluate(m, ds.test, ds.splits, 15, &log);
  const ProbabilityDistribution dist = probability_distribution(log, ds.splits);
  for (Split s : {Split::Many, Split::Medium, Split::Few}) {
    io::write_file(out / ("probabilities_" + to_string(s) + ".csv"), io::distribution_csv(dist.of(s)));
  }
  io::write_file(out / "distributions.json", io::distribution_summary_json(dist).dump(2) + "\n");
  std::cout << "wrote " << out.string() << "\n";
  return kOk;
}

int cmd_presets(const std::string& show) {
  if (show.empty()) {
    for (const auto& n : io::preset_names()) std::cout << n << "\n";
    return kOk;
  }
  try {
    std::cout << io::preset(show).dump(2) << "\n";
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-tailed recognition with mixup, shifted BN and label-aware smoothing"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic long-tailed blob dataset");
  gen_cmd->add_option("--classes", gen.classes, "Number of classes K")->check(CLI::Range(2, 1000000));
  gen_cmd->add_option("--nmax", gen.nmax, "Training count of the largest class");
  gen_cmd->add_option("--nmin", gen.nmin, "Training count of the smallest class");
  gen_cmd->add_option("--dim", gen.dim, "Feature dimension");
  gen_cmd->add_option("--spread", gen.spread, "Per-coordinate standard deviation");
  gen_cmd->add_option("--seed", gen.seed, "Sampling seed");
  gen_cmd->add_option("--test-per-class", gen.test_per_class, "Balanced test samples per class");
  gen_cmd->add_option("--out", gen.out, "Output directory");

  RunArgs train;
  auto* train_cmd = app.add_subcommand("train", "Run both training stages");
  train_cmd->add_option("--config", train.config, "Config JSON");
  train_cmd->add_option("--preset", train.preset, "Named preset instead of --config");
  train_cmd->add_option("--data", train.data, "Dataset directory (overrides the config)");
  train_cmd->add_option("--out", train.out, "Output directory");

  RunArgs ablate;
  auto* ablate_cmd = app.add_subcommand("ablate", "Run the MU x SL x LAS ablation grid");
  ablate_cmd->add_option("--config", ablate.config, "Config JSON");
  ablate_cmd->add_option("--preset", ablate.preset, "Named preset instead of --config");
  ablate_cmd->add_option("--data", ablate.data, "Dataset directory (overrides the config)");
  ablate_cmd->add_option("--out", ablate.out, "Output directory");
  ablate_cmd->add_option("--workers", ablate.workers, "Cells trained concurrently");

  auto add_model_cmd = [&](const char* name, const char* help, ModelArgs& args, bool with_bins) {
    auto* c = app.add_subcommand(name, help);
    c->add_option("--checkpoint", args.checkpoint, "Checkpoint manifest (model.json)")->required();
    c->add_option("--data", args.data, "Dataset directory")->required();
    if (with_bins) c->add_option("--bins", args.bins, "Number of confidence bins");
    c->add_option("--out", args.out, "Output directory");
    return c;
  };
  ModelArgs eval_args, rel_args, norm_args, dist_args;
  auto* eval_cmd = add_model_cmd("eval", "Accuracy, ECE and split accuracies", eval_args, true);
  auto* rel_cmd = add_model_cmd("reliability", "Reliability-diagram table", rel_args, true);
  auto* norm_cmd = add_model_cmd("weight-norms", "Per-class classifier weight norms", norm_args, false);
  auto* dist_cmd = add_model_cmd("distributions", "True-class probability samples per split", dist_args, false);

  std::string show;
  auto* presets_cmd = app.add_subcommand("presets", "List presets or print one");
  presets_cmd->add_option("--show", show, "Preset to print");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen);
    if (*train_cmd) return cmd_train(train);
    if (*ablate_cmd) return cmd_ablate(ablate);
    if (*eval_cmd) return cmd_eval(eval_args);
    if (*rel_cmd) return cmd_reliability(rel_args);
    if (*norm_cmd) return cmd_weight_norms(norm_args);
    if (*dist_cmd) return cmd_distributions(dist_args);
    if (*presets_cmd) return cmd_presets(show);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const ShapeMismatch& e) {
    std::cerr << "shape mismatch: " << e.what() << "\n";
    return kShape;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
