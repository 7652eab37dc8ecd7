#include "mislas/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace mislas::io {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_file(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --- dataset -------------------------------------------------------------

std::string labeled_set_csv(const LabeledSet& set) {
  std::string out;
  for (Index d = 0; d < set.dim(); ++d) {
    out += "feat_" + std::to_string(d) + ",";
  }
  out += "label\n";
  for (Index i = 0; i < set.size(); ++i) {
    for (Index d = 0; d < set.dim(); ++d) {
      out += format_double(set.features(i, d));
      out += ',';
    }
    out += std::to_string(set.labels[i]);
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& s, std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DomainError("CSV line " + std::to_string(line) + ": not a number '" + s + "'");
  }
  return v;
}

}  // namespace

LabeledSet parse_labeled_set_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DomainError("CSV is empty");
  const auto header = split_line(line);
  if (header.empty() || header.back() != "label") throw DomainError("CSV header must end with 'label'");
  const Index dim = static_cast<Index>(header.size()) - 1;
  for (Index d = 0; d < dim; ++d) {
    if (header[d] != "feat_" + std::to_string(d)) {
      throw DomainError("CSV header column " + std::to_string(d) + " must be feat_" + std::to_string(d));
    }
  }
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_line(line);
    if (static_cast<Index>(cells.size()) != dim + 1) {
      throw DomainError("CSV line " + std::to_string(lineno) + ": expected " + std::to_string(dim + 1) + " fields");
    }
    for (Index d = 0; d < dim; ++d) values.push_back(parse_number(cells[d], lineno));
    const double y = parse_number(cells.back(), lineno);
    if (y != static_cast<int>(y) || y < 0) throw DomainError("CSV line " + std::to_string(lineno) + ": bad label");
    labels.push_back(static_cast<int>(y));
  }
  LabeledSet set;
  set.features = Eigen::Map<Matrix>(values.data(), static_cast<Index>(labels.size()), dim);
  set.labels = std::move(labels);
  return set;
}

json dataset_sidecar(const LongTailedDataset& ds) {
  json j;
  j["num_classes"] = ds.num_classes();
  j["dim"] = ds.dim();
  j["class_counts"] = ds.class_counts;
  std::vector<std::string> splits;
  for (Split s : ds.splits) splits.push_back(to_string(s));
  j["splits"] = splits;
  j["imbalance_factor"] = ds.imbalance_factor();
  j["seed"] = ds.seed;
  j["spread"] = ds.spread;
  j["train_size"] = ds.train.size();
  j["test_size"] = ds.test.size();
  return j;
}

void save_dataset(const LongTailedDataset& ds, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "'");
  write_file(dir / "train.csv", labeled_set_csv(ds.train));
  write_file(dir / "test.csv", labeled_set_csv(ds.test));
  write_file(dir / "dataset.json", dataset_sidecar(ds).dump(2) + "\n");
}

LongTailedDataset load_dataset(const fs::path& dir) {
  LabeledSet train = parse_labeled_set_csv(read_file(dir / "train.csv"));
  LabeledSet test;
  if (fs::exists(dir / "test.csv")) {
    test = parse_labeled_set_csv(read_file(dir / "test.csv"));
  } else {
    test.features.resize(0, train.dim());
  }
  int k = 0;
  for (int y : train.labels) k = std::max(k, y + 1);
  for (int y : test.labels) k = std::max(k, y + 1);
  std::uint64_t seed = 0;
  double spread = 0.0;
  std::optional<std::vector<std::string>> tags;
  if (fs::exists(dir / "dataset.json")) {
    json side;
    try {
      side = json::parse(read_file(dir / "dataset.json"));
      k = side.at("num_classes").get<int>();
      seed = side.value("seed", std::uint64_t{0});
      spread = side.value("spread", 0.0);
      if (side.contains("splits")) tags = side.at("splits").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw DomainError(std::string("dataset.json: ") + e.what());
    }
  }
  LongTailedDataset ds = dataset_from_sets(std::move(train), std::move(test), k);
  ds.seed = seed;
  ds.spread = spread;
  if (tags) {
    if (static_cast<int>(tags->size()) != k) throw DomainError("dataset.json: splits length differs from classes");
    for (int j = 0; j < k; ++j) {
      if (split_from_string((*tags)[j]) != ds.splits[j]) {
        throw DomainError("dataset.json: split tag of class " + std::to_string(j) + " disagrees with its count");
      }
    }
  }
  return ds;
}

json schedule_json(const SmoothingSchedule& s) {
  json j;
  j["kind"] = to_string(s.fn.kind);
  j["eps1"] = s.eps1;
  j["epsK"] = s.epsK;
  j["p"] = s.fn.p;
  j["eps"] = s.eps;
  return j;
}

// --- config --------------------------------------------------------------

namespace {

class Reader {
 public:
  Reader(const json& j, std::string path, std::set<std::string> allowed) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!allowed.count(it.key())) fail(join(it.key()), "unknown field");
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  void get(const std::string& key, T& out) const {
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) fail(join(key), "expected a boolean");
      } else if constexpr (std::is_arithmetic_v<T>) {
        if (!v.is_number()) fail(join(key), "expected a number");
        if constexpr (std::is_integral_v<T>) {
          if (!v.is_number_integer() && !v.is_number_unsigned()) fail(join(key), "expected an integer");
        }
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) fail(join(key), "expected a string");
      }
      out = v.get<T>();
    } catch (const json::exception& e) {
      fail(join(key), e.what());
    }
  }

  Reader child(const std::string& key, std::set<std::string> allowed) const {
    return Reader(j_.at(key), join(key), std::move(allowed));
  }

  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] static void fail(const std::string& field, const std::string& msg) {
    throw DomainError(field + ": " + msg);
  }

 private:
  const json& j_;
  std::string path_;
};

template <class F>
auto field(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const DomainError& e) {
    const std::string what = e.what();
    if (what.rfind(name, 0) == 0) throw;
    throw DomainError(name + ": " + what);
  }
}

json schedule_to_json(const LrSchedule& s, int epochs) {
  json j;
  j["epochs"] = epochs;
  j["schedule"] = to_string(s.kind);
  j["milestones"] = s.milestones;
  j["factor"] = s.factor;
  return j;
}

void schedule_from_reader(const Reader& r, LrSchedule& s, int& epochs, const std::string& name) {
  r.get("epochs", epochs);
  if (r.has("schedule")) {
    std::string kind;
    r.get("schedule", kind);
    s.kind = field(name + ".schedule", [&] { return schedule_from_string(kind); });
  }
  r.get("milestones", s.milestones);
  r.get("factor", s.factor);
}

}  // namespace

json config_to_json(const TrainConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["lr"] = c.lr;
  j["batch_size"] = c.batch_size;
  j["weight_decay"] = c.weight_decay;
  j["momentum"] = c.momentum;
  j["stage1"] = schedule_to_json(c.stage1_schedule, c.stage1_epochs);
  json s2 = schedule_to_json(c.stage2_schedule, c.stage2_epochs);
  s2["enabled"] = c.stage2_enabled;
  s2["lr_factor"] = c.stage2_lr_factor;
  s2["reweight"] = c.stage2_loss == Stage2Loss::WeightedCE;
  s2["effective_number_gamma"] = c.effective_number_gamma;
  s2["dw_weight_decay"] = c.stage2_dw_weight_decay;
  s2["bn_warm_steps"] = c.bn_warm_steps;
  s2["batches_per_epoch"] = c.stage2_batches_per_epoch;
  j["stage2"] = s2;
  j["las"] = {{"eps1", c.eps1},
              {"epsK", c.epsK},
              {"related_fn", to_string(c.related_fn.kind)},
              {"p", c.related_fn.p},
              {"compose_with_mixup", c.compose_mixup_las}};
  j["head"] = {{"lr_ratio_dw", c.lr_ratio_dw}, {"retention", c.retention}};
  j["mixup"] = {{"alpha", c.mixup.alpha}};
  j["toggles"] = {{"mixup_stage1", c.mixup_stage1},
                  {"mixup_stage2", c.mixup_stage2},
                  {"shift_bn", c.shift_bn},
                  {"las", c.stage2_loss == Stage2Loss::LAS},
                  {"head_mode", to_string(c.head_mode)}};
  j["backbone"] = {{"hidden", c.backbone.hidden},
                   {"activation", to_string(c.backbone.activation)},
                   {"batch_norm", c.backbone.batch_norm},
                   {"bn_momentum", c.backbone.bn_momentum},
                   {"bn_eps", c.backbone.bn_eps}};
  j["eval_bins"] = c.eval_bins;
  j["track_epochs"] = c.track_epochs;
  return j;
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  Reader root(j, "",
              {"name", "dataset", "seed", "lr", "batch_size", "weight_decay", "momentum", "stage1", "stage2", "las",
               "head", "mixup", "toggles", "backbone", "eval_bins", "track_epochs"});
  root.get("seed", c.seed);
  root.get("lr", c.lr);
  root.get("batch_size", c.batch_size);
  root.get("weight_decay", c.weight_decay);
  root.get("momentum", c.momentum);
  root.get("eval_bins", c.eval_bins);
  root.get("track_epochs", c.track_epochs);

  if (root.has("stage1")) {
    Reader r = root.child("stage1", {"epochs", "schedule", "milestones", "factor"});
    schedule_from_reader(r, c.stage1_schedule, c.stage1_epochs, "stage1");
  }
  bool reweight = false;
  if (root.has("stage2")) {
    Reader r = root.child("stage2", {"enabled", "epochs", "schedule", "milestones", "factor", "lr_factor", "reweight",
                                     "effective_number_gamma", "dw_weight_decay", "bn_warm_steps",
                                     "batches_per_epoch"});
    schedule_from_reader(r, c.stage2_schedule, c.stage2_epochs, "stage2");
    r.get("enabled", c.stage2_enabled);
    r.get("lr_factor", c.stage2_lr_factor);
    r.get("reweight", reweight);
    r.get("effective_number_gamma", c.effective_number_gamma);
    r.get("dw_weight_decay", c.stage2_dw_weight_decay);
    r.get("bn_warm_steps", c.bn_warm_steps);
    r.get("batches_per_epoch", c.stage2_batches_per_epoch);
  }
  if (root.has("las")) {
    Reader r = root.child("las", {"eps1", "epsK", "related_fn", "p", "compose_with_mixup"});
    r.get("eps1", c.eps1);
    r.get("epsK", c.epsK);
    if (r.has("related_fn")) {
      std::string kind;
      r.get("related_fn", kind);
      c.related_fn.kind = field("las.related_fn", [&] { return related_fn_from_string(kind); });
    }
    r.get("p", c.related_fn.p);
    r.get("compose_with_mixup", c.compose_mixup_las);
  }
  if (root.has("head")) {
    Reader r = root.child("head", {"lr_ratio_dw", "retention"});
    r.get("lr_ratio_dw", c.lr_ratio_dw);
    r.get("retention", c.retention);
  }
  if (root.has("mixup")) {
    Reader r = root.child("mixup", {"alpha"});
    r.get("alpha", c.mixup.alpha);
  }
  bool las = false;
  if (root.has("toggles")) {
    Reader r = root.child("toggles", {"mixup_stage1", "mixup_stage2", "shift_bn", "las", "head_mode"});
    r.get("mixup_stage1", c.mixup_stage1);
    r.get("mixup_stage2", c.mixup_stage2);
    r.get("shift_bn", c.shift_bn);
    r.get("las", las);
    if (r.has("head_mode")) {
      std::string mode;
      r.get("head_mode", mode);
      c.head_mode = field("toggles.head_mode", [&] { return head_mode_from_string(mode); });
    }
  }
  if (las && reweight) throw DomainError("stage2.reweight: cannot be combined with toggles.las");
  c.stage2_loss = las ? Stage2Loss::LAS : (reweight ? Stage2Loss::WeightedCE : Stage2Loss::CE);
  if (root.has("backbone")) {
    Reader r = root.child("backbone", {"hidden", "activation", "batch_norm", "bn_momentum", "bn_eps"});
    r.get("hidden", c.backbone.hidden);
    if (r.has("activation")) {
      std::string a;
      r.get("activation", a);
      c.backbone.activation = field("backbone.activation", [&] { return activation_from_string(a); });
    }
    r.get("batch_norm", c.backbone.batch_norm);
    r.get("bn_momentum", c.backbone.bn_momentum);
    r.get("bn_eps", c.backbone.bn_eps);
  }
  c.validate();
  return c;
}

// --- presets -------------------------------------------------------------

namespace {

struct PresetRow {
  const char* name;
  int classes;
  long nmax;
  long nmin;
  double lr;
  int batch;
  double wd;
  const char* stage1_schedule;
  int stage2_epochs;
  double eps1;
  double epsK;
  double lr_ratio_dw;
};

// Per-dataset hyperparameters; datasets are synthetic
// analogs with the same class count and imbalance factor.
constexpr PresetRow kPresets[] = {
    {"mislas-cifar10lt-if10-analog", 10, 5000, 500, 0.1, 128, 2e-4, "multistep", 10, 0.1, 0.0, 0.2},
    {"mislas-cifar10lt-if50-analog", 10, 5000, 100, 0.1, 128, 2e-4, "multistep", 10, 0.2, 0.0, 0.2},
    {"mislas-cifar10lt-if100-analog", 10, 5000, 50, 0.1, 128, 2e-4, "multistep", 10, 0.3, 0.0, 0.5},
    {"mislas-cifar100lt-if10-analog", 100, 500, 50, 0.1, 128, 2e-4, "multistep", 10, 0.2, 0.0, 0.1},
    {"mislas-cifar100lt-if50-analog", 100, 500, 10, 0.1, 128, 2e-4, "multistep", 10, 0.3, 0.0, 0.1},
    {"mislas-cifar100lt-if100-analog", 100, 500, 5, 0.1, 128, 2e-4, "multistep", 10, 0.4, 0.1, 0.2},
    {"mislas-imagenetlt-analog", 1000, 1280, 5, 0.1, 256, 5e-4, "cosine", 10, 0.3, 0.0, 0.05},
    {"mislas-placeslt-analog", 365, 4980, 5, 0.1, 256, 5e-4, "cosine", 10, 0.4, 0.1, 0.05},
    {"mislas-inat2018-analog", 8142, 1000, 2, 0.1, 256, 1e-4, "cosine", 30, 0.4, 0.0, 0.05},
};

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : kPresets) out.emplace_back(p.name);
  return out;
}

json preset(const std::string& name) {
  for (const auto& p : kPresets) {
    if (name != p.name) continue;
    // Stage-1 runs 40 epochs instead of 200 (desk scale); multistep
    // milestones keep their relative positions (160/200, 180/200).
    const int stage1_epochs = 40;
    json j;
    j["name"] = p.name;
    j["seed"] = 0;
    j["lr"] = p.lr;
    j["batch_size"] = p.batch;
    j["weight_decay"] = p.wd;
    j["momentum"] = 0.9;
    j["stage1"] = {{"epochs", stage1_epochs},
                   {"schedule", p.stage1_schedule},
                   {"milestones", std::string(p.stage1_schedule) == "multistep" ? std::vector<int>{32, 36}
                                                                                 : std::vector<int>{}},
                   {"factor", 0.1}};
    j["stage2"] = {{"enabled", true}, {"epochs", p.stage2_epochs}, {"schedule", "cosine"}, {"lr_factor", 1.0}};
    j["las"] = {{"eps1", p.eps1}, {"epsK", p.epsK}, {"related_fn", "concave"}};
    j["head"] = {{"lr_ratio_dw", p.lr_ratio_dw}, {"retention", 1.0}};
    j["mixup"] = {{"alpha", 0.2}};
    j["toggles"] = {{"mixup_stage1", true},
                    {"mixup_stage2", false},
                    {"shift_bn", true},
                    {"las", true},
                    {"head_mode", "generalized"}};
    j["backbone"] = {{"hidden", {64, 64}}, {"activation", "relu"}, {"batch_norm", true}};
    j["eval_bins"] = 15;
    j["dataset"] = {{"synthetic",
                     {{"classes", p.classes},
                      {"nmax", p.nmax},
                      {"nmin", p.nmin},
                      {"dim", 16},
                      {"spread", 0.4},
                      {"seed", 0},
                      {"test_per_class", 100}}}};
    return j;
  }
  throw DomainError("unknown preset '" + name + "'");
}

// --- checkpoint ----------------------------------------------------------

namespace {

void append_le(std::string& blob, const double* data, Index n) {
  const std::size_t start = blob.size();
  blob.resize(start + sizeof(double) * static_cast<std::size_t>(n));
  std::memcpy(blob.data() + start, data, sizeof(double) * static_cast<std::size_t>(n));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = start; i < blob.size(); i += sizeof(double)) std::reverse(&blob[i], &blob[i] + sizeof(double));
  }
}

void read_le(const std::string& blob, std::size_t offset, double* out, Index n) {
  const std::size_t bytes = sizeof(double) * static_cast<std::size_t>(n);
  if (offset + bytes > blob.size()) throw DomainError("checkpoint blob is truncated");
  std::string chunk = blob.substr(offset, bytes);
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < chunk.size(); i += sizeof(double)) std::reverse(&chunk[i], &chunk[i] + sizeof(double));
  }
  std::memcpy(out, chunk.data(), bytes);
}

struct NamedBuffer {
  std::string name;
  Index rows;
  Index cols;
  double* data;
};

std::vector<NamedBuffer> model_buffers(Model& m) {
  std::vector<NamedBuffer> out;
  auto add = [&](std::string name, Matrix& v) { out.push_back({std::move(name), v.rows(), v.cols(), v.data()}); };
  auto add_row = [&](std::string name, RowVector& v) { out.push_back({std::move(name), 1, v.size(), v.data()}); };
  auto& bb = m.backbone;
  for (std::size_t i = 0; i < bb.linears().size(); ++i) {
    const std::string p = "backbone.linear" + std::to_string(i);
    add(p + ".weight", bb.linears()[i].weight.mutable_value());
    add(p + ".bias", bb.linears()[i].bias.mutable_value());
  }
  for (std::size_t i = 0; i < bb.norms().size(); ++i) {
    const std::string p = "backbone.bn" + std::to_string(i);
    add(p + ".scale", bb.norms()[i].scale.mutable_value());
    add(p + ".shift", bb.norms()[i].shift.mutable_value());
    add_row(p + ".running_mean", bb.norms()[i].running_mean);
    add_row(p + ".running_var", bb.norms()[i].running_var);
  }
  add("head.weight", m.head.weight.mutable_value());
  add("head.delta_weight", m.head.delta_weight.mutable_value());
  add("head.scale", m.head.scale.mutable_value());
  return out;
}

}  // namespace

void save_checkpoint(const Model& model, const fs::path& manifest_path) {
  Model m = model.clone();
  const auto& bc = m.backbone.config();
  json j;
  j["format"] = "mislas-checkpoint";
  j["version"] = 1;
  j["stage"] = m.stage;
  fs::path blob_path = manifest_path;
  blob_path.replace_extension(".bin");
  j["blob"] = blob_path.filename().string();
  j["byte_order"] = "little";
  j["backbone"] = {{"input_dim", bc.input_dim},
                   {"hidden", bc.hidden},
                   {"activation", to_string(bc.activation)},
                   {"batch_norm", bc.batch_norm},
                   {"bn_momentum", bc.bn_momentum},
                   {"bn_eps", bc.bn_eps},
                   {"seed", bc.seed}};
  std::vector<std::string> modes;
  for (const auto& n : m.backbone.norms()) modes.push_back(to_string(n.mode));
  j["backbone"]["bn_modes"] = modes;
  j["head"] = {{"mode", to_string(m.head.mode)},
               {"retention", m.head.retention},
               {"lr_ratio_dw", m.head.lr_ratio_dw},
               {"feature_dim", m.head.feature_dim()},
               {"num_classes", m.head.num_classes()}};
  std::string blob;
  json tensors = json::array();
  for (const auto& b : model_buffers(m)) {
    tensors.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}, {"offset", blob.size()}});
    append_le(blob, b.data, b.rows * b.cols);
  }
  j["tensors"] = tensors;
  write_file(blob_path, blob);
  write_file(manifest_path, j.dump(2) + "\n");
}

Model load_checkpoint(const fs::path& manifest_path) {
  json j;
  try {
    j = json::parse(read_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw DomainError(std::string("checkpoint manifest: ") + e.what());
  }
  try {
    if (j.at("format") != "mislas-checkpoint") throw DomainError("checkpoint manifest: unexpected format");
    const json& b = j.at("backbone");
    BackboneConfig bc;
    bc.input_dim = b.at("input_dim").get<Index>();
    bc.hidden = b.at("hidden").get<std::vector<Index>>();
    bc.activation = activation_from_string(b.at("activation").get<std::string>());
    bc.batch_norm = b.at("batch_norm").get<bool>();
    bc.bn_momentum = b.at("bn_momentum").get<double>();
    bc.bn_eps = b.at("bn_eps").get<double>();
    bc.seed = b.at("seed").get<std::uint64_t>();
    Model m;
    m.backbone = Backbone(bc);
    const auto modes = b.value("bn_modes", std::vector<std::string>{});
    for (std::size_t i = 0; i < modes.size() && i < m.backbone.norms().size(); ++i) {
      m.backbone.norms()[i].mode = bn_mode_from_string(modes[i]);
    }
    const json& h = j.at("head");
    m.stage = j.at("stage").get<int>();
    const Index feat = h.at("feature_dim").get<Index>();
    const Index k = h.at("num_classes").get<Index>();
    if (feat != m.backbone.feature_dim()) throw DomainError("checkpoint head width disagrees with backbone");
    m.head = GeneralizedHead::from_weight(Matrix::Zero(feat, k), head_mode_from_string(h.at("mode")),
                                          h.at("retention").get<double>(), h.at("lr_ratio_dw").get<double>());
    m.head.retention = h.at("retention").get<double>();

    fs::path blob_path = manifest_path.parent_path() / j.at("blob").get<std::string>();
    const std::string blob = read_file(blob_path);
    auto buffers = model_buffers(m);
    const json& tensors = j.at("tensors");
    if (tensors.size() != buffers.size()) throw DomainError("checkpoint tensor list does not match the model");
    for (std::size_t i = 0; i < buffers.size(); ++i) {
      const json& t = tensors[i];
      if (t.at("name") != buffers[i].name || t.at("rows").get<Index>() != buffers[i].rows ||
          t.at("cols").get<Index>() != buffers[i].cols) {
        throw DomainError("checkpoint tensor '" + buffers[i].name + "' has an unexpected name or shape");
      }
      read_le(blob, t.at("offset").get<std::size_t>(), buffers[i].data, buffers[i].rows * buffers[i].cols);
    }
    return m;
  } catch (const json::exception& e) {
    throw DomainError(std::string("checkpoint manifest: ") + e.what());
  }
}

// --- tabular artifacts ---------------------------------------------------

std::string metrics_csv(const std::vector<EpochMetrics>& curve) {
  std::string out = "epoch,stage,lr,train_loss,test_acc,ece\n";
  for (const auto& e : curve) {
    out += std::to_string(e.epoch) + "," + std::to_string(e.stage) + "," + format_double(e.lr) + "," +
           format_double(e.train_loss) + "," + format_double(e.test_acc) + "," + format_double(e.ece) + "\n";
  }
  return out;
}

std::string reliability_csv(const std::vector<ReliabilityRow>& rows) {
  std::string out = "bin_lo,bin_hi,count,accuracy,confidence\n";
  for (const auto& r : rows) {
    out += format_double(r.bin_lo) + "," + format_double(r.bin_hi) + "," + std::to_string(r.count) + "," +
           format_double(r.accuracy) + "," + format_double(r.confidence) + "\n";
  }
  return out;
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json calibration_json(const CalibrationReport& rep, const SplitAccuracy& acc) {
  json j;
  j["bins"] = rep.bins;
  j["ece_percent"] = rep.ece_percent;
  j["signed_gap"] = rep.signed_gap;
  j["direction"] = to_string(rep.direction);
  j["accuracy"] = {{"all", acc.all}, {"many", optional_json(acc.many)}, {"medium", optional_json(acc.medium)},
                   {"few", optional_json(acc.few)}};
  return j;
}

std::string weight_norms_csv(const WeightNorms& norms, const std::vector<long>& counts) {
  std::string out = "class,count,norm_effective,norm_w\n";
  for (std::size_t k = 0; k < norms.effective.size(); ++k) {
    const long n = k < counts.size() ? counts[k] : 0;
    out += std::to_string(k) + "," + std::to_string(n) + "," + format_double(norms.effective[k]) + "," +
           format_double(norms.raw[k]) + "\n";
  }
  return out;
}

std::string distribution_csv(const DistributionSummary& d) {
  std::string out = "probability\n";
  for (double v : d.samples) out += format_double(v) + "\n";
  return out;
}

json distribution_summary_json(const ProbabilityDistribution& d) {
  json j;
  for (Split s : {Split::Many, Split::Medium, Split::Few}) {
    const auto& part = d.of(s);
    j[to_string(s)] = {{"count", part.samples.size()},
                       {"mean", part.samples.empty() ? json(nullptr) : json(part.mean)},
                       {"median", part.samples.empty() ? json(nullptr) : json(part.median)},
                       {"frac_above_0.99", part.samples.empty() ? json(nullptr) : json(part.frac_above_099)}};
  }
  return j;
}

json eval_json(const EvalMetrics& m) {
  json j;
  j["accuracy"] = m.accuracy;
  j["ece"] = m.ece;
  j["direction"] = to_string(m.direction);
  j["split_accuracy"] = {{"many", optional_json(m.splits.many)},
                         {"medium", optional_json(m.splits.medium)},
                         {"few", optional_json(m.splits.few)}};
  j["split_counts"] = {{"many", m.splits.n_many}, {"medium", m.splits.n_medium}, {"few", m.splits.n_few}};
  return j;
}

}  // namespace mislas::io
