#include <doctest.h>

#include <cstring>

#include "mislas/errors.hpp"
#include "mislas/io.hpp"

using namespace mislas;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mislas-test-io-" + name);
  fs::remove_all(p);
  return p;
}

Model trained_model(const LongTailedDataset& ds) {
  TrainConfig c;
  c.backbone.hidden = {8, 8};
  c.batch_size = 32;
  c.stage1_epochs = 2;
  c.stage1_schedule = {ScheduleKind::Multistep, {1}, 0.1};
  c.stage2_epochs = 1;
  c.shift_bn = true;
  c.track_epochs = false;
  return run_pipeline(c, ds).model;
}

}  // namespace

TEST_CASE("doubles print in shortest round-trip form") {
  CHECK(io::format_double(0.1) == "0.1");
  CHECK(io::format_double(1e-5) == "1e-05");
  const double x = 0.1 + 0.2;
  CHECK(std::stod(io::format_double(x)) == x);
}

TEST_CASE("datasets round-trip exactly") {
  const auto ds = gen_gaussian_blobs(make_longtail_profile(60, 6, 4), 3, 0.5, 8, 5);
  const fs::path dir = scratch("data");
  io::save_dataset(ds, dir);
  const auto back = io::load_dataset(dir);
  CHECK(back.train.features == ds.train.features);
  CHECK(back.test.labels == ds.test.labels);
  CHECK(back.class_counts == ds.class_counts);
  CHECK(back.splits == ds.splits);
  CHECK(back.seed == 8);

  fs::remove(dir / "dataset.json");
  const auto derived = io::load_dataset(dir);
  CHECK(derived.class_counts == ds.class_counts);
  CHECK(derived.splits == ds.splits);
  fs::remove_all(dir);
}

TEST_CASE("CSV parsing rejects malformed input") {
  CHECK_THROWS_AS(io::parse_labeled_set_csv("feat_0,label\n1.0\n"), DomainError);
  CHECK_THROWS_AS(io::parse_labeled_set_csv("x,label\n1.0,0\n"), DomainError);
  CHECK_THROWS_AS(io::parse_labeled_set_csv("feat_0,label\n1.0,-1\n"), DomainError);
  const auto set = io::parse_labeled_set_csv("feat_0,feat_1,label\n1.5,2,1\n-3,0.25,0\n");
  CHECK(set.size() == 2);
  CHECK(set.features(1, 1) == 0.25);
  CHECK(set.labels[0] == 1);
  CHECK_THROWS_AS(io::load_dataset(scratch("missing")), IoError);
}

TEST_CASE("checkpoints round-trip bit for bit") {
  const auto ds = gen_gaussian_blobs(make_longtail_profile(80, 8, 4), 3, 0.5, 2, 10);
  Model m = trained_model(ds);
  const fs::path dir = scratch("ckpt");
  io::save_checkpoint(m, dir / "model.json");
  CHECK(fs::exists(dir / "model.bin"));
  Model back = io::load_checkpoint(dir / "model.json");
  CHECK(frozen_parameter_bytes(back) == frozen_parameter_bytes(m));
  CHECK(back.head.combined_weight() == m.head.combined_weight());
  CHECK(back.head.scale.value() == m.head.scale.value());
  CHECK(back.backbone.norms()[1].running_var == m.backbone.norms()[1].running_var);
  CHECK(back.logits(ds.test.features) == m.logits(ds.test.features));

  std::string blob = io::read_file(dir / "model.bin");
  io::write_file(dir / "model.bin", blob.substr(0, blob.size() / 2));
  CHECK_THROWS_AS(io::load_checkpoint(dir / "model.json"), DomainError);
  fs::remove_all(dir);
}

TEST_CASE("config JSON round-trips and rejects unknown keys") {
  TrainConfig c;
  c.lr = 0.05;
  c.stage1_epochs = 12;
  c.stage1_schedule.milestones = {8, 10};
  c.stage2_loss = Stage2Loss::LAS;
  c.related_fn = {RelatedFnKind::Exponential, 3.0};
  c.shift_bn = true;
  c.backbone.hidden = {32};
  const auto j = io::config_to_json(c);
  const TrainConfig back = io::config_from_json(j);
  CHECK(io::config_to_json(back) == j);

  auto bad = j;
  bad["stage1"]["epoch"] = 3;
  CHECK_THROWS_WITH_AS(io::config_from_json(bad), doctest::Contains("stage1.epoch"), DomainError);
  bad = j;
  bad["las"]["eps1"] = "high";
  CHECK_THROWS_WITH_AS(io::config_from_json(bad), doctest::Contains("las.eps1"), DomainError);
  bad = j;
  bad["batch_size"] = 0;
  CHECK_THROWS_WITH_AS(io::config_from_json(bad), doctest::Contains("batch_size"), DomainError);
}

TEST_CASE("every preset is a valid config") {
  const auto names = io::preset_names();
  CHECK(names.size() == 9);
  for (const auto& n : names) {
    CAPTURE(n);
    const auto j = io::preset(n);
    CHECK_NOTHROW(io::config_from_json(j));
    CHECK(j.at("dataset").contains("synthetic"));
  }
  CHECK_THROWS_AS(io::preset("nope"), DomainError);
}

TEST_CASE("tabular exports") {
  std::vector<EpochMetrics> curve{{1, 1, 0.1, 2.5, 40.0, 12.0}};
  CHECK(io::metrics_csv(curve) == "epoch,stage,lr,train_loss,test_acc,ece\n1,1,0.1,2.5,40,12\n");
  ReliabilityRow r{0.0, 0.5, 3, 1.0, 0.25};
  CHECK(io::reliability_csv({r}) == "bin_lo,bin_hi,count,accuracy,confidence\n0,0.5,3,1,0.25\n");
  WeightNorms n{{2.0}, {1.0}};
  CHECK(io::weight_norms_csv(n, {10}) == "class,count,norm_effective,norm_w\n0,10,2,1\n");
}
