#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mislas/calib.hpp"
#include "mislas/data.hpp"
#include "mislas/losses.hpp"
#include "mislas/trainer.hpp"

namespace mislas::io {

namespace fs = std::filesystem;
using nlohmann::json;

/// Shortest round-trip decimal form.
std::string format_double(double v);

/// Writes the whole string; throws IoError on failure.
void write_file(const fs::path& path, const std::string& content);
std::string read_file(const fs::path& path);

// Dataset: <dir>/train.csv, <dir>/test.csv (header feat_0,...,feat_{M-1},label)
// and <dir>/dataset.json with class_counts, splits, seed.
std::string labeled_set_csv(const LabeledSet& set);
LabeledSet parse_labeled_set_csv(const std::string& text);
json dataset_sidecar(const LongTailedDataset& ds);
void save_dataset(const LongTailedDataset& ds, const fs::path& dir);
/// Reads the sidecar when present, otherwise derives metadata from the labels.
LongTailedDataset load_dataset(const fs::path& dir);

json schedule_json(const SmoothingSchedule& s);

/// Config keys follow the hyperparameter table: lr, batch_size, weight_decay,
/// stage1 {epochs, schedule, milestones, factor}, stage2 {...}, las {eps1, epsK, ...},
/// head {mode, lr_ratio_dw, retention}, toggles, backbone, mixup, seed.
json config_to_json(const TrainConfig& cfg);
/// Throws DomainError with the offending field path.
TrainConfig config_from_json(const json& j);

/// Named presets, one per row of the hyperparameter table, for the synthetic analogs.
std::vector<std::string> preset_names();
json preset(const std::string& name);

/// Checkpoint: <stem>.json manifest plus <stem>.bin little-endian f64 blob.
void save_checkpoint(const Model& model, const fs::path& manifest_path);
Model load_checkpoint(const fs::path& manifest_path);

std::string metrics_csv(const std::vector<EpochMetrics>& curve);
std::string reliability_csv(const std::vector<ReliabilityRow>& rows);
json calibration_json(const CalibrationReport& rep, const SplitAccuracy& acc);
std::string weight_norms_csv(const WeightNorms& norms, const std::vector<long>& counts);
/// One CSV per split: header `probability`.
std::string distribution_csv(const DistributionSummary& d);
json distribution_summary_json(const ProbabilityDistribution& d);

json eval_json(const EvalMetrics& m);

}  // namespace mislas::io
