#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mislas/calib.hpp"
#include "mislas/classifier.hpp"
#include "mislas/data.hpp"
#include "mislas/losses.hpp"
#include "mislas/net.hpp"

namespace mislas {

enum class ScheduleKind { Multistep, Cosine };

std::string to_string(ScheduleKind k);
ScheduleKind schedule_from_string(const std::string& s);

struct LrSchedule {
  ScheduleKind kind = ScheduleKind::Cosine;
  std::vector<int> milestones;  // Multistep only
  double factor = 0.1;
};

/// Learning rate for 0-based `epoch`.
///   Multistep: base * factor^(number of milestones <= epoch)
///   Cosine:    base * (1 + cos(pi * epoch / total)) / 2
double lr_at(const LrSchedule& schedule, int epoch, int total_epochs, double base_lr);

enum class Stage2Loss { CE, LAS, WeightedCE };

std::string to_string(Stage2Loss l);
Stage2Loss stage2_loss_from_string(const std::string& s);

struct TrainConfig {
  BackboneConfig backbone;  // input_dim is taken from the dataset
  double lr = 0.1;
  Index batch_size = 128;
  double weight_decay = 2e-4;
  double momentum = 0.9;

  int stage1_epochs = 200;
  LrSchedule stage1_schedule{ScheduleKind::Multistep, {160, 180}, 0.1};

  bool stage2_enabled = true;
  int stage2_epochs = 10;
  LrSchedule stage2_schedule{ScheduleKind::Cosine, {}, 0.1};
  /// Stage-2 base LR = lr * stage2_lr_factor.
  double stage2_lr_factor = 0.1;

  MixupConfig mixup{0.2, false, std::nullopt};  // `enabled` is unused; see toggles
  bool mixup_stage1 = false;
  bool mixup_stage2 = false;
  bool shift_bn = false;
  Stage2Loss stage2_loss = Stage2Loss::CE;
  HeadMode head_mode = HeadMode::Generalized;

  RelatedFn related_fn{};
  double eps1 = 0.4;
  double epsK = 0.1;
  double lr_ratio_dw = 0.2;
  double retention = 1.0;
  double effective_number_gamma = 0.999;
  /// L2 on dW in Stage-2 (s never decays).
  bool stage2_dw_weight_decay = true;
  /// Smooth each mixup endpoint before mixing when LAS and Stage-2 mixup are both on.
  bool compose_mixup_las = false;
  /// ShiftLearn passes run before Stage-2 classifier training (0 = concurrent only).
  long bn_warm_steps = 0;
  /// Class-balanced batches per Stage-2 epoch; 0 sizes epochs like Stage-1 (ceil(N / batch_size)).
  long stage2_batches_per_epoch = 0;

  int eval_bins = 15;
  /// Evaluate on the test set after every epoch.
  bool track_epochs = true;
  std::uint64_t seed = 0;

  /// Throws DomainError naming the offending field.
  void validate() const;
};

/// Backbone plus classifier head. After Stage-1 the head is W with s = 1,
/// dW = 0 and nothing learnable.
struct Model {
  Backbone backbone;
  GeneralizedHead head;
  int stage = 0;

  Model clone() const;
  Index num_classes() const { return head.num_classes(); }
  /// Eval-mode logits for a feature matrix.
  Matrix logits(const Matrix& x);
};

struct EvalMetrics {
  double accuracy = 0.0;  // percent
  double ece = 0.0;       // percent
  Direction direction = Direction::Mixed;
  SplitAccuracy splits;
};

EvalMetrics evaluate(Model& model, const LabeledSet& set, const std::vector<Split>& splits, int bins,
                     PredictionLog* log_out = nullptr);

struct EpochMetrics {
  int epoch = 0;  // 1-based within its stage
  int stage = 1;
  double lr = 0.0;
  double train_loss = 0.0;
  double test_acc = 0.0;
  double ece = 0.0;
};

struct RunResult {
  TrainConfig config;
  EvalMetrics stage1;
  EvalMetrics final_metrics;
  std::vector<EpochMetrics> curve;
  Model stage1_model;
  Model model;
};

/// Derives an independent 64-bit seed for a named stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Joint backbone + classifier training with CE on instance-balanced batches.
Model train_stage1(const TrainConfig& cfg, const LongTailedDataset& ds, std::vector<EpochMetrics>* curve = nullptr);

/// Classifier re-training on class-balanced batches with a frozen backbone.
/// The input snapshot is left untouched.
Model train_stage2(const TrainConfig& cfg, const Model& snapshot, const LongTailedDataset& ds,
                   std::vector<EpochMetrics>* curve = nullptr);

/// Stage-1, then Stage-2 when enabled, with final evaluation.
RunResult run_pipeline(const TrainConfig& cfg, const LongTailedDataset& ds);

/// Bytes of every parameter Stage-2 must not touch: backbone weights, biases
/// and BN affine parameters, plus the Stage-1 classifier W.
std::string frozen_parameter_bytes(const Model& model);

struct AblationCell {
  bool mixup = false;
  bool shift_bn = false;
  bool las = false;
  std::optional<RunResult> result;
  std::string error;
};

/// All 2^3 combinations of (MU, SL, LAS). Rows 0-3 follow the cumulative
/// order (none, MU, MU+SL, MU+SL+LAS); the remaining four follow. Every cell
/// shares the base seed; failures are recorded per cell.
std::vector<AblationCell> run_ablation_grid(const TrainConfig& base, const LongTailedDataset& ds, int workers = 1);

}  // namespace mislas
