#include "mislas/trainer.hpp"

#include <cmath>
#include <cstring>
#include <future>
#include <numbers>

#include "mislas/ops.hpp"
#include "mislas/optim.hpp"

namespace mislas {

std::string to_string(ScheduleKind k) { return k == ScheduleKind::Multistep ? "multistep" : "cosine"; }

ScheduleKind schedule_from_string(const std::string& s) {
  if (s == "multistep") return ScheduleKind::Multistep;
  if (s == "cosine") return ScheduleKind::Cosine;
  throw DomainError("unknown LR schedule '" + s + "'");
}

double lr_at(const LrSchedule& schedule, int epoch, int total_epochs, double base_lr) {
  if (total_epochs < 1) throw DomainError("total epochs must be >= 1");
  if (epoch < 0 || epoch >= total_epochs) throw DomainError("epoch out of range");
  if (schedule.kind == ScheduleKind::Multistep) {
    double lr = base_lr;
    for (int m : schedule.milestones) {
      if (epoch >= m) lr *= schedule.factor;
    }
    return lr;
  }
  const double t = static_cast<double>(epoch) / static_cast<double>(total_epochs);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

std::string to_string(Stage2Loss l) {
  switch (l) {
    case Stage2Loss::CE: return "ce";
    case Stage2Loss::LAS: return "las";
    case Stage2Loss::WeightedCE: return "weighted_ce";
  }
  return "?";
}

Stage2Loss stage2_loss_from_string(const std::string& s) {
  if (s == "ce") return Stage2Loss::CE;
  if (s == "las") return Stage2Loss::LAS;
  if (s == "weighted_ce") return Stage2Loss::WeightedCE;
  throw DomainError("unknown stage-2 loss '" + s + "'");
}

namespace {

void check_schedule(const LrSchedule& s, int epochs, const std::string& field) {
  if (s.kind != ScheduleKind::Multistep) return;
  for (std::size_t i = 0; i < s.milestones.size(); ++i) {
    if (s.milestones[i] < 1 || s.milestones[i] >= epochs) {
      throw DomainError(field + ".milestones: every milestone must lie in [1, epochs)");
    }
    if (i > 0 && s.milestones[i] <= s.milestones[i - 1]) {
      throw DomainError(field + ".milestones: must be strictly increasing");
    }
  }
  if (!(s.factor > 0.0)) throw DomainError(field + ".factor: must be positive");
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw DomainError("lr: must be positive");
  if (batch_size < 1) throw DomainError("batch_size: must be >= 1");
  if (backbone.batch_norm && batch_size < 2) throw DomainError("batch_size: batch norm needs at least 2");
  if (weight_decay < 0.0) throw DomainError("weight_decay: must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw DomainError("momentum: must lie in [0, 1)");
  if (stage1_epochs < 1) throw DomainError("stage1.epochs: must be >= 1");
  check_schedule(stage1_schedule, stage1_epochs, "stage1");
  if (stage2_enabled) {
    if (stage2_epochs < 1) throw DomainError("stage2.epochs: must be >= 1");
    check_schedule(stage2_schedule, stage2_epochs, "stage2");
    if (!(stage2_lr_factor > 0.0)) throw DomainError("stage2.lr_factor: must be positive");
  }
  if ((mixup_stage1 || mixup_stage2) && !(mixup.alpha > 0.0)) throw DomainError("mixup.alpha: must be positive");
  mixup.validate();
  if (!(0.0 <= epsK && epsK <= eps1 && eps1 <= 0.5)) {
    throw DomainError("las: smoothing factors must satisfy 0 <= epsK <= eps1 <= 0.5");
  }
  if (related_fn.kind == RelatedFnKind::Exponential && !(related_fn.p > 0.0)) {
    throw DomainError("las.p: must be positive");
  }
  if (!(lr_ratio_dw >= 0.0)) throw DomainError("head.lr_ratio_dw: must be non-negative");
  if (!(effective_number_gamma >= 0.0 && effective_number_gamma < 1.0)) {
    throw DomainError("effective_number_gamma: must lie in [0, 1)");
  }
  if (mixup_stage2 && stage2_loss == Stage2Loss::LAS && !compose_mixup_las) {
    throw DomainError("toggles.mixup_stage2: combining with LAS requires compose_mixup_las");
  }
  if (bn_warm_steps < 0) throw DomainError("bn_warm_steps: must be non-negative");
  if (stage2_batches_per_epoch < 0) throw DomainError("stage2.batches_per_epoch: must be non-negative");
  if (eval_bins < 1) throw DomainError("eval_bins: must be >= 1");
  backbone.validate();
}

Model Model::clone() const {
  Model m;
  m.backbone = backbone;
  for (auto& l : m.backbone.linears()) {
    l.weight = l.weight.clone();
    l.bias = l.bias.clone();
  }
  for (auto& n : m.backbone.norms()) {
    n.scale = n.scale.clone();
    n.shift = n.shift.clone();
  }
  m.head = head;
  m.head.weight = head.weight.clone();
  m.head.delta_weight = head.delta_weight.clone();
  m.head.scale = head.scale.clone();
  m.stage = stage;
  return m;
}

Matrix Model::logits(const Matrix& x) {
  Tensor feat = backbone.forward(Tensor::constant(x), BnMode::Eval);
  return head_forward(head, Tensor::constant(feat.value())).value();
}

EvalMetrics evaluate(Model& model, const LabeledSet& set, const std::vector<Split>& splits, int bins,
                     PredictionLog* log_out) {
  if (set.size() == 0) throw DomainError("evaluation set is empty");
  PredictionLog log = PredictionLog::from_probabilities(softmax_rows(model.logits(set.features)), set.labels);
  EvalMetrics m;
  const CalibrationReport rep = ece(log, bins);
  m.ece = rep.ece_percent;
  m.direction = rep.direction;
  m.splits = split_accuracy(log, splits);
  m.accuracy = m.splits.all;
  if (log_out) *log_out = std::move(log);
  return m;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 over the pair
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

enum Stream : std::uint64_t { kBackbone = 1, kClassifier, kSampler1, kMixup1, kSampler2, kMixup2, kWarm };

Index batches_per_epoch(const LongTailedDataset& ds, Index batch_size) {
  return (ds.train.size() + batch_size - 1) / batch_size;
}

void record_epoch(std::vector<EpochMetrics>* curve, const TrainConfig& cfg, Model& model,
                  const LongTailedDataset& ds, int stage, int epoch, double lr, double loss) {
  if (!curve) return;
  EpochMetrics e;
  e.epoch = epoch + 1;
  e.stage = stage;
  e.lr = lr;
  e.train_loss = loss;
  if (cfg.track_epochs && ds.test.size() > 0) {
    const EvalMetrics m = evaluate(model, ds.test, ds.splits, cfg.eval_bins);
    e.test_acc = m.accuracy;
    e.ece = m.ece;
  }
  curve->push_back(e);
}

GeneralizedHead frozen_head(Matrix w) {
  GeneralizedHead h = GeneralizedHead::from_weight(std::move(w), HeadMode::Generalized, 1.0, 1.0);
  h.delta_weight.set_requires_grad(false);
  h.scale.set_requires_grad(false);
  return h;
}

void append_bytes(std::string& out, const Matrix& m) {
  const auto* p = reinterpret_cast<const char*>(m.data());
  out.append(p, p + sizeof(double) * static_cast<std::size_t>(m.size()));
}

}  // namespace

Model train_stage1(const TrainConfig& cfg, const LongTailedDataset& ds, std::vector<EpochMetrics>* curve) {
  cfg.validate();
  if (ds.train.size() == 0) throw DomainError("training set is empty");

  BackboneConfig bcfg = cfg.backbone;
  bcfg.input_dim = ds.dim();
  bcfg.seed = derive_seed(cfg.seed, kBackbone);
  Model model;
  model.backbone = Backbone(bcfg);

  const Index feat = model.backbone.feature_dim();
  const int k = ds.num_classes();
  Rng init_rng(derive_seed(cfg.seed, kClassifier));
  const double bound = 1.0 / std::sqrt(static_cast<double>(feat));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix w0(feat, k);
  for (Index r = 0; r < feat; ++r)
    for (Index c = 0; c < k; ++c) w0(r, c) = u(init_rng);
  Tensor w = Tensor::parameter(std::move(w0));
  model.head = frozen_head(w.value());

  std::vector<Tensor> params = model.backbone.parameters();
  params.push_back(w);
  Sgd opt({ParamGroup{params, 1.0, cfg.weight_decay}}, cfg.momentum);

  Sampler sampler(SamplerKind::InstanceBalanced, ds, derive_seed(cfg.seed, kSampler1));
  Rng mix_rng(derive_seed(cfg.seed, kMixup1));
  const Index steps = batches_per_epoch(ds, cfg.batch_size);

  for (int epoch = 0; epoch < cfg.stage1_epochs; ++epoch) {
    const double lr = lr_at(cfg.stage1_schedule, epoch, cfg.stage1_epochs, cfg.lr);
    double total = 0.0;
    try {
      for (Index s = 0; s < steps; ++s) {
        Batch b = sampler.next_batch(cfg.batch_size);
        Matrix targets = one_hot(b.labels, k);
        Matrix x = std::move(b.features);
        if (cfg.mixup_stage1) {
          MixedBatch mixed = mixup_shuffled(x, targets, cfg.mixup, mix_rng);
          x = std::move(mixed.features);
          targets = std::move(mixed.targets);
        }
        Tensor logits = matmul(model.backbone.forward(Tensor::constant(std::move(x)), BnMode::Train), w);
        Tensor loss = soft_ce_loss(targets, logits);
        opt.zero_grad();
        backward(loss);
        opt.step(lr);
        total += loss.item();
      }
      if (!std::isfinite(total)) throw NumericError("non-finite training loss");
      model.head = frozen_head(w.value());
      record_epoch(curve, cfg, model, ds, 1, epoch, lr, total / static_cast<double>(steps));
    } catch (const NumericError& e) {
      throw DivergenceError(1, epoch + 1,
                            "stage 1 diverged at epoch " + std::to_string(epoch + 1) + ": " + e.what());
    }
  }
  model.head = frozen_head(w.value());
  model.stage = 1;
  return model;
}

Model train_stage2(const TrainConfig& cfg, const Model& snapshot, const LongTailedDataset& ds,
                   std::vector<EpochMetrics>* curve) {
  cfg.validate();
  if (snapshot.stage < 1) throw ContractError("stage 2 needs a stage-1 snapshot");
  if (snapshot.num_classes() != ds.num_classes()) throw DimensionError("snapshot and dataset class counts differ");

  Model model = snapshot.clone();
  model.backbone.set_trainable(false);
  const int k = ds.num_classes();
  GeneralizedHead head =
      GeneralizedHead::from_weight(snapshot.head.weight.value(), cfg.head_mode, cfg.retention, cfg.lr_ratio_dw);
  model.head = head;
  Sgd opt(head_param_groups(head, cfg.stage2_dw_weight_decay ? cfg.weight_decay : 0.0), cfg.momentum);

  const BnMode bn_mode = cfg.shift_bn ? BnMode::ShiftLearn : BnMode::Eval;
  if (cfg.shift_bn && cfg.bn_warm_steps > 0) {
    Sampler warm(SamplerKind::ClassBalanced, ds, derive_seed(cfg.seed, kWarm));
    bn_shift_stats(model.backbone, warm, cfg.batch_size, cfg.bn_warm_steps);
  }

  std::optional<SmoothingSchedule> schedule;
  std::optional<ClassWeights> weights;
  if (cfg.stage2_loss == Stage2Loss::LAS) {
    schedule = SmoothingSchedule::make(cfg.related_fn, cfg.eps1, cfg.epsK, ds.class_counts);
  } else if (cfg.stage2_loss == Stage2Loss::WeightedCE) {
    weights = ClassWeights::effective_number(ds.class_counts, cfg.effective_number_gamma);
  }
  auto targets_for = [&](const std::vector<int>& labels) -> Matrix {
    if (schedule) return las_targets(*schedule, labels);
    Matrix q = one_hot(labels, k);
    if (weights) {
      for (std::size_t i = 0; i < labels.size(); ++i) q(static_cast<Index>(i), labels[i]) = weights->w[labels[i]];
    }
    return q;
  };

  Sampler sampler(SamplerKind::ClassBalanced, ds, derive_seed(cfg.seed, kSampler2));
  Rng mix_rng(derive_seed(cfg.seed, kMixup2));
  const Index steps =
      cfg.stage2_batches_per_epoch > 0 ? cfg.stage2_batches_per_epoch : batches_per_epoch(ds, cfg.batch_size);
  const double base_lr = cfg.lr * cfg.stage2_lr_factor;

  for (int epoch = 0; epoch < cfg.stage2_epochs; ++epoch) {
    const double lr = lr_at(cfg.stage2_schedule, epoch, cfg.stage2_epochs, base_lr);
    double total = 0.0;
    try {
      for (Index s = 0; s < steps; ++s) {
        Batch b = sampler.next_batch(cfg.batch_size);
        Matrix targets = targets_for(b.labels);
        Matrix x = std::move(b.features);
        if (cfg.mixup_stage2) {
          MixedBatch mixed = mixup_shuffled(x, targets, cfg.mixup, mix_rng);
          x = std::move(mixed.features);
          targets = std::move(mixed.targets);
        }
        Tensor features = model.backbone.forward(Tensor::constant(std::move(x)), bn_mode);
        Tensor loss = soft_ce_loss(targets, head_forward(head, features));
        opt.zero_grad();
        backward(loss);
        opt.step(lr);
        total += loss.item();
      }
      if (!std::isfinite(total)) throw NumericError("non-finite training loss");
      record_epoch(curve, cfg, model, ds, 2, epoch, lr, total / static_cast<double>(steps));
    } catch (const NumericError& e) {
      throw DivergenceError(2, epoch + 1,
                            "stage 2 diverged at epoch " + std::to_string(epoch + 1) + ": " + e.what());
    }
  }
  model.stage = 2;
  return model;
}

RunResult run_pipeline(const TrainConfig& cfg, const LongTailedDataset& ds) {
  RunResult r;
  r.config = cfg;
  Model m1 = train_stage1(cfg, ds, &r.curve);
  r.stage1 = evaluate(m1, ds.test, ds.splits, cfg.eval_bins);
  if (cfg.stage2_enabled) {
    r.model = train_stage2(cfg, m1, ds, &r.curve);
    r.final_metrics = evaluate(r.model, ds.test, ds.splits, cfg.eval_bins);
  } else {
    r.model = m1.clone();
    r.final_metrics = r.stage1;
  }
  r.stage1_model = std::move(m1);
  return r;
}

std::string frozen_parameter_bytes(const Model& model) {
  std::string out;
  for (const auto& p : model.backbone.parameters()) append_bytes(out, p.value());
  append_bytes(out, model.head.weight.value());
  return out;
}

std::vector<AblationCell> run_ablation_grid(const TrainConfig& base, const LongTailedDataset& ds, int workers) {
  static constexpr bool kOrder[8][3] = {
      {false, false, false}, {true, false, false}, {true, true, false}, {true, true, true},
      {false, true, false},  {false, false, true}, {false, true, true}, {true, false, true},
  };
  std::vector<AblationCell> cells(8);
  for (int i = 0; i < 8; ++i) {
    cells[i].mixup = kOrder[i][0];
    cells[i].shift_bn = kOrder[i][1];
    cells[i].las = kOrder[i][2];
  }

  auto cell_config = [&](const AblationCell& c) {
    TrainConfig cfg = base;
    cfg.stage2_enabled = true;
    cfg.mixup_stage1 = c.mixup;
    cfg.mixup_stage2 = false;
    cfg.shift_bn = c.shift_bn;
    cfg.stage2_loss = c.las ? Stage2Loss::LAS : Stage2Loss::CE;
    return cfg;
  };

  // Stage-1 depends only on the MU toggle; share it across the four cells.
  struct Stage1 {
    std::optional<Model> model;
    EvalMetrics metrics;
    std::vector<EpochMetrics> curve;
    std::string error;
  };
  Stage1 stage1[2];
  for (int mu = 0; mu < 2; ++mu) {
    AblationCell probe;
    probe.mixup = mu == 1;
    const TrainConfig cfg = cell_config(probe);
    try {
      stage1[mu].model = train_stage1(cfg, ds, &stage1[mu].curve);
      stage1[mu].metrics = evaluate(*stage1[mu].model, ds.test, ds.splits, cfg.eval_bins);
    } catch (const std::exception& e) {
      stage1[mu].error = e.what();
    }
  }

  auto run_cell = [&](AblationCell& c) {
    const Stage1& s1 = stage1[c.mixup ? 1 : 0];
    if (!s1.model) {
      c.error = s1.error;
      return;
    }
    try {
      RunResult r;
      r.config = cell_config(c);
      r.stage1 = s1.metrics;
      r.curve = s1.curve;
      r.stage1_model = s1.model->clone();
      r.model = train_stage2(r.config, *s1.model, ds, &r.curve);
      r.final_metrics = evaluate(r.model, ds.test, ds.splits, r.config.eval_bins);
      c.result = std::move(r);
    } catch (const std::exception& e) {
      c.error = e.what();
    }
  };

  if (workers <= 1) {
    for (auto& c : cells) run_cell(c);
  } else {
    std::size_t next = 0;
    while (next < cells.size()) {
      std::vector<std::future<void>> batch;
      for (int w = 0; w < workers && next < cells.size(); ++w, ++next) {
        batch.push_back(std::async(std::launch::async, run_cell, std::ref(cells[next])));
      }
      for (auto& f : batch) f.get();
    }
  }
  return cells;
}

}  // namespace mislas
