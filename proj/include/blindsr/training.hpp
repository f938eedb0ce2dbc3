#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "blindsr/checkpoint.hpp"
#include "blindsr/config.hpp"
#include "blindsr/image.hpp"
#include "blindsr/model.hpp"
#include "blindsr/optim.hpp"

namespace blindsr {

// [C x H x W] tensors. lr2 is empty for single-view regularizers.
struct TrainingSample {
  Tensor hr;
  Tensor lr1;
  Tensor lr2;
};

struct LossBreakdown {
  double l1 = 0.0;           // reconstruction terms, batch mean
  double regularizer = 0.0;  // weighted alignment / equality term, batch mean
  double total = 0.0;
};

class TrainingDivergedError : public std::runtime_error {
 public:
  TrainingDivergedError(std::int64_t step, LossBreakdown loss);
  std::int64_t step() const { return step_; }
  const LossBreakdown& loss() const { return loss_; }

 private:
  std::int64_t step_;
  LossBreakdown loss_;
};

// HR training images for the configured source. Directory images smaller than
// one HR patch are rejected; grayscale files are replicated to the model's channels.
std::vector<Image> load_training_images(const TrainConfig& config);

// Batch for update `step`: item b draws its image, crop and degradation seed
// from derive_seed(data_seed, step, b), so batches are reproducible in isolation.
std::vector<TrainingSample> sample_batch(const std::vector<Image>& images, const TrainConfig& config,
                                         std::int64_t step);

// Loss graph for one sample. Dropout masks come from `dropout_rng`.
struct SampleLoss {
  Var l1;
  Var regularizer;  // invalid when the regularizer adds no term
  Var total;
};
SampleLoss build_sample_loss(Tape& tape, ToyModel& model, const TrainingSample& sample, const TrainConfig& config,
                             Rng& dropout_rng);

struct OptimizerState {
  std::int64_t step = 0;  // completed updates
  std::vector<AdamMoments> moments;
};
OptimizerState make_optimizer_state(const ToyModel& model);

struct StepResult {
  LossBreakdown loss;
  double lr = 0.0;
};

// One Adam update on the batch mean loss. Throws TrainingDivergedError, leaving
// parameters untouched, when any loss term is not finite.
StepResult training_step(ToyModel& model, const std::vector<TrainingSample>& batch, const TrainConfig& config,
                         OptimizerState& state);

Checkpoint make_checkpoint(const TrainConfig& config, const ToyModel& model, const OptimizerState& state);
// Rebuilds the model (and optimizer state) stored in a checkpoint.
ToyModel model_from_checkpoint(const Checkpoint& checkpoint, OptimizerState* state = nullptr);
TrainConfig config_from_checkpoint(const Checkpoint& checkpoint);

struct MetricRow {
  std::int64_t step = 0;  // updates completed after this row
  double lr = 0.0;
  LossBreakdown loss;
};

struct TrainingOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume;
  std::int64_t stop_after = -1;  // stop early after this many completed updates (-1: run to the end)
  std::function<void(const MetricRow&)> on_step;
};

struct TrainingResult {
  ToyModel model;
  OptimizerState state;
  std::vector<MetricRow> rows;  // rows produced by this invocation
};

/// Full run: writes metrics.csv (deterministic), timing.csv (wall clock),
/// config.json, checkpoint_<step>.bin every checkpoint_every updates and
/// final.bin. With options.resume the run continues from that checkpoint,
/// whose configuration must match.
TrainingResult run_training(const TrainConfig& config, const TrainingOptions& options);

std::string format_metric_row(const MetricRow& row);
inline constexpr const char* kMetricsHeader = "step,lr,l1,regularizer,total";

}  // namespace blindsr
