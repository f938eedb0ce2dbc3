#include "blindsr/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "blindsr/alignment.hpp"
#include "blindsr/degradations.hpp"
#include "blindsr/errors.hpp"
#include "blindsr/interaction.hpp"
#include "blindsr/ops.hpp"
#include "blindsr/parallel.hpp"
#include "blindsr/seed.hpp"
#include "blindsr/synthetic.hpp"

namespace blindsr {

namespace fs = std::filesystem;

namespace {

std::string describe(const LossBreakdown& loss) {
  std::ostringstream out;
  out << "l1=" << loss.l1 << " regularizer=" << loss.regularizer << " total=" << loss.total;
  return out.str();
}

Image match_channels(Image image, Index channels, const fs::path& path) {
  if (image.channels == channels) return image;
  if (image.channels == 1) {
    Image out(image.height, image.width, channels);
    for (Index c = 0; c < channels; ++c) out.set_plane(c, image.plane(0));
    return out;
  }
  if (channels == 1) {
    Image out(image.height, image.width, 1);
    out.set_plane(0, image.luminance());
    return out;
  }
  throw ConfigError(path.string() + ": cannot map " + std::to_string(image.channels) + " channels to " +
                    std::to_string(channels));
}

}  // namespace

TrainingDivergedError::TrainingDivergedError(std::int64_t step, LossBreakdown loss)
    : std::runtime_error("training diverged at step " + std::to_string(step) + ": " + describe(loss)),
      step_(step),
      loss_(loss) {}

std::vector<Image> load_training_images(const TrainConfig& config) {
  const Index need = config.patch_size * config.model.scale;
  if (config.data.source == "synthetic") {
    return synthetic_dataset(config.data.num_images, config.data.image_size, config.seeds.data_seed(),
                             config.data.workers);
  }
  const fs::path dir(config.data.directory);
  if (!fs::is_directory(dir)) throw IoError("training image directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (entry.is_regular_file() && ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no PNG images in " + dir.string());
  std::vector<Image> images(files.size());
  parallel_for(files.size(), config.data.workers, [&](std::size_t k) {
    Image image = match_channels(read_png(files[k]), config.model.image_channels, files[k]);
    if (image.height < need || image.width < need) {
      throw ConfigError(files[k].string() + " is smaller than one " + std::to_string(need) + "px HR patch");
    }
    images[k] = std::move(image);
  });
  return images;
}

std::vector<TrainingSample> sample_batch(const std::vector<Image>& images, const TrainConfig& config,
                                         std::int64_t step) {
  if (images.empty()) throw ContractError("sample_batch: no training images");
  const bool paired =
      config.regularizer.kind == RegularizerKind::Align || config.regularizer.kind == RegularizerKind::BruteForce;
  const Index hr_size = config.patch_size * config.model.scale;
  std::vector<TrainingSample> batch(static_cast<std::size_t>(config.batch_size));
  parallel_for(batch.size(), config.data.workers, [&](std::size_t b) {
    Rng rng(derive_seed(config.seeds.data_seed(), static_cast<std::uint64_t>(step), b));
    const Image& source = images[std::uniform_int_distribution<std::size_t>(0, images.size() - 1)(rng)];
    if (source.height < hr_size || source.width < hr_size) {
      throw ContractError("sample_batch: image smaller than the HR patch");
    }
    const Index y0 = std::uniform_int_distribution<Index>(0, source.height - hr_size)(rng);
    const Index x0 = std::uniform_int_distribution<Index>(0, source.width - hr_size)(rng);
    const Image hr = source.crop(y0, x0, hr_size, hr_size);
    const std::uint64_t pair_seed = rng();
    TrainingSample& s = batch[b];
    s.hr = to_tensor(hr);
    if (paired) {
      PairedSample pair = generate_paired_sample(hr, config.degradation, pair_seed);
      s.lr1 = to_tensor(pair.lr1);
      s.lr2 = to_tensor(pair.lr2);
    } else {
      s.lr1 = to_tensor(degrade(hr, sample_second_order_recipe(config.degradation, pair_seed)));
    }
  });
  return batch;
}

SampleLoss build_sample_loss(Tape& tape, ToyModel& model, const TrainingSample& sample, const TrainConfig& config,
                             Rng& dropout_rng) {
  SampleLoss loss;
  const RegularizerConfig& reg = config.regularizer;
  switch (reg.kind) {
    case RegularizerKind::None: {
      loss.l1 = l1_loss(model.forward(tape, sample.lr1).output, sample.hr);
      loss.total = loss.l1;
      return loss;
    }
    case RegularizerKind::Dropout: {
      auto hook = [&](Var x) { return channel_dropout(x, reg.keep_prob, dropout_rng); };
      loss.l1 = l1_loss(model.forward(tape, sample.lr1, hook).output, sample.hr);
      loss.total = loss.l1;
      return loss;
    }
    case RegularizerKind::Align:
    case RegularizerKind::BruteForce: {
      if (sample.lr2.size() == 0) throw ContractError("paired regularizer needs a second view");
      ToyModel::Outputs first = model.forward(tape, sample.lr1);
      ToyModel::Outputs second = model.forward(tape, sample.lr2);
      loss.l1 = l1_loss(first.output, sample.hr);
      if (config.supervise == Supervision::Both) loss.l1 = add(loss.l1, l1_loss(second.output, sample.hr));
      if (reg.kind == RegularizerKind::Align) {
        loss.regularizer =
            alignment_loss(feature_matrix(first.tap), feature_matrix(second.tap), config.alignment());
      } else {
        loss.regularizer = scale(sum_squares(sub(first.tap, second.tap)), reg.brute_force_weight);
      }
      loss.total = add(loss.l1, loss.regularizer);
      return loss;
    }
  }
  throw ConfigError("unknown regularizer kind");
}

OptimizerState make_optimizer_state(const ToyModel& model) {
  std::vector<const Tensor*> params;
  for (const NamedTensor& p : model.parameters()) params.push_back(&p.tensor);
  return {0, make_moments(params)};
}

StepResult training_step(ToyModel& model, const std::vector<TrainingSample>& batch, const TrainConfig& config,
                         OptimizerState& state) {
  if (batch.empty()) throw ContractError("training_step: empty batch");
  std::vector<NamedTensor>& params = model.parameters();
  if (state.moments.size() != params.size()) throw ContractError("training_step: optimizer state does not match");

  std::vector<Eigen::VectorXd> grads;
  for (const NamedTensor& p : params) grads.push_back(Eigen::VectorXd::Zero(p.tensor.size()));
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  LossBreakdown mean;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    Rng dropout_rng(derive_seed(config.seeds.dropout_seed(), static_cast<std::uint64_t>(state.step), b));
    Tape tape;
    SampleLoss loss = build_sample_loss(tape, model, batch[b], config, dropout_rng);
    mean.l1 += loss.l1.value().item() * inv_b;
    if (loss.regularizer.valid()) mean.regularizer += loss.regularizer.value().item() * inv_b;
    mean.total += loss.total.value().item() * inv_b;
    if (!std::isfinite(mean.total)) break;
    tape.backward(loss.total);
    for (std::size_t k = 0; k < params.size(); ++k) {
      const auto& g = params[k].tensor.grad();
      if (g) grads[k] += *g * inv_b;
      params[k].tensor.clear_grad();
    }
  }
  if (!std::isfinite(mean.l1) || !std::isfinite(mean.regularizer) || !std::isfinite(mean.total)) {
    throw TrainingDivergedError(state.step, mean);
  }

  StepResult result{mean, cosine_lr(state.step, config.period(), config.base_lr, config.min_lr)};
  std::vector<Tensor*> targets;
  std::vector<const Eigen::VectorXd*> grad_ptrs;
  for (std::size_t k = 0; k < params.size(); ++k) {
    targets.push_back(&params[k].tensor);
    grad_ptrs.push_back(params[k].tensor.requires_grad() ? &grads[k] : nullptr);
  }
  adam_update(targets, grad_ptrs, state.moments, state.step + 1, result.lr, config.adam);
  ++state.step;
  return result;
}

Checkpoint make_checkpoint(const TrainConfig& config, const ToyModel& model, const OptimizerState& state) {
  Checkpoint ck;
  ck.config_json = serialize_config(config);
  ck.step = state.step;
  const auto& params = model.parameters();
  for (const NamedTensor& p : params) ck.tensors.push_back({p.name, Tensor(p.tensor.shape(), p.tensor.data())});
  for (std::size_t k = 0; k < params.size() && k < state.moments.size(); ++k) {
    ck.tensors.push_back({"adam.m/" + params[k].name, Tensor(params[k].tensor.shape(), state.moments[k].first)});
    ck.tensors.push_back({"adam.v/" + params[k].name, Tensor(params[k].tensor.shape(), state.moments[k].second)});
  }
  ck.seeds = {{"data", config.seeds.data_seed()},
              {"init", config.seeds.init_seed()},
              {"dropout", config.seeds.dropout_seed()},
              {"rff", config.seeds.rff_seed()}};
  return ck;
}

TrainConfig config_from_checkpoint(const Checkpoint& checkpoint) {
  return parse_config(checkpoint.config_json).config;
}

ToyModel model_from_checkpoint(const Checkpoint& checkpoint, OptimizerState* state) {
  const TrainConfig config = config_from_checkpoint(checkpoint);
  ToyModel model(config.model, config.seeds.init_seed());
  OptimizerState restored = make_optimizer_state(model);
  restored.step = checkpoint.step;
  auto load = [&checkpoint](const std::string& name, const Shape& shape) -> const Eigen::VectorXd& {
    const Tensor* t = checkpoint.find(name);
    if (!t) throw IoError("checkpoint is missing tensor " + name);
    if (t->shape() != shape) {
      throw IoError("checkpoint tensor " + name + " has shape " + shape_string(t->shape()) + ", expected " +
                    shape_string(shape));
    }
    return t->data();
  };
  auto& params = model.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Shape& shape = params[k].tensor.shape();
    params[k].tensor.data() = load(params[k].name, shape);
    if (state) {
      restored.moments[k].first = load("adam.m/" + params[k].name, shape);
      restored.moments[k].second = load("adam.v/" + params[k].name, shape);
    }
  }
  if (state) *state = std::move(restored);
  return model;
}

std::string format_metric_row(const MetricRow& row) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g,%.17g", static_cast<long long>(row.step), row.lr,
                row.loss.l1, row.loss.regularizer, row.loss.total);
  return buf;
}

namespace {

// Keeps the header and the rows up to `step` of an existing metrics file.
std::string truncated_metrics(const fs::path& path, std::int64_t step) {
  std::string kept = std::string(kMetricsHeader) + "\n";
  std::ifstream in(path);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    if (std::stoll(line.substr(0, line.find(','))) <= step) kept += line + "\n";
  }
  return kept;
}

std::string checkpoint_name(std::int64_t step) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "checkpoint_%06lld.bin", static_cast<long long>(step));
  return buf;
}

}  // namespace

TrainingResult run_training(const TrainConfig& config, const TrainingOptions& options) {
  validate(config);
  const std::vector<Image> images = load_training_images(config);
  ToyModel model(config.model, config.seeds.init_seed());
  OptimizerState state = make_optimizer_state(model);

  fs::create_directories(options.out_dir);
  const fs::path metrics_path = options.out_dir / "metrics.csv";
  const fs::path timing_path = options.out_dir / "timing.csv";
  std::string metrics_prefix = std::string(kMetricsHeader) + "\n";
  if (options.resume) {
    const Checkpoint ck = load_checkpoint(*options.resume);
    if (ck.config_json != serialize_config(config)) {
      throw ConfigError("checkpoint " + options.resume->string() + " was written with a different configuration");
    }
    model = model_from_checkpoint(ck, &state);
    if (fs::exists(metrics_path)) metrics_prefix = truncated_metrics(metrics_path, state.step);
  }
  {
    std::ofstream cfg(options.out_dir / "config.json");
    cfg << serialize_config(config);
  }
  std::ofstream metrics(metrics_path, std::ios::trunc);
  std::ofstream timing(timing_path, options.resume ? std::ios::app : std::ios::trunc);
  if (!metrics || !timing) throw IoError("cannot write logs in " + options.out_dir.string());
  metrics << metrics_prefix << std::flush;
  if (!options.resume) timing << "step,wall_seconds\n";

  TrainingResult result{std::move(model), {}, {}};
  ToyModel& m = result.model;
  const auto start = std::chrono::steady_clock::now();
  const std::int64_t stop = options.stop_after >= 0 ? std::min(options.stop_after, config.steps) : config.steps;
  while (state.step < stop) {
    const std::vector<TrainingSample> batch = sample_batch(images, config, state.step);
    const StepResult step = training_step(m, batch, config, state);
    MetricRow row{state.step, step.lr, step.loss};
    metrics << format_metric_row(row) << '\n' << std::flush;
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    timing << state.step << ',' << wall << '\n';
    result.rows.push_back(row);
    if (options.on_step) options.on_step(row);
    if (config.checkpoint_every > 0 && state.step % config.checkpoint_every == 0) {
      save_checkpoint(options.out_dir / checkpoint_name(state.step), make_checkpoint(config, m, state));
    }
  }
  save_checkpoint(options.out_dir / (state.step == config.steps ? "final.bin" : "last.bin"),
                  make_checkpoint(config, m, state));
  result.state = std::move(state);
  return result;
}

}  // namespace blindsr
