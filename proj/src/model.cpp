#include "blindsr/model.hpp"

#include <cmath>
#include <random>

#include "blindsr/errors.hpp"
#include "blindsr/ops.hpp"
#include "blindsr/seed.hpp"

namespace blindsr {

void validate(const ModelConfig& config) {
  if (config.image_channels != 1 && config.image_channels != 3) throw ConfigError("image_channels must be 1 or 3");
  if (config.features < 1) throw ConfigError("features must be >= 1");
  if (config.blocks < 0) throw ConfigError("blocks must be >= 0");
  if (config.scale != 1 && config.scale != 2 && config.scale != 4) throw ConfigError("scale must be 1, 2 or 4");
  if (config.kernel_size < 1 || config.kernel_size % 2 == 0) throw ConfigError("kernel_size must be odd");
  if (!(config.slope >= 0.0 && config.slope < 1.0)) throw ConfigError("slope must lie in [0, 1)");
}

std::string_view tap_name(TapPoint tap) {
  switch (tap) {
    case TapPoint::HeadOutput: return "head_output";
    case TapPoint::BodyOutput: return "body_output";
    case TapPoint::TailInput: return "tail_input";
  }
  return "unknown";
}

std::optional<TapPoint> tap_from_name(std::string_view name) {
  for (TapPoint t : {TapPoint::HeadOutput, TapPoint::BodyOutput, TapPoint::TailInput})
    if (tap_name(t) == name) return t;
  return std::nullopt;
}

ToyModel::ToyModel(const ModelConfig& config, std::uint64_t init_seed) : config_(config) {
  validate(config);
  const Index f = config.features, c = config.image_channels;
  std::uint64_t layer = 0;
  head_ = add_conv("head", c, f, 1.0, derive_seed(init_seed, layer++));
  for (Index b = 0; b < config.blocks; ++b) {
    const std::string name = "block" + std::to_string(b);
    Conv first = add_conv(name + ".conv1", f, f, 1.0, derive_seed(init_seed, layer++));
    // Residual branches start close to identity.
    Conv second = add_conv(name + ".conv2", f, f, 0.1, derive_seed(init_seed, layer++));
    blocks_.emplace_back(first, second);
  }
  for (int s = config.scale, k = 0; s > 1; s /= 2, ++k) {
    upsamplers_.push_back(add_conv("up" + std::to_string(k), f, f, 1.0, derive_seed(init_seed, layer++)));
  }
  tail_ = add_conv("tail", f, c, 0.5, derive_seed(init_seed, layer++));
}

ToyModel::Conv ToyModel::add_conv(const std::string& name, Index in, Index out, double std_scale,
                                  std::uint64_t seed) {
  const Index k = config_.kernel_size;
  Tensor w({out, in, k, k});
  Rng rng(seed);
  // He initialization for leaky-ReLU.
  const double gain = std::sqrt(2.0 / (1.0 + config_.slope * config_.slope));
  std::normal_distribution<double> dist(0.0, std_scale * gain / std::sqrt(static_cast<double>(in * k * k)));
  for (Index i = 0; i < w.size(); ++i) w[i] = dist(rng);
  w.set_requires_grad(true);
  Tensor b({out}, 0.0);
  b.set_requires_grad(config_.bias);
  params_.push_back({name + ".weight", std::move(w)});
  params_.push_back({name + ".bias", std::move(b)});
  return {params_.size() - 2, params_.size() - 1};
}

Tensor* ToyModel::find(std::string_view name) {
  for (NamedTensor& p : params_)
    if (p.name == name) return &p.tensor;
  return nullptr;
}

Var ToyModel::apply(Tape& tape, Var x, const Conv& conv, bool differentiable) {
  Tensor& w = params_[conv.weight].tensor;
  Tensor& b = params_[conv.bias].tensor;
  Var wv = differentiable ? tape.parameter(w) : tape.constant(w);
  Var bv = differentiable && config_.bias ? tape.parameter(b) : tape.constant(b);
  return conv2d(x, wv, bv, config_.kernel_size / 2);
}

ToyModel::Outputs ToyModel::forward(Tape& tape, const Tensor& lr, const TapHook& hook, bool differentiable) {
  if (lr.dim() != 3 || lr.extent(0) != config_.image_channels) {
    throw DimensionError("model input must be [" + std::to_string(config_.image_channels) + " x H x W], got " +
                         shape_string(lr.shape()));
  }
  Outputs out;
  Var input = tape.constant(lr);
  out.head = leaky_relu(apply(tape, input, head_, differentiable), config_.slope);
  Var x = out.head;
  for (const auto& [first, second] : blocks_) {
    Var branch = leaky_relu(apply(tape, x, first, differentiable), config_.slope);
    x = add(x, apply(tape, branch, second, differentiable));
  }
  out.body = x;
  for (const Conv& up : upsamplers_) {
    x = leaky_relu(apply(tape, upsample_nearest(x, 2), up, differentiable), config_.slope);
  }
  out.tap = x;
  Var tail_in = hook ? hook(x) : x;
  out.output = apply(tape, tail_in, tail_, differentiable);
  if (config_.image_skip) out.output = add(out.output, upsample_nearest(input, config_.scale));
  return out;
}

namespace {

const Tensor& select(const ToyModel::Outputs& out, TapPoint tap) {
  switch (tap) {
    case TapPoint::HeadOutput: return out.head.value();
    case TapPoint::BodyOutput: return out.body.value();
    case TapPoint::TailInput: return out.tap.value();
  }
  throw ConfigError("unknown tap point");
}

}  // namespace

Image ToyModel::restore(const Image& lr) { return restore_with_tap(lr, TapPoint::TailInput).first; }

Tensor ToyModel::tap_features(const Image& lr, TapPoint tap) {
  Tape tape;
  return select(forward(tape, to_tensor(lr), {}, false), tap);
}

std::pair<Image, Tensor> ToyModel::restore_with_tap(const Image& lr, TapPoint tap) {
  Tape tape;
  Outputs out = forward(tape, to_tensor(lr), {}, false);
  Image image = from_tensor(out.output.value());
  image.clamp();
  return {std::move(image), select(out, tap)};
}

}  // namespace blindsr
