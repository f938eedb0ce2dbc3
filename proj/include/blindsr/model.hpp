#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "blindsr/image.hpp"
#include "blindsr/tensor.hpp"

namespace blindsr {

struct ModelConfig {
  Index image_channels = 3;
  Index features = 16;   // channel width F
  Index blocks = 3;      // residual blocks B
  int scale = 2;         // 1, 2 or 4; one nearest-upsample + conv stage per doubling
  Index kernel_size = 3;
  double slope = 0.2;    // leaky-ReLU negative slope
  bool image_skip = true;  // add the nearest-upsampled input to the output
  bool bias = true;
  bool operator==(const ModelConfig&) const = default;
};

void validate(const ModelConfig& config);

// Named network locations where features can be read out.
enum class TapPoint { HeadOutput, BodyOutput, TailInput };

std::string_view tap_name(TapPoint tap);
std::optional<TapPoint> tap_from_name(std::string_view name);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Miniature SRResNet-style network:
///   head conv -> lrelu -> B x (conv -> lrelu -> conv, + skip)
///   -> per doubling (nearest x2 -> conv -> lrelu) -> tail conv [+ upsampled input].
/// The regularization tap is the tail convolution's input.
class ToyModel {
 public:
  ToyModel(const ModelConfig& config, std::uint64_t init_seed);

  struct Outputs {
    Var output;
    Var tap;  // tail input, before any hook
    Var head;
    Var body;
  };
  // Optional transform applied at the tap before the tail convolution (dropout).
  using TapHook = std::function<Var(Var)>;

  // With differentiable = false the parameters enter the tape as constants.
  Outputs forward(Tape& tape, const Tensor& lr, const TapHook& hook = {}, bool differentiable = true);

  Image restore(const Image& lr);
  Tensor tap_features(const Image& lr, TapPoint tap);
  std::pair<Image, Tensor> restore_with_tap(const Image& lr, TapPoint tap);

  const ModelConfig& config() const { return config_; }
  std::vector<NamedTensor>& parameters() { return params_; }
  const std::vector<NamedTensor>& parameters() const { return params_; }
  Tensor* find(std::string_view name);

 private:
  struct Conv {
    std::size_t weight;
    std::size_t bias;
  };
  Conv add_conv(const std::string& name, Index in, Index out, double std_scale, std::uint64_t seed);
  Var apply(Tape& tape, Var x, const Conv& conv, bool differentiable);

  ModelConfig config_;
  std::vector<NamedTensor> params_;
  Conv head_;
  std::vector<std::pair<Conv, Conv>> blocks_;
  std::vector<Conv> upsamplers_;
  Conv tail_;
};

}  // namespace blindsr
