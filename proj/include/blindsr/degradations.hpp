#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "blindsr/image.hpp"
#include "blindsr/seed.hpp"

namespace blindsr {

enum class ResizeMethod { Nearest, Bilinear, Bicubic };
// Whether a resize scale is relative to the image as it arrives at the step
// or to the HR image the recipe started from.
enum class ResizeReference { Current, Original };

struct Blur {
  Index kernel_size = 21;
  double sigma_x = 1.0;
  double sigma_y = 1.0;
  double theta = 0.0;
  bool operator==(const Blur&) const = default;
};

struct Resize {
  double scale = 1.0;
  ResizeMethod method = ResizeMethod::Bicubic;
  ResizeReference reference = ResizeReference::Current;
  bool operator==(const Resize&) const = default;
};

struct GaussianNoise {
  double sigma = 0.0;  // on the [0, 1] intensity scale
  bool operator==(const GaussianNoise&) const = default;
};

struct JpegProxy {
  int quality = 75;
  bool operator==(const JpegProxy&) const = default;
};

using DegradationStep = std::variant<Blur, Resize, GaussianNoise, JpegProxy>;

// Throws ConfigError when a step violates its invariants.
void validate(const DegradationStep& step);

struct DegradationRecipe {
  std::vector<DegradationStep> steps;
  std::uint64_t seed = 0;
  int target_scale = 2;
  bool operator==(const DegradationRecipe&) const = default;
};

struct Range {
  double min = 0.0;
  double max = 0.0;
  bool operator==(const Range&) const = default;
};

/// Sampling ranges for the two-round blur -> resize -> noise -> jpeg pipeline.
/// The defaults are toolkit choices, not published values.
struct DegradationRanges {
  Index kernel_size = 21;
  Range blur_sigma{0.2, 3.0};
  Range blur_theta{0.0, 3.141592653589793};
  Range resize_scale{0.5, 1.2};
  std::vector<ResizeMethod> resize_methods{ResizeMethod::Bilinear, ResizeMethod::Bicubic};
  Range noise_sigma{1.0 / 255.0, 30.0 / 255.0};
  Range jpeg_quality{30.0, 95.0};
  int rounds = 2;
  int target_scale = 2;
  bool operator==(const DegradationRanges&) const = default;
};

void validate(const DegradationRanges& ranges);

/// Rotated anisotropic Gaussian sampled at integer offsets, normalized to sum 1.
Eigen::MatrixXd gaussian_kernel(Index size, double sigma_x, double sigma_y, double theta);

// Quantization table for the given quality (standard luminance table, IJG scaling).
std::array<int, 64> jpeg_quant_table(int quality);

// Extents of the recipe's source image, used by Original-referenced resizes.
struct StepContext {
  Index original_height = 0;
  Index original_width = 0;
};

Image apply_step(const Image& image, const DegradationStep& step, Rng& rng, StepContext context = {});

// Separable resampling to an explicit output size.
Image resize_to(const Image& image, Index out_height, Index out_width, ResizeMethod method);

DegradationRecipe sample_second_order_recipe(const DegradationRanges& ranges, std::uint64_t seed);

Image degrade(const Image& image, const DegradationRecipe& recipe);

struct PairedSample {
  Image lr1;
  Image lr2;
  DegradationRecipe recipe1;
  DegradationRecipe recipe2;
};

inline constexpr std::uint64_t kPairSeedSalt = 0x5bd1e9955bd1e995ULL;

PairedSample generate_paired_sample(const Image& hr, const DegradationRanges& ranges, std::uint64_t seed);

/// The eight evaluation conditions: clean, single and combined degradations.
enum class DegradationFamily { Clean, Blur, Noise, Jpeg, BlurNoise, BlurJpeg, NoiseJpeg, BlurNoiseJpeg };

inline constexpr std::array<DegradationFamily, 8> kAllFamilies = {
    DegradationFamily::Clean,     DegradationFamily::Blur,     DegradationFamily::Noise,
    DegradationFamily::Jpeg,      DegradationFamily::BlurNoise, DegradationFamily::BlurJpeg,
    DegradationFamily::NoiseJpeg, DegradationFamily::BlurNoiseJpeg};

std::string_view family_name(DegradationFamily family);
std::optional<DegradationFamily> family_from_name(std::string_view name);

// Fixed-parameter recipe for an evaluation condition: Gaussian blur sigma 2,
// bicubic downsampling, noise 20/255, JPEG quality 50, applied in that order.
DegradationRecipe family_recipe(DegradationFamily family, int target_scale, std::uint64_t seed);

std::string_view method_name(ResizeMethod method);
ResizeMethod method_from_name(std::string_view name);

void to_json(nlohmann::json& j, const DegradationStep& step);
void from_json(const nlohmann::json& j, DegradationStep& step);
void to_json(nlohmann::json& j, const DegradationRecipe& recipe);
void from_json(const nlohmann::json& j, DegradationRecipe& recipe);
void to_json(nlohmann::json& j, const DegradationRanges& ranges);
void from_json(const nlohmann::json& j, DegradationRanges& ranges);

}  // namespace blindsr
