#include "blindsr/degradations.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "blindsr/errors.hpp"

namespace blindsr {

namespace {

constexpr std::array<int, 64> kLuminanceTable = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

double cubic_weight(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

double linear_weight(double x) {
  x = std::abs(x);
  return x < 1.0 ? 1.0 - x : 0.0;
}

struct Contribution {
  Index first = 0;
  std::vector<double> weights;
};

// Per-output-sample taps along one axis. Downsampling widens the kernel by the
// inverse scale (antialiasing); borders replicate the edge sample.
std::vector<Contribution> axis_contributions(Index in, Index out, ResizeMethod method) {
  std::vector<Contribution> result(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(out) / static_cast<double>(in);
  for (Index o = 0; o < out; ++o) {
    Contribution& c = result[o];
    if (method == ResizeMethod::Nearest) {
      c.first = std::min<Index>(in - 1, static_cast<Index>(std::floor((o + 0.5) / scale)));
      c.weights = {1.0};
      continue;
    }
    const double support = method == ResizeMethod::Bicubic ? 2.0 : 1.0;
    const double stretch = scale < 1.0 ? 1.0 / scale : 1.0;
    const double center = (o + 0.5) / scale - 0.5;
    const Index lo = static_cast<Index>(std::floor(center - support * stretch)) + 1;
    const Index hi = static_cast<Index>(std::ceil(center + support * stretch)) - 1;
    c.first = lo;
    double total = 0.0;
    for (Index i = lo; i <= hi; ++i) {
      const double d = (i - center) / stretch;
      const double w = method == ResizeMethod::Bicubic ? cubic_weight(d) : linear_weight(d);
      c.weights.push_back(w);
      total += w;
    }
    for (double& w : c.weights) w /= total;
  }
  return result;
}

Image blur_image(const Image& image, const Blur& blur) {
  const Eigen::MatrixXd k = gaussian_kernel(blur.kernel_size, blur.sigma_x, blur.sigma_y, blur.theta);
  const Index r = blur.kernel_size / 2;
  Image out(image.height, image.width, image.channels);
  Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(image.height + 2 * r, image.width + 2 * r);
  for (Index c = 0; c < image.channels; ++c) {
    padded.block(r, r, image.height, image.width) = image.plane(c);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(image.height, image.width);
    for (Index ky = 0; ky < blur.kernel_size; ++ky)
      for (Index kx = 0; kx < blur.kernel_size; ++kx)
        acc.noalias() += k(ky, kx) * padded.block(ky, kx, image.height, image.width);
    out.set_plane(c, acc);
  }
  out.clamp();
  return out;
}

Image add_noise(const Image& image, const GaussianNoise& noise, Rng& rng) {
  Image out = image;
  if (noise.sigma == 0.0) return out;
  std::normal_distribution<double> dist(0.0, noise.sigma);
  for (Index i = 0; i < out.size(); ++i) out.pixels[i] += dist(rng);
  out.clamp();
  return out;
}

Eigen::Matrix<double, 8, 8> dct8_matrix() {
  Eigen::Matrix<double, 8, 8> d;
  for (int u = 0; u < 8; ++u) {
    const double cu = u == 0 ? std::sqrt(1.0 / 8.0) : 0.5;
    for (int x = 0; x < 8; ++x) d(u, x) = cu * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
  }
  return d;
}

// Half away from zero; values within 1e-9 of a half count as exact halves.
double round_half_away(double x) {
  const double whole = std::trunc(x);
  if (std::abs(std::abs(x - whole) - 0.5) < 1e-9) return whole + std::copysign(1.0, x);
  return std::round(x);
}

Image jpeg_proxy(const Image& image, const JpegProxy& jpeg) {
  const std::array<int, 64> table = jpeg_quant_table(jpeg.quality);
  static const Eigen::Matrix<double, 8, 8> d = dct8_matrix();
  Image out(image.height, image.width, image.channels);
  Eigen::Matrix<double, 8, 8> block, coef;
  for (Index c = 0; c < image.channels; ++c) {
    for (Index by = 0; by < image.height; by += 8) {
      for (Index bx = 0; bx < image.width; bx += 8) {
        // Partial edge blocks are padded by replicating the last row/column.
        for (int y = 0; y < 8; ++y) {
          for (int x = 0; x < 8; ++x) {
            const Index sy = std::min(by + y, image.height - 1);
            const Index sx = std::min(bx + x, image.width - 1);
            block(y, x) = std::round(std::clamp(image.at(sy, sx, c), 0.0, 1.0) * 255.0) - 128.0;
          }
        }
        coef.noalias() = d * block * d.transpose();
        for (int i = 0; i < 64; ++i) {
          const double q = table[i];
          coef(i / 8, i % 8) = round_half_away(coef(i / 8, i % 8) / q) * q;
        }
        block.noalias() = d.transpose() * coef * d;
        for (int y = 0; y < 8 && by + y < image.height; ++y) {
          for (int x = 0; x < 8 && bx + x < image.width; ++x) {
            out.at(by + y, bx + x, c) = std::clamp(round_half_away(block(y, x) + 128.0), 0.0, 255.0) / 255.0;
          }
        }
      }
    }
  }
  return out;
}

Index resized_extent(Index reference, double scale) {
  return std::max<Index>(1, static_cast<Index>(std::lround(static_cast<double>(reference) * scale)));
}

double uniform(Rng& rng, const Range& r) {
  return std::uniform_real_distribution<double>(r.min, r.max)(rng);
}

}  // namespace

void validate(const DegradationStep& step) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Blur>) {
          if (s.kernel_size < 1 || s.kernel_size % 2 == 0)
            throw ConfigError("blur kernel size must be a positive odd count");
          if (!(s.sigma_x > 0.0) || !(s.sigma_y > 0.0)) throw ConfigError("blur sigmas must be positive");
        } else if constexpr (std::is_same_v<T, Resize>) {
          if (!(s.scale > 0.0 && s.scale <= 4.0)) throw ConfigError("resize scale must lie in (0, 4]");
        } else if constexpr (std::is_same_v<T, GaussianNoise>) {
          if (!(s.sigma >= 0.0) || !std::isfinite(s.sigma)) throw ConfigError("noise sigma must be >= 0");
        } else {
          if (s.quality < 1 || s.quality > 100) throw ConfigError("jpeg quality must lie in [1, 100]");
        }
      },
      step);
}

void validate(const DegradationRanges& ranges) {
  auto check = [](const Range& r, const char* name) {
    if (!(r.min <= r.max)) throw ConfigError(std::string("degenerate range for ") + name + ": min > max");
  };
  check(ranges.blur_sigma, "blur_sigma");
  check(ranges.blur_theta, "blur_theta");
  check(ranges.resize_scale, "resize_scale");
  check(ranges.noise_sigma, "noise_sigma");
  check(ranges.jpeg_quality, "jpeg_quality");
  if (ranges.kernel_size < 1 || ranges.kernel_size % 2 == 0) throw ConfigError("kernel_size must be odd");
  if (!(ranges.blur_sigma.min > 0.0)) throw ConfigError("blur_sigma must be positive");
  if (!(ranges.resize_scale.min > 0.0 && ranges.resize_scale.max <= 4.0))
    throw ConfigError("resize_scale must lie in (0, 4]");
  if (!(ranges.noise_sigma.min >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (ranges.jpeg_quality.min < 1.0 || ranges.jpeg_quality.max > 100.0)
    throw ConfigError("jpeg_quality must lie in [1, 100]");
  if (ranges.resize_methods.empty()) throw ConfigError("resize_methods must not be empty");
  if (ranges.rounds < 1) throw ConfigError("rounds must be >= 1");
  if (ranges.target_scale < 1 || ranges.target_scale > 4) throw ConfigError("target_scale must lie in [1, 4]");
}

Eigen::MatrixXd gaussian_kernel(Index size, double sigma_x, double sigma_y, double theta) {
  if (size < 1 || size % 2 == 0) {
    throw UnsupportedError("gaussian_kernel: size must be odd, got " + std::to_string(size));
  }
  if (!(sigma_x > 0.0) || !(sigma_y > 0.0)) throw ContractError("gaussian_kernel: sigmas must be positive");
  const Index r = size / 2;
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::MatrixXd k(size, size);
  for (Index y = 0; y < size; ++y) {
    for (Index x = 0; x < size; ++x) {
      const double u = static_cast<double>(x - r), v = static_cast<double>(y - r);
      const double a = c * u + s * v;
      const double b = -s * u + c * v;
      k(y, x) = std::exp(-0.5 * (a * a / (sigma_x * sigma_x) + b * b / (sigma_y * sigma_y)));
    }
  }
  return k / k.sum();
}

std::array<int, 64> jpeg_quant_table(int quality) {
  if (quality < 1 || quality > 100) throw ConfigError("jpeg quality must lie in [1, 100]");
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> table{};
  for (int i = 0; i < 64; ++i) table[i] = std::clamp((kLuminanceTable[i] * scale + 50) / 100, 1, 255);
  return table;
}

Image resize_to(const Image& image, Index out_height, Index out_width, ResizeMethod method) {
  if (out_height < 1 || out_width < 1) throw ContractError("resize target must be positive");
  const auto cols = axis_contributions(image.width, out_width, method);
  const auto rows = axis_contributions(image.height, out_height, method);
  auto clamp_index = [](Index i, Index n) { return std::clamp<Index>(i, 0, n - 1); };

  Image tmp(image.height, out_width, image.channels);
  for (Index y = 0; y < image.height; ++y) {
    for (Index x = 0; x < out_width; ++x) {
      const Contribution& con = cols[x];
      for (Index c = 0; c < image.channels; ++c) {
        double acc = 0.0;
        for (std::size_t t = 0; t < con.weights.size(); ++t)
          acc += con.weights[t] * image.at(y, clamp_index(con.first + static_cast<Index>(t), image.width), c);
        tmp.at(y, x, c) = acc;
      }
    }
  }
  Image out(out_height, out_width, image.channels);
  for (Index y = 0; y < out_height; ++y) {
    const Contribution& con = rows[y];
    for (Index x = 0; x < out_width; ++x) {
      for (Index c = 0; c < image.channels; ++c) {
        double acc = 0.0;
        for (std::size_t t = 0; t < con.weights.size(); ++t)
          acc += con.weights[t] * tmp.at(clamp_index(con.first + static_cast<Index>(t), image.height), x, c);
        out.at(y, x, c) = acc;
      }
    }
  }
  out.clamp();
  return out;
}

Image apply_step(const Image& image, const DegradationStep& step, Rng& rng, StepContext context) {
  validate(step);
  if (context.original_height == 0) context = {image.height, image.width};
  return std::visit(
      [&](const auto& s) -> Image {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Blur>) {
          return blur_image(image, s);
        } else if constexpr (std::is_same_v<T, Resize>) {
          const bool original = s.reference == ResizeReference::Original;
          const Index h = resized_extent(original ? context.original_height : image.height, s.scale);
          const Index w = resized_extent(original ? context.original_width : image.width, s.scale);
          return resize_to(image, h, w, s.method);
        } else if constexpr (std::is_same_v<T, GaussianNoise>) {
          return add_noise(image, s, rng);
        } else {
          return jpeg_proxy(image, s);
        }
      },
      step);
}

DegradationRecipe sample_second_order_recipe(const DegradationRanges& ranges, std::uint64_t seed) {
  validate(ranges);
  Rng rng(seed);
  DegradationRecipe recipe;
  recipe.seed = derive_seed(seed, "noise");
  recipe.target_scale = ranges.target_scale;
  for (int round = 0; round < ranges.rounds; ++round) {
    Blur blur;
    blur.kernel_size = ranges.kernel_size;
    blur.sigma_x = uniform(rng, ranges.blur_sigma);
    blur.sigma_y = uniform(rng, ranges.blur_sigma);
    blur.theta = uniform(rng, ranges.blur_theta);
    Resize resize;
    resize.scale = uniform(rng, ranges.resize_scale);
    const auto pick = std::uniform_int_distribution<std::size_t>(0, ranges.resize_methods.size() - 1)(rng);
    resize.method = ranges.resize_methods[pick];
    GaussianNoise noise{uniform(rng, ranges.noise_sigma)};
    const int qmin = static_cast<int>(std::ceil(ranges.jpeg_quality.min));
    const int qmax = static_cast<int>(std::floor(ranges.jpeg_quality.max));
    JpegProxy jpeg{std::uniform_int_distribution<int>(qmin, std::max(qmin, qmax))(rng)};
    recipe.steps.insert(recipe.steps.end(), {blur, resize, noise, jpeg});
  }
  recipe.steps.emplace_back(
      Resize{1.0 / ranges.target_scale, ResizeMethod::Bicubic, ResizeReference::Original});
  return recipe;
}

Image degrade(const Image& image, const DegradationRecipe& recipe) {
  if (recipe.target_scale < 1) throw ContractError("target_scale must be positive");
  if (image.height % recipe.target_scale != 0 || image.width % recipe.target_scale != 0) {
    throw ContractError("image extents " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                        " are not divisible by scale " + std::to_string(recipe.target_scale));
  }
  Rng rng(recipe.seed);
  const StepContext context{image.height, image.width};
  Image current = image;
  for (const DegradationStep& step : recipe.steps) current = apply_step(current, step, rng, context);
  if (current.height != image.height / recipe.target_scale || current.width != image.width / recipe.target_scale) {
    throw ContractError("recipe does not end at 1/" + std::to_string(recipe.target_scale) + " of the input extents");
  }
  return current;
}

PairedSample generate_paired_sample(const Image& hr, const DegradationRanges& ranges, std::uint64_t seed) {
  PairedSample pair;
  pair.recipe1 = sample_second_order_recipe(ranges, seed);
  pair.recipe2 = sample_second_order_recipe(ranges, seed ^ kPairSeedSalt);
  pair.lr1 = degrade(hr, pair.recipe1);
  pair.lr2 = degrade(hr, pair.recipe2);
  return pair;
}

std::string_view family_name(DegradationFamily family) {
  switch (family) {
    case DegradationFamily::Clean: return "clean";
    case DegradationFamily::Blur: return "blur";
    case DegradationFamily::Noise: return "noise";
    case DegradationFamily::Jpeg: return "jpeg";
    case DegradationFamily::BlurNoise: return "blur+noise";
    case DegradationFamily::BlurJpeg: return "blur+jpeg";
    case DegradationFamily::NoiseJpeg: return "noise+jpeg";
    case DegradationFamily::BlurNoiseJpeg: return "blur+noise+jpeg";
  }
  return "unknown";
}

std::optional<DegradationFamily> family_from_name(std::string_view name) {
  for (DegradationFamily f : kAllFamilies)
    if (family_name(f) == name) return f;
  return std::nullopt;
}

DegradationRecipe family_recipe(DegradationFamily family, int target_scale, std::uint64_t seed) {
  const std::string_view name = family_name(family);
  const bool blur = name.find("blur") != std::string_view::npos;
  const bool noise = name.find("noise") != std::string_view::npos;
  const bool jpeg = name.find("jpeg") != std::string_view::npos;
  DegradationRecipe recipe;
  recipe.seed = seed;
  recipe.target_scale = target_scale;
  if (blur) recipe.steps.emplace_back(Blur{21, 2.0, 2.0, 0.0});
  recipe.steps.emplace_back(Resize{1.0 / target_scale, ResizeMethod::Bicubic, ResizeReference::Original});
  if (noise) recipe.steps.emplace_back(GaussianNoise{20.0 / 255.0});
  if (jpeg) recipe.steps.emplace_back(JpegProxy{50});
  return recipe;
}

std::string_view method_name(ResizeMethod method) {
  switch (method) {
    case ResizeMethod::Nearest: return "nearest";
    case ResizeMethod::Bilinear: return "bilinear";
    case ResizeMethod::Bicubic: return "bicubic";
  }
  return "unknown";
}

ResizeMethod method_from_name(std::string_view name) {
  if (name == "nearest") return ResizeMethod::Nearest;
  if (name == "bilinear") return ResizeMethod::Bilinear;
  if (name == "bicubic") return ResizeMethod::Bicubic;
  throw ConfigError("unknown resize method '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const DegradationStep& step) {
  std::visit(
      [&j](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Blur>) {
          j = {{"type", "blur"}, {"kernel_size", s.kernel_size}, {"sigma_x", s.sigma_x},
               {"sigma_y", s.sigma_y}, {"theta", s.theta}};
        } else if constexpr (std::is_same_v<T, Resize>) {
          j = {{"type", "resize"}, {"scale", s.scale}, {"method", method_name(s.method)},
               {"reference", s.reference == ResizeReference::Original ? "original" : "current"}};
        } else if constexpr (std::is_same_v<T, GaussianNoise>) {
          j = {{"type", "noise"}, {"sigma", s.sigma}};
        } else {
          j = {{"type", "jpeg"}, {"quality", s.quality}};
        }
      },
      step);
}

void from_json(const nlohmann::json& j, DegradationStep& step) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "blur") {
    step = Blur{j.at("kernel_size").get<Index>(), j.at("sigma_x").get<double>(), j.at("sigma_y").get<double>(),
                j.at("theta").get<double>()};
  } else if (type == "resize") {
    const std::string ref = j.value("reference", std::string("current"));
    if (ref != "current" && ref != "original") throw ConfigError("unknown resize reference '" + ref + "'");
    step = Resize{j.at("scale").get<double>(), method_from_name(j.at("method").get<std::string>()),
                  ref == "original" ? ResizeReference::Original : ResizeReference::Current};
  } else if (type == "noise") {
    step = GaussianNoise{j.at("sigma").get<double>()};
  } else if (type == "jpeg") {
    step = JpegProxy{j.at("quality").get<int>()};
  } else {
    throw ConfigError("unknown degradation step type '" + type + "'");
  }
  validate(step);
}

void to_json(nlohmann::json& j, const DegradationRecipe& recipe) {
  j = {{"seed", recipe.seed}, {"target_scale", recipe.target_scale}, {"steps", recipe.steps}};
}

void from_json(const nlohmann::json& j, DegradationRecipe& recipe) {
  recipe.seed = j.at("seed").get<std::uint64_t>();
  recipe.target_scale = j.at("target_scale").get<int>();
  recipe.steps = j.at("steps").get<std::vector<DegradationStep>>();
}

void to_json(nlohmann::json& j, const DegradationRanges& r) {
  std::vector<std::string> methods;
  for (ResizeMethod m : r.resize_methods) methods.emplace_back(method_name(m));
  j = {{"kernel_size", r.kernel_size},
       {"blur_sigma", {r.blur_sigma.min, r.blur_sigma.max}},
       {"blur_theta", {r.blur_theta.min, r.blur_theta.max}},
       {"resize_scale", {r.resize_scale.min, r.resize_scale.max}},
       {"resize_methods", methods},
       {"noise_sigma", {r.noise_sigma.min, r.noise_sigma.max}},
       {"jpeg_quality", {r.jpeg_quality.min, r.jpeg_quality.max}},
       {"rounds", r.rounds},
       {"target_scale", r.target_scale}};
}

void from_json(const nlohmann::json& j, DegradationRanges& r) {
  auto range = [&j](const char* key, Range& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2) throw ConfigError(std::string(key) + " must be a [min, max] pair");
    out = Range{v[0].get<double>(), v[1].get<double>()};
  };
  if (j.contains("kernel_size")) r.kernel_size = j.at("kernel_size").get<Index>();
  range("blur_sigma", r.blur_sigma);
  range("blur_theta", r.blur_theta);
  range("resize_scale", r.resize_scale);
  range("noise_sigma", r.noise_sigma);
  range("jpeg_quality", r.jpeg_quality);
  if (j.contains("resize_methods")) {
    r.resize_methods.clear();
    for (const auto& m : j.at("resize_methods")) r.resize_methods.push_back(method_from_name(m.get<std::string>()));
  }
  if (j.contains("rounds")) r.rounds = j.at("rounds").get<int>();
  if (j.contains("target_scale")) r.target_scale = j.at("target_scale").get<int>();
}

}  // namespace blindsr
