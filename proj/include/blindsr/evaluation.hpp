#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "blindsr/degradations.hpp"
#include "blindsr/diagnostics.hpp"
#include "blindsr/model.hpp"

namespace blindsr {

// Anything that maps an LR image to a restored image and exposes features at a tap.
class Restorer {
 public:
  virtual ~Restorer() = default;
  virtual int scale() const = 0;
  virtual Image restore(const Image& lr) const = 0;
  virtual Tensor features(const Image& lr, TapPoint tap) const = 0;

  struct Output {
    Image restored;
    Tensor features;
  };
  // Both results at once; models override this to share one forward pass.
  virtual Output process(const Image& lr, TapPoint tap) const { return {restore(lr), features(lr, tap)}; }
};

class ModelRestorer : public Restorer {
 public:
  explicit ModelRestorer(ToyModel& model) : model_(model) {}
  int scale() const override { return model_.config().scale; }
  Image restore(const Image& lr) const override { return model_.restore(lr); }
  Tensor features(const Image& lr, TapPoint tap) const override { return model_.tap_features(lr, tap); }
  Output process(const Image& lr, TapPoint tap) const override;

 private:
  ToyModel& model_;
};

// Scale-1 pass-through; its features are the input pixels at every tap.
class IdentityRestorer : public Restorer {
 public:
  int scale() const override { return 1; }
  Image restore(const Image& lr) const override { return lr; }
  Tensor features(const Image& lr, TapPoint) const override { return to_tensor(lr); }
};

// ConfigError naming the valid taps when `name` is not one of them.
TapPoint parse_tap(std::string_view name);

struct EvalOptions {
  std::vector<DegradationFamily> families{kAllFamilies.begin(), kAllFamilies.end()};
  int bands = 16;
  TapPoint tap = TapPoint::TailInput;
  std::uint64_t seed = 0;  // noise seed of image i under family f: derive_seed(seed, f, i)
  int workers = 1;
  bool psnr = true;
  bool mape = true;
  bool entropy = true;
  bool ddr = true;
};

struct ImageMetrics {
  double psnr = 0.0;
  std::vector<double> mape;        // per band
  ChannelEntropy entropy;
  Eigen::VectorXd pooled;          // global-average-pooled tap features
};

struct ConditionReport {
  DegradationFamily family = DegradationFamily::Clean;
  std::vector<ImageMetrics> images;
  double mean_psnr = 0.0;
  std::vector<double> mean_mape;   // per-image band MAPE averaged over images
  double mean_entropy = 0.0;
};

struct EvalReport {
  std::vector<ConditionReport> conditions;
  std::vector<double> band_edges;
  double chi = 0.0;                // over pooled features labelled by family
  double mean_psnr = 0.0;          // over all conditions and images
  DdrSet ddr;
};

// HR images are cropped to a multiple of the scale before degradation.
EvalReport evaluate(const Restorer& restorer, const std::vector<Image>& hr_images, const EvalOptions& options);

/// Globally average-pooled tap features, one vector per LR image, labelled.
DdrSet extract_ddr(const Restorer& restorer, const std::vector<Image>& lr_images,
                   const std::vector<std::string>& labels, TapPoint tap, int workers = 1);

// Writes psnr.csv, mape.csv, mape_mean.csv, dominant_bands.csv, entropy.csv,
// conditions.csv, summary.csv and mape_chart.svg into `dir`.
void write_eval_report(const EvalReport& report, const EvalOptions& options, const std::filesystem::path& dir);

// Minimal line chart of mean MAPE per band, one series per condition.
std::string mape_chart_svg(const EvalReport& report);

}  // namespace blindsr
