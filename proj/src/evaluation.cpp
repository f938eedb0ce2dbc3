#include "blindsr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "blindsr/errors.hpp"
#include "blindsr/parallel.hpp"
#include "blindsr/seed.hpp"

namespace blindsr {

namespace fs = std::filesystem;

TapPoint parse_tap(std::string_view name) {
  if (auto tap = tap_from_name(name)) return *tap;
  throw ConfigError("unknown tap point '" + std::string(name) + "' (head_output, body_output, tail_input)");
}

Restorer::Output ModelRestorer::process(const Image& lr, TapPoint tap) const {
  auto [restored, features] = model_.restore_with_tap(lr, tap);
  return {std::move(restored), std::move(features)};
}

namespace {

Eigen::VectorXd pool(const Tensor& chw) {
  if (chw.dim() != 3) throw DimensionError("tap features must be [C x H x W], got " + shape_string(chw.shape()));
  return chw.matrix().rowwise().mean();
}

std::size_t family_index(DegradationFamily f) {
  return static_cast<std::size_t>(std::find(kAllFamilies.begin(), kAllFamilies.end(), f) - kAllFamilies.begin());
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::ofstream open(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

DdrSet extract_ddr(const Restorer& restorer, const std::vector<Image>& lr_images,
                   const std::vector<std::string>& labels, TapPoint tap, int workers) {
  if (labels.size() != lr_images.size()) throw ContractError("extract_ddr: one label per image required");
  DdrSet set;
  set.labels = labels;
  set.vectors.resize(lr_images.size());
  parallel_for(lr_images.size(), workers,
               [&](std::size_t i) { set.vectors[i] = pool(restorer.features(lr_images[i], tap)); });
  return set;
}

EvalReport evaluate(const Restorer& restorer, const std::vector<Image>& hr_images, const EvalOptions& options) {
  if (hr_images.empty()) throw ContractError("evaluate: no images");
  if (options.families.empty()) throw ContractError("evaluate: no degradation families");
  if (options.bands < 1) throw ContractError("evaluate: bands must be >= 1");
  const int scale = restorer.scale();

  std::vector<Image> hr(hr_images.size());
  for (std::size_t i = 0; i < hr.size(); ++i) {
    const Image& src = hr_images[i];
    const Index h = src.height / scale * scale, w = src.width / scale * scale;
    if (h / scale < 2 || w / scale < 2) throw ContractError("evaluate: image too small for the scale");
    hr[i] = (h == src.height && w == src.width) ? src : src.crop(0, 0, h, w);
  }

  EvalReport report;
  for (int b = 0; b <= options.bands; ++b) report.band_edges.push_back(0.5 * b / options.bands);
  double psnr_sum = 0.0;
  std::size_t psnr_count = 0;
  for (DegradationFamily family : options.families) {
    ConditionReport cond;
    cond.family = family;
    cond.images.resize(hr.size());
    const std::uint64_t fam = family_index(family);
    parallel_for(hr.size(), options.workers, [&](std::size_t i) {
      const DegradationRecipe recipe = family_recipe(family, scale, derive_seed(options.seed, fam, i));
      const Image lr = degrade(hr[i], recipe);
      ImageMetrics& m = cond.images[i];
      const bool want_image = options.psnr || options.mape, want_features = options.entropy || options.ddr;
      Restorer::Output out;
      if (want_image && want_features) {
        out = restorer.process(lr, options.tap);
      } else if (want_image) {
        out.restored = restorer.restore(lr);
      } else if (want_features) {
        out.features = restorer.features(lr, options.tap);
      }
      if (options.psnr) m.psnr = psnr(out.restored, hr[i]);
      if (options.mape) m.mape = radial_band_mape(out.restored, hr[i], options.bands).mape_per_band;
      if (options.entropy) m.entropy = channel_frequency_entropy(out.features, options.bands);
      if (options.ddr) m.pooled = pool(out.features);
    });
    const double n = static_cast<double>(hr.size());
    cond.mean_mape.assign(static_cast<std::size_t>(options.bands), 0.0);
    for (const ImageMetrics& m : cond.images) {
      cond.mean_psnr += m.psnr / n;
      cond.mean_entropy += m.entropy.entropy_bits / n;
      for (std::size_t b = 0; b < m.mape.size(); ++b) cond.mean_mape[b] += m.mape[b] / n;
      if (options.ddr) {
        report.ddr.vectors.push_back(m.pooled);
        report.ddr.labels.emplace_back(family_name(family));
      }
      psnr_sum += m.psnr;
      ++psnr_count;
    }
    report.conditions.push_back(std::move(cond));
  }
  report.mean_psnr = psnr_sum / static_cast<double>(psnr_count);
  report.chi = std::numeric_limits<double>::quiet_NaN();
  if (options.ddr && options.families.size() >= 2 && report.ddr.vectors.size() > options.families.size()) {
    report.chi = calinski_harabasz(report.ddr);
  }
  return report;
}

std::string mape_chart_svg(const EvalReport& report) {
  constexpr double width = 640, height = 360, left = 60, right = 150, top = 20, bottom = 40;
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  double ymax = 0.0;
  std::size_t bands = 0;
  for (const auto& c : report.conditions) {
    bands = std::max(bands, c.mean_mape.size());
    for (double v : c.mean_mape)
      if (std::isfinite(v)) ymax = std::max(ymax, v);
  }
  if (ymax <= 0.0) ymax = 1.0;
  const double pw = width - left - right, ph = height - top - bottom;
  auto x_of = [&](std::size_t b) { return left + (bands > 1 ? pw * b / (bands - 1) : pw / 2); };
  auto y_of = [&](double v) { return top + ph * (1.0 - std::min(v, ymax) / ymax); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
      << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 8
      << "\" text-anchor=\"middle\" font-size=\"12\">radial frequency band</text>\n";
  svg << "<text x=\"" << left - 8 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << num(ymax)
      << "</text>\n";
  svg << "<text x=\"" << left - 8 << "\" y=\"" << top + ph << "\" text-anchor=\"end\" font-size=\"11\">0</text>\n";
  for (std::size_t k = 0; k < report.conditions.size(); ++k) {
    const auto& c = report.conditions[k];
    const char* color = colors[k % 8];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t b = 0; b < c.mean_mape.size(); ++b) svg << x_of(b) << ',' << y_of(c.mean_mape[b]) << ' ';
    svg << "\"/>\n";
    svg << "<text x=\"" << left + pw + 10 << "\" y=\"" << top + 14 * (k + 1) << "\" font-size=\"11\" fill=\""
        << color << "\">" << family_name(c.family) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_eval_report(const EvalReport& report, const EvalOptions& options, const fs::path& dir) {
  fs::create_directories(dir);
  const auto& edges = report.band_edges;
  if (options.psnr) {
    auto out = open(dir / "psnr.csv");
    out << "condition,image,psnr\n";
    for (const auto& c : report.conditions)
      for (std::size_t i = 0; i < c.images.size(); ++i)
        out << family_name(c.family) << ',' << i << ',' << num(std::min(c.images[i].psnr, kPsnrCsvCap)) << '\n';
  }
  if (options.mape) {
    auto out = open(dir / "mape.csv");
    out << "condition,image,band,band_low,band_high,mape\n";
    for (const auto& c : report.conditions)
      for (std::size_t i = 0; i < c.images.size(); ++i)
        for (std::size_t b = 0; b < c.images[i].mape.size(); ++b)
          out << family_name(c.family) << ',' << i << ',' << b << ',' << num(edges[b]) << ',' << num(edges[b + 1])
              << ',' << num(c.images[i].mape[b]) << '\n';
    auto mean = open(dir / "mape_mean.csv");
    mean << "condition,band,band_low,band_high,mape\n";
    for (const auto& c : report.conditions)
      for (std::size_t b = 0; b < c.mean_mape.size(); ++b)
        mean << family_name(c.family) << ',' << b << ',' << num(edges[b]) << ',' << num(edges[b + 1]) << ','
             << num(c.mean_mape[b]) << '\n';
    std::ofstream svg = open(dir / "mape_chart.svg");
    svg << mape_chart_svg(report);
  }
  if (options.entropy) {
    auto bands = open(dir / "dominant_bands.csv");
    bands << "condition,image,channel,dominant_band\n";
    auto entropy = open(dir / "entropy.csv");
    entropy << "condition,image,entropy_bits\n";
    for (const auto& c : report.conditions) {
      for (std::size_t i = 0; i < c.images.size(); ++i) {
        const auto& e = c.images[i].entropy;
        for (std::size_t ch = 0; ch < e.dominant_band.size(); ++ch)
          bands << family_name(c.family) << ',' << i << ',' << ch << ',' << e.dominant_band[ch] << '\n';
        entropy << family_name(c.family) << ',' << i << ',' << num(e.entropy_bits) << '\n';
      }
    }
  }
  auto conds = open(dir / "conditions.csv");
  conds << "condition,images,mean_psnr,mean_entropy_bits\n";
  for (const auto& c : report.conditions)
    conds << family_name(c.family) << ',' << c.images.size() << ',' << num(std::min(c.mean_psnr, kPsnrCsvCap)) << ','
          << num(c.mean_entropy) << '\n';
  auto summary = open(dir / "summary.csv");
  summary << "tap,chi,mean_psnr,mape_aggregation\n";
  summary << tap_name(options.tap) << ',' << num(report.chi) << ',' << num(std::min(report.mean_psnr, kPsnrCsvCap))
          << ",per_image_then_mean\n";
}

}  // namespace blindsr
