#include "blindsr/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "blindsr/errors.hpp"

namespace blindsr {

namespace {

Eigen::MatrixXd dct_matrix(Index n) {
  Eigen::MatrixXd d(n, n);
  for (Index k = 0; k < n; ++k) {
    const double alpha = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
    for (Index x = 0; x < n; ++x) {
      d(k, x) = alpha * std::cos(std::numbers::pi * (2.0 * x + 1.0) * k / (2.0 * n));
    }
  }
  return d;
}

}  // namespace

Eigen::MatrixXd fft2_magnitude(const Eigen::MatrixXd& plane) {
  const Index h = plane.rows(), w = plane.cols();
  if (h < 2 || w < 2) throw ContractError("fft2_magnitude: extents must be >= 2");
  Eigen::FFT<double> fft;
  Eigen::MatrixXcd spectrum(h, w);
  Eigen::VectorXcd line_out;
  for (Index y = 0; y < h; ++y) {
    Eigen::VectorXcd line = plane.row(y).transpose().cast<std::complex<double>>();
    fft.fwd(line_out, line);
    spectrum.row(y) = line_out.transpose();
  }
  for (Index x = 0; x < w; ++x) {
    Eigen::VectorXcd line = spectrum.col(x);
    fft.fwd(line_out, line);
    spectrum.col(x) = line_out;
  }
  Eigen::MatrixXd centered(h, w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) centered((y + h / 2) % h, (x + w / 2) % w) = std::abs(spectrum(y, x));
  return centered;
}

int radial_band(double radius, int bands) {
  const int b = static_cast<int>(std::floor(radius / 0.5 * bands));
  return std::clamp(b, 0, bands - 1);
}

SpectrumReport radial_band_mape(const Image& pred, const Image& gt, int bands) {
  if (!pred.same_extents(gt)) throw ContractError("radial_band_mape: image extents differ");
  if (bands < 2) throw ContractError("radial_band_mape: need at least 2 bands");
  const Eigen::MatrixXd fp = fft2_magnitude(pred.luminance());
  const Eigen::MatrixXd fg = fft2_magnitude(gt.luminance());
  const Index h = fg.rows(), w = fg.cols();

  std::vector<double> total(bands, 0.0);
  std::vector<double> count(bands, 0.0);
  for (Index y = 0; y < h; ++y) {
    const double fy = static_cast<double>(y - h / 2) / static_cast<double>(h);
    for (Index x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x - w / 2) / static_cast<double>(w);
      const int b = radial_band(std::hypot(fx, fy), bands);
      total[b] += std::abs(fp(y, x) - fg(y, x)) / (fg(y, x) + kMapeEpsilon);
      count[b] += 1.0;
    }
  }
  SpectrumReport report;
  for (int b = 0; b <= bands; ++b) report.band_edges.push_back(0.5 * b / bands);
  for (int b = 0; b < bands; ++b) report.mape_per_band.push_back(count[b] > 0 ? total[b] / count[b] : 0.0);
  return report;
}

Eigen::MatrixXd dct2(const Eigen::MatrixXd& plane) {
  return dct_matrix(plane.rows()) * plane * dct_matrix(plane.cols()).transpose();
}

ChannelEntropy channel_frequency_entropy(const Tensor& features, int bands) {
  if (features.dim() != 3) {
    throw DimensionError("channel_frequency_entropy expects [C x H x W], got " + shape_string(features.shape()));
  }
  if (bands < 1) throw ContractError("channel_frequency_entropy: need at least one band");
  const Index c = features.extent(0), h = features.extent(1), w = features.extent(2);
  const Eigen::MatrixXd dh = dct_matrix(h), dw = dct_matrix(w);

  // Band index of every DCT coefficient; coefficient k sits at k / (2n) cycles per pixel.
  Eigen::MatrixXi band(h, w);
  for (Index u = 0; u < h; ++u)
    for (Index v = 0; v < w; ++v)
      band(u, v) = radial_band(std::hypot(u / (2.0 * h), v / (2.0 * w)), bands);

  ChannelEntropy result;
  std::vector<double> histogram(bands, 0.0);
  for (Index ch = 0; ch < c; ++ch) {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> plane(
        features.data().data() + ch * h * w, h, w);
    const Eigen::MatrixXd coef = dh * plane * dw.transpose();
    std::vector<double> energy(bands, 0.0);
    for (Index u = 0; u < h; ++u)
      for (Index v = 0; v < w; ++v) energy[band(u, v)] += std::abs(coef(u, v));
    const int dominant = static_cast<int>(std::max_element(energy.begin(), energy.end()) - energy.begin());
    result.dominant_band.push_back(dominant);
    histogram[dominant] += 1.0;
  }
  for (double count : histogram) {
    if (count == 0.0) continue;
    const double p = count / static_cast<double>(c);
    result.entropy_bits -= p * std::log2(p);
  }
  return result;
}

double calinski_harabasz(const DdrSet& ddr) {
  const std::size_t m = ddr.vectors.size();
  if (m == 0 || ddr.labels.size() != m) throw ContractError("calinski_harabasz: one label per vector required");
  const Index dim = ddr.vectors.front().size();
  for (const auto& v : ddr.vectors)
    if (v.size() != dim) throw DimensionError("calinski_harabasz: vectors differ in length");

  std::map<std::string, std::pair<Eigen::VectorXd, double>> clusters;
  Eigen::VectorXd overall = Eigen::VectorXd::Zero(dim);
  for (std::size_t i = 0; i < m; ++i) {
    auto [it, inserted] = clusters.try_emplace(ddr.labels[i], Eigen::VectorXd::Zero(dim), 0.0);
    it->second.first += ddr.vectors[i];
    it->second.second += 1.0;
    overall += ddr.vectors[i];
  }
  const std::size_t k = clusters.size();
  if (k < 2) throw DegenerateInputError("calinski_harabasz: need at least two labels");
  if (m <= k) throw DegenerateInputError("calinski_harabasz: need more vectors than labels");
  overall /= static_cast<double>(m);
  for (auto& [label, c] : clusters) c.first /= c.second;

  double between = 0.0;
  for (const auto& [label, c] : clusters) between += c.second * (c.first - overall).squaredNorm();
  double within = 0.0;
  for (std::size_t i = 0; i < m; ++i) within += (ddr.vectors[i] - clusters.at(ddr.labels[i]).first).squaredNorm();

  if (within == 0.0) return std::numeric_limits<double>::infinity();
  return (between / static_cast<double>(k - 1)) / (within / static_cast<double>(m - k));
}

double psnr(const Image& pred, const Image& gt) {
  if (!pred.same_extents(gt)) throw ContractError("psnr: image extents differ");
  const Index pixels = gt.height * gt.width;
  double total = 0.0;
  for (Index c = 0; c < gt.channels; ++c) {
    double sq = 0.0;
    for (Index p = 0; p < pixels; ++p) {
      const double d = pred.pixels[p * gt.channels + c] - gt.pixels[p * gt.channels + c];
      sq += d * d;
    }
    const double mse = sq / static_cast<double>(pixels);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    total += -10.0 * std::log10(mse);
  }
  return total / static_cast<double>(gt.channels);
}

}  // namespace blindsr
