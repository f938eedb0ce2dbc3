#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "blindsr/degradations.hpp"
#include "blindsr/diagnostics.hpp"
#include "blindsr/errors.hpp"
#include "blindsr/evaluation.hpp"
#include "blindsr/model.hpp"
#include "blindsr/synthetic.hpp"

using namespace blindsr;

namespace {

Image gray(const Eigen::MatrixXd& plane) {
  Image img(plane.rows(), plane.cols(), 1);
  img.set_plane(0, plane);
  return img;
}

Eigen::MatrixXd horizontal_cosine(Index h, Index w, int k, double offset, double amplitude) {
  Eigen::MatrixXd m(h, w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) m(y, x) = offset + amplitude * std::cos(2.0 * std::numbers::pi * k * x / w);
  return m;
}

// Band of each centered FFT coefficient, computed independently.
int fft_band(Index y, Index x, Index h, Index w, int bands) {
  const double fy = double(y - h / 2) / h, fx = double(x - w / 2) / w;
  return std::min(bands - 1, static_cast<int>(std::sqrt(fx * fx + fy * fy) * 2.0 * bands));
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<double>(k);
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size()), mean = (n - 1) / 2;
  double num = 0, da = 0, db = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    num += (ra[k] - mean) * (rb[k] - mean);
    da += (ra[k] - mean) * (ra[k] - mean);
    db += (rb[k] - mean) * (rb[k] - mean);
  }
  return num / std::sqrt(da * db);
}

DdrSet blobs(int per_cluster, double center, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  DdrSet ddr;
  for (int cluster = 0; cluster < 2; ++cluster)
    for (int k = 0; k < per_cluster; ++k) {
      Eigen::VectorXd v(3);
      for (Index d = 0; d < 3; ++d) v[d] = (cluster == 0 ? center : -center) + unit(rng);
      ddr.vectors.push_back(v);
      ddr.labels.push_back(cluster == 0 ? "a" : "b");
    }
  return ddr;
}

}  // namespace

TEST_CASE("fft of a constant plane has a single DC peak") {
  const Eigen::MatrixXd mag = fft2_magnitude(Eigen::MatrixXd::Constant(8, 6, 0.3));
  CHECK(std::abs(mag(4, 3) - 0.3 * 48) < 1e-12);
  Eigen::MatrixXd rest = mag;
  rest(4, 3) = 0.0;
  CHECK(rest.maxCoeff() < 1e-12);
}

TEST_CASE("fft of a horizontal cosine peaks symmetrically at its frequency") {
  const Eigen::MatrixXd mag = fft2_magnitude(horizontal_cosine(16, 16, 3, 0.0, 1.0));
  CHECK(std::abs(mag(8, 8 + 3) - 128.0) < 1e-10);
  CHECK(std::abs(mag(8, 8 - 3) - 128.0) < 1e-10);
  CHECK(std::abs(mag.sum() - 256.0) < 1e-9);
}

TEST_CASE("fft matches the naive DFT on random 16x16 planes") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Eigen::MatrixXd f = oracle::random_matrix(16, 16, seed);
    const Eigen::MatrixXd fast = fft2_magnitude(f), slow = oracle::centered_magnitude(f);
    CHECK((fast - slow).cwiseAbs().maxCoeff() / slow.cwiseAbs().maxCoeff() <= 1e-8);
  }
  const Eigen::MatrixXd odd = oracle::random_matrix(9, 14, 4);
  CHECK((fft2_magnitude(odd) - oracle::centered_magnitude(odd)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("fft obeys Parseval") {
  const Eigen::MatrixXd f = oracle::random_matrix(12, 20, 5);
  const double spectral = fft2_magnitude(f).squaredNorm();
  CHECK(std::abs(spectral - 240.0 * f.squaredNorm()) <= 1e-6 * spectral);
}

TEST_CASE("mape of identical images is zero in every band") {
  const Image img = synthetic_image(32, 1);
  const SpectrumReport report = radial_band_mape(img, img, 16);
  CHECK(report.band_edges.size() == 17);
  CHECK(report.band_edges.front() == 0.0);
  CHECK(report.band_edges.back() == 0.5);
  REQUIRE(report.mape_per_band.size() == 16);
  for (double v : report.mape_per_band) CHECK(v == 0.0);
}

TEST_CASE("mape is nonzero iff luminance differs") {
  const Image img = synthetic_image(32, 2);
  Image other = img;
  other.at(5, 7, 1) += 0.01;
  const auto report = radial_band_mape(other, img, 16);
  CHECK(*std::max_element(report.mape_per_band.begin(), report.mape_per_band.end()) > 0.0);
  CHECK_THROWS_AS(radial_band_mape(img, img.crop(0, 0, 16, 16), 16), ContractError);
  CHECK_THROWS_AS(radial_band_mape(img, img, 1), ContractError);
}

TEST_CASE("half-amplitude tone: the tone coefficients report 0.5 and DC reports 0") {
  const Eigen::MatrixXd gt_plane = horizontal_cosine(16, 16, 3, 0.5, 0.25);
  const Eigen::MatrixXd pred_plane = horizontal_cosine(16, 16, 3, 0.5, 0.125);

  // Oracle: per-coefficient relative error from the naive DFT, averaged per band.
  const Eigen::MatrixXd fg = oracle::centered_magnitude(gt_plane), fp = oracle::centered_magnitude(pred_plane);
  CHECK(std::abs(std::abs(fp(8, 11) - fg(8, 11)) / fg(8, 11) - 0.5) < 1e-12);
  std::vector<double> total(8, 0.0), count(8, 0.0);
  for (Index y = 0; y < 16; ++y)
    for (Index x = 0; x < 16; ++x) {
      const int b = fft_band(y, x, 16, 16, 8);
      total[b] += std::abs(fp(y, x) - fg(y, x)) / (fg(y, x) + 1e-8);
      count[b] += 1.0;
    }
  const SpectrumReport report = radial_band_mape(gray(pred_plane), gray(gt_plane), 8);
  for (int b = 0; b < 8; ++b) CHECK(std::abs(report.mape_per_band[b] - total[b] / count[b]) < 1e-6);
  CHECK(report.mape_per_band[0] < 1e-6);

  // On a two-row image the tone's band holds only the two tone coefficients.
  const SpectrumReport thin = radial_band_mape(gray(horizontal_cosine(2, 16, 3, 0.5, 0.125)),
                                               gray(horizontal_cosine(2, 16, 3, 0.5, 0.25)), 8);
  CHECK(std::abs(thin.mape_per_band[3] - 0.5) < 1e-6);
  CHECK(thin.mape_per_band[0] < 1e-6);
}

TEST_CASE("blur raises mape toward high frequencies") {
  const Image clean = synthetic_image(64, 3);
  Rng rng(0);
  const Image blurred = apply_step(clean, Blur{21, 2.0, 2.0, 0.0}, rng);
  const SpectrumReport report = radial_band_mape(blurred, clean, 16);
  std::vector<double> index, upper;
  for (int b = 7; b < 16; ++b) {
    index.push_back(b);
    upper.push_back(report.mape_per_band[b]);
  }
  CHECK(spearman(index, upper) > 0.0);
}

TEST_CASE("dct2 matches the defining double sum") {
  const Eigen::MatrixXd f = oracle::random_matrix(8, 12, 6);
  CHECK((dct2(f) - oracle::naive_dct2(f)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("identical channels have zero frequency entropy") {
  const Eigen::MatrixXd plane = oracle::random_matrix(16, 16, 7);
  Tensor features({5, 16, 16});
  for (Index c = 0; c < 5; ++c)
    for (Index i = 0; i < 256; ++i) features[c * 256 + i] = plane(i / 16, i % 16);
  const ChannelEntropy e = channel_frequency_entropy(features, 16);
  CHECK(e.entropy_bits == 0.0);
  CHECK(std::all_of(e.dominant_band.begin(), e.dominant_band.end(), [&](int b) { return b == e.dominant_band[0]; }));
}

TEST_CASE("one channel per band gives log2(C) bits") {
  // Channel b is the DCT basis function (2b, 0), which sits in band b.
  const Index n = 32;
  const int bands = 16;
  Tensor features({bands, n, n});
  for (int b = 0; b < bands; ++b)
    for (Index y = 0; y < n; ++y)
      for (Index x = 0; x < n; ++x)
        features[(b * n + y) * n + x] = std::cos(std::numbers::pi * (2 * y + 1) * (2 * b) / (2.0 * n));
  const ChannelEntropy e = channel_frequency_entropy(features, bands);
  for (int b = 0; b < bands; ++b) CHECK(e.dominant_band[b] == b);
  CHECK(std::abs(e.entropy_bits - 4.0) < 1e-12);
}

TEST_CASE("frequency entropy matches a naive histogram computation") {
  const int bands = 16;
  Tensor features({8, 16, 16});
  std::mt19937_64 rng(8);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (Index i = 0; i < features.size(); ++i) features[i] = unit(rng);
  // Smooth some channels so the dominant bands differ.
  for (Index c = 0; c < 4; ++c)
    for (Index y = 0; y < 16; ++y)
      for (Index x = 0; x < 16; ++x) features[(c * 16 + y) * 16 + x] += 3.0 * std::cos(0.2 * (c + 1) * (x + y));

  std::map<int, int> histogram;
  for (Index c = 0; c < 8; ++c) {
    Eigen::MatrixXd plane(16, 16);
    for (Index i = 0; i < 256; ++i) plane(i / 16, i % 16) = features[c * 256 + i];
    const Eigen::MatrixXd coef = oracle::naive_dct2(plane);
    std::vector<double> energy(bands, 0.0);
    for (Index u = 0; u < 16; ++u)
      for (Index v = 0; v < 16; ++v) {
        const double radius = std::sqrt(std::pow(u / 32.0, 2) + std::pow(v / 32.0, 2));
        energy[std::min(bands - 1, static_cast<int>(radius * 2.0 * bands))] += std::abs(coef(u, v));
      }
    ++histogram[static_cast<int>(std::max_element(energy.begin(), energy.end()) - energy.begin())];
  }
  double expected = 0.0;
  for (const auto& [band, count] : histogram) expected -= count / 8.0 * std::log2(count / 8.0);

  const ChannelEntropy e = channel_frequency_entropy(features, bands);
  CHECK(std::abs(e.entropy_bits - expected) < 1e-12);
  CHECK(e.entropy_bits <= std::log2(8.0) + 1e-12);
}

TEST_CASE("calinski-harabasz on separated, shuffled and degenerate clusters") {
  const DdrSet separated = blobs(50, 100.0, 1);
  const double chi = calinski_harabasz(separated);
  CHECK(chi > 1e3);

  DdrSet shuffled = blobs(50, 0.0, 2);
  std::shuffle(shuffled.labels.begin(), shuffled.labels.end(), std::mt19937_64(3));
  CHECK(calinski_harabasz(shuffled) < chi / 100.0);

  DdrSet exact;
  for (int k = 0; k < 4; ++k) {
    exact.vectors.push_back(Eigen::VectorXd::Constant(2, k % 2 ? 1.0 : -1.0));
    exact.labels.push_back(k % 2 ? "x" : "y");
  }
  CHECK(std::isinf(calinski_harabasz(exact)));
  CHECK(calinski_harabasz(exact) > 0.0);
}

TEST_CASE("calinski-harabasz matches the scatter-trace formula") {
  DdrSet ddr = blobs(7, 1.0, 4);
  ddr.labels[3] = "c";
  ddr.labels[10] = "c";
  std::map<std::string, std::vector<Eigen::VectorXd>> groups;
  Eigen::VectorXd overall = Eigen::VectorXd::Zero(3);
  for (std::size_t i = 0; i < ddr.vectors.size(); ++i) {
    groups[ddr.labels[i]].push_back(ddr.vectors[i]);
    overall += ddr.vectors[i];
  }
  overall /= double(ddr.vectors.size());
  double between = 0, within = 0;
  for (const auto& [label, members] : groups) {
    Eigen::VectorXd center = Eigen::VectorXd::Zero(3);
    for (const auto& v : members) center += v;
    center /= double(members.size());
    between += members.size() * (center - overall).squaredNorm();
    for (const auto& v : members) within += (v - center).squaredNorm();
  }
  const double m = ddr.vectors.size(), k = groups.size();
  CHECK(calinski_harabasz(ddr) == doctest::Approx((between / (k - 1)) / (within / (m - k))).epsilon(1e-12));
}

TEST_CASE("calinski-harabasz is invariant under rigid motions and relabeling") {
  const DdrSet ddr = blobs(20, 2.0, 5);
  const double chi = calinski_harabasz(ddr);
  const Eigen::Matrix3d rotation = Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  DdrSet moved = ddr;
  for (auto& v : moved.vectors) v = rotation * v + Eigen::Vector3d(5, -3, 8);
  CHECK(calinski_harabasz(moved) == doctest::Approx(chi).epsilon(1e-10));
  DdrSet relabeled = ddr;
  for (auto& l : relabeled.labels) l = l == "a" ? "b" : "a";
  CHECK(calinski_harabasz(relabeled) == doctest::Approx(chi).epsilon(1e-12));
}

TEST_CASE("calinski-harabasz degenerate inputs") {
  DdrSet one = blobs(3, 1.0, 6);
  for (auto& l : one.labels) l = "same";
  CHECK_THROWS_AS(calinski_harabasz(one), DegenerateInputError);
  DdrSet tiny;
  tiny.vectors = {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2)};
  tiny.labels = {"a", "b"};
  CHECK_THROWS_AS(calinski_harabasz(tiny), DegenerateInputError);
}

TEST_CASE("psnr") {
  const Image gt = synthetic_image(16, 9);
  CHECK(std::isinf(psnr(gt, gt)));

  // One full-scale error among 100 pixels per channel: MSE is exactly 0.01.
  Image a(10, 10, 3, 0.0), b = a;
  for (Index c = 0; c < 3; ++c) b.at(4, 7, c) = 1.0;
  CHECK(psnr(b, a) == 20.0);
  CHECK(psnr(a, b) == 20.0);

  Image noisy = gt;
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (Index i = 0; i < noisy.size(); ++i) noisy.pixels[i] += u(rng);
  double expected = 0.0;
  for (Index c = 0; c < 3; ++c) {
    double mse = 0.0;
    for (Index y = 0; y < 16; ++y)
      for (Index x = 0; x < 16; ++x) mse += std::pow(noisy.at(y, x, c) - gt.at(y, x, c), 2);
    expected += 10.0 * std::log10(1.0 / (mse / 256.0));
  }
  CHECK(std::abs(psnr(noisy, gt) - expected / 3.0) < 1e-9);
  CHECK_THROWS_AS(psnr(gt, gt.crop(0, 0, 8, 8)), ContractError);
}

TEST_CASE("pooled features of a constant image through a bias-free 1x1 network") {
  ModelConfig config;
  config.features = 4;
  config.blocks = 1;
  config.scale = 2;
  config.kernel_size = 1;
  config.bias = false;
  ToyModel model(config, 12);

  const Eigen::Vector3d color(0.2, 0.5, 0.9);
  Image img(6, 5, 3);
  for (Index y = 0; y < 6; ++y)
    for (Index x = 0; x < 5; ++x)
      for (Index c = 0; c < 3; ++c) img.at(y, x, c) = color[c];

  auto weight = [&](const std::string& name) { return Eigen::MatrixXd(model.find(name + ".weight")->matrix()); };
  auto lrelu = [&](Eigen::VectorXd v) { return v.unaryExpr([&](double t) { return t > 0 ? t : config.slope * t; }).eval(); };
  const Eigen::VectorXd head = lrelu(weight("head") * color);
  const Eigen::VectorXd body = head + weight("block0.conv2") * lrelu(weight("block0.conv1") * head);
  const Eigen::VectorXd tap = lrelu(weight("up0") * body);

  IdentityRestorer identity;
  ModelRestorer restorer(model);
  const DdrSet ddr = extract_ddr(restorer, {img, img}, {"clean", "clean"}, TapPoint::TailInput);
  REQUIRE(ddr.vectors.size() == 2);
  CHECK(ddr.vectors[0].size() == 4);
  CHECK(ddr.vectors[0] == ddr.vectors[1]);
  CHECK((ddr.vectors[0] - tap).cwiseAbs().maxCoeff() < 1e-12);

  const DdrSet body_ddr = extract_ddr(restorer, {img}, {"clean"}, TapPoint::BodyOutput);
  CHECK((body_ddr.vectors[0] - body).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(extract_ddr(identity, {img}, {"clean"}, TapPoint::HeadOutput).vectors[0].size() == 3);
}

TEST_CASE("unknown taps are configuration errors") {
  CHECK(parse_tap("tail_input") == TapPoint::TailInput);
  CHECK_THROWS_AS(parse_tap("nowhere"), ConfigError);
}
