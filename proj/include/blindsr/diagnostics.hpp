#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blindsr/image.hpp"
#include "blindsr/tensor.hpp"

namespace blindsr {

struct SpectrumReport {
  std::vector<double> band_edges;  // normalized radial frequency, 0 .. 0.5
  std::vector<double> mape_per_band;
};

// Set of pooled deep features with one degradation label per vector.
struct DdrSet {
  std::vector<Eigen::VectorXd> vectors;
  std::vector<std::string> labels;
};

inline constexpr double kMapeEpsilon = 1e-8;
inline constexpr double kPsnrCsvCap = 100.0;

/// Magnitude of the 2-D DFT with DC moved to (H/2, W/2).
Eigen::MatrixXd fft2_magnitude(const Eigen::MatrixXd& plane);

// Radial band of a normalized frequency; values beyond 0.5 fold into the top band.
int radial_band(double radius, int bands);

/// Per-band mean of |(|F_pred| - |F_gt|)| / (|F_gt| + eps) over the luminance spectra.
SpectrumReport radial_band_mape(const Image& pred, const Image& gt, int bands = 16);

// Orthonormal 2-D DCT-II of one plane.
Eigen::MatrixXd dct2(const Eigen::MatrixXd& plane);

struct ChannelEntropy {
  std::vector<int> dominant_band;  // per channel
  double entropy_bits = 0.0;
};

/// For each channel of [C x H x W] features, the radial DCT band with the largest
/// summed |coefficient|; then the Shannon entropy (bits) of that histogram.
ChannelEntropy channel_frequency_entropy(const Tensor& features, int bands = 16);

/// Calinski-Harabasz index with clusters given by the labels. Higher means more
/// separated; +infinity when every cluster has zero spread.
double calinski_harabasz(const DdrSet& ddr);

/// Mean over channels of 10 log10(1 / MSE_c); +infinity when identical.
double psnr(const Image& pred, const Image& gt);

}  // namespace blindsr
