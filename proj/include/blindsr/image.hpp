#pragma once

#include <filesystem>

#include <Eigen/Dense>

#include "blindsr/tensor.hpp"

namespace blindsr {

/// H x W x C intensities in [0, 1], stored row-major with interleaved channels.
struct Image {
  Index height = 0;
  Index width = 0;
  Index channels = 0;
  Eigen::ArrayXd pixels;

  Image() = default;
  Image(Index h, Index w, Index c, double fill = 0.0);

  double& at(Index y, Index x, Index c) { return pixels[(y * width + x) * channels + c]; }
  double at(Index y, Index x, Index c) const { return pixels[(y * width + x) * channels + c]; }
  Index size() const { return pixels.size(); }
  bool same_extents(const Image& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }

  void clamp() { pixels = pixels.max(0.0).min(1.0); }
  // One channel as an H x W matrix.
  Eigen::MatrixXd plane(Index c) const;
  void set_plane(Index c, const Eigen::MatrixXd& plane);
  // BT.601 luma for RGB; the single channel otherwise.
  Eigen::MatrixXd luminance() const;
  Image crop(Index y0, Index x0, Index h, Index w) const;
};

// [C x H x W] tensor view of an image, and back (values are not clamped).
Tensor to_tensor(const Image& image);
Image from_tensor(const Tensor& chw);

// 8-bit PNG, grayscale or RGB (alpha dropped).
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace blindsr
