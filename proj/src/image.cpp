#include "blindsr/image.hpp"

#include "blindsr/errors.hpp"

namespace blindsr {

Image::Image(Index h, Index w, Index c, double fill) : height(h), width(w), channels(c) {
  if (h <= 0 || w <= 0 || (c != 1 && c != 3)) {
    throw ContractError("image needs positive extents and 1 or 3 channels");
  }
  pixels = Eigen::ArrayXd::Constant(h * w * c, fill);
}

Eigen::MatrixXd Image::plane(Index c) const {
  Eigen::MatrixXd m(height, width);
  for (Index y = 0; y < height; ++y)
    for (Index x = 0; x < width; ++x) m(y, x) = at(y, x, c);
  return m;
}

void Image::set_plane(Index c, const Eigen::MatrixXd& plane) {
  for (Index y = 0; y < height; ++y)
    for (Index x = 0; x < width; ++x) at(y, x, c) = plane(y, x);
}

Eigen::MatrixXd Image::luminance() const {
  if (channels == 1) return plane(0);
  Eigen::MatrixXd m(height, width);
  for (Index y = 0; y < height; ++y)
    for (Index x = 0; x < width; ++x)
      m(y, x) = 0.299 * at(y, x, 0) + 0.587 * at(y, x, 1) + 0.114 * at(y, x, 2);
  return m;
}

Image Image::crop(Index y0, Index x0, Index h, Index w) const {
  if (y0 < 0 || x0 < 0 || y0 + h > height || x0 + w > width) throw ContractError("crop outside image");
  Image out(h, w, channels);
  for (Index y = 0; y < h; ++y) {
    const Index src = ((y0 + y) * width + x0) * channels;
    out.pixels.segment(y * w * channels, w * channels) = pixels.segment(src, w * channels);
  }
  return out;
}

Tensor to_tensor(const Image& image) {
  Tensor t({image.channels, image.height, image.width});
  const Index hw = image.height * image.width;
  for (Index p = 0; p < hw; ++p)
    for (Index c = 0; c < image.channels; ++c) t[c * hw + p] = image.pixels[p * image.channels + c];
  return t;
}

Image from_tensor(const Tensor& chw) {
  if (chw.dim() != 3) throw DimensionError("from_tensor expects [C x H x W], got " + shape_string(chw.shape()));
  Image image(chw.extent(1), chw.extent(2), chw.extent(0));
  const Index hw = image.height * image.width;
  for (Index p = 0; p < hw; ++p)
    for (Index c = 0; c < image.channels; ++c) image.pixels[p * image.channels + c] = chw[c * hw + p];
  return image;
}

}  // namespace blindsr
