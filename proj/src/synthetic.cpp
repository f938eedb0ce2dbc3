#include "blindsr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "blindsr/parallel.hpp"
#include "blindsr/seed.hpp"

namespace blindsr {

namespace {

struct Point {
  double x, y;
};

bool inside_polygon(const std::vector<Point>& poly, double x, double y) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    if ((poly[i].y > y) != (poly[j].y > y) &&
        x < (poly[j].x - poly[i].x) * (y - poly[i].y) / (poly[j].y - poly[i].y) + poly[i].x) {
      in = !in;
    }
  }
  return in;
}

}  // namespace

Image synthetic_image(Index size, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  const double s = static_cast<double>(size);
  Image img(size, size, 3);

  // Smooth bilinear background between four corner colours.
  double corner[4][3];
  for (auto& c : corner)
    for (double& v : c) v = uniform(0.15, 0.85);
  for (Index y = 0; y < size; ++y) {
    const double fy = y / (s - 1.0);
    for (Index x = 0; x < size; ++x) {
      const double fx = x / (s - 1.0);
      for (int c = 0; c < 3; ++c) {
        img.at(y, x, c) = (1 - fy) * ((1 - fx) * corner[0][c] + fx * corner[1][c]) +
                          fy * ((1 - fx) * corner[2][c] + fx * corner[3][c]);
      }
    }
  }

  const int blobs = 2 + static_cast<int>(u01(rng) * 4);
  for (int b = 0; b < blobs; ++b) {
    const double cx = uniform(0, s), cy = uniform(0, s), sigma = uniform(0.04, 0.2) * s;
    double amp[3];
    for (double& a : amp) a = uniform(-0.4, 0.4);
    for (Index y = 0; y < size; ++y)
      for (Index x = 0; x < size; ++x) {
        const double w = std::exp(-0.5 * ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (sigma * sigma));
        for (int c = 0; c < 3; ++c) img.at(y, x, c) += amp[c] * w;
      }
  }

  const int textures = 1 + static_cast<int>(u01(rng) * 2);
  for (int t = 0; t < textures; ++t) {
    const double freq = uniform(0.04, 0.3);  // cycles per pixel
    const double angle = uniform(0, std::numbers::pi);
    const double phase = uniform(0, 2 * std::numbers::pi);
    const double amp = uniform(0.05, 0.2);
    const double cx = uniform(0, s), cy = uniform(0, s), radius = uniform(0.2, 0.6) * s;
    const double kx = std::cos(angle) * 2 * std::numbers::pi * freq;
    const double ky = std::sin(angle) * 2 * std::numbers::pi * freq;
    double tint[3];
    for (double& v : tint) v = uniform(0.5, 1.0);
    for (Index y = 0; y < size; ++y)
      for (Index x = 0; x < size; ++x) {
        const double r2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (radius * radius);
        const double window = std::exp(-r2 * r2);
        const double v = amp * window * std::sin(kx * x + ky * y + phase);
        for (int c = 0; c < 3; ++c) img.at(y, x, c) += tint[c] * v;
      }
  }

  const int polygons = 2 + static_cast<int>(u01(rng) * 3);
  for (int p = 0; p < polygons; ++p) {
    const double cx = uniform(0, s), cy = uniform(0, s), radius = uniform(0.08, 0.3) * s;
    const int vertices = 3 + static_cast<int>(u01(rng) * 4);
    std::vector<double> angles(vertices);
    for (double& a : angles) a = uniform(0, 2 * std::numbers::pi);
    std::sort(angles.begin(), angles.end());
    std::vector<Point> poly;
    for (double a : angles) {
      const double r = radius * uniform(0.5, 1.0);
      poly.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
    }
    double color[3];
    for (double& v : color) v = uniform(0.0, 1.0);
    const double alpha = uniform(0.6, 1.0);
    for (Index y = 0; y < size; ++y)
      for (Index x = 0; x < size; ++x)
        if (inside_polygon(poly, x + 0.5, y + 0.5))
          for (int c = 0; c < 3; ++c) img.at(y, x, c) = (1 - alpha) * img.at(y, x, c) + alpha * color[c];
  }

  img.clamp();
  return img;
}

std::vector<Image> synthetic_dataset(Index count, Index size, std::uint64_t seed, int workers) {
  std::vector<Image> images(static_cast<std::size_t>(count));
  parallel_for(images.size(), workers, [&](std::size_t k) { images[k] = synthetic_image(size, derive_seed(seed, k)); });
  return images;
}

}  // namespace blindsr
