#pragma once

#include <cstdint>
#include <vector>

#include "blindsr/image.hpp"

namespace blindsr {

// Procedural RGB test content: smooth background, Gaussian blobs, oriented
// sinusoid textures and filled polygons. Deterministic in `seed`.
Image synthetic_image(Index size, std::uint64_t seed);

// `count` images, item k seeded by derive_seed(seed, k); independent of `workers`.
std::vector<Image> synthetic_dataset(Index count, Index size, std::uint64_t seed, int workers = 1);

}  // namespace blindsr
