#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "blindsr/alignment.hpp"
#include "blindsr/degradations.hpp"
#include "blindsr/model.hpp"
#include "blindsr/optim.hpp"

namespace blindsr {

inline constexpr std::string_view kToolkitVersion = "0.3.1";

enum class RegularizerKind { None, Dropout, Align, BruteForce };
enum class Supervision { Both, First };

std::string_view regularizer_name(RegularizerKind kind);
std::string_view supervision_name(Supervision s);

struct RegularizerConfig {
  RegularizerKind kind = RegularizerKind::None;
  double keep_prob = 0.7;            // dropout
  AlignmentConfig alignment;         // align; rff_seed is filled from SeedConfig
  double brute_force_weight = 1.0;   // brute-force equality baseline
  bool operator==(const RegularizerConfig&) const = default;
};

/// One root seed; each purpose seed is root ^ hash(label) unless set explicitly.
struct SeedConfig {
  std::uint64_t root = 0;
  std::optional<std::uint64_t> data;
  std::optional<std::uint64_t> init;
  std::optional<std::uint64_t> dropout;
  std::optional<std::uint64_t> rff;

  std::uint64_t data_seed() const;
  std::uint64_t init_seed() const;
  std::uint64_t dropout_seed() const;
  std::uint64_t rff_seed() const;
  bool operator==(const SeedConfig&) const = default;
};

struct DataConfig {
  std::string source = "synthetic";  // synthetic | directory
  std::string directory;
  Index num_images = 256;
  Index image_size = 128;            // synthetic HR side length
  int workers = 1;
  bool operator==(const DataConfig&) const = default;
};

struct TrainConfig {
  ModelConfig model;
  Index batch_size = 8;
  Index patch_size = 32;             // LR pixels
  std::int64_t steps = 5000;
  double base_lr = 2e-4;
  double min_lr = 0.0;
  AdamHyper adam;
  std::int64_t cosine_period = 0;    // 0: equal to steps
  std::int64_t checkpoint_every = 1000;
  Supervision supervise = Supervision::Both;
  RegularizerConfig regularizer;
  SeedConfig seeds;
  DataConfig data;
  DegradationRanges degradation;
  bool operator==(const TrainConfig&) const = default;

  std::int64_t period() const { return cosine_period > 0 ? cosine_period : steps; }
  // Alignment settings with rff_seed resolved from the seed section.
  AlignmentConfig alignment() const;
};

struct LoadedConfig {
  TrainConfig config;
  std::vector<std::string> defaulted;  // dotted names of fields that took defaults
};

// Parses a JSON document. Unknown keys and every invariant violation are
// collected and reported together in one ConfigError.
LoadedConfig parse_config(std::string_view text);
// Reads, parses and reports every defaulted field on standard error.
LoadedConfig load_config(const std::filesystem::path& path, bool report_defaults = true);

void validate(const TrainConfig& config);

nlohmann::json to_json(const TrainConfig& config);
std::string serialize_config(const TrainConfig& config);

}  // namespace blindsr
