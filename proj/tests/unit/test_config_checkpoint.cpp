#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "doctest.h"

#include "blindsr/checkpoint.hpp"
#include "blindsr/config.hpp"
#include "blindsr/errors.hpp"
#include "blindsr/seed.hpp"

using namespace blindsr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "blindsr_test_config";
  fs::create_directories(dir);
  return dir / name;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << bytes;
}

Checkpoint sample_checkpoint() {
  Checkpoint ck;
  ck.config_json = "{\"k\": 1}\n";
  ck.step = 1234;
  Tensor w({2, 3});
  for (Index i = 0; i < w.size(); ++i) w[i] = 0.1 * i - 0.25;
  ck.tensors.push_back({"head.weight", w});
  ck.tensors.push_back({"head.bias", Tensor::scalar(std::numeric_limits<double>::denorm_min())});
  ck.seeds = {{"data", 0xfedcba9876543210ULL}, {"init", 7}};
  return ck;
}

}  // namespace

TEST_CASE("an empty configuration yields every default and reports each one") {
  for (const char* text : {"", "  \n", "{}"}) {
    const LoadedConfig loaded = parse_config(text);
    CHECK(loaded.config == TrainConfig{});
    CHECK(loaded.defaulted.size() > 30);
  }
  const fs::path path = scratch("empty.json");
  write_bytes(path, "");
  std::ostringstream captured;
  auto* old = std::cerr.rdbuf(captured.rdbuf());
  const LoadedConfig loaded = load_config(path);
  std::cerr.rdbuf(old);
  const std::string report = captured.str();
  CHECK(report.find("config: default train.batch_size = 8") != std::string::npos);
  CHECK(report.find("config: default regularizer.kind = \"none\"") != std::string::npos);
  CHECK(static_cast<std::size_t>(std::count(report.begin(), report.end(), '\n')) == loaded.defaulted.size());
}

TEST_CASE("unknown keys are rejected") {
  try {
    parse_config(R"({"train": {"batch_sise": 4}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("batch_sise") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config(R"({"trian": {}})"), ConfigError);
  CHECK_THROWS_AS(parse_config("[1, 2]"), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
}

TEST_CASE("zero keep probability under dropout is one aggregated error naming the field") {
  try {
    parse_config(R"({"regularizer": {"kind": "dropout", "keep_prob": 0}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(1 problem)") != std::string::npos);
    CHECK(msg.find("keep_prob") != std::string::npos);
  }
}

TEST_CASE("every violation is listed, not only the first") {
  try {
    parse_config(R"({"train": {"batch_size": 0, "patch_size": 1}, "regularizer": {"kind": "dropout", "keep_prob": 2},
                     "model": {"scale": 3}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("batch_size") != std::string::npos);
    CHECK(msg.find("patch_size") != std::string::npos);
    CHECK(msg.find("keep_prob") != std::string::npos);
    CHECK(msg.find("scale") != std::string::npos);
    CHECK(msg.find("problems") != std::string::npos);
  }
}

TEST_CASE("resolved configurations round-trip through serialization") {
  const LoadedConfig loaded = parse_config(R"({
    "model": {"features": 12, "blocks": 2, "scale": 4},
    "train": {"batch_size": 3, "steps": 77, "base_lr": 0.00031, "supervise": "first", "cosine_period": 100},
    "regularizer": {"kind": "align", "alignment": {"mode": "nonlinear", "rff_dim": 5, "weight": 0.3,
                    "covariance_convention": "paper-literal"}},
    "seeds": {"root": 11, "dropout": 99},
    "data": {"num_images": 10, "image_size": 160},
    "degradation": {"noise_sigma": [0.0, 0.05], "resize_methods": ["nearest"], "target_scale": 4}
  })");
  const TrainConfig& c = loaded.config;
  CHECK(c.model.scale == 4);
  CHECK(c.supervise == Supervision::First);
  CHECK(c.regularizer.alignment.mode == AlignmentMode::Nonlinear);
  CHECK(c.seeds.dropout_seed() == 99);
  CHECK(c.seeds.data_seed() == derive_seed(11, "data"));
  CHECK(c.alignment().rff_seed == c.seeds.rff_seed());

  const std::string text = serialize_config(c);
  const TrainConfig again = parse_config(text).config;
  CHECK(again == c);
  CHECK(serialize_config(again) == text);
}

TEST_CASE("semantic cross-field checks") {
  CHECK_THROWS_AS(parse_config(R"({"train": {"steps": 100, "cosine_period": 50}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"model": {"scale": 4}})"), ConfigError);  // degradation scale stays 2
  CHECK_THROWS_AS(parse_config(R"({"data": {"image_size": 40}})"), ConfigError);
  CHECK_NOTHROW(parse_config(R"({"regularizer": {"kind": "dropout", "keep_prob": 1}})"));
}

TEST_CASE("checkpoint round trip is exact") {
  const fs::path path = scratch("round.bin");
  const Checkpoint ck = sample_checkpoint();
  save_checkpoint(path, ck);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.config_json == ck.config_json);
  CHECK(back.step == 1234);
  REQUIRE(back.tensors.size() == 2);
  CHECK(back.tensors[0].name == "head.weight");
  CHECK(back.tensors[0].tensor.shape() == Shape{2, 3});
  CHECK(back.tensors[0].tensor.data() == ck.tensors[0].tensor.data());
  CHECK(back.find("head.bias")->item() == std::numeric_limits<double>::denorm_min());
  CHECK(back.find("missing") == nullptr);
  CHECK(back.seeds == ck.seeds);
  CHECK_FALSE(fs::exists(path.string() + ".tmp"));

  const std::string bytes = read_bytes(path);
  CHECK(bytes.substr(0, 8) == std::string("BSRCKPT\0", 8));
  CHECK(static_cast<unsigned char>(bytes[8]) == kCheckpointVersion);
}

TEST_CASE("corrupt checkpoints are rejected with the path") {
  const fs::path good = scratch("good.bin"), bad = scratch("bad.bin");
  save_checkpoint(good, sample_checkpoint());
  const std::string bytes = read_bytes(good);

  auto rejects = [&](const std::string& content) {
    write_bytes(bad, content);
    try {
      load_checkpoint(bad);
      return false;
    } catch (const IoError& e) {
      return std::string(e.what()).find(bad.string()) != std::string::npos;
    }
  };
  std::string wrong_magic = bytes;
  wrong_magic[0] = 'X';
  std::string wrong_version = bytes;
  wrong_version[8] = 9;
  CHECK(rejects(wrong_magic));
  CHECK(rejects(wrong_version));
  CHECK(rejects(bytes.substr(0, bytes.size() - 3)));
  CHECK(rejects(bytes.substr(0, 20)));
  CHECK(rejects(bytes + "x"));
  CHECK(rejects(""));
  CHECK_THROWS_AS(load_checkpoint(scratch("does_not_exist.bin")), IoError);
}

TEST_CASE("named seed derivation") {
  CHECK(derive_seed(0, "data") != derive_seed(0, "init"));
  CHECK(derive_seed(5, "data") == (5 ^ hash_label("data")));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
  SeedConfig seeds;
  seeds.root = 3;
  CHECK(seeds.init_seed() == derive_seed(3, "init"));
  seeds.init = 17;
  CHECK(seeds.init_seed() == 17);
}
