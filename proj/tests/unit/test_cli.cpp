#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"

#include "blindsr/cli.hpp"

using namespace blindsr;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "blindsr_test_cli" / name;
  fs::remove_all(dir);
  return dir;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file()) files[fs::relative(entry.path(), root).string()] = read_bytes(entry.path());
  return files;
}

}  // namespace

TEST_CASE("usage errors exit with status 2") {
  const Result none = run({});
  CHECK(none.code == kExitUsage);
  CHECK(none.err.find("degrade") != std::string::npos);
  CHECK(run({"degrade", "--count", "abc"}).code == kExitUsage);
  CHECK(run({"degrade", "--no-such-flag"}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"analyze-freq"}).code == kExitUsage);  // --pred and --gt are required
}

TEST_CASE("help and version exit cleanly") {
  const Result help = run({"--help"});
  CHECK(help.code == kExitOk);
  CHECK(help.out.find("verify-gradcheck") != std::string::npos);
  const Result version = run({"--version"});
  CHECK(version.code == kExitOk);
  CHECK_FALSE(version.out.empty());
}

TEST_CASE("an invalid configuration file exits with status 2 and names the problem") {
  const fs::path dir = fresh_dir("badconfig");
  fs::create_directories(dir);
  const fs::path config = dir / "config.json";
  std::ofstream(config) << R"({"regularizer": {"kind": "dropout", "keep_prob": 0}})";
  const Result r = run({"train", "--config", config.string(), "--out", (dir / "run").string()});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("keep_prob") != std::string::npos);
}

TEST_CASE("a missing checkpoint is a runtime failure") {
  const fs::path dir = fresh_dir("missing");
  const Result r = run({"analyze-ddr", "--checkpoint", (dir / "nope.bin").string(), "--out", dir.string()});
  CHECK(r.code == kExitFailure);
}

TEST_CASE("paired degrade output is byte-reproducible across runs and directories") {
  const fs::path a = fresh_dir("degrade_a"), b = fresh_dir("degrade_b");
  const std::vector<std::string> common = {"degrade", "--paired", "--seed", "7", "--count", "3", "--size", "32"};
  auto with_out = [&](const fs::path& dir, const std::string& workers) {
    std::vector<std::string> args = common;
    args.insert(args.end(), {"--out", dir.string(), "--workers", workers});
    return run(args);
  };
  REQUIRE(with_out(a, "1").code == kExitOk);
  REQUIRE(with_out(b, "3").code == kExitOk);
  const auto ta = tree(a), tb = tree(b);
  CHECK(ta.size() == 1 + 3 * 4);  // manifest plus hr, lr1, lr2 and recipe per image
  CHECK(ta.count("manifest.json") == 1);
  CHECK(ta.count("lr1/00002.png") == 1);
  CHECK(ta == tb);
  CHECK(ta.at("lr1/00000.png") != ta.at("lr2/00000.png"));
}

TEST_CASE("verify-lemma passes and writes its tables") {
  const fs::path dir = fresh_dir("lemma");
  const Result r = run({"verify-lemma", "--games", "5", "--players", "5", "--out", dir.string()});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(fs::exists(dir / "lemma.csv"));
  CHECK(fs::exists(dir / "manifest.json"));
}

TEST_CASE("verify-gradcheck passes on a single seed") {
  const fs::path dir = fresh_dir("gradcheck");
  const Result r = run({"verify-gradcheck", "--seeds", "1", "--seed", "7", "--out", dir.string()});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(fs::exists(dir / "gradcheck.csv"));
}

TEST_CASE("train, eval and the analyzers run end to end on a tiny configuration") {
  const fs::path dir = fresh_dir("pipeline");
  fs::create_directories(dir);
  const fs::path config = dir / "config.json";
  std::ofstream(config) << R"({
    "model": {"features": 4, "blocks": 1},
    "train": {"batch_size": 2, "patch_size": 8, "steps": 4, "cosine_period": 4, "checkpoint_every": 2},
    "data": {"num_images": 4, "image_size": 32},
    "regularizer": {"kind": "align"}
  })";
  const Result train = run({"train", "--config", config.string(), "--out", (dir / "run").string(), "--log-every", "0"});
  REQUIRE_MESSAGE(train.code == kExitOk, train.err);
  const std::string ckpt = (dir / "run" / "final.bin").string();
  REQUIRE(fs::exists(ckpt));
  CHECK(fs::exists(dir / "run" / "metrics.csv"));

  const Result eval = run({"eval", "--checkpoint", ckpt, "--count", "2", "--size", "32", "--bands", "4", "--out",
                           (dir / "eval").string()});
  REQUIRE_MESSAGE(eval.code == kExitOk, eval.err);
  CHECK(fs::exists(dir / "eval" / "summary.csv"));

  REQUIRE(run({"degrade", "--seed", "1", "--count", "2", "--size", "32", "--out", (dir / "deg").string()}).code ==
          kExitOk);
  const Result freq = run({"analyze-freq", "--pred", (dir / "deg" / "hr").string(), "--gt",
                           (dir / "deg" / "hr").string(), "--bands", "4", "--out", (dir / "freq").string()});
  CHECK(freq.code == kExitOk);
  const Result entropy = run({"analyze-entropy", "--images", (dir / "deg" / "lr").string(), "--checkpoint", ckpt,
                              "--out", (dir / "entropy").string()});
  CHECK(entropy.code == kExitOk);
  const Result ddr = run({"analyze-ddr", "--identity", "--count", "2", "--size", "32", "--out",
                          (dir / "ddr").string()});
  CHECK(ddr.code == kExitOk);
  for (const char* sub : {"eval", "freq", "entropy", "ddr"}) CHECK(fs::exists(dir / sub / "manifest.json"));
}
