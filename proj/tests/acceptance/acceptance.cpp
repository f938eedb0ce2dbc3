// Acceptance checks: one PASS/FAIL line per criterion.
//
//   blindsr_acceptance --cache DIR --cli PATH [--only 1,4,8] [--seeds 5]
//
// Training runs for criteria 8 and 9 are stored under the cache directory,
// keyed by the serialized configuration, and reused when complete.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <sys/wait.h>

#include <CLI11.hpp>

#include "oracles.hpp"

#include "blindsr/alignment.hpp"
#include "blindsr/checkpoint.hpp"
#include "blindsr/config.hpp"
#include "blindsr/degradations.hpp"
#include "blindsr/diagnostics.hpp"
#include "blindsr/errors.hpp"
#include "blindsr/evaluation.hpp"
#include "blindsr/gradcheck_suite.hpp"
#include "blindsr/interaction.hpp"
#include "blindsr/ops.hpp"
#include "blindsr/seed.hpp"
#include "blindsr/synthetic.hpp"
#include "blindsr/training.hpp"

using namespace blindsr;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
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

int run_command(const std::string& command) {
  const int status = std::system((command + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string quoted(const fs::path& p) { return "'" + p.string() + "'"; }

// ---------------------------------------------------------------- 1

Verdict gradient_suite() {
  const auto start = Clock::now();
  const auto results = run_gradcheck_suite(10, 0, 1e-4);
  const double secs = seconds_since(start);
  std::set<std::string> failed, names;
  double worst = 0.0;
  for (const auto& c : results) {
    names.insert(c.name);
    worst = std::max(worst, c.report.max_relative_error);
    if (!c.report.passed) failed.insert(c.name + "@" + std::to_string(c.seed));
  }
  std::string detail = fmt("%zu graphs x 10 seeds, worst relative error %.3g, %.1f s", names.size(), worst, secs);
  for (const auto& f : failed) detail += "; failed " + f;
  return {failed.empty() && secs < 60.0 && names.size() == gradcheck_case_names().size(), detail};
}

// ---------------------------------------------------------------- 2

Verdict lemma_identity() {
  const auto start = Clock::now();
  const int players = 6;
  double worst = 0.0, worst_ratio = 0.0;
  std::size_t checked = 0, skipped = 0, bounded = 0;
  for (std::uint64_t g = 0; g < 100; ++g) {
    const CooperativeGame game = CooperativeGame::random(players, derive_seed(2024, g));
    const CooperativeGame positive = CooperativeGame::random_nonnegative_dividends(players, derive_seed(4048, g));
    for (int i = 0; i < players; ++i)
      for (int j = i + 1; j < players; ++j)
        for (int s = 0; s <= players - 2; ++s)
          for (int r = 0; r <= s; ++r) {
            try {
              const LemmaRatio lr = lemma_ratio(game, i, j, s, r);
              worst = std::max(worst, std::abs(lr.lhs - lr.rhs));
              ++checked;
            } catch (const DegenerateInputError&) {
              ++skipped;
            }
            if (r < s) {
              worst_ratio = std::max(worst_ratio, lemma_ratio(positive, i, j, s, r).lhs);
              ++bounded;
            }
          }
  }
  const double secs = seconds_since(start);
  return {worst < 1e-9 && worst_ratio <= 1.0 + 1e-12 && checked > 0 && secs < 60.0,
          fmt("max |lhs - rhs| %.3g over %zu (s, r) cases (%zu degenerate), max nonnegative ratio %.15g over %zu, "
              "%.1f s",
              worst, checked, skipped, worst_ratio, bounded, secs)};
}

// ---------------------------------------------------------------- 3

Verdict moebius_identity() {
  double worst = 0.0;
  std::size_t checked = 0;
  for (int n = 2; n <= 8; ++n) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const CooperativeGame game = CooperativeGame::random(n, derive_seed(seed, static_cast<std::uint64_t>(n)));
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          const Coalition others = game.grand() & ~((Coalition{1} << i) | (Coalition{1} << j));
          for (Coalition s = others;; s = (s - 1) & others) {
            double sum = 0.0;
            for (Coalition t = s;; t = (t - 1) & s) {
              sum += harsanyi_reward(game, i, j, t);
              if (t == 0) break;
            }
            worst = std::max(worst, std::abs(sum - marginal_reward(game, i, j, s)));
            ++checked;
            if (s == 0) break;
          }
        }
    }
  }
  return {worst < 1e-10, fmt("%zu contexts over n = 2..8, max |sum R^T - delta v| %.3g (tolerance 1e-10)", checked,
                             worst)};
}

// ---------------------------------------------------------------- 4

Verdict rff_fidelity() {
  const RffProjector projector(2024, 100000);
  double worst = 0.0;
  std::string values;
  const double x = 0.3;
  for (double gap : {0.0, 0.5, 1.0, 2.0}) {
    const double estimate = projector.map(x).dot(projector.map(x + gap)) / static_cast<double>(projector.dim());
    const double exact = std::exp(-gap * gap / 2.0);
    worst = std::max(worst, std::abs(estimate - exact));
    values += fmt(" %.2f:%.4f/%.4f", gap, estimate, exact);
  }
  return {worst <= 0.02, fmt("1e5 draws, gap:estimate/kernel%s, max deviation %.4f", values.c_str(), worst)};
}

// ---------------------------------------------------------------- 5

Verdict alignment_identities() {
  const Eigen::MatrixXd z = oracle::random_matrix(64, 5, 11);
  Tape tape;
  const Var x = tape.variable(Tensor::from_matrix(z));
  const Var same = tape.constant(Tensor::from_matrix(z));
  const double lin = linear_alignment_loss(x, same).value().item();
  const double nonlin = nonlinear_alignment_loss(x, same, RffProjector(7, 8)).value().item();
  double worst = 0.0;
  for (double c : {0.25, -1.5, 3.0}) {
    const Var shifted = tape.constant(Tensor::from_matrix((z.array() + c).matrix()));
    worst = std::max(worst, std::abs(linear_alignment_loss(x, shifted).value().item() - 5.0 * c * c));
  }
  return {lin == 0.0 && nonlin == 0.0 && worst < 1e-10,
          fmt("l_lin(x,x) = %g, l_nonlin(x,x) = %g, max |l_lin(x, x+c) - C c^2| %.3g", lin, nonlin, worst)};
}

// ---------------------------------------------------------------- 6

Verdict degradation_goldens(const fs::path& cli, const fs::path& scratch) {
  std::array<int, 64> ramp{};
  for (int i = 0; i < 64; ++i) ramp[i] = 4 * i;
  Image block(8, 8, 1);
  for (int i = 0; i < 64; ++i) block.pixels[i] = ramp[i] / 255.0;
  int jpeg_mismatches = 0;
  for (int q : {10, 50, 90}) {
    Rng rng(0);
    const Image out = apply_step(block, JpegProxy{q}, rng);
    const auto expected = oracle::jpeg_block(ramp, q);
    for (int i = 0; i < 64; ++i) jpeg_mismatches += out.pixels[i] != expected[i] / 255.0;
  }

  const Image img = synthetic_image(48, 5);
  Rng rng(9);
  const bool noise_identity = (apply_step(img, GaussianNoise{0.0}, rng).pixels == img.pixels).all();
  const bool nearest_identity =
      (apply_step(img, Resize{1.0, ResizeMethod::Nearest}, rng).pixels == img.pixels).all();

  const DegradationRanges ranges;
  const PairedSample a = generate_paired_sample(img, ranges, 77), b = generate_paired_sample(img, ranges, 77);
  bool paired = (a.lr1.pixels == b.lr1.pixels).all() && (a.lr2.pixels == b.lr2.pixels).all() &&
                a.recipe1 == b.recipe1 && a.recipe2 == b.recipe2;

  // The same through the command line: two runs, different worker counts, identical trees.
  const fs::path d1 = scratch / "paired_1", d2 = scratch / "paired_2";
  fs::remove_all(d1);
  fs::remove_all(d2);
  const std::string base = quoted(cli) + " degrade --paired --seed 7 --count 4 --size 64";
  const bool ran = run_command(base + " --workers 1 --out " + quoted(d1)) == 0 &&
                   run_command(base + " --workers 2 --out " + quoted(d2)) == 0;
  const bool cli_identical = ran && tree(d1) == tree(d2) && tree(d1).size() == 1 + 4 * 4;
  paired = paired && cli_identical;

  return {jpeg_mismatches == 0 && noise_identity && nearest_identity && paired,
          fmt("jpeg ramp q={10,50,90} mismatches %d, sigma=0 identity %s, nearest scale-1 identity %s, paired "
              "byte-reproducible %s (library) / %s (cli)",
              jpeg_mismatches, noise_identity ? "yes" : "no", nearest_identity ? "yes" : "no",
              (a.lr1.pixels == b.lr1.pixels).all() ? "yes" : "no", cli_identical ? "yes" : "no")};
}

// ---------------------------------------------------------------- 7

Verdict diagnostics_oracles() {
  const Eigen::MatrixXd plane = oracle::random_matrix(16, 16, 3);
  const Eigen::MatrixXd fast = fft2_magnitude(plane), slow = oracle::centered_magnitude(plane);
  const double fft_error = (fast - slow).cwiseAbs().maxCoeff() / slow.cwiseAbs().maxCoeff();

  Image a(10, 10, 3, 0.0), b = a;  // MSE 1/100 in every channel
  for (Index c = 0; c < 3; ++c) b.at(2, 3, c) = 1.0;
  const double p = psnr(b, a);

  const Image img = synthetic_image(32, 4);
  const SpectrumReport same = radial_band_mape(img, img, 16);
  const double mape_max = *std::max_element(same.mape_per_band.begin(), same.mape_per_band.end());

  Tensor features({6, 16, 16});
  for (Index c = 0; c < 6; ++c)
    for (Index i = 0; i < 256; ++i) features[c * 256 + i] = plane(i / 16, i % 16);
  const double entropy = channel_frequency_entropy(features, 16).entropy_bits;

  return {fft_error <= 1e-8 && p == 20.0 && mape_max == 0.0 && same.mape_per_band.size() == 16 && entropy == 0.0,
          fmt("fft relative error %.3g, psnr at MSE 0.01 = %.17g dB, max band MAPE of identical images %g, entropy "
              "of identical channels %g",
              fft_error, p, mape_max, entropy)};
}

// ---------------------------------------------------------------- 8, 9

struct RunSummary {
  double seconds = 0.0;
  double chi = 0.0;
  double single_psnr = 0.0;   // clean, blur, noise, jpeg
  double entropy = 0.0;       // dominant-band channel entropy, mean over conditions
  double top_quartile_mape = 0.0;
};

TrainConfig desk_config(RegularizerKind kind, std::uint64_t seed) {
  TrainConfig c;  // F=16, B=3, x2, 5000 steps, 256 synthetic images
  c.regularizer.kind = kind;
  if (kind == RegularizerKind::Align) {
    c.regularizer.alignment.mode = AlignmentMode::Linear;
    c.regularizer.alignment.weight = 1.0;
  }
  if (kind == RegularizerKind::Dropout) c.regularizer.keep_prob = 0.7;
  c.seeds.root = seed;
  c.checkpoint_every = 1000;
  validate(c);
  return c;
}

// Trains (or reuses) one run and evaluates it on held-out images.
RunSummary desk_run(const TrainConfig& config, const fs::path& cache, const std::vector<Image>& heldout) {
  const std::string text = serialize_config(config);
  const fs::path dir = cache / fmt("%s_seed%" PRIu64 "_%016" PRIx64, std::string(regularizer_name(config.regularizer.kind)).c_str(),
                                   config.seeds.root, hash_label(text));
  const fs::path done = dir / "wall_seconds.txt";
  RunSummary s;
  std::optional<ToyModel> model;
  if (fs::exists(done) && fs::exists(dir / "final.bin") && read_bytes(dir / "config.json") == text) {
    std::ifstream(done) >> s.seconds;
    model.emplace(model_from_checkpoint(load_checkpoint(dir / "final.bin")));
    std::cerr << "acceptance: reusing " << dir.string() << '\n';
  } else {
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::cerr << "acceptance: training " << dir.string() << '\n';
    const auto start = Clock::now();
    TrainingResult result = run_training(config, {dir, {}, -1, {}});
    s.seconds = seconds_since(start);
    model.emplace(std::move(result.model));
    std::ofstream(done) << fmt("%.3f\n", s.seconds);
  }

  ModelRestorer restorer(*model);
  EvalOptions options;
  options.seed = derive_seed(config.seeds.root, "heldout-eval");
  const EvalReport report = evaluate(restorer, heldout, options);
  s.chi = report.chi;
  for (int f = 0; f < 4; ++f) s.single_psnr += report.conditions[f].mean_psnr / 4.0;
  const int bands = options.bands, first = bands - bands / 4;
  int count = 0;
  for (const auto& condition : report.conditions) {
    s.entropy += condition.mean_entropy / static_cast<double>(report.conditions.size());
    for (int b = first; b < bands; ++b, ++count) s.top_quartile_mape += condition.mean_mape[b];
  }
  s.top_quartile_mape /= count;
  return s;
}

struct DeskResults {
  std::vector<RunSummary> none, align, dropout;
};

DeskResults desk_runs(const fs::path& cache, int seeds, bool with_align, bool with_dropout) {
  // Held-out images share no seed with any training set.
  const std::vector<Image> heldout = synthetic_dataset(16, 96, derive_seed(0xacce55ULL, "heldout"));
  DeskResults r;
  for (int s = 0; s < seeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    r.none.push_back(desk_run(desk_config(RegularizerKind::None, seed), cache, heldout));
    if (with_align) r.align.push_back(desk_run(desk_config(RegularizerKind::Align, seed), cache, heldout));
    if (with_dropout) r.dropout.push_back(desk_run(desk_config(RegularizerKind::Dropout, seed), cache, heldout));
    const auto& n = r.none.back();
    std::cerr << fmt("acceptance: seed %d none chi %.4g psnr4 %.4f entropy %.4f topq %.4f (%.0f s)\n", s, n.chi,
                     n.single_psnr, n.entropy, n.top_quartile_mape, n.seconds);
    if (with_align) {
      const auto& a = r.align.back();
      std::cerr << fmt("acceptance: seed %d align chi %.4g psnr4 %.4f (%.0f s)\n", s, a.chi, a.single_psnr, a.seconds);
    }
    if (with_dropout) {
      const auto& d = r.dropout.back();
      std::cerr << fmt("acceptance: seed %d dropout entropy %.4f topq %.4f (%.0f s)\n", s, d.entropy,
                       d.top_quartile_mape, d.seconds);
    }
  }
  return r;
}

Verdict training_direction(const DeskResults& r) {
  int chi_lower = 0, psnr_ge = 0;
  double slowest = 0.0;
  std::string chis, psnrs;
  for (std::size_t s = 0; s < r.none.size(); ++s) {
    chi_lower += r.align[s].chi < r.none[s].chi;
    psnr_ge += r.align[s].single_psnr >= r.none[s].single_psnr;
    slowest = std::max({slowest, r.align[s].seconds, r.none[s].seconds});
    chis += fmt(" %.3g/%.3g", r.align[s].chi, r.none[s].chi);
    psnrs += fmt(" %.3f/%.3f", r.align[s].single_psnr, r.none[s].single_psnr);
  }
  const int n = static_cast<int>(r.none.size());
  const int need = n - 1;
  return {chi_lower >= need && psnr_ge >= need && slowest < 1800.0,
          fmt("CHI align lower in %d/%d (align/none:%s); 4-condition PSNR align >= none in %d/%d (%s); slowest run "
              "%.0f s",
              chi_lower, n, chis.c_str(), psnr_ge, n, psnrs.c_str(), slowest)};
}

Verdict dropout_direction(const DeskResults& r) {
  int entropy_lower = 0, mape_higher = 0;
  std::string entropies, mapes;
  for (std::size_t s = 0; s < r.none.size(); ++s) {
    entropy_lower += r.dropout[s].entropy < r.none[s].entropy;
    mape_higher += r.dropout[s].top_quartile_mape > r.none[s].top_quartile_mape;
    entropies += fmt(" %.3f/%.3f", r.dropout[s].entropy, r.none[s].entropy);
    mapes += fmt(" %.3f/%.3f", r.dropout[s].top_quartile_mape, r.none[s].top_quartile_mape);
  }
  const int n = static_cast<int>(r.none.size());
  const int need = n - 1;
  return {entropy_lower >= need && mape_higher >= need,
          fmt("entropy dropout lower in %d/%d (dropout/none:%s); top-quartile MAPE dropout higher in %d/%d (%s)",
              entropy_lower, n, entropies.c_str(), mape_higher, n, mapes.c_str())};
}

// ---------------------------------------------------------------- 10

Verdict reproducibility(const fs::path& cli, const fs::path& scratch) {
  const fs::path root = scratch / "repro";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path config = root / "config.json";
  std::ofstream(config) << R"({
    "model": {"features": 8, "blocks": 2},
    "train": {"batch_size": 4, "patch_size": 16, "steps": 30, "checkpoint_every": 10},
    "data": {"num_images": 8, "image_size": 64},
    "regularizer": {"kind": "align", "alignment": {"mode": "nonlinear"}}
  })";
  const std::string train = quoted(cli) + " train --log-every 0 --config " + quoted(config);
  const fs::path a = root / "a", b = root / "b", c = root / "c";
  bool ok = run_command(train + " --out " + quoted(a)) == 0 && run_command(train + " --out " + quoted(b)) == 0;
  const bool repeat = ok && read_bytes(a / "metrics.csv") == read_bytes(b / "metrics.csv") &&
                      read_bytes(a / "final.bin") == read_bytes(b / "final.bin") &&
                      !read_bytes(a / "metrics.csv").empty();

  // Interrupted run: the directory holds rows past the checkpoint being resumed.
  fs::create_directories(c);
  fs::copy_file(a / "checkpoint_000010.bin", c / "checkpoint_000010.bin");
  fs::copy_file(a / "metrics.csv", c / "metrics.csv");
  ok = ok && run_command(train + " --resume " + quoted(c / "checkpoint_000010.bin") + " --out " + quoted(c)) == 0;
  const bool resume = ok && read_bytes(a / "metrics.csv") == read_bytes(c / "metrics.csv") &&
                      read_bytes(a / "final.bin") == read_bytes(c / "final.bin") &&
                      read_bytes(a / "checkpoint_000020.bin") == read_bytes(c / "checkpoint_000020.bin");

  // In-process repeat of a dropout run as well.
  TrainConfig dropout = parse_config(read_bytes(config)).config;
  dropout.regularizer.kind = RegularizerKind::Dropout;
  run_training(dropout, {root / "d1", {}, -1, {}});
  run_training(dropout, {root / "d2", {}, -1, {}});
  const bool dropout_repeat = read_bytes(root / "d1" / "metrics.csv") == read_bytes(root / "d2" / "metrics.csv");

  return {repeat && resume && dropout_repeat,
          fmt("repeated align run metrics/final identical %s, resume from step 10 bit-exact %s, repeated dropout "
              "run identical %s",
              repeat ? "yes" : "no", resume ? "yes" : "no", dropout_repeat ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks", "blindsr_acceptance"};
  std::string cache = "acceptance_cache", cli;
  std::vector<int> only;
  int seeds = 5;
  app.add_option("--cache", cache, "Directory for cached training runs")->capture_default_str();
  app.add_option("--cli", cli, "Path to the blindsr executable")->required();
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--seeds", seeds, "Seeds for the training-direction criteria")->check(CLI::Range(1, 100));
  CLI11_PARSE(app, argc, argv);

  const fs::path cache_dir = fs::absolute(cache), cli_path = fs::absolute(cli);
  const fs::path scratch = cache_dir / "scratch";
  fs::create_directories(scratch);
  auto wanted = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };

  int failures = 0;
  auto report = [&](int k, const std::function<Verdict()>& check) {
    if (!wanted(k)) return;
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << k << ": " << v.detail << std::endl;
  };

  report(1, gradient_suite);
  report(2, lemma_identity);
  report(3, moebius_identity);
  report(4, rff_fidelity);
  report(5, alignment_identities);
  report(6, [&] { return degradation_goldens(cli_path, scratch); });
  report(7, diagnostics_oracles);
  if (wanted(8) || wanted(9)) {
    std::optional<DeskResults> desk;
    try {
      desk = desk_runs(cache_dir, seeds, wanted(8), wanted(9));
    } catch (const std::exception& e) {
      std::cerr << "acceptance: desk-scale training failed: " << e.what() << '\n';
    }
    report(8, [&] { return desk ? training_direction(*desk) : Verdict{false, "training failed"}; });
    report(9, [&] { return desk ? dropout_direction(*desk) : Verdict{false, "training failed"}; });
  }
  report(10, [&] { return reproducibility(cli_path, scratch); });
  return failures == 0 ? 0 : 1;
}
