#include "blindsr/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "blindsr/config.hpp"
#include "blindsr/degradations.hpp"
#include "blindsr/diagnostics.hpp"
#include "blindsr/errors.hpp"
#include "blindsr/evaluation.hpp"
#include "blindsr/gradcheck_suite.hpp"
#include "blindsr/interaction.hpp"
#include "blindsr/parallel.hpp"
#include "blindsr/seed.hpp"
#include "blindsr/synthetic.hpp"
#include "blindsr/training.hpp"

namespace blindsr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string index_name(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05zu.png", k);
  return buf;
}

std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (fs::is_regular_file(dir)) return {dir};
  if (!fs::is_directory(dir)) throw IoError("no such image file or directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (entry.is_regular_file() && ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no PNG images in " + dir.string());
  return files;
}

std::vector<Image> read_pngs(const std::vector<fs::path>& files, int workers) {
  std::vector<Image> images(files.size());
  parallel_for(files.size(), workers, [&](std::size_t k) { images[k] = read_png(files[k]); });
  return images;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

// Every subcommand records what it resolved; output paths are left out so
// identical runs into different directories produce identical trees.
void write_manifest(const fs::path& dir, const std::string& subcommand, const json& resolved) {
  fs::create_directories(dir);
  const json manifest = {{"tool", "blindsr"},
                         {"version", std::string(kToolkitVersion)},
                         {"subcommand", subcommand},
                         {"resolved", resolved}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<DegradationFamily> parse_families(const std::string& list) {
  std::vector<DegradationFamily> families;
  if (list.empty() || list == "all") return {kAllFamilies.begin(), kAllFamilies.end()};
  std::stringstream ss(list);
  std::string name;
  while (std::getline(ss, name, ',')) {
    const auto f = family_from_name(name);
    if (!f) throw ConfigError("unknown degradation family '" + name + "'");
    families.push_back(*f);
  }
  return families;
}

json family_names(const std::vector<DegradationFamily>& families) {
  json names = json::array();
  for (DegradationFamily f : families) names.push_back(family_name(f));
  return names;
}

TrainConfig load_or_default(const std::string& path) {
  if (!path.empty()) return load_config(path).config;
  LoadedConfig loaded = parse_config("");
  for (const std::string& d : loaded.defaulted) std::cerr << "config: default " << d << '\n';
  return loaded.config;
}

// Restorer selected by --checkpoint or --identity; the model is owned here.
struct RestorerChoice {
  std::optional<ToyModel> model;
  std::unique_ptr<Restorer> restorer;
  json description;
};

RestorerChoice choose_restorer(const std::string& checkpoint, bool identity) {
  RestorerChoice choice;
  if (identity == !checkpoint.empty()) throw ConfigError("give exactly one of --checkpoint or --identity");
  if (identity) {
    choice.restorer = std::make_unique<IdentityRestorer>();
    choice.description = {{"restorer", "identity"}};
    return choice;
  }
  const Checkpoint ck = load_checkpoint(checkpoint);
  choice.model.emplace(model_from_checkpoint(ck));
  choice.restorer = std::make_unique<ModelRestorer>(*choice.model);
  choice.description = {{"restorer", "model"},
                        {"checkpoint_step", ck.step},
                        {"config", json::parse(ck.config_json)}};
  return choice;
}

struct Common {
  std::string out;
  std::uint64_t seed = 0;
  int workers = 1;
};

void add_common(CLI::App* cmd, Common& c, const std::string& default_out) {
  c.out = default_out;
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Root seed")->capture_default_str();
  cmd->add_option("--workers", c.workers, "Worker threads for image rendering")
      ->check(CLI::Range(1, 256))
      ->capture_default_str();
}

// ---------------------------------------------------------------- degrade

struct DegradeArgs {
  Common common;
  std::string input;
  std::string config;
  Index count = 8;
  Index size = 128;
  bool paired = false;
};

int run_degrade(const DegradeArgs& a, std::ostream& out) {
  TrainConfig config = load_or_default(a.config);
  const DegradationRanges& ranges = config.degradation;
  const int scale = ranges.target_scale;
  std::vector<Image> hr;
  if (a.input.empty()) {
    hr = synthetic_dataset(a.count, a.size, derive_seed(a.common.seed, "data"), a.common.workers);
  } else {
    hr = read_pngs(list_pngs(a.input), a.common.workers);
  }
  const fs::path dir(a.common.out);
  for (const char* sub : a.paired ? std::vector<const char*>{"hr", "lr1", "lr2", "recipes"}
                                  : std::vector<const char*>{"hr", "lr", "recipes"})
    fs::create_directories(dir / sub);
  const std::uint64_t root = derive_seed(a.common.seed, "degrade");
  parallel_for(hr.size(), a.common.workers, [&](std::size_t k) {
    const Image& src = hr[k];
    const Image image = src.crop(0, 0, src.height / scale * scale, src.width / scale * scale);
    const std::uint64_t seed = derive_seed(root, k);
    const std::string name = index_name(k);
    write_png(dir / "hr" / name, image);
    json recipes;
    if (a.paired) {
      const PairedSample pair = generate_paired_sample(image, ranges, seed);
      write_png(dir / "lr1" / name, pair.lr1);
      write_png(dir / "lr2" / name, pair.lr2);
      recipes = {{"lr1", pair.recipe1}, {"lr2", pair.recipe2}};
    } else {
      const DegradationRecipe recipe = sample_second_order_recipe(ranges, seed);
      write_png(dir / "lr" / name, degrade(image, recipe));
      recipes = {{"lr", recipe}};
    }
    write_text(dir / "recipes" / (name.substr(0, name.size() - 4) + ".json"), recipes.dump(2) + "\n");
  });
  json ranges_json;
  to_json(ranges_json, ranges);
  write_manifest(dir, "degrade",
                 {{"seed", a.common.seed},
                  {"paired", a.paired},
                  {"source", a.input.empty() ? json{{"synthetic", {{"count", a.count}, {"size", a.size}}}}
                                             : json{{"directory", a.input}}},
                  {"images", hr.size()},
                  {"degradation", ranges_json}});
  out << "degrade: wrote " << hr.size() << (a.paired ? " paired samples" : " samples") << " to " << dir.string()
      << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string out = "runs/train";
  std::string config;
  std::string resume;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> steps;
  std::optional<int> workers;
  std::int64_t log_every = 100;
};

int run_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig config;
  if (a.config.empty() && !a.resume.empty()) {
    config = config_from_checkpoint(load_checkpoint(a.resume));
  } else {
    config = load_or_default(a.config);
  }
  if (a.seed) config.seeds.root = *a.seed;
  if (a.steps) config.steps = *a.steps;
  if (a.workers) config.data.workers = *a.workers;
  validate(config);

  TrainingOptions options;
  options.out_dir = a.out;
  if (!a.resume.empty()) options.resume = fs::path(a.resume);
  options.on_step = [&](const MetricRow& row) {
    if (a.log_every > 0 && (row.step % a.log_every == 0 || row.step == config.steps)) {
      out << "step " << row.step << "/" << config.steps << " lr " << row.lr << " l1 " << row.loss.l1
          << " regularizer " << row.loss.regularizer << '\n'
          << std::flush;
    }
  };
  write_manifest(a.out, "train", {{"config", to_json(config)}, {"resumed", !a.resume.empty()}});
  const TrainingResult result = run_training(config, options);
  out << "train: " << result.state.step << " steps complete, checkpoint in " << a.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct ImageSource {
  std::string images;
  Index count = 16;
  Index size = 128;
  std::optional<std::uint64_t> image_seed;
};

void add_image_source(CLI::App* cmd, ImageSource& s) {
  cmd->add_option("--images", s.images, "Directory (or file) of HR PNG images; synthetic when omitted");
  cmd->add_option("--count", s.count, "Synthetic image count")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--size", s.size, "Synthetic image side length")->check(CLI::Range(8, 4096))->capture_default_str();
  cmd->add_option("--image-seed", s.image_seed, "Synthetic image seed (default: derived from --seed)");
}

std::vector<Image> load_source(const ImageSource& s, std::uint64_t root, int workers, json& description) {
  if (!s.images.empty()) {
    description = {{"directory", s.images}};
    return read_pngs(list_pngs(s.images), workers);
  }
  const std::uint64_t seed = s.image_seed.value_or(derive_seed(root, "test"));
  description = {{"synthetic", {{"count", s.count}, {"size", s.size}, {"seed", seed}}}};
  return synthetic_dataset(s.count, s.size, seed, workers);
}

struct EvalArgs {
  Common common;
  ImageSource source;
  std::string checkpoint;
  bool identity = false;
  std::string families = "all";
  std::string tap = "tail_input";
  int bands = 16;
  std::string metrics = "psnr,mape,entropy,ddr";
  bool svg = false;
};

int run_eval(const EvalArgs& a, std::ostream& out) {
  EvalOptions options;
  options.families = parse_families(a.families);
  options.tap = parse_tap(a.tap);
  options.bands = a.bands;
  options.seed = derive_seed(a.common.seed, "eval-noise");
  options.workers = a.common.workers;
  options.psnr = options.mape = options.entropy = options.ddr = false;
  std::stringstream ss(a.metrics);
  for (std::string m; std::getline(ss, m, ',');) {
    if (m == "psnr") options.psnr = true;
    else if (m == "mape") options.mape = true;
    else if (m == "entropy") options.entropy = true;
    else if (m == "ddr") options.ddr = true;
    else throw ConfigError("unknown metric '" + m + "' (psnr, mape, entropy, ddr)");
  }
  RestorerChoice choice = choose_restorer(a.checkpoint, a.identity);
  json source;
  const std::vector<Image> images = load_source(a.source, a.common.seed, a.common.workers, source);
  const EvalReport report = evaluate(*choice.restorer, images, options);
  write_eval_report(report, options, a.common.out);
  if (!a.svg) fs::remove(fs::path(a.common.out) / "mape_chart.svg");
  write_manifest(a.common.out, "eval",
                 {{"model", choice.description},
                  {"images", source},
                  {"families", family_names(options.families)},
                  {"tap", tap_name(options.tap)},
                  {"bands", options.bands},
                  {"metrics", a.metrics},
                  {"noise_seed", options.seed},
                  {"mape_aggregation", "per-image band MAPE, then mean over images"}});
  for (const auto& c : report.conditions) {
    out << family_name(c.family) << ": psnr " << std::min(c.mean_psnr, kPsnrCsvCap) << " entropy "
        << c.mean_entropy << '\n';
  }
  out << "chi " << report.chi << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- analyze-freq

struct FreqArgs {
  std::string out = "runs/analyze-freq";
  std::string pred;
  std::string gt;
  int bands = 16;
  bool svg = false;
};

int run_analyze_freq(const FreqArgs& a, std::ostream& out) {
  const auto pred_files = list_pngs(a.pred), gt_files = list_pngs(a.gt);
  if (pred_files.size() != gt_files.size()) {
    throw ContractError("analyze-freq: " + std::to_string(pred_files.size()) + " predictions but " +
                        std::to_string(gt_files.size()) + " references");
  }
  fs::create_directories(a.out);
  std::ofstream csv(fs::path(a.out) / "mape.csv");
  csv << "image,band,band_low,band_high,mape\n";
  std::vector<double> mean(static_cast<std::size_t>(a.bands), 0.0);
  for (std::size_t k = 0; k < pred_files.size(); ++k) {
    const SpectrumReport r = radial_band_mape(read_png(pred_files[k]), read_png(gt_files[k]), a.bands);
    for (std::size_t b = 0; b < r.mape_per_band.size(); ++b) {
      csv << pred_files[k].filename().string() << ',' << b << ',' << num(r.band_edges[b]) << ','
          << num(r.band_edges[b + 1]) << ',' << num(r.mape_per_band[b]) << '\n';
      mean[b] += r.mape_per_band[b] / static_cast<double>(pred_files.size());
    }
  }
  std::ofstream summary(fs::path(a.out) / "mape_mean.csv");
  summary << "band,mape\n";
  for (std::size_t b = 0; b < mean.size(); ++b) summary << b << ',' << num(mean[b]) << '\n';
  if (a.svg) {
    EvalReport chart;
    ConditionReport c;
    c.mean_mape = mean;
    chart.conditions.push_back(c);
    write_text(fs::path(a.out) / "mape_chart.svg", mape_chart_svg(chart));
  }
  write_manifest(a.out, "analyze-freq",
                 {{"pred", a.pred}, {"gt", a.gt}, {"bands", a.bands}, {"images", pred_files.size()}});
  out << "analyze-freq: " << pred_files.size() << " image pairs\n";
  return kExitOk;
}

// ---------------------------------------------------------------- analyze-entropy

struct EntropyArgs {
  Common common;
  std::string images;
  std::string checkpoint;
  bool identity = false;
  std::string tap = "tail_input";
  int bands = 16;
};

int run_analyze_entropy(const EntropyArgs& a, std::ostream& out) {
  const TapPoint tap = parse_tap(a.tap);
  RestorerChoice choice = choose_restorer(a.checkpoint, a.identity);
  const auto files = list_pngs(a.images);
  const auto images = read_pngs(files, a.common.workers);
  std::vector<ChannelEntropy> results(images.size());
  parallel_for(images.size(), a.common.workers, [&](std::size_t k) {
    results[k] = channel_frequency_entropy(choice.restorer->features(images[k], tap), a.bands);
  });
  fs::create_directories(a.common.out);
  std::ofstream bands(fs::path(a.common.out) / "dominant_bands.csv");
  bands << "image,channel,dominant_band\n";
  std::ofstream entropy(fs::path(a.common.out) / "entropy.csv");
  entropy << "image,entropy_bits\n";
  double mean = 0.0;
  for (std::size_t k = 0; k < images.size(); ++k) {
    const std::string name = files[k].filename().string();
    for (std::size_t c = 0; c < results[k].dominant_band.size(); ++c)
      bands << name << ',' << c << ',' << results[k].dominant_band[c] << '\n';
    entropy << name << ',' << num(results[k].entropy_bits) << '\n';
    mean += results[k].entropy_bits / static_cast<double>(images.size());
  }
  entropy << "mean," << num(mean) << '\n';
  write_manifest(a.common.out, "analyze-entropy",
                 {{"model", choice.description}, {"images", a.images}, {"tap", a.tap}, {"bands", a.bands}});
  out << "analyze-entropy: mean entropy " << mean << " bits over " << images.size() << " images\n";
  return kExitOk;
}

// ---------------------------------------------------------------- analyze-ddr

struct DdrArgs {
  Common common;
  ImageSource source;
  std::string checkpoint;
  bool identity = false;
  std::string tap = "tail_input";
  std::string families = "all";
};

int run_analyze_ddr(const DdrArgs& a, std::ostream& out) {
  const TapPoint tap = parse_tap(a.tap);
  const auto families = parse_families(a.families);
  RestorerChoice choice = choose_restorer(a.checkpoint, a.identity);
  json source;
  const std::vector<Image> hr = load_source(a.source, a.common.seed, a.common.workers, source);
  const int scale = choice.restorer->scale();
  std::vector<Image> lr;
  std::vector<std::string> labels;
  const std::uint64_t noise = derive_seed(a.common.seed, "eval-noise");
  for (std::size_t f = 0; f < families.size(); ++f) {
    const auto fam = static_cast<std::uint64_t>(
        std::find(kAllFamilies.begin(), kAllFamilies.end(), families[f]) - kAllFamilies.begin());
    for (std::size_t i = 0; i < hr.size(); ++i) {
      const Image image = hr[i].crop(0, 0, hr[i].height / scale * scale, hr[i].width / scale * scale);
      lr.push_back(degrade(image, family_recipe(families[f], scale, derive_seed(noise, fam, i))));
      labels.emplace_back(family_name(families[f]));
    }
  }
  const DdrSet ddr = extract_ddr(*choice.restorer, lr, labels, tap, a.common.workers);
  const double chi = calinski_harabasz(ddr);
  fs::create_directories(a.common.out);
  std::ofstream csv(fs::path(a.common.out) / "ddr.csv");
  csv << "label,image";
  for (Index c = 0; c < ddr.vectors.front().size(); ++c) csv << ",f" << c;
  csv << '\n';
  for (std::size_t k = 0; k < ddr.vectors.size(); ++k) {
    csv << ddr.labels[k] << ',' << k % hr.size();
    for (Index c = 0; c < ddr.vectors[k].size(); ++c) csv << ',' << num(ddr.vectors[k][c]);
    csv << '\n';
  }
  write_text(fs::path(a.common.out) / "chi.csv", "tap,vectors,labels,chi\n" + std::string(tap_name(tap)) + ',' +
                                                   std::to_string(ddr.vectors.size()) + ',' +
                                                   std::to_string(families.size()) + ',' + num(chi) + '\n');
  write_manifest(a.common.out, "analyze-ddr",
                 {{"model", choice.description},
                  {"images", source},
                  {"families", family_names(families)},
                  {"tap", a.tap},
                  {"noise_seed", noise}});
  out << "analyze-ddr: chi " << chi << " over " << ddr.vectors.size() << " vectors\n";
  return kExitOk;
}

// ---------------------------------------------------------------- verify-lemma

struct LemmaArgs {
  Common common;
  int games = 100;
  int players = 6;
  double tol = 1e-9;
};

int run_verify_lemma(const LemmaArgs& a, std::ostream& out) {
  fs::create_directories(a.common.out);
  std::ofstream csv(fs::path(a.common.out) / "lemma.csv");
  csv << "seed,i,j,s,r,lhs,rhs,abs_diff\n";
  std::ofstream bound(fs::path(a.common.out) / "nonnegative_bound.csv");
  bound << "seed,i,j,s,r,ratio\n";
  double worst = 0.0, worst_ratio = 0.0;
  std::size_t checked = 0, degenerate = 0, bound_checked = 0;
  bool ok = true;
  for (int g = 0; g < a.games; ++g) {
    const std::uint64_t seed = derive_seed(a.common.seed, static_cast<std::uint64_t>(g));
    const CooperativeGame game = CooperativeGame::random(a.players, seed);
    const CooperativeGame positive = CooperativeGame::random_nonnegative_dividends(a.players, seed);
    for (int i = 0; i < a.players; ++i) {
      for (int j = i + 1; j < a.players; ++j) {
        for (int s = 0; s <= a.players - 2; ++s) {
          for (int r = 0; r <= s; ++r) {
            try {
              const LemmaRatio lr = lemma_ratio(game, i, j, s, r);
              const double diff = std::abs(lr.lhs - lr.rhs);
              worst = std::max(worst, diff);
              ok = ok && diff < a.tol;
              ++checked;
              csv << seed << ',' << i << ',' << j << ',' << s << ',' << r << ',' << num(lr.lhs) << ','
                  << num(lr.rhs) << ',' << num(diff) << '\n';
            } catch (const DegenerateInputError&) {
              ++degenerate;
            }
            if (r < s) {
              const LemmaRatio pr = lemma_ratio(positive, i, j, s, r);
              worst_ratio = std::max(worst_ratio, pr.lhs);
              ok = ok && pr.lhs <= 1.0 + 1e-12;
              ++bound_checked;
              bound << seed << ',' << i << ',' << j << ',' << s << ',' << r << ',' << num(pr.lhs) << '\n';
            }
          }
        }
      }
    }
  }
  write_manifest(a.common.out, "verify-lemma",
                 {{"seed", a.common.seed}, {"games", a.games}, {"players", a.players}, {"tol", a.tol}});
  out << "verify-lemma: " << checked << " (s, r) checks, max |lhs - rhs| = " << worst << ", " << degenerate
      << " skipped with |I^(s)| < 1e-12; " << bound_checked << " nonnegative-dividend checks, max ratio "
      << worst_ratio << '\n';
  out << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------- verify-gradcheck

struct GradArgs {
  Common common;
  int seeds = 10;
  double tol = 1e-4;
};

int run_verify_gradcheck(const GradArgs& a, std::ostream& out) {
  const auto results = run_gradcheck_suite(a.seeds, a.common.seed, a.tol);
  fs::create_directories(a.common.out);
  std::ofstream csv(fs::path(a.common.out) / "gradcheck.csv");
  csv << "case,seed,max_relative_error,passed\n";
  std::map<std::string, std::pair<double, bool>> summary;
  bool ok = true;
  for (const GradCheckCase& c : results) {
    csv << c.name << ',' << c.seed << ',' << num(c.report.max_relative_error) << ',' << c.report.passed << '\n';
    auto& [worst, passed] = summary.try_emplace(c.name, 0.0, true).first->second;
    worst = std::max(worst, c.report.max_relative_error);
    passed = passed && c.report.passed;
    ok = ok && c.report.passed;
    if (c.report.failure) out << c.name << " seed " << c.seed << ": " << *c.report.failure << '\n';
  }
  for (const std::string& name : gradcheck_case_names()) {
    const auto& [worst, passed] = summary.at(name);
    out << (passed ? "PASS " : "FAIL ") << name << " max relative error " << worst << '\n';
  }
  write_manifest(a.common.out, "verify-gradcheck", {{"seed", a.common.seed}, {"seeds", a.seeds}, {"tol", a.tol}});
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Degradation-invariant feature alignment toolkit for blind super-resolution", "blindsr"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolkitVersion));

  DegradeArgs degrade_args;
  CLI::App* degrade_cmd = app.add_subcommand("degrade", "Render (paired) second-order degraded LR images");
  add_common(degrade_cmd, degrade_args.common, "runs/degrade");
  degrade_cmd->add_option("--input", degrade_args.input, "HR PNG directory; synthetic images when omitted");
  degrade_cmd->add_option("--config", degrade_args.config, "Configuration file (degradation section)");
  degrade_cmd->add_option("--count", degrade_args.count, "Synthetic image count")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  degrade_cmd->add_option("--size", degrade_args.size, "Synthetic image side length")
      ->check(CLI::Range(8, 4096))
      ->capture_default_str();
  degrade_cmd->add_flag("--paired", degrade_args.paired, "Render two independent views per image");

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "Train the toy restoration model");
  train_cmd->add_option("--out", train_args.out, "Run directory")->capture_default_str();
  train_cmd->add_option("--config", train_args.config, "Configuration file (JSON)");
  train_cmd->add_option("--resume", train_args.resume, "Checkpoint to resume from");
  train_cmd->add_option("--seed", train_args.seed, "Override the root seed");
  train_cmd->add_option("--steps", train_args.steps, "Override the number of steps")->check(CLI::PositiveNumber);
  train_cmd->add_option("--workers", train_args.workers, "Override data rendering workers")
      ->check(CLI::Range(1, 256));
  train_cmd->add_option("--log-every", train_args.log_every, "Progress line interval (0: silent)")
      ->capture_default_str();

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate over the eight degradation conditions");
  add_common(eval_cmd, eval_args.common, "runs/eval");
  add_image_source(eval_cmd, eval_args.source);
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "Trained model checkpoint");
  eval_cmd->add_flag("--identity", eval_args.identity, "Evaluate the scale-1 identity restorer");
  eval_cmd->add_option("--families", eval_args.families, "Comma-separated conditions or 'all'")
      ->capture_default_str();
  eval_cmd->add_option("--tap", eval_args.tap, "Feature tap point")->capture_default_str();
  eval_cmd->add_option("--bands", eval_args.bands, "Radial frequency bands")
      ->check(CLI::Range(1, 1024))
      ->capture_default_str();
  eval_cmd->add_option("--metrics", eval_args.metrics, "Comma-separated subset of psnr,mape,entropy,ddr")
      ->capture_default_str();
  eval_cmd->add_flag("--svg", eval_args.svg, "Also write an SVG chart of band MAPE");

  FreqArgs freq_args;
  CLI::App* freq_cmd = app.add_subcommand("analyze-freq", "Radial-band spectral MAPE between image sets");
  freq_cmd->add_option("--out", freq_args.out, "Output directory")->capture_default_str();
  freq_cmd->add_option("--pred", freq_args.pred, "Restored PNG file or directory")->required();
  freq_cmd->add_option("--gt", freq_args.gt, "Reference PNG file or directory")->required();
  freq_cmd->add_option("--bands", freq_args.bands, "Radial bands")->check(CLI::Range(1, 1024))->capture_default_str();
  freq_cmd->add_flag("--svg", freq_args.svg, "Also write an SVG chart");

  EntropyArgs entropy_args;
  CLI::App* entropy_cmd = app.add_subcommand("analyze-entropy", "Dominant-band channel entropy at a tap");
  add_common(entropy_cmd, entropy_args.common, "runs/analyze-entropy");
  entropy_cmd->add_option("--images", entropy_args.images, "LR PNG file or directory")->required();
  entropy_cmd->add_option("--checkpoint", entropy_args.checkpoint, "Trained model checkpoint");
  entropy_cmd->add_flag("--identity", entropy_args.identity, "Use the input pixels as features");
  entropy_cmd->add_option("--tap", entropy_args.tap, "Feature tap point")->capture_default_str();
  entropy_cmd->add_option("--bands", entropy_args.bands, "Radial bands")
      ->check(CLI::Range(1, 1024))
      ->capture_default_str();

  DdrArgs ddr_args;
  CLI::App* ddr_cmd = app.add_subcommand("analyze-ddr", "Pooled tap features and their CHI across conditions");
  add_common(ddr_cmd, ddr_args.common, "runs/analyze-ddr");
  add_image_source(ddr_cmd, ddr_args.source);
  ddr_cmd->add_option("--checkpoint", ddr_args.checkpoint, "Trained model checkpoint");
  ddr_cmd->add_flag("--identity", ddr_args.identity, "Use the input pixels as features");
  ddr_cmd->add_option("--tap", ddr_args.tap, "Feature tap point")->capture_default_str();
  ddr_cmd->add_option("--families", ddr_args.families, "Comma-separated conditions or 'all'")
      ->capture_default_str();

  LemmaArgs lemma_args;
  CLI::App* lemma_cmd = app.add_subcommand("verify-lemma", "Check the dropout interaction ratio identity");
  add_common(lemma_cmd, lemma_args.common, "runs/verify-lemma");
  lemma_cmd->add_option("--games", lemma_args.games, "Random games")->check(CLI::PositiveNumber)->capture_default_str();
  lemma_cmd->add_option("--players", lemma_args.players, "Players per game")
      ->check(CLI::Range(2, 12))
      ->capture_default_str();
  lemma_cmd->add_option("--tol", lemma_args.tol, "Absolute tolerance")->capture_default_str();

  GradArgs grad_args;
  CLI::App* grad_cmd = app.add_subcommand("verify-gradcheck", "Finite-difference check of every differentiable op");
  add_common(grad_cmd, grad_args.common, "runs/verify-gradcheck");
  grad_cmd->add_option("--seeds", grad_args.seeds, "Consecutive seeds")->check(CLI::PositiveNumber)->capture_default_str();
  grad_cmd->add_option("--tol", grad_args.tol, "Relative tolerance")->capture_default_str();

  if (args.empty()) {
    err << app.help();
    return kExitUsage;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolkitVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "degrade") return run_degrade(degrade_args, out);
    if (name == "train") return run_train(train_args, out);
    if (name == "eval") return run_eval(eval_args, out);
    if (name == "analyze-freq") return run_analyze_freq(freq_args, out);
    if (name == "analyze-entropy") return run_analyze_entropy(entropy_args, out);
    if (name == "analyze-ddr") return run_analyze_ddr(ddr_args, out);
    if (name == "verify-lemma") return run_verify_lemma(lemma_args, out);
    if (name == "verify-gradcheck") return run_verify_gradcheck(grad_args, out);
  } catch (const ConfigError& e) {
    err << "error: " << name << ": " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << name << ": " << e.what() << '\n';
    return kExitFailure;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace blindsr
