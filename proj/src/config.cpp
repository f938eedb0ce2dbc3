#include "blindsr/config.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "blindsr/errors.hpp"
#include "blindsr/seed.hpp"

namespace blindsr {

using nlohmann::json;

std::string_view regularizer_name(RegularizerKind kind) {
  switch (kind) {
    case RegularizerKind::None: return "none";
    case RegularizerKind::Dropout: return "dropout";
    case RegularizerKind::Align: return "align";
    case RegularizerKind::BruteForce: return "brute_force";
  }
  return "unknown";
}

std::string_view supervision_name(Supervision s) { return s == Supervision::Both ? "both" : "first"; }

std::uint64_t SeedConfig::data_seed() const { return data.value_or(derive_seed(root, "data")); }
std::uint64_t SeedConfig::init_seed() const { return init.value_or(derive_seed(root, "init")); }
std::uint64_t SeedConfig::dropout_seed() const { return dropout.value_or(derive_seed(root, "dropout")); }
std::uint64_t SeedConfig::rff_seed() const { return rff.value_or(derive_seed(root, "rff")); }

AlignmentConfig TrainConfig::alignment() const {
  AlignmentConfig a = regularizer.alignment;
  a.rff_seed = seeds.rff_seed();
  return a;
}

namespace {

// Walks one JSON section, recording defaults, unknown keys and type errors.
class Reader {
 public:
  std::vector<std::string> errors;
  std::vector<std::string> defaulted;

  const json* section(const json& parent, const std::string& name) {
    if (!parent.contains(name)) return nullptr;
    const json& s = parent.at(name);
    if (!s.is_object()) {
      errors.push_back(name + ": expected an object");
      return nullptr;
    }
    return &s;
  }

  void allow(const json* obj, const std::string& prefix, std::initializer_list<std::string_view> keys) {
    if (!obj) return;
    for (const auto& item : obj->items()) {
      bool known = false;
      for (std::string_view k : keys) known = known || item.key() == k;
      if (!known) errors.push_back(prefix + item.key() + ": unknown key");
    }
  }

  template <typename T>
  void get(const json* obj, const std::string& prefix, const char* key, T& out) {
    if (!obj || !obj->contains(key)) {
      defaulted.push_back(prefix + key + " = " + json(out).dump());
      return;
    }
    const json& v = obj->at(key);
    try {
      if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && !v.is_number_unsigned()) throw std::invalid_argument("must be >= 0");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("expected a number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("expected true or false");
      }
      out = v.get<T>();
    } catch (const std::exception& e) {
      errors.push_back(prefix + key + ": " + e.what());
    }
  }

  void seed(const json* obj, const std::string& prefix, const char* key, std::optional<std::uint64_t>& out,
            std::uint64_t derived) {
    if (!obj || !obj->contains(key)) {
      defaulted.push_back(prefix + key + " = " + std::to_string(derived) + " (derived from root)");
      return;
    }
    std::uint64_t value = 0;
    get(obj, prefix, key, value);
    out = value;
  }

  template <typename Enum, typename Parse, typename Name>
  void choice(const json* obj, const std::string& prefix, const char* key, Enum& out, Parse parse, Name name) {
    std::string text(name(out));
    get(obj, prefix, key, text);
    if (!obj || !obj->contains(key)) return;
    try {
      out = parse(text);
    } catch (const std::exception& e) {
      errors.push_back(prefix + key + ": " + e.what());
    }
  }

  void range(const json* obj, const std::string& prefix, const char* key, Range& out) {
    if (!obj || !obj->contains(key)) {
      defaulted.push_back(prefix + key + " = [" + json(out.min).dump() + ", " + json(out.max).dump() + "]");
      return;
    }
    const json& v = obj->at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      errors.push_back(prefix + key + ": expected a [min, max] pair of numbers");
      return;
    }
    out = Range{v[0].get<double>(), v[1].get<double>()};
  }
};

RegularizerKind regularizer_from_name(std::string_view name) {
  for (RegularizerKind k :
       {RegularizerKind::None, RegularizerKind::Dropout, RegularizerKind::Align, RegularizerKind::BruteForce})
    if (regularizer_name(k) == name) return k;
  throw ConfigError("unknown regularizer '" + std::string(name) + "' (none, dropout, align, brute_force)");
}

Supervision supervision_from_name(std::string_view name) {
  if (name == "both") return Supervision::Both;
  if (name == "first") return Supervision::First;
  throw ConfigError("unknown supervision '" + std::string(name) + "' (both, first)");
}

void read_model(Reader& r, const json* s, ModelConfig& m) {
  const std::string p = "model.";
  r.allow(s, p, {"image_channels", "features", "blocks", "scale", "kernel_size", "slope", "image_skip", "bias"});
  r.get(s, p, "image_channels", m.image_channels);
  r.get(s, p, "features", m.features);
  r.get(s, p, "blocks", m.blocks);
  r.get(s, p, "scale", m.scale);
  r.get(s, p, "kernel_size", m.kernel_size);
  r.get(s, p, "slope", m.slope);
  r.get(s, p, "image_skip", m.image_skip);
  r.get(s, p, "bias", m.bias);
}

void read_train(Reader& r, const json* s, TrainConfig& c) {
  const std::string p = "train.";
  r.allow(s, p,
          {"batch_size", "patch_size", "steps", "base_lr", "min_lr", "beta1", "beta2", "eps", "cosine_period",
           "checkpoint_every", "supervise"});
  r.get(s, p, "batch_size", c.batch_size);
  r.get(s, p, "patch_size", c.patch_size);
  r.get(s, p, "steps", c.steps);
  r.get(s, p, "base_lr", c.base_lr);
  r.get(s, p, "min_lr", c.min_lr);
  r.get(s, p, "beta1", c.adam.beta1);
  r.get(s, p, "beta2", c.adam.beta2);
  r.get(s, p, "eps", c.adam.eps);
  r.get(s, p, "cosine_period", c.cosine_period);
  r.get(s, p, "checkpoint_every", c.checkpoint_every);
  r.choice(s, p, "supervise", c.supervise, supervision_from_name, supervision_name);
}

void read_regularizer(Reader& r, const json* s, RegularizerConfig& g) {
  const std::string p = "regularizer.";
  r.allow(s, p, {"kind", "keep_prob", "brute_force_weight", "alignment"});
  r.choice(s, p, "kind", g.kind, regularizer_from_name, regularizer_name);
  r.get(s, p, "keep_prob", g.keep_prob);
  r.get(s, p, "brute_force_weight", g.brute_force_weight);
  const json* a = s ? r.section(*s, "alignment") : nullptr;
  const std::string pa = "regularizer.alignment.";
  r.allow(a, pa, {"mode", "rff_dim", "weight", "covariance_convention"});
  r.choice(a, pa, "mode", g.alignment.mode, mode_from_name, mode_name);
  r.get(a, pa, "rff_dim", g.alignment.rff_dim);
  r.get(a, pa, "weight", g.alignment.weight);
  r.choice(a, pa, "covariance_convention", g.alignment.covariance_convention, convention_from_name,
           convention_name);
}

void read_seeds(Reader& r, const json* s, SeedConfig& seeds) {
  const std::string p = "seeds.";
  r.allow(s, p, {"root", "data", "init", "dropout", "rff"});
  r.get(s, p, "root", seeds.root);
  r.seed(s, p, "data", seeds.data, derive_seed(seeds.root, "data"));
  r.seed(s, p, "init", seeds.init, derive_seed(seeds.root, "init"));
  r.seed(s, p, "dropout", seeds.dropout, derive_seed(seeds.root, "dropout"));
  r.seed(s, p, "rff", seeds.rff, derive_seed(seeds.root, "rff"));
}

void read_data(Reader& r, const json* s, DataConfig& d) {
  const std::string p = "data.";
  r.allow(s, p, {"source", "directory", "num_images", "image_size", "workers"});
  r.get(s, p, "source", d.source);
  r.get(s, p, "directory", d.directory);
  r.get(s, p, "num_images", d.num_images);
  r.get(s, p, "image_size", d.image_size);
  r.get(s, p, "workers", d.workers);
}

void read_degradation(Reader& r, const json* s, DegradationRanges& d) {
  const std::string p = "degradation.";
  r.allow(s, p,
          {"kernel_size", "blur_sigma", "blur_theta", "resize_scale", "resize_methods", "noise_sigma",
           "jpeg_quality", "rounds", "target_scale"});
  r.get(s, p, "kernel_size", d.kernel_size);
  r.range(s, p, "blur_sigma", d.blur_sigma);
  r.range(s, p, "blur_theta", d.blur_theta);
  r.range(s, p, "resize_scale", d.resize_scale);
  r.range(s, p, "noise_sigma", d.noise_sigma);
  r.range(s, p, "jpeg_quality", d.jpeg_quality);
  r.get(s, p, "rounds", d.rounds);
  r.get(s, p, "target_scale", d.target_scale);
  if (!s || !s->contains("resize_methods")) {
    json names = json::array();
    for (ResizeMethod m : d.resize_methods) names.push_back(method_name(m));
    r.defaulted.push_back(p + "resize_methods = " + names.dump());
    return;
  }
  const json& v = s->at("resize_methods");
  if (!v.is_array()) {
    r.errors.push_back(p + "resize_methods: expected an array of method names");
    return;
  }
  d.resize_methods.clear();
  for (const json& m : v) {
    try {
      d.resize_methods.push_back(method_from_name(m.get<std::string>()));
    } catch (const std::exception& e) {
      r.errors.push_back(p + "resize_methods: " + e.what());
    }
  }
}

template <typename F>
void collect(std::vector<std::string>& errors, const std::string& prefix, F&& check) {
  try {
    check();
  } catch (const std::exception& e) {
    errors.push_back(prefix + e.what());
  }
}

std::vector<std::string> violations(const TrainConfig& c) {
  std::vector<std::string> e;
  auto require = [&e](bool ok, const std::string& message) {
    if (!ok) e.push_back(message);
  };
  collect(e, "model: ", [&] { validate(c.model); });
  require(c.batch_size >= 1, "train.batch_size must be >= 1");
  require(c.patch_size >= 2, "train.patch_size must be >= 2");
  require(c.steps >= 1, "train.steps must be >= 1");
  require(std::isfinite(c.base_lr) && c.base_lr > 0.0, "train.base_lr must be a positive finite number");
  require(std::isfinite(c.min_lr) && c.min_lr >= 0.0 && c.min_lr <= c.base_lr,
          "train.min_lr must lie in [0, base_lr]");
  require(c.adam.beta1 >= 0.0 && c.adam.beta1 < 1.0, "train.beta1 must lie in [0, 1)");
  require(c.adam.beta2 >= 0.0 && c.adam.beta2 < 1.0, "train.beta2 must lie in [0, 1)");
  require(c.adam.eps > 0.0 && std::isfinite(c.adam.eps), "train.eps must be positive");
  require(c.cosine_period == 0 || c.cosine_period >= c.steps, "train.cosine_period must be 0 or >= steps");
  require(c.checkpoint_every >= 0, "train.checkpoint_every must be >= 0");
  require(c.regularizer.keep_prob > 0.0 && c.regularizer.keep_prob <= 1.0,
          "regularizer.keep_prob must lie in (0, 1]");
  require(std::isfinite(c.regularizer.brute_force_weight) && c.regularizer.brute_force_weight >= 0.0,
          "regularizer.brute_force_weight must be finite and >= 0");
  collect(e, "regularizer.alignment: ", [&] { validate(c.regularizer.alignment); });
  require(c.data.source == "synthetic" || c.data.source == "directory",
          "data.source must be 'synthetic' or 'directory'");
  require(c.data.source != "directory" || !c.data.directory.empty(),
          "data.directory is required when data.source is 'directory'");
  require(c.data.num_images >= 1, "data.num_images must be >= 1");
  require(c.data.workers >= 1, "data.workers must be >= 1");
  require(c.data.source != "synthetic" || c.data.image_size >= c.patch_size * c.model.scale,
          "data.image_size must be >= patch_size * scale");
  collect(e, "degradation: ", [&] { validate(c.degradation); });
  require(c.degradation.target_scale == c.model.scale, "degradation.target_scale must equal model.scale");
  return e;
}

[[noreturn]] void fail(const std::vector<std::string>& errors) {
  std::string message = "invalid configuration (" + std::to_string(errors.size()) + " problem" +
                        (errors.size() == 1 ? "" : "s") + "):";
  for (const std::string& line : errors) message += "\n  " + line;
  throw ConfigError(message);
}

}  // namespace

void validate(const TrainConfig& config) {
  const auto errors = violations(config);
  if (!errors.empty()) fail(errors);
}

LoadedConfig parse_config(std::string_view text) {
  json root;
  const bool blank = text.find_first_not_of(" \t\r\n") == std::string_view::npos;
  if (blank) {
    root = json::object();
  } else {
    try {
      root = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
    }
  }
  if (!root.is_object()) throw ConfigError("configuration must be a JSON object");

  Reader r;
  LoadedConfig out;
  TrainConfig& c = out.config;
  r.allow(&root, "", {"model", "train", "regularizer", "seeds", "data", "degradation"});
  read_model(r, r.section(root, "model"), c.model);
  read_train(r, r.section(root, "train"), c);
  read_regularizer(r, r.section(root, "regularizer"), c.regularizer);
  read_seeds(r, r.section(root, "seeds"), c.seeds);
  read_data(r, r.section(root, "data"), c.data);
  read_degradation(r, r.section(root, "degradation"), c.degradation);

  std::vector<std::string> errors = std::move(r.errors);
  for (std::string& v : violations(c)) errors.push_back(std::move(v));
  if (!errors.empty()) fail(errors);
  out.defaulted = std::move(r.defaulted);
  return out;
}

LoadedConfig load_config(const std::filesystem::path& path, bool report_defaults) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open configuration file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  LoadedConfig loaded = parse_config(buffer.str());
  if (report_defaults) {
    for (const std::string& d : loaded.defaulted) std::cerr << "config: default " << d << '\n';
  }
  return loaded;
}

json to_json(const TrainConfig& c) {
  json seeds = {{"root", c.seeds.root}};
  if (c.seeds.data) seeds["data"] = *c.seeds.data;
  if (c.seeds.init) seeds["init"] = *c.seeds.init;
  if (c.seeds.dropout) seeds["dropout"] = *c.seeds.dropout;
  if (c.seeds.rff) seeds["rff"] = *c.seeds.rff;
  json degradation;
  to_json(degradation, c.degradation);
  const AlignmentConfig& a = c.regularizer.alignment;
  return {
      {"model",
       {{"image_channels", c.model.image_channels},
        {"features", c.model.features},
        {"blocks", c.model.blocks},
        {"scale", c.model.scale},
        {"kernel_size", c.model.kernel_size},
        {"slope", c.model.slope},
        {"image_skip", c.model.image_skip},
        {"bias", c.model.bias}}},
      {"train",
       {{"batch_size", c.batch_size},
        {"patch_size", c.patch_size},
        {"steps", c.steps},
        {"base_lr", c.base_lr},
        {"min_lr", c.min_lr},
        {"beta1", c.adam.beta1},
        {"beta2", c.adam.beta2},
        {"eps", c.adam.eps},
        {"cosine_period", c.cosine_period},
        {"checkpoint_every", c.checkpoint_every},
        {"supervise", supervision_name(c.supervise)}}},
      {"regularizer",
       {{"kind", regularizer_name(c.regularizer.kind)},
        {"keep_prob", c.regularizer.keep_prob},
        {"brute_force_weight", c.regularizer.brute_force_weight},
        {"alignment",
         {{"mode", mode_name(a.mode)},
          {"rff_dim", a.rff_dim},
          {"weight", a.weight},
          {"covariance_convention", convention_name(a.covariance_convention)}}}}},
      {"seeds", seeds},
      {"data",
       {{"source", c.data.source},
        {"directory", c.data.directory},
        {"num_images", c.data.num_images},
        {"image_size", c.data.image_size},
        {"workers", c.data.workers}}},
      {"degradation", degradation}};
}

std::string serialize_config(const TrainConfig& config) { return to_json(config).dump(2) + "\n"; }

}  // namespace blindsr
