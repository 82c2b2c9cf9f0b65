#include "kmcg/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>

#include <fmt/format.h>

#include "kmcg/error.hpp"

namespace kmcg {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    const auto comma = value.find(',', start);
    const auto item = trim(std::string_view(value).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  require(ec == std::errc() && ptr == end && !value.empty(), ErrorKind::usage,
          fmt::format("{}: '{}' is not a valid number", key, value));
  return out;
}

int parse_int(const std::string& key, const std::string& value) { return parse_number<int>(key, value); }

double parse_double(const std::string& key, const std::string& value) {
  return parse_number<double>(key, value);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  fail(ErrorKind::usage, fmt::format("{}: '{}' is not a boolean", key, value));
}

std::string show(bool b) { return b ? "true" : "false"; }
std::string show(double v) { return fmt::format("{}", v); }
std::string show(int v) { return std::to_string(v); }

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

std::vector<int> parse_steps(const std::string& key, const std::string& value) {
  if (value == "all") return {};
  std::set<int> steps;
  for (const auto& item : split_list(value)) {
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) {
      steps.insert(parse_int(key, item));
      continue;
    }
    const int lo = parse_int(key, trim(item.substr(0, dash)));
    const int hi = parse_int(key, trim(item.substr(dash + 1)));
    require(lo <= hi, ErrorKind::usage, fmt::format("{}: empty range '{}'", key, item));
    for (int s = lo; s <= hi; ++s) steps.insert(s);
  }
  require(!steps.empty() && *steps.begin() >= 0, ErrorKind::usage,
          fmt::format("{}: expected 'all' or a list of non-negative steps", key));
  return {steps.begin(), steps.end()};
}

std::string show_steps(const std::vector<int>& steps) {
  if (steps.empty()) return "all";
  std::vector<std::string> parts;
  for (std::size_t i = 0; i < steps.size();) {
    std::size_t j = i;
    while (j + 1 < steps.size() && steps[j + 1] == steps[j] + 1) ++j;
    parts.push_back(i == j ? std::to_string(steps[i])
                           : fmt::format("{}-{}", steps[i], steps[j]));
    i = j + 1;
  }
  return join(parts);
}

struct KeyDef {
  ConfigKey info;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define KMCG_INT(KEY, FIELD, HELP)                                                    \
  KeyDef{{KEY, HELP}, [](RunConfig& c, const std::string& v) { c.FIELD = parse_int(KEY, v); }, \
         [](const RunConfig& c) { return show(c.FIELD); }}
#define KMCG_DOUBLE(KEY, FIELD, HELP)                                                    \
  KeyDef{{KEY, HELP}, [](RunConfig& c, const std::string& v) { c.FIELD = parse_double(KEY, v); }, \
         [](const RunConfig& c) { return show(c.FIELD); }}
#define KMCG_BOOL(KEY, FIELD, HELP)                                                    \
  KeyDef{{KEY, HELP}, [](RunConfig& c, const std::string& v) { c.FIELD = parse_bool(KEY, v); }, \
         [](const RunConfig& c) { return show(c.FIELD); }}
#define KMCG_PATH(KEY, FIELD, HELP)                                                     \
  KeyDef{{KEY, HELP}, [](RunConfig& c, const std::string& v) {                          \
           require(!v.empty(), ErrorKind::usage, KEY ": empty path");                   \
           c.FIELD = v;                                                                 \
         },                                                                             \
         [](const RunConfig& c) { return c.FIELD.string(); }}

const std::vector<KeyDef>& key_defs() {
  static const std::vector<KeyDef> defs = {
      KMCG_PATH("paths.data_dir", data_dir, "root of the per-domain dataset directories"),
      KMCG_PATH("paths.checkpoint_dir", checkpoint_dir, "where <domain>.ckpt files live"),
      KMCG_PATH("paths.report_dir", report_dir, "where reports are written"),
      KeyDef{{"seed", "run seed; every random stream derives from it"},
             [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); },
             [](const RunConfig& c) { return std::to_string(c.seed); }},
      KeyDef{{"synth.styles", "comma-separated style presets to synthesize"},
             [](RunConfig& c, const std::string& v) {
               c.synth.styles = split_list(v);
               require(!c.synth.styles.empty(), ErrorKind::usage, "synth.styles: empty list");
             },
             [](const RunConfig& c) { return join(c.synth.styles); }},
      KMCG_INT("synth.sequences", synth.sequences, "sequences per style"),
      KMCG_INT("synth.frames", synth.frames, "frames per sequence"),
      KMCG_INT("synth.dims", synth.dims, "channels per frame"),
      KMCG_INT("synth.fps", synth.fps, "frame rate written to the files"),
      KMCG_DOUBLE("synth.noise", synth.noise, "std of per-frame noise"),
      KeyDef{{"schedule.kind", "noise schedule: cosine or linear"},
             [](RunConfig& c, const std::string& v) { c.model.schedule = parse_schedule_kind(v); },
             [](const RunConfig& c) { return to_string(c.model.schedule); }},
      KMCG_INT("schedule.T", model.T, "number of diffusion steps"),
      KMCG_INT("model.hidden", model.hidden, "hidden width"),
      KMCG_INT("model.blocks", model.blocks, "number of residual blocks"),
      KMCG_INT("model.time_dim", model.time_dim, "step embedding width"),
      KMCG_INT("model.kernel", model.kernel, "temporal convolution width (odd)"),
      KeyDef{{"model.cond_mode", "conditioning: concat or cross_attention"},
             [](RunConfig& c, const std::string& v) { c.model.cond_mode = parse_cond_mode(v); },
             [](const RunConfig& c) { return to_string(c.model.cond_mode); }},
      KMCG_BOOL("model.keyframe_context", model.keyframe_context,
                "train with keyframe poses as attention tokens (explicit mode)"),
      KeyDef{{"model.activation", "silu or identity"},
             [](RunConfig& c, const std::string& v) { c.model.activation = parse_activation(v); },
             [](const RunConfig& c) { return to_string(c.model.activation); }},
      KMCG_INT("train.batch_size", train.batch_size, "sequences per step"),
      KMCG_DOUBLE("train.lr", train.lr, "Adam learning rate"),
      KeyDef{{"train.lr_schedule", "constant or cosine"},
             [](RunConfig& c, const std::string& v) { c.train.lr_schedule = parse_lr_schedule(v); },
             [](const RunConfig& c) { return to_string(c.train.lr_schedule); }},
      KMCG_INT("train.warmup", train.warmup, "linear warmup steps"),
      KMCG_INT("train.steps", train.steps, "optimizer steps"),
      KMCG_DOUBLE("train.ema", train.ema, "parameter moving-average decay (0 = off)"),
      KMCG_INT("train.crop", train.crop, "random training window in frames (0 = whole)"),
      KMCG_INT("train.loss_window", train.loss_window, "steps averaged for reported losses"),
      KMCG_INT("sampler.steps", sampler.num_steps, "DDIM steps S"),
      KMCG_DOUBLE("sampler.eta", sampler.eta, "decode stochasticity in [0, 1]"),
      KMCG_INT("sampler.inversion_refine", sampler.inversion_refine,
               "fixed-point iterations for the first encode step"),
      KMCG_DOUBLE("guidance.alpha0", guidance.alpha0, "base guidance step size"),
      KeyDef{{"guidance.alpha_mode", "residual_norm or constant"},
             [](RunConfig& c, const std::string& v) { c.guidance.alpha_mode = parse_alpha_mode(v); },
             [](const RunConfig& c) { return to_string(c.guidance.alpha_mode); }},
      KMCG_BOOL("guidance.projection", guidance.projection, "replace keyframe frames after each step"),
      KMCG_BOOL("guidance.final_projection", guidance.final_projection,
                "also project on the last step"),
      KMCG_BOOL("guidance.noisy_consistency", guidance.noisy_consistency,
                "project re-noised keyframes (false: clean keyframes)"),
      KeyDef{{"guidance.steps", "decode steps to guide: all, or a list like 0-49,60"},
             [](RunConfig& c, const std::string& v) { c.guidance.steps = parse_steps("guidance.steps", v); },
             [](const RunConfig& c) { return show_steps(c.guidance.steps); }},
      KeyDef{{"guidance.weights", "per-channel measurement weights, or 'ones'"},
             [](RunConfig& c, const std::string& v) {
               c.measurement_weights.clear();
               if (v == "ones") return;
               for (const auto& item : split_list(v))
                 c.measurement_weights.push_back(parse_double("guidance.weights", item));
             },
             [](const RunConfig& c) {
               if (c.measurement_weights.empty()) return std::string("ones");
               std::vector<std::string> parts;
               for (double w : c.measurement_weights) parts.push_back(show(w));
               return join(parts);
             }},
      KMCG_DOUBLE("guidance.epsilon", measurement_noise, "keyframe measurement noise std"),
      KMCG_INT("keyframes.count", keyframes.count, "keyframes per sequence"),
      KMCG_INT("keyframes.min_gap", keyframes.min_gap, "minimum frames between keyframes"),
      KeyDef{{"transfer.mode", "vanilla, gradient or explicit"},
             [](RunConfig& c, const std::string& v) { c.mode = parse_transfer_mode(v); },
             [](const RunConfig& c) { return to_string(c.mode); }},
      KMCG_INT("cycle.samples", cycle_samples, "sequences used by the cycle command"),
  };
  return defs;
}

#undef KMCG_INT
#undef KMCG_DOUBLE
#undef KMCG_BOOL
#undef KMCG_PATH

const KeyDef& find_key(const std::string& key) {
  for (const auto& d : key_defs())
    if (d.info.name == key) return d;
  fail(ErrorKind::usage, fmt::format("unknown config key '{}'", key));
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  find_key(key).set(*this, trim(value));
}

std::string RunConfig::get(const std::string& key) const { return find_key(key).get(*this); }

void RunConfig::validate() const {
  require(synth.sequences >= 1, ErrorKind::usage, "synth.sequences must be positive");
  require(synth.frames >= 3, ErrorKind::usage, "synth.frames must be at least 3");
  require(synth.dims >= 1, ErrorKind::usage, "synth.dims must be positive");
  require(synth.fps >= 1, ErrorKind::usage, "synth.fps must be positive");
  require(synth.noise >= 0, ErrorKind::usage, "synth.noise must be >= 0");
  model.validate();
  train.validate();
  require(sampler.num_steps >= 1 && sampler.num_steps <= model.T, ErrorKind::usage,
          fmt::format("sampler.steps must be in [1, {}]", model.T));
  require(sampler.eta >= 0 && sampler.eta <= 1, ErrorKind::usage, "sampler.eta must be in [0, 1]");
  require(sampler.inversion_refine >= 1, ErrorKind::usage, "sampler.inversion_refine must be >= 1");
  guidance.validate();
  require(measurement_noise >= 0, ErrorKind::usage, "guidance.epsilon must be >= 0");
  for (double w : measurement_weights)
    require(w >= 0 && std::isfinite(w), ErrorKind::usage, "guidance.weights must be finite and >= 0");
  require(keyframes.count >= 1, ErrorKind::usage, "keyframes.count must be positive");
  require(keyframes.min_gap >= 1, ErrorKind::usage, "keyframes.min_gap must be positive");
  require(cycle_samples >= 1, ErrorKind::usage, "cycle.samples must be positive");
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& d : key_defs()) out.push_back(d.info);
    return out;
  }();
  return keys;
}

void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::usage,
          fmt::format("cannot open config file {}", path.string()));
  std::set<std::string> seen;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const auto where = fmt::format("{}:{}", path.string(), lineno);
    require(eq != std::string::npos, ErrorKind::usage, where + ": expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    require(seen.insert(key).second, ErrorKind::usage, fmt::format("{}: repeated key '{}'", where, key));
    try {
      cfg.set(key, body.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(e.kind(), fmt::format("{}: {}", where, e.what()));
    }
  }
}

std::string config_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& d : key_defs()) out += fmt::format("{} = {}\n", d.info.name, d.get(cfg));
  return out;
}

std::uint64_t named_seed(std::uint64_t seed, const std::string& name) {
  return derive_stream(seed, {fnv1a(name)})();
}

}  // namespace kmcg
