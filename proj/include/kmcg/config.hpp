#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kmcg/bridge.hpp"
#include "kmcg/trainer.hpp"

namespace kmcg {

struct SynthSettings {
  std::vector<std::string> styles{"styleA", "styleB"};
  int sequences = 64;
  int frames = 150;
  int dims = 6;
  int fps = 30;
  double noise = 0.002;
};

// Everything a command needs. Every field is reachable through a flat dotted
// key (see config_keys), both in config files and as command-line flags.
struct RunConfig {
  std::filesystem::path data_dir = "data";
  std::filesystem::path checkpoint_dir = "checkpoints";
  std::filesystem::path report_dir = "reports";
  std::uint64_t seed = 0;

  SynthSettings synth;
  DenoiserConfig model;  // input_dim, cond_dim and seed come from the data and domain
  TrainConfig train;
  SamplerConfig sampler;
  GuidanceConfig guidance;
  KeyframeParams keyframes;
  double measurement_noise = 0.0;
  std::vector<double> measurement_weights;
  TransferMode mode = TransferMode::vanilla;
  int cycle_samples = 16;

  /// Throws a usage error naming the key for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  void validate() const;
};

struct ConfigKey {
  std::string name;
  std::string help;
};

/// Every accepted key, in canonical order.
const std::vector<ConfigKey>& config_keys();

/// Applies `key = value` lines from `path` on top of `cfg`. `#` starts a
/// comment. Unknown or repeated keys are usage errors naming the line.
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// `key = value` for every key in canonical order.
std::string config_text(const RunConfig& cfg);

/// Stream seed for a named item (domain, file) under the run seed.
std::uint64_t named_seed(std::uint64_t seed, const std::string& name);

}  // namespace kmcg
