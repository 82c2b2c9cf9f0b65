#pragma once

#include <filesystem>
#include <memory>
#include <set>

#include "kmcg/checkpoint.hpp"
#include "kmcg/trainer.hpp"

namespace kmcg::testing {

inline DenoiserConfig tiny_config(int dims, int cond, std::uint64_t seed) {
  DenoiserConfig c;
  c.input_dim = dims;
  c.cond_dim = cond;
  c.hidden = 8;
  c.blocks = 1;
  c.time_dim = 4;
  c.kernel = 3;
  c.T = 100;
  c.seed = seed;
  return c;
}

inline std::shared_ptr<DomainModel> tiny_domain(const std::string& name, int dims, int cond,
                                                std::uint64_t seed, bool keyframe_context = false) {
  auto cfg = tiny_config(dims, cond, seed);
  cfg.keyframe_context = keyframe_context;
  Vec mean = Vec::LinSpaced(dims, -0.5, 0.5);
  Vec scale = Vec::Constant(dims, 2.0);
  return std::make_shared<DomainModel>(DomainModel{name, init_model(cfg), Normalizer(mean, scale)});
}

// Serves clips from memory and remembers which entries were read.
class RecordingSource final : public DataSource {
 public:
  RecordingSource(std::string domain, std::vector<MotionClip> clips)
      : domain_(std::move(domain)), clips_(std::move(clips)) {}
  std::string domain() const override { return domain_; }
  std::vector<std::string> entries() const override {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < clips_.size(); ++i) out.push_back(domain_ + "/" + std::to_string(i));
    return out;
  }
  MotionClip read(const std::string& entry) const override {
    reads.insert(entry);
    return clips_.at(std::stoul(entry.substr(domain_.size() + 1)));
  }
  mutable std::set<std::string> reads;

 private:
  std::string domain_;
  std::vector<MotionClip> clips_;
};

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("kmcg_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace kmcg::testing
