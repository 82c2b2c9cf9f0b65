#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "kmcg/denoiser.hpp"
#include "kmcg/motion.hpp"

namespace kmcg {

enum class LrSchedule { constant, cosine };

struct TrainConfig {
  int batch_size = 16;
  double lr = 1e-3;
  LrSchedule lr_schedule = LrSchedule::cosine;
  int warmup = 100;
  int steps = 3000;
  double ema = 0.0;   // 0 disables the parameter moving average
  int crop = 64;      // random training window in frames; 0 = whole sequence
  int loss_window = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

LrSchedule parse_lr_schedule(std::string_view text);
std::string to_string(LrSchedule s);

// One standardized training sequence. keyframes are used only by models with
// keyframe_context enabled.
struct TrainingSequence {
  Mat x0;
  Mat cond;
  std::vector<int> keyframes;
};

struct TrainStats {
  double initial_loss = 0.0;  // mean of the first loss_window steps
  double final_loss = 0.0;    // mean of the last loss_window steps
  std::vector<double> history;
};

using TrainProgress = std::function<void(int step, double loss)>;

/// Adam on the x0-regression objective with k ~ U{1..T}, z ~ N(0, I).
/// Parameters end rounded to float32 precision. Throws a numerical error on a
/// non-finite loss.
DenoiserModel train(std::span<const TrainingSequence> dataset, DenoiserModel model,
                    const TrainConfig& cfg, TrainStats* stats = nullptr,
                    const TrainProgress& progress = {});

// Where training data comes from. Training only sees one domain's source, so
// the set of files it opens is exactly what the source hands out.
class DataSource {
 public:
  virtual ~DataSource() = default;
  virtual std::string domain() const = 0;
  virtual std::vector<std::string> entries() const = 0;
  virtual MotionClip read(const std::string& entry) const = 0;
};

// Reads <root>/manifest.txt; refuses entries that escape <root>.
class DirectoryDataSource final : public DataSource {
 public:
  DirectoryDataSource(std::filesystem::path root, std::string domain);
  std::string domain() const override { return domain_; }
  std::vector<std::string> entries() const override;
  MotionClip read(const std::string& entry) const override;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
  std::string domain_;
};

/// Loads every clip from the source and checks they all carry its domain label.
std::vector<MotionClip> load_domain(const DataSource& source);

/// Standardizes clips with `norm` and attaches keyframes (extracted from the
/// raw motion) when requested.
std::vector<TrainingSequence> make_training_set(const std::vector<MotionClip>& clips,
                                                const Normalizer& norm, bool with_keyframes,
                                                const KeyframeParams& kf);

}  // namespace kmcg
