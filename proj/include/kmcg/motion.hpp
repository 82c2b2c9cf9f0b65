#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kmcg/types.hpp"

namespace kmcg {

// Frame channels are grouped into `joints` joints of `channels` values each.
// root_joint < 0 means the layout has no designated root (hip) joint.
struct JointLayout {
  int joints = 1;
  int channels = 1;
  int root_joint = -1;

  int dims() const { return joints * channels; }
  bool operator==(const JointLayout&) const = default;

  // Three channels per joint when the dimension allows it, otherwise one.
  static JointLayout for_dims(int dims, int root_joint = 0);
};

struct MotionSequence {
  Mat frames;  // N x D
  int fps = 30;
  std::string domain;
  JointLayout layout;

  Index frame_count() const { return frames.rows(); }
  Index dims() const { return frames.cols(); }

  // Throws contract errors for N < 3, D < 1, non-finite values or a layout
  // that does not cover D.
  void validate() const;
};

// Per-frame context c (N x C). May have zero columns.
struct ConditioningSignal {
  Mat values;
};

struct MotionClip {
  MotionSequence motion;
  ConditioningSignal cond;
};

/// Reads the `#motion v1` text format. Parse errors name the offending line.
MotionClip load_motion(const std::filesystem::path& path);

/// Writes the `#motion v1` text format with 9 significant digits per value.
void save_motion(const MotionSequence& seq, const ConditioningSignal& cond,
                 const std::filesystem::path& path);

// Dataset directories hold motion files plus a manifest.txt listing their
// relative paths, one per line.
std::vector<std::string> read_manifest(const std::filesystem::path& dir);
void write_manifest(const std::filesystem::path& dir, const std::vector<std::string>& entries);

class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(Vec mean, Vec scale);

  const Vec& mean() const { return mean_; }
  const Vec& scale() const { return scale_; }
  Index dims() const { return mean_.size(); }

  Mat apply(const Mat& frames) const;
  Mat invert(const Mat& standardized) const;

 private:
  Vec mean_;
  Vec scale_;
};

/// Per-channel mean and population standard deviation over every frame of the
/// dataset. Channels with (numerically) zero variance get scale 1.
Normalizer fit_standardizer(std::span<const MotionSequence> dataset);

struct KeyframeParams {
  int count = 5;
  int min_gap = 10;
};

struct KeyframeSet {
  std::vector<int> indices;     // strictly increasing
  std::vector<double> saliency; // acceleration magnitude at each index
};

/// Mean over joints of the per-joint acceleration magnitude, using the central
/// second difference. Entries 0 and N-1 are zero (undefined there).
Vec acceleration_saliency(const MotionSequence& seq);

/// Keyframes at local maxima of acceleration_saliency, chosen greedily by
/// descending saliency (lower index wins ties) with a minimum frame gap.
/// Missing picks are filled from evenly spaced frames that respect the gap.
KeyframeSet extract_keyframes(const MotionSequence& seq, int count, int min_gap);

struct SalientPoses {
  std::vector<int> indices;
  Mat poses;  // one hip-centric pose per row, temporal order
};

/// Poses at the keyframes of extract_keyframes, expressed relative to the root
/// joint. Requires layout.root_joint >= 0.
SalientPoses detect_salient_poses(const MotionSequence& seq, int count, int min_gap);

/// Subtracts the root joint's channels from every joint, row by row.
Mat hip_centric(const Mat& rows, const JointLayout& layout);

/// Length 4*D: [velocity mean | velocity std | acceleration mean | acceleration std]
/// per channel, from first and second temporal differences (per frame).
Vec kinematic_features(const MotionSequence& seq);

}  // namespace kmcg
