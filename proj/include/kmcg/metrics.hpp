#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kmcg/motion.hpp"

namespace kmcg {

inline constexpr double kCovarianceRidge = 1e-6;
// Used instead when there are too few samples for a full-rank covariance.
inline constexpr double kFallbackRidge = 1e-3;

struct GaussianStats {
  Vec mean;
  Mat cov;  // unbiased sample covariance + ridge * I
  Index n = 0;
};

/// One feature vector per row. Needs at least two rows.
GaussianStats gaussian_stats(const Mat& features, double ridge = kCovarianceRidge);
GaussianStats gaussian_stats(std::span<const Vec> features, double ridge = kCovarianceRidge);

/// |mu_r - mu_g|^2 + tr(S_r + S_g - 2 (S_r^1/2 S_g S_r^1/2)^1/2), clamped at 0.
double frechet_distance(const GaussianStats& real, const GaussianStats& gen);

/// Frechet distance between kinematic_features of the two sets.
double fmd(std::span<const MotionSequence> real, std::span<const MotionSequence> gen);

struct FpdResult {
  double distance = 0.0;
  Index source_poses = 0;
  Index generated_poses = 0;
  bool fallback_ridge = false;
};

/// Frechet distance between the pooled hip-centric salient poses of paired
/// sets. Keyframes are detected independently in each sequence.
FpdResult fpd(std::span<const MotionSequence> source, std::span<const MotionSequence> gen,
              const KeyframeParams& params);

struct CycleStats {
  double mean = 0.0;
  double std = 0.0;  // population std across pairs
  std::vector<double> per_pair;
};

/// RMS distance per (original, cycled) pair of standardized sequences.
CycleStats cycle_report(std::span<const std::pair<Mat, Mat>> pairs);

}  // namespace kmcg
