#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kmcg/checkpoint.hpp"
#include "kmcg/guidance.hpp"
#include "kmcg/sampler.hpp"

namespace kmcg {

enum class TransferMode {
  vanilla,   // plain encode/decode
  gradient,  // keyframe-guided decode
  explicit_keyframes,  // keyframe tokens in both models
};
TransferMode parse_transfer_mode(std::string_view text);
std::string to_string(TransferMode mode);

struct TransferRequest {
  MotionSequence source;  // raw, source domain units
  ConditioningSignal cond;
  std::shared_ptr<const DomainModel> source_model;
  std::shared_ptr<const DomainModel> target_model;
  TransferMode mode = TransferMode::vanilla;
  SamplerConfig sampler;
  GuidanceConfig guidance;  // gradient mode only
  KeyframeParams keyframes;
  double measurement_noise = 0.0;
  std::vector<double> measurement_weights;  // per channel; empty = all ones
  // Seeds the sampler, measurement and consistency streams of this request.
  std::uint64_t seed = 0;
};

struct TransferResult {
  MotionSequence target;  // raw, target domain units
  Mat target_standardized;
  Mat latent;
  KeyframeSet keyframes;  // source keyframes (empty in vanilla mode)
  std::vector<StepDiagnostics> diagnostics;
};

/// Throws a usage error unless the two models can share a latent space and
/// support `mode`.
void check_compatible(const DomainModel& source, const DomainModel& target, TransferMode mode);

/// Encode with the source model, decode with the target model, both under the
/// source conditioning.
TransferResult transfer(const TransferRequest& req);

struct CycleResult {
  TransferResult forward;
  TransferResult back;
  double cycle_l2 = 0.0;  // RMS over frames and channels, source-standardized
};

CycleResult cycle_transfer(const TransferRequest& req);

/// Checks every request before running any; results keep request order.
std::vector<TransferResult> batch_transfer(std::span<const TransferRequest> requests);

/// Root mean square of a - b.
double rms_distance(const Mat& a, const Mat& b);

}  // namespace kmcg
