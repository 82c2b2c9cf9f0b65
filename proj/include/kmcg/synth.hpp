#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kmcg/motion.hpp"

namespace kmcg {

// Procedural stand-in for a motion style. Each channel is a slow content
// posture drift plus a phase-locked oscillation of the shared content phase;
// the style decides the oscillation.
struct SyntheticStyleSpec {
  std::string name;
  double base_frequency = 1.0;  // multiples of the content phase
  double amplitude = 0.3;
  double phase_offset = 0.0;    // phase advance per channel (radians)
  double limb_coupling = 0.0;   // extra phase modulation on non-root joints
  double noise = 0.002;         // std of additive per-frame noise
  std::uint64_t seed = 0;
  int dims = 6;
  int fps = 30;

  void validate() const;
};

/// Built-in styles "styleA" ... "styleJ"; seed and dims are left at defaults.
SyntheticStyleSpec style_preset(const std::string& name);
std::vector<std::string> style_preset_names();

/// Deterministic in spec.seed. The content (phase track and posture drift)
/// depends only on the seed and sequence index, never on style parameters, so
/// one content can be rendered in several styles. Only the phase track is
/// exposed as conditioning (sin/cos of the phase).
std::vector<MotionClip> synth_dataset(const SyntheticStyleSpec& spec, int n_sequences,
                                      int n_frames);

}  // namespace kmcg
