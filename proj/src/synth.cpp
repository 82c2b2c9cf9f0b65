#include "kmcg/synth.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "kmcg/error.hpp"

namespace kmcg {

void SyntheticStyleSpec::validate() const {
  require(!name.empty(), ErrorKind::usage, "style needs a name");
  require(base_frequency > 0 && amplitude > 0 && noise >= 0, ErrorKind::usage,
          fmt::format("style '{}' has invalid parameters", name));
  require(dims >= 1 && fps >= 1, ErrorKind::usage, "style dims and fps must be positive");
}

namespace {

struct Preset {
  const char* name;
  double freq, amp, offset, coupling;
};

// Distinct in frequency or amplitude so the velocity/acceleration statistics
// separate cleanly. Amplitudes stay below the content posture swing.
constexpr Preset kPresets[] = {
    {"styleA", 1.00, 0.300, 0.00, 0.00}, {"styleB", 2.00, 0.180, 0.90, 0.50},
    {"styleC", 1.50, 0.240, 0.40, 1.00}, {"styleD", 0.50, 0.450, 1.60, 0.30},
    {"styleE", 1.25, 0.360, 2.20, 0.80}, {"styleF", 2.50, 0.135, 0.20, 0.10},
    {"styleG", 0.75, 0.270, 2.80, 1.20}, {"styleH", 1.75, 0.330, 1.10, 0.00},
    {"styleI", 3.00, 0.105, 0.60, 0.70}, {"styleJ", 1.00, 0.600, 1.40, 0.90},
};

// Slow per-channel posture drift: the part of the content that is not in the
// conditioning track and has to travel through the latent.
struct Drift {
  double amp1, freq1, phase1, amp2, freq2, phase2;
};

}  // namespace

SyntheticStyleSpec style_preset(const std::string& name) {
  for (const auto& p : kPresets) {
    if (name == p.name) {
      SyntheticStyleSpec s;
      s.name = p.name;
      s.base_frequency = p.freq;
      s.amplitude = p.amp;
      s.phase_offset = p.offset;
      s.limb_coupling = p.coupling;
      return s;
    }
  }
  fail(ErrorKind::usage, fmt::format("unknown style '{}'", name));
}

std::vector<std::string> style_preset_names() {
  std::vector<std::string> names;
  for (const auto& p : kPresets) names.emplace_back(p.name);
  return names;
}

std::vector<MotionClip> synth_dataset(const SyntheticStyleSpec& spec, int n_sequences,
                                      int n_frames) {
  spec.validate();
  require(n_sequences >= 1, ErrorKind::usage, "number of sequences must be positive");
  require(n_frames >= 3, ErrorKind::usage, "number of frames must be at least 3");
  constexpr double kTwoPi = 2.0 * std::numbers::pi;

  const JointLayout layout = JointLayout::for_dims(spec.dims, 0);
  std::vector<MotionClip> out;
  out.reserve(static_cast<std::size_t>(n_sequences));
  for (int i = 0; i < n_sequences; ++i) {
    const auto id = static_cast<std::uint64_t>(i);

    // Content: tempo, start phase, a slow tempo wobble and the posture drift.
    Rng content = derive_stream(spec.seed, {kStreamContent, id});
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double tempo = 0.8 + 0.45 * u01(content);
    const double phase0 = kTwoPi * u01(content);
    const double wobble_amp = 0.6 * u01(content);
    const double wobble_freq = 0.1 + 0.2 * u01(content);
    std::vector<Drift> drift(static_cast<std::size_t>(spec.dims));
    for (auto& d : drift) {
      d.amp1 = 0.5 + 0.5 * u01(content);
      d.freq1 = 0.15 + 0.35 * u01(content);
      d.phase1 = kTwoPi * u01(content);
      d.amp2 = 0.5 * u01(content);
      d.freq2 = 0.15 + 0.35 * u01(content);
      d.phase2 = kTwoPi * u01(content);
    }

    // Per-sequence variation of the style rendering.
    Rng style = derive_stream(spec.seed, {kStreamStyle, id});
    std::normal_distribution<double> normal(0.0, 1.0);
    const double amp_jitter = 1.0 + 0.1 * normal(style);
    std::vector<double> channel_jitter(static_cast<std::size_t>(spec.dims));
    for (auto& j : channel_jitter) j = 0.15 * normal(style);

    Rng noise = derive_stream(spec.seed, {kStreamNoise, id});

    MotionClip clip;
    clip.motion.fps = spec.fps;
    clip.motion.domain = spec.name;
    clip.motion.layout = layout;
    clip.motion.frames.resize(n_frames, spec.dims);
    clip.cond.values.resize(n_frames, 2);
    for (int n = 0; n < n_frames; ++n) {
      const double t = static_cast<double>(n) / spec.fps;
      const double phase =
          phase0 + kTwoPi * tempo * t + wobble_amp * std::sin(kTwoPi * wobble_freq * t);
      clip.cond.values(n, 0) = std::sin(phase);
      clip.cond.values(n, 1) = std::cos(phase);
      for (int d = 0; d < spec.dims; ++d) {
        const int joint = d / layout.channels;
        const int axis = d % layout.channels;
        double theta = spec.base_frequency * phase + spec.phase_offset * d +
                       channel_jitter[static_cast<std::size_t>(d)];
        if (joint > 0) theta += spec.limb_coupling * std::sin(phase);
        const double gain = 1.0 - 0.15 * axis + 0.1 * joint;
        const double wave = std::sin(theta) + 0.35 * std::sin(2.0 * theta + 0.5 * axis);
        const Drift& p = drift[static_cast<std::size_t>(d)];
        const double posture = p.amp1 * std::sin(kTwoPi * p.freq1 * t + p.phase1) +
                               p.amp2 * std::sin(kTwoPi * p.freq2 * t + p.phase2);
        clip.motion.frames(n, d) = posture + spec.amplitude * amp_jitter * gain * wave +
                                   spec.noise * normal(noise);
      }
    }
    out.push_back(std::move(clip));
  }
  return out;
}

}  // namespace kmcg
