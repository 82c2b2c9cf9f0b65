#include "kmcg/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "kmcg/error.hpp"

namespace kmcg {

std::string to_string(ScheduleKind kind) {
  return kind == ScheduleKind::cosine ? "cosine" : "linear";
}

ScheduleKind parse_schedule_kind(std::string_view text) {
  if (text == "cosine") return ScheduleKind::cosine;
  if (text == "linear") return ScheduleKind::linear;
  fail(ErrorKind::usage, fmt::format("unknown schedule kind '{}'", text));
}

void NoiseSchedule::check_step(int k) const {
  require(k >= 0 && k <= T, ErrorKind::contract,
          fmt::format("diffusion step {} outside [0, {}]", k, T));
}

NoiseSchedule::Posterior NoiseSchedule::posterior(int k) const {
  require(k >= 1 && k <= T, ErrorKind::contract,
          fmt::format("posterior needs step in [1, {}], got {}", T, k));
  const double ab = alpha_bar[k];
  const double ab_prev = alpha_bar[k - 1];
  const double alpha = ab / ab_prev;
  const double beta = 1.0 - alpha;
  const double denom = 1.0 - ab;
  return Posterior{std::sqrt(ab_prev) * beta / denom, std::sqrt(alpha) * (1.0 - ab_prev) / denom,
                   beta * (1.0 - ab_prev) / denom};
}

NoiseSchedule make_schedule(ScheduleKind kind, int T) {
  require(T >= 2, ErrorKind::usage, fmt::format("schedule needs T >= 2, got {}", T));
  NoiseSchedule s;
  s.kind = kind;
  s.T = T;
  s.alpha_bar.resize(static_cast<std::size_t>(T) + 1);

  if (kind == ScheduleKind::cosine) {
    constexpr double kOffset = 0.008;
    auto f = [&](int k) {
      const double c = std::cos((static_cast<double>(k) / T + kOffset) / (1.0 + kOffset) *
                                std::numbers::pi / 2.0);
      return c * c;
    };
    const double f0 = f(0);
    for (int k = 0; k <= T; ++k) s.alpha_bar[k] = f(k) / f0;
    s.alpha_bar[0] = 1.0;
  } else {
    // Linear betas rescaled so the total noise is independent of T.
    const double scale = 1000.0 / T;
    const double lo = scale * 1e-4;
    const double hi = scale * 0.02;
    s.alpha_bar[0] = 1.0;
    for (int k = 1; k <= T; ++k) {
      const double frac = T == 1 ? 0.0 : static_cast<double>(k - 1) / (T - 1);
      const double beta = std::min(lo + (hi - lo) * frac, 0.999);
      s.alpha_bar[k] = s.alpha_bar[k - 1] * (1.0 - beta);
    }
  }

  s.a.resize(s.alpha_bar.size());
  s.b.resize(s.alpha_bar.size());
  for (std::size_t k = 0; k < s.alpha_bar.size(); ++k) {
    s.a[k] = std::sqrt(s.alpha_bar[k]);
    s.b[k] = std::sqrt(1.0 - s.alpha_bar[k]);
  }
  for (int k = 1; k <= T; ++k)
    require(s.a[k] < s.a[k - 1] && s.b[k] > s.b[k - 1], ErrorKind::numerical,
            fmt::format("{} schedule is not monotone at step {}", to_string(kind), k));
  require(s.a[T] <= 0.05, ErrorKind::numerical,
          fmt::format("{} schedule keeps too much signal at T ({})", to_string(kind), s.a[T]));
  return s;
}

Mat q_sample(const NoiseSchedule& sched, const Mat& x0, int k, const Mat& z) {
  sched.check_step(k);
  require(x0.rows() == z.rows() && x0.cols() == z.cols(), ErrorKind::contract,
          "q_sample: noise shape differs from x0");
  return sched.a[k] * x0 + sched.b[k] * z;
}

}  // namespace kmcg
