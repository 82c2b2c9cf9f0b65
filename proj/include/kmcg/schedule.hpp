#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "kmcg/types.hpp"

namespace kmcg {

enum class ScheduleKind { cosine, linear };

std::string to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view text);

// Variance-preserving discrete schedule: x_k = a_k x_0 + b_k z with
// a_k^2 + b_k^2 = 1, a_0 = 1, b_0 = 0, k = 0..T.
struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::cosine;
  int T = 0;
  std::vector<double> alpha_bar;  // a_k^2
  std::vector<double> a;
  std::vector<double> b;

  void check_step(int k) const;

  // Posterior q(x_{k-1} | x_k, x_0) = N(coef_x0 x_0 + coef_xk x_k, variance).
  struct Posterior {
    double coef_x0;
    double coef_xk;
    double variance;
  };
  Posterior posterior(int k) const;
};

NoiseSchedule make_schedule(ScheduleKind kind, int T);

/// a_k x0 + b_k z.
Mat q_sample(const NoiseSchedule& sched, const Mat& x0, int k, const Mat& z);

}  // namespace kmcg
