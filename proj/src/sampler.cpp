#include "kmcg/sampler.hpp"

#include <cmath>

#include <fmt/format.h>

#include "kmcg/error.hpp"

namespace kmcg {

std::vector<int> step_subsequence(const SamplerConfig& cfg, int T) {
  std::vector<int> steps;
  if (!cfg.subsequence.empty()) {
    steps = cfg.subsequence;
  } else {
    require(cfg.num_steps >= 1 && cfg.num_steps <= T, ErrorKind::usage,
            fmt::format("sampler steps must be in [1, {}], got {}", T, cfg.num_steps));
    for (int i = 0; i <= cfg.num_steps; ++i)
      steps.push_back(static_cast<int>(
          std::llround(static_cast<double>(i) * T / static_cast<double>(cfg.num_steps))));
  }
  require(steps.size() >= 2 && steps.front() == 0 && steps.back() == T, ErrorKind::usage,
          "step subsequence must start at 0 and end at T");
  for (std::size_t i = 1; i < steps.size(); ++i)
    require(steps[i] > steps[i - 1], ErrorKind::usage, "step subsequence must be increasing");
  return steps;
}

Mat ddpm_step(const Denoiser& model, const Mat& x_k, int k, const ModelContext& ctx,
              const Mat& z) {
  const auto& sched = model.schedule();
  require(k >= 1 && k <= sched.T, ErrorKind::contract,
          fmt::format("ddpm_step needs k in [1, {}], got {}", sched.T, k));
  require(z.rows() == x_k.rows() && z.cols() == x_k.cols(), ErrorKind::contract,
          "ddpm_step: noise shape differs from x_k");
  const Mat x0_hat = model.predict(x_k, k, ctx);
  const auto post = sched.posterior(k);
  return post.coef_x0 * x0_hat + post.coef_xk * x_k + std::sqrt(post.variance) * z;
}

Mat ddim_update(const NoiseSchedule& sched, const Mat& x, const Mat& x0_hat, int k_from,
                int k_to, double eta, const Mat* z) {
  sched.check_step(k_from);
  sched.check_step(k_to);
  require(k_from > 0, ErrorKind::contract, "ddim step from k = 0 is undefined (b_0 = 0)");
  const Mat eps = (x - sched.a[k_from] * x0_hat) / sched.b[k_from];
  if (eta == 0.0) return sched.a[k_to] * x0_hat + sched.b[k_to] * eps;

  require(k_to < k_from, ErrorKind::contract, "stochastic DDIM only runs in reverse");
  require(z != nullptr && z->rows() == x.rows() && z->cols() == x.cols(), ErrorKind::contract,
          "stochastic DDIM step needs a noise sample");
  const double ab_from = sched.alpha_bar[k_from];
  const double ab_to = sched.alpha_bar[k_to];
  const double sigma =
      eta * std::sqrt((1.0 - ab_to) / (1.0 - ab_from)) * std::sqrt(1.0 - ab_from / ab_to);
  const double dir = std::sqrt(std::max(0.0, 1.0 - ab_to - sigma * sigma));
  return sched.a[k_to] * x0_hat + dir * eps + sigma * (*z);
}

Mat ddim_step(const Denoiser& model, const Mat& x, int k_from, int k_to, const ModelContext& ctx,
              double eta, const Mat* z) {
  require(k_to < k_from, ErrorKind::contract,
          fmt::format("ddim_step runs in reverse (k_to < k_from), got {} -> {}", k_from, k_to));
  require(k_from > 0, ErrorKind::contract, "ddim step from k = 0 is undefined (b_0 = 0)");
  return ddim_update(model.schedule(), x, model.predict(x, k_from, ctx), k_from, k_to, eta, z);
}

Mat ddim_encode(const Denoiser& model, const Mat& x0, const ModelContext& ctx,
                const SamplerConfig& cfg) {
  const auto& sched = model.schedule();
  const auto steps = step_subsequence(cfg, sched.T);
  require(cfg.inversion_refine >= 1, ErrorKind::usage, "inversion_refine must be >= 1");
  require(x0.allFinite(), ErrorKind::numerical, "encode input is not finite");

  // First step out of the clean endpoint: find x with model(x, k1) = x0 by
  // fixed-point iteration, which makes the final decode step invert it.
  const int k1 = steps[1];
  Mat x = x0;
  for (int it = 0; it < cfg.inversion_refine; ++it)
    x += sched.a[k1] * (x0 - model.predict(x, k1, ctx));

  for (std::size_t i = 1; i + 1 < steps.size(); ++i) {
    const int from = steps[i];
    const int to = steps[i + 1];
    x = ddim_update(sched, x, model.predict(x, from, ctx), from, to);
  }
  require(x.allFinite(), ErrorKind::numerical, "encode produced non-finite values");
  return x;
}

Mat ddim_decode(const Denoiser& model, const Mat& latent, const ModelContext& ctx,
                const SamplerConfig& cfg) {
  const auto& sched = model.schedule();
  const auto steps = step_subsequence(cfg, sched.T);
  require(cfg.eta >= 0.0 && cfg.eta <= 1.0, ErrorKind::usage, "eta must be in [0, 1]");
  Mat x = latent;
  for (std::size_t i = steps.size() - 1; i > 0; --i) {
    const int from = steps[i];
    const int to = steps[i - 1];
    if (cfg.eta > 0.0 && to > 0) {
      Rng rng = derive_stream(cfg.seed, {kStreamSampler, static_cast<std::uint64_t>(i)});
      const Mat z = gaussian_matrix(x.rows(), x.cols(), rng);
      x = ddim_step(model, x, from, to, ctx, cfg.eta, &z);
    } else {
      x = ddim_step(model, x, from, to, ctx);
    }
  }
  require(x.allFinite(), ErrorKind::numerical, "decode produced non-finite values");
  return x;
}

}  // namespace kmcg
