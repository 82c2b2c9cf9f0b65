#pragma once

#include <cstdint>
#include <vector>

#include "kmcg/denoiser.hpp"

namespace kmcg {

struct SamplerConfig {
  int num_steps = 100;
  std::vector<int> subsequence;  // optional explicit step list; overrides num_steps
  double eta = 0.0;              // 0 = deterministic DDIM, 1 = DDPM-equivalent noise
  std::uint64_t seed = 0;
  // Fixed-point iterations used to invert the first step out of k = 0, where
  // the noise estimate (x - a x0_hat)/b is undefined.
  int inversion_refine = 2;
};

/// Strictly increasing steps from 0 to T (uniform stride unless given).
std::vector<int> step_subsequence(const SamplerConfig& cfg, int T);

/// Ancestral step from the VP posterior: mean(x0_hat, x_k) + sigma_k z.
/// sigma_1 = 0, so the last step is noiseless.
Mat ddpm_step(const Denoiser& model, const Mat& x_k, int k, const ModelContext& ctx,
              const Mat& z);

/// Generalised DDIM update for a known x0 estimate, k_to < k_from.
/// eta > 0 needs `z` (same shape as x).
Mat ddim_update(const NoiseSchedule& sched, const Mat& x, const Mat& x0_hat, int k_from,
                int k_to, double eta = 0.0, const Mat* z = nullptr);

/// x_{k_to} = a_to x0_hat + b_to (x - a_from x0_hat) / b_from with
/// x0_hat = model(x, k_from). eta > 0 adds the stochastic DDIM term.
Mat ddim_step(const Denoiser& model, const Mat& x, int k_from, int k_to, const ModelContext& ctx,
              double eta = 0.0, const Mat* z = nullptr);

/// Deterministic inversion from data (k = 0) to the latent at k = T.
Mat ddim_encode(const Denoiser& model, const Mat& x0, const ModelContext& ctx,
                const SamplerConfig& cfg);

/// Reverse pass from the latent at k = T down to k = 0.
Mat ddim_decode(const Denoiser& model, const Mat& latent, const ModelContext& ctx,
                const SamplerConfig& cfg);

}  // namespace kmcg
