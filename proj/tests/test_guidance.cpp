#include <cmath>

#include "analytic.hpp"
#include "doctest.h"
#include "kmcg/error.hpp"
#include "kmcg/guidance.hpp"

using namespace kmcg;
using kmcg::testing::GaussianDenoiser;

namespace {

Mat sample(Index r, Index c, std::uint64_t seed) {
  Rng rng = derive_stream(seed, {1});
  return gaussian_matrix(r, c, rng);
}

DenoiserModel small_model() {
  DenoiserConfig c;
  c.input_dim = 3;
  c.cond_dim = 1;
  c.hidden = 6;
  c.blocks = 2;
  c.time_dim = 4;
  c.kernel = 3;
  c.T = 50;
  c.seed = 12;
  DenoiserModel m = init_model(c);
  Rng rng = derive_stream(5, {5});
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& p : m.parameters())
    for (auto& v : p.values) v += n(rng);
  return m;
}

KeyframeSet keys(std::vector<int> idx) { return KeyframeSet{std::move(idx), {}}; }

}  // namespace

TEST_CASE("measure selects keyframe frames") {
  const Mat x = sample(10, 3, 1);
  const auto m = measure(x, keys({0}), 0.0);
  REQUIRE(m.y.rows() == 1);
  REQUIRE(m.y.cols() == 3);
  CHECK(m.y.row(0) == x.row(0));
  const auto m2 = measure(x, keys({2, 5, 9}), 0.0);
  for (int i = 0; i < 3; ++i) CHECK(m2.y.row(i) == x.row(m2.indices[i]));
  CHECK_THROWS_AS(measure(x, keys({10}), 0.0), Error);
  CHECK_THROWS_AS(measure(x, keys({1}), -0.1), Error);
}

TEST_CASE("measurement noise has the requested spread") {
  const Mat x = sample(4, 3, 2);
  double sum = 0.0, sq = 0.0;
  const int draws = 10000;
  for (int s = 0; s < draws; ++s) {
    const auto m = measure(x, keys({1}), 0.1, static_cast<std::uint64_t>(s));
    const double e = m.y(0, 0) - x(1, 0);
    sum += e;
    sq += e * e;
  }
  const double mean = sum / draws;
  const double sd = std::sqrt(sq / draws - mean * mean);
  CHECK(std::abs(sd - 0.1) <= 0.005);
}

TEST_CASE("projection algebra") {
  const Mat x = sample(12, 3, 3);
  const std::vector<int> idx{1, 4, 11};
  const Mat y = sample(3, 3, 4);
  const Mat px = project_frames(x, idx, y);
  CHECK(select_frames(px, idx) == y);
  CHECK(project_frames(px, idx, y) == px);
  CHECK(complement_frames(complement_frames(x, idx), idx) == complement_frames(x, idx));
  CHECK(select_frames(complement_frames(scatter_frames(y, idx, 12), idx), idx).cwiseAbs().maxCoeff() == 0.0);
  CHECK(px == complement_frames(x, idx) + scatter_frames(y, idx, 12));
}

TEST_CASE("residual gradient") {
  const auto model = small_model();
  const Mat x = sample(8, 3, 5);
  ModelContext ctx{sample(8, 1, 6), {}, {}};
  const int k = 20;
  Measurement m = measure(sample(8, 3, 7), keys({0, 3, 7}), 0.0);
  m.weights << 1.0, 0.5, 2.0;

  SUBCASE("matches central differences") {
    const auto g = residual_gradient(model, x, k, ctx, m);
    auto residual = [&](const Mat& xx) {
      const Mat d = select_frames(model.predict(xx, k, ctx), m.indices) - m.y;
      return (d.array().rowwise() * m.weights.transpose().array()).square().sum();
    };
    CHECK(g.residual == doctest::Approx(residual(x)).epsilon(1e-12));
    const double h = 1e-5;
    for (Index r = 0; r < x.rows(); ++r)
      for (Index c = 0; c < x.cols(); ++c) {
        Mat up = x, down = x;
        up(r, c) += h;
        down(r, c) -= h;
        const double fd = (residual(up) - residual(down)) / (2 * h);
        const double an = g.gradient(r, c);
        CHECK(std::abs(an - fd) <= 1e-4 * std::max({std::abs(an), std::abs(fd), 1e-5}));
      }
  }
  SUBCASE("vanishes when the prediction already agrees") {
    Measurement exact = m;
    exact.y = select_frames(model.predict(x, k, ctx), m.indices);
    const auto g = residual_gradient(model, x, k, ctx, exact);
    CHECK(g.residual == 0.0);
    CHECK(g.gradient.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("zero weights annihilate it") {
    Measurement zero = m;
    zero.weights.setZero();
    const auto g = residual_gradient(model, x, k, ctx, zero);
    CHECK(g.residual == 0.0);
    CHECK(g.gradient.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("guided step writes the re-noised keyframes") {
  const auto model = small_model();
  const auto& sched = model.schedule();
  const Mat x = sample(8, 3, 8);
  ModelContext ctx{sample(8, 1, 9), {}, {}};
  const auto m = measure(sample(8, 3, 10), keys({2, 6}), 0.0);
  GuidanceConfig cfg;
  cfg.seed = 77;
  const Mat out = guided_reverse_step(model, x, 30, 20, ctx, m, cfg, 4);
  Rng rng = derive_stream(77, {kStreamConsistency, 4});
  const Mat y20 = sched.a[20] * m.y + sched.b[20] * gaussian_matrix(2, 3, rng);
  CHECK(select_frames(out, m.indices) == y20);

  cfg.noisy_consistency = false;
  CHECK(select_frames(guided_reverse_step(model, x, 30, 20, ctx, m, cfg, 4), m.indices) == m.y);

  cfg.projection = false;
  cfg.alpha_mode = AlphaMode::constant;
  cfg.alpha0 = 0.25;
  StepDiagnostics d;
  const Mat free = guided_reverse_step(model, x, 30, 20, ctx, m, cfg, 4, 0.0, nullptr, &d);
  const auto g = residual_gradient(model, x, 30, ctx, m);
  const Mat expect = ddim_update(sched, x, g.x0_hat, 30, 20) - 0.25 * g.gradient;
  CHECK((free - expect).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(d.alpha == 0.25);
  CHECK(d.residual == doctest::Approx(g.residual));
  CHECK(d.k == 30);

  cfg.alpha_mode = AlphaMode::residual_norm;
  guided_reverse_step(model, x, 30, 20, ctx, m, cfg, 4, 0.0, nullptr, &d);
  CHECK(d.alpha == doctest::Approx(0.25 / std::sqrt(g.residual)));
}

TEST_CASE("degenerate guidance is the vanilla sampler") {
  const auto model = small_model();
  const Mat latent = sample(8, 3, 11);
  ModelContext ctx{sample(8, 1, 12), {}, {}};
  const auto m = measure(sample(8, 3, 13), keys({1, 5}), 0.0);
  SamplerConfig s;
  s.num_steps = 10;
  const Mat vanilla = ddim_decode(model, latent, ctx, s);

  GuidanceConfig cfg;
  cfg.alpha0 = 0.0;
  cfg.projection = false;
  CHECK(guided_decode(model, latent, ctx, m, cfg, s) == vanilla);
  CHECK(ddim_step(model, latent, 50, 45, ctx) ==
        guided_reverse_step(model, latent, 50, 45, ctx, m, cfg));

  GuidanceConfig off;
  off.enabled = false;
  CHECK(guided_decode(model, latent, ctx, m, off, s) == vanilla);

  s.eta = 0.7;
  s.seed = 4;
  CHECK(guided_decode(model, latent, ctx, m, cfg, s) == ddim_decode(model, latent, ctx, s));
}

TEST_CASE("guided decode ends on the measured keyframes") {
  const auto model = small_model();
  const Mat latent = sample(8, 3, 14);
  ModelContext ctx{sample(8, 1, 15), {}, {}};
  const auto m = measure(sample(8, 3, 16), keys({0, 4, 7}), 0.0);
  SamplerConfig s;
  s.num_steps = 10;
  GuidanceConfig cfg;
  cfg.alpha0 = 0.2;
  std::vector<StepDiagnostics> diags;
  const Mat out = guided_decode(model, latent, ctx, m, cfg, s, &diags);
  CHECK(select_frames(out, m.indices) == m.y);
  REQUIRE(diags.size() == 10);
  for (int i = 0; i < 10; ++i) CHECK(diags[i].step == i);
  CHECK(diags.front().k == 50);
  CHECK(diags.back().k == 5);

  cfg.final_projection = false;
  CHECK(select_frames(guided_decode(model, latent, ctx, m, cfg, s), m.indices) != m.y);

  cfg.final_projection = true;
  cfg.steps = {0, 1, 2};
  diags.clear();
  guided_decode(model, latent, ctx, m, cfg, s, &diags);
  CHECK(std::isfinite(diags[2].residual));
  CHECK(std::isnan(diags[3].residual));
  CHECK(diags[3].alpha == 0.0);
}

TEST_CASE("guidance converges on a linear denoiser") {
  // For Gaussian data the guided sample should match the keyframes while the
  // free frames stay finite and bounded.
  GaussianDenoiser lin(make_schedule(ScheduleKind::cosine, 100), 1.0);
  const Mat latent = sample(16, 2, 17);
  const auto m = measure(sample(16, 2, 18), keys({3, 12}), 0.0);
  SamplerConfig s;
  s.num_steps = 20;
  GuidanceConfig cfg;
  const Mat out = guided_decode(lin, latent, {}, m, cfg, s);
  CHECK(select_frames(out, m.indices) == m.y);
  CHECK(out.allFinite());
  CHECK(out.cwiseAbs().maxCoeff() < 10.0);
}

TEST_CASE("guidance argument checks") {
  const auto model = small_model();
  const Mat x = sample(8, 3, 19);
  ModelContext ctx{sample(8, 1, 20), {}, {}};
  auto m = measure(sample(8, 3, 21), keys({1}), 0.0);
  GuidanceConfig cfg;
  cfg.alpha0 = -1.0;
  CHECK_THROWS_AS(guided_reverse_step(model, x, 10, 5, ctx, m, cfg), Error);
  cfg.alpha0 = 1.0;
  CHECK_THROWS_AS(guided_reverse_step(model, x, 5, 10, ctx, m, cfg), Error);
  m.weights(0) = -1.0;
  CHECK_THROWS_AS(residual_gradient(model, x, 5, ctx, m), Error);
  CHECK(parse_alpha_mode("constant") == AlphaMode::constant);
  CHECK_THROWS_AS(parse_alpha_mode("linear"), Error);
}
