#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "kmcg/denoiser.hpp"
#include "kmcg/error.hpp"

using namespace kmcg;

namespace {

struct Case {
  DenoiserConfig cfg;
  Index frames;
};

// Small configurations covering every parameter group.
std::vector<Case> small_cases() {
  std::vector<Case> out;
  auto base = [] {
    DenoiserConfig c;
    c.input_dim = 3;
    c.cond_dim = 2;
    c.hidden = 6;
    c.blocks = 2;
    c.time_dim = 4;
    c.kernel = 3;
    c.T = 50;
    return c;
  };
  DenoiserConfig c = base();
  c.seed = 1;
  out.push_back({c, 7});
  c = base();
  c.cond_mode = CondMode::cross_attention;
  c.seed = 2;
  out.push_back({c, 6});
  c = base();
  c.keyframe_context = true;
  c.seed = 3;
  c.kernel = 5;
  out.push_back({c, 9});
  c = base();
  c.cond_mode = CondMode::cross_attention;
  c.keyframe_context = true;
  c.input_dim = 2;
  c.cond_dim = 1;
  c.blocks = 1;
  c.seed = 4;
  c.schedule = ScheduleKind::linear;
  out.push_back({c, 5});
  c = base();
  c.cond_dim = 0;
  c.hidden = 5;
  c.time_dim = 6;
  c.blocks = 3;
  c.seed = 5;
  out.push_back({c, 8});
  c = base();
  c.activation = Activation::identity;
  c.seed = 6;
  out.push_back({c, 6});
  return out;
}

Mat rand_mat(Index r, Index cl, Rng& rng) { return gaussian_matrix(r, cl, rng); }

ModelContext make_ctx(const DenoiserConfig& cfg, Index frames, Rng& rng) {
  ModelContext ctx;
  ctx.cond = rand_mat(frames, cfg.cond_dim, rng);
  if (cfg.keyframe_context) {
    ctx.keyframe_indices = {1, static_cast<int>(frames) - 2};
    ctx.keyframe_poses = rand_mat(2, cfg.input_dim, rng);
  }
  return ctx;
}

// Perturbs the output weights so the residual branch is not nearly zero.
DenoiserModel lively_model(const DenoiserConfig& cfg) {
  DenoiserModel m = init_model(cfg);
  Rng rng = derive_stream(cfg.seed, {77});
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& p : m.parameters())
    for (auto& v : p.values) v += n(rng);
  return m;
}

bool close(double analytic, double numeric, double rel = 1e-4) {
  return std::abs(analytic - numeric) <= rel * std::max({std::abs(analytic), std::abs(numeric), 1e-5});
}

std::size_t closed_form_count(const DenoiserConfig& c) {
  const std::size_t h = c.hidden, d = c.input_dim, cd = c.cond_dim, e = c.time_dim, k = c.kernel;
  std::size_t n = e * h + h + h * h + h;  // step embedding MLP
  n += d * h + h;                         // input projection
  if (c.cond_mode == CondMode::concat && cd > 0) n += cd * h;
  if (c.cond_mode == CondMode::cross_attention) n += cd * h + h;
  if (c.keyframe_context) n += d * h + h;
  std::size_t block = k * h * h + h + h * h + (h * 2 * h + 2 * h) + (2 * h * h + h);
  if (c.uses_attention()) block += 4 * h * h;
  n += c.blocks * block;
  n += h * d + d;
  return n;
}

}  // namespace

TEST_CASE("init is deterministic and counted in closed form") {
  DenoiserConfig c;
  c.hidden = 64;
  c.blocks = 4;
  const auto a = init_model(c);
  const auto b = init_model(c);
  REQUIRE(a.parameters().size() == b.parameters().size());
  for (std::size_t i = 0; i < a.parameters().size(); ++i)
    CHECK(a.parameters()[i].values == b.parameters()[i].values);
  CHECK(a.parameter_count() == closed_form_count(c));
  for (const auto& tc : small_cases()) CHECK(init_model(tc.cfg).parameter_count() == closed_form_count(tc.cfg));

  c.hidden = 0;
  CHECK_THROWS_AS(init_model(c), Error);
  c.hidden = 8;
  c.kernel = 4;
  CHECK_THROWS_AS(init_model(c), Error);
}

TEST_CASE("forward is deterministic and batch consistent") {
  for (const auto& tc : small_cases()) {
    const auto m = lively_model(tc.cfg);
    Rng rng = derive_stream(tc.cfg.seed, {1});
    std::vector<Mat> xs;
    std::vector<int> ks;
    std::vector<ModelContext> ctxs;
    for (int i = 0; i < 3; ++i) {
      xs.push_back(rand_mat(tc.frames, tc.cfg.input_dim, rng));
      ks.push_back(1 + 7 * i);
      ctxs.push_back(make_ctx(tc.cfg, tc.frames, rng));
    }
    const auto batch = forward_batch(m, xs, ks, ctxs);
    for (int i = 0; i < 3; ++i) {
      const Mat single = forward(m, xs[i], ks[i], ctxs[i]);
      CHECK((batch[i] - single).cwiseAbs().maxCoeff() <= 1e-6);
      CHECK(forward(m, xs[i], ks[i], ctxs[i]) == single);
      CHECK(single.allFinite());
    }
  }
}

TEST_CASE("conditioning channel order carries no hidden meaning") {
  DenoiserConfig c = small_cases()[0].cfg;
  c.cond_dim = 3;
  const auto m = lively_model(c);
  DenoiserModel permuted = m;
  // Swap rows 0 and 2 of the conditioning projection.
  for (auto& p : permuted.parameters()) {
    if (p.name != "cond.w") continue;
    for (Index col = 0; col < p.cols; ++col)
      std::swap(p.values[static_cast<std::size_t>(col * p.rows)],
                p.values[static_cast<std::size_t>(col * p.rows + 2)]);
  }
  Rng rng = derive_stream(9, {1});
  const Mat x = rand_mat(7, c.input_dim, rng);
  ModelContext ctx{rand_mat(7, 3, rng), {}, {}};
  ModelContext swapped = ctx;
  swapped.cond.col(0).swap(swapped.cond.col(2));
  CHECK((forward(m, x, 5, ctx) - forward(permuted, x, 5, swapped)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("parameter gradients match central differences") {
  for (const auto& tc : small_cases()) {
    CAPTURE(tc.cfg.seed);
    DenoiserModel m = lively_model(tc.cfg);
    Rng rng = derive_stream(tc.cfg.seed, {2});
    std::vector<TrainingExample> batch;
    for (int i = 0; i < 2; ++i)
      batch.push_back({rand_mat(tc.frames, tc.cfg.input_dim, rng),
                       rand_mat(tc.frames, tc.cfg.input_dim, rng), 3 + 20 * i,
                       make_ctx(tc.cfg, tc.frames, rng)});
    const auto lg = loss_and_param_grad(m, batch);
    const double h = 1e-5;
    int bad = 0;
    for (std::size_t p = 0; p < m.parameters().size(); ++p) {
      auto& values = m.parameters()[p].values;
      for (std::size_t j = 0; j < values.size(); ++j) {
        const double keep = values[j];
        values[j] = keep + h;
        const double up = loss_and_param_grad(m, batch).loss;
        values[j] = keep - h;
        const double down = loss_and_param_grad(m, batch).loss;
        values[j] = keep;
        const double fd = (up - down) / (2 * h);
        if (!close(lg.grads[p][j], fd)) {
          ++bad;
          MESSAGE(m.parameters()[p].name << "[" << j << "]: analytic " << lg.grads[p][j] << " fd " << fd);
        }
      }
    }
    CHECK(bad == 0);
  }
}

TEST_CASE("input VJP matches directional derivatives") {
  for (const auto& tc : small_cases()) {
    CAPTURE(tc.cfg.seed);
    const auto m = lively_model(tc.cfg);
    Rng rng = derive_stream(tc.cfg.seed, {3});
    const Mat x = rand_mat(tc.frames, tc.cfg.input_dim, rng);
    const ModelContext ctx = make_ctx(tc.cfg, tc.frames, rng);
    const Mat cot = rand_mat(tc.frames, tc.cfg.input_dim, rng);
    const Mat vjp = input_vjp(m, x, 17, ctx, cot);
    for (int trial = 0; trial < 4; ++trial) {
      const Mat v = rand_mat(tc.frames, tc.cfg.input_dim, rng);
      const double h = 1e-5;
      const Mat diff = (forward(m, x + h * v, 17, ctx) - forward(m, x - h * v, 17, ctx)) / (2 * h);
      const double fd = (diff.array() * cot.array()).sum();
      const double an = (vjp.array() * v.array()).sum();
      CHECK(close(an, fd));
    }
    CHECK(input_vjp(m, x, 17, ctx, Mat::Zero(tc.frames, tc.cfg.input_dim)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("linear network VJP is the transposed Jacobian") {
  DenoiserConfig c = small_cases()[0].cfg;
  c.activation = Activation::identity;
  const auto m = lively_model(c);
  Rng rng = derive_stream(31, {1});
  const Index n = 6;
  const Mat x = rand_mat(n, c.input_dim, rng);
  const ModelContext ctx = make_ctx(c, n, rng);
  const Index dim = n * c.input_dim;
  // Affine in x, so unit probes give the Jacobian exactly (up to rounding).
  Mat jac(dim, dim);
  const Mat f0 = forward(m, x, 9, ctx);
  for (Index i = 0; i < dim; ++i) {
    Mat e = Mat::Zero(n, c.input_dim);
    e(i % n, i / n) = 1.0;
    const Mat col = forward(m, x + e, 9, ctx) - f0;
    jac.col(i) = Eigen::Map<const Vec>(col.data(), dim);
  }
  const Mat cot = rand_mat(n, c.input_dim, rng);
  const Vec expect = jac.transpose() * Eigen::Map<const Vec>(cot.data(), dim);
  const Mat vjp = input_vjp(m, x, 9, ctx, cot);
  CHECK((Eigen::Map<const Vec>(vjp.data(), dim) - expect).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("loss is zero for a perfect predictor and batch duplication is neutral") {
  DenoiserConfig c = small_cases()[0].cfg;
  DenoiserModel m = init_model(c);
  // Zero residual branch: x0_hat = a_k x_k, exact when x0 = 0 and z = 0.
  for (auto& p : m.parameters())
    if (p.name.rfind("output.", 0) == 0) std::fill(p.values.begin(), p.values.end(), 0.0);
  Rng rng = derive_stream(4, {1});
  std::vector<TrainingExample> zero{{Mat::Zero(6, 3), Mat::Zero(6, 3), 10, make_ctx(c, 6, rng)}};
  const auto lg = loss_and_param_grad(m, zero);
  CHECK(lg.loss == 0.0);
  for (const auto& g : lg.grads)
    for (double v : g) CHECK(v == 0.0);

  const auto lm = lively_model(c);
  std::vector<TrainingExample> batch;
  for (int i = 0; i < 2; ++i)
    batch.push_back({rand_mat(6, 3, rng), rand_mat(6, 3, rng), 5 + i, make_ctx(c, 6, rng)});
  std::vector<TrainingExample> doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  const auto a = loss_and_param_grad(lm, batch);
  const auto b = loss_and_param_grad(lm, doubled);
  CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-12));
  for (std::size_t p = 0; p < a.grads.size(); ++p)
    for (std::size_t j = 0; j < a.grads[p].size(); ++j)
      CHECK(std::abs(a.grads[p][j] - b.grads[p][j]) <= 1e-12 * std::max(1.0, std::abs(a.grads[p][j])));
}

TEST_CASE("forward rejects bad shapes and steps") {
  const auto c = small_cases()[0].cfg;
  const auto m = init_model(c);
  Rng rng = derive_stream(1, {1});
  const auto ctx = make_ctx(c, 6, rng);
  CHECK_THROWS_AS(forward(m, rand_mat(6, 4, rng), 3, ctx), Error);
  CHECK_THROWS_AS(forward(m, rand_mat(6, 3, rng), c.T + 1, ctx), Error);
  CHECK_THROWS_AS(forward(m, rand_mat(5, 3, rng), 3, ctx), Error);
}
