#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "kmcg/error.hpp"
#include "kmcg/metrics.hpp"
#include "kmcg/synth.hpp"

using namespace kmcg;

namespace {

GaussianStats stats(Vec mean, Mat cov) { return GaussianStats{std::move(mean), std::move(cov), 10}; }

Mat random_spd(Index d, std::uint64_t seed) {
  Rng rng = derive_stream(seed, {1});
  const Mat g = gaussian_matrix(d, d + 2, rng);
  return g * g.transpose() / static_cast<double>(d) + 0.1 * Mat::Identity(d, d);
}

std::vector<MotionSequence> motions(const std::string& style, int n, std::uint64_t seed) {
  auto spec = style_preset(style);
  spec.seed = seed;
  std::vector<MotionSequence> out;
  for (auto& c : synth_dataset(spec, n, 90)) out.push_back(std::move(c.motion));
  return out;
}

}  // namespace

TEST_CASE("gaussian statistics") {
  const Vec v = Vec::LinSpaced(4, 1.0, 4.0);
  const std::vector<Vec> two{v, v};
  const auto s = gaussian_stats(two);
  CHECK(s.mean == v);
  CHECK((s.cov - kCovarianceRidge * Mat::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.n == 2);
  CHECK_THROWS_AS(gaussian_stats(std::vector<Vec>{v}), Error);

  Rng rng = derive_stream(2, {1});
  const Mat x = gaussian_matrix(10000, 3, rng);
  const auto g = gaussian_stats(x);
  CHECK(g.mean.cwiseAbs().maxCoeff() <= 0.05);
  CHECK((g.cov - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() <= 0.1);

  const auto g2 = gaussian_stats(Mat(2.0 * x));
  CHECK((g2.mean - 2.0 * g.mean).cwiseAbs().maxCoeff() <= 1e-12);
  const Mat expect = 4.0 * (g.cov - kCovarianceRidge * Mat::Identity(3, 3)) +
                     kCovarianceRidge * Mat::Identity(3, 3);
  CHECK((g2.cov - expect).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("Frechet distance closed forms") {
  const Mat one = Mat::Identity(1, 1);
  CHECK(frechet_distance(stats(Vec::Zero(1), one), stats(Vec::Ones(1), one)) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(frechet_distance(stats(Vec::Zero(1), one), stats(Vec::Zero(1), 4.0 * one)) ==
        doctest::Approx(1.0).epsilon(1e-12));

  const Mat spd = random_spd(5, 3);
  Vec mu = Vec::LinSpaced(5, -1.0, 1.0);
  CHECK(frechet_distance(stats(mu, spd), stats(mu, spd)) <= 1e-8);

  // Diagonal covariances reduce to per-axis scalar distances.
  Vec d1(3), d2(3), m2(3);
  d1 << 1.0, 2.0, 0.5;
  d2 << 4.0, 0.5, 0.5;
  m2 << 0.5, -1.0, 0.0;
  double expect = m2.squaredNorm();
  for (int i = 0; i < 3; ++i) expect += std::pow(std::sqrt(d1[i]) - std::sqrt(d2[i]), 2);
  CHECK(frechet_distance(stats(Vec::Zero(3), d1.asDiagonal()), stats(m2, d2.asDiagonal())) ==
        doctest::Approx(expect).epsilon(1e-12));

  // Symmetric in its arguments for non-commuting covariances.
  const Mat other = random_spd(5, 4);
  const double ab = frechet_distance(stats(mu, spd), stats(Vec::Zero(5), other));
  const double ba = frechet_distance(stats(Vec::Zero(5), other), stats(mu, spd));
  CHECK(ab == doctest::Approx(ba).epsilon(1e-9));
  CHECK(ab > 0.0);

  CHECK_THROWS_AS(frechet_distance(stats(Vec::Zero(2), Mat::Identity(2, 2)), stats(Vec::Zero(3), Mat::Identity(3, 3))),
                  Error);
}

TEST_CASE("motion and pose distances") {
  const auto a = motions("styleA", 12, 1);
  const auto a2 = motions("styleA", 12, 2);
  const auto b = motions("styleB", 12, 1);
  CHECK(fmd(a, a) <= 1e-8);
  CHECK(fmd(a, a2) < fmd(a, b));
  CHECK_THROWS_AS(fmd(std::span(a).first(1), a), Error);

  const KeyframeParams kp{5, 10};
  const auto same = fpd(a, a, kp);
  CHECK(same.distance <= 1e-8);
  CHECK(same.source_poses == 60);
  CHECK_FALSE(same.fallback_ridge);
  CHECK(fpd(a, b, kp).distance > 0.0);
  CHECK_THROWS_AS(fpd(a, std::span(b).first(3), kp), Error);

  const auto few = fpd(std::span(a).first(1), std::span(b).first(1), kp);
  CHECK(few.fallback_ridge);
  CHECK(std::isfinite(few.distance));
}

TEST_CASE("cycle statistics") {
  Rng rng = derive_stream(7, {1});
  const Mat x = gaussian_matrix(20, 3, rng);
  std::vector<std::pair<Mat, Mat>> same{{x, x}, {x, x}};
  const auto s = cycle_report(same);
  CHECK(s.mean == 0.0);
  CHECK(s.std == 0.0);

  std::vector<std::pair<Mat, Mat>> offset{{x, (x.array() + 0.3).matrix()}, {x, (x.array() - 0.1).matrix()}};
  const auto o = cycle_report(offset);
  CHECK(o.per_pair[0] == doctest::Approx(0.3));
  CHECK(o.per_pair[1] == doctest::Approx(0.1));
  CHECK(o.mean == doctest::Approx(0.2));
  CHECK(o.std == doctest::Approx(0.1));

  CHECK_THROWS_AS(cycle_report({}), Error);
  std::vector<std::pair<Mat, Mat>> bad{{x, x.topRows(5)}};
  CHECK_THROWS_AS(cycle_report(bad), Error);
}
