#include "kmcg/metrics.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "kmcg/error.hpp"

namespace kmcg {

namespace {

constexpr double kNegativeEigenTolerance = 1e-6;

Mat stack_rows(std::span<const Vec> rows) {
  require(!rows.empty(), ErrorKind::contract, "no feature vectors");
  Mat m(static_cast<Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i].size() == m.cols(), ErrorKind::contract, "feature vectors differ in length");
    m.row(static_cast<Index>(i)) = rows[i].transpose();
  }
  return m;
}

// Eigenvalues of a symmetric matrix, with small negatives clamped to zero.
Vec clamped_eigenvalues(const Mat& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(m, Eigen::EigenvaluesOnly);
  require(eig.info() == Eigen::Success, ErrorKind::numerical,
          fmt::format("eigendecomposition of {} failed", what));
  Vec ev = eig.eigenvalues();
  for (Index i = 0; i < ev.size(); ++i) {
    require(ev[i] >= -kNegativeEigenTolerance, ErrorKind::numerical,
            fmt::format("{} has eigenvalue {:.3g}", what, ev[i]));
    ev[i] = std::max(ev[i], 0.0);
  }
  return ev;
}

Mat symmetric_sqrt(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(m);
  require(eig.info() == Eigen::Success, ErrorKind::numerical, "eigendecomposition failed");
  Vec ev = eig.eigenvalues();
  for (Index i = 0; i < ev.size(); ++i) {
    require(ev[i] >= -kNegativeEigenTolerance, ErrorKind::numerical,
            fmt::format("covariance has eigenvalue {:.3g}", ev[i]));
    ev[i] = std::sqrt(std::max(ev[i], 0.0));
  }
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

GaussianStats gaussian_stats(const Mat& features, double ridge) {
  require(features.rows() >= 2, ErrorKind::data,
          fmt::format("need at least 2 samples for statistics, got {}", features.rows()));
  require(features.allFinite(), ErrorKind::numerical, "non-finite feature values");
  GaussianStats s;
  s.n = features.rows();
  s.mean = features.colwise().mean().transpose();
  const Mat centered = features.rowwise() - s.mean.transpose();
  s.cov = centered.transpose() * centered / static_cast<double>(s.n - 1);
  s.cov = 0.5 * (s.cov + s.cov.transpose());
  s.cov.diagonal().array() += ridge;
  return s;
}

GaussianStats gaussian_stats(std::span<const Vec> features, double ridge) {
  return gaussian_stats(stack_rows(features), ridge);
}

double frechet_distance(const GaussianStats& real, const GaussianStats& gen) {
  require(real.mean.size() == gen.mean.size() && real.cov.rows() == real.mean.size() &&
              gen.cov.rows() == gen.mean.size(),
          ErrorKind::contract,
          fmt::format("statistics dimensions differ ({} vs {})", real.mean.size(), gen.mean.size()));
  const Mat root = symmetric_sqrt(real.cov);
  Mat inner = root * gen.cov * root;
  inner = 0.5 * (inner + inner.transpose());
  const double trace_sqrt = clamped_eigenvalues(inner, "covariance product").array().sqrt().sum();
  const double d = (real.mean - gen.mean).squaredNorm() + real.cov.trace() + gen.cov.trace() -
                   2.0 * trace_sqrt;
  require(std::isfinite(d), ErrorKind::numerical, "Frechet distance is not finite");
  return std::max(d, 0.0);
}

double fmd(std::span<const MotionSequence> real, std::span<const MotionSequence> gen) {
  require(real.size() >= 2 && gen.size() >= 2, ErrorKind::data,
          "motion distance needs at least 2 sequences per set");
  std::vector<Vec> fr, fg;
  for (const auto& s : real) fr.push_back(kinematic_features(s));
  for (const auto& s : gen) fg.push_back(kinematic_features(s));
  return frechet_distance(gaussian_stats(fr), gaussian_stats(fg));
}

FpdResult fpd(std::span<const MotionSequence> source, std::span<const MotionSequence> gen,
              const KeyframeParams& params) {
  require(source.size() == gen.size(), ErrorKind::data,
          fmt::format("pose distance needs paired sets ({} vs {})", source.size(), gen.size()));
  require(!source.empty(), ErrorKind::data, "pose distance needs at least one pair");
  auto pool = [&](std::span<const MotionSequence> set) {
    std::vector<Vec> rows;
    for (const auto& s : set) {
      const SalientPoses p = detect_salient_poses(s, params.count, params.min_gap);
      for (Index i = 0; i < p.poses.rows(); ++i) rows.push_back(p.poses.row(i).transpose());
    }
    return stack_rows(rows);
  };
  const Mat ps = pool(source);
  const Mat pg = pool(gen);
  FpdResult out;
  out.source_poses = ps.rows();
  out.generated_poses = pg.rows();
  out.fallback_ridge = std::min(ps.rows(), pg.rows()) < ps.cols() + 1;
  const double ridge = out.fallback_ridge ? kFallbackRidge : kCovarianceRidge;
  out.distance = frechet_distance(gaussian_stats(ps, ridge), gaussian_stats(pg, ridge));
  return out;
}

CycleStats cycle_report(std::span<const std::pair<Mat, Mat>> pairs) {
  require(!pairs.empty(), ErrorKind::data, "cycle report needs at least one pair");
  CycleStats out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [a, b] = pairs[i];
    require(a.rows() == b.rows() && a.cols() == b.cols() && a.size() > 0, ErrorKind::data,
            fmt::format("cycle pair {} has mismatched shapes", i));
    out.per_pair.push_back(std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size())));
  }
  const double n = static_cast<double>(out.per_pair.size());
  for (double v : out.per_pair) out.mean += v / n;
  double var = 0.0;
  for (double v : out.per_pair) var += (v - out.mean) * (v - out.mean) / n;
  out.std = std::sqrt(var);
  return out;
}

}  // namespace kmcg
