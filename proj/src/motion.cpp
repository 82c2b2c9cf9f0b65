#include "kmcg/motion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "kmcg/error.hpp"

namespace kmcg {

namespace fs = std::filesystem;

JointLayout JointLayout::for_dims(int dims, int root_joint) {
  JointLayout layout;
  layout.channels = (dims % 3 == 0) ? 3 : 1;
  layout.joints = dims / layout.channels;
  layout.root_joint = root_joint;
  return layout;
}

void MotionSequence::validate() const {
  require(frames.rows() >= 3, ErrorKind::contract,
          fmt::format("motion sequence needs at least 3 frames, got {}", frames.rows()));
  require(frames.cols() >= 1, ErrorKind::contract, "motion sequence has no channels");
  require(frames.allFinite(), ErrorKind::contract, "motion sequence contains non-finite values");
  require(fps > 0, ErrorKind::contract, "fps must be positive");
  require(layout.joints >= 1 && layout.channels >= 1 && layout.dims() == frames.cols(),
          ErrorKind::contract,
          fmt::format("joint layout {}x{} does not match {} channels", layout.joints,
                      layout.channels, frames.cols()));
  require(layout.root_joint < layout.joints, ErrorKind::contract, "root joint out of range");
}

// ---------------------------------------------------------------------------
// File format

namespace {

[[noreturn]] void parse_error(const fs::path& path, std::size_t line, const std::string& what) {
  fail(ErrorKind::data, fmt::format("{}:{}: {}", path.string(), line, what));
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_int(std::string_view s, long long& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

MotionClip load_motion(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, fmt::format("cannot open motion file {}", path.string()));

  std::string line;
  if (!std::getline(in, line)) parse_error(path, 1, "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "#motion v1") parse_error(path, 1, "expected '#motion v1'");

  if (!std::getline(in, line)) parse_error(path, 2, "missing header line");
  std::map<std::string, std::string, std::less<>> header;
  for (auto tok : split_ws(line)) {
    auto eq = tok.find('=');
    if (eq == std::string_view::npos || eq == 0 || eq + 1 == tok.size())
      parse_error(path, 2, fmt::format("malformed header field '{}'", tok));
    header.emplace(std::string(tok.substr(0, eq)), std::string(tok.substr(eq + 1)));
  }
  static const char* const kRequired[] = {"fps", "frames", "dims", "cond", "domain", "root_joint"};
  for (const char* key : kRequired)
    if (!header.count(key)) parse_error(path, 2, fmt::format("header lacks '{}'", key));
  for (const auto& [key, _] : header) {
    bool known = key == "channels";
    for (const char* k : kRequired) known = known || key == k;
    if (!known) parse_error(path, 2, fmt::format("unknown header field '{}'", key));
  }

  auto int_field = [&](const char* key, long long lo) {
    long long v = 0;
    if (!parse_int(header.at(key), v) || v < lo)
      parse_error(path, 2, fmt::format("invalid value for '{}'", key));
    return v;
  };
  const long long fps = int_field("fps", 1);
  const long long frames = int_field("frames", 3);
  const long long dims = int_field("dims", 1);
  const long long cond = int_field("cond", 0);
  const long long root = int_field("root_joint", -1);

  JointLayout layout = JointLayout::for_dims(static_cast<int>(dims), static_cast<int>(root));
  if (header.count("channels")) {
    const long long ch = int_field("channels", 1);
    if (dims % ch != 0) parse_error(path, 2, "dims is not a multiple of channels");
    layout.channels = static_cast<int>(ch);
    layout.joints = static_cast<int>(dims / ch);
  }
  if (root >= layout.joints) parse_error(path, 2, "root_joint out of range");

  MotionClip clip;
  clip.motion.fps = static_cast<int>(fps);
  clip.motion.domain = header.at("domain");
  clip.motion.layout = layout;
  clip.motion.frames.resize(frames, dims);
  clip.cond.values.resize(frames, cond);

  const long long width = dims + cond;
  std::size_t line_no = 2;
  for (long long r = 0; r < frames; ++r) {
    ++line_no;
    if (!std::getline(in, line))
      parse_error(path, line_no, fmt::format("expected {} rows, found {}", frames, r));
    auto cells = split_ws(line);
    if (static_cast<long long>(cells.size()) != width)
      parse_error(path, line_no,
                  fmt::format("expected {} values, found {}", width, cells.size()));
    for (long long c = 0; c < width; ++c) {
      double v = 0.0;
      if (!parse_double(cells[c], v))
        parse_error(path, line_no, fmt::format("non-numeric cell '{}'", cells[c]));
      if (c < dims)
        clip.motion.frames(r, c) = v;
      else
        clip.cond.values(r, c - dims) = v;
    }
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!split_ws(line).empty()) parse_error(path, line_no, "unexpected data after last row");
  }
  return clip;
}

void save_motion(const MotionSequence& seq, const ConditioningSignal& cond, const fs::path& path) {
  require(cond.values.rows() == seq.frames.rows(), ErrorKind::contract,
          fmt::format("conditioning has {} frames, motion has {}", cond.values.rows(),
                      seq.frames.rows()));
  seq.validate();
  require(!path.empty(), ErrorKind::io, "empty output path");
  require(seq.domain.find_first_of(" \t\r\n") == std::string::npos && !seq.domain.empty(),
          ErrorKind::contract, "domain label must be a non-empty token");

  std::string out;
  out += "#motion v1\n";
  out += fmt::format("fps={} frames={} dims={} cond={} domain={} root_joint={}", seq.fps,
                     seq.frames.rows(), seq.frames.cols(), cond.values.cols(), seq.domain,
                     seq.layout.root_joint);
  if (!(seq.layout == JointLayout::for_dims(static_cast<int>(seq.dims()), seq.layout.root_joint)))
    out += fmt::format(" channels={}", seq.layout.channels);
  out += '\n';
  for (Index r = 0; r < seq.frames.rows(); ++r) {
    for (Index c = 0; c < seq.frames.cols(); ++c) {
      if (c) out += ' ';
      out += fmt::format("{:.9g}", seq.frames(r, c));
    }
    for (Index c = 0; c < cond.values.cols(); ++c) out += fmt::format(" {:.9g}", cond.values(r, c));
    out += '\n';
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::io, fmt::format("cannot write {}", path.string()));
  f << out;
  if (!f) fail(ErrorKind::io, fmt::format("write failed for {}", path.string()));
}

std::vector<std::string> read_manifest(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.txt";
  std::ifstream in(manifest);
  if (!in) fail(ErrorKind::data, fmt::format("missing manifest {}", manifest.string()));
  std::vector<std::string> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    entries.push_back(line);
  }
  return entries;
}

void write_manifest(const fs::path& dir, const std::vector<std::string>& entries) {
  std::ofstream out(dir / "manifest.txt", std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, fmt::format("cannot write manifest in {}", dir.string()));
  for (const auto& e : entries) out << e << '\n';
}

// ---------------------------------------------------------------------------
// Standardization

Normalizer::Normalizer(Vec mean, Vec scale) : mean_(std::move(mean)), scale_(std::move(scale)) {
  require(mean_.size() == scale_.size(), ErrorKind::contract, "normalizer size mismatch");
  require((scale_.array() > 0.0).all() && scale_.allFinite() && mean_.allFinite(),
          ErrorKind::contract, "normalizer scale must be positive and finite");
}

Mat Normalizer::apply(const Mat& frames) const {
  require(frames.cols() == mean_.size(), ErrorKind::contract, "normalizer dimension mismatch");
  return (frames.rowwise() - mean_.transpose()).array().rowwise() / scale_.transpose().array();
}

Mat Normalizer::invert(const Mat& standardized) const {
  require(standardized.cols() == mean_.size(), ErrorKind::contract,
          "normalizer dimension mismatch");
  Mat out = standardized.array().rowwise() * scale_.transpose().array();
  return out.rowwise() + mean_.transpose();
}

Normalizer fit_standardizer(std::span<const MotionSequence> dataset) {
  require(!dataset.empty(), ErrorKind::data, "cannot fit a standardizer on an empty dataset");
  const Index dims = dataset.front().dims();
  Vec sum = Vec::Zero(dims);
  double count = 0.0;
  for (const auto& seq : dataset) {
    require(seq.dims() == dims, ErrorKind::data, "inconsistent channel count in dataset");
    sum += seq.frames.colwise().sum().transpose();
    count += static_cast<double>(seq.frame_count());
  }
  require(count > 0, ErrorKind::data, "dataset has no frames");
  const Vec mean = sum / count;
  Vec sq = Vec::Zero(dims);
  for (const auto& seq : dataset)
    sq += (seq.frames.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
  Vec scale(dims);
  for (Index c = 0; c < dims; ++c) {
    const double var = sq(c) / count;
    const double floor = 1e-12 * std::max(1.0, mean(c) * mean(c));
    scale(c) = var > floor ? std::sqrt(var) : 1.0;
  }
  return Normalizer(mean, scale);
}

// ---------------------------------------------------------------------------
// Keyframes and features

Vec acceleration_saliency(const MotionSequence& seq) {
  seq.validate();
  const Index n = seq.frame_count();
  const auto& lay = seq.layout;
  Vec s = Vec::Zero(n);
  for (Index t = 1; t + 1 < n; ++t) {
    double total = 0.0;
    for (int j = 0; j < lay.joints; ++j) {
      double sq = 0.0;
      for (int c = 0; c < lay.channels; ++c) {
        const Index d = j * lay.channels + c;
        const double acc = seq.frames(t + 1, d) - 2.0 * seq.frames(t, d) + seq.frames(t - 1, d);
        sq += acc * acc;
      }
      total += std::sqrt(sq);
    }
    s(t) = total / lay.joints;
  }
  return s;
}

KeyframeSet extract_keyframes(const MotionSequence& seq, int count, int min_gap) {
  require(count >= 1, ErrorKind::usage, "keyframe count must be at least 1");
  require(min_gap >= 1, ErrorKind::usage, "keyframe min_gap must be at least 1");
  const Vec s = acceleration_saliency(seq);
  const Index n = seq.frame_count();

  // Values below this are rounding noise (e.g. a constant-velocity ramp).
  const double tol = 1e-9 * std::max(1.0, seq.frames.cwiseAbs().maxCoeff());

  std::vector<int> maxima;
  for (Index t = 1; t + 1 < n; ++t) {
    if (s(t) <= tol) continue;
    const bool left = (t == 1) || s(t) > s(t - 1);
    const bool right = (t + 2 == n) || s(t) >= s(t + 1);
    if (left && right) maxima.push_back(static_cast<int>(t));
  }
  std::stable_sort(maxima.begin(), maxima.end(), [&](int a, int b) { return s(a) > s(b); });

  std::vector<int> picked;
  auto fits = [&](int idx) {
    return std::all_of(picked.begin(), picked.end(),
                       [&](int p) { return std::abs(p - idx) >= min_gap; });
  };
  for (int idx : maxima) {
    if (static_cast<int>(picked.size()) >= count) break;
    if (fits(idx)) picked.push_back(idx);
  }
  for (int i = 0; i < count && static_cast<int>(picked.size()) < count; ++i) {
    const int idx = static_cast<int>(((2 * i + 1) * n) / (2 * static_cast<Index>(count)));
    if (std::find(picked.begin(), picked.end(), idx) == picked.end() && fits(idx))
      picked.push_back(idx);
  }
  std::sort(picked.begin(), picked.end());

  KeyframeSet out;
  out.indices = picked;
  for (int idx : picked) out.saliency.push_back(s(idx));
  return out;
}

Mat hip_centric(const Mat& rows, const JointLayout& layout) {
  require(layout.root_joint >= 0 && layout.root_joint < layout.joints, ErrorKind::contract,
          "layout has no root joint");
  require(rows.cols() == layout.dims(), ErrorKind::contract, "pose width does not match layout");
  Mat out = rows;
  const int c_n = layout.channels;
  for (Index r = 0; r < rows.rows(); ++r)
    for (int j = 0; j < layout.joints; ++j)
      for (int c = 0; c < c_n; ++c)
        out(r, j * c_n + c) = rows(r, j * c_n + c) - rows(r, layout.root_joint * c_n + c);
  return out;
}

SalientPoses detect_salient_poses(const MotionSequence& seq, int count, int min_gap) {
  require(seq.layout.root_joint >= 0, ErrorKind::contract,
          "salient poses need a layout with a root joint");
  const KeyframeSet kf = extract_keyframes(seq, count, min_gap);
  Mat raw(static_cast<Index>(kf.indices.size()), seq.dims());
  for (std::size_t i = 0; i < kf.indices.size(); ++i)
    raw.row(static_cast<Index>(i)) = seq.frames.row(kf.indices[i]);
  return SalientPoses{kf.indices, hip_centric(raw, seq.layout)};
}

Vec kinematic_features(const MotionSequence& seq) {
  seq.validate();
  const Index n = seq.frame_count();
  const Index d = seq.dims();
  const Mat vel = seq.frames.bottomRows(n - 1) - seq.frames.topRows(n - 1);
  const Mat acc = vel.bottomRows(n - 2) - vel.topRows(n - 2);

  auto stats = [](const Mat& m, Vec& mean, Vec& sd) {
    mean = m.colwise().mean().transpose();
    sd = ((m.rowwise() - mean.transpose()).array().square().colwise().mean()).sqrt().matrix().transpose();
  };
  Vec vm, vs, am, as;
  stats(vel, vm, vs);
  stats(acc, am, as);
  Vec f(4 * d);
  f << vm, vs, am, as;
  return f;
}

}  // namespace kmcg
