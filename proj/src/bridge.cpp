#include "kmcg/bridge.hpp"

#include <cmath>

#include <fmt/format.h>

#include "kmcg/error.hpp"

namespace kmcg {

namespace {

constexpr std::uint64_t kSamplerSalt = 0x5a3c;
constexpr std::uint64_t kGuidanceSalt = 0x9e17;
constexpr std::uint64_t kMeasureSalt = 0x41d2;
constexpr std::uint64_t kBackSalt = 0xc7c1e;

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t salt) {
  return derive_stream(seed, {salt})();
}

ModelContext make_context(const TransferRequest& req, const Normalizer& norm,
                          const KeyframeSet& kf) {
  ModelContext ctx;
  ctx.cond = req.cond.values;
  if (req.mode == TransferMode::explicit_keyframes) {
    ctx.keyframe_indices = kf.indices;
    ctx.keyframe_poses = norm.apply(select_frames(req.source.frames, kf.indices));
  }
  return ctx;
}

void check_request(const TransferRequest& req) {
  require(req.source_model && req.target_model, ErrorKind::usage,
          "transfer needs both a source and a target model");
  check_compatible(*req.source_model, *req.target_model, req.mode);
  req.source.validate();
  const auto& cfg = req.source_model->model.config();
  require(req.source.dims() == cfg.input_dim, ErrorKind::data,
          fmt::format("source has {} channels, models expect {}", req.source.dims(), cfg.input_dim));
  require(req.cond.values.rows() == req.source.frame_count() &&
              req.cond.values.cols() == cfg.cond_dim,
          ErrorKind::data,
          fmt::format("conditioning is {}x{}, expected {}x{}", req.cond.values.rows(),
                      req.cond.values.cols(), req.source.frame_count(), cfg.cond_dim));
}

}  // namespace

TransferMode parse_transfer_mode(std::string_view text) {
  if (text == "vanilla") return TransferMode::vanilla;
  if (text == "gradient") return TransferMode::gradient;
  if (text == "explicit") return TransferMode::explicit_keyframes;
  fail(ErrorKind::usage, fmt::format("unknown transfer mode '{}' (vanilla, gradient, explicit)", text));
}

std::string to_string(TransferMode mode) {
  switch (mode) {
    case TransferMode::vanilla: return "vanilla";
    case TransferMode::gradient: return "gradient";
    case TransferMode::explicit_keyframes: return "explicit";
  }
  return "?";
}

void check_compatible(const DomainModel& source, const DomainModel& target, TransferMode mode) {
  const auto& s = source.model.config();
  const auto& t = target.model.config();
  require(s.input_dim == t.input_dim, ErrorKind::usage,
          fmt::format("models disagree on frame dimension ({} vs {})", s.input_dim, t.input_dim));
  require(s.cond_dim == t.cond_dim, ErrorKind::usage,
          fmt::format("models disagree on conditioning dimension ({} vs {})", s.cond_dim, t.cond_dim));
  require(s.schedule == t.schedule && s.T == t.T, ErrorKind::usage,
          fmt::format("models use different schedules ({} T={} vs {} T={})", to_string(s.schedule),
                      s.T, to_string(t.schedule), t.T));
  const bool want_kf = mode == TransferMode::explicit_keyframes;
  for (const DomainModel* dm : {&source, &target}) {
    if (want_kf)
      require(dm->model.config().keyframe_context, ErrorKind::usage,
              fmt::format("explicit mode needs a keyframe-context model; '{}' was trained without",
                          dm->domain));
    else
      require(!dm->model.config().keyframe_context, ErrorKind::usage,
              fmt::format("model '{}' was trained with keyframe context; use explicit mode",
                          dm->domain));
  }
}

double rms_distance(const Mat& a, const Mat& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols() && a.size() > 0, ErrorKind::contract,
          "rms_distance needs equal non-empty shapes");
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

TransferResult transfer(const TransferRequest& req) {
  check_request(req);
  const DomainModel& src = *req.source_model;
  const DomainModel& tgt = *req.target_model;

  TransferResult out;
  if (req.mode != TransferMode::vanilla)
    out.keyframes = extract_keyframes(req.source, req.keyframes.count, req.keyframes.min_gap);

  SamplerConfig sampler = req.sampler;
  sampler.seed = sub_seed(req.seed, kSamplerSalt);

  const Mat x0 = src.normalizer.apply(req.source.frames);
  out.latent = ddim_encode(src.model, x0, make_context(req, src.normalizer, out.keyframes), sampler);

  const ModelContext tctx = make_context(req, tgt.normalizer, out.keyframes);
  if (req.mode == TransferMode::gradient) {
    Measurement m = measure(tgt.normalizer.apply(req.source.frames), out.keyframes,
                            req.measurement_noise, sub_seed(req.seed, kMeasureSalt));
    if (!req.measurement_weights.empty()) {
      require(static_cast<Index>(req.measurement_weights.size()) == m.weights.size(),
              ErrorKind::usage,
              fmt::format("guidance.weights has {} entries, frames have {} channels",
                          req.measurement_weights.size(), m.weights.size()));
      m.weights = Eigen::Map<const Vec>(req.measurement_weights.data(), m.weights.size());
    }
    GuidanceConfig g = req.guidance;
    g.seed = sub_seed(req.seed, kGuidanceSalt);
    out.target_standardized = guided_decode(tgt.model, out.latent, tctx, m, g, sampler, &out.diagnostics);
  } else {
    out.target_standardized = ddim_decode(tgt.model, out.latent, tctx, sampler);
  }

  out.target.frames = tgt.normalizer.invert(out.target_standardized);
  out.target.fps = req.source.fps;
  out.target.domain = tgt.domain;
  out.target.layout = req.source.layout;
  require(out.target.frames.allFinite(), ErrorKind::numerical, "transfer produced non-finite frames");
  return out;
}

CycleResult cycle_transfer(const TransferRequest& req) {
  CycleResult out;
  out.forward = transfer(req);
  TransferRequest back = req;
  back.source = out.forward.target;
  back.source_model = req.target_model;
  back.target_model = req.source_model;
  back.seed = sub_seed(req.seed, kBackSalt);
  out.back = transfer(back);
  out.cycle_l2 = rms_distance(req.source_model->normalizer.apply(req.source.frames),
                              out.back.target_standardized);
  return out;
}

std::vector<TransferResult> batch_transfer(std::span<const TransferRequest> requests) {
  for (std::size_t i = 0; i < requests.size(); ++i) {
    try {
      check_request(requests[i]);
    } catch (const Error& e) {
      throw Error(e.kind(), fmt::format("request {}: {}", i, e.what()));
    }
  }
  std::vector<TransferResult> out;
  out.reserve(requests.size());
  for (const auto& r : requests) out.push_back(transfer(r));
  return out;
}

}  // namespace kmcg
