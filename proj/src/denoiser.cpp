#include "kmcg/denoiser.hpp"

#include <cmath>

#include <fmt/format.h>

#include "kmcg/error.hpp"

namespace kmcg {

std::string to_string(CondMode mode) {
  return mode == CondMode::concat ? "concat" : "cross_attention";
}

std::string to_string(Activation act) { return act == Activation::silu ? "silu" : "identity"; }

CondMode parse_cond_mode(std::string_view text) {
  if (text == "concat") return CondMode::concat;
  if (text == "cross_attention") return CondMode::cross_attention;
  fail(ErrorKind::usage, fmt::format("unknown conditioning mode '{}'", text));
}

Activation parse_activation(std::string_view text) {
  if (text == "silu") return Activation::silu;
  if (text == "identity") return Activation::identity;
  fail(ErrorKind::usage, fmt::format("unknown activation '{}'", text));
}

void DenoiserConfig::validate() const {
  require(input_dim > 0, ErrorKind::usage, "model input dimension must be positive");
  require(cond_dim >= 0, ErrorKind::usage, "model conditioning dimension must be >= 0");
  require(hidden > 0, ErrorKind::usage, "model hidden width must be positive");
  require(blocks > 0, ErrorKind::usage, "model needs at least one block");
  require(time_dim > 0 && time_dim % 2 == 0, ErrorKind::usage,
          "time embedding dimension must be positive and even");
  require(kernel > 0 && kernel % 2 == 1, ErrorKind::usage, "kernel width must be positive and odd");
  require(cond_mode != CondMode::cross_attention || cond_dim > 0, ErrorKind::usage,
          "cross-attention conditioning needs cond_dim > 0");
  require(T >= 2, ErrorKind::usage, "schedule needs T >= 2");
}

RowVec sinusoidal_embedding(double position, int dim) {
  RowVec e = RowVec::Zero(dim);
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    e(i) = std::sin(position * freq);
    e(half + i) = std::cos(position * freq);
  }
  return e;
}

namespace {

using CMap = Eigen::Map<const Mat>;
using MMap = Eigen::Map<Mat>;
using CRowMap = Eigen::Map<const RowVec>;
using MRowMap = Eigen::Map<RowVec>;

Mat activate(const Mat& u, Activation act) {
  if (act == Activation::identity) return u;
  return u.array() / (1.0 + (-u.array()).exp());
}

// d act(u) / du, elementwise.
Mat activate_grad(const Mat& u, Activation act) {
  if (act == Activation::identity) return Mat::Ones(u.rows(), u.cols());
  const Eigen::ArrayXXd sig = 1.0 / (1.0 + (-u.array()).exp());
  return (sig * (1.0 + u.array() * (1.0 - sig))).matrix();
}

// Zero-padded "same" temporal convolution. w stacks the per-tap H x H
// matrices vertically: tap j reads frame n + j - kernel/2.
Mat conv_forward(const Mat& h, const CMap& w, int kernel) {
  const Index n = h.rows();
  const Index width = h.cols();
  Mat out = Mat::Zero(n, w.cols());
  const int radius = kernel / 2;
  for (int j = 0; j < kernel; ++j) {
    const Index off = j - radius;
    const Index n0 = std::max<Index>(0, -off);
    const Index n1 = std::min<Index>(n, n - off);
    if (n1 <= n0) continue;
    out.middleRows(n0, n1 - n0).noalias() +=
        h.middleRows(n0 + off, n1 - n0) * w.middleRows(j * width, width);
  }
  return out;
}

void conv_backward(const Mat& h, const CMap& w, int kernel, const Mat& d_out, MMap* d_w,
                   Mat& d_h) {
  const Index n = h.rows();
  const Index width = h.cols();
  const int radius = kernel / 2;
  for (int j = 0; j < kernel; ++j) {
    const Index off = j - radius;
    const Index n0 = std::max<Index>(0, -off);
    const Index n1 = std::min<Index>(n, n - off);
    if (n1 <= n0) continue;
    const Index len = n1 - n0;
    if (d_w)
      d_w->middleRows(j * width, width).noalias() +=
          h.middleRows(n0 + off, len).transpose() * d_out.middleRows(n0, len);
    d_h.middleRows(n0 + off, len).noalias() +=
        d_out.middleRows(n0, len) * w.middleRows(j * width, width).transpose();
  }
}

void softmax_rows(Mat& s) {
  for (Index r = 0; r < s.rows(); ++r) {
    const double m = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - m).exp();
    s.row(r) /= s.row(r).sum();
  }
}

}  // namespace

// ---------------------------------------------------------------------------

int DenoiserModel::add_param(const std::string& name, Index rows, Index cols) {
  params_.push_back(Parameter{name, rows, cols,
                              std::vector<double>(static_cast<std::size_t>(rows * cols), 0.0)});
  return static_cast<int>(params_.size()) - 1;
}

DenoiserModel::DenoiserModel(const DenoiserConfig& config) : config_(config) {
  config_.validate();
  schedule_ = make_schedule(config_.schedule, config_.T);
  const Index h = config_.hidden;
  const Index e = config_.time_dim;
  const Index d = config_.input_dim;
  const Index c = config_.cond_dim;

  t_w1_ = add_param("time.w1", e, h);
  t_b1_ = add_param("time.b1", 1, h);
  t_w2_ = add_param("time.w2", h, h);
  t_b2_ = add_param("time.b2", 1, h);
  in_w_ = add_param("input.w", d, h);
  in_b_ = add_param("input.b", 1, h);
  if (config_.cond_mode == CondMode::concat && c > 0) cond_w_ = add_param("cond.w", c, h);
  if (config_.cond_mode == CondMode::cross_attention) {
    tokc_w_ = add_param("tokens.cond.w", c, h);
    tokc_b_ = add_param("tokens.cond.b", 1, h);
  }
  if (config_.keyframe_context) {
    tokk_w_ = add_param("tokens.keyframe.w", d, h);
    tokk_b_ = add_param("tokens.keyframe.b", 1, h);
  }
  for (int i = 0; i < config_.blocks; ++i) {
    const std::string p = fmt::format("block{}.", i);
    BlockSlots s{};
    s.conv_w = add_param(p + "conv.w", config_.kernel * h, h);
    s.conv_b = add_param(p + "conv.b", 1, h);
    s.temb_w = add_param(p + "time.w", h, h);
    if (config_.uses_attention()) {
      s.q = add_param(p + "attn.q", h, h);
      s.k = add_param(p + "attn.k", h, h);
      s.v = add_param(p + "attn.v", h, h);
      s.o = add_param(p + "attn.o", h, h);
    }
    s.m_w1 = add_param(p + "mlp.w1", h, 2 * h);
    s.m_b1 = add_param(p + "mlp.b1", 1, 2 * h);
    s.m_w2 = add_param(p + "mlp.w2", 2 * h, h);
    s.m_b2 = add_param(p + "mlp.b2", 1, h);
    blocks_.push_back(s);
  }
  out_w_ = add_param("output.w", h, d);
  out_b_ = add_param("output.b", 1, d);
}

std::size_t DenoiserModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.values.size();
  return n;
}

Gradients DenoiserModel::zero_gradients() const {
  Gradients g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.emplace_back(p.values.size(), 0.0);
  return g;
}

void DenoiserModel::round_to_storage_precision() {
  for (auto& p : params_)
    for (auto& v : p.values) v = static_cast<double>(static_cast<float>(v));
}

void DenoiserModel::check_inputs(const Mat& x_k, int k, const ModelContext& ctx) const {
  schedule_.check_step(k);
  require(x_k.cols() == config_.input_dim && x_k.rows() >= 1, ErrorKind::contract,
          fmt::format("model expects {} channels, got {}", config_.input_dim, x_k.cols()));
  require(ctx.cond.rows() == x_k.rows() && ctx.cond.cols() == config_.cond_dim,
          ErrorKind::contract,
          fmt::format("conditioning is {}x{}, expected {}x{}", ctx.cond.rows(), ctx.cond.cols(),
                      x_k.rows(), config_.cond_dim));
  if (config_.keyframe_context) {
    require(ctx.keyframe_poses.rows() == static_cast<Index>(ctx.keyframe_indices.size()) &&
                (ctx.keyframe_poses.rows() == 0 || ctx.keyframe_poses.cols() == config_.input_dim),
            ErrorKind::contract, "keyframe context shape mismatch");
  }
}

Mat DenoiserModel::forward(const Mat& x_k, int k, const ModelContext& ctx, Cache& c) const {
  check_inputs(x_k, k, ctx);
  auto W = [&](int slot) {
    const auto& p = params_[slot];
    return CMap(p.values.data(), p.rows, p.cols);
  };
  auto B = [&](int slot) {
    const auto& p = params_[slot];
    return CRowMap(p.values.data(), p.cols);
  };
  const Activation act = config_.activation;
  const Index n = x_k.rows();
  const int h_dim = config_.hidden;

  c.k = k;
  c.a = schedule_.a[k];
  c.b = schedule_.b[k];
  c.x = x_k;
  c.ctx = &ctx;

  c.temb = sinusoidal_embedding(k, config_.time_dim);
  c.t_pre = c.temb * W(t_w1_) + B(t_b1_);
  c.t_act = activate(c.t_pre, act);
  c.t = c.t_act * W(t_w2_) + B(t_b2_);

  Mat h = x_k * W(in_w_);
  h.rowwise() += B(in_b_) + c.t;
  if (cond_w_ >= 0) h.noalias() += ctx.cond * W(cond_w_);

  c.cond_tokens = 0;
  if (config_.uses_attention()) {
    c.frame_pe.resize(n, h_dim);
    for (Index i = 0; i < n; ++i) c.frame_pe.row(i) = sinusoidal_embedding(double(i), h_dim);
    const Index kf = config_.keyframe_context ? ctx.keyframe_poses.rows() : 0;
    c.cond_tokens = config_.cond_mode == CondMode::cross_attention ? n : 0;
    c.tokens.resize(c.cond_tokens + kf, h_dim);
    if (c.cond_tokens > 0) {
      Mat tc = ctx.cond * W(tokc_w_) + c.frame_pe;
      tc.rowwise() += B(tokc_b_);
      c.tokens.topRows(c.cond_tokens) = tc;
    }
    if (kf > 0) {
      Mat tk = ctx.keyframe_poses * W(tokk_w_);
      tk.rowwise() += B(tokk_b_);
      for (Index i = 0; i < kf; ++i)
        tk.row(i) += sinusoidal_embedding(ctx.keyframe_indices[static_cast<std::size_t>(i)], h_dim);
      c.tokens.bottomRows(kf) = tk;
    }
  }
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(h_dim));

  c.blocks.resize(blocks_.size());
  for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
    const auto& s = blocks_[bi];
    auto& bc = c.blocks[bi];
    bc.h_in = h;
    bc.conv_pre = conv_forward(h, W(s.conv_w), config_.kernel);
    bc.conv_pre.rowwise() += B(s.conv_b) + c.t * W(s.temb_w);
    bc.conv_act = activate(bc.conv_pre, act);
    h += bc.conv_act;

    if (config_.uses_attention() && c.tokens.rows() > 0) {
      bc.attn_in = h;
      bc.Q = (h + c.frame_pe) * W(s.q);
      bc.K = c.tokens * W(s.k);
      bc.V = c.tokens * W(s.v);
      bc.P = attn_scale * bc.Q * bc.K.transpose();
      softmax_rows(bc.P);
      bc.O = bc.P * bc.V;
      h.noalias() += bc.O * W(s.o);
    }

    bc.mlp_in = h;
    bc.mlp_pre = h * W(s.m_w1);
    bc.mlp_pre.rowwise() += B(s.m_b1);
    bc.mlp_act = activate(bc.mlp_pre, act);
    h.noalias() += bc.mlp_act * W(s.m_w2);
    h.rowwise() += B(s.m_b2);
  }
  c.h_out = h;
  Mat f = h * W(out_w_);
  f.rowwise() += B(out_b_);
  return c.a * x_k + c.b * f;
}

void DenoiserModel::backward(const Cache& c, const Mat& d_out, Gradients* grads,
                             Mat* d_x) const {
  require(d_out.rows() == c.x.rows() && d_out.cols() == c.x.cols(), ErrorKind::contract,
          "cotangent shape differs from model output");
  auto W = [&](int slot) {
    const auto& p = params_[slot];
    return CMap(p.values.data(), p.rows, p.cols);
  };
  auto G = [&](int slot) {
    auto& g = (*grads)[static_cast<std::size_t>(slot)];
    const auto& p = params_[slot];
    return MMap(g.data(), p.rows, p.cols);
  };
  auto GB = [&](int slot) {
    auto& g = (*grads)[static_cast<std::size_t>(slot)];
    return MRowMap(g.data(), params_[slot].cols);
  };
  const Activation act = config_.activation;
  const ModelContext& ctx = *c.ctx;
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(config_.hidden));

  const Mat d_f = c.b * d_out;
  if (grads) {
    G(out_w_).noalias() += c.h_out.transpose() * d_f;
    GB(out_b_) += d_f.colwise().sum();
  }
  Mat dh = d_f * W(out_w_).transpose();
  RowVec dt = RowVec::Zero(config_.hidden);
  Mat d_tokens = Mat::Zero(c.tokens.rows(), c.tokens.cols());

  for (std::size_t bi = blocks_.size(); bi-- > 0;) {
    const auto& s = blocks_[bi];
    const auto& bc = c.blocks[bi];

    // MLP
    {
      if (grads) {
        G(s.m_w2).noalias() += bc.mlp_act.transpose() * dh;
        GB(s.m_b2) += dh.colwise().sum();
      }
      const Mat d_pre =
          ((dh * W(s.m_w2).transpose()).array() * activate_grad(bc.mlp_pre, act).array()).matrix();
      if (grads) {
        G(s.m_w1).noalias() += bc.mlp_in.transpose() * d_pre;
        GB(s.m_b1) += d_pre.colwise().sum();
      }
      dh.noalias() += d_pre * W(s.m_w1).transpose();
    }

    // Cross-attention
    if (config_.uses_attention() && c.tokens.rows() > 0) {
      if (grads) G(s.o).noalias() += bc.O.transpose() * dh;
      const Mat d_o = dh * W(s.o).transpose();
      const Mat d_p = d_o * bc.V.transpose();
      const Mat d_v = bc.P.transpose() * d_o;
      const Eigen::VectorXd row_dot = (d_p.array() * bc.P.array()).rowwise().sum();
      const Mat d_s = (bc.P.array() * (d_p.colwise() - row_dot).array()).matrix();
      const Mat d_q = attn_scale * d_s * bc.K;
      const Mat d_k = attn_scale * d_s.transpose() * bc.Q;
      if (grads) {
        G(s.q).noalias() += (bc.attn_in + c.frame_pe).transpose() * d_q;
        G(s.k).noalias() += c.tokens.transpose() * d_k;
        G(s.v).noalias() += c.tokens.transpose() * d_v;
      }
      dh.noalias() += d_q * W(s.q).transpose();
      d_tokens.noalias() += d_k * W(s.k).transpose() + d_v * W(s.v).transpose();
    }

    // Temporal convolution with time bias
    {
      const Mat d_pre = (dh.array() * activate_grad(bc.conv_pre, act).array()).matrix();
      const RowVec d_bias = d_pre.colwise().sum();
      if (grads) {
        GB(s.conv_b) += d_bias;
        G(s.temb_w).noalias() += c.t.transpose() * d_bias;
      }
      dt.noalias() += d_bias * W(s.temb_w).transpose();
      if (grads) {
        MMap gw = G(s.conv_w);
        conv_backward(bc.h_in, W(s.conv_w), config_.kernel, d_pre, &gw, dh);
      } else {
        conv_backward(bc.h_in, W(s.conv_w), config_.kernel, d_pre, nullptr, dh);
      }
    }
  }

  // Input embedding
  if (grads) {
    G(in_w_).noalias() += c.x.transpose() * dh;
    GB(in_b_) += dh.colwise().sum();
    if (cond_w_ >= 0) G(cond_w_).noalias() += ctx.cond.transpose() * dh;
  }
  dt += dh.colwise().sum();
  if (d_x) *d_x = c.a * d_out + dh * W(in_w_).transpose();

  if (!grads) return;

  // Token projections
  if (c.cond_tokens > 0) {
    const auto d_tc = d_tokens.topRows(c.cond_tokens);
    G(tokc_w_).noalias() += ctx.cond.transpose() * d_tc;
    GB(tokc_b_) += d_tc.colwise().sum();
  }
  const Index kf = c.tokens.rows() - c.cond_tokens;
  if (kf > 0) {
    const auto d_tk = d_tokens.bottomRows(kf);
    G(tokk_w_).noalias() += ctx.keyframe_poses.transpose() * d_tk;
    GB(tokk_b_) += d_tk.colwise().sum();
  }

  // Time embedding MLP
  G(t_w2_).noalias() += c.t_act.transpose() * dt;
  GB(t_b2_) += dt;
  const RowVec d_tpre =
      ((dt * W(t_w2_).transpose()).array() * activate_grad(c.t_pre, act).array()).matrix();
  G(t_w1_).noalias() += c.temb.transpose() * d_tpre;
  GB(t_b1_) += d_tpre;
}

Mat DenoiserModel::predict(const Mat& x_k, int k, const ModelContext& ctx) const {
  Cache cache;
  return forward(x_k, k, ctx, cache);
}

Mat DenoiserModel::predict_and_pullback(const Mat& x_k, int k, const ModelContext& ctx,
                                        const std::function<Mat(const Mat&)>& cotangent_of,
                                        Mat& prediction) const {
  Cache cache;
  prediction = forward(x_k, k, ctx, cache);
  const Mat cot = cotangent_of(prediction);
  Mat d_x;
  backward(cache, cot, nullptr, &d_x);
  return d_x;
}

// ---------------------------------------------------------------------------

DenoiserModel init_model(const DenoiserConfig& config) {
  DenoiserModel model(config);
  Rng rng = derive_stream(config.seed, {kStreamInit});
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& p : model.parameters()) {
    // Biases are the parameters whose last name segment starts with 'b'.
    if (p.name[p.name.rfind('.') + 1] == 'b') continue;
    double std = 1.0 / std::sqrt(static_cast<double>(p.rows));
    if (p.name == "output.w") std *= 0.1;
    for (auto& v : p.values) v = std * normal(rng);
  }
  model.round_to_storage_precision();
  return model;
}

Mat forward(const DenoiserModel& model, const Mat& x_k, int k, const ModelContext& ctx) {
  return model.predict(x_k, k, ctx);
}

std::vector<Mat> forward_batch(const DenoiserModel& model, std::span<const Mat> x_k,
                               std::span<const int> k, std::span<const ModelContext> ctx) {
  require(x_k.size() == k.size() && k.size() == ctx.size(), ErrorKind::contract,
          "forward_batch: batch components differ in length");
  std::vector<Mat> out;
  out.reserve(x_k.size());
  for (std::size_t i = 0; i < x_k.size(); ++i) out.push_back(model.predict(x_k[i], k[i], ctx[i]));
  return out;
}

LossAndGrad loss_and_param_grad(const DenoiserModel& model,
                                std::span<const TrainingExample> batch) {
  require(!batch.empty(), ErrorKind::contract, "empty training batch");
  LossAndGrad out;
  out.grads = model.zero_gradients();
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  DenoiserModel::Cache cache;
  for (const auto& ex : batch) {
    require(ex.x0.rows() == ex.z.rows() && ex.x0.cols() == ex.z.cols(), ErrorKind::contract,
            "training example noise shape differs from x0");
    const Mat x_k = q_sample(model.schedule(), ex.x0, ex.k, ex.z);
    const Mat pred = model.forward(x_k, ex.k, ex.ctx, cache);
    const Mat err = pred - ex.x0;
    const double numel = static_cast<double>(err.size());
    out.loss += inv_batch * err.squaredNorm() / numel;
    model.backward(cache, (2.0 * inv_batch / numel) * err, &out.grads, nullptr);
  }
  return out;
}

Mat input_vjp(const DenoiserModel& model, const Mat& x_k, int k, const ModelContext& ctx,
              const Mat& cotangent) {
  DenoiserModel::Cache cache;
  model.forward(x_k, k, ctx, cache);
  Mat d_x;
  model.backward(cache, cotangent, nullptr, &d_x);
  return d_x;
}

}  // namespace kmcg
