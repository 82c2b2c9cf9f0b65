#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "kmcg/schedule.hpp"
#include "kmcg/types.hpp"

namespace kmcg {

enum class CondMode { concat, cross_attention };
enum class Activation { silu, identity };

std::string to_string(CondMode mode);
std::string to_string(Activation act);
CondMode parse_cond_mode(std::string_view text);
Activation parse_activation(std::string_view text);

// Network shape. The schedule lives here too: the network is preconditioned
// with the schedule coefficients, and two models can only share a latent space
// when their schedules agree.
struct DenoiserConfig {
  int input_dim = 6;
  int cond_dim = 2;
  int hidden = 48;
  int blocks = 3;
  int time_dim = 32;
  int kernel = 5;  // temporal convolution width, odd
  CondMode cond_mode = CondMode::concat;
  bool keyframe_context = false;  // keyframe poses as extra attention tokens
  Activation activation = Activation::silu;
  ScheduleKind schedule = ScheduleKind::cosine;
  int T = 1000;
  std::uint64_t seed = 0;

  void validate() const;
  bool uses_attention() const {
    return cond_mode == CondMode::cross_attention || keyframe_context;
  }
  bool operator==(const DenoiserConfig&) const = default;
};

struct ModelContext {
  Mat cond;                           // N x cond_dim
  std::vector<int> keyframe_indices;  // frame index of each keyframe token
  Mat keyframe_poses;                 // K x input_dim
};

// Anything that predicts x0 from (x_k, k, c). Samplers and guidance only see
// this interface, which lets tests plug in analytic denoisers.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual const NoiseSchedule& schedule() const = 0;
  virtual Mat predict(const Mat& x_k, int k, const ModelContext& ctx) const = 0;

  // Evaluates the prediction once, asks `cotangent_of(prediction)` for the
  // output cotangent and returns its pullback to x_k.
  virtual Mat predict_and_pullback(const Mat& x_k, int k, const ModelContext& ctx,
                                   const std::function<Mat(const Mat&)>& cotangent_of,
                                   Mat& prediction) const = 0;
};

struct Parameter {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  std::vector<double> values;  // column-major rows x cols
};

using Gradients = std::vector<std::vector<double>>;

struct TrainingExample {
  Mat x0;
  Mat z;
  int k = 0;
  ModelContext ctx;
};

struct TrainingMetadata {
  int steps = 0;
  double initial_loss = std::numeric_limits<double>::quiet_NaN();
  double final_loss = std::numeric_limits<double>::quiet_NaN();
};

// x0_hat = a_k x_k + b_k F(x_k, k, c), where F is a stack of per-frame blocks:
//   temporal convolution (+ time bias) -> optional cross-attention -> MLP,
// each with a residual connection. With unit-variance data the skip term is
// the optimal linear denoiser, so F only models the remainder.
class DenoiserModel final : public Denoiser {
 public:
  explicit DenoiserModel(const DenoiserConfig& config);

  const DenoiserConfig& config() const { return config_; }
  const NoiseSchedule& schedule() const override { return schedule_; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  Gradients zero_gradients() const;

  TrainingMetadata metadata;

  Mat predict(const Mat& x_k, int k, const ModelContext& ctx) const override;
  Mat predict_and_pullback(const Mat& x_k, int k, const ModelContext& ctx,
                           const std::function<Mat(const Mat&)>& cotangent_of,
                           Mat& prediction) const override;

  struct BlockCache {
    Mat h_in, conv_pre, attn_in, Q, K, V, P, O, mlp_in, mlp_pre, mlp_act, conv_act;
  };
  struct Cache {
    int k = 0;
    double a = 0, b = 0;
    Mat x;
    RowVec temb, t_pre, t_act, t;
    Mat frame_pe, tokens;
    Index cond_tokens = 0;
    std::vector<BlockCache> blocks;
    Mat h_out;
    const ModelContext* ctx = nullptr;
  };

  Mat forward(const Mat& x_k, int k, const ModelContext& ctx, Cache& cache) const;
  // Accumulates parameter gradients into `grads` (if given) and writes the
  // input cotangent into `d_x` (if given).
  void backward(const Cache& cache, const Mat& d_out, Gradients* grads, Mat* d_x) const;

  // Snaps parameters to float32 so checkpoints reload bit-identically.
  void round_to_storage_precision();

 private:
  struct BlockSlots {
    int conv_w, conv_b, temb_w, q = -1, k = -1, v = -1, o = -1, m_w1, m_b1, m_w2, m_b2;
  };
  int add_param(const std::string& name, Index rows, Index cols);
  void check_inputs(const Mat& x_k, int k, const ModelContext& ctx) const;

  DenoiserConfig config_;
  NoiseSchedule schedule_;
  std::vector<Parameter> params_;
  int t_w1_, t_b1_, t_w2_, t_b2_, in_w_, in_b_, cond_w_ = -1;
  int tokc_w_ = -1, tokc_b_ = -1, tokk_w_ = -1, tokk_b_ = -1;
  std::vector<BlockSlots> blocks_;
  int out_w_, out_b_;
};

/// Deterministic in config.seed: weights ~ N(0, 1/fan_in), the final
/// projection scaled by 0.1, biases zero; then rounded to float32.
DenoiserModel init_model(const DenoiserConfig& config);

Mat forward(const DenoiserModel& model, const Mat& x_k, int k, const ModelContext& ctx);
std::vector<Mat> forward_batch(const DenoiserModel& model, std::span<const Mat> x_k,
                               std::span<const int> k, std::span<const ModelContext> ctx);

struct LossAndGrad {
  double loss = 0.0;
  Gradients grads;
};

/// Mean over the batch of the per-element squared error between x0 and
/// forward(a_k x0 + b_k z). Gradients are with respect to every parameter.
LossAndGrad loss_and_param_grad(const DenoiserModel& model,
                                std::span<const TrainingExample> batch);

/// cotangent^T (d forward / d x_k).
Mat input_vjp(const DenoiserModel& model, const Mat& x_k, int k, const ModelContext& ctx,
              const Mat& cotangent);

/// Sinusoidal embedding of a scalar position into `dim` values
/// ([sin | cos] halves; a trailing odd slot stays zero).
RowVec sinusoidal_embedding(double position, int dim);

}  // namespace kmcg
