#pragma once

// Lightweight latent denoising diffusion model: linear beta schedule, forward
// noising, the simplified noise-prediction loss, its distillation-augmented
// variant and ancestral sampling.
//
// The denoiser is a small MLP: [x_t ; sinusoidal(t)] -> hidden -> hidden -> d.
// Timesteps are 1-based throughout (t in [1, T]).

#include <optional>
#include <vector>

#include "vecache/checkpoint.hpp"
#include "vecache/nn.hpp"
#include "vecache/rng.hpp"

namespace vecache::ldpm {

using nn::Matrix;
using nn::Vector;

struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;       // beta[t-1] = beta_t
  std::vector<double> alpha;      // 1 - beta_t
  std::vector<double> alpha_bar;  // prod_{i<=t} alpha_i

  double beta_at(int t) const { return beta[static_cast<std::size_t>(t - 1)]; }
  double alpha_at(int t) const { return alpha[static_cast<std::size_t>(t - 1)]; }
  double alpha_bar_at(int t) const { return alpha_bar[static_cast<std::size_t>(t - 1)]; }
};

inline constexpr double kBetaStart = 1e-4;
inline constexpr double kBetaEnd = 0.02;

/// Linear beta from 1e-4 to 0.02 over T steps. Throws ConfigError when T < 1.
NoiseSchedule build_schedule(int T);

/// sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.
Vector forward_noise(const Vector& x0, int t, const Vector& eps, const NoiseSchedule& sched);

struct DenoiserParams {
  nn::Layers layers;  // 3 dense layers
  int embed_dim = 16;

  int latent_dim() const { return static_cast<int>(layers.back().out_dim()); }
};

DenoiserParams init_denoiser(int latent_dim, int hidden, int embed_dim, Rng& rng);

/// Sinusoidal embedding of integer timesteps, embed_dim x n.
Matrix timestep_embedding(const std::vector<int>& t, int embed_dim);

/// eps_theta(x_t, t) for a batch (d x n).
Matrix predict_noise(const DenoiserParams& params, const Matrix& x_t, const std::vector<int>& t);

/// Explicit (t, eps) draws so losses can be evaluated deterministically.
struct NoiseDraws {
  std::vector<int> t;  // one per column of x0
  Matrix eps;          // d x n
};

NoiseDraws draw_noise(int latent_dim, int n, const NoiseSchedule& sched, Rng& rng);

struct DistillationContext {
  std::optional<Vector> integrated_knowledge;  // teacher latent; absent -> plain loss
  double lambda = 1.0;
  double delta = 2.0;  // softmax temperature

  void validate() const;
};

struct LossResult {
  double loss = 0.0;    // simple + lambda * kl
  double simple = 0.0;  // batch mean of ||eps - eps_theta||^2
  double kl = 0.0;      // batch mean KL(softmax(x0_hat/delta) || softmax(m/delta))
  nn::Layers grad;      // gradient of `loss`; empty when not requested
};

/// Simplified objective. An eps_theta == 0 network scores latent_dim in expectation.
LossResult simple_loss(const DenoiserParams& params, const Matrix& x0, const NoiseDraws& draws,
                       const NoiseSchedule& sched, bool with_gradient = true);
LossResult simple_loss(const DenoiserParams& params, const Matrix& x0, const NoiseSchedule& sched, Rng& rng);

/// Batch mean of simple term plus lambda * KL between the softmaxed predicted
/// clean latent x0_hat = (x_t - sqrt(1 - abar_t) eps_theta) / sqrt(abar_t) and
/// the softmaxed integrated knowledge. The knowledge is a constant target.
LossResult distill_loss(const DenoiserParams& params, const Matrix& x0, const DistillationContext& ctx,
                        const NoiseDraws& draws, const NoiseSchedule& sched, bool with_gradient = true);
LossResult distill_loss(const DenoiserParams& params, const Matrix& x0, const DistillationContext& ctx,
                        const NoiseSchedule& sched, Rng& rng);

/// KL(softmax(a/delta) || softmax(b/delta)).
double softmax_kl(const Vector& a, const Vector& b, double delta);

struct TrainOptions {
  int episodes = 300;  // one episode = one pass over the local latents
  double lr = 1e-3;
  int batch = 32;
};

struct TrainResult {
  DenoiserParams params;
  std::vector<double> losses;  // per episode, mean over its batches
};

/// SGD on the columns of `latents` (d x n). Throws TrainingError on divergence.
TrainResult local_train(const DenoiserParams& params, const Matrix& latents, const DistillationContext& ctx,
                        const NoiseSchedule& sched, const TrainOptions& options, Rng& rng);

/// Ancestral sampling from x_T ~ N(0, I); returns d x count.
Matrix sample(const DenoiserParams& params, const NoiseSchedule& sched, int count, Rng& rng);

/// Trailing moving average with the given window.
std::vector<double> smooth(const std::vector<double>& values, std::size_t window);

checkpoint::NamedArrays to_arrays(const DenoiserParams& params);
DenoiserParams from_arrays(const checkpoint::NamedArrays& arrays);

}  // namespace vecache::ldpm
