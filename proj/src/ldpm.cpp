#include "vecache/ldpm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vecache/error.hpp"

namespace vecache::ldpm {

namespace {

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

void check_step(int t, const NoiseSchedule& sched) {
  if (t < 1 || t > sched.T)
    throw ContractViolation("timestep " + std::to_string(t) + " outside [1, " + std::to_string(sched.T) + "]");
}

struct Forward {
  Matrix input, a0, h0, a1, h1, out;
};

Forward run(const DenoiserParams& p, const Matrix& x_t, const std::vector<int>& t) {
  if (x_t.rows() != p.latent_dim()) throw ContractViolation("denoiser: latent dimension mismatch");
  if (static_cast<Eigen::Index>(t.size()) != x_t.cols()) throw ContractViolation("denoiser: one timestep per column");
  Forward f;
  f.input.resize(x_t.rows() + p.embed_dim, x_t.cols());
  f.input.topRows(x_t.rows()) = x_t;
  f.input.bottomRows(p.embed_dim) = timestep_embedding(t, p.embed_dim);
  f.a0 = p.layers[0].forward(f.input);
  f.h0 = nn::relu(f.a0);
  f.a1 = p.layers[1].forward(f.h0);
  f.h1 = nn::relu(f.a1);
  f.out = p.layers[2].forward(f.h1);
  return f;
}

nn::Layers backward(const DenoiserParams& p, const Forward& f, const Matrix& d_out) {
  nn::Layers g = nn::zeros_like(p.layers);
  g[2].w.noalias() = d_out * f.h1.transpose();
  g[2].b = d_out.rowwise().sum();
  const Matrix d1 = ((p.layers[2].w.transpose() * d_out).array() * nn::relu_mask(f.a1).array()).matrix();
  g[1].w.noalias() = d1 * f.h0.transpose();
  g[1].b = d1.rowwise().sum();
  const Matrix d0 = ((p.layers[1].w.transpose() * d1).array() * nn::relu_mask(f.a0).array()).matrix();
  g[0].w.noalias() = d0 * f.input.transpose();
  g[0].b = d0.rowwise().sum();
  return g;
}

Vector log_softmax(const Vector& x, double temperature) {
  Vector z = x / temperature;
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  return (z.array() - lse).matrix();
}

}  // namespace

NoiseSchedule build_schedule(int T) {
  if (T < 1) throw ConfigError("ldpm.T must be >= 1");
  NoiseSchedule s;
  s.T = T;
  double running = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double beta = T == 1 ? kBetaStart : kBetaStart + (kBetaEnd - kBetaStart) * (t - 1) / (T - 1);
    s.beta.push_back(beta);
    s.alpha.push_back(1.0 - beta);
    running *= 1.0 - beta;
    s.alpha_bar.push_back(running);
  }
  return s;
}

Vector forward_noise(const Vector& x0, int t, const Vector& eps, const NoiseSchedule& sched) {
  check_step(t, sched);
  if (x0.size() != eps.size()) throw ContractViolation("forward_noise: x0 and eps differ in size");
  const double ab = sched.alpha_bar_at(t);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

DenoiserParams init_denoiser(int latent_dim, int hidden, int embed_dim, Rng& rng) {
  if (latent_dim < 1 || hidden < 1 || embed_dim < 0) throw ConfigError("denoiser: dimensions must be positive");
  DenoiserParams p;
  p.embed_dim = embed_dim;
  p.layers.push_back(nn::make_dense(latent_dim + embed_dim, hidden, nn::Init::He, rng));
  p.layers.push_back(nn::make_dense(hidden, hidden, nn::Init::He, rng));
  // Zero output layer: an untrained denoiser predicts eps = 0.
  p.layers.push_back(nn::make_dense(hidden, latent_dim, nn::Init::Zero, rng));
  return p;
}

Matrix timestep_embedding(const std::vector<int>& t, int embed_dim) {
  Matrix e = Matrix::Zero(embed_dim, static_cast<Eigen::Index>(t.size()));
  const int half = embed_dim / 2;
  for (int j = 0; j < half; ++j) {
    const double freq = std::exp(-std::log(10000.0) * j / std::max(1, half));
    for (std::size_t c = 0; c < t.size(); ++c) {
      e(j, static_cast<Eigen::Index>(c)) = std::sin(t[c] * freq);
      e(half + j, static_cast<Eigen::Index>(c)) = std::cos(t[c] * freq);
    }
  }
  return e;
}

Matrix predict_noise(const DenoiserParams& params, const Matrix& x_t, const std::vector<int>& t) {
  return run(params, x_t, t).out;
}

NoiseDraws draw_noise(int latent_dim, int n, const NoiseSchedule& sched, Rng& rng) {
  NoiseDraws d;
  std::uniform_int_distribution<int> step(1, sched.T);
  d.t.resize(static_cast<std::size_t>(n));
  for (auto& t : d.t) t = step(rng);
  d.eps = standard_normal(latent_dim, n, rng);
  return d;
}

void DistillationContext::validate() const {
  if (!(delta > 0.0)) throw ConfigError("ldpm.delta must be > 0");
  if (!(lambda >= 0.0)) throw ConfigError("ldpm.lambda must be >= 0");
}

double softmax_kl(const Vector& a, const Vector& b, double delta) {
  if (a.size() != b.size()) throw ContractViolation("softmax_kl: size mismatch");
  const Vector lp = log_softmax(a, delta);
  const Vector lq = log_softmax(b, delta);
  return std::max(0.0, (lp.array().exp() * (lp - lq).array()).sum());
}

LossResult distill_loss(const DenoiserParams& params, const Matrix& x0, const DistillationContext& ctx,
                        const NoiseDraws& draws, const NoiseSchedule& sched, bool with_gradient) {
  ctx.validate();
  const auto n = x0.cols();
  if (n == 0) throw ContractViolation("loss: empty batch");
  if (draws.eps.rows() != x0.rows() || draws.eps.cols() != n || static_cast<Eigen::Index>(draws.t.size()) != n)
    throw ContractViolation("loss: draws do not match the batch");

  Vector s0(n), s1(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int t = draws.t[static_cast<std::size_t>(j)];
    check_step(t, sched);
    s0(j) = std::sqrt(sched.alpha_bar_at(t));
    s1(j) = std::sqrt(1.0 - sched.alpha_bar_at(t));
  }
  const Matrix x_t = x0 * s0.asDiagonal() + draws.eps * s1.asDiagonal();
  const Forward f = run(params, x_t, draws.t);
  const Matrix residual = f.out - draws.eps;
  const double inv_n = 1.0 / static_cast<double>(n);

  LossResult r;
  r.simple = residual.squaredNorm() * inv_n;
  Matrix d_out;
  if (with_gradient) d_out = 2.0 * inv_n * residual;

  const bool distill = ctx.integrated_knowledge.has_value() && ctx.lambda > 0.0;
  if (distill) {
    const Vector& teacher = *ctx.integrated_knowledge;
    if (teacher.size() != x0.rows()) throw ContractViolation("distill_loss: knowledge dimension mismatch");
    const Vector log_q = log_softmax(teacher, ctx.delta);
    double kl_sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const Vector x0_hat = (x_t.col(j) - s1(j) * f.out.col(j)) / s0(j);
      const Vector log_p = log_softmax(x0_hat, ctx.delta);
      const Vector p = log_p.array().exp();
      const double kl = (p.array() * (log_p - log_q).array()).sum();
      kl_sum += kl;
      if (with_gradient) {
        // d KL / d x0_hat, then chain through x0_hat = (x_t - s1 eps_theta) / s0.
        const Vector d_x0_hat = (p.array() * ((log_p - log_q).array() - kl)).matrix() / ctx.delta;
        d_out.col(j) += ctx.lambda * inv_n * (-s1(j) / s0(j)) * d_x0_hat;
      }
    }
    r.kl = std::max(0.0, kl_sum * inv_n);
  }
  r.loss = r.simple + (distill ? ctx.lambda * r.kl : 0.0);
  if (with_gradient) r.grad = backward(params, f, d_out);
  return r;
}

LossResult simple_loss(const DenoiserParams& params, const Matrix& x0, const NoiseDraws& draws,
                       const NoiseSchedule& sched, bool with_gradient) {
  return distill_loss(params, x0, DistillationContext{std::nullopt, 0.0, 1.0}, draws, sched, with_gradient);
}

LossResult simple_loss(const DenoiserParams& params, const Matrix& x0, const NoiseSchedule& sched, Rng& rng) {
  const auto draws = draw_noise(static_cast<int>(x0.rows()), static_cast<int>(x0.cols()), sched, rng);
  return simple_loss(params, x0, draws, sched, true);
}

LossResult distill_loss(const DenoiserParams& params, const Matrix& x0, const DistillationContext& ctx,
                        const NoiseSchedule& sched, Rng& rng) {
  const auto draws = draw_noise(static_cast<int>(x0.rows()), static_cast<int>(x0.cols()), sched, rng);
  return distill_loss(params, x0, ctx, draws, sched, true);
}

TrainResult local_train(const DenoiserParams& params, const Matrix& latents, const DistillationContext& ctx,
                        const NoiseSchedule& sched, const TrainOptions& options, Rng& rng) {
  ctx.validate();
  if (options.episodes < 0) throw ConfigError("ldpm.episodes must be >= 0");
  TrainResult out{params, {}};
  const auto n = latents.cols();
  if (n == 0 || options.episodes == 0) return out;
  if (latents.rows() != params.latent_dim()) throw ContractViolation("local_train: latent dimension mismatch");

  const Eigen::Index batch = std::min<Eigen::Index>(std::max(1, options.batch), n);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  out.losses.reserve(static_cast<std::size_t>(options.episodes));
  for (int episode = 0; episode < options.episodes; ++episode) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    int batches = 0;
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index len = std::min(batch, n - start);
      Matrix x0(latents.rows(), len);
      for (Eigen::Index j = 0; j < len; ++j) x0.col(j) = latents.col(order[static_cast<std::size_t>(start + j)]);
      auto r = distill_loss(out.params, x0, ctx, sched, rng);
      if (!std::isfinite(r.loss)) throw TrainingError(episode, "denoiser loss became non-finite");
      nn::axpy(out.params.layers, r.grad, -options.lr);
      total += r.loss;
      ++batches;
    }
    out.losses.push_back(total / batches);
  }
  if (!nn::all_finite(out.params.layers)) throw TrainingError(options.episodes - 1, "denoiser weights became non-finite");
  return out;
}

Matrix sample(const DenoiserParams& params, const NoiseSchedule& sched, int count, Rng& rng) {
  const int d = params.latent_dim();
  if (count <= 0) return Matrix(d, 0);
  Matrix x = standard_normal(d, count, rng);
  std::vector<int> steps(static_cast<std::size_t>(count));
  for (int t = sched.T; t >= 1; --t) {
    std::fill(steps.begin(), steps.end(), t);
    const Matrix eps = predict_noise(params, x, steps);
    const double beta = sched.beta_at(t);
    x = (x - (beta / std::sqrt(1.0 - sched.alpha_bar_at(t))) * eps) / std::sqrt(sched.alpha_at(t));
    if (t > 1) x += std::sqrt(beta) * standard_normal(d, count, rng);
  }
  if (!x.allFinite()) throw TrainingError(0, "sampler produced non-finite values");
  return x;
}

std::vector<double> smooth(const std::vector<double>& values, std::size_t window) {
  std::vector<double> out(values.size());
  if (window == 0) window = 1;
  double running = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    running += values[i];
    if (i >= window) running -= values[i - window];
    out[i] = running / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

checkpoint::NamedArrays to_arrays(const DenoiserParams& p) {
  checkpoint::NamedArrays a;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    a.put("den.w" + std::to_string(i + 1), p.layers[i].w);
    a.put("den.b" + std::to_string(i + 1), p.layers[i].b);
  }
  a.put("den.embed_dim", Matrix::Constant(1, 1, p.embed_dim));
  return a;
}

DenoiserParams from_arrays(const checkpoint::NamedArrays& a) {
  DenoiserParams p;
  p.embed_dim = static_cast<int>(a.get("den.embed_dim")(0, 0));
  for (int i = 1; i <= 3; ++i)
    p.layers.push_back({a.get("den.w" + std::to_string(i)), a.get("den.b" + std::to_string(i))});
  return p;
}

}  // namespace vecache::ldpm
