#pragma once

// Minimal dense-network plumbing shared by the codec and the denoiser.
// Activations are column-major batches: features x batch.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "vecache/rng.hpp"

namespace vecache::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Dense {
  Matrix w;  // out x in
  Vector b;  // out

  Eigen::Index in_dim() const { return w.cols(); }
  Eigen::Index out_dim() const { return w.rows(); }

  Matrix forward(const Matrix& x) const { return (w * x).colwise() + b; }
};

using Layers = std::vector<Dense>;

enum class Init { He, Xavier, Zero };

Dense make_dense(Eigen::Index in, Eigen::Index out, Init init, Rng& rng);

Layers zeros_like(const Layers& layers);

/// dst += scale * src, layer by layer.
void axpy(Layers& dst, const Layers& src, double scale);

std::size_t parameter_count(const Layers& layers);
bool all_finite(const Layers& layers);

/// Flat views used by finite-difference checks and checkpoint I/O.
std::vector<double> flatten(const Layers& layers);
void unflatten(Layers& layers, const std::vector<double>& flat);

inline Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }
inline Matrix relu_mask(const Matrix& pre) { return (pre.array() > 0.0).cast<double>().matrix(); }
inline Matrix sigmoid(const Matrix& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

/// Numerically stable softmax of x / temperature.
Vector softmax(const Vector& x, double temperature);

}  // namespace vecache::nn
