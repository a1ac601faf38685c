#include "vecache/nn.hpp"

#include <cmath>

#include "vecache/error.hpp"

namespace vecache::nn {

Dense make_dense(Eigen::Index in, Eigen::Index out, Init init, Rng& rng) {
  Dense d{Matrix::Zero(out, in), Vector::Zero(out)};
  if (init == Init::Zero) return d;
  const double stddev = init == Init::He ? std::sqrt(2.0 / static_cast<double>(in))
                                         : std::sqrt(2.0 / static_cast<double>(in + out));
  std::normal_distribution<double> normal(0.0, stddev);
  // Column-major fill order keeps the draw sequence fixed for a given shape.
  for (Eigen::Index c = 0; c < d.w.cols(); ++c)
    for (Eigen::Index r = 0; r < d.w.rows(); ++r) d.w(r, c) = normal(rng);
  return d;
}

Layers zeros_like(const Layers& layers) {
  Layers out;
  out.reserve(layers.size());
  for (const auto& l : layers)
    out.push_back({Matrix::Zero(l.w.rows(), l.w.cols()), Vector::Zero(l.b.size())});
  return out;
}

void axpy(Layers& dst, const Layers& src, double scale) {
  if (dst.size() != src.size()) throw ContractViolation("axpy: layer count mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i].w.noalias() += scale * src[i].w;
    dst[i].b.noalias() += scale * src[i].b;
  }
}

std::size_t parameter_count(const Layers& layers) {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.w.size() + l.b.size());
  return n;
}

bool all_finite(const Layers& layers) {
  for (const auto& l : layers)
    if (!l.w.allFinite() || !l.b.allFinite()) return false;
  return true;
}

std::vector<double> flatten(const Layers& layers) {
  std::vector<double> flat;
  flat.reserve(parameter_count(layers));
  for (const auto& l : layers) {
    flat.insert(flat.end(), l.w.data(), l.w.data() + l.w.size());
    flat.insert(flat.end(), l.b.data(), l.b.data() + l.b.size());
  }
  return flat;
}

void unflatten(Layers& layers, const std::vector<double>& flat) {
  if (flat.size() != parameter_count(layers)) throw ContractViolation("unflatten: size mismatch");
  std::size_t pos = 0;
  for (auto& l : layers) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), l.w.size(), l.w.data());
    pos += static_cast<std::size_t>(l.w.size());
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), l.b.size(), l.b.data());
    pos += static_cast<std::size_t>(l.b.size());
  }
}

Vector softmax(const Vector& x, double temperature) {
  Vector z = x / temperature;
  z.array() -= z.maxCoeff();
  z = z.array().exp().matrix();
  return z / z.sum();
}

}  // namespace vecache::nn
