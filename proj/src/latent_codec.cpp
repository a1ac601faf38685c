#include "vecache/latent_codec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vecache/error.hpp"

namespace vecache::codec {

namespace {

struct Forward {
  Matrix a1, h1, z, a3, h2, y;
};

Forward forward(const CodecParams& c, const Matrix& x) {
  Forward f;
  f.a1 = c.encoder[0].forward(x);
  f.h1 = nn::relu(f.a1);
  f.z = c.encoder[1].forward(f.h1);
  f.a3 = c.decoder[0].forward(f.z);
  f.h2 = nn::relu(f.a3);
  f.y = nn::sigmoid(c.decoder[1].forward(f.h2));
  return f;
}

Matrix loss_weights(const Matrix& x, double unrated_weight) {
  return (x.array() > 0.0).select(Matrix::Ones(x.rows(), x.cols()), unrated_weight);
}

void check_input(const CodecParams& c, Eigen::Index rows) {
  if (rows != c.input_dim()) throw ContractViolation("codec: input has " + std::to_string(rows) +
                                                     " rows, expected " + std::to_string(c.input_dim()));
}

void sgd_epoch(CodecParams& c, const Matrix& data, const CodecHyper& hyper, Rng& rng, double& epoch_loss) {
  const auto n = data.cols();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  const Eigen::Index batch = std::max(1, hyper.batch);
  double total = 0.0;
  int batches = 0;
  for (Eigen::Index start = 0; start < n; start += batch) {
    const Eigen::Index len = std::min(batch, n - start);
    Matrix x(data.rows(), len);
    for (Eigen::Index j = 0; j < len; ++j) x.col(j) = data.col(order[static_cast<std::size_t>(start + j)]);
    auto r = reconstruction_loss(c, x, hyper.unrated_weight, true);
    nn::axpy(c.encoder, r.grad.encoder, -hyper.lr);
    nn::axpy(c.decoder, r.grad.decoder, -hyper.lr);
    total += r.loss;
    ++batches;
  }
  epoch_loss = batches ? total / batches : 0.0;
}

}  // namespace

CodecParams init_codec(int input_dim, const CodecHyper& hyper, Rng& rng, const Matrix* data) {
  if (input_dim < 1 || hyper.hidden < 1 || hyper.latent_dim < 1) throw ConfigError("codec: dimensions must be positive");
  CodecParams c;
  c.encoder.push_back(nn::make_dense(input_dim, hyper.hidden, nn::Init::He, rng));
  c.encoder.push_back(nn::make_dense(hyper.hidden, hyper.latent_dim, nn::Init::Xavier, rng));
  c.decoder.push_back(nn::make_dense(hyper.latent_dim, hyper.hidden, nn::Init::He, rng));
  c.decoder.push_back(nn::make_dense(hyper.hidden, input_dim, nn::Init::Xavier, rng));
  if (data != nullptr && data->cols() > 0) {
    check_input(c, data->rows());
    const Matrix w = loss_weights(*data, hyper.unrated_weight);
    const Vector num = (w.array() * data->array()).rowwise().sum();
    const Vector den = w.rowwise().sum();
    const double rated_mean = (*data).sum() / std::max(1.0, static_cast<double>((data->array() > 0.0).count()));
    for (Eigen::Index k = 0; k < input_dim; ++k) {
      const double p = std::clamp(den(k) > 0.0 ? num(k) / den(k) : rated_mean, 1e-4, 1.0 - 1e-4);
      c.decoder[1].b(k) = std::log(p / (1.0 - p));
    }
  }
  return c;
}

ReconstructionLoss reconstruction_loss(const CodecParams& c, const Matrix& x, double unrated_weight,
                                       bool with_gradient) {
  check_input(c, x.rows());
  const auto batch = static_cast<double>(std::max<Eigen::Index>(1, x.cols()));
  const Forward f = forward(c, x);
  const Matrix w = loss_weights(x, unrated_weight);
  const Matrix err = f.y - x;

  ReconstructionLoss out;
  out.loss = (w.array() * err.array().square()).sum() / batch;
  const auto rated = (x.array() > 0.0).count();
  out.masked_mse = rated ? ((x.array() > 0.0).select(err.array().square(), 0.0)).sum() / static_cast<double>(rated) : 0.0;
  if (!with_gradient) return out;

  const Matrix d4 = ((2.0 / batch) * w.array() * err.array() * f.y.array() * (1.0 - f.y.array())).matrix();
  out.grad.decoder = nn::zeros_like(c.decoder);
  out.grad.encoder = nn::zeros_like(c.encoder);
  out.grad.decoder[1].w.noalias() = d4 * f.h2.transpose();
  out.grad.decoder[1].b = d4.rowwise().sum();
  const Matrix d3 = ((c.decoder[1].w.transpose() * d4).array() * nn::relu_mask(f.a3).array()).matrix();
  out.grad.decoder[0].w.noalias() = d3 * f.z.transpose();
  out.grad.decoder[0].b = d3.rowwise().sum();
  const Matrix dz = c.decoder[0].w.transpose() * d3;
  out.grad.encoder[1].w.noalias() = dz * f.h1.transpose();
  out.grad.encoder[1].b = dz.rowwise().sum();
  const Matrix d1 = ((c.encoder[1].w.transpose() * dz).array() * nn::relu_mask(f.a1).array()).matrix();
  out.grad.encoder[0].w.noalias() = d1 * x.transpose();
  out.grad.encoder[0].b = d1.rowwise().sum();
  return out;
}

CodecTraining pretrain_codec(const Matrix& data, const CodecHyper& hyper, Rng& rng) {
  if (data.cols() == 0) throw ConfigError("pretrain_codec: public data is empty");
  if (hyper.epochs < 0) throw ConfigError("codec.epochs must be >= 0");

  // Hold out a validation slice of columns; a single column validates on itself.
  std::vector<Eigen::Index> cols(static_cast<std::size_t>(data.cols()));
  std::iota(cols.begin(), cols.end(), Eigen::Index{0});
  std::shuffle(cols.begin(), cols.end(), rng);
  auto n_val = static_cast<Eigen::Index>(std::floor(hyper.validation_fraction * static_cast<double>(data.cols())));
  if (data.cols() >= 2) n_val = std::clamp<Eigen::Index>(n_val, 1, data.cols() - 1);
  Matrix train(data.rows(), data.cols() - n_val);
  Matrix val(data.rows(), n_val > 0 ? n_val : data.cols());
  for (Eigen::Index j = 0; j < train.cols(); ++j) train.col(j) = data.col(cols[static_cast<std::size_t>(j + n_val)]);
  if (n_val > 0)
    for (Eigen::Index j = 0; j < n_val; ++j) val.col(j) = data.col(cols[static_cast<std::size_t>(j)]);
  else
    val = data;

  CodecTraining out;
  out.params = init_codec(static_cast<int>(data.rows()), hyper, rng, &train);
  out.initial_validation_mse = masked_mse(out.params, val);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    double loss = 0.0;
    sgd_epoch(out.params, train, hyper, rng, loss);
    if (!std::isfinite(loss) || !nn::all_finite(out.params.encoder) || !nn::all_finite(out.params.decoder))
      throw TrainingError(epoch, "codec loss became non-finite");
    // Full-pass loss after the epoch; the running batch mean is too noisy with few batches.
    out.train_loss.push_back(reconstruction_loss(out.params, train, hyper.unrated_weight, false).loss);
    out.validation_mse.push_back(masked_mse(out.params, val));
  }
  return out;
}

CodecParams fine_tune(const CodecParams& base, const Matrix& local, int epochs, const CodecHyper& hyper, Rng& rng) {
  check_input(base, local.rows());
  CodecParams c = base;
  if (local.cols() == 0) return c;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    double loss = 0.0;
    sgd_epoch(c, local, hyper, rng, loss);
    if (!std::isfinite(loss)) throw TrainingError(epoch, "codec fine-tuning loss became non-finite");
  }
  return c;
}

Vector encode(const CodecParams& c, const Vector& ratings) { return encode_batch(c, ratings); }

Matrix encode_batch(const CodecParams& c, const Matrix& ratings) {
  check_input(c, ratings.rows());
  return c.encoder[1].forward(nn::relu(c.encoder[0].forward(ratings)));
}

Vector decode(const CodecParams& c, const Vector& latent) { return decode_batch(c, latent); }

Matrix decode_batch(const CodecParams& c, const Matrix& latents) {
  if (latents.rows() != c.latent_dim()) throw ContractViolation("decode: latent dimension mismatch");
  return nn::sigmoid(c.decoder[1].forward(nn::relu(c.decoder[0].forward(latents))));
}

double masked_mse(const CodecParams& c, const Matrix& data) {
  return reconstruction_loss(c, data, 0.0, false).masked_mse;
}

checkpoint::NamedArrays to_arrays(const CodecParams& c) {
  checkpoint::NamedArrays a;
  a.put("enc.w1", c.encoder[0].w);
  a.put("enc.b1", c.encoder[0].b);
  a.put("enc.w2", c.encoder[1].w);
  a.put("enc.b2", c.encoder[1].b);
  a.put("dec.w1", c.decoder[0].w);
  a.put("dec.b1", c.decoder[0].b);
  a.put("dec.w2", c.decoder[1].w);
  a.put("dec.b2", c.decoder[1].b);
  return a;
}

CodecParams from_arrays(const checkpoint::NamedArrays& a) {
  CodecParams c;
  c.encoder = {{a.get("enc.w1"), a.get("enc.b1")}, {a.get("enc.w2"), a.get("enc.b2")}};
  c.decoder = {{a.get("dec.w1"), a.get("dec.b1")}, {a.get("dec.w2"), a.get("dec.b2")}};
  return c;
}

}  // namespace vecache::codec
