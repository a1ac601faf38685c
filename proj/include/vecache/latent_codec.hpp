#pragma once

// Encoder/decoder pair over length-K rating vectors. The encoder output is
// both the vehicle's hash code and the latent the diffusion model trains on.
//
//   encoder: K -> hidden (ReLU) -> latent (linear)
//   decoder: latent -> hidden (ReLU) -> K (logistic)

#include <vector>

#include "vecache/checkpoint.hpp"
#include "vecache/nn.hpp"
#include "vecache/rng.hpp"

namespace vecache::codec {

using nn::Matrix;
using nn::Vector;

struct CodecParams {
  nn::Layers encoder;  // 2 layers
  nn::Layers decoder;  // 2 layers

  int input_dim() const { return static_cast<int>(encoder.front().in_dim()); }
  int hidden_dim() const { return static_cast<int>(encoder.front().out_dim()); }
  int latent_dim() const { return static_cast<int>(encoder.back().out_dim()); }
};

struct CodecHyper {
  int hidden = 100;
  int latent_dim = 16;
  double lr = 1e-2;
  int batch = 32;
  int epochs = 60;
  int finetune_epochs = 10;
  /// Loss weight of unrated (zero) entries; 0 gives the purely masked loss.
  double unrated_weight = 0.1;
  double validation_fraction = 0.1;
};

/// Random weights. When `data` is given (K x n), the output bias starts at
/// the logit of each content's weighted mean target.
CodecParams init_codec(int input_dim, const CodecHyper& hyper, Rng& rng, const Matrix* data = nullptr);

struct ReconstructionLoss {
  double loss = 0.0;        // weighted squared error, summed over contents, averaged over the batch
  double masked_mse = 0.0;  // mean squared error over rated entries only
  CodecParams grad;         // d loss / d params (empty layers when not requested)
};

ReconstructionLoss reconstruction_loss(const CodecParams& codec, const Matrix& batch, double unrated_weight,
                                       bool with_gradient);

struct CodecTraining {
  CodecParams params;
  std::vector<double> train_loss;      // full-pass training loss after each epoch
  std::vector<double> validation_mse;  // masked MSE on the held-out columns, per epoch
  double initial_validation_mse = 0.0;
};

/// SGD on the columns of `data` (K x n). Throws TrainingError on divergence.
CodecTraining pretrain_codec(const Matrix& data, const CodecHyper& hyper, Rng& rng);

/// Returns an updated copy trained on `local` only; `base` is untouched.
CodecParams fine_tune(const CodecParams& base, const Matrix& local, int epochs, const CodecHyper& hyper, Rng& rng);

Vector encode(const CodecParams& codec, const Vector& ratings);
Matrix encode_batch(const CodecParams& codec, const Matrix& ratings);
Vector decode(const CodecParams& codec, const Vector& latent);
Matrix decode_batch(const CodecParams& codec, const Matrix& latents);

double masked_mse(const CodecParams& codec, const Matrix& data);

checkpoint::NamedArrays to_arrays(const CodecParams& codec);
CodecParams from_arrays(const checkpoint::NamedArrays& arrays);

}  // namespace vecache::codec
