#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "proto_ope/autodiff.hpp"
#include "proto_ope/common.hpp"
#include "proto_ope/trajectory.hpp"

namespace proto_ope {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Named parameter set. std::map keeps iteration order deterministic for the
// optimizer and for serialization.
using Params = std::map<std::string, Mat>;
using VarMap = std::map<std::string, ad::Var>;

// Per-feature affine normalization fitted on training data. Features with
// (near) zero variance are centered but not scaled.
struct Standardizer {
  Vec mean;
  Vec scale;  // 1 / std

  Mat apply(const Mat& rows) const;  // samples as rows
  static Standardizer fit(const Mat& rows);
  static Standardizer identity(int dim);
};

enum class EncoderKind { feedforward, recurrent };

const char* to_string(EncoderKind k);
EncoderKind encoder_kind_from_string(const std::string& s);

// Two-layer encoder into the latent space. The feedforward variant reads the
// last context-action token of a history (rectifier activations); the
// recurrent variant is a stack of Elman cells (tanh) consuming the whole
// token sequence, encoding = final hidden state of the top layer.
struct EncoderConfig {
  EncoderKind kind = EncoderKind::feedforward;
  int input_dim = 0;
  int hidden = 64;
  int latent = 64;
};

Params init_encoder_params(const EncoderConfig& cfg, Rng& rng);

// Token sequences for a batch of histories, prepared for column-wise batch
// processing. Column i of step_tokens[s] holds sample i's token at time s
// (zero once the sequence is exhausted; `active[s][i]` marks liveness).
struct BatchInputs {
  int m = 0;
  Mat last_tokens;                       // input_dim x m
  std::vector<Mat> step_tokens;          // recurrent only
  std::vector<std::vector<char>> active; // recurrent only
};

// Token at time t of a trajectory: [standardized context features,
// one-hot of the previous action] (zero action block at t = 0).
int token_dim(int feature_dim, int n_actions);
Vec make_token(const Trajectory& tr, int t, const Mat& features_std, int n_actions);
BatchInputs build_inputs(const TrajectoryDataset& data, const Mat& features_std, int n_actions,
                         std::span<const SubseqRef> samples, EncoderKind kind);

// Differentiable batched encoding; returns latent x m.
ad::Var encode_batch(ad::Tape& tape, const EncoderConfig& cfg, const VarMap& params,
                     const BatchInputs& inputs);

// Plain (non-tape) forward pass. Single-history callers go through this with
// m = 1, which keeps repeated encodings of the same history bit-identical.
Mat encode_plain(const EncoderConfig& cfg, const Params& params, const BatchInputs& inputs);
Vec encode_single(const EncoderConfig& cfg, const Params& params, const Trajectory& tr, int t,
                  const Mat& features_std, int n_actions);

// Builds a tape over the given parameters, evaluates the objective closure,
// and returns the scalar loss with exact reverse-mode gradients (zero for
// parameters the objective never touched). Non-finite results raise
// NumericError instead of propagating NaN.
struct LossGrad {
  double loss = 0.0;
  std::map<std::string, Mat> grads;
};
LossGrad loss_and_grad(const Params& params,
                       const std::function<ad::Var(ad::Tape&, const VarMap&)>& objective);

// Adam with decoupled weight decay: the decay shrinks parameters directly and
// never enters the moment estimates.
struct AdamConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::map<std::string, Mat> m;
  std::map<std::string, Mat> v;
  long step = 0;
};

void adam_update(Params& params, const std::map<std::string, Mat>& grads, AdamState& state,
                 const AdamConfig& cfg);

}  // namespace proto_ope
