#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "proto_ope/net.hpp"

namespace proto_ope {

// Behavior-policy estimator built on case-based reasoning: histories are
// encoded into a latent space, compared to n latent prototypes through an
// RBF kernel with unit bandwidth, and a softmax head over the similarity
// vector yields action probabilities. After training, every latent prototype
// is pinned to the encoding of a real training subsequence.
struct PrototypeModel {
  EncoderConfig encoder;
  Params params;
  Standardizer standardizer;      // over raw context features
  Mat features;                   // raw context feature table (n_states x d)
  Mat latent_prototypes;          // latent x n, one prototype per column
  std::vector<SubseqRef> prototype_refs;
  Mat coeffs;                     // n_actions x n  (matrix B)
  Vec intercept;                  // n_actions     (bias c)
  int n = 0;
  int q = 0;
  int n_actions = 0;
  double d_min = 2.0;
  double lambda_d = 1e-3;
  double lambda_c = 1e-3;
  double lambda_e = 1e-3;

  Mat features_std() const { return standardizer.apply(features); }
};

struct TrainConfig {
  int n = 10;
  int q = 2;
  double d_min = 2.0;
  double lambda_d = 1e-3;
  double lambda_c = 1e-3;
  double lambda_e = 1e-3;
  int epochs = 30;
  int batch_size = 128;
  int projection_period = 5;  // epochs between projections
  std::uint64_t seed = 0;
  EncoderKind encoder = EncoderKind::feedforward;
  int hidden = 64;
  int latent = 64;
  AdamConfig adam;

  void validate() const;
};

// Untruncated RBF similarities s_j = exp(-||z~_j - z||^2).
Vec similarity_vector(const PrototypeModel& model, const Vec& z);

// Keep entries >= the q-th largest (ties at the threshold survive), zero the
// rest. Applied independently per input at prediction time only.
Vec truncate_similarities(const Vec& s, int q);

Vec encode_history(const PrototypeModel& model, const Trajectory& tr, int t);

// softmax(B * truncate(similarities, q) + c); strictly positive.
Vec propensities(const PrototypeModel& model, const Trajectory& tr, int t);
// Action probabilities at the prototype's own subsequence, one row per
// prototype (the estimate p^_j of the paper-facing report).
Mat prototype_propensities(const PrototypeModel& model, const TrajectoryDataset& train);

// p(J = j | h): similarities normalized over prototypes (untruncated),
// evaluated in log-space so distant prototypes cannot underflow to 0/0.
Vec assignment_probs(const PrototypeModel& model, const Trajectory& tr, int t);
Vec assignment_probs_from_encoding(const PrototypeModel& model, const Vec& z);

// Batched predictions for dataset-scale work (metrics, cross-validation):
// rows are samples, columns actions. Truncation applied per sample.
Mat predict_probs(const PrototypeModel& model, const TrajectoryDataset& data,
                  std::span<const SubseqRef> samples);

// Regularized objective J = NLL + lambda_d R_d + lambda_c R_c + lambda_e R_e
// on a batch. NLL uses untruncated similarities (truncation is a pure
// prediction-time transform).
double objective(const PrototypeModel& model, const TrajectoryDataset& data,
                 std::span<const SubseqRef> batch);

// Snap each latent prototype to the encoding of its nearest training
// subsequence; ties break on (trajectory, time) order.
void project(PrototypeModel& model, const TrajectoryDataset& train);

PrototypeModel train_prototype_model(const TrajectoryDataset& train, const Mat& features,
                                     int n_actions, const TrainConfig& cfg);

// 3-fold cross-validation over the (d_min, lambda_d) grid; selects by mean
// held-out NLL of the truncated predictor.
struct CvChoice {
  double d_min = 0.0;
  double lambda_d = 0.0;
  double mean_nll = 0.0;
};
CvChoice cross_validate(const TrajectoryDataset& train, const Mat& features, int n_actions,
                        const TrainConfig& base, std::span<const double> d_min_grid,
                        std::span<const double> lambda_d_grid, int folds = 3);

// One row per (prototype, action): subsequence, coefficient and propensity.
std::string prototype_report_csv(const PrototypeModel& model, const TrajectoryDataset& train);

// Encodings of training subsequences (and the prototype markers) for
// downstream projection/plotting tools.
std::string encodings_csv(const PrototypeModel& model, const TrajectoryDataset& train);

}  // namespace proto_ope
