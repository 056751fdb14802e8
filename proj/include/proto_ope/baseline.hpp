#pragma once

#include <span>

#include "proto_ope/net.hpp"

namespace proto_ope {

// Plain feedforward action classifier: the two-layer encoder with a linear
// head, trained on NLL. Serves as the black-box reference estimator of the
// behavior policy.
struct FfnClassifier {
  EncoderConfig encoder;
  Params params;  // encoder weights plus head.w / head.b
  Standardizer standardizer;
  Mat features;  // raw context feature table
  int n_actions = 0;

  Mat features_std() const { return standardizer.apply(features); }
};

struct FfnTrainConfig {
  int epochs = 30;
  int batch_size = 128;
  std::uint64_t seed = 0;
  int hidden = 64;
  AdamConfig adam;
};

FfnClassifier train_ffn_classifier(const TrajectoryDataset& train, const Mat& features,
                                   int n_actions, const FfnTrainConfig& cfg);

Vec classifier_propensities(const FfnClassifier& model, const Trajectory& tr, int t);
Mat classifier_predict_probs(const FfnClassifier& model, const TrajectoryDataset& data,
                             std::span<const SubseqRef> samples);

}  // namespace proto_ope
