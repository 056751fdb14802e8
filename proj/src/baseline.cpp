#include "proto_ope/baseline.hpp"

#include <cmath>

namespace proto_ope {

namespace {

Vec softmax(const Vec& logits) {
  Vec p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

Mat logits_plain(const FfnClassifier& model, const TrajectoryDataset& data,
                 std::span<const SubseqRef> samples) {
  BatchInputs in = build_inputs(data, model.features_std(), model.n_actions, samples,
                                model.encoder.kind);
  Mat z = encode_plain(model.encoder, model.params, in);
  return (model.params.at("head.w") * z).colwise() + Vec(model.params.at("head.b").col(0));
}

}  // namespace

FfnClassifier train_ffn_classifier(const TrajectoryDataset& train, const Mat& features,
                                   int n_actions, const FfnTrainConfig& cfg) {
  if (train.items.empty()) throw std::invalid_argument("train: empty dataset");
  std::vector<SubseqRef> samples = all_subsequences(train);
  Rng rng(derive_seed(cfg.seed, "ffn-train"));

  FfnClassifier model;
  model.encoder.kind = EncoderKind::feedforward;
  model.encoder.hidden = cfg.hidden;
  model.encoder.latent = cfg.hidden;
  model.encoder.input_dim = token_dim(static_cast<int>(features.cols()), n_actions);
  model.features = features;
  model.n_actions = n_actions;

  Mat occurrences(samples.size(), features.cols());
  for (std::size_t i = 0; i < samples.size(); ++i)
    occurrences.row(static_cast<Eigen::Index>(i)) =
        features.row(train.items[samples[i].traj].contexts[samples[i].t]);
  model.standardizer = Standardizer::fit(occurrences);

  model.params = init_encoder_params(model.encoder, rng);
  {
    double bound = std::sqrt(6.0 / (n_actions + cfg.hidden));
    Mat w(n_actions, cfg.hidden);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-bound, bound);
    model.params["head.w"] = w;
    model.params["head.b"] = Mat::Zero(n_actions, 1);
  }

  Mat fstd = model.features_std();
  AdamState adam;
  std::vector<SubseqRef> order = samples;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::span<const SubseqRef> batch(order.data() + start, end - start);
      BatchInputs inputs = build_inputs(train, fstd, n_actions, batch, model.encoder.kind);
      std::vector<int> labels;
      labels.reserve(batch.size());
      for (const auto& ref : batch) labels.push_back(train.items[ref.traj].actions[ref.t]);
      LossGrad lg = loss_and_grad(model.params, [&](ad::Tape& tape, const VarMap& vars) {
        ad::Var z = encode_batch(tape, model.encoder, vars, inputs);
        ad::Var logits = tape.add_bias(tape.matmul(vars.at("head.w"), z), vars.at("head.b"));
        return tape.nll_softmax(logits, labels);
      });
      adam_update(model.params, lg.grads, adam, cfg.adam);
    }
  }
  return model;
}

Vec classifier_propensities(const FfnClassifier& model, const Trajectory& tr, int t) {
  TrajectoryDataset view;
  view.items.push_back(tr);
  view.n_states = static_cast<int>(model.features.rows());
  view.n_actions = model.n_actions;
  SubseqRef ref{0, t};
  Mat logits = logits_plain(model, view, std::span(&ref, 1));
  return softmax(logits.col(0));
}

Mat classifier_predict_probs(const FfnClassifier& model, const TrajectoryDataset& data,
                             std::span<const SubseqRef> samples) {
  Mat logits = logits_plain(model, data, samples);
  Mat out(static_cast<Eigen::Index>(samples.size()), model.n_actions);
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    out.row(i) = softmax(logits.col(i)).transpose();
  return out;
}

}  // namespace proto_ope
