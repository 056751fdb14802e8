#include "proto_ope/prototype.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace proto_ope {

void TrainConfig::validate() const {
  if (n < 1) throw ConfigError("train config: n must be >= 1");
  if (q < 1 || q > n) throw ConfigError("train config: q must satisfy 1 <= q <= n");
  if (lambda_d < 0 || lambda_c < 0 || lambda_e < 0)
    throw ConfigError("train config: regularization weights must be >= 0");
  if (d_min <= 0) throw ConfigError("train config: d_min must be positive");
  if (epochs < 0) throw ConfigError("train config: epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
  if (projection_period < 1) throw ConfigError("train config: projection_period must be >= 1");
}

Vec similarity_vector(const PrototypeModel& model, const Vec& z) {
  if (z.size() != model.latent_prototypes.rows())
    throw std::invalid_argument("similarity_vector: latent dimension differs");
  Vec s(model.n);
  for (int j = 0; j < model.n; ++j)
    s[j] = std::exp(-(model.latent_prototypes.col(j) - z).squaredNorm());
  return s;
}

Vec truncate_similarities(const Vec& s, int q) {
  const int n = static_cast<int>(s.size());
  if (q < 1 || q > n) throw std::invalid_argument("truncate: q must satisfy 1 <= q <= n");
  if (q == n) return s;
  std::vector<double> sorted(s.data(), s.data() + n);
  std::nth_element(sorted.begin(), sorted.begin() + (q - 1), sorted.end(),
                   std::greater<double>());
  double threshold = sorted[q - 1];
  Vec out = s;
  for (int j = 0; j < n; ++j)
    if (s[j] < threshold) out[j] = 0.0;
  return out;
}

Vec encode_history(const PrototypeModel& model, const Trajectory& tr, int t) {
  return encode_single(model.encoder, model.params, tr, t, model.features_std(),
                       model.n_actions);
}

namespace {

Vec softmax(const Vec& logits) {
  Vec p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

}  // namespace

Vec propensities(const PrototypeModel& model, const Trajectory& tr, int t) {
  Vec s = truncate_similarities(similarity_vector(model, encode_history(model, tr, t)), model.q);
  return softmax(model.coeffs * s + model.intercept);
}

Mat prototype_propensities(const PrototypeModel& model, const TrajectoryDataset& train) {
  Mat out(model.n, model.n_actions);
  for (int j = 0; j < model.n; ++j) {
    const SubseqRef& ref = model.prototype_refs.at(j);
    out.row(j) = propensities(model, train.items.at(ref.traj), ref.t).transpose();
  }
  return out;
}

Vec assignment_probs_from_encoding(const PrototypeModel& model, const Vec& z) {
  // softmax of negative squared distances == normalized RBF similarities,
  // stable even when every similarity underflows.
  Vec neg_d2(model.n);
  for (int j = 0; j < model.n; ++j)
    neg_d2[j] = -(model.latent_prototypes.col(j) - z).squaredNorm();
  return softmax(neg_d2);
}

Vec assignment_probs(const PrototypeModel& model, const Trajectory& tr, int t) {
  return assignment_probs_from_encoding(model, encode_history(model, tr, t));
}

Mat predict_probs(const PrototypeModel& model, const TrajectoryDataset& data,
                  std::span<const SubseqRef> samples) {
  BatchInputs in = build_inputs(data, model.features_std(), model.n_actions, samples,
                                model.encoder.kind);
  Mat z = encode_plain(model.encoder, model.params, in);  // latent x m
  Mat out(static_cast<Eigen::Index>(samples.size()), model.n_actions);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    Vec s(model.n);
    for (int j = 0; j < model.n; ++j)
      s[j] = std::exp(-(model.latent_prototypes.col(j) - z.col(i)).squaredNorm());
    out.row(i) = softmax(model.coeffs * truncate_similarities(s, model.q) + model.intercept)
                     .transpose();
  }
  return out;
}

namespace {

std::vector<int> batch_labels(const TrajectoryDataset& data, std::span<const SubseqRef> batch) {
  std::vector<int> labels;
  labels.reserve(batch.size());
  for (const auto& ref : batch) labels.push_back(data.items.at(ref.traj).actions.at(ref.t));
  return labels;
}

// Shared objective graph: NLL of softmax(B S + c) plus the diversity,
// clustering and evidence penalties.
ad::Var objective_graph(ad::Tape& tape, const VarMap& vars, const EncoderConfig& enc,
                        const BatchInputs& inputs, const std::vector<int>& labels,
                        double lambda_d, double lambda_c, double lambda_e, double d_min) {
  ad::Var encodings = encode_batch(tape, enc, vars, inputs);  // latent x m
  ad::Var d2 = tape.pairwise_sqdist(vars.at("prototypes"), encodings);  // n x m
  ad::Var sims = tape.exp_neg(d2);
  ad::Var logits = tape.add_bias(tape.matmul(vars.at("B"), sims), vars.at("c"));
  ad::Var loss = tape.nll_softmax(logits, labels);
  if (lambda_d > 0)
    loss = tape.add(loss, tape.scale(tape.hinge_diversity(vars.at("prototypes"), d_min), lambda_d));
  if (lambda_c > 0) loss = tape.add(loss, tape.scale(tape.colwise_min_sum(d2), lambda_c));
  if (lambda_e > 0) loss = tape.add(loss, tape.scale(tape.rowwise_min_sum(d2), lambda_e));
  return loss;
}

Params model_params(const PrototypeModel& model) {
  Params p = model.params;
  p["prototypes"] = model.latent_prototypes;
  p["B"] = model.coeffs;
  p["c"] = model.intercept;
  return p;
}

void unpack_params(PrototypeModel& model, const Params& p) {
  model.params.clear();
  for (const auto& [name, value] : p) {
    if (name == "prototypes")
      model.latent_prototypes = value;
    else if (name == "B")
      model.coeffs = value;
    else if (name == "c")
      model.intercept = value.col(0);
    else
      model.params[name] = value;
  }
}

}  // namespace

double objective(const PrototypeModel& model, const TrajectoryDataset& data,
                 std::span<const SubseqRef> batch) {
  if (batch.empty()) throw std::invalid_argument("objective: empty batch");
  BatchInputs inputs = build_inputs(data, model.features_std(), model.n_actions, batch,
                                    model.encoder.kind);
  std::vector<int> labels = batch_labels(data, batch);
  ad::Tape tape;
  VarMap vars;
  Params p = model_params(model);
  for (const auto& [name, value] : p) vars[name] = tape.input(value);
  ad::Var loss = objective_graph(tape, vars, model.encoder, inputs, labels, model.lambda_d,
                                 model.lambda_c, model.lambda_e, model.d_min);
  return tape.value(loss)(0, 0);
}

void project(PrototypeModel& model, const TrajectoryDataset& train) {
  std::vector<SubseqRef> refs = all_subsequences(train);
  if (refs.empty()) throw std::invalid_argument("project: empty dataset");
  Mat fstd = model.features_std();
  BatchInputs in = build_inputs(train, fstd, model.n_actions, refs, model.encoder.kind);
  Mat z = encode_plain(model.encoder, model.params, in);  // latent x m

  for (int j = 0; j < model.n; ++j) {
    int best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < refs.size(); ++i) {
      double d2 = (z.col(static_cast<Eigen::Index>(i)) - model.latent_prototypes.col(j))
                      .squaredNorm();
      // refs are already in (trajectory, time) order, so strict improvement
      // keeps the lexicographically first minimizer.
      if (d2 < best_d2) {
        best_d2 = d2;
        best = static_cast<int>(i);
      }
    }
    model.prototype_refs[j] = refs[best];
  }
  // Re-encode the chosen subsequences one at a time so the stored latent
  // prototype is bit-identical to what any later single-history encoding
  // computes (the prototype-realness contract is exact equality).
  for (int j = 0; j < model.n; ++j) {
    const SubseqRef& ref = model.prototype_refs[j];
    model.latent_prototypes.col(j) = encode_single(
        model.encoder, model.params, train.items.at(ref.traj), ref.t, fstd, model.n_actions);
  }
}

PrototypeModel train_prototype_model(const TrajectoryDataset& train, const Mat& features,
                                     int n_actions, const TrainConfig& cfg) {
  cfg.validate();
  if (train.items.empty()) throw std::invalid_argument("train: empty dataset");

  std::vector<SubseqRef> samples = all_subsequences(train);
  Rng rng(derive_seed(cfg.seed, "prototype-train"));

  PrototypeModel model;
  model.encoder.kind = cfg.encoder;
  model.encoder.hidden = cfg.hidden;
  model.encoder.latent = cfg.latent;
  model.encoder.input_dim = token_dim(static_cast<int>(features.cols()), n_actions);
  model.features = features;
  model.n_actions = n_actions;
  model.n = cfg.n;
  model.q = cfg.q;
  model.d_min = cfg.d_min;
  model.lambda_d = cfg.lambda_d;
  model.lambda_c = cfg.lambda_c;
  model.lambda_e = cfg.lambda_e;

  // Standardization statistics come from the training occurrences, so states
  // visited often weigh more than rare ones.
  Mat occurrences(samples.size(), features.cols());
  for (std::size_t i = 0; i < samples.size(); ++i)
    occurrences.row(static_cast<Eigen::Index>(i)) =
        features.row(train.items[samples[i].traj].contexts[samples[i].t]);
  model.standardizer = Standardizer::fit(occurrences);

  model.params = init_encoder_params(model.encoder, rng);
  model.coeffs = Mat::Zero(n_actions, cfg.n);
  model.intercept = Vec::Zero(n_actions);

  // Latent prototypes start at the encodings of n random training
  // subsequences (distinct while possible), so the first projection is
  // already meaningful.
  std::vector<SubseqRef> pool = samples;
  rng.shuffle(pool);
  model.prototype_refs.resize(cfg.n);
  Mat fstd = model.features_std();
  model.latent_prototypes.resize(cfg.latent, cfg.n);
  for (int j = 0; j < cfg.n; ++j) {
    model.prototype_refs[j] = pool[static_cast<std::size_t>(j) % pool.size()];
    const SubseqRef& ref = model.prototype_refs[j];
    model.latent_prototypes.col(j) = encode_single(
        model.encoder, model.params, train.items.at(ref.traj), ref.t, fstd, n_actions);
  }

  Params params = model_params(model);
  AdamState adam;
  std::vector<SubseqRef> order = samples;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::span<const SubseqRef> batch(order.data() + start, end - start);
      BatchInputs inputs =
          build_inputs(train, fstd, n_actions, batch, model.encoder.kind);
      std::vector<int> labels = batch_labels(train, batch);
      LossGrad lg;
      try {
        lg = loss_and_grad(params, [&](ad::Tape& tape, const VarMap& vars) {
          return objective_graph(tape, vars, model.encoder, inputs, labels, cfg.lambda_d,
                                 cfg.lambda_c, cfg.lambda_e, cfg.d_min);
        });
      } catch (const NumericError& e) {
        throw NumericError("train: " + std::string(e.what()) + " (epoch " +
                           std::to_string(epoch) + ", batch at sample " +
                           std::to_string(start) + ")");
      }
      adam_update(params, lg.grads, adam, cfg.adam);
    }
    if ((epoch + 1) % cfg.projection_period == 0) {
      unpack_params(model, params);
      project(model, train);
      params = model_params(model);
    }
  }
  unpack_params(model, params);
  // Final projection guarantees the returned prototypes are real cases.
  project(model, train);
  return model;
}

namespace {

double mean_nll(const PrototypeModel& model, const TrajectoryDataset& data,
                std::span<const SubseqRef> samples) {
  Mat probs = predict_probs(model, data, samples);
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    int label = data.items[samples[i].traj].actions[samples[i].t];
    total += -std::log(std::max(probs(static_cast<Eigen::Index>(i), label), 1e-300));
  }
  return total / static_cast<double>(samples.size());
}

}  // namespace

CvChoice cross_validate(const TrajectoryDataset& train, const Mat& features, int n_actions,
                        const TrainConfig& base, std::span<const double> d_min_grid,
                        std::span<const double> lambda_d_grid, int folds) {
  if (folds < 2) throw std::invalid_argument("cross_validate: need at least 2 folds");
  if (static_cast<int>(train.items.size()) < folds)
    throw std::invalid_argument("cross_validate: fewer trajectories than folds");

  Rng rng(derive_seed(base.seed, "cv-folds"));
  std::vector<int> perm(train.items.size());
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);

  std::vector<TrajectoryDataset> fold_train(folds), fold_val(folds);
  for (int f = 0; f < folds; ++f) {
    fold_train[f].n_states = fold_val[f].n_states = train.n_states;
    fold_train[f].n_actions = fold_val[f].n_actions = train.n_actions;
  }
  for (std::size_t i = 0; i < perm.size(); ++i) {
    int f = static_cast<int>(i) % folds;
    for (int g = 0; g < folds; ++g)
      (g == f ? fold_val[g] : fold_train[g]).items.push_back(train.items[perm[i]]);
  }

  CvChoice best;
  bool first = true;
  for (double d_min : d_min_grid) {
    for (double lambda_d : lambda_d_grid) {
      double total = 0.0;
      for (int f = 0; f < folds; ++f) {
        TrainConfig cfg = base;
        cfg.d_min = d_min;
        cfg.lambda_d = lambda_d;
        cfg.seed = derive_seed(base.seed, "cv-fold-" + std::to_string(f));
        PrototypeModel model = train_prototype_model(fold_train[f], features, n_actions, cfg);
        std::vector<SubseqRef> val_samples = all_subsequences(fold_val[f]);
        total += mean_nll(model, fold_val[f], val_samples);
      }
      double mean = total / folds;
      if (first || mean < best.mean_nll) {
        best = {d_min, lambda_d, mean};
        first = false;
      }
    }
  }
  return best;
}

std::string prototype_report_csv(const PrototypeModel& model, const TrajectoryDataset& train) {
  Mat props = prototype_propensities(model, train);
  std::ostringstream out;
  out << "prototype,trajectory,time,subsequence,observed_action,action,coefficient,propensity\n";
  out.precision(17);
  for (int j = 0; j < model.n; ++j) {
    const SubseqRef& ref = model.prototype_refs.at(j);
    const Trajectory& tr = train.items.at(ref.traj);
    std::ostringstream seq;
    for (int t = 0; t <= ref.t; ++t) {
      if (t > 0) seq << ' ' << tr.actions[t - 1] << ' ';
      seq << tr.contexts[t];
    }
    for (int a = 0; a < model.n_actions; ++a) {
      out << j << ',' << ref.traj << ',' << ref.t << ',' << seq.str() << ','
          << tr.actions[ref.t] << ',' << a << ',' << model.coeffs(a, j) << ',' << props(j, a)
          << '\n';
    }
  }
  return out.str();
}

std::string encodings_csv(const PrototypeModel& model, const TrajectoryDataset& train) {
  std::vector<SubseqRef> refs = all_subsequences(train);
  BatchInputs in = build_inputs(train, model.features_std(), model.n_actions, refs,
                                model.encoder.kind);
  Mat z = encode_plain(model.encoder, model.params, in);
  std::ostringstream out;
  out.precision(17);
  out << "trajectory,time,action,prototype";
  for (int d = 0; d < model.encoder.latent; ++d) out << ",z" << d;
  out << '\n';
  for (std::size_t i = 0; i < refs.size(); ++i) {
    int proto = -1;
    for (int j = 0; j < model.n; ++j)
      if (model.prototype_refs[j] == refs[i]) {
        proto = j;
        break;
      }
    out << refs[i].traj << ',' << refs[i].t << ','
        << train.items[refs[i].traj].actions[refs[i].t] << ',' << proto;
    for (int d = 0; d < model.encoder.latent; ++d)
      out << ',' << z(d, static_cast<Eigen::Index>(i));
    out << '\n';
  }
  return out.str();
}

}  // namespace proto_ope
