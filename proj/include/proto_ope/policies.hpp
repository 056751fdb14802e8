#pragma once

#include <memory>
#include <string>

#include "proto_ope/baseline.hpp"
#include "proto_ope/mdp.hpp"
#include "proto_ope/metrics.hpp"
#include "proto_ope/prototype.hpp"

namespace proto_ope {

// Anything that maps an observed history prefix to an action distribution:
// true tabular policies, learned behavior estimators, calibrated wrappers.
struct HistoryPolicy {
  virtual ~HistoryPolicy() = default;
  virtual Vec action_probs(const Trajectory& tr, int t) const = 0;
  virtual std::string name() const = 0;
};

// Markov policy over tabular states; reads the context at time t.
class TabularHistoryPolicy : public HistoryPolicy {
 public:
  TabularHistoryPolicy(StochasticPolicy policy, std::string name)
      : policy_(std::move(policy)), name_(std::move(name)) {}

  Vec action_probs(const Trajectory& tr, int t) const override {
    return policy_.probs.row(tr.contexts.at(t)).transpose();
  }
  std::string name() const override { return name_; }
  const StochasticPolicy& policy() const { return policy_; }

 private:
  StochasticPolicy policy_;
  std::string name_;
};

class PrototypeHistoryPolicy : public HistoryPolicy {
 public:
  explicit PrototypeHistoryPolicy(const PrototypeModel& model) : model_(&model) {}

  Vec action_probs(const Trajectory& tr, int t) const override {
    return propensities(*model_, tr, t);
  }
  std::string name() const override { return "prototype"; }
  const PrototypeModel& model() const { return *model_; }

 private:
  const PrototypeModel* model_;
};

class ClassifierHistoryPolicy : public HistoryPolicy {
 public:
  explicit ClassifierHistoryPolicy(const FfnClassifier& model) : model_(&model) {}

  Vec action_probs(const Trajectory& tr, int t) const override {
    return classifier_propensities(*model_, tr, t);
  }
  std::string name() const override { return "feedforward"; }

 private:
  const FfnClassifier* model_;
};

// Applies a fitted sigmoid calibration map on top of a base estimator.
class CalibratedHistoryPolicy : public HistoryPolicy {
 public:
  CalibratedHistoryPolicy(const HistoryPolicy& base, CalibrationMap map)
      : base_(&base), map_(std::move(map)) {}

  Vec action_probs(const Trajectory& tr, int t) const override {
    return map_.apply_row(base_->action_probs(tr, t));
  }
  std::string name() const override { return base_->name() + "+calibrated"; }

 private:
  const HistoryPolicy* base_;
  CalibrationMap map_;
};

// Always picks one action (e.g. "never treat").
StochasticPolicy constant_action_policy(int n_states, int n_actions, int action);

}  // namespace proto_ope
