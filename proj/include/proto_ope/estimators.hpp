#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "proto_ope/policies.hpp"

namespace proto_ope {

// Per-trajectory importance weights: partial[t] is the cumulative product of
// target/behavior probability ratios through step t.
struct WeightedSample {
  int trajectory = -1;
  std::vector<double> partial;
  double reward = 0.0;

  double full() const { return partial.back(); }
  // Cumulative weight through step t, or 0 for trajectories that end earlier.
  double partial_at(int t) const {
    return t < static_cast<int>(partial.size()) ? partial[t] : 0.0;
  }
};

WeightedSample importance_weights(const Trajectory& tr, int trajectory_id,
                                  const HistoryPolicy& target, const HistoryPolicy& behavior,
                                  std::optional<double> clip = std::nullopt);

std::vector<WeightedSample> dataset_weights(const TrajectoryDataset& data,
                                            const HistoryPolicy& target,
                                            const HistoryPolicy& behavior,
                                            std::optional<double> clip = std::nullopt);

// (1/m) sum w_i r_i.
double is_value(std::span<const WeightedSample> samples);
double is_value(const TrajectoryDataset& data, const HistoryPolicy& target,
                const HistoryPolicy& behavior);

// Self-normalized variant, always inside [min r, max r].
double wis_value(std::span<const WeightedSample> samples);
double wis_value(const TrajectoryDataset& data, const HistoryPolicy& target,
                 const HistoryPolicy& behavior);

// Effective sample size (sum w)^2 / sum w^2.
double ess(std::span<const double> weights);
std::vector<double> full_weights(std::span<const WeightedSample> samples);

// History-action pairs the target can take but the estimated behavior policy
// deems (nearly) impossible. Prototype-based estimators attach the most
// similar prototype so flags can be grouped into situations.
struct OverlapFlag {
  int trajectory = -1;
  int t = -1;
  int action = -1;
  double target_prob = 0.0;
  double behavior_prob = 0.0;
  int nearest_prototype = -1;
  double nearest_similarity = 0.0;
};

std::vector<OverlapFlag> overlap_report(const TrajectoryDataset& data,
                                        const HistoryPolicy& target,
                                        const HistoryPolicy& behavior, double threshold,
                                        const PrototypeModel* prototypes = nullptr);
std::string overlap_report_csv(std::vector<OverlapFlag> flags);

// Value stratified by soft prototype assignment at time t. `assign_prob` is
// the importance-weighted estimate of p_pi(J_t = j); `value` the conditional
// value estimate, undefined when no weight reaches the stratum;
// `contribution` = value * assign_prob is the stratum's share of V(pi).
struct PrototypeValue {
  int prototype = -1;
  double assign_prob = 0.0;
  bool defined = false;
  double value = 0.0;
  double contribution = 0.0;
};

std::vector<PrototypeValue> prototype_values(const TrajectoryDataset& data,
                                             const PrototypeModel& model,
                                             const HistoryPolicy& target,
                                             const HistoryPolicy& behavior, int t);
std::string prototype_values_csv(const TrajectoryDataset& data, const PrototypeModel& model,
                                 const HistoryPolicy& target, const HistoryPolicy& behavior,
                                 std::span<const int> times);

// Per-trajectory ratio of the weights under the estimated and the true
// behavior policy (the target cancels): prod_t mu(a_t|h_t) / mu^(a_t|h_t).
struct WeightRatio {
  int trajectory = -1;
  double ratio = 0.0;
  double log_ratio = 0.0;
};

std::vector<WeightRatio> weight_ratio_diagnostic(const TrajectoryDataset& data,
                                                 const HistoryPolicy& estimated,
                                                 const HistoryPolicy& true_behavior);

}  // namespace proto_ope
