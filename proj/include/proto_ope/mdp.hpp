#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "proto_ope/trajectory.hpp"

namespace proto_ope {

// Finite MDP with rewards awarded on entering a state. Transition rows are
// stored sparsely: rows[s * n_actions + a] lists (next state, probability).
// Terminal states absorb: they self-loop and their entry reward is collected
// exactly once.
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<std::vector<std::pair<int, double>>> rows;
  std::vector<double> reward;
  std::vector<char> terminal;
  std::vector<double> initial_dist;

  const std::vector<std::pair<int, double>>& row(int s, int a) const {
    return rows[static_cast<std::size_t>(s) * n_actions + a];
  }
  std::vector<std::pair<int, double>>& row(int s, int a) {
    return rows[static_cast<std::size_t>(s) * n_actions + a];
  }

  static TabularMdp empty(int n_states, int n_actions);
  // Dense constructor used by tests and deserialization.
  static TabularMdp from_dense(const std::vector<std::vector<std::vector<double>>>& transition,
                               std::vector<double> reward, std::vector<char> terminal,
                               std::vector<double> initial_dist);
  std::vector<std::vector<std::vector<double>>> dense_transition() const;

  void validate() const;
};

struct StochasticPolicy {
  Eigen::MatrixXd probs;  // n_states x n_actions, rows sum to 1

  int n_states() const { return static_cast<int>(probs.rows()); }
  int n_actions() const { return static_cast<int>(probs.cols()); }
  void validate() const;

  static StochasticPolicy uniform(int n_states, int n_actions);
  static StochasticPolicy deterministic(const std::vector<int>& action_per_state, int n_actions);
};

struct StateValues {
  Eigen::VectorXd values;
  std::vector<int> greedy;  // argmax of the one-step lookahead, lowest index on ties
};

inline constexpr int kValueIterationCap = 10'000;
inline constexpr int kPolicyIterationCap = 1'000;

// Exact value of a fixed policy: expected total entry reward with absorption
// at terminal states. With discount 1 the MDP must be episodic under the
// policy wherever rewards are reachable; otherwise SolverError is thrown.
Eigen::VectorXd policy_evaluation(const TabularMdp& mdp, const StochasticPolicy& policy,
                                  double discount);

StochasticPolicy policy_iteration(const TabularMdp& mdp, double discount);

StateValues value_iteration(const TabularMdp& mdp, double discount, double tol);

// Mixes a policy with the uniform policy: (1-eps) * pi + eps / n_actions.
StochasticPolicy soften(const StochasticPolicy& policy, double epsilon);

// Empirical MDP from logged trajectories. Unseen (state, action) pairs fall
// back to a deterministic self-loop with reward 0.
TabularMdp estimate_mdp(const TrajectoryDataset& data, int n_states, int n_actions);

// Expected reward of the finite-horizon undiscounted episodic process,
// computed by propagating the initial state distribution forward and
// absorbing mass (and its entry reward) whenever it reaches a terminal state.
double exact_policy_value(const TabularMdp& mdp, const StochasticPolicy& policy, int horizon);

}  // namespace proto_ope
