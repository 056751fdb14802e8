#include "proto_ope/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>

#include "proto_ope/common.hpp"

namespace proto_ope {

namespace {
constexpr double kRowSumTol = 1e-9;
constexpr double kImprovementTol = 1e-12;
}  // namespace

TabularMdp TabularMdp::empty(int n_states, int n_actions) {
  TabularMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.rows.resize(static_cast<std::size_t>(n_states) * n_actions);
  mdp.reward.assign(n_states, 0.0);
  mdp.terminal.assign(n_states, 0);
  mdp.initial_dist.assign(n_states, 0.0);
  return mdp;
}

TabularMdp TabularMdp::from_dense(const std::vector<std::vector<std::vector<double>>>& transition,
                                  std::vector<double> reward, std::vector<char> terminal,
                                  std::vector<double> initial_dist) {
  const int S = static_cast<int>(transition.size());
  if (S == 0) throw ConfigError("mdp: empty transition tensor");
  const int A = static_cast<int>(transition[0].size());
  TabularMdp mdp = empty(S, A);
  for (int s = 0; s < S; ++s) {
    if (static_cast<int>(transition[s].size()) != A)
      throw ConfigError("mdp: ragged transition tensor");
    for (int a = 0; a < A; ++a) {
      if (static_cast<int>(transition[s][a].size()) != S)
        throw ConfigError("mdp: ragged transition tensor");
      for (int ns = 0; ns < S; ++ns) {
        double p = transition[s][a][ns];
        if (p != 0.0) mdp.row(s, a).push_back({ns, p});
      }
    }
  }
  mdp.reward = std::move(reward);
  mdp.terminal = std::move(terminal);
  mdp.initial_dist = std::move(initial_dist);
  mdp.validate();
  return mdp;
}

std::vector<std::vector<std::vector<double>>> TabularMdp::dense_transition() const {
  std::vector<std::vector<std::vector<double>>> t(
      n_states, std::vector<std::vector<double>>(n_actions, std::vector<double>(n_states, 0.0)));
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a)
      for (auto [ns, p] : row(s, a)) t[s][a][ns] += p;
  return t;
}

void TabularMdp::validate() const {
  if (n_states <= 0 || n_actions <= 0) throw ConfigError("mdp: dimensions must be positive");
  if (rows.size() != static_cast<std::size_t>(n_states) * n_actions ||
      static_cast<int>(reward.size()) != n_states ||
      static_cast<int>(terminal.size()) != n_states ||
      static_cast<int>(initial_dist.size()) != n_states)
    throw ConfigError("mdp: field sizes inconsistent with n_states/n_actions");
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      for (auto [ns, p] : row(s, a)) {
        if (ns < 0 || ns >= n_states) throw ConfigError("mdp: next-state index out of range");
        if (p < 0.0) throw ConfigError("mdp: negative transition probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowSumTol)
        throw ConfigError("mdp: transition row (" + std::to_string(s) + ", " +
                          std::to_string(a) + ") sums to " + std::to_string(sum));
      if (terminal[s] && !(row(s, a).size() == 1 && row(s, a)[0].first == s))
        throw ConfigError("mdp: terminal state " + std::to_string(s) + " must self-loop");
    }
  }
  double init_sum = 0.0;
  for (double p : initial_dist) {
    if (p < 0.0) throw ConfigError("mdp: negative initial probability");
    init_sum += p;
  }
  if (std::abs(init_sum - 1.0) > kRowSumTol)
    throw ConfigError("mdp: initial distribution sums to " + std::to_string(init_sum));
}

void StochasticPolicy::validate() const {
  for (int s = 0; s < n_states(); ++s) {
    double sum = 0.0;
    for (int a = 0; a < n_actions(); ++a) {
      if (probs(s, a) < 0.0) throw ConfigError("policy: negative probability");
      sum += probs(s, a);
    }
    if (std::abs(sum - 1.0) > kRowSumTol)
      throw ConfigError("policy: row " + std::to_string(s) + " sums to " + std::to_string(sum));
  }
}

StochasticPolicy StochasticPolicy::uniform(int n_states, int n_actions) {
  StochasticPolicy p;
  p.probs = Eigen::MatrixXd::Constant(n_states, n_actions, 1.0 / n_actions);
  return p;
}

StochasticPolicy StochasticPolicy::deterministic(const std::vector<int>& action_per_state,
                                                 int n_actions) {
  StochasticPolicy p;
  p.probs = Eigen::MatrixXd::Zero(static_cast<int>(action_per_state.size()), n_actions);
  for (int s = 0; s < static_cast<int>(action_per_state.size()); ++s)
    p.probs(s, action_per_state[s]) = 1.0;
  return p;
}

namespace {

// Expected entry reward for one step of pi from each nonterminal state.
Eigen::VectorXd step_reward(const TabularMdp& mdp, const StochasticPolicy& policy) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.terminal[s]) continue;
    double acc = 0.0;
    for (int a = 0; a < mdp.n_actions; ++a) {
      double pa = policy.probs(s, a);
      if (pa == 0.0) continue;
      for (auto [ns, p] : mdp.row(s, a)) acc += pa * p * mdp.reward[ns];
    }
    r[s] = acc;
  }
  return r;
}

// Nonterminal states from which a terminal state is reachable under the
// support of pi. Found by a backward sweep from the terminal set.
std::vector<char> can_reach_terminal(const TabularMdp& mdp, const StochasticPolicy& policy) {
  std::vector<std::vector<int>> rev(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.terminal[s]) continue;
    for (int a = 0; a < mdp.n_actions; ++a) {
      if (policy.probs(s, a) == 0.0) continue;
      for (auto [ns, p] : mdp.row(s, a))
        if (p > 0.0 && ns != s) rev[ns].push_back(s);
    }
  }
  std::vector<char> reach(mdp.n_states, 0);
  std::deque<int> queue;
  for (int s = 0; s < mdp.n_states; ++s)
    if (mdp.terminal[s]) queue.push_back(s);
  while (!queue.empty()) {
    int s = queue.front();
    queue.pop_front();
    for (int prev : rev[s]) {
      if (!reach[prev] && !mdp.terminal[prev]) {
        reach[prev] = 1;
        queue.push_back(prev);
      }
    }
  }
  return reach;
}

}  // namespace

Eigen::VectorXd policy_evaluation(const TabularMdp& mdp, const StochasticPolicy& policy,
                                  double discount) {
  if (discount <= 0.0 || discount > 1.0)
    throw std::invalid_argument("policy_evaluation: discount must be in (0, 1]");
  if (policy.n_states() != mdp.n_states || policy.n_actions() != mdp.n_actions)
    throw std::invalid_argument("policy_evaluation: policy shape does not match mdp");

  Eigen::VectorXd r = step_reward(mdp, policy);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.n_states);

  // States included in the linear system; the rest keep value 0.
  std::vector<char> solve_mask(mdp.n_states, 0);
  if (discount < 1.0) {
    for (int s = 0; s < mdp.n_states; ++s) solve_mask[s] = !mdp.terminal[s];
  } else {
    solve_mask = can_reach_terminal(mdp, policy);
    // Undiscounted value diverges if reward keeps accumulating in a part of
    // the chain that can never terminate.
    for (int s = 0; s < mdp.n_states; ++s)
      if (!mdp.terminal[s] && !solve_mask[s] && std::abs(r[s]) > 1e-12)
        throw SolverError(
            "policy_evaluation: discount 1 on a non-episodic MDP, value diverges at state " +
            std::to_string(s));
  }

  std::vector<int> index(mdp.n_states, -1);
  int m = 0;
  for (int s = 0; s < mdp.n_states; ++s)
    if (solve_mask[s]) index[s] = m++;
  if (m == 0) return v;

  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(m, m);
  Eigen::VectorXd b(m);
  for (int s = 0; s < mdp.n_states; ++s) {
    if (!solve_mask[s]) continue;
    int i = index[s];
    b[i] = r[s];
    for (int a = 0; a < mdp.n_actions; ++a) {
      double pa = policy.probs(s, a);
      if (pa == 0.0) continue;
      for (auto [ns, p] : mdp.row(s, a)) {
        if (mdp.terminal[ns] || index[ns] < 0) continue;
        A(i, index[ns]) -= discount * pa * p;
      }
    }
  }
  Eigen::VectorXd x = A.partialPivLu().solve(b);
  if (!x.allFinite() || (A * x - b).cwiseAbs().maxCoeff() > 1e-6)
    throw SolverError("policy_evaluation: linear system is singular (non-episodic chain?)");
  for (int s = 0; s < mdp.n_states; ++s)
    if (solve_mask[s]) v[s] = x[index[s]];
  return v;
}

namespace {

// One-step lookahead Q(s, a) given a value function.
double lookahead(const TabularMdp& mdp, int s, int a, double discount,
                 const Eigen::VectorXd& v) {
  double q = 0.0;
  for (auto [ns, p] : mdp.row(s, a))
    q += p * (mdp.reward[ns] + (mdp.terminal[ns] ? 0.0 : discount * v[ns]));
  return q;
}

}  // namespace

StochasticPolicy policy_iteration(const TabularMdp& mdp, double discount) {
  mdp.validate();
  if (discount <= 0.0 || discount > 1.0)
    throw std::invalid_argument("policy_iteration: discount must be in (0, 1]");

  // Start greedy with respect to the all-zero value function.
  std::vector<int> action(mdp.n_states, 0);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < mdp.n_actions; ++a) {
      double q = lookahead(mdp, s, a, discount, zero);
      if (q > best + kImprovementTol) {
        best = q;
        action[s] = a;
      }
    }
  }

  for (int round = 0; round < kPolicyIterationCap; ++round) {
    StochasticPolicy policy = StochasticPolicy::deterministic(action, mdp.n_actions);
    Eigen::VectorXd v = policy_evaluation(mdp, policy, discount);
    bool changed = false;
    for (int s = 0; s < mdp.n_states; ++s) {
      if (mdp.terminal[s]) continue;
      double q_current = lookahead(mdp, s, action[s], discount, v);
      double best = q_current;
      int best_a = action[s];
      for (int a = 0; a < mdp.n_actions; ++a) {
        double q = lookahead(mdp, s, a, discount, v);
        if (q > best + kImprovementTol) {
          best = q;
          best_a = a;
        }
      }
      if (best_a != action[s]) {
        action[s] = best_a;
        changed = true;
      }
    }
    if (!changed) return StochasticPolicy::deterministic(action, mdp.n_actions);
  }
  throw SolverError("policy_iteration: no fixed point within " +
                    std::to_string(kPolicyIterationCap) + " improvement rounds");
}

StateValues value_iteration(const TabularMdp& mdp, double discount, double tol) {
  mdp.validate();
  if (tol <= 0.0) throw std::invalid_argument("value_iteration: tol must be positive");
  if (discount <= 0.0 || discount > 1.0)
    throw std::invalid_argument("value_iteration: discount must be in (0, 1]");

  Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.n_states);
  Eigen::VectorXd next(mdp.n_states);
  std::vector<int> greedy(mdp.n_states, 0);
  for (int sweep = 0; sweep < kValueIterationCap; ++sweep) {
    double residual = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
      if (mdp.terminal[s]) {
        next[s] = 0.0;
        greedy[s] = 0;
        continue;
      }
      double best = -std::numeric_limits<double>::infinity();
      int best_a = 0;
      for (int a = 0; a < mdp.n_actions; ++a) {
        double q = lookahead(mdp, s, a, discount, v);
        if (q > best) {
          best = q;
          best_a = a;
        }
      }
      next[s] = best;
      greedy[s] = best_a;
      residual = std::max(residual, std::abs(best - v[s]));
    }
    if (residual <= tol) {
      // v (not next) satisfies ||Tv - v|| <= tol, and greedy is the argmax of
      // the lookahead at v.
      return {v, greedy};
    }
    v = next;
  }
  throw SolverError("value_iteration: residual above tol after " +
                    std::to_string(kValueIterationCap) + " sweeps");
}

StochasticPolicy soften(const StochasticPolicy& policy, double epsilon) {
  if (epsilon < 0.0 || epsilon > 1.0)
    throw std::invalid_argument("soften: epsilon must be in [0, 1]");
  policy.validate();
  StochasticPolicy out;
  out.probs = (1.0 - epsilon) * policy.probs.array() + epsilon / policy.n_actions();
  return out;
}

TabularMdp estimate_mdp(const TrajectoryDataset& data, int n_states, int n_actions) {
  if (data.items.empty()) throw std::invalid_argument("estimate_mdp: empty dataset");
  TabularMdp mdp = TabularMdp::empty(n_states, n_actions);

  std::vector<std::map<int, double>> counts(static_cast<std::size_t>(n_states) * n_actions);
  std::vector<std::map<double, int>> reward_votes(n_states);
  std::vector<int> terminal_votes(n_states, 0);
  std::vector<int> nonterminal_votes(n_states, 0);
  std::vector<double> initial(n_states, 0.0);

  for (const auto& tr : data.items) {
    tr.validate(n_states, n_actions);
    initial[tr.contexts[0]] += 1.0;
    const int len = tr.length();
    for (int t = 0; t < len; ++t) {
      int s = tr.contexts[t];
      int a = tr.actions[t];
      int ns = (t + 1 < len) ? tr.contexts[t + 1] : tr.final_context;
      counts[static_cast<std::size_t>(s) * n_actions + a][ns] += 1.0;
      reward_votes[ns][tr.step_rewards[t]] += 1;
      bool entered_terminal =
          (t == len - 1) && tr.terminated != Termination::censored_at_horizon;
      (entered_terminal ? terminal_votes : nonterminal_votes)[ns] += 1;
      // States acted in are nonterminal by construction.
      nonterminal_votes[s] += 1;
    }
  }

  for (int s = 0; s < n_states; ++s) {
    // Majority vote keeps the estimate well defined on inconsistent data.
    mdp.terminal[s] = terminal_votes[s] > nonterminal_votes[s];
    double best_reward = 0.0;
    int best_count = 0;
    for (auto [r, c] : reward_votes[s]) {
      if (c > best_count) {
        best_count = c;
        best_reward = r;
      }
    }
    mdp.reward[s] = best_reward;
  }

  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      auto& cell = counts[static_cast<std::size_t>(s) * n_actions + a];
      auto& row = mdp.row(s, a);
      if (mdp.terminal[s] || cell.empty()) {
        row = {{s, 1.0}};
        continue;
      }
      double total = 0.0;
      for (auto [ns, c] : cell) total += c;
      for (auto [ns, c] : cell) row.push_back({ns, c / total});
    }
  }

  double init_total = 0.0;
  for (double c : initial) init_total += c;
  for (int s = 0; s < n_states; ++s) mdp.initial_dist[s] = initial[s] / init_total;
  mdp.validate();
  return mdp;
}

double exact_policy_value(const TabularMdp& mdp, const StochasticPolicy& policy, int horizon) {
  mdp.validate();
  policy.validate();
  if (horizon < 1) throw std::invalid_argument("exact_policy_value: horizon must be >= 1");
  if (policy.n_states() != mdp.n_states || policy.n_actions() != mdp.n_actions)
    throw std::invalid_argument("exact_policy_value: policy shape does not match mdp");

  // Live probability mass per nonterminal state; mass entering a state
  // collects its reward, and terminal mass leaves circulation.
  Eigen::VectorXd dist = Eigen::VectorXd::Zero(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s)
    if (!mdp.terminal[s]) dist[s] = mdp.initial_dist[s];

  double total = 0.0;
  for (int step = 0; step < horizon; ++step) {
    Eigen::VectorXd inflow = Eigen::VectorXd::Zero(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
      if (dist[s] == 0.0) continue;
      for (int a = 0; a < mdp.n_actions; ++a) {
        double pa = policy.probs(s, a);
        if (pa == 0.0) continue;
        double mass = dist[s] * pa;
        for (auto [ns, p] : mdp.row(s, a)) inflow[ns] += mass * p;
      }
    }
    for (int s = 0; s < mdp.n_states; ++s) {
      total += inflow[s] * mdp.reward[s];
      dist[s] = mdp.terminal[s] ? 0.0 : inflow[s];
    }
  }
  return total;
}

}  // namespace proto_ope
