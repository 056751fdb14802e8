#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace proto_ope {

enum class Termination { discharged, died, censored_at_horizon };

const char* to_string(Termination t);
Termination termination_from_string(const std::string& s);

// One observed episode: the state visited at each decision step, the action
// taken there, and the reward observed after the action. final_context is
// the state entered after the last action (terminal for died/discharged,
// ordinary for censored episodes); it is what makes the last transition
// usable for model estimation.
struct Trajectory {
  std::vector<int> contexts;
  std::vector<int> actions;
  std::vector<double> step_rewards;
  double terminal_reward = 0.0;
  Termination terminated = Termination::censored_at_horizon;
  int final_context = -1;

  int length() const { return static_cast<int>(actions.size()); }
  void validate(int n_states, int n_actions) const;
};

struct TrajectoryDataset {
  std::vector<Trajectory> items;
  int n_states = 0;
  int n_actions = 0;

  std::size_t size() const { return items.size(); }
  std::size_t total_pairs() const;
  void validate() const;
};

// Reference to the subsequence of a trajectory ending at time t (the history
// h_t: contexts[0..t] and actions[0..t-1]).
struct SubseqRef {
  int traj = -1;
  int t = -1;

  friend bool operator==(const SubseqRef&, const SubseqRef&) = default;
  friend auto operator<=>(const SubseqRef&, const SubseqRef&) = default;
};

// Every (history, action) pair in the dataset, in (trajectory, time) order.
std::vector<SubseqRef> all_subsequences(const TrajectoryDataset& data);

}  // namespace proto_ope
