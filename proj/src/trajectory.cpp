#include "proto_ope/trajectory.hpp"

#include <cmath>
#include <stdexcept>

#include "proto_ope/common.hpp"

namespace proto_ope {

const char* to_string(Termination t) {
  switch (t) {
    case Termination::discharged: return "discharged";
    case Termination::died: return "died";
    case Termination::censored_at_horizon: return "censored_at_horizon";
  }
  return "unknown";
}

Termination termination_from_string(const std::string& s) {
  if (s == "discharged") return Termination::discharged;
  if (s == "died") return Termination::died;
  if (s == "censored_at_horizon") return Termination::censored_at_horizon;
  throw ConfigError("unknown termination kind '" + s + "'");
}

void Trajectory::validate(int n_states, int n_actions) const {
  if (contexts.size() != actions.size() || contexts.size() != step_rewards.size())
    throw ConfigError("trajectory: contexts, actions and step_rewards must have equal length");
  if (contexts.empty()) throw ConfigError("trajectory: empty");
  for (int s : contexts)
    if (s < 0 || s >= n_states) throw ConfigError("trajectory: context index out of range");
  for (int a : actions)
    if (a < 0 || a >= n_actions) throw ConfigError("trajectory: action index out of range");
  if (final_context < 0 || final_context >= n_states)
    throw ConfigError("trajectory: final_context out of range");
  double last_nonzero = 0.0;
  for (double r : step_rewards)
    if (r != 0.0) last_nonzero = r;
  if (terminal_reward != last_nonzero)
    throw ConfigError("trajectory: terminal_reward must equal the last nonzero step reward (or 0)");
  if (terminated == Termination::discharged && terminal_reward != 1.0)
    throw ConfigError("trajectory: discharged requires terminal reward +1");
  if (terminated == Termination::died && terminal_reward != -1.0)
    throw ConfigError("trajectory: died requires terminal reward -1");
}

std::size_t TrajectoryDataset::total_pairs() const {
  std::size_t n = 0;
  for (const auto& tr : items) n += tr.actions.size();
  return n;
}

void TrajectoryDataset::validate() const {
  for (const auto& tr : items) tr.validate(n_states, n_actions);
}

std::vector<SubseqRef> all_subsequences(const TrajectoryDataset& data) {
  std::vector<SubseqRef> refs;
  refs.reserve(data.total_pairs());
  for (int i = 0; i < static_cast<int>(data.items.size()); ++i)
    for (int t = 0; t < data.items[i].length(); ++t) refs.push_back({i, t});
  return refs;
}

}  // namespace proto_ope
