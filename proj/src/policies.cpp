#include "proto_ope/policies.hpp"

namespace proto_ope {

StochasticPolicy constant_action_policy(int n_states, int n_actions, int action) {
  if (action < 0 || action >= n_actions)
    throw std::invalid_argument("constant_action_policy: action out of range");
  StochasticPolicy p;
  p.probs = Eigen::MatrixXd::Zero(n_states, n_actions);
  p.probs.col(action).setOnes();
  return p;
}

}  // namespace proto_ope
