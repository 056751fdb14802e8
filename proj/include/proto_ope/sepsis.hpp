#pragma once

#include <Eigen/Dense>
#include <array>

#include "proto_ope/common.hpp"
#include "proto_ope/mdp.hpp"
#include "proto_ope/trajectory.hpp"

namespace proto_ope::sepsis {

// Discrete patient state: a diabetes flag, four vitals and the previously
// administered treatments. 2 * 3 * 3 * 2 * 5 * 8 = 1440 states.
struct PatientState {
  bool diabetic = false;
  int heart_rate = 1;  // 0 low, 1 normal, 2 high
  int sys_bp = 1;      // 0 low, 1 normal, 2 high
  int oxygen = 1;      // 0 low, 1 normal
  int glucose = 2;     // 0 very low, 1 low, 2 normal, 3 high, 4 very high
  bool prev_abx = false;
  bool prev_vaso = false;
  bool prev_vent = false;

  friend bool operator==(const PatientState&, const PatientState&) = default;
};

struct TreatmentAction {
  bool abx = false;
  bool vaso = false;
  bool vent = false;

  int index() const { return int(abx) + 2 * int(vaso) + 4 * int(vent); }
  static TreatmentAction from_index(int idx);
};

inline constexpr int kNumStates = 1440;
inline constexpr int kNumActions = 8;
inline constexpr int kFeatureDim = 8;

int state_index(const PatientState& s);
PatientState state_from_index(int idx);

// Number of vitals away from their normal level.
int abnormal_count(const PatientState& s);
bool is_death_state(const PatientState& s);      // >= 3 abnormal vitals
bool is_discharge_state(const PatientState& s);  // all normal and no treatment given
bool is_terminal_state(const PatientState& s);

// Next-state distribution factorized per vital. Treatment and withdrawal
// effects compose in a fixed order (antibiotics, ventilation, vasopressors)
// and a vital fluctuates spontaneously only when no active treatment targets
// it this step. Both step() and the exact tensor are built from this.
struct VitalKernels {
  std::array<double, 3> heart_rate;
  std::array<double, 3> sys_bp;
  std::array<double, 2> oxygen;
  std::array<double, 5> glucose;
};
VitalKernels vital_kernels(const PatientState& s, const TreatmentAction& a);

// Random nondiabetic/diabetic patient with no treatment history and one or
// two abnormal vitals (never an immediately terminal state).
PatientState initial_state(Rng& rng);

struct StepResult {
  PatientState next;
  double reward = 0.0;
  bool done = false;
};
StepResult step(const PatientState& s, const TreatmentAction& a, Rng& rng);

// The exact 1440-state MDP implied by the dynamics: analytic transition
// probabilities, entry rewards, terminal flags and the initial distribution.
TabularMdp exact_transition_tensor();

// Analytic distribution of initial_state over state indices.
Eigen::VectorXd initial_distribution();

// Numeric encoding of each state: [diabetic, heart_rate, sys_bp, oxygen,
// glucose, prev_abx, prev_vaso, prev_vent].
Eigen::MatrixXd state_features();

TrajectoryDataset generate_trajectories(const StochasticPolicy& policy, int n, int max_len,
                                        Rng& rng);
// Keep generating episodes until at least `pairs` state-action pairs exist.
TrajectoryDataset generate_pair_budget(const StochasticPolicy& policy, std::size_t pairs,
                                       int max_len, Rng& rng);

}  // namespace proto_ope::sepsis
