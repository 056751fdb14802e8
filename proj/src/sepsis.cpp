#include "proto_ope/sepsis.hpp"

#include <cmath>
#include <stdexcept>

namespace proto_ope::sepsis {

namespace {

// Dynamics constants. Treatments push vitals toward normal, withdrawing a
// treatment risks relapse, and diabetes amplifies glucose volatility.
constexpr double kAbxNormalizes = 0.5;        // high hr/bp -> normal while on abx
constexpr double kAbxRelapse = 0.1;           // normal hr/bp -> high after withdrawal
constexpr double kVentNormalizes = 0.7;       // low o2 -> normal while on vent
constexpr double kVentRelapse = 0.1;          // normal o2 -> low after withdrawal
constexpr double kVasoUpNondiab = 0.7;        // bp one level up
constexpr double kVasoUp1Diab = 0.5;          // bp one level up (diabetic)
constexpr double kVasoUp2Diab = 0.4;          // bp two levels up (diabetic)
constexpr double kVasoGlucoseUp = 0.5;        // glucose one level up (diabetic)
constexpr double kVasoRelapseNondiab = 0.1;   // bp one level down after withdrawal
constexpr double kVasoRelapseDiab = 0.05;
constexpr double kFluctuate = 0.1;            // spontaneous +-1 level
constexpr double kFluctuateGlucoseDiab = 0.3;
constexpr double kDiabetesRate = 0.2;

template <std::size_t N>
using Dist = std::array<double, N>;

template <std::size_t N>
Dist<N> delta(int level) {
  Dist<N> d{};
  d[static_cast<std::size_t>(level)] = 1.0;
  return d;
}

// Move mass up or down one level with probability p, clamped at the bounds.
template <std::size_t N>
Dist<N> shift(const Dist<N>& in, int offset, double p) {
  Dist<N> out{};
  for (int l = 0; l < static_cast<int>(N); ++l) {
    if (in[l] == 0.0) continue;
    int to = std::clamp(l + offset, 0, static_cast<int>(N) - 1);
    out[l] += in[l] * (1.0 - p);
    out[to] += in[l] * p;
  }
  return out;
}

// Mass at `from` moves to `to` with probability p.
template <std::size_t N>
Dist<N> jump(const Dist<N>& in, int from, int to, double p) {
  Dist<N> out = in;
  double moved = in[from] * p;
  out[from] -= moved;
  out[to] += moved;
  return out;
}

template <std::size_t N>
Dist<N> fluctuate(const Dist<N>& in, double p) {
  // Direction uniform, attempts beyond a bound stay put.
  Dist<N> out{};
  for (int l = 0; l < static_cast<int>(N); ++l) {
    if (in[l] == 0.0) continue;
    int down = std::max(l - 1, 0);
    int up = std::min(l + 1, static_cast<int>(N) - 1);
    out[down] += in[l] * p / 2.0;
    out[up] += in[l] * p / 2.0;
    out[l] += in[l] * (1.0 - p);
  }
  return out;
}

template <std::size_t N>
int sample_level(const Dist<N>& d, Rng& rng) {
  return rng.categorical(std::span<const double>(d.data(), d.size()));
}

}  // namespace

TreatmentAction TreatmentAction::from_index(int idx) {
  if (idx < 0 || idx >= kNumActions)
    throw std::invalid_argument("TreatmentAction::from_index: index out of range");
  return {bool(idx & 1), bool(idx & 2), bool(idx & 4)};
}

int state_index(const PatientState& s) {
  int prev = int(s.prev_abx) + 2 * int(s.prev_vaso) + 4 * int(s.prev_vent);
  int idx = int(s.diabetic);
  idx = idx * 3 + s.heart_rate;
  idx = idx * 3 + s.sys_bp;
  idx = idx * 2 + s.oxygen;
  idx = idx * 5 + s.glucose;
  idx = idx * 8 + prev;
  return idx;
}

PatientState state_from_index(int idx) {
  if (idx < 0 || idx >= kNumStates)
    throw std::invalid_argument("state_from_index: index out of range");
  PatientState s;
  int prev = idx % 8;
  idx /= 8;
  s.glucose = idx % 5;
  idx /= 5;
  s.oxygen = idx % 2;
  idx /= 2;
  s.sys_bp = idx % 3;
  idx /= 3;
  s.heart_rate = idx % 3;
  idx /= 3;
  s.diabetic = idx != 0;
  s.prev_abx = prev & 1;
  s.prev_vaso = prev & 2;
  s.prev_vent = prev & 4;
  return s;
}

int abnormal_count(const PatientState& s) {
  return int(s.heart_rate != 1) + int(s.sys_bp != 1) + int(s.oxygen != 1) + int(s.glucose != 2);
}

bool is_death_state(const PatientState& s) { return abnormal_count(s) >= 3; }

bool is_discharge_state(const PatientState& s) {
  return abnormal_count(s) == 0 && !s.prev_abx && !s.prev_vaso && !s.prev_vent;
}

bool is_terminal_state(const PatientState& s) {
  return is_death_state(s) || is_discharge_state(s);
}

VitalKernels vital_kernels(const PatientState& s, const TreatmentAction& a) {
  VitalKernels k;

  // Heart rate: targeted by antibiotics.
  auto hr = delta<3>(s.heart_rate);
  if (a.abx) {
    hr = jump(hr, 2, 1, kAbxNormalizes);
  } else {
    if (s.prev_abx) hr = jump(hr, 1, 2, kAbxRelapse);
    hr = fluctuate(hr, kFluctuate);
  }
  k.heart_rate = hr;

  // Blood pressure: targeted by antibiotics and vasopressors.
  auto bp = delta<3>(s.sys_bp);
  if (a.abx) {
    bp = jump(bp, 2, 1, kAbxNormalizes);
  } else if (s.prev_abx) {
    bp = jump(bp, 1, 2, kAbxRelapse);
  }
  if (a.vaso) {
    if (s.diabetic) {
      Dist<3> up{};
      for (int l = 0; l < 3; ++l) {
        if (bp[l] == 0.0) continue;
        up[std::min(l + 1, 2)] += bp[l] * kVasoUp1Diab;
        up[std::min(l + 2, 2)] += bp[l] * kVasoUp2Diab;
        up[l] += bp[l] * (1.0 - kVasoUp1Diab - kVasoUp2Diab);
      }
      bp = up;
    } else {
      bp = shift(bp, +1, kVasoUpNondiab);
    }
  } else if (s.prev_vaso) {
    bp = shift(bp, -1, s.diabetic ? kVasoRelapseDiab : kVasoRelapseNondiab);
  }
  if (!a.abx && !a.vaso) bp = fluctuate(bp, kFluctuate);
  k.sys_bp = bp;

  // Oxygen: targeted by ventilation.
  auto o2 = delta<2>(s.oxygen);
  if (a.vent) {
    o2 = jump(o2, 0, 1, kVentNormalizes);
  } else {
    if (s.prev_vent) o2 = jump(o2, 1, 0, kVentRelapse);
    o2 = fluctuate(o2, kFluctuate);
  }
  k.oxygen = o2;

  // Glucose: targeted by vasopressors for diabetics only.
  auto glu = delta<5>(s.glucose);
  if (a.vaso && s.diabetic) {
    glu = shift(glu, +1, kVasoGlucoseUp);
  } else {
    glu = fluctuate(glu, s.diabetic ? kFluctuateGlucoseDiab : kFluctuate);
  }
  k.glucose = glu;

  return k;
}

namespace {

Dist<3> initial_hr_or_bp() { return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}; }
Dist<2> initial_oxygen() { return {0.2, 0.8}; }

Dist<5> initial_glucose(bool diabetic) {
  if (diabetic) return {0.1, 0.2, 0.4, 0.2, 0.1};
  // Nondiabetic: normal w.p. 0.7, otherwise one step off-normal.
  return {0.0, 0.15, 0.7, 0.15, 0.0};
}

}  // namespace

PatientState initial_state(Rng& rng) {
  PatientState s;
  s.diabetic = rng.bernoulli(kDiabetesRate);
  s.prev_abx = s.prev_vaso = s.prev_vent = false;
  auto glu = initial_glucose(s.diabetic);
  // Resample vitals until the patient is neither dischargeable (0 abnormal)
  // nor dying (>= 3 abnormal).
  for (;;) {
    s.heart_rate = sample_level(initial_hr_or_bp(), rng);
    s.sys_bp = sample_level(initial_hr_or_bp(), rng);
    s.oxygen = sample_level(initial_oxygen(), rng);
    s.glucose = sample_level(glu, rng);
    int abnormal = abnormal_count(s);
    if (abnormal >= 1 && abnormal <= 2) return s;
  }
}

StepResult step(const PatientState& s, const TreatmentAction& a, Rng& rng) {
  if (is_terminal_state(s)) throw std::invalid_argument("step: state is terminal");
  VitalKernels k = vital_kernels(s, a);
  PatientState next;
  next.diabetic = s.diabetic;
  next.heart_rate = sample_level(k.heart_rate, rng);
  next.sys_bp = sample_level(k.sys_bp, rng);
  next.oxygen = sample_level(k.oxygen, rng);
  next.glucose = sample_level(k.glucose, rng);
  next.prev_abx = a.abx;
  next.prev_vaso = a.vaso;
  next.prev_vent = a.vent;

  StepResult out;
  out.next = next;
  if (is_death_state(next)) {
    out.reward = -1.0;
    out.done = true;
  } else if (is_discharge_state(next)) {
    out.reward = 1.0;
    out.done = true;
  }
  return out;
}

Eigen::VectorXd initial_distribution() {
  Eigen::VectorXd dist = Eigen::VectorXd::Zero(kNumStates);
  for (int diab = 0; diab < 2; ++diab) {
    auto hr = initial_hr_or_bp();
    auto bp = initial_hr_or_bp();
    auto o2 = initial_oxygen();
    auto glu = initial_glucose(diab != 0);
    double accepted = 0.0;
    Eigen::VectorXd block = Eigen::VectorXd::Zero(kNumStates);
    for (int h = 0; h < 3; ++h)
      for (int b = 0; b < 3; ++b)
        for (int o = 0; o < 2; ++o)
          for (int g = 0; g < 5; ++g) {
            PatientState s;
            s.diabetic = diab != 0;
            s.heart_rate = h;
            s.sys_bp = b;
            s.oxygen = o;
            s.glucose = g;
            int abnormal = abnormal_count(s);
            if (abnormal < 1 || abnormal > 2) continue;
            double p = hr[h] * bp[b] * o2[o] * glu[g];
            block[state_index(s)] = p;
            accepted += p;
          }
    double mass = (diab != 0) ? kDiabetesRate : 1.0 - kDiabetesRate;
    dist += block * (mass / accepted);
  }
  return dist;
}

TabularMdp exact_transition_tensor() {
  TabularMdp mdp = TabularMdp::empty(kNumStates, kNumActions);
  for (int idx = 0; idx < kNumStates; ++idx) {
    PatientState s = state_from_index(idx);
    if (is_death_state(s)) {
      mdp.terminal[idx] = 1;
      mdp.reward[idx] = -1.0;
    } else if (is_discharge_state(s)) {
      mdp.terminal[idx] = 1;
      mdp.reward[idx] = 1.0;
    }
  }
  for (int idx = 0; idx < kNumStates; ++idx) {
    PatientState s = state_from_index(idx);
    for (int ai = 0; ai < kNumActions; ++ai) {
      auto& row = mdp.row(idx, ai);
      if (mdp.terminal[idx]) {
        row = {{idx, 1.0}};
        continue;
      }
      TreatmentAction a = TreatmentAction::from_index(ai);
      VitalKernels k = vital_kernels(s, a);
      PatientState next;
      next.diabetic = s.diabetic;
      next.prev_abx = a.abx;
      next.prev_vaso = a.vaso;
      next.prev_vent = a.vent;
      for (int h = 0; h < 3; ++h) {
        if (k.heart_rate[h] == 0.0) continue;
        for (int b = 0; b < 3; ++b) {
          if (k.sys_bp[b] == 0.0) continue;
          for (int o = 0; o < 2; ++o) {
            if (k.oxygen[o] == 0.0) continue;
            for (int g = 0; g < 5; ++g) {
              if (k.glucose[g] == 0.0) continue;
              next.heart_rate = h;
              next.sys_bp = b;
              next.oxygen = o;
              next.glucose = g;
              row.push_back(
                  {state_index(next), k.heart_rate[h] * k.sys_bp[b] * k.oxygen[o] * k.glucose[g]});
            }
          }
        }
      }
    }
  }
  Eigen::VectorXd init = initial_distribution();
  for (int idx = 0; idx < kNumStates; ++idx) mdp.initial_dist[idx] = init[idx];
  mdp.validate();
  return mdp;
}

Eigen::MatrixXd state_features() {
  Eigen::MatrixXd f(kNumStates, kFeatureDim);
  for (int idx = 0; idx < kNumStates; ++idx) {
    PatientState s = state_from_index(idx);
    f(idx, 0) = double(s.diabetic);
    f(idx, 1) = double(s.heart_rate);
    f(idx, 2) = double(s.sys_bp);
    f(idx, 3) = double(s.oxygen);
    f(idx, 4) = double(s.glucose);
    f(idx, 5) = double(s.prev_abx);
    f(idx, 6) = double(s.prev_vaso);
    f(idx, 7) = double(s.prev_vent);
  }
  return f;
}

TrajectoryDataset generate_trajectories(const StochasticPolicy& policy, int n, int max_len,
                                        Rng& rng) {
  if (n < 1 || max_len < 1)
    throw std::invalid_argument("generate_trajectories: n and max_len must be >= 1");
  if (policy.n_states() != kNumStates || policy.n_actions() != kNumActions)
    throw std::invalid_argument("generate_trajectories: policy shape does not match simulator");

  TrajectoryDataset data;
  data.n_states = kNumStates;
  data.n_actions = kNumActions;
  data.items.reserve(n);
  for (int i = 0; i < n; ++i) {
    Trajectory tr;
    PatientState s = initial_state(rng);
    for (int t = 0; t < max_len; ++t) {
      int si = state_index(s);
      Eigen::VectorXd probs = policy.probs.row(si).transpose();
      int ai = rng.categorical(std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size())));
      StepResult res = step(s, TreatmentAction::from_index(ai), rng);
      tr.contexts.push_back(si);
      tr.actions.push_back(ai);
      tr.step_rewards.push_back(res.reward);
      tr.final_context = state_index(res.next);
      if (res.done) {
        tr.terminal_reward = res.reward;
        tr.terminated = res.reward > 0 ? Termination::discharged : Termination::died;
        break;
      }
      s = res.next;
    }
    data.items.push_back(std::move(tr));
  }
  return data;
}

TrajectoryDataset generate_pair_budget(const StochasticPolicy& policy, std::size_t pairs,
                                       int max_len, Rng& rng) {
  TrajectoryDataset data;
  data.n_states = kNumStates;
  data.n_actions = kNumActions;
  std::size_t total = 0;
  while (total < pairs) {
    TrajectoryDataset one = generate_trajectories(policy, 1, max_len, rng);
    total += one.items[0].actions.size();
    data.items.push_back(std::move(one.items[0]));
  }
  return data;
}

}  // namespace proto_ope::sepsis
