#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace proto_ope {

// Error taxonomy. The CLI maps ConfigError (and invalid_argument) to exit
// code 2 and NumericError to exit code 3.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Solver failed to converge within its iteration cap, or the requested
// solution diverges (e.g. discount 1 on a non-episodic MDP).
struct SolverError : NumericError {
  using NumericError::NumericError;
};

// Deterministic random generator with explicit samplers. The std::
// distributions are implementation-defined, so we map the raw engine output
// ourselves to keep datasets reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
    return static_cast<int>(uniform() * n) % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Index sampled proportionally to probs (assumed to sum to ~1).
  int categorical(std::span<const double> probs);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Stable 64-bit hash for config fingerprints and seed derivation: every
// sub-task (split, replication, fold) gets an independent stream keyed by a
// readable tag.
std::uint64_t fnv1a(const std::string& s);
std::uint64_t derive_seed(std::uint64_t base, const std::string& tag);

// Fixed-order pairwise summation; keeps large reductions deterministic and
// well conditioned regardless of how the caller chunks the work.
double pairwise_sum(std::span<const double> xs);

// Quantile of a sample by linear interpolation on sorted order statistics.
double quantile(std::vector<double> xs, double q);

}  // namespace proto_ope
