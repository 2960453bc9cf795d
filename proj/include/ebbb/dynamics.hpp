#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <random>
#include <stdexcept>
#include <vector>

#include "ebbb/config_space.hpp"
#include "ebbb/linalg.hpp"

namespace ebbb {

// Occupation probabilities at or below this floor make the jump
// distribution out of a configuration undefined.
inline constexpr double kSourceProbabilityFloor = 1e-12;

// Raised when the total jump probability out of the occupied configuration
// exceeds one for the attempted time step.
class ConsistencyViolation : public std::runtime_error {
 public:
  ConsistencyViolation(Index source, double total)
      : std::runtime_error("jump probabilities sum to " + std::to_string(total) +
                           " > 1 at configuration " + std::to_string(source)),
        source(source),
        total(total) {}
  Index source;
  double total;
};

// Raised when the occupied configuration carries (numerically) zero
// probability, so the jump distribution is undefined. Shrinking the time
// step cannot fix this.
class DegenerateSource : public std::runtime_error {
 public:
  explicit DegenerateSource(Index source)
      : std::runtime_error("occupied configuration " + std::to_string(source) +
                           " has vanishing probability"),
        source(source) {}
  Index source;
};

class MaxHalvingsExceeded : public std::runtime_error {
 public:
  explicit MaxHalvingsExceeded(int depth)
      : std::runtime_error("time-step halving did not restore consistency after " +
                           std::to_string(depth) + " levels"),
        depth(depth) {}
  int depth;
};

// Antisymmetric probability current J for one discrete step psi_a -> psi_b
// with transition operator u (all in the same representation):
//   J(n, m) = Re( conj(psi_b(n)) u(n, m) psi_a(m)
//               - conj(psi_b(m)) u(m, n) psi_a(n) ).
Matrix current_matrix(const Vector& psi_b, const Matrix& u, const Vector& psi_a);

// Exact transport identity: p plus the row sums of the current reproduces
// the updated probabilities. Returned in flow form, i.e. inflows
// max(0, J(n, m)) minus outflows max(0, J(m, n)).
RealVector master_update(const RealVector& p, const Matrix& j);

// Rounding slack when testing the consistency condition total <= 1.
inline constexpr double kConsistencySlack = 1e-12;

struct JumpDistribution {
  Index source = 0;
  std::vector<double> rates;  // rates[n] = probability of jumping to label n
  double total = 0.0;         // sum of rates
  double stay = 1.0;          // complement, clamped to 0 after the check
};

// Jump probabilities out of composite configuration `source` for one step.
// Throws DegenerateSource if the source probability underflows and
// ConsistencyViolation if the rates sum beyond 1 (the step must shrink).
JumpDistribution jump_distribution(const Vector& psi_b, const Matrix& u,
                                   const Vector& psi_a, Index source);

// Same, with composite configurations aggregated into labels (e.g. marginal
// guidance on external configurations only). groups[k] lists the composite
// indices belonging to label k; `source` is a label index.
JumpDistribution jump_distribution(const Vector& psi_b, const Matrix& u,
                                   const Vector& psi_a,
                                   const std::vector<std::vector<Index>>& groups,
                                   Index source);

// Inverse-CDF sample: jump targets in ascending label order, staying put
// takes the tail of the unit interval.
Index sample_jump(const JumpDistribution& dist, double u01);

// Continuous-time jump rates max(0, -2 Im(conj(psi(n)) h(n,m) psi(m))) / P(m)
// out of configuration m under Hamiltonian h. The discrete step rates
// converge to eps times these as eps -> 0.
RealVector bell_rates(const Vector& psi, const Matrix& h, Index source);

// ---------------------------------------------------------------------------
// Deterministic per-trajectory random streams
// ---------------------------------------------------------------------------

std::uint64_t splitmix64_next(std::uint64_t& state);

// Decorrelated seed for trajectory k under a base seed.
std::uint64_t trajectory_seed(std::uint64_t base_seed, std::uint64_t k);

// Uniform in [0, 1) with a fixed cross-platform bit construction.
double uniform01(std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// One shared sub-step of a stage, adaptively halved per trajectory
// ---------------------------------------------------------------------------

struct StepCounters {
  long long halvings = 0;  // number of segment splits performed
  int max_depth = 0;       // deepest halving level reached
};

// Advances trajectory labels across one sub-step psi_t -> substep * psi_t.
// The state and representation data are shared by all trajectories; only the
// occupied label and the random draws are per-trajectory. When the jump
// probabilities out of the occupied label exceed one, the sub-step is split
// into two square-root halves (recursively, up to max_halvings levels);
// intermediate points keep the source representation w_t. Empty (0 x 0)
// representation matrices stand for the identity and skip all basis changes.
class StageStepper {
 public:
  StageStepper(Matrix substep, Matrix w_t, Matrix w_next, Vector psi_t,
               std::vector<std::vector<Index>> groups, int max_halvings = 20);

  // Convenience: one label per composite configuration.
  StageStepper(Matrix substep, Matrix w_t, Matrix w_next, Vector psi_t,
               int max_halvings = 20);

  Index advance(Index label, const std::function<double()>& draw,
                StepCounters* counters = nullptr) const;

  const Vector& psi_next() const { return psi_next_; }
  const Vector& psi_rep_t() const { return psi_rep_t_; }
  const Vector& psi_rep_next() const { return psi_rep_next_; }
  const Matrix& substep_rep() const { return substep_rep_; }
  Index label_count() const { return static_cast<Index>(groups_.size()); }

 private:
  Index segment(Index label, const Vector& psi_a, const Vector& psi_rep_a,
                int depth, bool final, const std::function<double()>& draw,
                StepCounters* counters) const;
  const Matrix& root(int depth) const;
  const Matrix& rep_operator(int depth, bool final) const;

  Matrix substep_, w_t_, w_next_;
  Vector psi_t_, psi_next_, psi_rep_t_, psi_rep_next_;
  Matrix substep_rep_;
  std::vector<std::vector<Index>> groups_;
  int max_halvings_;
  bool id_t_ = true, id_next_ = true;

  mutable std::mutex cache_mutex_;
  mutable std::vector<Matrix> roots_;          // roots_[d] = substep^(1/2^d)
  mutable std::vector<Matrix> rep_cache_;      // keyed 2*depth + final
  mutable std::vector<bool> rep_cache_valid_;
};

// Singleton groups for a plain composite-configuration process.
std::vector<std::vector<Index>> singleton_groups(Index n);

// External-configuration groups for marginal guidance.
std::vector<std::vector<Index>> external_groups(const ConfigurationSpace& space);

}  // namespace ebbb
