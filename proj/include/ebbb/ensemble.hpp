#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ebbb/dynamics.hpp"
#include "ebbb/models.hpp"

namespace ebbb {

struct EnsembleConfig {
  long long n_trajectories = 1;
  std::uint64_t base_seed = 1;
  int record_every = 1;  // record every k-th sub-step (plus first and last)
  int workers = 0;       // <= 0: hardware concurrency
  bool keep_trajectories = false;
};

struct EnsembleStats {
  RealVector times;                 // recorded times
  std::vector<std::string> labels;  // tracked-label names
  // n_records x n_labels: exact probabilities, empirical frequencies and
  // binomial standard errors sqrt(p (1 - p) / n).
  RealMatrix exact, freq, std_error;
  long long n_trajectories = 0;
};

// Frame angles at one recorded time: angles[x][i] is the Euler fit of
// particle i at flat external configuration x.
struct RecordedFrame {
  std::vector<std::vector<EulerFit>> angles;
};

struct EnsembleResult {
  EnsembleStats stats;
  // trajectories[r][k]: label of trajectory k at recorded step r; filled when
  // cfg.keep_trajectories is set.
  std::vector<std::vector<std::uint32_t>> trajectories;
  // Per recorded step, when the experiment evolves spin frames.
  std::vector<RecordedFrame> frames;
  Vector final_state;  // exact wave function at the end of the schedule
  long long halvings = 0;
  int max_halving_depth = 0;
};

// Runs cfg.n_trajectories independent trajectories of the experiment.
// Bit-for-bit reproducible for fixed (spec, cfg) and independent of the
// worker count: every trajectory owns a seeded random stream, the shared
// wave-function/frame evolution is computed once per sub-step, and counts
// are reduced by integer addition.
EnsembleResult run_ensemble(const ExperimentSpec& spec, const EnsembleConfig& cfg);

struct ScalarEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long long count = 0;
};

// <sigma1 sigma2> over final-step stage-2 EPRB labels, conditioned on the
// realized device pair (phi1, phi2) with 0 = alpha, 1 = beta. Spin signs are
// read off the x outcomes. Empty bucket -> NaN with count 0.
ScalarEstimate spin_correlation(const ExperimentSpec& spec,
                                const std::vector<std::uint32_t>& final_labels,
                                int phi1, int phi2);

// <sigma_i> for one particle conditioned on its realized device angle.
ScalarEstimate single_spin_mean(const ExperimentSpec& spec,
                                const std::vector<std::uint32_t>& final_labels,
                                int particle, int phi);

// The same quantities from an exact final wave function.
double exact_spin_correlation(const ExperimentSpec& spec, const Vector& final_state,
                              int phi1, int phi2);
double exact_single_spin_mean(const ExperimentSpec& spec, const Vector& final_state,
                              int particle, int phi);

}  // namespace ebbb
