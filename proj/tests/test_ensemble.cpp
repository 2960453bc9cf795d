#include <doctest.h>

#include <cmath>

#include "ebbb/ensemble.hpp"

using namespace ebbb;

namespace {

LarmorParams small_larmor() {
  LarmorParams p;
  p.eps = 0.05;
  p.duration = 0.5;
  return p;
}

}  // namespace

TEST_CASE("single trajectory: frequencies are occupancy indicators") {
  const ExperimentSpec spec = build_larmor(small_larmor());
  EnsembleConfig cfg;
  cfg.n_trajectories = 1;
  cfg.base_seed = 9;
  cfg.keep_trajectories = true;
  const EnsembleResult res = run_ensemble(spec, cfg);

  for (Eigen::Index r = 0; r < res.stats.freq.rows(); ++r) {
    CHECK(res.stats.freq.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (Eigen::Index c = 0; c < res.stats.freq.cols(); ++c) {
      const double f = res.stats.freq(r, c);
      CHECK((f == 0.0 || f == 1.0));
    }
  }
  // Exact reference rows are probability distributions.
  for (Eigen::Index r = 0; r < res.stats.exact.rows(); ++r)
    CHECK(res.stats.exact.row(r).sum() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("reproducibility: identical runs, worker-count independence") {
  const ExperimentSpec spec = build_larmor(small_larmor());
  EnsembleConfig cfg;
  cfg.n_trajectories = 40;
  cfg.base_seed = 1234;
  cfg.keep_trajectories = true;

  cfg.workers = 1;
  const EnsembleResult a = run_ensemble(spec, cfg);
  const EnsembleResult b = run_ensemble(spec, cfg);
  cfg.workers = 4;
  const EnsembleResult c = run_ensemble(spec, cfg);

  REQUIRE(a.trajectories.size() == b.trajectories.size());
  REQUIRE(a.trajectories.size() == c.trajectories.size());
  for (size_t r = 0; r < a.trajectories.size(); ++r) {
    CHECK(a.trajectories[r] == b.trajectories[r]);
    CHECK(a.trajectories[r] == c.trajectories[r]);
  }
  CHECK((a.stats.freq - c.stats.freq).cwiseAbs().maxCoeff() == 0.0);

  // A different seed gives a different sample.
  cfg.base_seed = 4321;
  cfg.workers = 1;
  const EnsembleResult d = run_ensemble(spec, cfg);
  bool any_difference = false;
  for (size_t r = 0; r < a.trajectories.size() && !any_difference; ++r)
    any_difference = a.trajectories[r] != d.trajectories[r];
  CHECK(any_difference);
}

TEST_CASE("final wave function matches direct stage application") {
  const ExperimentSpec spec = build_larmor(small_larmor());
  EnsembleConfig cfg;
  cfg.n_trajectories = 2;
  const EnsembleResult res = run_ensemble(spec, cfg);

  Vector psi = spec.initial_state;
  for (int k = 0; k < spec.schedule[0].n_substeps; ++k)
    psi = spec.schedule[0].substep * psi;
  CHECK(max_abs(Matrix(res.final_state - psi)) < 1e-10);
}

TEST_CASE("eprb: equal device angles give perfect anticorrelation") {
  EprbParams params;
  params.beta = params.alpha;
  params.n_substeps = 10;
  const ExperimentSpec spec = build_eprb_stage2(params, eprb_allset_state(params));

  EnsembleConfig cfg;
  cfg.n_trajectories = 200;
  cfg.base_seed = 77;
  cfg.keep_trajectories = true;
  cfg.record_every = spec.schedule[0].n_substeps;  // record first and last only
  const EnsembleResult res = run_ensemble(spec, cfg);
  const std::vector<std::uint32_t>& final_labels = res.trajectories.back();

  long long seen = 0;
  for (int phi1 = 0; phi1 < 2; ++phi1)
    for (int phi2 = 0; phi2 < 2; ++phi2) {
      const ScalarEstimate c = spin_correlation(spec, final_labels, phi1, phi2);
      seen += c.count;
      if (c.count > 0) CHECK(c.value == doctest::Approx(-1.0));
    }
  CHECK(seen == 200);
}

TEST_CASE("eprb: exact correlation and single-spin means from the final state") {
  const EprbParams params;
  const ExperimentSpec spec = build_eprb_stage2(params, eprb_allset_state(params));
  Vector psi = spec.initial_state;
  for (int k = 0; k < spec.schedule[0].n_substeps; ++k)
    psi = spec.schedule[0].substep * psi;

  const double angles[2] = {params.alpha, params.beta};
  for (int phi1 = 0; phi1 < 2; ++phi1)
    for (int phi2 = 0; phi2 < 2; ++phi2)
      CHECK(exact_spin_correlation(spec, psi, phi1, phi2) ==
            doctest::Approx(-std::cos(angles[phi1] - angles[phi2])).epsilon(1e-9));

  for (int particle = 0; particle < 2; ++particle)
    for (int phi = 0; phi < 2; ++phi)
      CHECK(std::abs(exact_single_spin_mean(spec, psi, particle, phi)) < 1e-9);
}

TEST_CASE("sampled single-spin means: values in {-1, +1} for one trajectory") {
  const EprbParams params;
  const ExperimentSpec spec = build_eprb_stage2(params, eprb_allset_state(params));
  EnsembleConfig cfg;
  cfg.n_trajectories = 1;
  cfg.base_seed = 5;
  cfg.keep_trajectories = true;
  cfg.record_every = spec.schedule[0].n_substeps;
  const EnsembleResult res = run_ensemble(spec, cfg);
  const std::vector<std::uint32_t>& final_labels = res.trajectories.back();

  int measured = 0;
  for (int particle = 0; particle < 2; ++particle)
    for (int phi = 0; phi < 2; ++phi) {
      const ScalarEstimate m = single_spin_mean(spec, final_labels, particle, phi);
      if (m.count == 1) {
        ++measured;
        CHECK((m.value == 1.0 || m.value == -1.0));
      }
    }
  CHECK(measured == 2);  // one realized device angle per particle
}
