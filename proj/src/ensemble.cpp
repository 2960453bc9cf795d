#include "ebbb/ensemble.hpp"

#include <cmath>
#include <limits>
#include <thread>

namespace ebbb {

namespace {

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Probabilities of the tracked labels in the current representation.
RealVector label_probabilities(const Vector& psi_rep,
                               const std::vector<std::vector<Index>>& groups) {
  RealVector p = RealVector::Zero(static_cast<Index>(groups.size()));
  for (size_t g = 0; g < groups.size(); ++g) {
    double sum = 0.0;
    for (Index n : groups[g]) sum += std::norm(psi_rep(n));
    p(static_cast<Index>(g)) = sum;
  }
  return p;
}

Index sample_label(const RealVector& p, double u01) {
  double cum = 0.0;
  for (Index n = 0; n < p.size(); ++n) {
    cum += p(n);
    if (u01 < cum) return n;
  }
  return p.size() - 1;
}

struct TrajectoryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace

EnsembleResult run_ensemble(const ExperimentSpec& spec, const EnsembleConfig& cfg) {
  if (cfg.n_trajectories < 1)
    throw std::invalid_argument("run_ensemble: n_trajectories must be >= 1");
  if (cfg.record_every < 1)
    throw std::invalid_argument("run_ensemble: record_every must be >= 1");

  const long long n = cfg.n_trajectories;
  const int workers =
      std::min<long long>(resolve_workers(cfg.workers), std::max<long long>(1, n));
  const ConfigurationSpace& space = spec.space;

  const auto groups = spec.guidance == Guidance::Marginal
                          ? external_groups(space)
                          : singleton_groups(space.total_dim());
  const Index n_labels = static_cast<Index>(groups.size());

  long long total_steps = 0;
  for (const Stage& stage : spec.schedule) total_steps += stage.n_substeps;

  std::vector<long long> record_steps;
  for (long long k = 0; k <= total_steps; ++k)
    if (k % cfg.record_every == 0 || k == total_steps) record_steps.push_back(k);
  const size_t n_records = record_steps.size();

  EnsembleResult result;
  EnsembleStats& stats = result.stats;
  stats.n_trajectories = n;
  stats.times.resize(static_cast<Index>(n_records));
  stats.labels.resize(static_cast<size_t>(n_labels));
  for (Index g = 0; g < n_labels; ++g)
    stats.labels[static_cast<size_t>(g)] = spec.label_of ? spec.label_of(g)
                                                         : std::to_string(g);
  stats.exact.resize(static_cast<Index>(n_records), n_labels);
  stats.freq.resize(static_cast<Index>(n_records), n_labels);
  stats.std_error.resize(static_cast<Index>(n_records), n_labels);
  if (cfg.keep_trajectories)
    result.trajectories.assign(n_records, std::vector<std::uint32_t>(
                                              static_cast<size_t>(n), 0));

  // Per-trajectory random streams: parallel scheduling cannot change results.
  std::vector<std::mt19937_64> rngs;
  rngs.reserve(static_cast<size_t>(n));
  for (long long k = 0; k < n; ++k)
    rngs.emplace_back(trajectory_seed(cfg.base_seed, static_cast<std::uint64_t>(k)));

  Vector psi = spec.initial_state;
  BasisFrame frame_t;
  if (spec.uses_frames) {
    const BasisFrame seed_frame = identity_frame(space);
    frame_t = build_frame(psi, space, spec.spin_ops, spec.fit_mode, &seed_frame);
  }

  auto rep_probs = [&](const Vector& state, const BasisFrame& frame) {
    if (!spec.uses_frames) return label_probabilities(state, groups);
    return label_probabilities(Vector(frame_matrix(space, frame) * state), groups);
  };

  std::vector<Index> labels(static_cast<size_t>(n), 0);
  {
    const RealVector p0 = rep_probs(psi, frame_t);
    for (long long k = 0; k < n; ++k)
      labels[static_cast<size_t>(k)] =
          sample_label(p0, uniform01(rngs[static_cast<size_t>(k)]));
  }

  size_t record_cursor = 0;
  auto record = [&](long long step, const RealVector& p_exact) {
    if (record_cursor >= n_records || record_steps[record_cursor] != step) return;
    const Index r = static_cast<Index>(record_cursor);
    stats.times(r) = static_cast<double>(step) * spec.eps;
    std::vector<long long> counts(static_cast<size_t>(n_labels), 0);
    for (long long k = 0; k < n; ++k) ++counts[static_cast<size_t>(labels[static_cast<size_t>(k)])];
    for (Index g = 0; g < n_labels; ++g) {
      const double freq = static_cast<double>(counts[static_cast<size_t>(g)]) / n;
      stats.exact(r, g) = p_exact(g);
      stats.freq(r, g) = freq;
      stats.std_error(r, g) = std::sqrt(freq * (1.0 - freq) / n);
    }
    if (cfg.keep_trajectories)
      for (long long k = 0; k < n; ++k)
        result.trajectories[record_cursor][static_cast<size_t>(k)] =
            static_cast<std::uint32_t>(labels[static_cast<size_t>(k)]);
    if (spec.uses_frames) {
      RecordedFrame rec;
      rec.angles.reserve(frame_t.entries.size());
      for (const FrameEntry& e : frame_t.entries) rec.angles.push_back(e.angles);
      result.frames.push_back(std::move(rec));
    }
    ++record_cursor;
  };

  record(0, rep_probs(psi, frame_t));

  long long step = 0;
  for (const Stage& stage : spec.schedule) {
    for (int sub = 0; sub < stage.n_substeps; ++sub) {
      BasisFrame frame_next;
      Matrix w_t, w_next;
      if (spec.uses_frames) {
        frame_next = build_frame(Vector(stage.substep * psi), space, spec.spin_ops,
                                 spec.fit_mode, &frame_t);
        w_t = frame_matrix(space, frame_t);
        w_next = frame_matrix(space, frame_next);
      }
      const StageStepper stepper(stage.substep, std::move(w_t), std::move(w_next),
                                 psi, groups);

      std::vector<StepCounters> counters(static_cast<size_t>(workers));
      std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
      auto work = [&](int w) {
        const long long lo = n * w / workers, hi = n * (w + 1) / workers;
        for (long long k = lo; k < hi; ++k) {
          try {
            auto& rng = rngs[static_cast<size_t>(k)];
            labels[static_cast<size_t>(k)] =
                stepper.advance(labels[static_cast<size_t>(k)],
                                [&rng] { return uniform01(rng); },
                                &counters[static_cast<size_t>(w)]);
          } catch (const std::exception& e) {
            errors[static_cast<size_t>(w)] = std::make_exception_ptr(TrajectoryError(
                "trajectory " + std::to_string(k) + " at step " +
                std::to_string(step + 1) + ": " + e.what()));
            return;
          }
        }
      };
      if (workers == 1) {
        work(0);
      } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
      }
      for (const auto& err : errors)
        if (err) std::rethrow_exception(err);
      for (const auto& c : counters) {
        result.halvings += c.halvings;
        result.max_halving_depth = std::max(result.max_halving_depth, c.max_depth);
      }

      psi = stepper.psi_next();
      if (spec.uses_frames) frame_t = std::move(frame_next);
      ++step;
      record(step, spec.uses_frames ? rep_probs(psi, frame_t)
                                    : label_probabilities(psi, groups));
    }
  }
  result.final_state = psi;
  return result;
}

// ---------------------------------------------------------------------------
// EPRB outcome statistics
// ---------------------------------------------------------------------------

namespace {

ScalarEstimate mean_of_signs(double sum, long long count) {
  if (count == 0)
    return {std::numeric_limits<double>::quiet_NaN(),
            std::numeric_limits<double>::quiet_NaN(), 0};
  const double mean = sum / count;
  const double var = std::max(0.0, 1.0 - mean * mean);
  return {mean, std::sqrt(var / count), count};
}

}  // namespace

ScalarEstimate spin_correlation(const ExperimentSpec& spec,
                                const std::vector<std::uint32_t>& final_labels,
                                int phi1, int phi2) {
  double sum = 0.0;
  long long count = 0;
  for (std::uint32_t label : final_labels) {
    const Eprb2Beables b = eprb2_decode(spec.space, label);
    if (b.phi1 != phi1 || b.phi2 != phi2) continue;
    const int s1 = eprb2_x_sign(b.x1), s2 = eprb2_x_sign(b.x2);
    if (s1 == 0 || s2 == 0) continue;  // no recorded outcome yet
    sum += s1 * s2;
    ++count;
  }
  return mean_of_signs(sum, count);
}

ScalarEstimate single_spin_mean(const ExperimentSpec& spec,
                                const std::vector<std::uint32_t>& final_labels,
                                int particle, int phi) {
  double sum = 0.0;
  long long count = 0;
  for (std::uint32_t label : final_labels) {
    const Eprb2Beables b = eprb2_decode(spec.space, label);
    const int dev = particle == 0 ? b.phi1 : b.phi2;
    const int sign = eprb2_x_sign(particle == 0 ? b.x1 : b.x2);
    if (dev != phi || sign == 0) continue;
    sum += sign;
    ++count;
  }
  return mean_of_signs(sum, count);
}

double exact_spin_correlation(const ExperimentSpec& spec, const Vector& final_state,
                              int phi1, int phi2) {
  double sum = 0.0, total = 0.0;
  for (Index n = 0; n < final_state.size(); ++n) {
    const double p = std::norm(final_state(n));
    if (p == 0.0) continue;
    const Eprb2Beables b = eprb2_decode(spec.space, n);
    if (b.phi1 != phi1 || b.phi2 != phi2) continue;
    const int s1 = eprb2_x_sign(b.x1), s2 = eprb2_x_sign(b.x2);
    if (s1 == 0 || s2 == 0) continue;
    sum += p * s1 * s2;
    total += p;
  }
  return total > 0.0 ? sum / total : std::numeric_limits<double>::quiet_NaN();
}

double exact_single_spin_mean(const ExperimentSpec& spec, const Vector& final_state,
                              int particle, int phi) {
  double sum = 0.0, total = 0.0;
  for (Index n = 0; n < final_state.size(); ++n) {
    const double p = std::norm(final_state(n));
    if (p == 0.0) continue;
    const Eprb2Beables b = eprb2_decode(spec.space, n);
    const int dev = particle == 0 ? b.phi1 : b.phi2;
    const int sign = eprb2_x_sign(particle == 0 ? b.x1 : b.x2);
    if (dev != phi || sign == 0) continue;
    sum += p * sign;
    total += p;
  }
  return total > 0.0 ? sum / total : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace ebbb
