#include "ebbb/dynamics.hpp"

#include <cmath>

namespace ebbb {

Matrix current_matrix(const Vector& psi_b, const Matrix& u, const Vector& psi_a) {
  const Index n = psi_a.size();
  Matrix j(n, n);
  for (Index a = 0; a < n; ++a) {
    j(a, a) = 0.0;
    for (Index b = 0; b < a; ++b) {
      const double v = (std::conj(psi_b(a)) * u(a, b) * psi_a(b) -
                        std::conj(psi_b(b)) * u(b, a) * psi_a(a))
                           .real();
      j(a, b) = v;
      j(b, a) = -v;
    }
  }
  return j;
}

RealVector master_update(const RealVector& p, const Matrix& j) {
  const Index n = p.size();
  RealVector out = p;
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b) {
      if (a == b) continue;
      const double flow = j(a, b).real();
      out(a) += std::max(0.0, flow);   // inflow b -> a
      out(a) -= std::max(0.0, -flow);  // outflow a -> b, J(b,a) = -J(a,b)
    }
  return out;
}

namespace {

// Current from label group `src` into label group `dst`, plus the source
// probability, without materializing the full current matrix.
void grouped_column(const Vector& psi_b, const Matrix& u, const Vector& psi_a,
                    const std::vector<std::vector<Index>>& groups, Index source,
                    JumpDistribution& out) {
  const auto& src = groups[static_cast<size_t>(source)];
  double p_src = 0.0;
  for (Index b : src) p_src += std::norm(psi_a(b));
  if (p_src <= kSourceProbabilityFloor) throw DegenerateSource(source);

  out.source = source;
  out.rates.assign(groups.size(), 0.0);
  out.total = 0.0;
  for (size_t g = 0; g < groups.size(); ++g) {
    if (static_cast<Index>(g) == source) continue;
    double flow = 0.0;
    for (Index a : groups[g])
      for (Index b : src)
        flow += (std::conj(psi_b(a)) * u(a, b) * psi_a(b) -
                 std::conj(psi_b(b)) * u(b, a) * psi_a(a))
                    .real();
    const double rate = std::max(0.0, flow) / p_src;
    out.rates[g] = rate;
    out.total += rate;
  }
}

}  // namespace

JumpDistribution jump_distribution(const Vector& psi_b, const Matrix& u,
                                   const Vector& psi_a,
                                   const std::vector<std::vector<Index>>& groups,
                                   Index source) {
  JumpDistribution dist;
  grouped_column(psi_b, u, psi_a, groups, source, dist);
  if (dist.total > 1.0 + kConsistencySlack)
    throw ConsistencyViolation(source, dist.total);
  dist.stay = std::max(0.0, 1.0 - dist.total);
  return dist;
}

JumpDistribution jump_distribution(const Vector& psi_b, const Matrix& u,
                                   const Vector& psi_a, Index source) {
  return jump_distribution(psi_b, u, psi_a, singleton_groups(psi_a.size()), source);
}

Index sample_jump(const JumpDistribution& dist, double u01) {
  double cum = 0.0;
  for (size_t n = 0; n < dist.rates.size(); ++n) {
    if (static_cast<Index>(n) == dist.source) continue;
    cum += dist.rates[n];
    if (u01 < cum) return static_cast<Index>(n);
  }
  return dist.source;
}

RealVector bell_rates(const Vector& psi, const Matrix& h, Index source) {
  const double p_src = std::norm(psi(source));
  if (p_src <= kSourceProbabilityFloor) throw DegenerateSource(source);
  const Index n = psi.size();
  RealVector rates = RealVector::Zero(n);
  for (Index a = 0; a < n; ++a) {
    if (a == source) continue;
    const double flux = 2.0 * (std::conj(psi(a)) * h(a, source) * psi(source)).imag();
    rates(a) = std::max(0.0, flux) / p_src;
  }
  return rates;
}

std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t trajectory_seed(std::uint64_t base_seed, std::uint64_t k) {
  std::uint64_t state = base_seed ^ (0xA0761D6478BD642FULL * (k + 1));
  splitmix64_next(state);
  return splitmix64_next(state);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<std::vector<Index>> singleton_groups(Index n) {
  std::vector<std::vector<Index>> groups(static_cast<size_t>(n));
  for (Index k = 0; k < n; ++k) groups[static_cast<size_t>(k)] = {k};
  return groups;
}

std::vector<std::vector<Index>> external_groups(const ConfigurationSpace& space) {
  std::vector<std::vector<Index>> groups(static_cast<size_t>(space.external_dim()));
  for (Index x = 0; x < space.external_dim(); ++x) {
    auto& g = groups[static_cast<size_t>(x)];
    g.reserve(static_cast<size_t>(space.internal_dim()));
    for (Index s = 0; s < space.internal_dim(); ++s)
      g.push_back(space.composite_from_flat(x, s));
  }
  return groups;
}

// ---------------------------------------------------------------------------
// StageStepper
// ---------------------------------------------------------------------------

StageStepper::StageStepper(Matrix substep, Matrix w_t, Matrix w_next, Vector psi_t,
                           std::vector<std::vector<Index>> groups, int max_halvings)
    : substep_(std::move(substep)),
      w_t_(std::move(w_t)),
      w_next_(std::move(w_next)),
      psi_t_(std::move(psi_t)),
      groups_(std::move(groups)),
      max_halvings_(max_halvings) {
  id_t_ = w_t_.size() == 0;
  id_next_ = w_next_.size() == 0;
  psi_next_ = substep_ * psi_t_;
  psi_rep_t_ = id_t_ ? psi_t_ : Vector(w_t_ * psi_t_);
  psi_rep_next_ = id_next_ ? psi_next_ : Vector(w_next_ * psi_next_);
  if (id_t_ && id_next_) {
    substep_rep_ = substep_;
  } else {
    Matrix lhs = id_next_ ? substep_ : Matrix(w_next_ * substep_);
    substep_rep_ = id_t_ ? lhs : Matrix(lhs * w_t_.adjoint());
  }
  roots_.push_back(substep_);
}

StageStepper::StageStepper(Matrix substep, Matrix w_t, Matrix w_next, Vector psi_t,
                           int max_halvings)
    : StageStepper(std::move(substep), std::move(w_t), std::move(w_next),
                   Vector(psi_t), singleton_groups(psi_t.size()), max_halvings) {}

const Matrix& StageStepper::root(int depth) const {
  std::lock_guard<std::mutex> lock(cache_mutex_);
  while (static_cast<int>(roots_.size()) <= depth)
    roots_.push_back(unitary_root(roots_.back(), 2));
  return roots_[static_cast<size_t>(depth)];
}

const Matrix& StageStepper::rep_operator(int depth, bool final) const {
  const Matrix& u = root(depth);
  if (depth == 0 && final) return substep_rep_;
  const bool id_b = final ? id_next_ : id_t_;
  if (id_b && id_t_) return u;
  std::lock_guard<std::mutex> lock(cache_mutex_);
  const size_t key = 2 * static_cast<size_t>(depth) + (final ? 1 : 0);
  if (rep_cache_.size() <= key) {
    rep_cache_.resize(key + 1);
    rep_cache_valid_.resize(key + 1, false);
  }
  if (!rep_cache_valid_[key]) {
    Matrix lhs = id_b ? u : Matrix((final ? w_next_ : w_t_) * u);
    rep_cache_[key] = id_t_ ? lhs : Matrix(lhs * w_t_.adjoint());
    rep_cache_valid_[key] = true;
  }
  return rep_cache_[key];
}

Index StageStepper::advance(Index label, const std::function<double()>& draw,
                            StepCounters* counters) const {
  return segment(label, psi_t_, psi_rep_t_, 0, true, draw, counters);
}

Index StageStepper::segment(Index label, const Vector& psi_a, const Vector& psi_rep_a,
                            int depth, bool final, const std::function<double()>& draw,
                            StepCounters* counters) const {
  const Matrix& u_rep = rep_operator(depth, final);
  Vector psi_rep_b;
  if (depth == 0) {
    psi_rep_b = psi_rep_next_;
  } else {
    psi_rep_b = root(depth) * psi_a;
    if (final ? !id_next_ : !id_t_) psi_rep_b = (final ? w_next_ : w_t_) * psi_rep_b;
  }

  JumpDistribution dist;
  grouped_column(psi_rep_b, u_rep, psi_rep_a, groups_, label, dist);
  if (dist.total <= 1.0 + kConsistencySlack) {
    dist.stay = std::max(0.0, 1.0 - dist.total);
    return sample_jump(dist, draw());
  }

  if (depth >= max_halvings_) throw MaxHalvingsExceeded(depth);
  if (counters) {
    ++counters->halvings;
    counters->max_depth = std::max(counters->max_depth, depth + 1);
  }
  const Index mid_label = segment(label, psi_a, psi_rep_a, depth + 1, false, draw, counters);
  // Fetch the root only after the recursive call: deeper segments may grow the
  // root cache and reallocate it, which would invalidate an earlier reference.
  const Vector psi_mid = root(depth + 1) * psi_a;
  const Vector psi_rep_mid = id_t_ ? psi_mid : Vector(w_t_ * psi_mid);
  return segment(mid_label, psi_mid, psi_rep_mid, depth + 1, final, draw, counters);
}

}  // namespace ebbb
