#pragma once

#include <stdexcept>
#include <vector>

#include "ebbb/linalg.hpp"

namespace ebbb {

struct ParticleDims {
  int external = 1;  // location-like levels
  int internal = 1;  // spin-like levels
};

/// Factor layout and composite-index codec for (x1 s1, ..., xN sN).
/// Particle 0 carries the slowest index; within a particle the external
/// index is slow and the spin index fast, matching tensor_product order.
class ConfigurationSpace {
 public:
  ConfigurationSpace() = default;

  explicit ConfigurationSpace(std::vector<ParticleDims> particles)
      : particles_(std::move(particles)) {
    total_ = 1;
    external_ = 1;
    internal_ = 1;
    for (const auto& p : particles_) {
      if (p.external < 1 || p.internal < 1)
        throw std::invalid_argument("ConfigurationSpace: dims must be >= 1");
      total_ *= static_cast<Index>(p.external) * p.internal;
      external_ *= p.external;
      internal_ *= p.internal;
    }
  }

  int particle_count() const { return static_cast<int>(particles_.size()); }
  const ParticleDims& particle(int i) const { return particles_[i]; }
  Index total_dim() const { return total_; }
  Index external_dim() const { return external_; }
  Index internal_dim() const { return internal_; }

  Index composite(const std::vector<int>& xs, const std::vector<int>& ss) const {
    Index n = 0;
    for (size_t i = 0; i < particles_.size(); ++i) {
      const auto& p = particles_[i];
      if (xs[i] < 0 || xs[i] >= p.external || ss[i] < 0 || ss[i] >= p.internal)
        throw std::out_of_range("ConfigurationSpace::composite: index out of range");
      n = n * (static_cast<Index>(p.external) * p.internal) +
          static_cast<Index>(xs[i]) * p.internal + ss[i];
    }
    return n;
  }

  void decompose(Index n, std::vector<int>& xs, std::vector<int>& ss) const {
    xs.resize(particles_.size());
    ss.resize(particles_.size());
    for (size_t i = particles_.size(); i-- > 0;) {
      const auto& p = particles_[i];
      const Index d = static_cast<Index>(p.external) * p.internal;
      const Index pi = n % d;
      n /= d;
      xs[i] = static_cast<int>(pi / p.internal);
      ss[i] = static_cast<int>(pi % p.internal);
    }
  }

  Index external_flat(const std::vector<int>& xs) const {
    Index x = 0;
    for (size_t i = 0; i < particles_.size(); ++i)
      x = x * particles_[i].external + xs[i];
    return x;
  }

  Index internal_flat(const std::vector<int>& ss) const {
    Index s = 0;
    for (size_t i = 0; i < particles_.size(); ++i)
      s = s * particles_[i].internal + ss[i];
    return s;
  }

  void split_external(Index x, std::vector<int>& xs) const {
    xs.resize(particles_.size());
    for (size_t i = particles_.size(); i-- > 0;) {
      xs[i] = static_cast<int>(x % particles_[i].external);
      x /= particles_[i].external;
    }
  }

  void split_internal(Index s, std::vector<int>& ss) const {
    ss.resize(particles_.size());
    for (size_t i = particles_.size(); i-- > 0;) {
      ss[i] = static_cast<int>(s % particles_[i].internal);
      s /= particles_[i].internal;
    }
  }

  /// Composite index from flat external and flat internal indices.
  Index composite_from_flat(Index x, Index s) const {
    std::vector<int> xs, ss;
    split_external(x, xs);
    split_internal(s, ss);
    return composite(xs, ss);
  }

  Index external_of(Index n) const {
    std::vector<int> xs, ss;
    decompose(n, xs, ss);
    return external_flat(xs);
  }

  Index internal_of(Index n) const {
    std::vector<int> xs, ss;
    decompose(n, xs, ss);
    return internal_flat(ss);
  }

 private:
  std::vector<ParticleDims> particles_;
  Index total_ = 1;
  Index external_ = 1;
  Index internal_ = 1;
};

}  // namespace ebbb
