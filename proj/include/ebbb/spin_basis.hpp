#pragma once

#include <optional>
#include <vector>

#include "ebbb/config_space.hpp"
#include "ebbb/linalg.hpp"

namespace ebbb {

inline constexpr double kProbabilityFloor = 1e-12;

struct DegenerateConfiguration : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Spin operators for quantum number s, built from the ladder operators.
/// S_z is diagonal with entries s, s-1, ..., -s (level index 0 is m = +s).
struct SpinOperators {
  double s = 0.5;
  int dim = 2;
  Matrix sx, sy, sz;
};

SpinOperators spin_operators(double s);

/// Level index of magnetic quantum number m (index = s - m).
int level_index(const SpinOperators& ops, double m);
double level_value(const SpinOperators& ops, int index);

/// Rotation operator exp(-i phi S_z) exp(-i theta S_y).
Matrix rotation_operator(const SpinOperators& ops, double theta, double phi);

/// Eigenvector of the rotated S_z for level value m: the m-th column of the
/// rotation operator. The rotation itself fixes the global phase.
Vector rotated_eigenvector(const SpinOperators& ops, double m, double theta, double phi);

struct ConditionalSpinState {
  Index x = 0;        // flat external configuration
  Vector amplitudes;  // over flat internal index, normalized
};

/// Normalized restriction of psi to the spin indices at fixed external
/// configuration x. Throws DegenerateConfiguration when the norm underflows.
ConditionalSpinState conditional_spin_state(const Vector& psi,
                                            const ConfigurationSpace& space,
                                            Index x);

struct TwoSpinFactors {
  Vector psi1, psi2;
  double lambda_max = 0.0;
};

/// Best product approximation psi1 (x) psi2 of a two-spin conditional state,
/// from the largest-eigenvalue eigenvectors of the partner eigenproblems.
/// A degenerate top eigenvalue is resolved toward the constant vector; the
/// global phase makes the largest-magnitude component real positive.
TwoSpinFactors factorize_two_spin(const ConditionalSpinState& state, int dim1, int dim2);

enum class FitMode {
  Full,       // fit (theta, phi)
  ThetaOnly,  // phi fixed to 0 (single-angle devices)
};

struct EulerFit {
  double theta = 0.0;
  double phi = 0.0;
  int m_index = 0;
  double residual = 0.0;
};

/// Best-fitting rotated basis vector: maximizes |<v^m_{theta,phi}, psi>| over
/// theta in [0,pi], phi in [0,2pi) and all levels m. The representation is
/// unique only up to (theta, phi, m) -> (pi-theta, phi+pi, -m); the canonical
/// representative has the smaller theta (then the smaller phi). Near the
/// poles phi is reported as 0. An optional hint seeds a local refinement that
/// is accepted when it reaches a vanishing residual.
EulerFit fit_euler(const Vector& psi, const SpinOperators& ops,
                   FitMode mode = FitMode::Full, const EulerFit* hint = nullptr);

/// The antipodal representative of the same basis vector.
EulerFit flipped_fit(const EulerFit& fit, const SpinOperators& ops);

struct FrameEntry {
  bool valid = false;
  std::vector<EulerFit> angles;  // per particle
  Matrix v;                      // spin-block transform, internal_dim x internal_dim
};

/// Per-configuration spin-basis choice: for each external configuration, one
/// Euler-angle pair per particle plus the induced spin-block unitary V
/// (tensor product of the per-particle rotation inverses, so transformed
/// spin indices are the level indices of the fitted bases).
struct BasisFrame {
  std::vector<FrameEntry> entries;  // indexed by flat external configuration
  const Matrix& v_at(Index x) const { return entries[static_cast<size_t>(x)].v; }
};

BasisFrame identity_frame(const ConfigurationSpace& space);

/// Build the frame from the wave function: per external configuration,
/// condition, factorize (N = 2) and fit Euler angles per particle.
/// Configurations with degenerate conditional norm inherit the previous
/// frame; without a previous frame they raise DegenerateConfiguration.
/// A previous frame also steers the choice between the two equivalent
/// angle representations, keeping angle trajectories continuous.
BasisFrame build_frame(const Vector& psi, const ConfigurationSpace& space,
                       const std::vector<SpinOperators>& ops, FitMode mode,
                       const BasisFrame* previous = nullptr);

/// Full-space block-diagonal transformation W with W psi = psi^V,
/// assembled from the per-configuration spin blocks.
Matrix frame_matrix(const ConfigurationSpace& space, const BasisFrame& frame);

}  // namespace ebbb
