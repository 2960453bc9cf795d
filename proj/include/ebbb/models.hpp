#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ebbb/config_space.hpp"
#include "ebbb/linalg.hpp"
#include "ebbb/spin_basis.hpp"

namespace ebbb {

// Trajectory guidance law: Full tracks the composite configuration index,
// Marginal tracks the external index only, with spin-summed currents.
enum class Guidance { Full, Marginal };

struct Stage {
  std::string label;
  Matrix unitary;   // full-stage evolution operator
  Matrix substep;   // one discrete step; substep^n_substeps == unitary
  int n_substeps = 1;
};

struct ExperimentSpec {
  ConfigurationSpace space;
  Vector initial_state;
  std::vector<Stage> schedule;
  std::vector<SpinOperators> spin_ops;  // per particle; used when uses_frames
  bool uses_frames = false;             // evolve spin bases with the state
  FitMode fit_mode = FitMode::Full;
  Guidance guidance = Guidance::Full;
  double eps = 0.0;                     // duration of one sub-step
  std::function<std::string(Index)> label_of;  // tracked-label names
  std::vector<std::string> warnings;

  // Number of distinct trajectory labels.
  Index label_count() const {
    return guidance == Guidance::Marginal ? space.external_dim() : space.total_dim();
  }
};

// ---------------------------------------------------------------------------
// Larmor precession of two entangled spins
// ---------------------------------------------------------------------------

struct LarmorParams {
  double s = 2.0;
  double mu1 = 1.0;
  double mu2 = 1.5;
  // Preparation: superposition c1 v1 (x) v2 + c2 v1' (x) v2' of rotated basis
  // vectors, where the primed factors swap the two m levels.
  double theta1 = M_PI / 2.0, phi1 = M_PI / 4.0;
  double theta2 = M_PI / 4.0, phi2 = M_PI / 8.0;
  double m1 = 2.0, m2 = -2.0;
  Complex c1{1.0, 0.0}, c2{-2.0, 0.0};
  double eps = 0.02;
  double duration = 0.0;  // <= 0 means two full periods 4*pi/mu1
};

ExperimentSpec build_larmor(const LarmorParams& params);

// ---------------------------------------------------------------------------
// Two-stage EPRB experiment
// ---------------------------------------------------------------------------

struct EprbParams {
  Complex gamma_alpha_1{std::sin(M_PI / 5.0), 0.0};  // particle-1 amplitude
  Complex gamma_alpha_2{std::sqrt(0.79), 0.0};       // particle-2 amplitude
  double alpha = M_PI / 5.0;
  double beta = 3.0 * M_PI / 5.0;
  int n_substeps = 50;
  double eps = 0.02;
};

// Derived amplitude, real-positive convention: sqrt(1 - |gamma_alpha|^2).
Complex eprb_gamma_beta(const Complex& gamma_alpha);

// Stage 1 (single particle): magnet angle in {phi0, alpha, beta}, location in
// {x_r, x_a}, spin untouched.
ExperimentSpec build_eprb_stage1(const EprbParams& params);

// Exact stage-1 output on the reduced 20-dim-per-particle stage-2 space.
Vector eprb_allset_state(const EprbParams& params);

// Stage 2 (two particles, 400-dim): projector-correlated spin measurement.
ExperimentSpec build_eprb_stage2(const EprbParams& params, const Vector& allset);

// Stage-1 external index codec: phi in {0: phi0, 1: alpha, 2: beta},
// x in {0: x_r, 1: x_a}.
struct Eprb1Beables {
  int phi = 0, x = 0, sigma = 0;
};
Eprb1Beables eprb1_decode(const ConfigurationSpace& space, Index composite);

// Stage-2 beables per particle: phi in {0: alpha, 1: beta},
// x in {0: x_a, 1: x_{alpha+}, 2: x_{alpha-}, 3: x_{beta+}, 4: x_{beta-}},
// sigma in {0: +, 1: -}.
struct Eprb2Beables {
  int phi1 = 0, x1 = 0, sigma1 = 0;
  int phi2 = 0, x2 = 0, sigma2 = 0;
};
Eprb2Beables eprb2_decode(const ConfigurationSpace& space, Index composite);

// Device angle recorded in an x outcome, or -1 for x_a.
int eprb2_x_device(int x);
// Spin sign recorded in an x outcome (+1/-1), or 0 for x_a.
int eprb2_x_sign(int x);

// ---------------------------------------------------------------------------
// Surreal-trajectory comparison (free packet pair with a binary flag)
// ---------------------------------------------------------------------------

struct SurrealParams {
  int lattice_size = 256;
  double width = 6.0;    // Gaussian packet width
  double x0 = 32.0;      // packets start at -x0 (moving right) and +x0 (left)
  double p = M_PI / 2.0; // packet momentum (lattice units)
  double mass = 1.0;
  Guidance guidance = Guidance::Marginal;
  bool single_packet = false;  // drop the left-moving packet (no superposition)
  double eps = 0.005;
  double duration = 0.0;  // <= 0 means 2*x0/|group velocity|
};

ExperimentSpec build_surreal(const SurrealParams& params);

// Site coordinate: sites sit at half-integers so that x = 0 lies between two
// sites (lattice_size must be even).
double surreal_coordinate(int lattice_size, int site);

}  // namespace ebbb
