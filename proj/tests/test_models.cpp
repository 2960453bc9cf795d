#include <doctest.h>

#include <cmath>

#include "ebbb/models.hpp"

using namespace ebbb;

TEST_CASE("eprb stage 1: operator action and unitarity") {
  const EprbParams params;
  const ExperimentSpec spec = build_eprb_stage1(params);
  REQUIRE(spec.schedule.size() == 1);
  const Stage& stage = spec.schedule[0];
  CHECK(is_unitary(stage.unitary));
  CHECK(is_unitary(stage.substep));

  // The sub-step composes back to the stage operator.
  Matrix acc = Matrix::Identity(12, 12);
  for (int k = 0; k < stage.n_substeps; ++k) acc = stage.substep * acc;
  CHECK(max_abs(Matrix(acc - stage.unitary)) < 1e-8);

  // Ready state maps to gamma_alpha |alpha, x_a, +> + gamma_beta |beta, x_a, +>.
  const Vector out = stage.unitary * spec.initial_state;
  const Complex ga = params.gamma_alpha_1;
  const Complex gb = eprb_gamma_beta(ga);
  Vector want = Vector::Zero(12);
  want(spec.space.composite({1 * 2 + 1}, {0})) = ga;
  want(spec.space.composite({2 * 2 + 1}, {0})) = gb;
  CHECK(max_abs(Matrix(out - want)) < 1e-12);

  // The alpha branch carries probability sin^2(pi/5).
  CHECK(std::norm(out(spec.space.composite({3}, {0}))) ==
        doctest::Approx(std::pow(std::sin(M_PI / 5.0), 2)).epsilon(1e-12));

  CHECK(spec.label_of(spec.space.composite({3}, {0})) == "alpha,xa,+");
}

TEST_CASE("eprb stage 1: out-of-range amplitude is rejected") {
  EprbParams params;
  params.gamma_alpha_1 = 1.2;
  CHECK_THROWS_AS(build_eprb_stage1(params), std::invalid_argument);
}

TEST_CASE("eprb all-set state: normalized, singlet spin conditionals") {
  const EprbParams params;
  const Vector allset = eprb_allset_state(params);
  CHECK(allset.norm() == doctest::Approx(1.0).epsilon(1e-12));

  const ExperimentSpec spec = build_eprb_stage2(params, allset);
  // Conditional spin state at (alpha, x_a | alpha, x_a) is the singlet.
  const Index x_pair = spec.space.external_flat({0, 0});
  const ConditionalSpinState cond =
      conditional_spin_state(allset, spec.space, x_pair);
  Vector singlet(4);
  singlet << 0, 1, -1, 0;
  singlet /= std::sqrt(2.0);
  CHECK(std::abs(std::abs(singlet.dot(cond.amplitudes)) - 1.0) < 1e-12);
}

TEST_CASE("eprb stage 2: measurement amplitudes on an (alpha, beta) pair") {
  const EprbParams params;
  const ExperimentSpec spec = build_eprb_stage2(params, eprb_allset_state(params));
  const Stage& stage = spec.schedule[0];
  CHECK(is_unitary(stage.unitary));
  CHECK(is_unitary(stage.substep));
  Matrix acc = Matrix::Identity(400, 400);
  for (int k = 0; k < stage.n_substeps; ++k) acc = stage.substep * acc;
  CHECK(max_abs(Matrix(acc - stage.unitary)) < 1e-8);

  // Pure component: particle 1 device alpha, particle 2 device beta, both at
  // x_a, spins in the singlet.
  Vector psi = Vector::Zero(400);
  const Index xa_alpha = 0, xa_beta = 5;
  psi(spec.space.composite({int(xa_alpha), int(xa_beta)}, {0, 1})) = 1.0 / std::sqrt(2.0);
  psi(spec.space.composite({int(xa_alpha), int(xa_beta)}, {1, 0})) = -1.0 / std::sqrt(2.0);
  const Vector out = stage.unitary * psi;

  // Outcome amplitudes: (-s, -c, +c, -s)/sqrt(2) for (++, +-, -+, --) with the
  // half-angle functions of alpha - beta.
  const double half = (params.alpha - params.beta) / 2.0;
  const double s = std::sin(half), c = std::cos(half);
  const double want[2][2] = {{-s / std::sqrt(2.0), -c / std::sqrt(2.0)},
                             {c / std::sqrt(2.0), -s / std::sqrt(2.0)}};
  auto device_state = [](double phi, int sign) {
    Vector v(2);
    const double cp = std::cos(phi / 2.0), sp = std::sin(phi / 2.0);
    if (sign == 0)
      v << cp, sp;
    else
      v << sp, -cp;
    return v;
  };
  for (int sign1 = 0; sign1 < 2; ++sign1)
    for (int sign2 = 0; sign2 < 2; ++sign2) {
      const int x1 = 0 * 5 + 1 + 0 + sign1;  // device alpha outcome
      const int x2 = 1 * 5 + 1 + 2 + sign2;  // device beta outcome
      const Vector chi =
          tensor_product(device_state(params.alpha, sign1),
                         device_state(params.beta, sign2));
      Complex coeff = 0.0;
      for (int s1 = 0; s1 < 2; ++s1)
        for (int s2 = 0; s2 < 2; ++s2)
          coeff += std::conj(chi(s1 * 2 + s2)) *
                   out(spec.space.composite({x1, x2}, {s1, s2}));
      CHECK(coeff.real() == doctest::Approx(want[sign1][sign2]).epsilon(1e-10));
      CHECK(std::abs(coeff.imag()) < 1e-12);
    }

  // Outcome codecs.
  CHECK(eprb2_x_device(0) == -1);
  CHECK(eprb2_x_sign(0) == 0);
  CHECK(eprb2_x_device(1) == 0);
  CHECK(eprb2_x_sign(1) == +1);
  CHECK(eprb2_x_device(4) == 1);
  CHECK(eprb2_x_sign(4) == -1);
}

TEST_CASE("larmor: preparation recovers the requested spin directions") {
  LarmorParams params;
  params.eps = 0.05;
  params.duration = 1.0;
  const ExperimentSpec spec = build_larmor(params);
  CHECK(spec.initial_state.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spec.uses_frames);

  const BasisFrame frame =
      build_frame(spec.initial_state, spec.space, spec.spin_ops, spec.fit_mode);
  REQUIRE(frame.entries.size() == 1);
  const auto& angles = frame.entries[0].angles;
  auto matches = [](const EulerFit& fit, double theta, double phi) {
    const double t2 = fit.theta, p2 = fit.phi;
    const bool direct = std::abs(t2 - theta) < 1e-7 && std::abs(p2 - phi) < 1e-7;
    double dphi = std::abs(p2 - std::fmod(phi + M_PI, 2.0 * M_PI));
    dphi = std::min(dphi, 2.0 * M_PI - dphi);
    const bool flipped = std::abs((M_PI - t2) - theta) < 1e-7 && dphi < 1e-7;
    return direct || flipped;
  };
  CHECK(matches(angles[0], params.theta1, params.phi1));
  CHECK(matches(angles[1], params.theta2, params.phi2));
  CHECK(angles[0].residual < 1e-9);
  CHECK(angles[1].residual < 1e-9);

  // Sub-steps compose to the stage operator.
  const Stage& stage = spec.schedule[0];
  CHECK(stage.n_substeps == 20);
  Matrix acc = Matrix::Identity(25, 25);
  for (int k = 0; k < stage.n_substeps; ++k) acc = stage.substep * acc;
  CHECK(max_abs(Matrix(acc - stage.unitary)) < 1e-9);
}

TEST_CASE("larmor: frames are constant when both moments vanish") {
  LarmorParams params;
  params.mu1 = 0.0;
  params.mu2 = 0.0;
  params.duration = 0.5;
  params.eps = 0.1;
  const ExperimentSpec spec = build_larmor(params);
  CHECK(max_abs(Matrix(spec.schedule[0].substep -
                       Matrix::Identity(25, 25))) < 1e-12);

  BasisFrame frame =
      build_frame(spec.initial_state, spec.space, spec.spin_ops, spec.fit_mode);
  Vector psi = spec.initial_state;
  for (int k = 0; k < spec.schedule[0].n_substeps; ++k) {
    psi = spec.schedule[0].substep * psi;
    const BasisFrame next =
        build_frame(psi, spec.space, spec.spin_ops, spec.fit_mode, &frame);
    for (int i = 0; i < 2; ++i) {
      CHECK(std::abs(next.entries[0].angles[i].theta -
                     frame.entries[0].angles[i].theta) < 1e-7);
      CHECK(std::abs(next.entries[0].angles[i].phi -
                     frame.entries[0].angles[i].phi) < 1e-7);
    }
    frame = next;
  }
}

TEST_CASE("surreal: geometry, packets and mirror symmetry") {
  // Sites sit at half-integer coordinates with x = 0 between the middle pair.
  CHECK(surreal_coordinate(256, 127) == doctest::Approx(-0.5));
  CHECK(surreal_coordinate(256, 128) == doctest::Approx(0.5));

  SurrealParams params;
  params.lattice_size = 64;
  params.x0 = 16.0;
  params.width = 4.0;
  const ExperimentSpec spec = build_surreal(params);
  CHECK(spec.initial_state.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spec.guidance == Guidance::Marginal);
  CHECK(spec.label_count() == 64);
  CHECK(spec.warnings.empty());

  // Default duration: time for the packets to swap sides at the group velocity.
  const double v_group = std::sin(params.p) / params.mass;
  CHECK(spec.schedule[0].n_substeps ==
        std::lround(2.0 * params.x0 / v_group / params.eps));

  // Mirror symmetry (site reflection combined with flag swap) is preserved by
  // the evolution, so the spin-summed location distribution stays symmetric.
  Vector psi = spec.initial_state;
  for (int k = 0; k < 200; ++k) psi = spec.schedule[0].substep * psi;
  const int n = params.lattice_size;
  for (int i = 0; i < n; ++i) {
    double p_i = 0.0, p_mirror = 0.0;
    for (int flag = 0; flag < 2; ++flag) {
      p_i += std::norm(psi(spec.space.composite({i}, {flag})));
      p_mirror += std::norm(psi(spec.space.composite({n - 1 - i}, {flag})));
    }
    CHECK(p_i == doctest::Approx(p_mirror).epsilon(1e-9));
  }
}

TEST_CASE("surreal: overlap warning and single-packet variant") {
  SurrealParams wide;
  wide.lattice_size = 64;
  wide.x0 = 4.0;
  wide.width = 8.0;
  const ExperimentSpec overlapping = build_surreal(wide);
  CHECK(!overlapping.warnings.empty());

  SurrealParams solo;
  solo.lattice_size = 64;
  solo.x0 = 16.0;
  solo.width = 4.0;
  solo.single_packet = true;
  const ExperimentSpec spec = build_surreal(solo);
  CHECK(spec.warnings.empty());
  // All weight sits in flag 0.
  double flagged = 0.0;
  for (int i = 0; i < 64; ++i)
    flagged += std::norm(spec.initial_state(spec.space.composite({i}, {1})));
  CHECK(flagged < 1e-15);

  SurrealParams bad;
  bad.lattice_size = 63;
  CHECK_THROWS_AS(build_surreal(bad), std::invalid_argument);
}
