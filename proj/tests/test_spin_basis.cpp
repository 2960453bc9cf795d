#include <doctest.h>

#include <random>

#include "ebbb/spin_basis.hpp"

using namespace ebbb;

namespace {

std::mt19937_64 rng(777);

Vector random_state(Index n) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = Complex(d(rng), d(rng));
  return v / v.norm();
}

bool fits_equivalent(const EulerFit& a, const EulerFit& b, const SpinOperators& ops,
                     double tol) {
  auto close = [tol](const EulerFit& p, const EulerFit& q) {
    double dphi = std::abs(p.phi - q.phi);
    dphi = std::min(dphi, 2.0 * M_PI - dphi);
    const bool polar = q.theta < 1e-6 || q.theta > M_PI - 1e-6;
    return std::abs(p.theta - q.theta) < tol && (polar || dphi < tol) &&
           p.m_index == q.m_index;
  };
  return close(a, b) || close(a, flipped_fit(b, ops));
}

}  // namespace

TEST_CASE("spin operators: ladder construction") {
  const SpinOperators half = spin_operators(0.5);
  CHECK(half.dim == 2);
  CHECK(std::abs(half.sz(0, 0) - Complex(0.5, 0)) < 1e-15);
  CHECK(std::abs(half.sz(1, 1) - Complex(-0.5, 0)) < 1e-15);

  const SpinOperators two = spin_operators(2.0);
  CHECK(two.dim == 5);
  for (int k = 0; k < 5; ++k) CHECK(two.sz(k, k).real() == doctest::Approx(2.0 - k));

  for (double s : {0.5, 1.0, 1.5, 2.0}) {
    const SpinOperators ops = spin_operators(s);
    const Matrix comm = ops.sx * ops.sy - ops.sy * ops.sx;
    CHECK(max_abs(Matrix(comm - Complex(0, 1) * ops.sz)) < 1e-12);
    const Matrix casimir = ops.sx * ops.sx + ops.sy * ops.sy + ops.sz * ops.sz;
    CHECK(max_abs(Matrix(casimir - s * (s + 1.0) * Matrix::Identity(ops.dim, ops.dim))) <
          1e-12);
  }
  CHECK_THROWS_AS(spin_operators(0.7), std::invalid_argument);
}

TEST_CASE("rotated eigenvectors") {
  const SpinOperators ops = spin_operators(2.0);
  // Unrotated case returns the plain S_z eigenvector.
  Vector e = rotated_eigenvector(ops, 1.0, 0.0, 0.0);
  CHECK(std::abs(e(level_index(ops, 1.0)) - Complex(1, 0)) < 1e-12);

  // Rotated vector is an eigenvector of the rotated S_z.
  std::uniform_real_distribution<double> dt(0.1, M_PI - 0.1), dp(0.0, 2.0 * M_PI);
  for (int trial = 0; trial < 5; ++trial) {
    const double theta = dt(rng), phi = dp(rng);
    const Matrix r = rotation_operator(ops, theta, phi);
    CHECK(is_unitary(r));
    for (double m : {2.0, 0.0, -1.0}) {
      const Vector v = rotated_eigenvector(ops, m, theta, phi);
      const Vector lhs = r * ops.sz * r.adjoint() * v;
      CHECK(max_abs(Matrix(lhs - m * v)) < 1e-10);
    }
  }

  // Spin 1/2 closed form: (cos(theta/2), e^{i phi} sin(theta/2)) up to phase.
  const SpinOperators half = spin_operators(0.5);
  const double theta = 1.1, phi = 2.3;
  const Vector v = rotated_eigenvector(half, 0.5, theta, phi);
  Vector ref(2);
  ref << std::cos(theta / 2.0), std::exp(Complex(0, phi)) * std::sin(theta / 2.0);
  const Complex phase = ref.dot(v) / std::abs(ref.dot(v));
  CHECK(max_abs(Matrix(v - phase * ref)) < 1e-12);
}

TEST_CASE("conditional spin state") {
  const ConfigurationSpace space({ParticleDims{3, 2}, ParticleDims{1, 2}});
  // Product state chi(x) (x) xi(s): every populated x returns xi.
  Vector chi(3), xi(4);
  chi << 0.6, 0.0, 0.8;
  xi = random_state(4);
  Vector psi = Vector::Zero(space.total_dim());
  for (Index x = 0; x < 3; ++x)
    for (Index s = 0; s < 4; ++s)
      psi(space.composite_from_flat(x, s)) = chi(x) * xi(s);

  for (Index x : {Index(0), Index(2)}) {
    const ConditionalSpinState c = conditional_spin_state(psi, space, x);
    const Complex phase = xi.dot(c.amplitudes);
    CHECK(max_abs(Matrix(c.amplitudes - phase / std::abs(phase) * xi)) < 1e-12);
  }
  CHECK_THROWS_AS(conditional_spin_state(psi, space, 1), DegenerateConfiguration);

  for (int trial = 0; trial < 100; ++trial) {
    const Vector state = random_state(space.total_dim());
    for (Index x = 0; x < 3; ++x)
      CHECK(conditional_spin_state(state, space, x).amplitudes.norm() ==
            doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("two-spin factorization") {
  // Separable input returns its factors up to phase with lambda_max = 1.
  const Vector a = random_state(3), b = random_state(4);
  ConditionalSpinState sep{0, tensor_product(a, b)};
  const TwoSpinFactors f = factorize_two_spin(sep, 3, 4);
  CHECK(f.lambda_max == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(std::abs(a.dot(f.psi1)) - 1.0) < 1e-10);
  CHECK(std::abs(std::abs(b.dot(f.psi2)) - 1.0) < 1e-10);

  // lambda_max equals the square of the largest singular value.
  const Vector state = random_state(20);
  ConditionalSpinState cond{0, state};
  const TwoSpinFactors g = factorize_two_spin(cond, 4, 5);
  Matrix m(4, 5);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 5; ++j) m(i, j) = state(i * 5 + j);
  const Eigen::JacobiSVD<Matrix> svd(m);
  CHECK(g.lambda_max ==
        doctest::Approx(svd.singularValues()(0) * svd.singularValues()(0))
            .epsilon(1e-10));

  // Random-probe maximality: f (x) g beats random product probes.
  ConditionalSpinState cond5{0, random_state(25)};
  const TwoSpinFactors h = factorize_two_spin(cond5, 5, 5);
  const Complex best = tensor_product(h.psi1, h.psi2).dot(cond5.amplitudes);
  for (int probe = 0; probe < 10000; ++probe) {
    const Complex val =
        tensor_product(random_state(5), random_state(5)).dot(cond5.amplitudes);
    CHECK(std::norm(val) <= std::norm(best) + 1e-12);
  }
}

TEST_CASE("singlet factorization: degenerate tie-break, theta = pi/2 twice") {
  Vector singlet(4);
  singlet << 0, 1, -1, 0;
  singlet /= std::sqrt(2.0);
  const TwoSpinFactors f = factorize_two_spin({0, singlet}, 2, 2);
  CHECK(f.lambda_max == doctest::Approx(0.5).epsilon(1e-10));
  // First factor aligns with the constant vector.
  CHECK(std::abs(f.psi1.sum()) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));

  const SpinOperators half = spin_operators(0.5);
  for (const Vector& factor : {f.psi1, f.psi2}) {
    const EulerFit fit = fit_euler(factor, half, FitMode::ThetaOnly);
    CHECK(fit.theta == doctest::Approx(M_PI / 2.0).epsilon(1e-9));
    CHECK(fit.residual < 1e-12);
  }
}

TEST_CASE("euler fit basics") {
  const SpinOperators ops = spin_operators(2.0);

  // Unrotated eigenvector.
  Vector e = Vector::Zero(5);
  e(3) = 1.0;
  const EulerFit fit0 = fit_euler(e, ops);
  CHECK(fit0.theta < 1e-6);
  CHECK(fit0.phi == 0.0);
  CHECK(fit0.m_index == 3);
  CHECK(fit0.residual < 1e-10);

  // Round trip at (pi/4, pi/2, m=2).
  const Vector v = rotated_eigenvector(ops, 2.0, M_PI / 4.0, M_PI / 2.0);
  const EulerFit fit = fit_euler(v, ops);
  const EulerFit want{M_PI / 4.0, M_PI / 2.0, level_index(ops, 2.0), 0.0};
  CHECK(fits_equivalent(fit, want, ops, 1e-6));
  CHECK(fit.residual < 1e-8);

  // Phase invariance.
  const EulerFit shifted = fit_euler(Vector(std::exp(Complex(0, 1.234)) * v), ops);
  CHECK(std::abs(shifted.theta - fit.theta) < 1e-7);
  CHECK(std::abs(shifted.phi - fit.phi) < 1e-7);
  CHECK(shifted.m_index == fit.m_index);
}

TEST_CASE("theta-only fit recovers device spin states") {
  const SpinOperators half = spin_operators(0.5);
  const double alpha = M_PI / 5.0;
  Vector up(2), down(2);
  up << std::cos(alpha / 2.0), std::sin(alpha / 2.0);
  down << std::sin(alpha / 2.0), -std::cos(alpha / 2.0);

  const EulerFit fu = fit_euler(up, half, FitMode::ThetaOnly);
  CHECK(fu.theta == doctest::Approx(alpha).epsilon(1e-12));
  CHECK(fu.m_index == 0);
  CHECK(fu.residual < 1e-12);

  const EulerFit fd = fit_euler(down, half, FitMode::ThetaOnly);
  CHECK(fd.theta == doctest::Approx(alpha).epsilon(1e-12));
  CHECK(fd.m_index == 1);
  CHECK(fd.residual < 1e-12);
}

TEST_CASE("frames: structure, known angles, idempotence") {
  const SpinOperators half = spin_operators(0.5);
  const ConfigurationSpace space({ParticleDims{2, 2}, ParticleDims{1, 2}});
  const std::vector<SpinOperators> ops = {half, half};

  // Spin-aligned product state: each particle's angles match its own Bloch
  // direction.
  const double t1 = 0.7, p1 = 1.2, t2 = 2.1, p2 = 4.0;
  const Vector s1 = rotated_eigenvector(half, 0.5, t1, p1);
  const Vector s2 = rotated_eigenvector(half, 0.5, t2, p2);
  Vector psi = Vector::Zero(space.total_dim());
  const Vector prod = tensor_product(s1, s2);
  for (Index s = 0; s < 4; ++s) {
    psi(space.composite_from_flat(0, s)) = prod(s) / std::sqrt(2.0);
    psi(space.composite_from_flat(1, s)) = prod(s) / std::sqrt(2.0);
  }
  const BasisFrame frame = build_frame(psi, space, ops, FitMode::Full);
  for (Index x = 0; x < 2; ++x) {
    const auto& e = frame.entries[static_cast<size_t>(x)];
    CHECK(fits_equivalent(e.angles[0], EulerFit{t1, p1, 0, 0.0}, half, 1e-8));
    CHECK(fits_equivalent(e.angles[1], EulerFit{t2, p2, 0, 0.0}, half, 1e-8));
    CHECK(is_unitary(e.v));
  }
  // Transformed state concentrates on the fitted level pair.
  const Matrix w = frame_matrix(space, frame);
  CHECK(is_unitary(w));
  const Vector psi_v = w * psi;
  const Index peak = space.composite_from_flat(
      0, Index(frame.entries[0].angles[0].m_index * 2 + frame.entries[0].angles[1].m_index));
  CHECK(std::norm(psi_v(peak)) == doctest::Approx(0.5).epsilon(1e-9));

  // Idempotence: rebuilding on the unchanged state reproduces the angles.
  const BasisFrame again = build_frame(psi, space, ops, FitMode::Full, &frame);
  for (Index x = 0; x < 2; ++x)
    for (int i = 0; i < 2; ++i) {
      CHECK(again.entries[x].angles[i].theta ==
            doctest::Approx(frame.entries[x].angles[i].theta).epsilon(1e-10));
      CHECK(again.entries[x].angles[i].phi ==
            doctest::Approx(frame.entries[x].angles[i].phi).epsilon(1e-10));
    }

  // Degenerate configuration: inherit previous frame, else error.
  Vector sparse = Vector::Zero(space.total_dim());
  for (Index s = 0; s < 4; ++s)
    sparse(space.composite_from_flat(0, s)) = prod(s);
  CHECK_THROWS_AS(build_frame(sparse, space, ops, FitMode::Full),
                  DegenerateConfiguration);
  const BasisFrame inherited = build_frame(sparse, space, ops, FitMode::Full, &frame);
  CHECK(inherited.entries[1].angles[0].theta ==
        doctest::Approx(frame.entries[1].angles[0].theta).epsilon(1e-12));

  // More than two particles is unsupported.
  const ConfigurationSpace three(
      {ParticleDims{1, 2}, ParticleDims{1, 2}, ParticleDims{1, 2}});
  CHECK_THROWS_AS(build_frame(random_state(8), three, {half, half, half}, FitMode::Full),
                  std::invalid_argument);
}
