#include "ebbb/models.hpp"

#include <cmath>
#include <sstream>

namespace ebbb {

namespace {

std::string format_value(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

}  // namespace

// ---------------------------------------------------------------------------
// Larmor
// ---------------------------------------------------------------------------

ExperimentSpec build_larmor(const LarmorParams& params) {
  require(params.eps > 0.0, "larmor: eps must be > 0");
  require(params.mu1 != 0.0 || params.duration > 0.0,
          "larmor: duration required when mu1 = 0");

  const SpinOperators ops = spin_operators(params.s);
  const int ns = ops.dim;

  ExperimentSpec spec;
  spec.space = ConfigurationSpace({ParticleDims{1, ns}, ParticleDims{1, ns}});
  spec.spin_ops = {ops, ops};
  spec.uses_frames = true;
  spec.fit_mode = FitMode::Full;
  spec.guidance = Guidance::Full;
  spec.eps = params.eps;

  const Vector v1 = rotated_eigenvector(ops, params.m1, params.theta1, params.phi1);
  const Vector v2 = rotated_eigenvector(ops, params.m2, params.theta2, params.phi2);
  const Vector w1 = rotated_eigenvector(ops, params.m2, params.theta1, params.phi1);
  const Vector w2 = rotated_eigenvector(ops, params.m1, params.theta2, params.phi2);
  Vector psi0 = params.c1 * tensor_product(v1, v2) + params.c2 * tensor_product(w1, w2);
  require(psi0.norm() > 1e-12, "larmor: preparation coefficients cancel");
  spec.initial_state = psi0 / psi0.norm();

  const Matrix id = Matrix::Identity(ns, ns);
  const Matrix h = -params.mu1 * tensor_product(ops.sz, id) -
                   params.mu2 * tensor_product(id, ops.sz);

  const double duration =
      params.duration > 0.0 ? params.duration : 4.0 * M_PI / std::abs(params.mu1);
  const int n = std::max(1, static_cast<int>(std::lround(duration / params.eps)));

  Stage stage;
  stage.label = "precession";
  stage.substep = evolution_from_hamiltonian(h, params.eps);
  stage.unitary = evolution_from_hamiltonian(h, params.eps * n);
  stage.n_substeps = n;
  spec.schedule = {stage};

  const ConfigurationSpace space = spec.space;
  const SpinOperators ops_copy = ops;
  spec.label_of = [space, ops_copy](Index n_idx) {
    std::vector<int> xs, ss;
    space.decompose(n_idx, xs, ss);
    return "m1=" + format_value(level_value(ops_copy, ss[0])) +
           ",m2=" + format_value(level_value(ops_copy, ss[1]));
  };
  return spec;
}

// ---------------------------------------------------------------------------
// EPRB
// ---------------------------------------------------------------------------

Complex eprb_gamma_beta(const Complex& gamma_alpha) {
  const double rest = 1.0 - std::norm(gamma_alpha);
  require(rest >= -1e-12, "eprb: |gamma_alpha| must be <= 1");
  return Complex(std::sqrt(std::max(0.0, rest)), 0.0);
}

namespace {

void validate_eprb(const EprbParams& p) {
  require(std::abs(p.gamma_alpha_1) <= 1.0 + 1e-12, "eprb: |gamma_alpha_1| must be <= 1");
  require(std::abs(p.gamma_alpha_2) <= 1.0 + 1e-12, "eprb: |gamma_alpha_2| must be <= 1");
  require(p.n_substeps >= 1, "eprb: n_substeps must be >= 1");
  require(p.eps > 0.0, "eprb: eps must be > 0");
}

const char* kPhi1Names[3] = {"phi0", "alpha", "beta"};
const char* kX1Names[2] = {"xr", "xa"};
const char* kPhi2Names[2] = {"alpha", "beta"};
const char* kX2Names[5] = {"xa", "xalpha+", "xalpha-", "xbeta+", "xbeta-"};
const char* kSigmaNames[2] = {"+", "-"};

// Spin states rotated to device angle phi:
// |phi+> = (cos(phi/2), sin(phi/2)), |phi-> = (sin(phi/2), -cos(phi/2)).
Vector device_spin_state(double phi, int sign) {
  Vector v(2);
  const double c = std::cos(phi / 2.0), s = std::sin(phi / 2.0);
  if (sign > 0) {
    v << Complex(c, 0.0), Complex(s, 0.0);
  } else {
    v << Complex(s, 0.0), Complex(-c, 0.0);
  }
  return v;
}

// Permutation swapping basis states a and b, identity elsewhere.
Matrix swap_matrix(int dim, int a, int b) {
  Matrix u = Matrix::Identity(dim, dim);
  u(a, a) = u(b, b) = 0.0;
  u(a, b) = u(b, a) = 1.0;
  return u;
}

}  // namespace

ExperimentSpec build_eprb_stage1(const EprbParams& params) {
  validate_eprb(params);
  const Complex ga = params.gamma_alpha_1;
  const Complex gb = eprb_gamma_beta(ga);

  ExperimentSpec spec;
  spec.space = ConfigurationSpace({ParticleDims{6, 2}});  // (phi, x) x spin
  spec.guidance = Guidance::Full;
  spec.uses_frames = false;
  spec.eps = params.eps;

  Matrix u_phi = Matrix::Zero(3, 3);
  u_phi(0, 2) = 1.0;
  u_phi(1, 0) = ga;
  u_phi(1, 1) = -std::conj(gb);
  u_phi(2, 0) = gb;
  u_phi(2, 1) = std::conj(ga);
  const Matrix u_x = swap_matrix(2, 0, 1);
  const Matrix u = tensor_product(tensor_product(u_phi, u_x), Matrix::Identity(2, 2));

  Stage stage;
  stage.label = "ready-to-all-set";
  stage.unitary = u;
  stage.substep = unitary_root(u, params.n_substeps);
  stage.n_substeps = params.n_substeps;
  spec.schedule = {stage};

  Vector psi0 = Vector::Zero(spec.space.total_dim());
  psi0(spec.space.composite({0 * 2 + 0}, {0})) = 1.0;  // |phi0, x_r, 0+>
  spec.initial_state = psi0;

  const ConfigurationSpace space = spec.space;
  spec.label_of = [space](Index n) {
    const Eprb1Beables b = eprb1_decode(space, n);
    return std::string(kPhi1Names[b.phi]) + "," + kX1Names[b.x] + "," +
           kSigmaNames[b.sigma];
  };
  return spec;
}

Eprb1Beables eprb1_decode(const ConfigurationSpace& space, Index composite) {
  std::vector<int> xs, ss;
  space.decompose(composite, xs, ss);
  return {xs[0] / 2, xs[0] % 2, ss[0]};
}

Vector eprb_allset_state(const EprbParams& params) {
  validate_eprb(params);
  const Complex ga1 = params.gamma_alpha_1, gb1 = eprb_gamma_beta(ga1);
  const Complex ga2 = params.gamma_alpha_2, gb2 = eprb_gamma_beta(ga2);

  // Per-particle 20-dim vectors |phi, x_a, sigma> with amplitudes gamma_phi.
  auto particle_state = [](const Complex& ga, const Complex& gb, int sigma) {
    Vector v = Vector::Zero(20);
    v(0 * 10 + 0 * 2 + sigma) = ga;  // (alpha, x_a, sigma)
    v(1 * 10 + 0 * 2 + sigma) = gb;  // (beta,  x_a, sigma)
    return v;
  };
  const Vector u1p = particle_state(ga1, gb1, 0), u1m = particle_state(ga1, gb1, 1);
  const Vector u2p = particle_state(ga2, gb2, 0), u2m = particle_state(ga2, gb2, 1);
  Vector allset =
      (tensor_product(u1p, u2m) - tensor_product(u1m, u2p)) / std::sqrt(2.0);
  return allset;
}

ExperimentSpec build_eprb_stage2(const EprbParams& params, const Vector& allset) {
  validate_eprb(params);
  require(allset.size() == 400, "eprb stage 2: all-set state must be 400-dim");
  require(std::abs(allset.norm() - 1.0) < 1e-9,
          "eprb stage 2: all-set state must be normalized");

  ExperimentSpec spec;
  // Per particle: phi in {alpha, beta} x location in {x_a, x_{alpha+-},
  // x_{beta+-}}, plus spin.
  spec.space = ConfigurationSpace({ParticleDims{10, 2}, ParticleDims{10, 2}});
  spec.spin_ops = {spin_operators(0.5), spin_operators(0.5)};
  spec.uses_frames = true;
  spec.fit_mode = FitMode::ThetaOnly;
  spec.guidance = Guidance::Full;
  spec.eps = params.eps;
  spec.initial_state = allset;

  Matrix u_f = Matrix::Zero(20, 20);
  const double angles[2] = {params.alpha, params.beta};
  for (int phi = 0; phi < 2; ++phi) {
    Matrix p_phi = Matrix::Zero(2, 2);
    p_phi(phi, phi) = 1.0;
    for (int sign = 0; sign < 2; ++sign) {
      const int x_target = 1 + 2 * phi + sign;
      const Vector chi = device_spin_state(angles[phi], sign == 0 ? +1 : -1);
      const Matrix p_sigma = chi * chi.adjoint();
      u_f += tensor_product(tensor_product(p_phi, swap_matrix(5, 0, x_target)), p_sigma);
    }
  }
  const Matrix u = tensor_product(u_f, u_f);

  Stage stage;
  stage.label = "all-set-to-measured";
  stage.unitary = u;
  stage.substep = unitary_root(u, params.n_substeps);
  stage.n_substeps = params.n_substeps;
  spec.schedule = {stage};

  const ConfigurationSpace space = spec.space;
  spec.label_of = [space](Index n) {
    const Eprb2Beables b = eprb2_decode(space, n);
    return std::string(kPhi2Names[b.phi1]) + "," + kX2Names[b.x1] + "," +
           kSigmaNames[b.sigma1] + "|" + kPhi2Names[b.phi2] + "," + kX2Names[b.x2] +
           "," + kSigmaNames[b.sigma2];
  };
  return spec;
}

Eprb2Beables eprb2_decode(const ConfigurationSpace& space, Index composite) {
  std::vector<int> xs, ss;
  space.decompose(composite, xs, ss);
  return {xs[0] / 5, xs[0] % 5, ss[0], xs[1] / 5, xs[1] % 5, ss[1]};
}

int eprb2_x_device(int x) { return x == 0 ? -1 : (x - 1) / 2; }

int eprb2_x_sign(int x) { return x == 0 ? 0 : ((x - 1) % 2 == 0 ? +1 : -1); }

// ---------------------------------------------------------------------------
// Surreal
// ---------------------------------------------------------------------------

double surreal_coordinate(int lattice_size, int site) {
  return site - (lattice_size - 1) / 2.0;
}

ExperimentSpec build_surreal(const SurrealParams& params) {
  const int n = params.lattice_size;
  require(n >= 8 && n % 2 == 0, "surreal: lattice_size must be even and >= 8");
  require(params.width > 0.0, "surreal: width must be > 0");
  require(params.mass > 0.0, "surreal: mass must be > 0");
  require(params.eps > 0.0, "surreal: eps must be > 0");
  require(params.x0 > 0.0 && 2.0 * params.x0 < n,
          "surreal: x0 must satisfy 0 < 2*x0 < lattice_size");

  ExperimentSpec spec;
  spec.space = ConfigurationSpace({ParticleDims{n, 2}});
  spec.guidance = params.guidance;
  spec.uses_frames = false;
  spec.eps = params.eps;

  // Right-moving packet at -x0 with flag 0, left-moving packet at +x0 with
  // flag 1.
  Vector right(n), left(n);
  for (int i = 0; i < n; ++i) {
    const double c = surreal_coordinate(n, i);
    const double gp = std::exp(-(c + params.x0) * (c + params.x0) /
                               (4.0 * params.width * params.width));
    const double gm = std::exp(-(c - params.x0) * (c - params.x0) /
                               (4.0 * params.width * params.width));
    right(i) = gp * std::exp(Complex(0.0, params.p * c));
    left(i) = gm * std::exp(Complex(0.0, -params.p * c));
  }
  // Envelope overlap: the momentum phases suppress the amplitude inner
  // product even when the packets sit on top of each other.
  const double overlap =
      right.cwiseAbs().dot(left.cwiseAbs()) / (right.norm() * left.norm());
  if (!params.single_packet && overlap > 1e-2)
    spec.warnings.push_back("surreal: initial packets overlap (|<psi1,psi2>| = " +
                            format_value(overlap) + ")");
  right.normalize();
  left.normalize();
  Vector e0(2), e1(2);
  e0 << 1.0, 0.0;
  e1 << 0.0, 1.0;
  Vector psi0 =
      params.single_packet
          ? tensor_product(right, e0)
          : Vector((tensor_product(right, e0) + tensor_product(left, e1)) /
                   std::sqrt(2.0));
  spec.initial_state = psi0 / psi0.norm();

  // Free-particle Hamiltonian: periodic nearest-neighbor hopping
  // -(1/2m) discrete Laplacian, acting trivially on the flag.
  Matrix h_loc = Matrix::Zero(n, n);
  const double hop = 1.0 / (2.0 * params.mass);
  for (int i = 0; i < n; ++i) {
    h_loc(i, i) = 2.0 * hop;
    h_loc(i, (i + 1) % n) = -hop;
    h_loc((i + 1) % n, i) = -hop;
  }
  const Matrix h = tensor_product(h_loc, Matrix::Identity(2, 2));

  const double v_group = std::abs(std::sin(params.p)) / params.mass;
  require(params.duration > 0.0 || v_group > 1e-12,
          "surreal: duration required when group velocity vanishes");
  const double duration =
      params.duration > 0.0 ? params.duration : 2.0 * params.x0 / v_group;
  const int n_steps = std::max(1, static_cast<int>(std::lround(duration / params.eps)));

  Stage stage;
  stage.label = "crossing";
  stage.substep = evolution_from_hamiltonian(h, params.eps);
  stage.unitary = evolution_from_hamiltonian(h, params.eps * n_steps);
  stage.n_substeps = n_steps;
  spec.schedule = {stage};

  const ConfigurationSpace space = spec.space;
  const bool marginal = params.guidance == Guidance::Marginal;
  const int size = n;
  spec.label_of = [space, marginal, size](Index idx) {
    if (marginal) return "x=" + format_value(surreal_coordinate(size, static_cast<int>(idx)));
    std::vector<int> xs, ss;
    space.decompose(idx, xs, ss);
    return "x=" + format_value(surreal_coordinate(size, xs[0])) +
           ",s=" + std::to_string(ss[0]);
  };
  return spec;
}

}  // namespace ebbb
