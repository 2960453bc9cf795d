#include "ebbb/spin_basis.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace ebbb {

namespace {

double wrap_2pi(double phi) {
  phi = std::fmod(phi, 2.0 * M_PI);
  if (phi < 0.0) phi += 2.0 * M_PI;
  // Values a rounding error below 2*pi belong at 0.
  if (2.0 * M_PI - phi < 1e-12) phi = 0.0;
  return phi;
}

constexpr double kPoleTol = 1e-6;

}  // namespace

SpinOperators spin_operators(double s) {
  const double two_s = 2.0 * s;
  if (s < 0.0 || std::abs(two_s - std::round(two_s)) > 1e-12)
    throw std::invalid_argument("spin_operators: 2s must be a non-negative integer");
  const int dim = static_cast<int>(std::round(two_s)) + 1;

  Matrix sp = Matrix::Zero(dim, dim);
  Matrix sz = Matrix::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) {
    const double m = s - k;
    sz(k, k) = m;
    if (k > 0) sp(k - 1, k) = std::sqrt(s * (s + 1.0) - m * (m + 1.0));
  }
  const Matrix sm = sp.adjoint();
  SpinOperators ops;
  ops.s = s;
  ops.dim = dim;
  ops.sx = 0.5 * (sp + sm);
  ops.sy = Complex(0.0, -0.5) * (sp - sm);
  ops.sz = sz;
  return ops;
}

int level_index(const SpinOperators& ops, double m) {
  const double idx = ops.s - m;
  if (idx < -1e-9 || idx > ops.dim - 1 + 1e-9 ||
      std::abs(idx - std::round(idx)) > 1e-9)
    throw std::invalid_argument("level_index: m outside {-s,...,s}");
  return static_cast<int>(std::round(idx));
}

double level_value(const SpinOperators& ops, int index) { return ops.s - index; }

Matrix rotation_operator(const SpinOperators& ops, double theta, double phi) {
  HermitianEig ey = hermitian_eig(ops.sy);
  Vector ph(ops.dim);
  for (int k = 0; k < ops.dim; ++k)
    ph(k) = std::exp(Complex(0.0, -theta * ey.values(k)));
  Matrix r = ey.vectors * ph.asDiagonal() * ey.vectors.adjoint();
  for (int k = 0; k < ops.dim; ++k)
    r.row(k) *= std::exp(Complex(0.0, -phi * level_value(ops, k)));
  return r;
}

Vector rotated_eigenvector(const SpinOperators& ops, double m, double theta, double phi) {
  return rotation_operator(ops, theta, phi).col(level_index(ops, m));
}

ConditionalSpinState conditional_spin_state(const Vector& psi,
                                            const ConfigurationSpace& space,
                                            Index x) {
  const Index ns = space.internal_dim();
  Vector amp(ns);
  for (Index s = 0; s < ns; ++s) amp(s) = psi(space.composite_from_flat(x, s));
  const double norm2 = amp.squaredNorm();
  if (norm2 <= kProbabilityFloor)
    throw DegenerateConfiguration("conditional_spin_state: norm underflow at configuration " +
                                  std::to_string(x));
  return {x, amp / std::sqrt(norm2)};
}

namespace {

// Global phase gauge: largest-magnitude component made real positive.
void fix_phase(Vector& v) {
  Index best = 0;
  double mag = 0.0;
  for (Index k = 0; k < v.size(); ++k) {
    const double a = std::abs(v(k));
    if (a > mag + 1e-12) {
      mag = a;
      best = k;
    }
  }
  if (mag > 0.0) v *= std::conj(v(best)) / std::abs(v(best));
}

}  // namespace

TwoSpinFactors factorize_two_spin(const ConditionalSpinState& state, int dim1, int dim2) {
  if (state.amplitudes.size() != static_cast<Index>(dim1) * dim2)
    throw std::invalid_argument("factorize_two_spin: dimension mismatch");
  Matrix m(dim1, dim2);
  for (int i = 0; i < dim1; ++i)
    for (int j = 0; j < dim2; ++j) m(i, j) = state.amplitudes(i * dim2 + j);

  HermitianEig eig = hermitian_eig(Matrix(m * m.adjoint()));
  const Index last = eig.values.size() - 1;
  const double lambda = eig.values(last);

  // Degenerate top eigenvalue: take the combination in the degenerate
  // eigenspace that maximally aligns with the constant vector.
  Index first = last;
  while (first > 0 && lambda - eig.values(first - 1) < 1e-9) --first;
  Vector f;
  if (first < last) {
    const Vector c = Vector::Constant(dim1, Complex(1.0 / std::sqrt(double(dim1)), 0.0));
    Vector proj = Vector::Zero(dim1);
    for (Index k = first; k <= last; ++k)
      proj += eig.vectors.col(k) * (eig.vectors.col(k).dot(c));
    f = proj.norm() > 1e-9 ? Vector(proj / proj.norm()) : Vector(eig.vectors.col(last));
  } else {
    f = eig.vectors.col(last);
  }
  fix_phase(f);

  // Partner factor from the first one, so the pair stays jointly optimal:
  // the conjugate of M^dagger f is the second-problem eigenvector paired
  // with f inside the degenerate eigenspace.
  Vector g = (m.adjoint() * f).conjugate();
  g /= g.norm();
  fix_phase(g);

  return {f, g, lambda};
}

// ---------------------------------------------------------------------------
// Euler-angle fitting
// ---------------------------------------------------------------------------

namespace {

// Applies the inverse rotation to psi so that entry m is <v^m, psi>.
struct RotationScan {
  explicit RotationScan(const SpinOperators& ops) : dim(ops.dim) {
    HermitianEig ey = hermitian_eig(ops.sy);
    w = ey.vectors;
    lam = ey.values;
    mz.resize(dim);
    for (int k = 0; k < dim; ++k) mz(k) = level_value(ops, k);
  }

  Vector overlaps(const Vector& psi, double theta, double phi) const {
    Vector y(dim);
    for (int k = 0; k < dim; ++k) y(k) = std::exp(Complex(0.0, phi * mz(k))) * psi(k);
    Vector z = w.adjoint() * y;
    for (int k = 0; k < dim; ++k) z(k) *= std::exp(Complex(0.0, theta * lam(k)));
    return w * z;
  }

  double best_alignment(const Vector& psi, double theta, double phi, int* m_out) const {
    Vector ov = overlaps(psi, theta, phi);
    int best = 0;
    double val = -1.0;
    for (int k = 0; k < dim; ++k) {
      const double a = std::norm(ov(k));
      if (a > val) {
        val = a;
        best = k;
      }
    }
    if (m_out) *m_out = best;
    return val;
  }

  int dim;
  Matrix w;
  RealVector lam, mz;
};

// Nelder-Mead on (theta, phi), minimizing 1 - max_m |<v^m, psi>|^2.
void nelder_mead(const RotationScan& scan, const Vector& psi, double& theta,
                 double& phi, double step) {
  using Point = std::array<double, 2>;
  auto f = [&](const Point& p) {
    return 1.0 - scan.best_alignment(psi, p[0], p[1], nullptr);
  };
  std::array<Point, 3> sx = {Point{theta, phi}, Point{theta + step, phi},
                             Point{theta, phi + step}};
  std::array<double, 3> fx = {f(sx[0]), f(sx[1]), f(sx[2])};
  for (int it = 0; it < 500; ++it) {
    std::array<int, 3> ord = {0, 1, 2};
    std::sort(ord.begin(), ord.end(), [&](int a, int b) { return fx[a] < fx[b]; });
    const Point &b = sx[ord[0]], &m = sx[ord[1]];
    Point& w = sx[ord[2]];
    const double diam = std::max(std::hypot(b[0] - w[0], b[1] - w[1]),
                                 std::hypot(b[0] - m[0], b[1] - m[1]));
    if (diam < 1e-11) break;
    Point cen = {(b[0] + m[0]) / 2.0, (b[1] + m[1]) / 2.0};
    auto mix = [&](double t) {
      return Point{cen[0] + t * (cen[0] - w[0]), cen[1] + t * (cen[1] - w[1])};
    };
    Point refl = mix(1.0);
    double frefl = f(refl);
    if (frefl < fx[ord[0]]) {
      Point exp_ = mix(2.0);
      double fexp = f(exp_);
      if (fexp < frefl) {
        w = exp_;
        fx[ord[2]] = fexp;
      } else {
        w = refl;
        fx[ord[2]] = frefl;
      }
    } else if (frefl < fx[ord[1]]) {
      w = refl;
      fx[ord[2]] = frefl;
    } else {
      Point con = mix(frefl < fx[ord[2]] ? 0.5 : -0.5);
      double fcon = f(con);
      if (fcon < std::min(frefl, fx[ord[2]])) {
        w = con;
        fx[ord[2]] = fcon;
      } else {
        for (int k : {ord[1], ord[2]}) {
          sx[k][0] = b[0] + 0.5 * (sx[k][0] - b[0]);
          sx[k][1] = b[1] + 0.5 * (sx[k][1] - b[1]);
          fx[k] = f(sx[k]);
        }
      }
    }
  }
  int best = 0;
  for (int k = 1; k < 3; ++k)
    if (fx[k] < fx[best]) best = k;
  theta = sx[best][0];
  phi = sx[best][1];
}

// Brings theta into [0, pi] and phi into [0, 2pi) using the identity
// v_{-theta, phi} = v_{theta, phi + pi} (up to phase), then applies the
// pole gauge phi = 0.
void normalize_angles(double& theta, double& phi) {
  theta = std::fmod(theta, 2.0 * M_PI);
  if (theta < 0.0) theta += 2.0 * M_PI;
  if (theta > M_PI) {
    theta = 2.0 * M_PI - theta;
    phi += M_PI;
  }
  phi = wrap_2pi(phi);
  if (theta < kPoleTol || theta > M_PI - kPoleTol) phi = 0.0;
}

EulerFit finish_fit(const RotationScan& scan, const Vector& psi, double theta,
                    double phi) {
  normalize_angles(theta, phi);
  int m = 0;
  const double align = scan.best_alignment(psi, theta, phi, &m);
  return {theta, phi, m, std::max(0.0, 1.0 - align)};
}

// Closed-form theta-only fit for a two-level system, phi = 0.
EulerFit fit_theta_only_2d(const Vector& psi) {
  const Complex a = psi(0), b = psi(1);
  const double c2 = 0.5 * (std::norm(a) - std::norm(b));
  const double r = (std::conj(a) * b).real();
  const double amp = std::hypot(c2, r);
  const double n2 = psi.squaredNorm();
  if (amp < 1e-15) {
    const int m = std::norm(a) >= std::norm(b) ? 0 : 1;
    return {0.0, 0.0, m, std::max(0.0, 1.0 - std::max(std::norm(a), std::norm(b)) / n2)};
  }
  double theta = std::atan2(r, c2);
  int m = 0;
  if (theta < 0.0) {
    theta += M_PI;
    m = 1;
  }
  if (theta < kPoleTol) theta = 0.0;
  if (theta > M_PI - kPoleTol) theta = M_PI;
  return {theta, 0.0, m, std::max(0.0, 1.0 - (0.5 * n2 + amp) / n2)};
}

}  // namespace

EulerFit flipped_fit(const EulerFit& fit, const SpinOperators& ops) {
  double theta = M_PI - fit.theta;
  double phi = fit.phi + M_PI;
  normalize_angles(theta, phi);
  return {theta, phi, ops.dim - 1 - fit.m_index, fit.residual};
}

EulerFit fit_euler(const Vector& psi, const SpinOperators& ops, FitMode mode,
                   const EulerFit* hint) {
  if (psi.size() != ops.dim) throw std::invalid_argument("fit_euler: dimension mismatch");
  if (std::abs(psi.norm() - 1.0) > 1e-6)
    throw std::invalid_argument("fit_euler: state must be normalized");

  if (mode == FitMode::ThetaOnly) {
    if (ops.dim == 2) return fit_theta_only_2d(psi);
    RotationScan scan(ops);
    const int n_grid = 512;
    double best_theta = 0.0;
    double best_val = -1.0;
    for (int j = 0; j <= n_grid; ++j) {
      const double theta = M_PI * j / n_grid;
      const double val = scan.best_alignment(psi, theta, 0.0, nullptr);
      if (val > best_val) {
        best_val = val;
        best_theta = theta;
      }
    }
    // Golden-section polish around the grid optimum.
    double lo = std::max(0.0, best_theta - M_PI / n_grid);
    double hi = std::min(M_PI, best_theta + M_PI / n_grid);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = scan.best_alignment(psi, x1, 0.0, nullptr);
    double f2 = scan.best_alignment(psi, x2, 0.0, nullptr);
    while (hi - lo > 1e-11) {
      if (f1 < f2) {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + gr * (hi - lo);
        f2 = scan.best_alignment(psi, x2, 0.0, nullptr);
      } else {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - gr * (hi - lo);
        f1 = scan.best_alignment(psi, x1, 0.0, nullptr);
      }
    }
    double theta = 0.5 * (lo + hi);
    if (theta < kPoleTol) theta = 0.0;
    if (theta > M_PI - kPoleTol) theta = M_PI;
    EulerFit out = finish_fit(scan, psi, theta, 0.0);
    out.phi = 0.0;
    return out;
  }

  // Two-level states are exactly rotated eigenvectors: read the angles off
  // the Bloch vector.
  if (ops.dim == 2) {
    const Complex a = psi(0), b = psi(1);
    const Complex ab = std::conj(a) * b;
    const double nx = 2.0 * ab.real(), ny = 2.0 * ab.imag();
    const double nz = std::norm(a) - std::norm(b);
    const double nperp = std::hypot(nx, ny);
    double theta = std::atan2(nperp, nz);
    double phi = nperp < 1e-15 ? 0.0 : wrap_2pi(std::atan2(ny, nx));
    RotationScan scan(ops);
    EulerFit fit = finish_fit(scan, psi, theta, phi);
    EulerFit other = flipped_fit(fit, ops);
    if (other.theta < fit.theta - 1e-9 ||
        (std::abs(other.theta - fit.theta) <= 1e-9 && other.phi < fit.phi))
      return finish_fit(scan, psi, other.theta, other.phi);
    return fit;
  }

  RotationScan scan(ops);

  if (hint) {
    double theta = hint->theta, phi = hint->phi;
    nelder_mead(scan, psi, theta, phi, 0.02);
    EulerFit fit = finish_fit(scan, psi, theta, phi);
    if (fit.residual <= 1e-8) return fit;
  }

  const int n_grid = 64;
  double best_theta = 0.0, best_phi = 0.0, best_val = -1.0;
  for (int j = 0; j < n_grid; ++j) {
    const double theta = M_PI * (j + 0.5) / n_grid;
    for (int k = 0; k < n_grid; ++k) {
      const double phi = 2.0 * M_PI * k / n_grid;
      const double val = scan.best_alignment(psi, theta, phi, nullptr);
      if (val > best_val) {
        best_val = val;
        best_theta = theta;
        best_phi = phi;
      }
    }
  }
  nelder_mead(scan, psi, best_theta, best_phi, M_PI / n_grid);
  EulerFit fit = finish_fit(scan, psi, best_theta, best_phi);
  EulerFit other = flipped_fit(fit, ops);
  if (other.theta < fit.theta - 1e-9 ||
      (std::abs(other.theta - fit.theta) <= 1e-9 && other.phi < fit.phi)) {
    EulerFit refit = finish_fit(scan, psi, other.theta, other.phi);
    if (refit.residual <= fit.residual + 1e-12) return refit;
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Frames
// ---------------------------------------------------------------------------

BasisFrame identity_frame(const ConfigurationSpace& space) {
  BasisFrame frame;
  frame.entries.resize(static_cast<size_t>(space.external_dim()));
  for (auto& e : frame.entries) {
    e.valid = true;
    e.angles.assign(space.particle_count(), EulerFit{});
    e.v = Matrix::Identity(space.internal_dim(), space.internal_dim());
  }
  return frame;
}

namespace {

double angle_distance(const EulerFit& a, const EulerFit& b) {
  double dphi = std::abs(a.phi - b.phi);
  dphi = std::min(dphi, 2.0 * M_PI - dphi);
  return std::abs(a.theta - b.theta) + dphi;
}

}  // namespace

BasisFrame build_frame(const Vector& psi, const ConfigurationSpace& space,
                       const std::vector<SpinOperators>& ops, FitMode mode,
                       const BasisFrame* previous) {
  const int n = space.particle_count();
  if (n > 2)
    throw std::invalid_argument("build_frame: product factorization only supports N <= 2");
  if (static_cast<int>(ops.size()) != n)
    throw std::invalid_argument("build_frame: one SpinOperators per particle required");
  for (int i = 0; i < n; ++i)
    if (ops[i].dim != space.particle(i).internal)
      throw std::invalid_argument("build_frame: spin dimension mismatch");

  BasisFrame frame;
  frame.entries.resize(static_cast<size_t>(space.external_dim()));

  for (Index x = 0; x < space.external_dim(); ++x) {
    FrameEntry& entry = frame.entries[static_cast<size_t>(x)];
    const FrameEntry* prev =
        previous ? &previous->entries[static_cast<size_t>(x)] : nullptr;

    ConditionalSpinState cond;
    try {
      cond = conditional_spin_state(psi, space, x);
    } catch (const DegenerateConfiguration&) {
      if (prev && prev->valid) {
        entry = *prev;
        continue;
      }
      throw;
    }

    std::vector<Vector> factors(n);
    if (n == 1) {
      factors[0] = cond.amplitudes;
    } else {
      TwoSpinFactors fac = factorize_two_spin(cond, space.particle(0).internal,
                                              space.particle(1).internal);
      factors[0] = fac.psi1;
      factors[1] = fac.psi2;
    }

    entry.valid = true;
    entry.angles.resize(n);
    Matrix v = Matrix::Identity(1, 1);
    for (int i = 0; i < n; ++i) {
      const EulerFit* hint =
          (prev && prev->valid && mode == FitMode::Full) ? &prev->angles[i] : nullptr;
      EulerFit fit = fit_euler(factors[i], ops[i], mode, hint);
      if (mode == FitMode::Full && prev && prev->valid) {
        const EulerFit other = flipped_fit(fit, ops[i]);
        if (angle_distance(other, prev->angles[i]) <
            angle_distance(fit, prev->angles[i]))
          fit = other;
      }
      entry.angles[i] = fit;
      v = tensor_product(
          v, Matrix(rotation_operator(ops[i], fit.theta, fit.phi).adjoint()));
    }
    entry.v = std::move(v);
  }
  return frame;
}

Matrix frame_matrix(const ConfigurationSpace& space, const BasisFrame& frame) {
  const Index total = space.total_dim();
  const Index ns = space.internal_dim();
  Matrix w = Matrix::Zero(total, total);
  for (Index x = 0; x < space.external_dim(); ++x) {
    const FrameEntry& e = frame.entries[static_cast<size_t>(x)];
    if (!e.valid)
      throw std::invalid_argument("frame_matrix: frame has an invalid configuration");
    for (Index sp = 0; sp < ns; ++sp) {
      const Index row = space.composite_from_flat(x, sp);
      for (Index s = 0; s < ns; ++s)
        w(row, space.composite_from_flat(x, s)) = e.v(sp, s);
    }
  }
  return w;
}

}  // namespace ebbb
