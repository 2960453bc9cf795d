#include "ebbb/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace ebbb {

double max_abs(const Matrix& a) { return a.cwiseAbs().maxCoeff(); }

bool is_unitary(const Matrix& u, double tol) {
  if (u.rows() != u.cols()) return false;
  Matrix res = u.adjoint() * u - Matrix::Identity(u.rows(), u.cols());
  return max_abs(res) < tol;
}

bool is_hermitian(const Matrix& h, double tol) {
  if (h.rows() != h.cols()) return false;
  return max_abs(Matrix(h - h.adjoint())) < tol;
}

bool is_normalized(const Vector& v, double tol) {
  return std::abs(v.squaredNorm() - 1.0) < tol;
}

Matrix tensor_product(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Vector tensor_product(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i)
    out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

HermitianEig hermitian_eig(const Matrix& h) {
  if (!is_hermitian(h, 1e-10))
    throw std::invalid_argument("hermitian_eig: input is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("hermitian_eig: eigensolver failed");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

Matrix evolution_from_hamiltonian(const Matrix& h, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("evolution_from_hamiltonian: eps must be > 0");
  HermitianEig eig = hermitian_eig(h);
  Vector phases(eig.values.size());
  for (Index k = 0; k < eig.values.size(); ++k)
    phases(k) = std::exp(Complex(0.0, -eig.values(k) * eps));
  return eig.vectors * phases.asDiagonal() * eig.vectors.adjoint();
}

Matrix unitary_root(const Matrix& u, int n_steps) {
  if (n_steps < 1) throw std::invalid_argument("unitary_root: n_steps must be >= 1");
  if (!is_unitary(u)) throw std::invalid_argument("unitary_root: input is not unitary");
  if (n_steps == 1) return u;

  // A unitary matrix is normal, so its Schur form is diagonal up to
  // round-off; the Schur basis Q stays unitary, which keeps the root unitary.
  Eigen::ComplexSchur<Matrix> schur(u);
  if (schur.info() != Eigen::Success)
    throw std::runtime_error("unitary_root: Schur decomposition failed");
  const Matrix& q = schur.matrixU();
  Vector roots(u.rows());
  for (Index k = 0; k < u.rows(); ++k) {
    double phase = std::arg(schur.matrixT()(k, k));
    if (phase <= -M_PI + 1e-13) {
      // Eigenvalue -1 computed with a microscopically negative imaginary
      // part; the principal branch (-pi, pi] puts it at +pi.
      phase = M_PI;
    } else if (phase < -M_PI + 1e-12) {
      throw BranchCutError("unitary_root: eigenphase at the -pi branch cut");
    }
    roots(k) = std::exp(Complex(0.0, phase / n_steps));
  }
  return q * roots.asDiagonal() * q.adjoint();
}

}  // namespace ebbb
