#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>

namespace ebbb {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kUnitaryTol = 1e-10;
inline constexpr double kHermitianTol = 1e-12;

/// Thrown by unitary_root when an eigenphase sits on the principal branch
/// cut; the caller must perturb the operator or pick a different n_steps.
struct BranchCutError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Entrywise max-norm ‖A‖_max.
double max_abs(const Matrix& a);

bool is_unitary(const Matrix& u, double tol = kUnitaryTol);
bool is_hermitian(const Matrix& h, double tol = kHermitianTol);
bool is_normalized(const Vector& v, double tol = kUnitaryTol);

/// Kronecker product with the first factor on the slow index, matching the
/// composite-index convention of ConfigurationSpace.
Matrix tensor_product(const Matrix& a, const Matrix& b);
Vector tensor_product(const Vector& a, const Vector& b);

struct HermitianEig {
  RealVector values;  // ascending
  Matrix vectors;     // orthonormal columns
};

/// Eigendecomposition of a Hermitian matrix. Eigenvalues ascending,
/// eigenvector columns orthonormal.
HermitianEig hermitian_eig(const Matrix& h);

/// exp(-i h eps) for Hermitian h, via eigendecomposition.
Matrix evolution_from_hamiltonian(const Matrix& h, double eps);

/// Principal n-th root of a unitary matrix: eigenphases are taken on
/// (-pi, pi] and divided by n_steps. Eigenphases landing exactly on the
/// open end of the branch (-pi) are snapped to +pi; phases strictly inside
/// the cut window raise BranchCutError.
Matrix unitary_root(const Matrix& u, int n_steps);

}  // namespace ebbb
