#pragma once

// Dense state and operator primitives shared by every other module.
//
// Qubit ordering convention (project-wide): qubit 0 is the most significant
// bit of an amplitude index. On an n-qubit register qubit q therefore lives
// at bit position n - 1 - q.

#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace decoupler {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Rng = std::mt19937_64;

inline constexpr int kMaxQubits = 12;

/// Thrown when a numerical quantity leaves its admissible range or becomes
/// non-finite (mapped to exit status 2 by the CLI).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t dim_of(int num_qubits) {
  return std::size_t{1} << num_qubits;
}

inline constexpr int bit_position(int num_qubits, int qubit) {
  return num_qubits - 1 - qubit;
}

class PureState {
 public:
  /// Validates length 2^n and unit norm (1e-12).
  PureState(int num_qubits, Vector amplitudes);

  static PureState basis(int num_qubits, std::uint64_t index);

  int num_qubits() const { return num_qubits_; }
  const Vector& amplitudes() const { return amplitudes_; }
  Complex operator[](std::size_t i) const { return amplitudes_[static_cast<Eigen::Index>(i)]; }

 private:
  int num_qubits_;
  Vector amplitudes_;
};

class DensityOperator {
 public:
  /// Validates dimension, hermiticity and unit trace (1e-12). Positivity is
  /// only checked by is_positive_semidefinite().
  DensityOperator(int num_qubits, Matrix matrix);

  static DensityOperator maximally_mixed(int num_qubits);

  int num_qubits() const { return num_qubits_; }
  const Matrix& matrix() const { return matrix_; }

  bool is_positive_semidefinite(double tol = 1e-10) const;

 private:
  int num_qubits_;
  Matrix matrix_;
};

class UnitaryMatrix {
 public:
  /// Validates U^dagger U = I within 1e-10.
  UnitaryMatrix(int num_qubits, Matrix matrix);

  static UnitaryMatrix identity(int num_qubits);

  int num_qubits() const { return num_qubits_; }
  std::size_t dim() const { return dim_of(num_qubits_); }
  const Matrix& matrix() const { return matrix_; }

 private:
  int num_qubits_;
  Matrix matrix_;
};

// Elementwise checks used by constructors and tests.
double max_abs_deviation(const Matrix& a, const Matrix& b);
bool is_unitary(const Matrix& m, double tol = 1e-10);
bool is_hermitian(const Matrix& m, double tol = 1e-12);

Matrix kron(const Matrix& a, const Matrix& b);
Vector kron(const Vector& a, const Vector& b);

PureState tensor(const PureState& a, const PureState& b);
DensityOperator tensor(const DensityOperator& a, const DensityOperator& b);
UnitaryMatrix tensor(const UnitaryMatrix& a, const UnitaryMatrix& b);

DensityOperator outer(const PureState& psi);

/// Reduced operator on `keep` (sorted, relative order preserved).
DensityOperator partial_trace(const DensityOperator& rho, std::span<const int> keep);

/// Reduced density matrix of a pure state without forming the full outer
/// product. Returns the raw matrix; used on hot paths.
Matrix reduced_density(const Vector& amplitudes, int num_qubits, std::span<const int> keep);

double purity(const DensityOperator& rho);
double purity(const Matrix& rho);
double linear_entropy(const DensityOperator& rho);

UnitaryMatrix haar_random_unitary(int num_qubits, Rng& rng);
PureState haar_random_state(int num_qubits, Rng& rng);

/// Applies a 2^k x 2^k matrix to `targets` (k = targets.size()) of an
/// amplitude array over `num_qubits` qubits, in place. targets[0] is the most
/// significant qubit of the local matrix index.
void apply_local(std::span<Complex> amplitudes, int num_qubits, std::span<const int> targets,
                 const Matrix& local);

/// Same as apply_local but for every column of `m` (m = G m).
void apply_local_columns(Matrix& m, int num_qubits, std::span<const int> targets,
                         const Matrix& local);

/// rho -> G rho G^dagger for a gate G on `targets`.
void conjugate_local(Matrix& rho, int num_qubits, std::span<const int> targets, const Matrix& local);

void validate_qubit_count(int num_qubits);

}  // namespace decoupler
