#include "decoupler/statekit.hpp"

#include <algorithm>
#include <cmath>

namespace decoupler {

namespace {

// Splits indices of an n-qubit register into (kept bits, traced bits).
// index_of(k, t) composes a full index from a kept-subsystem index k and a
// traced-subsystem index t, each enumerated with their own MSB-first order.
struct SubsystemIndexer {
  SubsystemIndexer(int num_qubits, std::span<const int> keep) {
    std::vector<bool> kept(static_cast<std::size_t>(num_qubits), false);
    for (int q : keep) {
      if (q < 0 || q >= num_qubits) {
        throw std::invalid_argument("qubit index " + std::to_string(q) + " outside register of " +
                                    std::to_string(num_qubits));
      }
      if (kept[static_cast<std::size_t>(q)]) {
        throw std::invalid_argument("duplicate qubit index " + std::to_string(q));
      }
      kept[static_cast<std::size_t>(q)] = true;
    }
    std::vector<int> keep_positions;
    std::vector<int> trace_positions;
    for (int q = 0; q < num_qubits; ++q) {
      (kept[static_cast<std::size_t>(q)] ? keep_positions : trace_positions)
          .push_back(bit_position(num_qubits, q));
    }
    keep_offsets = offsets(keep_positions);
    trace_offsets = offsets(trace_positions);
  }

  static std::vector<std::size_t> offsets(const std::vector<int>& positions) {
    const std::size_t k = positions.size();
    std::vector<std::size_t> out(std::size_t{1} << k, 0);
    for (std::size_t local = 0; local < out.size(); ++local) {
      std::size_t full = 0;
      for (std::size_t b = 0; b < k; ++b) {
        if ((local >> (k - 1 - b)) & 1U) full |= std::size_t{1} << positions[b];
      }
      out[local] = full;
    }
    return out;
  }

  std::vector<std::size_t> keep_offsets;
  std::vector<std::size_t> trace_offsets;
};

std::vector<int> sorted_unique(std::span<const int> qubits) {
  std::vector<int> out(qubits.begin(), qubits.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

void validate_qubit_count(int num_qubits) {
  if (num_qubits < 0 || num_qubits > kMaxQubits) {
    throw std::invalid_argument("qubit count " + std::to_string(num_qubits) +
                                " outside supported range [0, " + std::to_string(kMaxQubits) +
                                "]");
  }
}

PureState::PureState(int num_qubits, Vector amplitudes)
    : num_qubits_(num_qubits), amplitudes_(std::move(amplitudes)) {
  validate_qubit_count(num_qubits);
  if (static_cast<std::size_t>(amplitudes_.size()) != dim_of(num_qubits)) {
    throw std::invalid_argument("state length does not match 2^num_qubits");
  }
  if (std::abs(amplitudes_.norm() - 1.0) > 1e-12) {
    throw std::invalid_argument("state is not normalized");
  }
}

PureState PureState::basis(int num_qubits, std::uint64_t index) {
  validate_qubit_count(num_qubits);
  if (index >= dim_of(num_qubits)) throw std::invalid_argument("basis index out of range");
  Vector v = Vector::Zero(static_cast<Eigen::Index>(dim_of(num_qubits)));
  v[static_cast<Eigen::Index>(index)] = 1.0;
  return PureState(num_qubits, std::move(v));
}

DensityOperator::DensityOperator(int num_qubits, Matrix matrix)
    : num_qubits_(num_qubits), matrix_(std::move(matrix)) {
  validate_qubit_count(num_qubits);
  const auto d = static_cast<Eigen::Index>(dim_of(num_qubits));
  if (matrix_.rows() != d || matrix_.cols() != d) {
    throw std::invalid_argument("density operator dimension does not match 2^num_qubits");
  }
  if (!is_hermitian(matrix_, 1e-12)) throw std::invalid_argument("density operator not Hermitian");
  if (std::abs(matrix_.trace() - Complex(1.0, 0.0)) > 1e-12) {
    throw std::invalid_argument("density operator trace differs from 1");
  }
}

DensityOperator DensityOperator::maximally_mixed(int num_qubits) {
  validate_qubit_count(num_qubits);
  const auto d = static_cast<Eigen::Index>(dim_of(num_qubits));
  return DensityOperator(num_qubits, Matrix::Identity(d, d) / static_cast<double>(d));
}

bool DensityOperator::is_positive_semidefinite(double tol) const {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(matrix_, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff() >= -tol;
}

UnitaryMatrix::UnitaryMatrix(int num_qubits, Matrix matrix)
    : num_qubits_(num_qubits), matrix_(std::move(matrix)) {
  validate_qubit_count(num_qubits);
  const auto d = static_cast<Eigen::Index>(dim_of(num_qubits));
  if (matrix_.rows() != d || matrix_.cols() != d) {
    throw std::invalid_argument("unitary dimension does not match 2^num_qubits");
  }
  if (!is_unitary(matrix_, 1e-10)) throw std::invalid_argument("matrix is not unitary");
}

UnitaryMatrix UnitaryMatrix::identity(int num_qubits) {
  validate_qubit_count(num_qubits);
  const auto d = static_cast<Eigen::Index>(dim_of(num_qubits));
  return UnitaryMatrix(num_qubits, Matrix::Identity(d, d));
}

double max_abs_deviation(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("shape mismatch in max_abs_deviation");
  }
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

bool is_unitary(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const Matrix gram = m.adjoint() * m;
  return max_abs_deviation(gram, Matrix::Identity(m.rows(), m.cols())) <= tol;
}

bool is_hermitian(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return max_abs_deviation(m, m.adjoint()) <= tol;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Vector kron(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a[i] * b;
  return out;
}

PureState tensor(const PureState& a, const PureState& b) {
  return PureState(a.num_qubits() + b.num_qubits(), kron(a.amplitudes(), b.amplitudes()));
}

DensityOperator tensor(const DensityOperator& a, const DensityOperator& b) {
  return DensityOperator(a.num_qubits() + b.num_qubits(), kron(a.matrix(), b.matrix()));
}

UnitaryMatrix tensor(const UnitaryMatrix& a, const UnitaryMatrix& b) {
  return UnitaryMatrix(a.num_qubits() + b.num_qubits(), kron(a.matrix(), b.matrix()));
}

DensityOperator outer(const PureState& psi) {
  return DensityOperator(psi.num_qubits(), psi.amplitudes() * psi.amplitudes().adjoint());
}

DensityOperator partial_trace(const DensityOperator& rho, std::span<const int> keep) {
  if (keep.empty()) throw std::invalid_argument("partial_trace requires a nonempty keep set");
  const std::vector<int> kept = sorted_unique(keep);
  const SubsystemIndexer idx(rho.num_qubits(), kept);
  const auto dk = static_cast<Eigen::Index>(idx.keep_offsets.size());
  Matrix out = Matrix::Zero(dk, dk);
  const Matrix& m = rho.matrix();
  for (Eigen::Index a = 0; a < dk; ++a) {
    for (Eigen::Index b = 0; b < dk; ++b) {
      Complex acc = 0.0;
      for (std::size_t t : idx.trace_offsets) {
        acc += m(static_cast<Eigen::Index>(idx.keep_offsets[static_cast<std::size_t>(a)] | t),
                 static_cast<Eigen::Index>(idx.keep_offsets[static_cast<std::size_t>(b)] | t));
      }
      out(a, b) = acc;
    }
  }
  // Symmetrize away rounding so the result passes the hermiticity check.
  out = 0.5 * (out + out.adjoint()).eval();
  return DensityOperator(static_cast<int>(kept.size()), std::move(out));
}

Matrix reduced_density(const Vector& amplitudes, int num_qubits, std::span<const int> keep) {
  const std::vector<int> kept = sorted_unique(keep);
  const SubsystemIndexer idx(num_qubits, kept);
  const auto dk = static_cast<Eigen::Index>(idx.keep_offsets.size());
  const auto dt = static_cast<Eigen::Index>(idx.trace_offsets.size());
  Matrix reshaped(dk, dt);
  for (Eigen::Index a = 0; a < dk; ++a) {
    for (Eigen::Index t = 0; t < dt; ++t) {
      reshaped(a, t) = amplitudes[static_cast<Eigen::Index>(idx.keep_offsets[static_cast<std::size_t>(a)] |
                                                           idx.trace_offsets[static_cast<std::size_t>(t)])];
    }
  }
  return reshaped * reshaped.adjoint();
}

double purity(const Matrix& rho) {
  // Tr[rho^2] = sum_ij |rho_ij|^2 for Hermitian rho.
  return rho.cwiseAbs2().sum();
}

double purity(const DensityOperator& rho) { return purity(rho.matrix()); }

double linear_entropy(const DensityOperator& rho) { return 1.0 - purity(rho); }

UnitaryMatrix haar_random_unitary(int num_qubits, Rng& rng) {
  validate_qubit_count(num_qubits);
  const auto d = static_cast<Eigen::Index>(dim_of(num_qubits));
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix ginibre(d, d);
  // Fill row-major so the draw order is independent of Eigen's storage order.
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double re = normal(rng);
      const double im = normal(rng);
      ginibre(i, j) = Complex(re, im) / std::sqrt(2.0);
    }
  }
  Eigen::HouseholderQR<Matrix> qr(ginibre);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < d; ++j) {
    const Complex diag = r(j, j);
    const double mag = std::abs(diag);
    if (mag > 0.0) q.col(j) *= diag / mag;
  }
  return UnitaryMatrix(num_qubits, std::move(q));
}

PureState haar_random_state(int num_qubits, Rng& rng) {
  validate_qubit_count(num_qubits);
  const auto d = static_cast<Eigen::Index>(dim_of(num_qubits));
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    v[i] = Complex(re, im);
  }
  v /= v.norm();
  return PureState(num_qubits, std::move(v));
}

void apply_local(std::span<Complex> amplitudes, int num_qubits, std::span<const int> targets,
                 const Matrix& local) {
  const std::size_t k = targets.size();
  const std::size_t local_dim = std::size_t{1} << k;
  if (static_cast<std::size_t>(local.rows()) != local_dim ||
      static_cast<std::size_t>(local.cols()) != local_dim) {
    throw std::invalid_argument("local matrix dimension does not match target count");
  }
  if (amplitudes.size() != dim_of(num_qubits)) {
    throw std::invalid_argument("amplitude array length does not match register");
  }

  if (k == 1) {
    const std::size_t stride = std::size_t{1} << bit_position(num_qubits, targets[0]);
    const Complex m00 = local(0, 0), m01 = local(0, 1), m10 = local(1, 0), m11 = local(1, 1);
    for (std::size_t base = 0; base < amplitudes.size(); base += 2 * stride) {
      for (std::size_t i = base; i < base + stride; ++i) {
        const Complex a0 = amplitudes[i];
        const Complex a1 = amplitudes[i + stride];
        amplitudes[i] = m00 * a0 + m01 * a1;
        amplitudes[i + stride] = m10 * a0 + m11 * a1;
      }
    }
    return;
  }

  std::vector<int> positions(k);
  for (std::size_t b = 0; b < k; ++b) positions[b] = bit_position(num_qubits, targets[b]);
  std::vector<std::size_t> offsets(local_dim, 0);
  for (std::size_t l = 0; l < local_dim; ++l) {
    for (std::size_t b = 0; b < k; ++b) {
      if ((l >> (k - 1 - b)) & 1U) offsets[l] |= std::size_t{1} << positions[b];
    }
  }
  std::vector<int> ascending = positions;
  std::sort(ascending.begin(), ascending.end());

  std::vector<Complex> buffer(local_dim);
  const std::size_t outer_count = amplitudes.size() >> k;
  for (std::size_t j = 0; j < outer_count; ++j) {
    std::size_t base = j;
    for (int p : ascending) {
      const std::size_t low = base & ((std::size_t{1} << p) - 1);
      base = ((base >> p) << (p + 1)) | low;
    }
    for (std::size_t l = 0; l < local_dim; ++l) buffer[l] = amplitudes[base | offsets[l]];
    for (std::size_t r = 0; r < local_dim; ++r) {
      Complex acc = 0.0;
      for (std::size_t c = 0; c < local_dim; ++c) {
        acc += local(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * buffer[c];
      }
      amplitudes[base | offsets[r]] = acc;
    }
  }
}

void apply_local_columns(Matrix& m, int num_qubits, std::span<const int> targets,
                         const Matrix& local) {
  const auto rows = static_cast<std::size_t>(m.rows());
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    apply_local(std::span<Complex>(m.col(c).data(), rows), num_qubits, targets, local);
  }
}

void conjugate_local(Matrix& rho, int num_qubits, std::span<const int> targets, const Matrix& local) {
  apply_local_columns(rho, num_qubits, targets, local);
  rho.adjointInPlace();
  apply_local_columns(rho, num_qubits, targets, local);
  rho.adjointInPlace();
}

}  // namespace decoupler
