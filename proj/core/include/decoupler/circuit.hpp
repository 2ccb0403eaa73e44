#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "decoupler/statekit.hpp"

namespace decoupler {

using ParamVector = std::vector<double>;

enum class GateKind { H, X, Z, CNOT, SWAP, ConstantUnitary, PauliRotation };
enum class PauliAxis { X, Y, Z };

std::string to_string(GateKind kind);
std::string to_string(PauliAxis axis);

/// One gate of a circuit. A PauliRotation applies exp(-i * angle * sigma / 2)
/// with angle = sign * params[param_index]; sign is -1 for rotations that come
/// from inverting a parameterized block.
struct GateOp {
  GateKind kind = GateKind::H;
  std::vector<int> targets;
  PauliAxis axis = PauliAxis::Z;
  int param_index = -1;
  double sign = 1.0;
  std::shared_ptr<const Matrix> matrix;

  static GateOp h(int q);
  static GateOp x(int q);
  static GateOp z(int q);
  static GateOp cnot(int control, int target);
  static GateOp swap(int a, int b);
  static GateOp constant(Matrix m, std::vector<int> targets);
  static GateOp rotation(PauliAxis axis, int q, int param_index, double sign = 1.0);

  bool is_parameterized() const { return kind == GateKind::PauliRotation; }

  /// Local matrix of the gate for the given parameter vector.
  Matrix local_matrix(std::span<const double> params) const;
};

Matrix pauli_matrix(PauliAxis axis);
Matrix rotation_matrix(PauliAxis axis, double angle);

class Circuit {
 public:
  Circuit() = default;
  /// Validates the structural invariants: targets distinct and in range,
  /// constant matrices unitary with matching size, every parameter index below
  /// num_params and used by at most one gate.
  Circuit(int num_qubits, std::vector<GateOp> gates, int num_params);

  static Circuit empty(int num_qubits) { return Circuit(num_qubits, {}, 0); }

  int num_qubits() const { return num_qubits_; }
  int num_params() const { return num_params_; }
  const std::vector<GateOp>& gates() const { return gates_; }

  /// Gate position of each parameter, or -1 for unused indices.
  const std::vector<int>& param_gate() const { return param_gate_; }

 private:
  int num_qubits_ = 0;
  int num_params_ = 0;
  std::vector<GateOp> gates_;
  std::vector<int> param_gate_;
};

class CircuitBuilder {
 public:
  explicit CircuitBuilder(int num_qubits) : num_qubits_(num_qubits) {}

  CircuitBuilder& h(int q);
  CircuitBuilder& x(int q);
  CircuitBuilder& z(int q);
  CircuitBuilder& cnot(int control, int target);
  CircuitBuilder& swap(int a, int b);
  CircuitBuilder& constant(Matrix m, std::vector<int> targets);
  /// Adds a rotation reading the next fresh parameter; returns its index.
  int rotation(PauliAxis axis, int q);
  /// RZ * RY * RZ (applied RZ, RY, RZ in time order): a general single-qubit
  /// gate up to global phase. Uses three fresh parameters.
  CircuitBuilder& general_single_qubit(int q);
  /// Appends `other` with its qubit i mapped to qubit_map[i] and its
  /// parameter indices shifted by the current parameter count.
  CircuitBuilder& append(const Circuit& other, std::span<const int> qubit_map);
  CircuitBuilder& append(const Circuit& other);
  CircuitBuilder& add(GateOp gate);
  CircuitBuilder& reserve_params(int count);

  int num_params() const { return num_params_; }
  Circuit build() const;

 private:
  int num_qubits_;
  int num_params_ = 0;
  std::vector<GateOp> gates_;
};

/// Selects which copy of a doubled circuit receives a parameter shift.
enum class ShiftCopy { None, Alpha, Beta };

struct DoubledBinding {
  ParamVector base;
  ShiftCopy shift_copy = ShiftCopy::None;
  std::size_t shift_index = 0;
  double shift_amount = 0.0;

  static DoubledBinding shared(ParamVector base) {
    DoubledBinding b;
    b.base = std::move(base);
    return b;
  }
  static DoubledBinding shifted(ParamVector base, ShiftCopy copy, std::size_t index, double amount);
};

void check_params(const Circuit& circuit, std::span<const double> params);

/// Applies one gate to an amplitude array in place.
void apply_gate(std::span<Complex> amplitudes, int num_qubits, const GateOp& gate,
                std::span<const double> params);

PureState apply(const Circuit& circuit, std::span<const double> params, const PureState& state);
void apply_in_place(const Circuit& circuit, std::span<const double> params, Vector& amplitudes);

DensityOperator apply_density(const Circuit& circuit, std::span<const double> params,
                              const DensityOperator& rho);

UnitaryMatrix to_unitary(const Circuit& circuit, std::span<const double> params);
/// Same as to_unitary without the unitarity validation; hot-path variant.
Matrix circuit_matrix(const Circuit& circuit, std::span<const double> params);

/// Bound inverse: reversed order, every gate inverted, rotations converted to
/// constant matrices. The result has no parameters.
Circuit dagger(const Circuit& circuit, std::span<const double> params);

/// Same gates with every rotation replaced by its bound constant matrix.
Circuit bind_parameters(const Circuit& circuit, std::span<const double> params);

/// Parameterized inverse: reversed order, rotations keep their parameter
/// index with negated sign.
Circuit adjoint(const Circuit& circuit);

/// Re-targets `circuit` onto a wider register and offsets its parameters.
Circuit embed(const Circuit& circuit, std::span<const int> qubit_map, int num_qubits,
              int param_offset, int num_params);

Circuit universal_two_qubit_ansatz();
Circuit layered_ansatz(int num_qubits, int layers);
Circuit single_qubit_ansatz();

/// V1^dagger * U * V0^dagger with parameters theta0 (+) theta1.
Circuit sandwich(const UnitaryMatrix& target, const Circuit& v0, const Circuit& v1);

/// W on qubits 0..n-1 (copy alpha) and on n..2n-1 (copy beta). Copy beta
/// reads parameter index i + k (k = w.num_params()); expand() produces the
/// 2k-long parameter vector for a DoubledBinding.
Circuit doubled_circuit(const Circuit& w);
ParamVector expand(const DoubledBinding& binding, int num_params);

/// Prefix products of a circuit at each rotation, for exact single-parameter
/// shifts: U(theta_i + s) = U * Q_i^dagger R(sign_i * s) Q_i where Q_i is the
/// product of all gates before the rotation reading theta_i.
class RotationShiftCache {
 public:
  RotationShiftCache(const Circuit& circuit, std::span<const double> params);

  const Matrix& unitary() const { return unitary_; }
  /// Q_i^dagger sigma_i Q_i (Hermitian and unitary).
  Matrix conjugated_generator(std::size_t param) const;
  /// sign_i of the rotation reading the parameter.
  double sign(std::size_t param) const;
  Matrix shifted_unitary(std::size_t param, double shift) const;

 private:
  struct Site {
    PauliAxis axis = PauliAxis::Z;
    int qubit = -1;
    double sign = 1.0;
  };
  const Site& site(std::size_t param) const;

  int num_qubits_;
  std::vector<Site> sites_;
  Matrix unitary_;
  std::vector<Matrix> prefix_;
};

}  // namespace decoupler
