#include "decoupler/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace decoupler {

namespace {

const Complex kI(0.0, 1.0);

Matrix make_h() {
  Matrix m(2, 2);
  const double s = 1.0 / std::numbers::sqrt2;
  m << s, s, s, -s;
  return m;
}

Matrix make_cnot() {
  Matrix m = Matrix::Zero(4, 4);
  m(0, 0) = m(1, 1) = m(2, 3) = m(3, 2) = 1.0;
  return m;
}

Matrix make_swap() {
  Matrix m = Matrix::Zero(4, 4);
  m(0, 0) = m(1, 2) = m(2, 1) = m(3, 3) = 1.0;
  return m;
}

void apply_one_qubit(std::span<Complex> amps, int num_qubits, int q, Complex m00, Complex m01,
                     Complex m10, Complex m11) {
  const std::size_t stride = std::size_t{1} << bit_position(num_qubits, q);
  for (std::size_t base = 0; base < amps.size(); base += 2 * stride) {
    for (std::size_t i = base; i < base + stride; ++i) {
      const Complex a0 = amps[i];
      const Complex a1 = amps[i + stride];
      amps[i] = m00 * a0 + m01 * a1;
      amps[i + stride] = m10 * a0 + m11 * a1;
    }
  }
}

void check_qubit(int q, int num_qubits) {
  if (q < 0 || q >= num_qubits) {
    throw std::invalid_argument("gate target " + std::to_string(q) + " outside register of " +
                                std::to_string(num_qubits) + " qubits");
  }
}

GateOp inverted_fixed(const GateOp& g) {
  switch (g.kind) {
    case GateKind::H:
    case GateKind::X:
    case GateKind::Z:
    case GateKind::CNOT:
    case GateKind::SWAP:
      return g;
    case GateKind::ConstantUnitary:
      return GateOp::constant(g.matrix->adjoint(), g.targets);
    case GateKind::PauliRotation:
      break;
  }
  throw std::logic_error("inverted_fixed called on a parameterized gate");
}

GateOp make_gate(GateKind kind, std::vector<int> targets) {
  GateOp g;
  g.kind = kind;
  g.targets = std::move(targets);
  return g;
}

}  // namespace

std::string to_string(GateKind kind) {
  switch (kind) {
    case GateKind::H: return "H";
    case GateKind::X: return "X";
    case GateKind::Z: return "Z";
    case GateKind::CNOT: return "CNOT";
    case GateKind::SWAP: return "SWAP";
    case GateKind::ConstantUnitary: return "ConstantUnitary";
    case GateKind::PauliRotation: return "PauliRotation";
  }
  return "?";
}

std::string to_string(PauliAxis axis) {
  switch (axis) {
    case PauliAxis::X: return "X";
    case PauliAxis::Y: return "Y";
    case PauliAxis::Z: return "Z";
  }
  return "?";
}

Matrix pauli_matrix(PauliAxis axis) {
  Matrix m(2, 2);
  switch (axis) {
    case PauliAxis::X: m << 0, 1, 1, 0; break;
    case PauliAxis::Y: m << 0, -kI, kI, 0; break;
    case PauliAxis::Z: m << 1, 0, 0, -1; break;
  }
  return m;
}

Matrix rotation_matrix(PauliAxis axis, double angle) {
  const double c = std::cos(angle / 2.0);
  const double s = std::sin(angle / 2.0);
  return c * Matrix::Identity(2, 2) - kI * s * pauli_matrix(axis);
}

GateOp GateOp::h(int q) { return make_gate(GateKind::H, {q}); }
GateOp GateOp::x(int q) { return make_gate(GateKind::X, {q}); }
GateOp GateOp::z(int q) { return make_gate(GateKind::Z, {q}); }
GateOp GateOp::cnot(int control, int target) { return make_gate(GateKind::CNOT, {control, target}); }
GateOp GateOp::swap(int a, int b) { return make_gate(GateKind::SWAP, {a, b}); }

GateOp GateOp::constant(Matrix m, std::vector<int> targets) {
  GateOp g = make_gate(GateKind::ConstantUnitary, std::move(targets));
  g.matrix = std::make_shared<const Matrix>(std::move(m));
  return g;
}

GateOp GateOp::rotation(PauliAxis axis, int q, int param_index, double sign) {
  GateOp g = make_gate(GateKind::PauliRotation, {q});
  g.axis = axis;
  g.param_index = param_index;
  g.sign = sign;
  return g;
}

Matrix GateOp::local_matrix(std::span<const double> params) const {
  static const Matrix kH = make_h();
  static const Matrix kCnot = make_cnot();
  static const Matrix kSwap = make_swap();
  switch (kind) {
    case GateKind::H: return kH;
    case GateKind::X: return pauli_matrix(PauliAxis::X);
    case GateKind::Z: return pauli_matrix(PauliAxis::Z);
    case GateKind::CNOT: return kCnot;
    case GateKind::SWAP: return kSwap;
    case GateKind::ConstantUnitary: return *matrix;
    case GateKind::PauliRotation:
      return rotation_matrix(axis, sign * params[static_cast<std::size_t>(param_index)]);
  }
  throw std::logic_error("unknown gate kind");
}

Circuit::Circuit(int num_qubits, std::vector<GateOp> gates, int num_params)
    : num_qubits_(num_qubits), num_params_(num_params), gates_(std::move(gates)) {
  validate_qubit_count(num_qubits);
  if (num_params < 0) throw std::invalid_argument("negative parameter count");
  param_gate_.assign(static_cast<std::size_t>(num_params), -1);
  for (std::size_t g = 0; g < gates_.size(); ++g) {
    const GateOp& op = gates_[g];
    for (std::size_t a = 0; a < op.targets.size(); ++a) {
      check_qubit(op.targets[a], num_qubits);
      for (std::size_t b = a + 1; b < op.targets.size(); ++b) {
        if (op.targets[a] == op.targets[b]) throw std::invalid_argument("gate targets not distinct");
      }
    }
    std::size_t expected_targets = 1;
    switch (op.kind) {
      case GateKind::CNOT:
      case GateKind::SWAP:
        expected_targets = 2;
        break;
      case GateKind::ConstantUnitary: {
        expected_targets = op.targets.size();
        if (!op.matrix) throw std::invalid_argument("constant gate without matrix");
        const auto d = static_cast<Eigen::Index>(dim_of(static_cast<int>(op.targets.size())));
        if (op.matrix->rows() != d || op.matrix->cols() != d) {
          throw std::invalid_argument("constant gate matrix does not match its target count");
        }
        if (!is_unitary(*op.matrix, 1e-10)) throw std::invalid_argument("constant gate not unitary");
        break;
      }
      case GateKind::PauliRotation: {
        if (op.param_index < 0 || op.param_index >= num_params) {
          throw std::invalid_argument("rotation parameter index " + std::to_string(op.param_index) +
                                      " outside [0, " + std::to_string(num_params) + ")");
        }
        auto& slot = param_gate_[static_cast<std::size_t>(op.param_index)];
        if (slot != -1) {
          throw std::invalid_argument("parameter " + std::to_string(op.param_index) +
                                      " used by more than one gate");
        }
        slot = static_cast<int>(g);
        break;
      }
      default:
        break;
    }
    if (op.targets.size() != expected_targets || op.targets.empty()) {
      throw std::invalid_argument("gate " + to_string(op.kind) + " has wrong target count");
    }
  }
}

CircuitBuilder& CircuitBuilder::h(int q) { return add(GateOp::h(q)); }
CircuitBuilder& CircuitBuilder::x(int q) { return add(GateOp::x(q)); }
CircuitBuilder& CircuitBuilder::z(int q) { return add(GateOp::z(q)); }
CircuitBuilder& CircuitBuilder::cnot(int c, int t) { return add(GateOp::cnot(c, t)); }
CircuitBuilder& CircuitBuilder::swap(int a, int b) { return add(GateOp::swap(a, b)); }

CircuitBuilder& CircuitBuilder::constant(Matrix m, std::vector<int> targets) {
  return add(GateOp::constant(std::move(m), std::move(targets)));
}

int CircuitBuilder::rotation(PauliAxis axis, int q) {
  const int index = num_params_++;
  gates_.push_back(GateOp::rotation(axis, q, index));
  return index;
}

CircuitBuilder& CircuitBuilder::general_single_qubit(int q) {
  rotation(PauliAxis::Z, q);
  rotation(PauliAxis::Y, q);
  rotation(PauliAxis::Z, q);
  return *this;
}

CircuitBuilder& CircuitBuilder::append(const Circuit& other, std::span<const int> qubit_map) {
  if (qubit_map.size() != static_cast<std::size_t>(other.num_qubits())) {
    throw std::invalid_argument("qubit map size does not match appended circuit");
  }
  const int offset = num_params_;
  for (const GateOp& g : other.gates()) {
    GateOp copy = g;
    for (int& t : copy.targets) t = qubit_map[static_cast<std::size_t>(t)];
    if (copy.is_parameterized()) copy.param_index += offset;
    gates_.push_back(std::move(copy));
  }
  num_params_ += other.num_params();
  return *this;
}

CircuitBuilder& CircuitBuilder::append(const Circuit& other) {
  std::vector<int> identity(static_cast<std::size_t>(other.num_qubits()));
  for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = static_cast<int>(i);
  return append(other, identity);
}

CircuitBuilder& CircuitBuilder::add(GateOp gate) {
  if (gate.is_parameterized()) num_params_ = std::max(num_params_, gate.param_index + 1);
  gates_.push_back(std::move(gate));
  return *this;
}

CircuitBuilder& CircuitBuilder::reserve_params(int count) {
  num_params_ = std::max(num_params_, count);
  return *this;
}

Circuit CircuitBuilder::build() const { return Circuit(num_qubits_, gates_, num_params_); }

DoubledBinding DoubledBinding::shifted(ParamVector base, ShiftCopy copy, std::size_t index,
                                       double amount) {
  DoubledBinding b;
  b.base = std::move(base);
  b.shift_copy = copy;
  b.shift_index = index;
  b.shift_amount = amount;
  if (copy != ShiftCopy::None && index >= b.base.size()) {
    throw std::invalid_argument("shift index outside parameter vector");
  }
  return b;
}

void check_params(const Circuit& circuit, std::span<const double> params) {
  if (params.size() != static_cast<std::size_t>(circuit.num_params())) {
    throw std::invalid_argument("parameter vector has length " + std::to_string(params.size()) +
                                ", circuit expects " + std::to_string(circuit.num_params()));
  }
}

void apply_gate(std::span<Complex> amps, int num_qubits, const GateOp& gate,
                std::span<const double> params) {
  switch (gate.kind) {
    case GateKind::H: {
      const double s = 1.0 / std::numbers::sqrt2;
      apply_one_qubit(amps, num_qubits, gate.targets[0], s, s, s, -s);
      return;
    }
    case GateKind::X: {
      const std::size_t stride = std::size_t{1} << bit_position(num_qubits, gate.targets[0]);
      for (std::size_t i = 0; i < amps.size(); ++i) {
        if (!(i & stride)) std::swap(amps[i], amps[i | stride]);
      }
      return;
    }
    case GateKind::Z: {
      const std::size_t mask = std::size_t{1} << bit_position(num_qubits, gate.targets[0]);
      for (std::size_t i = 0; i < amps.size(); ++i) {
        if (i & mask) amps[i] = -amps[i];
      }
      return;
    }
    case GateKind::CNOT: {
      const std::size_t c = std::size_t{1} << bit_position(num_qubits, gate.targets[0]);
      const std::size_t t = std::size_t{1} << bit_position(num_qubits, gate.targets[1]);
      for (std::size_t i = 0; i < amps.size(); ++i) {
        if ((i & c) && !(i & t)) std::swap(amps[i], amps[i | t]);
      }
      return;
    }
    case GateKind::SWAP: {
      const std::size_t a = std::size_t{1} << bit_position(num_qubits, gate.targets[0]);
      const std::size_t b = std::size_t{1} << bit_position(num_qubits, gate.targets[1]);
      for (std::size_t i = 0; i < amps.size(); ++i) {
        if ((i & a) && !(i & b)) std::swap(amps[i], amps[(i & ~a) | b]);
      }
      return;
    }
    case GateKind::ConstantUnitary:
      apply_local(amps, num_qubits, gate.targets, *gate.matrix);
      return;
    case GateKind::PauliRotation: {
      const double angle = gate.sign * params[static_cast<std::size_t>(gate.param_index)];
      const double c = std::cos(angle / 2.0);
      const double s = std::sin(angle / 2.0);
      const int q = gate.targets[0];
      switch (gate.axis) {
        case PauliAxis::X:
          apply_one_qubit(amps, num_qubits, q, c, -kI * s, -kI * s, c);
          return;
        case PauliAxis::Y:
          apply_one_qubit(amps, num_qubits, q, c, -s, s, c);
          return;
        case PauliAxis::Z: {
          const std::size_t mask = std::size_t{1} << bit_position(num_qubits, q);
          const Complex lo(c, -s);
          const Complex hi(c, s);
          for (std::size_t i = 0; i < amps.size(); ++i) amps[i] *= (i & mask) ? hi : lo;
          return;
        }
      }
    }
  }
}

void apply_in_place(const Circuit& circuit, std::span<const double> params, Vector& amplitudes) {
  check_params(circuit, params);
  if (static_cast<std::size_t>(amplitudes.size()) != dim_of(circuit.num_qubits())) {
    throw std::invalid_argument("state width does not match circuit");
  }
  std::span<Complex> view(amplitudes.data(), static_cast<std::size_t>(amplitudes.size()));
  for (const GateOp& g : circuit.gates()) apply_gate(view, circuit.num_qubits(), g, params);
}

PureState apply(const Circuit& circuit, std::span<const double> params, const PureState& state) {
  if (state.num_qubits() != circuit.num_qubits()) {
    throw std::invalid_argument("state width does not match circuit");
  }
  Vector amps = state.amplitudes();
  apply_in_place(circuit, params, amps);
  return PureState(state.num_qubits(), std::move(amps));
}

DensityOperator apply_density(const Circuit& circuit, std::span<const double> params,
                              const DensityOperator& rho) {
  check_params(circuit, params);
  if (rho.num_qubits() != circuit.num_qubits()) {
    throw std::invalid_argument("density operator width does not match circuit");
  }
  const int n = circuit.num_qubits();
  const auto rows = static_cast<std::size_t>(rho.matrix().rows());
  Matrix m = rho.matrix();
  auto apply_columns = [&](Matrix& target) {
    for (Eigen::Index c = 0; c < target.cols(); ++c) {
      std::span<Complex> col(target.col(c).data(), rows);
      for (const GateOp& g : circuit.gates()) apply_gate(col, n, g, params);
    }
  };
  // U rho U^dagger = (U (U rho)^dagger)^dagger
  apply_columns(m);
  m.adjointInPlace();
  apply_columns(m);
  m.adjointInPlace();
  m = 0.5 * (m + m.adjoint()).eval();
  return DensityOperator(n, std::move(m));
}

Matrix circuit_matrix(const Circuit& circuit, std::span<const double> params) {
  check_params(circuit, params);
  const int n = circuit.num_qubits();
  const auto d = static_cast<Eigen::Index>(dim_of(n));
  Matrix u = Matrix::Identity(d, d);
  for (Eigen::Index c = 0; c < d; ++c) {
    std::span<Complex> col(u.col(c).data(), static_cast<std::size_t>(d));
    for (const GateOp& g : circuit.gates()) apply_gate(col, n, g, params);
  }
  return u;
}

UnitaryMatrix to_unitary(const Circuit& circuit, std::span<const double> params) {
  return UnitaryMatrix(circuit.num_qubits(), circuit_matrix(circuit, params));
}

Circuit dagger(const Circuit& circuit, std::span<const double> params) {
  check_params(circuit, params);
  std::vector<GateOp> gates;
  gates.reserve(circuit.gates().size());
  for (auto it = circuit.gates().rbegin(); it != circuit.gates().rend(); ++it) {
    if (it->is_parameterized()) {
      gates.push_back(GateOp::constant(it->local_matrix(params).adjoint(), it->targets));
    } else {
      gates.push_back(inverted_fixed(*it));
    }
  }
  return Circuit(circuit.num_qubits(), std::move(gates), 0);
}

Circuit bind_parameters(const Circuit& circuit, std::span<const double> params) {
  check_params(circuit, params);
  std::vector<GateOp> gates;
  gates.reserve(circuit.gates().size());
  for (const GateOp& g : circuit.gates()) {
    gates.push_back(g.is_parameterized() ? GateOp::constant(g.local_matrix(params), g.targets) : g);
  }
  return Circuit(circuit.num_qubits(), std::move(gates), 0);
}

Circuit adjoint(const Circuit& circuit) {
  std::vector<GateOp> gates;
  gates.reserve(circuit.gates().size());
  for (auto it = circuit.gates().rbegin(); it != circuit.gates().rend(); ++it) {
    if (it->is_parameterized()) {
      GateOp g = *it;
      g.sign = -g.sign;
      gates.push_back(std::move(g));
    } else {
      gates.push_back(inverted_fixed(*it));
    }
  }
  return Circuit(circuit.num_qubits(), std::move(gates), circuit.num_params());
}

Circuit embed(const Circuit& circuit, std::span<const int> qubit_map, int num_qubits,
              int param_offset, int num_params) {
  if (qubit_map.size() != static_cast<std::size_t>(circuit.num_qubits())) {
    throw std::invalid_argument("qubit map size does not match circuit width");
  }
  std::vector<GateOp> gates;
  gates.reserve(circuit.gates().size());
  for (const GateOp& g : circuit.gates()) {
    GateOp copy = g;
    for (int& t : copy.targets) t = qubit_map[static_cast<std::size_t>(t)];
    if (copy.is_parameterized()) copy.param_index += param_offset;
    gates.push_back(std::move(copy));
  }
  return Circuit(num_qubits, std::move(gates), num_params);
}

Circuit universal_two_qubit_ansatz() {
  // General local layer, three alternating CNOTs with the canonical-part
  // rotations in between, general local layer: 15 parameters.
  CircuitBuilder b(2);
  b.general_single_qubit(0).general_single_qubit(1);
  b.cnot(1, 0);
  b.rotation(PauliAxis::Z, 0);
  b.rotation(PauliAxis::Y, 1);
  b.cnot(0, 1);
  b.rotation(PauliAxis::Y, 1);
  b.cnot(1, 0);
  b.general_single_qubit(0).general_single_qubit(1);
  return b.build();
}

Circuit layered_ansatz(int num_qubits, int layers) {
  if (num_qubits < 2) throw std::invalid_argument("layered_ansatz needs at least 2 qubits");
  if (layers < 1) throw std::invalid_argument("layered_ansatz needs at least 1 layer");
  CircuitBuilder b(num_qubits);
  for (int layer = 0; layer < layers; ++layer) {
    for (int q = 0; q < num_qubits; ++q) b.general_single_qubit(q);
    for (int q = 0; q + 1 < num_qubits; ++q) b.cnot(q, q + 1);
  }
  for (int q = 0; q < num_qubits; ++q) b.general_single_qubit(q);
  return b.build();
}

Circuit single_qubit_ansatz() {
  CircuitBuilder b(1);
  b.general_single_qubit(0);
  return b.build();
}

Circuit sandwich(const UnitaryMatrix& target, const Circuit& v0, const Circuit& v1) {
  const int n = target.num_qubits();
  if (v0.num_qubits() != n || v1.num_qubits() != n) {
    throw std::invalid_argument("sandwich blocks must share the target's register width");
  }
  std::vector<int> all(static_cast<std::size_t>(n));
  for (int q = 0; q < n; ++q) all[static_cast<std::size_t>(q)] = q;
  const Circuit v0_inv = adjoint(v0);
  const Circuit v1_inv = adjoint(v1);

  std::vector<GateOp> gates;
  for (const GateOp& g : v0_inv.gates()) gates.push_back(g);
  gates.push_back(GateOp::constant(target.matrix(), all));
  for (GateOp g : v1_inv.gates()) {
    if (g.is_parameterized()) g.param_index += v0.num_params();
    gates.push_back(std::move(g));
  }
  return Circuit(n, std::move(gates), v0.num_params() + v1.num_params());
}

Circuit doubled_circuit(const Circuit& w) {
  const int n = w.num_qubits();
  const int k = w.num_params();
  std::vector<int> alpha(static_cast<std::size_t>(n));
  std::vector<int> beta(static_cast<std::size_t>(n));
  for (int q = 0; q < n; ++q) {
    alpha[static_cast<std::size_t>(q)] = q;
    beta[static_cast<std::size_t>(q)] = n + q;
  }
  CircuitBuilder b(2 * n);
  b.append(w, alpha);
  b.append(w, beta);
  b.reserve_params(2 * k);
  return b.build();
}

ParamVector expand(const DoubledBinding& binding, int num_params) {
  if (binding.base.size() != static_cast<std::size_t>(num_params)) {
    throw std::invalid_argument("binding length does not match circuit parameter count");
  }
  ParamVector out(2 * binding.base.size());
  std::copy(binding.base.begin(), binding.base.end(), out.begin());
  std::copy(binding.base.begin(), binding.base.end(), out.begin() + num_params);
  if (binding.shift_copy != ShiftCopy::None) {
    if (binding.shift_index >= binding.base.size()) {
      throw std::invalid_argument("shift index outside parameter vector");
    }
    const std::size_t slot = binding.shift_index +
                             (binding.shift_copy == ShiftCopy::Beta ? binding.base.size() : 0);
    out[slot] += binding.shift_amount;
  }
  return out;
}

RotationShiftCache::RotationShiftCache(const Circuit& circuit, std::span<const double> params)
    : num_qubits_(circuit.num_qubits()) {
  check_params(circuit, params);
  const auto d = static_cast<Eigen::Index>(dim_of(num_qubits_));
  sites_.resize(static_cast<std::size_t>(circuit.num_params()));
  prefix_.resize(static_cast<std::size_t>(circuit.num_params()));
  Matrix running = Matrix::Identity(d, d);
  for (const GateOp& g : circuit.gates()) {
    if (g.is_parameterized()) {
      const auto p = static_cast<std::size_t>(g.param_index);
      sites_[p] = Site{g.axis, g.targets[0], g.sign};
      prefix_[p] = running;
    }
    for (Eigen::Index c = 0; c < d; ++c) {
      apply_gate(std::span<Complex>(running.col(c).data(), static_cast<std::size_t>(d)), num_qubits_,
                 g, params);
    }
  }
  unitary_ = std::move(running);
}

const RotationShiftCache::Site& RotationShiftCache::site(std::size_t param) const {
  if (param >= sites_.size() || sites_[param].qubit < 0) {
    throw std::invalid_argument("parameter " + std::to_string(param) + " is not read by any rotation");
  }
  return sites_[param];
}

double RotationShiftCache::sign(std::size_t param) const { return site(param).sign; }

Matrix RotationShiftCache::conjugated_generator(std::size_t param) const {
  const Site& s = site(param);
  Matrix sigma_q = prefix_[param];
  const int target[1] = {s.qubit};
  apply_local_columns(sigma_q, num_qubits_, target, pauli_matrix(s.axis));
  return prefix_[param].adjoint() * sigma_q;
}

Matrix RotationShiftCache::shifted_unitary(std::size_t param, double shift) const {
  const Site& s = site(param);
  Matrix rq = prefix_[param];
  const int target[1] = {s.qubit};
  apply_local_columns(rq, num_qubits_, target, rotation_matrix(s.axis, s.sign * shift));
  return unitary_ * (prefix_[param].adjoint() * rq);
}

}  // namespace decoupler
