#include "decoupler/cost.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace decoupler {

namespace {

int bit_of(std::size_t index, int num_qubits, int qubit) {
  return static_cast<int>((index >> bit_position(num_qubits, qubit)) & 1U);
}

int qubits_for_dim(Eigen::Index dim) {
  int n = 0;
  while ((Eigen::Index{1} << n) < dim) ++n;
  if ((Eigen::Index{1} << n) != dim || n == 0) {
    throw std::invalid_argument("matrix dimension is not a power of two");
  }
  return n;
}

void require_same_shape(const Matrix& u, const Matrix& v) {
  if (u.rows() != v.rows() || u.cols() != v.cols() || u.rows() != u.cols()) {
    throw std::invalid_argument("unitaries have mismatched dimensions");
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<int> parse_int_list(const std::string& text, char sep) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    std::size_t used = 0;
    int value = 0;
    try {
      value = std::stoi(item, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad integer '" + item + "' in partition spec");
    }
    if (used != item.size()) throw std::invalid_argument("bad integer '" + item + "' in partition spec");
    out.push_back(value);
  }
  return out;
}

// Permutation of basis indices that exchanges qubit a[i] with b[i].
std::size_t swap_bits(std::size_t index, int num_qubits, std::span<const int> a, std::span<const int> b) {
  std::size_t out = index;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int pa = bit_position(num_qubits, a[i]);
    const int pb = bit_position(num_qubits, b[i]);
    const std::size_t ba = (index >> pa) & 1U;
    const std::size_t bb = (index >> pb) & 1U;
    out &= ~((std::size_t{1} << pa) | (std::size_t{1} << pb));
    out |= (ba << pb) | (bb << pa);
  }
  return out;
}

struct BlockPairing {
  std::vector<int> alpha;
  std::vector<int> beta;
};

BlockPairing pairing_for(const std::vector<int>& block, int num_qubits) {
  BlockPairing p;
  for (int q : block) {
    p.alpha.push_back(q);
    p.beta.push_back(num_qubits + q);
  }
  return p;
}

// prod_k (I + S_k) / (d_k^2 + d_k) on the doubled register.
Matrix symmetric_input(const Partition& partition) {
  const int n = partition.num_qubits();
  const int total = 2 * n;
  const auto dim = static_cast<Eigen::Index>(dim_of(total));
  const std::size_t num_blocks = partition.blocks().size();
  double denom = 1.0;
  std::vector<BlockPairing> pairs;
  for (const auto& b : partition.blocks()) {
    const double dk = static_cast<double>(dim_of(static_cast<int>(b.size())));
    denom *= dk * dk + dk;
    pairs.push_back(pairing_for(b, n));
  }
  Matrix rho = Matrix::Zero(dim, dim);
  for (std::size_t subset = 0; subset < (std::size_t{1} << num_blocks); ++subset) {
    std::vector<int> a;
    std::vector<int> b;
    for (std::size_t k = 0; k < num_blocks; ++k) {
      if (subset & (std::size_t{1} << k)) {
        a.insert(a.end(), pairs[k].alpha.begin(), pairs[k].alpha.end());
        b.insert(b.end(), pairs[k].beta.begin(), pairs[k].beta.end());
      }
    }
    for (Eigen::Index i = 0; i < dim; ++i) {
      const auto j = static_cast<Eigen::Index>(swap_bits(static_cast<std::size_t>(i), total, a, b));
      rho(j, i) += 1.0 / denom;
    }
  }
  return rho;
}

CostEstimate finalize_exact(double mean_swap, const Partition& partition, bool shared) {
  CostEstimate est;
  est.value = norm_factor(partition) * (1.0 - mean_swap);
  if (!std::isfinite(est.value)) throw NumericalError("decoupling cost is not finite");
  if (shared) {
    if (est.value < -1e-10 || est.value > 1.0 + 1e-10) {
      throw NumericalError("decoupling cost " + std::to_string(est.value) + " outside [0, 1]");
    }
    est.value = std::clamp(est.value, 0.0, 1.0);
  }
  return est;
}

bool is_shared(const DoubledBinding& b) {
  return b.shift_copy == ShiftCopy::None || b.shift_amount == 0.0;
}

std::uint64_t random_bits(Rng& rng, int count) {
  return count >= 64 ? rng() : (rng() & ((std::uint64_t{1} << count) - 1));
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Even-parity pair as two m-bit masks; bit (m-1-i) belongs to qubit i.
std::pair<std::uint64_t, std::uint64_t> draw_even_pair(int m, Rng& rng, int& attempts) {
  while (true) {
    ++attempts;
    const std::uint64_t z1 = random_bits(rng, m);
    const std::uint64_t z2 = random_bits(rng, m);
    if (std::popcount(z1 & z2) % 2 == 0) return {z1, z2};
  }
}

// Destructive swap test simulator with the exact outcome distribution
// memoized per input configuration.
class SwapTestSampler {
 public:
  SwapTestSampler(const Circuit& w, const DoubledBinding& binding, const Partition& partition)
      : n_(w.num_qubits()),
        partition_(partition),
        doubled_(doubled_circuit(w)),
        params_(expand(binding, w.num_params())) {
    partition.require_width(n_);
    for (const auto& b : partition.blocks()) {
      const int m = static_cast<int>(b.size());
      radix_.push_back(std::uint64_t{1} << (2 * m));
    }
  }

  // Returns the measured basis index on the 2n-qubit register.
  std::size_t shot(Rng& rng) {
    std::uint64_t key = 0;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> config;
    config.reserve(partition_.blocks().size());
    for (std::size_t k = 0; k < partition_.blocks().size(); ++k) {
      const int m = static_cast<int>(partition_.blocks()[k].size());
      int attempts = 0;
      const auto pair = draw_even_pair(m, rng, attempts);
      config.push_back(pair);
      key = key * radix_[k] + ((pair.first << m) | pair.second);
    }
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, distribution(config)).first;
    const std::vector<double>& cum = it->second;
    const double u = uniform01(rng) * cum.back();
    const auto pos = std::upper_bound(cum.begin(), cum.end(), u) - cum.begin();
    return std::min(static_cast<std::size_t>(pos), cum.size() - 1);
  }

  int num_qubits() const { return n_; }

 private:
  std::vector<double> distribution(const std::vector<std::pair<std::uint64_t, std::uint64_t>>& config) const {
    const int total = 2 * n_;
    std::size_t index = 0;
    for (std::size_t k = 0; k < config.size(); ++k) {
      const auto& block = partition_.blocks()[k];
      const int m = static_cast<int>(block.size());
      for (int j = 0; j < m; ++j) {
        const int q = block[static_cast<std::size_t>(j)];
        const std::size_t b1 = (config[k].first >> (m - 1 - j)) & 1U;
        const std::size_t b2 = (config[k].second >> (m - 1 - j)) & 1U;
        index |= b1 << bit_position(total, q);
        index |= b2 << bit_position(total, n_ + q);
      }
    }
    Vector amps = Vector::Zero(static_cast<Eigen::Index>(dim_of(total)));
    amps[static_cast<Eigen::Index>(index)] = 1.0;
    std::span<Complex> view(amps.data(), static_cast<std::size_t>(amps.size()));
    const std::vector<double> none;
    for (int q = 0; q < n_; ++q) {
      apply_gate(view, total, GateOp::h(n_ + q), none);
      apply_gate(view, total, GateOp::cnot(n_ + q, q), none);
    }
    for (const GateOp& g : doubled_.gates()) apply_gate(view, total, g, params_);
    for (int q = 0; q < n_; ++q) {
      apply_gate(view, total, GateOp::cnot(n_ + q, q), none);
      apply_gate(view, total, GateOp::h(n_ + q), none);
    }
    std::vector<double> cum(view.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < view.size(); ++i) {
      acc += std::norm(view[i]);
      cum[i] = acc;
    }
    return cum;
  }

  int n_;
  const Partition& partition_;
  Circuit doubled_;
  ParamVector params_;
  std::vector<std::uint64_t> radix_;
  std::map<std::uint64_t, std::vector<double>> cache_;
};

// Mean over scored blocks of prod_{q in block} (-1)^{a_q b_q}.
double shot_value(const Partition& partition, const std::vector<std::uint8_t>& z1,
                  const std::vector<std::uint8_t>& z2) {
  double sum = 0.0;
  for (int k : partition.scored()) {
    int parity = 0;
    for (int q : partition.blocks()[static_cast<std::size_t>(k)]) {
      parity ^= z1[static_cast<std::size_t>(q)] & z2[static_cast<std::size_t>(q)];
    }
    sum += parity ? -1.0 : 1.0;
  }
  return sum / static_cast<double>(partition.scored().size());
}

ShotRecord record_from_index(std::size_t index, int n) {
  ShotRecord r;
  r.z1.resize(static_cast<std::size_t>(n));
  r.z2.resize(static_cast<std::size_t>(n));
  for (int q = 0; q < n; ++q) {
    r.z1[static_cast<std::size_t>(q)] = static_cast<std::uint8_t>(bit_of(index, 2 * n, q));
    r.z2[static_cast<std::size_t>(q)] = static_cast<std::uint8_t>(bit_of(index, 2 * n, n + q));
  }
  return r;
}

CostEstimate estimate_from_values(double sum, double sum_sq, long shots, const Partition& partition) {
  const double count = static_cast<double>(shots);
  const double mean = sum / count;
  double var = 0.0;
  if (shots > 1) var = std::max(0.0, (sum_sq - count * mean * mean) / (count - 1.0));
  const double norm = norm_factor(partition);
  CostEstimate est;
  est.value = norm * (1.0 - mean);
  est.std_error = norm * std::sqrt(var / count);
  est.shots_used = shots;
  if (!std::isfinite(est.value)) throw NumericalError("sampled decoupling cost is not finite");
  return est;
}

}  // namespace

Partition::Partition(std::vector<std::vector<int>> blocks, std::vector<int> scored)
    : blocks_(std::move(blocks)), scored_(std::move(scored)) {
  if (blocks_.empty()) throw std::invalid_argument("partition has no blocks");
  int count = 0;
  for (auto& b : blocks_) {
    if (b.empty()) throw std::invalid_argument("partition block is empty");
    std::sort(b.begin(), b.end());
    count += static_cast<int>(b.size());
  }
  validate_qubit_count(count);
  num_qubits_ = count;
  owner_.assign(static_cast<std::size_t>(count), -1);
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    for (int q : blocks_[k]) {
      if (q < 0 || q >= count) {
        throw std::invalid_argument("partition qubit " + std::to_string(q) + " outside register of " +
                                    std::to_string(count));
      }
      if (owner_[static_cast<std::size_t>(q)] != -1) {
        throw std::invalid_argument("partition blocks overlap at qubit " + std::to_string(q));
      }
      owner_[static_cast<std::size_t>(q)] = static_cast<int>(k);
    }
  }
  if (scored_.empty()) {
    for (std::size_t k = 0; k < blocks_.size(); ++k) scored_.push_back(static_cast<int>(k));
  }
  std::sort(scored_.begin(), scored_.end());
  if (std::adjacent_find(scored_.begin(), scored_.end()) != scored_.end()) {
    throw std::invalid_argument("scored block listed twice");
  }
  for (int k : scored_) {
    if (k < 0 || k >= static_cast<int>(blocks_.size())) {
      throw std::invalid_argument("scored block index " + std::to_string(k) + " out of range");
    }
  }
}

Partition Partition::parse(const std::string& spec) {
  std::string body = spec;
  std::vector<int> scored;
  const auto at = spec.find('@');
  if (at != std::string::npos) {
    body = spec.substr(0, at);
    scored = parse_int_list(spec.substr(at + 1), ',');
    if (scored.empty()) throw std::invalid_argument("empty scored list in partition spec");
  }
  std::vector<std::vector<int>> blocks;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ';')) blocks.push_back(parse_int_list(item, ','));
  if (blocks.empty()) throw std::invalid_argument("empty partition spec");
  return Partition(std::move(blocks), std::move(scored));
}

Partition Partition::singletons(int num_qubits) {
  std::vector<std::vector<int>> blocks;
  for (int q = 0; q < num_qubits; ++q) blocks.push_back({q});
  return Partition(std::move(blocks));
}

int Partition::min_scored_block_size() const {
  int m = kMaxQubits + 1;
  for (int k : scored_) m = std::min(m, static_cast<int>(blocks_[static_cast<std::size_t>(k)].size()));
  return m;
}

bool Partition::refines(const Partition& coarser) const {
  if (coarser.num_qubits() != num_qubits_) return false;
  for (const auto& b : blocks_) {
    const int owner = coarser.block_of(b.front());
    for (int q : b) {
      if (coarser.block_of(q) != owner) return false;
    }
  }
  return true;
}

void Partition::require_width(int num_qubits) const {
  if (num_qubits != num_qubits_) {
    throw std::invalid_argument("partition covers " + std::to_string(num_qubits_) +
                                " qubits, circuit has " + std::to_string(num_qubits));
  }
}

std::string Partition::to_string() const {
  std::string out;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    if (k) out += ';';
    for (std::size_t i = 0; i < blocks_[k].size(); ++i) {
      if (i) out += ',';
      out += std::to_string(blocks_[k][i]);
    }
  }
  if (scored_.size() != blocks_.size()) {
    out += '@';
    for (std::size_t i = 0; i < scored_.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(scored_[i]);
    }
  }
  return out;
}

nlohmann::json CostEstimate::to_json() const {
  return {{"value", value}, {"std_error", std_error}, {"shots_used", shots_used}};
}

double gate_fidelity(const Matrix& u, const Matrix& v) {
  require_same_shape(u, v);
  const double d = static_cast<double>(u.rows());
  const Complex t = (v.conjugate().cwiseProduct(u)).sum();
  return 1.0 / (d + 1.0) + std::norm(t) / (d * (d + 1.0));
}

double gate_fidelity(const UnitaryMatrix& u, const UnitaryMatrix& v) {
  return gate_fidelity(u.matrix(), v.matrix());
}

double hst_cost(const Matrix& u, const Matrix& v) {
  require_same_shape(u, v);
  const double d = static_cast<double>(u.rows());
  const Complex t = (v.conjugate().cwiseProduct(u)).sum();
  return std::max(0.0, 1.0 - std::norm(t) / (d * d));
}

double hst_cost(const UnitaryMatrix& u, const UnitaryMatrix& v) { return hst_cost(u.matrix(), v.matrix()); }

Vector choi_vector(const Matrix& m) {
  const int n = qubits_for_dim(m.rows());
  const Eigen::Index d = m.rows();
  Vector chi(d * d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) chi[(i << n) | j] = m(i, j) * scale;
  }
  return chi;
}

double local_bell_overlap(const Vector& chi, int num_qubits) {
  const int total = 2 * num_qubits;
  double acc = 0.0;
  for (int q = 0; q < num_qubits; ++q) {
    const Eigen::Index ma = Eigen::Index{1} << bit_position(total, q);
    const Eigen::Index mb = Eigen::Index{1} << bit_position(total, num_qubits + q);
    for (Eigen::Index j = 0; j < chi.size(); ++j) {
      if (j & (ma | mb)) continue;
      acc += 0.5 * std::norm(chi[j] + chi[j | ma | mb]);
    }
  }
  return acc / num_qubits;
}

Vector apply_local_bell_projector(const Vector& chi, int num_qubits) {
  const int total = 2 * num_qubits;
  Vector out = Vector::Zero(chi.size());
  for (int q = 0; q < num_qubits; ++q) {
    const Eigen::Index ma = Eigen::Index{1} << bit_position(total, q);
    const Eigen::Index mb = Eigen::Index{1} << bit_position(total, num_qubits + q);
    for (Eigen::Index j = 0; j < chi.size(); ++j) {
      if (j & (ma | mb)) continue;
      const Complex half = 0.5 * (chi[j] + chi[j | ma | mb]);
      out[j] += half;
      out[j | ma | mb] += half;
    }
  }
  return out / static_cast<double>(num_qubits);
}

double lhst_cost(const Matrix& u, const Matrix& v) {
  require_same_shape(u, v);
  const int n = qubits_for_dim(u.rows());
  const Vector chi = choi_vector(v.adjoint() * u);
  return std::max(0.0, 1.0 - local_bell_overlap(chi, n));
}

double lhst_cost(const UnitaryMatrix& u, const UnitaryMatrix& v) { return lhst_cost(u.matrix(), v.matrix()); }

Matrix pair_swap_operator(int num_qubits, std::span<const int> a, std::span<const int> b) {
  validate_qubit_count(num_qubits);
  if (a.size() != b.size()) throw std::invalid_argument("swap pairs have unequal lengths");
  const auto dim = static_cast<Eigen::Index>(dim_of(num_qubits));
  Matrix s = Matrix::Zero(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    s(static_cast<Eigen::Index>(swap_bits(static_cast<std::size_t>(i), num_qubits, a, b)), i) = 1.0;
  }
  return s;
}

Matrix swap_operator(int m) {
  if (m < 1) throw std::invalid_argument("swap_operator needs m >= 1");
  std::vector<int> a(static_cast<std::size_t>(m));
  std::vector<int> b(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    a[static_cast<std::size_t>(i)] = i;
    b[static_cast<std::size_t>(i)] = m + i;
  }
  return pair_swap_operator(2 * m, a, b);
}

DensityOperator symmetric_tau(int m) {
  if (m < 1) throw std::invalid_argument("symmetric_tau needs m >= 1");
  const double d = static_cast<double>(dim_of(m));
  const auto dim = static_cast<Eigen::Index>(dim_of(2 * m));
  Matrix tau = (Matrix::Identity(dim, dim) + swap_operator(m)) / (d * d + d);
  return DensityOperator(2 * m, std::move(tau));
}

SymmetricPair sample_symmetric_pair(int m, Rng& rng) {
  if (m < 1 || m > kMaxQubits) throw std::invalid_argument("sample_symmetric_pair needs 1 <= m <= 12");
  SymmetricPair out;
  const auto [z1, z2] = draw_even_pair(m, rng, out.attempts);
  for (int i = 0; i < m; ++i) {
    out.z1.push_back(static_cast<std::uint8_t>((z1 >> (m - 1 - i)) & 1U));
    out.z2.push_back(static_cast<std::uint8_t>((z2 >> (m - 1 - i)) & 1U));
  }
  return out;
}

PureState prepare_bell_pair_state(std::span<const std::uint8_t> z1, std::span<const std::uint8_t> z2) {
  if (z1.size() != z2.size() || z1.empty()) {
    throw std::invalid_argument("bit strings must be nonempty and of equal length");
  }
  const int m = static_cast<int>(z1.size());
  std::uint64_t index = 0;
  for (int i = 0; i < m; ++i) {
    if (z1[static_cast<std::size_t>(i)] > 1 || z2[static_cast<std::size_t>(i)] > 1) {
      throw std::invalid_argument("bit strings must hold 0/1 entries");
    }
    index |= std::uint64_t{z1[static_cast<std::size_t>(i)]} << bit_position(2 * m, i);
    index |= std::uint64_t{z2[static_cast<std::size_t>(i)]} << bit_position(2 * m, m + i);
  }
  CircuitBuilder b(2 * m);
  for (int i = 0; i < m; ++i) b.h(m + i);
  for (int i = 0; i < m; ++i) b.cnot(m + i, i);
  return apply(b.build(), {}, PureState::basis(2 * m, index));
}

Matrix pauli_transpose(const Matrix& rho, int num_qubits) {
  const auto dim = static_cast<Eigen::Index>(dim_of(num_qubits));
  if (rho.rows() != dim || rho.cols() != dim) throw std::invalid_argument("operator width mismatch");
  const Matrix x = pauli_matrix(PauliAxis::X);
  const Matrix z = pauli_matrix(PauliAxis::Z);
  const Matrix id = Matrix::Identity(2, 2);
  Matrix out = Matrix::Zero(dim, dim);
  for (std::size_t z1 = 0; z1 < dim_of(num_qubits); ++z1) {
    for (std::size_t z2 = 0; z2 < dim_of(num_qubits); ++z2) {
      Matrix s = Matrix::Identity(1, 1);
      for (int q = 0; q < num_qubits; ++q) {
        const int p = bit_position(num_qubits, q);
        const Matrix xs = ((z1 >> p) & 1U) ? x : id;
        const Matrix zs = ((z2 >> p) & 1U) ? z : id;
        s = kron(s, xs * zs);
      }
      const double sign = std::popcount(z1 & z2) % 2 ? -1.0 : 1.0;
      out += sign * s * rho * s.adjoint();
    }
  }
  return out / static_cast<double>(dim);
}

double norm_factor(const Partition& partition) {
  const double q = std::pow(4.0, partition.min_scored_block_size());
  return q / (q - 1.0);
}

CostEstimate decoupling_cost_exact(const Circuit& w, std::span<const double> params,
                                   const Partition& partition) {
  return decoupling_cost_exact_doubled(w, DoubledBinding::shared(ParamVector(params.begin(), params.end())),
                               partition);
}

CostEstimate decoupling_cost_exact_doubled(const Circuit& w, const DoubledBinding& binding,
                                   const Partition& partition) {
  partition.require_width(w.num_qubits());
  const int n = w.num_qubits();
  const int total = 2 * n;
  const Circuit doubled = doubled_circuit(w);
  const ParamVector params = expand(binding, w.num_params());
  const DensityOperator rho_in(total, symmetric_input(partition));
  const DensityOperator rho_out = apply_density(doubled, params, rho_in);
  const Matrix& rho = rho_out.matrix();

  double mean = 0.0;
  for (int k : partition.scored()) {
    const BlockPairing p = pairing_for(partition.blocks()[static_cast<std::size_t>(k)], n);
    double expectation = 0.0;
    for (Eigen::Index i = 0; i < rho.rows(); ++i) {
      const auto j = static_cast<Eigen::Index>(swap_bits(static_cast<std::size_t>(i), total, p.alpha, p.beta));
      expectation += rho(j, i).real();
    }
    mean += expectation;
  }
  mean /= static_cast<double>(partition.scored().size());
  return finalize_exact(mean, partition, is_shared(binding));
}

SwapContraction::SwapContraction(int num_qubits, const Partition& partition)
    : num_qubits_(num_qubits), norm_(norm_factor(partition)) {
  partition.require_width(num_qubits);
  const int total = 2 * num_qubits;
  const double d = static_cast<double>(dim_of(num_qubits));
  double denom = 1.0;
  for (const auto& b : partition.blocks()) {
    const double dk = static_cast<double>(dim_of(static_cast<int>(b.size())));
    denom *= dk * dk + dk;
  }
  const double weight = d * d / (denom * static_cast<double>(partition.scored().size()));
  const std::size_t num_blocks = partition.blocks().size();

  std::map<std::vector<int>, double> merged;
  for (int k : partition.scored()) {
    for (std::size_t subset = 0; subset < (std::size_t{1} << num_blocks); ++subset) {
      std::set<int> keep(partition.blocks()[static_cast<std::size_t>(k)].begin(),
                         partition.blocks()[static_cast<std::size_t>(k)].end());
      for (std::size_t b = 0; b < num_blocks; ++b) {
        if (!(subset & (std::size_t{1} << b))) continue;
        for (int q : partition.blocks()[b]) keep.insert(num_qubits + q);
      }
      merged[std::vector<int>(keep.begin(), keep.end())] += weight;
    }
  }

  for (const auto& [keep, w] : merged) {
    std::vector<int> traced;
    for (int q = 0; q < total; ++q) {
      if (!std::binary_search(keep.begin(), keep.end(), q)) traced.push_back(q);
    }
    const auto dk = static_cast<Eigen::Index>(dim_of(static_cast<int>(keep.size())));
    const auto dt = static_cast<Eigen::Index>(dim_of(static_cast<int>(traced.size())));
    Term t;
    t.weight = w;
    t.index_map.resize(dk, dt);
    for (Eigen::Index r = 0; r < dk; ++r) {
      Eigen::Index base = 0;
      for (std::size_t i = 0; i < keep.size(); ++i) {
        const Eigen::Index bit = (r >> (keep.size() - 1 - i)) & 1;
        base |= bit << bit_position(total, keep[i]);
      }
      for (Eigen::Index c = 0; c < dt; ++c) {
        Eigen::Index idx = base;
        for (std::size_t i = 0; i < traced.size(); ++i) {
          const Eigen::Index bit = (c >> (traced.size() - 1 - i)) & 1;
          idx |= bit << bit_position(total, traced[i]);
        }
        t.index_map(r, c) = idx;
      }
    }
    terms_.push_back(std::move(t));
  }
}

Matrix SwapContraction::gather(const Vector& v, const Term& t) const {
  Matrix a(t.index_map.rows(), t.index_map.cols());
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    for (Eigen::Index r = 0; r < a.rows(); ++r) a(r, c) = v[t.index_map(r, c)];
  }
  return a;
}

SwapContraction::Bound SwapContraction::bind(const Vector& chi) const {
  Bound b;
  b.owner_ = this;
  b.reduced_.reserve(terms_.size());
  for (const Term& t : terms_) {
    const Matrix a = gather(chi, t);
    b.reduced_.push_back(t.weight * (a * a.adjoint()));
  }
  return b;
}

Vector SwapContraction::Bound::apply(const Vector& v) const {
  Vector out = Vector::Zero(v.size());
  for (std::size_t i = 0; i < reduced_.size(); ++i) {
    const Term& t = owner_->terms_[i];
    const Matrix prod = reduced_[i] * owner_->gather(v, t);
    for (Eigen::Index c = 0; c < prod.cols(); ++c) {
      for (Eigen::Index r = 0; r < prod.rows(); ++r) out[t.index_map(r, c)] += prod(r, c);
    }
  }
  return out;
}

double SwapContraction::Bound::quad(const Vector& v) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < reduced_.size(); ++i) {
    const Matrix a = owner_->gather(v, owner_->terms_[i]);
    acc += (a.adjoint() * reduced_[i] * a).trace().real();
  }
  return acc;
}

double decoupling_cost_choi(const Matrix& w_alpha, const Matrix& w_beta, const Partition& partition) {
  require_same_shape(w_alpha, w_beta);
  const int n = qubits_for_dim(w_alpha.rows());
  const SwapContraction form(n, partition);
  const double mean = form.bind(choi_vector(w_beta)).quad(choi_vector(w_alpha));
  return form.norm() * (1.0 - mean);
}

std::vector<ShotRecord> sample_shot_records(const Circuit& w, const DoubledBinding& binding,
                                            const Partition& partition, long shots, Rng& rng) {
  if (shots < 1) throw std::invalid_argument("shots must be at least 1");
  SwapTestSampler sampler(w, binding, partition);
  std::vector<ShotRecord> records;
  records.reserve(static_cast<std::size_t>(shots));
  for (long s = 0; s < shots; ++s) records.push_back(record_from_index(sampler.shot(rng), w.num_qubits()));
  return records;
}

CostEstimate estimate_from_records(const std::vector<ShotRecord>& records, const Partition& partition) {
  if (records.empty()) throw std::invalid_argument("no shot records");
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const ShotRecord& r : records) {
    if (r.z1.size() != static_cast<std::size_t>(partition.num_qubits()) || r.z2.size() != r.z1.size()) {
      throw std::invalid_argument("shot record width does not match partition");
    }
    const double y = shot_value(partition, r.z1, r.z2);
    sum += y;
    sum_sq += y * y;
  }
  return estimate_from_values(sum, sum_sq, static_cast<long>(records.size()), partition);
}

CostEstimate decoupling_cost_sampled(const Circuit& w, std::span<const double> params,
                                     const Partition& partition, long shots, Rng& rng) {
  return decoupling_cost_sampled_doubled(w, DoubledBinding::shared(ParamVector(params.begin(), params.end())),
                                 partition, shots, rng);
}

CostEstimate decoupling_cost_sampled_doubled(const Circuit& w, const DoubledBinding& binding,
                                     const Partition& partition, long shots, Rng& rng) {
  if (shots < 1) throw std::invalid_argument("shots must be at least 1");
  SwapTestSampler sampler(w, binding, partition);
  const int n = w.num_qubits();
  const int total = 2 * n;
  std::vector<std::vector<std::size_t>> masks;
  for (int k : partition.scored()) {
    std::vector<std::size_t> pair_masks;
    for (int q : partition.blocks()[static_cast<std::size_t>(k)]) {
      pair_masks.push_back((std::size_t{1} << bit_position(total, q)) |
                           (std::size_t{1} << bit_position(total, n + q)));
    }
    masks.push_back(std::move(pair_masks));
  }
  double sum = 0.0;
  double sum_sq = 0.0;
  for (long s = 0; s < shots; ++s) {
    const std::size_t outcome = sampler.shot(rng);
    double y = 0.0;
    for (const auto& block : masks) {
      int parity = 0;
      for (std::size_t m : block) parity ^= (outcome & m) == m ? 1 : 0;
      y += parity ? -1.0 : 1.0;
    }
    y /= static_cast<double>(masks.size());
    sum += y;
    sum_sq += y * y;
  }
  return estimate_from_values(sum, sum_sq, shots, partition);
}

CostEstimate decoupling_cost_mc(const Circuit& w, std::span<const double> params,
                                const Partition& partition, long samples, Rng& rng) {
  if (samples < 1) throw std::invalid_argument("samples must be at least 1");
  partition.require_width(w.num_qubits());
  check_params(w, params);
  const int n = w.num_qubits();
  const std::size_t dim = dim_of(n);
  const std::size_t num_blocks = partition.blocks().size();

  // local_index[k][i]: index of block k's bits within basis index i.
  std::vector<std::vector<std::size_t>> local_index(num_blocks, std::vector<std::size_t>(dim));
  for (std::size_t k = 0; k < num_blocks; ++k) {
    const auto& block = partition.blocks()[k];
    for (std::size_t i = 0; i < dim; ++i) {
      std::size_t li = 0;
      for (int q : block) li = (li << 1) | static_cast<std::size_t>(bit_of(i, n, q));
      local_index[k][i] = li;
    }
  }

  const double norm = norm_factor(partition);
  double sum = 0.0;
  double sum_sq = 0.0;
  std::vector<PureState> parts;
  Vector amps(static_cast<Eigen::Index>(dim));
  for (long s = 0; s < samples; ++s) {
    parts.clear();
    for (const auto& block : partition.blocks()) {
      parts.push_back(haar_random_state(static_cast<int>(block.size()), rng));
    }
    for (std::size_t i = 0; i < dim; ++i) {
      Complex a = 1.0;
      for (std::size_t k = 0; k < num_blocks; ++k) a *= parts[k][local_index[k][i]];
      amps[static_cast<Eigen::Index>(i)] = a;
    }
    apply_in_place(w, params, amps);
    double entropy = 0.0;
    for (int k : partition.scored()) {
      entropy += 1.0 - purity(reduced_density(amps, n, partition.blocks()[static_cast<std::size_t>(k)]));
    }
    const double x = norm * entropy / static_cast<double>(partition.scored().size());
    sum += x;
    sum_sq += x * x;
  }
  const double count = static_cast<double>(samples);
  const double mean = sum / count;
  double var = 0.0;
  if (samples > 1) var = std::max(0.0, (sum_sq - count * mean * mean) / (count - 1.0));
  CostEstimate est;
  est.value = mean;
  est.std_error = std::sqrt(var / count);
  est.shots_used = samples;
  return est;
}

double fidelity_upper_bound(double c_d, int num_qubits) {
  if (!(c_d >= -1e-9 && c_d <= 1.0 + 1e-9)) {
    throw std::invalid_argument("decoupling cost must lie in [0, 1]");
  }
  if (num_qubits < 1) throw std::invalid_argument("qubit count must be positive");
  return std::min(1.0 - c_d + 3.0 / (std::pow(2.0, num_qubits) + 1.0), 1.0);
}

}  // namespace decoupler
