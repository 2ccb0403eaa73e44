#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "decoupler/circuit.hpp"
#include "decoupler/statekit.hpp"

namespace decoupler {

/// Disjoint qubit blocks covering a register, plus the subset of blocks that
/// enter the cost. Blocks that are not scored still receive symmetric inputs.
class Partition {
 public:
  Partition() = default;
  /// An empty `scored` list means every block is scored.
  Partition(std::vector<std::vector<int>> blocks, std::vector<int> scored = {});

  /// "0,1;2,3" for blocks {0,1},{2,3}. An optional "@i,j" suffix selects the
  /// scored blocks by index, e.g. "0;1;2,3@0,1".
  static Partition parse(const std::string& spec);
  static Partition singletons(int num_qubits);

  int num_qubits() const { return num_qubits_; }
  const std::vector<std::vector<int>>& blocks() const { return blocks_; }
  const std::vector<int>& scored() const { return scored_; }
  int block_of(int qubit) const { return owner_[static_cast<std::size_t>(qubit)]; }
  int min_scored_block_size() const;

  /// Every block of *this lies inside one block of `coarser`.
  bool refines(const Partition& coarser) const;
  void require_width(int num_qubits) const;
  std::string to_string() const;

 private:
  int num_qubits_ = 0;
  std::vector<std::vector<int>> blocks_;
  std::vector<int> scored_;
  std::vector<int> owner_;
};

struct CostEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long shots_used = 0;

  nlohmann::json to_json() const;
};

/// Outcome bits of one destructive swap test: z1[q] from copy alpha and z2[q]
/// from copy beta for every register qubit q.
struct ShotRecord {
  std::vector<std::uint8_t> z1;
  std::vector<std::uint8_t> z2;
};

double gate_fidelity(const Matrix& u, const Matrix& v);
double gate_fidelity(const UnitaryMatrix& u, const UnitaryMatrix& v);
double hst_cost(const Matrix& u, const Matrix& v);
double hst_cost(const UnitaryMatrix& u, const UnitaryMatrix& v);
double lhst_cost(const Matrix& u, const Matrix& v);
double lhst_cost(const UnitaryMatrix& u, const UnitaryMatrix& v);

/// vec(M) / sqrt(d) with entry (i << n) | j = M(i, j): output qubits first,
/// reference qubits n..2n-1.
Vector choi_vector(const Matrix& m);

/// Mean over qubits i of <Phi+| rho_(i, n+i) |Phi+> for a Choi vector on 2n
/// qubits. lhst_cost(u, v) = 1 - local_bell_overlap(choi_vector(v^dagger u)).
double local_bell_overlap(const Vector& chi, int num_qubits);
/// (1/n) sum_i P_i applied to chi, P_i the Bell projector on pair (i, n+i).
Vector apply_local_bell_projector(const Vector& chi, int num_qubits);

/// Normalized projector onto the symmetric subspace of two m-qubit copies
/// (copy alpha on qubits 0..m-1, copy beta on m..2m-1).
DensityOperator symmetric_tau(int m);

/// Swap of qubits a[i] <-> b[i] on a register of `num_qubits`.
Matrix pair_swap_operator(int num_qubits, std::span<const int> a, std::span<const int> b);
/// Exchange of the two m-qubit copies on 2m qubits.
Matrix swap_operator(int m);

struct SymmetricPair {
  std::vector<std::uint8_t> z1;
  std::vector<std::uint8_t> z2;
  int attempts = 0;
};

/// Uniform draw over bit-string pairs with even z1 . z2, by rejection.
SymmetricPair sample_symmetric_pair(int m, Rng& rng);

/// From |z1>|z2>: H on each beta qubit, then CNOT beta -> paired alpha qubit.
PureState prepare_bell_pair_state(std::span<const std::uint8_t> z1, std::span<const std::uint8_t> z2);

/// 2^-n sum over (z1, z2) of (-1)^{z1.z2} s rho s with s = X^z1 Z^z2 per qubit.
Matrix pauli_transpose(const Matrix& rho, int num_qubits);

/// 4^m / (4^m - 1) with m the smallest scored block.
double norm_factor(const Partition& partition);

/// Density-matrix evaluation on the doubled register with symmetric inputs.
CostEstimate decoupling_cost_exact(const Circuit& w, std::span<const double> params,
                                   const Partition& partition);
/// Same with the copies bound separately (one parameter may be shifted in one
/// copy). Only shared bindings are range-checked and clamped.
CostEstimate decoupling_cost_exact_doubled(const Circuit& w, const DoubledBinding& binding,
                                   const Partition& partition);

/// Equivalent contraction over the Choi vectors of the two copies.
double decoupling_cost_choi(const Matrix& w_alpha, const Matrix& w_beta, const Partition& partition);

/// Destructive swap test estimator. Every scored block is read from the same
/// shots.
CostEstimate decoupling_cost_sampled(const Circuit& w, std::span<const double> params,
                                     const Partition& partition, long shots, Rng& rng);
CostEstimate decoupling_cost_sampled_doubled(const Circuit& w, const DoubledBinding& binding,
                                     const Partition& partition, long shots, Rng& rng);

/// Raw measurement records of the destructive swap test.
std::vector<ShotRecord> sample_shot_records(const Circuit& w, const DoubledBinding& binding,
                                            const Partition& partition, long shots, Rng& rng);
CostEstimate estimate_from_records(const std::vector<ShotRecord>& records, const Partition& partition);

/// Haar-state Monte-Carlo transcription of the definition.
CostEstimate decoupling_cost_mc(const Circuit& w, std::span<const double> params,
                                const Partition& partition, long samples, Rng& rng);

/// min(1 - c_d + 3 / (2^n + 1), 1).
double fidelity_upper_bound(double c_d, int num_qubits);

/// Quadratic form behind the Choi contraction: for fixed chi_beta,
/// mean_k <S_k> = <chi_alpha| O(chi_beta) |chi_alpha>.
class SwapContraction {
 public:
  SwapContraction(int num_qubits, const Partition& partition);

  class Bound {
   public:
    /// O(chi) v
    Vector apply(const Vector& v) const;
    double quad(const Vector& v) const;

   private:
    friend class SwapContraction;
    const SwapContraction* owner_ = nullptr;
    std::vector<Matrix> reduced_;
  };

  Bound bind(const Vector& chi) const;
  int num_qubits() const { return num_qubits_; }
  double norm() const { return norm_; }

 private:
  struct Term {
    double weight = 0.0;
    // index_map(r, c): full index of kept index r and traced index c.
    Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> index_map;
  };
  Matrix gather(const Vector& v, const Term& t) const;

  int num_qubits_;
  double norm_;
  std::vector<Term> terms_;
};

}  // namespace decoupler
