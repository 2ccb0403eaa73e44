#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "decoupler/cd_evaluators.hpp"
#include "decoupler/circuit.hpp"
#include "decoupler/cost.hpp"
#include "decoupler/grad.hpp"
#include "decoupler/optimize.hpp"

namespace decoupler {

enum class ObjectiveKind { CD, LHST, HST };
std::string to_string(ObjectiveKind kind);
ObjectiveKind parse_objective_kind(const std::string& s);

/// A parameterized sub-circuit acting on `qubits` of the full register.
struct AnsatzBlock {
  std::string name;
  std::vector<int> qubits;
  Circuit circuit;
};

/// One node depth of the recursion: blocks applied before the decoupled
/// middle (pre) and after it (post).
struct PlanLevel {
  std::vector<AnsatzBlock> pre;
  std::vector<AnsatzBlock> post;
};

struct PhaseSpec {
  std::string name;
  ObjectiveKind objective = ObjectiveKind::CD;
  /// Required for CD phases.
  std::optional<Partition> partition;
  /// Number of levels stripped off the target in the phase circuit W.
  int depth = 1;
  std::vector<std::string> trainable;
  AdamConfig adam;
  /// LHST/HST phases only. 0 matches the assembled candidate against the
  /// target. A positive value matches the middle blocks against the phase
  /// circuit of that depth, so the trainable set must lie in the middle.
  int match_depth = 0;
};

struct DecouplingPlan {
  int num_qubits = 0;
  std::vector<PlanLevel> levels;
  std::vector<AnsatzBlock> middle;
  std::vector<PhaseSpec> phases;
  /// Train every block in the final phase instead of only its listed ones.
  bool joint_final = false;

  void validate() const;
};

/// Global parameter layout of a plan. Blocks are laid out level by level
/// (pre, then post), then the middle blocks.
class PlanLayout {
 public:
  explicit PlanLayout(const DecouplingPlan& plan);

  struct Slot {
    const AnsatzBlock* block = nullptr;
    int offset = 0;
  };

  int num_params() const { return num_params_; }
  const Slot& slot(const std::string& name) const;
  std::vector<std::size_t> indices(const std::vector<std::string>& names) const;
  std::vector<std::string> block_names() const;

  /// Full candidate in time order: pre_0, pre_1, ..., middle, ..., post_1, post_0.
  /// A non-identity `wiring` puts a SWAP network in front of the middle so that
  /// qubit i of the middle carries qubit wiring[i].
  Circuit assemble(std::span<const int> wiring = {}) const;
  /// Wiring swaps followed by the middle blocks, on the full register.
  Circuit middle_circuit(std::span<const int> wiring = {}) const;
  /// post_{depth-1}^dagger ... post_0^dagger U pre_0^dagger ... pre_{depth-1}^dagger.
  Circuit phase_circuit(const Matrix& target, int depth) const;

 private:
  const DecouplingPlan& plan_;
  std::vector<std::pair<std::string, Slot>> slots_;
  int num_params_ = 0;
};

DecouplingPlan default_plan_2q();
DecouplingPlan default_plan_4q(int layers_outer = 4, int layers_inner = 2);

struct PhaseRecord {
  std::string name;
  int iterations = 0;
  StopReason stop_reason = StopReason::MaxIters;
  double best_objective = 0.0;
};

struct CompiledResult {
  Circuit ansatz;
  Circuit final_circuit;
  ParamVector final_params;
  double fidelity = 0.0;
  double hst = 0.0;
  TrainingTrace trace;
  std::vector<PhaseRecord> phases;
  std::uint64_t seed = 0;
  /// Middle wiring chosen after the CD phases (identity when empty).
  std::vector<int> wiring;

  nlohmann::json to_json() const;
};

struct RunOptions {
  EvaluatorSpec evaluator;
};

/// C_D vanishes on local unitaries up to a qubit permutation. For such a w,
/// returns sigma with output qubit i driven by input qubit sigma[i], chosen to
/// maximize the summed purity of the (output i, input sigma[i]) Choi marginals.
std::vector<int> wire_permutation(const Matrix& w);

/// SWAP gates realizing `wiring` (qubit i ends up carrying qubit wiring[i]).
std::vector<GateOp> wiring_swaps(std::span<const int> wiring);

/// Uniform angles on [-pi, pi).
ParamVector random_angles(std::size_t count, Rng& rng);

CompiledResult run_decoupling(const UnitaryMatrix& target, const DecouplingPlan& plan, std::uint64_t seed,
                              const RunOptions& options = {});

CompiledResult run_direct_baseline(const UnitaryMatrix& target, const Circuit& ansatz, MatchMetric metric,
                                   const AdamConfig& adam, std::uint64_t seed,
                                   std::optional<ParamVector> initial = std::nullopt);

/// Random single-layer instance of the 4-qubit plan's ansatz family.
UnitaryMatrix spindle_target(std::uint64_t seed);

}  // namespace decoupler
