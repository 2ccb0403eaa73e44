#include "decoupler/decouple.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <set>

#include "decoupler/circuit_json.hpp"

namespace decoupler {

namespace {

void append_embedded(std::vector<GateOp>& gates, const Circuit& c, const std::vector<int>& qubits, int offset) {
  for (const GateOp& g : c.gates()) {
    GateOp copy = g;
    for (int& t : copy.targets) t = qubits[static_cast<std::size_t>(t)];
    if (copy.is_parameterized()) copy.param_index += offset;
    gates.push_back(std::move(copy));
  }
}

AdamConfig final_phase_adam() {
  AdamConfig cfg;
  cfg.cost_threshold = 1e-8;
  return cfg;
}

void check_block(const AnsatzBlock& b, int num_qubits) {
  if (b.name.empty()) throw std::invalid_argument("ansatz block without a name");
  if (static_cast<int>(b.qubits.size()) != b.circuit.num_qubits()) {
    throw std::invalid_argument("block " + b.name + " qubit list does not match its circuit width");
  }
  std::set<int> seen;
  for (int q : b.qubits) {
    if (q < 0 || q >= num_qubits || !seen.insert(q).second) {
      throw std::invalid_argument("block " + b.name + " has invalid qubits");
    }
  }
}

}  // namespace

std::string to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::CD: return "CD";
    case ObjectiveKind::LHST: return "LHST";
    case ObjectiveKind::HST: return "HST";
  }
  return "?";
}

ObjectiveKind parse_objective_kind(const std::string& s) {
  if (s == "CD") return ObjectiveKind::CD;
  if (s == "LHST") return ObjectiveKind::LHST;
  if (s == "HST") return ObjectiveKind::HST;
  throw std::invalid_argument("unknown objective '" + s + "'");
}

void DecouplingPlan::validate() const {
  validate_qubit_count(num_qubits);
  if (phases.empty()) throw std::invalid_argument("plan has no phases");
  std::set<std::string> names;
  auto add = [&](const AnsatzBlock& b) {
    check_block(b, num_qubits);
    if (!names.insert(b.name).second) throw std::invalid_argument("duplicate block name " + b.name);
  };
  for (const auto& level : levels) {
    for (const auto& b : level.pre) add(b);
    for (const auto& b : level.post) add(b);
  }
  for (const auto& b : middle) add(b);

  const Partition* previous = nullptr;
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const PhaseSpec& p = phases[i];
    p.adam.validate();
    for (const auto& t : p.trainable) {
      if (!names.count(t)) throw std::invalid_argument("phase " + p.name + " trains unknown block " + t);
    }
    if (p.objective == ObjectiveKind::CD) {
      if (!p.partition) throw std::invalid_argument("CD phase " + p.name + " has no partition");
      p.partition->require_width(num_qubits);
      if (p.depth < 1 || p.depth > static_cast<int>(levels.size())) {
        throw std::invalid_argument("phase " + p.name + " depth out of range");
      }
      if (previous && !p.partition->refines(*previous)) {
        throw std::invalid_argument("phase " + p.name + " partition does not refine the previous one");
      }
      previous = &*p.partition;
    }
  }
  std::set<std::string> middle_names;
  for (const auto& b : middle) middle_names.insert(b.name);
  for (const auto& p : phases) {
    if (p.match_depth == 0) continue;
    if (p.objective == ObjectiveKind::CD) throw std::invalid_argument("CD phase " + p.name + " sets match_depth");
    if (p.match_depth < 0 || p.match_depth > static_cast<int>(levels.size())) {
      throw std::invalid_argument("phase " + p.name + " match_depth out of range");
    }
    for (const auto& t : p.trainable) {
      if (!middle_names.count(t)) {
        throw std::invalid_argument("phase " + p.name + " matches the middle but trains " + t);
      }
    }
  }
  if (phases.back().objective == ObjectiveKind::CD) {
    throw std::invalid_argument("final phase must use LHST or HST");
  }
}

PlanLayout::PlanLayout(const DecouplingPlan& plan) : plan_(plan) {
  plan.validate();
  auto add = [&](const AnsatzBlock& b) {
    slots_.emplace_back(b.name, Slot{&b, num_params_});
    num_params_ += b.circuit.num_params();
  };
  for (const auto& level : plan.levels) {
    for (const auto& b : level.pre) add(b);
    for (const auto& b : level.post) add(b);
  }
  for (const auto& b : plan.middle) add(b);
}

const PlanLayout::Slot& PlanLayout::slot(const std::string& name) const {
  for (const auto& [n, s] : slots_) {
    if (n == name) return s;
  }
  throw std::invalid_argument("unknown block " + name);
}

std::vector<std::size_t> PlanLayout::indices(const std::vector<std::string>& names) const {
  std::vector<std::size_t> out;
  for (const auto& name : names) {
    const Slot& s = slot(name);
    for (int i = 0; i < s.block->circuit.num_params(); ++i) out.push_back(static_cast<std::size_t>(s.offset + i));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> PlanLayout::block_names() const {
  std::vector<std::string> out;
  for (const auto& [n, s] : slots_) out.push_back(n);
  return out;
}

Circuit PlanLayout::assemble(std::span<const int> wiring) const {
  std::vector<GateOp> gates;
  auto put = [&](const AnsatzBlock& b) { append_embedded(gates, b.circuit, b.qubits, slot(b.name).offset); };
  for (const auto& level : plan_.levels) {
    for (const auto& b : level.pre) put(b);
  }
  if (!wiring.empty()) {
    if (static_cast<int>(wiring.size()) != plan_.num_qubits) throw std::invalid_argument("wiring width mismatch");
    for (GateOp& g : wiring_swaps(wiring)) gates.push_back(std::move(g));
  }
  for (const auto& b : plan_.middle) put(b);
  for (auto it = plan_.levels.rbegin(); it != plan_.levels.rend(); ++it) {
    for (const auto& b : it->post) put(b);
  }
  return Circuit(plan_.num_qubits, std::move(gates), num_params_);
}

Circuit PlanLayout::middle_circuit(std::span<const int> wiring) const {
  std::vector<GateOp> gates;
  if (!wiring.empty()) {
    if (static_cast<int>(wiring.size()) != plan_.num_qubits) throw std::invalid_argument("wiring width mismatch");
    gates = wiring_swaps(wiring);
  }
  for (const auto& b : plan_.middle) append_embedded(gates, b.circuit, b.qubits, slot(b.name).offset);
  return Circuit(plan_.num_qubits, std::move(gates), num_params_);
}

Circuit PlanLayout::phase_circuit(const Matrix& target, int depth) const {
  if (depth < 0 || depth > static_cast<int>(plan_.levels.size())) throw std::invalid_argument("depth out of range");
  const int n = plan_.num_qubits;
  std::vector<GateOp> gates;
  auto put_inverse = [&](const AnsatzBlock& b) {
    append_embedded(gates, adjoint(b.circuit), b.qubits, slot(b.name).offset);
  };
  for (int l = depth - 1; l >= 0; --l) {
    for (const auto& b : plan_.levels[static_cast<std::size_t>(l)].pre) put_inverse(b);
  }
  std::vector<int> all(static_cast<std::size_t>(n));
  for (int q = 0; q < n; ++q) all[static_cast<std::size_t>(q)] = q;
  gates.push_back(GateOp::constant(target, all));
  for (int l = 0; l < depth; ++l) {
    for (const auto& b : plan_.levels[static_cast<std::size_t>(l)].post) put_inverse(b);
  }
  return Circuit(n, std::move(gates), num_params_);
}

DecouplingPlan default_plan_2q() {
  DecouplingPlan plan;
  plan.num_qubits = 2;
  plan.levels.push_back(PlanLevel{{AnsatzBlock{"V0", {0, 1}, universal_two_qubit_ansatz()}}, {}});

  PhaseSpec decouple;
  decouple.name = "decouple";
  decouple.objective = ObjectiveKind::CD;
  decouple.partition = Partition::parse("0;1");
  decouple.depth = 1;
  decouple.trainable = {"V0"};

  PhaseSpec local;
  local.name = "local";
  local.objective = ObjectiveKind::LHST;
  local.trainable = {"V0"};
  local.adam = final_phase_adam();

  plan.phases = {decouple, local};
  return plan;
}

DecouplingPlan default_plan_4q(int layers_outer, int layers_inner) {
  DecouplingPlan plan;
  plan.num_qubits = 4;
  PlanLevel outer;
  outer.pre.push_back({"V0", {0, 1, 2, 3}, layered_ansatz(4, layers_outer)});
  outer.post.push_back({"V1", {0, 1, 2, 3}, layered_ansatz(4, layers_outer)});
  PlanLevel inner;
  inner.pre.push_back({"VA0", {0, 1}, layered_ansatz(2, layers_inner)});
  inner.pre.push_back({"VB0", {2, 3}, layered_ansatz(2, layers_inner)});
  inner.post.push_back({"VA1", {0, 1}, layered_ansatz(2, layers_inner)});
  inner.post.push_back({"VB1", {2, 3}, layered_ansatz(2, layers_inner)});
  plan.levels = {outer, inner};
  for (int q = 0; q < 4; ++q) plan.middle.push_back({"u" + std::to_string(q), {q}, single_qubit_ansatz()});

  PhaseSpec decouple;
  decouple.name = "decouple";
  decouple.partition = Partition::parse("0,1;2,3");
  decouple.depth = 1;
  decouple.trainable = {"V0", "V1"};

  PhaseSpec refine;
  refine.name = "refine";
  refine.partition = Partition::singletons(4);
  refine.depth = 2;
  refine.trainable = {"VA0", "VB0", "VA1", "VB1"};

  PhaseSpec local;
  local.name = "local";
  local.objective = ObjectiveKind::LHST;
  local.trainable = {"u0", "u1", "u2", "u3"};
  local.adam = final_phase_adam();
  local.match_depth = 2;

  plan.phases = {decouple, refine, local};
  return plan;
}

nlohmann::json CompiledResult::to_json() const {
  nlohmann::json phase_list = nlohmann::json::array();
  for (const auto& p : phases) {
    phase_list.push_back({{"name", p.name},
                          {"iterations", p.iterations},
                          {"stop_reason", to_string(p.stop_reason)},
                          {"best_objective", p.best_objective}});
  }
  return {{"seed", seed},
          {"fidelity", fidelity},
          {"hst", hst},
          {"phases", std::move(phase_list)},
          {"wiring", wiring},
          {"params", final_params},
          {"circuit", circuit_to_json(final_circuit)}};
}

std::vector<int> wire_permutation(const Matrix& w) {
  int n = 0;
  while ((Eigen::Index{1} << n) < w.rows()) ++n;
  if ((Eigen::Index{1} << n) != w.rows() || w.cols() != w.rows()) throw std::invalid_argument("not a qubit operator");
  const Vector chi = choi_vector(w);
  Eigen::MatrixXd score(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const std::array<int, 2> keep{i, n + j};
      score(i, j) = purity(reduced_density(chi, 2 * n, keep));
    }
  }
  std::vector<int> sigma(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) sigma[static_cast<std::size_t>(i)] = i;
  std::vector<int> best = sigma;
  double best_score = -1.0;
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += score(i, sigma[static_cast<std::size_t>(i)]);
    // Identity wins ties.
    if (total > best_score + 1e-12) {
      best_score = total;
      best = sigma;
    }
  } while (std::next_permutation(sigma.begin(), sigma.end()));
  return best;
}

std::vector<GateOp> wiring_swaps(std::span<const int> wiring) {
  std::vector<int> at(wiring.size());
  for (std::size_t i = 0; i < at.size(); ++i) at[i] = static_cast<int>(i);
  std::vector<GateOp> out;
  for (std::size_t i = 0; i < wiring.size(); ++i) {
    const auto p = static_cast<std::size_t>(std::find(at.begin(), at.end(), wiring[i]) - at.begin());
    if (p == at.size()) throw std::invalid_argument("wiring is not a permutation");
    if (p != i) {
      out.push_back(GateOp::swap(static_cast<int>(i), static_cast<int>(p)));
      std::swap(at[i], at[p]);
    }
  }
  return out;
}

ParamVector random_angles(std::size_t count, Rng& rng) {
  ParamVector out(count);
  for (double& x : out) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    x = -std::numbers::pi + 2.0 * std::numbers::pi * u;
  }
  return out;
}

namespace {

void finish(CompiledResult& result, const Matrix& target) {
  result.final_circuit = bind_parameters(result.ansatz, result.final_params);
  const Matrix u = circuit_matrix(result.final_circuit, {});
  result.fidelity = gate_fidelity(u, target);
  result.hst = hst_cost(u, target);
}

std::function<std::pair<double, double>(const ParamVector&)> diagnostics_for(const Circuit& ansatz,
                                                                              const Matrix& target) {
  return [&ansatz, &target](const ParamVector& p) {
    const Matrix u = circuit_matrix(ansatz, p);
    return std::make_pair(gate_fidelity(u, target), hst_cost(u, target));
  };
}

}  // namespace

CompiledResult run_decoupling(const UnitaryMatrix& target, const DecouplingPlan& plan, std::uint64_t seed,
                              const RunOptions& options) {
  if (target.num_qubits() != plan.num_qubits) {
    throw std::invalid_argument("plan width " + std::to_string(plan.num_qubits) + " does not match target width " +
                                std::to_string(target.num_qubits()));
  }
  const PlanLayout layout(plan);
  Rng rng(seed);
  CompiledResult result;
  result.seed = seed;
  result.ansatz = layout.assemble();
  ParamVector params = random_angles(static_cast<std::size_t>(layout.num_params()), rng);
  const Matrix& u = target.matrix();
  const auto diagnostics = diagnostics_for(result.ansatz, u);
  int last_cd_depth = 0;

  for (std::size_t phase_index = 0; phase_index < plan.phases.size(); ++phase_index) {
    const PhaseSpec& phase = plan.phases[phase_index];
    const bool last = phase_index + 1 == plan.phases.size();
    const std::vector<std::size_t> trainable =
        last && plan.joint_final ? all_indices(params.size()) : layout.indices(phase.trainable);
    const ParamVector before = params;

    PhaseProblem problem;
    problem.phase = phase.name;
    problem.diagnostics = diagnostics;
    PhaseOutcome outcome;
    if (phase.objective == ObjectiveKind::CD) {
      const Circuit w = layout.phase_circuit(u, phase.depth);
      EvaluatorSpec spec = options.evaluator;
      spec.seed = options.evaluator.seed ^ (seed * 0x9e3779b97f4a7c15ULL + phase_index);
      const auto evaluator = make_evaluator(spec);
      const Partition& partition = *phase.partition;
      problem.objective = [&](const ParamVector& p) { return evaluator->evaluate(w, p, partition).value; };
      problem.gradient = [&](const ParamVector& p) {
        return shift_rule_gradient_cd(w, p, partition, *evaluator, trainable);
      };
      outcome = train_phase(problem, params, phase.adam, result.trace);
      last_cd_depth = phase.depth;
    } else {
      if (last_cd_depth > 0 && !plan.middle.empty() && result.wiring.empty()) {
        std::vector<int> wiring = wire_permutation(circuit_matrix(layout.phase_circuit(u, last_cd_depth), params));
        if (!std::is_sorted(wiring.begin(), wiring.end())) {
          result.wiring = std::move(wiring);
          result.ansatz = layout.assemble(result.wiring);
        }
      }
      const MatchMetric metric = phase.objective == ObjectiveKind::LHST ? MatchMetric::LHST : MatchMetric::HST;
      // Joint training moves the outer blocks, so only the full frame is valid.
      const bool middle_frame = phase.match_depth > 0 && !(last && plan.joint_final);
      const Matrix reference =
          middle_frame ? circuit_matrix(layout.phase_circuit(u, phase.match_depth), params) : u;
      UnitaryMatchObjective objective(middle_frame ? layout.middle_circuit(result.wiring) : result.ansatz,
                                      reference, metric);
      problem.objective = [&](const ParamVector& p) { return objective.value(p); };
      problem.gradient = [&](const ParamVector& p) {
        return shift_rule_gradient_expectation(objective, p, trainable);
      };
      outcome = train_phase(problem, params, phase.adam, result.trace);
    }
    params = outcome.params;

    std::vector<bool> is_trainable(params.size(), false);
    for (std::size_t i : trainable) is_trainable[i] = true;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!is_trainable[i] && params[i] != before[i]) {
        throw std::logic_error("frozen parameter " + std::to_string(i) + " changed in phase " + phase.name);
      }
    }
    result.phases.push_back({phase.name, outcome.iterations, outcome.reason, outcome.best_objective});
  }
  result.final_params = params;
  finish(result, u);
  return result;
}

CompiledResult run_direct_baseline(const UnitaryMatrix& target, const Circuit& ansatz, MatchMetric metric,
                                   const AdamConfig& adam, std::uint64_t seed, std::optional<ParamVector> initial) {
  if (target.num_qubits() != ansatz.num_qubits()) {
    throw std::invalid_argument("ansatz width does not match target width");
  }
  Rng rng(seed);
  CompiledResult result;
  result.seed = seed;
  result.ansatz = ansatz;
  ParamVector params = initial ? *initial : random_angles(static_cast<std::size_t>(ansatz.num_params()), rng);
  check_params(ansatz, params);
  const Matrix& u = target.matrix();
  UnitaryMatchObjective objective(ansatz, u, metric);
  PhaseProblem problem;
  problem.phase = metric == MatchMetric::LHST ? "direct_lhst" : "direct_hst";
  problem.diagnostics = diagnostics_for(result.ansatz, u);
  problem.objective = [&](const ParamVector& p) { return objective.value(p); };
  problem.gradient = [&](const ParamVector& p) { return shift_rule_gradient_expectation(objective, p); };
  const PhaseOutcome outcome = train_phase(problem, params, adam, result.trace);
  result.phases.push_back({problem.phase, outcome.iterations, outcome.reason, outcome.best_objective});
  result.final_params = outcome.params;
  finish(result, u);
  return result;
}

UnitaryMatrix spindle_target(std::uint64_t seed) {
  const DecouplingPlan plan = default_plan_4q(1, 1);
  const PlanLayout layout(plan);
  Rng rng(seed);
  const ParamVector angles = random_angles(static_cast<std::size_t>(layout.num_params()), rng);
  return UnitaryMatrix(4, circuit_matrix(layout.assemble(), angles));
}

}  // namespace decoupler
