#include "decoupler/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "decoupler/circuit_json.hpp"
#include "decoupler/svg_plot.hpp"

namespace decoupler {

namespace {

ExperimentKind parse_experiment(const std::string& s) {
  if (s == "two_qubit_haar") return ExperimentKind::TwoQubitHaar;
  if (s == "four_qubit_haar") return ExperimentKind::FourQubitHaar;
  if (s == "four_qubit_spindle") return ExperimentKind::FourQubitSpindle;
  if (s == "custom") return ExperimentKind::Custom;
  throw std::invalid_argument("unknown experiment '" + s + "'");
}

Method parse_method(const std::string& s) {
  if (s == "decoupling") return Method::Decoupling;
  if (s == "direct_hst") return Method::DirectHst;
  if (s == "direct_lhst") return Method::DirectLhst;
  throw std::invalid_argument("unknown method '" + s + "'");
}

EvaluatorSpec parse_evaluator(const nlohmann::json& j) {
  EvaluatorSpec spec;
  const std::string mode = j.is_string() ? j.get<std::string>() : j.value("mode", std::string("exact"));
  if (mode == "exact") {
    spec.mode = EvaluatorSpec::Mode::Exact;
  } else if (mode == "density") {
    spec.mode = EvaluatorSpec::Mode::Density;
  } else if (mode == "sampled") {
    spec.mode = EvaluatorSpec::Mode::Sampled;
  } else {
    throw std::invalid_argument("unknown evaluator mode '" + mode + "'");
  }
  if (j.is_object()) {
    spec.shots = j.value("shots", 0L);
    spec.seed = j.value("seed", std::uint64_t{0});
  }
  return spec;
}

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw std::invalid_argument("unknown key '" + it.key() + "' in " + where);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::TwoQubitHaar: return "two_qubit_haar";
    case ExperimentKind::FourQubitHaar: return "four_qubit_haar";
    case ExperimentKind::FourQubitSpindle: return "four_qubit_spindle";
    case ExperimentKind::Custom: return "custom";
  }
  return "?";
}

std::string to_string(Method method) {
  switch (method) {
    case Method::Decoupling: return "decoupling";
    case Method::DirectHst: return "direct_hst";
    case Method::DirectLhst: return "direct_lhst";
  }
  return "?";
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
  reject_unknown_keys(doc,
                      {"experiment", "seeds", "method", "evaluator", "adam", "plan", "target_seed", "shared_target",
                       "target_file", "output_dir", "jobs", "write_wall_time"},
                      "config");
  ExperimentConfig cfg;
  try {
    cfg.experiment = parse_experiment(doc.at("experiment").get<std::string>());
    const auto& seeds = doc.at("seeds");
    if (seeds.is_number_integer()) {
      for (std::uint64_t s = 0; s < seeds.get<std::uint64_t>(); ++s) cfg.seeds.push_back(s);
    } else {
      cfg.seeds = seeds.get<std::vector<std::uint64_t>>();
    }
    if (doc.contains("method")) cfg.method = parse_method(doc["method"].get<std::string>());
    if (doc.contains("evaluator")) cfg.evaluator = parse_evaluator(doc["evaluator"]);
    if (doc.contains("adam")) {
      const auto& a = doc["adam"];
      reject_unknown_keys(a, {"alpha", "beta1", "beta2", "epsilon"}, "adam");
      cfg.alpha = a.value("alpha", cfg.alpha);
      cfg.beta1 = a.value("beta1", cfg.beta1);
      cfg.beta2 = a.value("beta2", cfg.beta2);
      cfg.epsilon = a.value("epsilon", cfg.epsilon);
    }
    if (cfg.experiment == ExperimentKind::FourQubitSpindle) {
      // Spindle targets are compiled with the default 4-qubit plan unless overridden.
      cfg.layers_outer = 4;
      cfg.layers_inner = 2;
    }
    if (doc.contains("plan")) {
      const auto& p = doc["plan"];
      reject_unknown_keys(p,
                          {"layers_outer", "layers_inner", "cost_threshold", "final_threshold", "max_iters",
                           "patience", "joint_final"},
                          "plan");
      cfg.layers_outer = p.value("layers_outer", cfg.layers_outer);
      cfg.layers_inner = p.value("layers_inner", cfg.layers_inner);
      cfg.cost_threshold = p.value("cost_threshold", cfg.cost_threshold);
      cfg.final_threshold = p.value("final_threshold", cfg.final_threshold);
      cfg.max_iters = p.value("max_iters", cfg.max_iters);
      cfg.patience = p.value("patience", cfg.patience);
      cfg.joint_final = p.value("joint_final", cfg.joint_final);
    }
    cfg.target_seed = doc.value("target_seed", cfg.target_seed);
    cfg.shared_target = doc.value("shared_target", cfg.shared_target);
    if (doc.contains("target_file")) cfg.target_file = doc["target_file"].get<std::string>();
    if (doc.contains("output_dir")) cfg.output_dir = doc["output_dir"].get<std::string>();
    cfg.jobs = doc.value("jobs", cfg.jobs);
    cfg.write_wall_time = doc.value("write_wall_time", cfg.write_wall_time);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  ExperimentConfig cfg = from_json(parse_json_text(text, path.string()));
  if (!cfg.target_file.empty() && cfg.target_file.is_relative()) {
    cfg.target_file = path.parent_path() / cfg.target_file;
  }
  return cfg;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw std::invalid_argument("config: seeds must be nonempty");
  if (evaluator.mode == EvaluatorSpec::Mode::Sampled && evaluator.shots < 1) {
    throw std::invalid_argument("config: sampled evaluator needs shots >= 1");
  }
  if (experiment == ExperimentKind::Custom && target_file.empty()) {
    throw std::invalid_argument("config: custom experiments need target_file");
  }
  if (layers_outer < 1 || layers_inner < 1) throw std::invalid_argument("config: layer counts must be >= 1");
  if (jobs < 0) throw std::invalid_argument("config: jobs must be >= 0");
  AdamConfig probe;
  probe.alpha = alpha;
  probe.beta1 = beta1;
  probe.beta2 = beta2;
  probe.epsilon = epsilon;
  probe.max_iters = max_iters;
  probe.patience = patience;
  probe.validate();
}

DecouplingPlan plan_for(const ExperimentConfig& cfg) {
  int width = 2;
  if (cfg.experiment == ExperimentKind::Custom) {
    width = load_circuit(cfg.target_file).num_qubits();
  } else if (cfg.experiment != ExperimentKind::TwoQubitHaar) {
    width = 4;
  }
  if (width != 2 && width != 4) throw std::invalid_argument("built-in plans cover 2 or 4 qubits only");
  DecouplingPlan plan = width == 2 ? default_plan_2q() : default_plan_4q(cfg.layers_outer, cfg.layers_inner);
  plan.joint_final = cfg.joint_final;
  for (std::size_t i = 0; i < plan.phases.size(); ++i) {
    AdamConfig& a = plan.phases[i].adam;
    a.alpha = cfg.alpha;
    a.beta1 = cfg.beta1;
    a.beta2 = cfg.beta2;
    a.epsilon = cfg.epsilon;
    a.max_iters = cfg.max_iters;
    a.patience = cfg.patience;
    a.cost_threshold = i + 1 == plan.phases.size() ? cfg.final_threshold : cfg.cost_threshold;
  }
  return plan;
}

AdamConfig direct_adam_for(const ExperimentConfig& cfg) {
  const DecouplingPlan plan = plan_for(cfg);
  AdamConfig a = plan.phases.back().adam;
  a.max_iters = cfg.max_iters * static_cast<int>(plan.phases.size());
  return a;
}

UnitaryMatrix target_for(const ExperimentConfig& cfg, std::uint64_t seed) {
  const std::uint64_t s = cfg.shared_target ? cfg.target_seed : cfg.target_seed + seed;
  switch (cfg.experiment) {
    case ExperimentKind::TwoQubitHaar: {
      Rng rng(s);
      return haar_random_unitary(2, rng);
    }
    case ExperimentKind::FourQubitHaar: {
      Rng rng(s);
      return haar_random_unitary(4, rng);
    }
    case ExperimentKind::FourQubitSpindle:
      return spindle_target(s);
    case ExperimentKind::Custom: {
      const std::string text = read_file(cfg.target_file);
      const nlohmann::json doc = parse_json_text(text, cfg.target_file.string());
      const Circuit c = circuit_from_json(doc);
      ParamVector params(static_cast<std::size_t>(c.num_params()), 0.0);
      if (doc.contains("params")) params = doc["params"].get<ParamVector>();
      return to_unitary(c, params);
    }
  }
  throw std::invalid_argument("unknown experiment");
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty set");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

QuartileBand quartile_band(const std::vector<std::vector<double>>& series) {
  QuartileBand band;
  std::size_t length = 0;
  for (const auto& s : series) length = std::max(length, s.size());
  std::vector<double> column;
  for (std::size_t i = 0; i < length; ++i) {
    column.clear();
    for (const auto& s : series) {
      if (s.empty()) continue;
      column.push_back(i < s.size() ? s[i] : s.back());
    }
    band.q1.push_back(quantile(column, 0.25));
    band.median.push_back(quantile(column, 0.5));
    band.q3.push_back(quantile(column, 0.75));
  }
  return band;
}

double RunSummary::median_final_fidelity() const {
  std::vector<double> f;
  for (const auto& r : results) f.push_back(r.fidelity);
  return quantile(f, 0.5);
}

nlohmann::json RunSummary::to_json() const {
  nlohmann::json runs = nlohmann::json::array();
  std::vector<double> finals;
  for (const auto& r : results) {
    runs.push_back(r.to_json());
    finals.push_back(r.fidelity);
  }
  nlohmann::json doc;
  doc["experiment"] = to_string(config.experiment);
  doc["method"] = to_string(config.method);
  doc["seeds"] = config.seeds;
  doc["target_seed"] = config.target_seed;
  doc["shared_target"] = config.shared_target;
  doc["final_fidelity"] = {{"q1", quantile(finals, 0.25)},
                           {"median", quantile(finals, 0.5)},
                           {"q3", quantile(finals, 0.75)}};
  doc["fidelity_quartiles"] = {{"q1", fidelity_band.q1},
                               {"median", fidelity_band.median},
                               {"q3", fidelity_band.q3}};
  doc["runs"] = std::move(runs);
  return doc;
}

CompiledResult run_single(const ExperimentConfig& cfg, std::uint64_t seed) {
  const UnitaryMatrix target = target_for(cfg, seed);
  const DecouplingPlan plan = plan_for(cfg);
  if (cfg.method == Method::Decoupling) {
    RunOptions options;
    options.evaluator = cfg.evaluator;
    return run_decoupling(target, plan, seed, options);
  }
  const Circuit ansatz = PlanLayout(plan).assemble();
  const MatchMetric metric = cfg.method == Method::DirectLhst ? MatchMetric::LHST : MatchMetric::HST;
  CompiledResult r = run_direct_baseline(target, ansatz, metric, direct_adam_for(cfg), seed);
  return r;
}

RunSummary run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  RunSummary summary;
  summary.config = cfg;
  const std::size_t count = cfg.seeds.size();
  std::vector<std::optional<CompiledResult>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        slots[i] = run_single(cfg, cfg.seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::size_t pool_size = static_cast<std::size_t>(cfg.jobs);
  if (pool_size == 0) pool_size = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min(pool_size, count);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
  }
  std::vector<std::vector<double>> series;
  for (auto& s : slots) {
    std::vector<double> f;
    for (const auto& row : s->trace.rows()) f.push_back(row.fidelity);
    series.push_back(std::move(f));
    summary.results.push_back(std::move(*s));
  }
  summary.fidelity_band = quartile_band(series);
  return summary;
}

void write_outputs(const RunSummary& summary) {
  const auto& dir = summary.config.output_dir;
  std::filesystem::create_directories(dir);
  TraceGroup group;
  group.label = to_string(summary.config.method);
  for (const auto& r : summary.results) {
    const auto path = dir / ("trace_seed" + std::to_string(r.seed) + ".csv");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    r.trace.write_csv(out, summary.config.write_wall_time);
    if (!out) throw std::runtime_error("error writing " + path.string());
    group.traces.push_back(r.trace);
  }
  {
    std::ofstream out(dir / "summary.json");
    if (!out) throw std::runtime_error("cannot write " + (dir / "summary.json").string());
    out << summary.to_json().dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "curves.svg");
    if (!out) throw std::runtime_error("cannot write " + (dir / "curves.svg").string());
    out << render_training_svg({group}, to_string(summary.config.experiment));
  }
}

}  // namespace decoupler
