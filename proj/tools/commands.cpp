#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "decoupler/cd_evaluators.hpp"
#include "decoupler/circuit_json.hpp"
#include "decoupler/cost.hpp"
#include "decoupler/decouple.hpp"
#include "decoupler/experiment.hpp"
#include "decoupler/grad.hpp"
#include "decoupler/svg_plot.hpp"

namespace decoupler::cli {

namespace {

struct LoadedCircuit {
  Circuit circuit;
  ParamVector params;
};

LoadedCircuit load_with_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const nlohmann::json doc = parse_json_text(buf.str(), path.string());
  LoadedCircuit out;
  out.circuit = circuit_from_json(doc);
  out.params.assign(static_cast<std::size_t>(out.circuit.num_params()), 0.0);
  if (doc.contains("params")) {
    try {
      out.params = doc["params"].get<ParamVector>();
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(path.string() + ": params: " + e.what());
    }
  }
  check_params(out.circuit, out.params);
  return out;
}

// Default split: first floor(n/2) qubits against the rest.
Partition partition_for(const std::string& spec, int num_qubits) {
  if (!spec.empty()) {
    Partition p = Partition::parse(spec);
    p.require_width(num_qubits);
    return p;
  }
  if (num_qubits < 2) return Partition::singletons(num_qubits);
  std::vector<int> a;
  std::vector<int> b;
  for (int q = 0; q < num_qubits; ++q) (q < num_qubits / 2 ? a : b).push_back(q);
  return Partition({a, b});
}

}  // namespace

int cmd_compile(const CompileArgs& args, std::ostream& out) {
  ExperimentConfig cfg = ExperimentConfig::load(args.config);
  if (args.jobs) cfg.jobs = *args.jobs;
  if (args.output_dir) cfg.output_dir = *args.output_dir;
  cfg.validate();
  const RunSummary summary = run_experiment(cfg);
  write_outputs(summary);
  out.precision(10);
  for (const auto& r : summary.results) {
    out << "seed " << r.seed << ": fidelity " << r.fidelity;
    for (const auto& p : r.phases) out << "  " << p.name << '(' << p.iterations << ", " << to_string(p.stop_reason) << ')';
    out << '\n';
  }
  out << "median final fidelity " << summary.median_final_fidelity() << '\n';
  out << "wrote " << cfg.output_dir.string() << '\n';
  return kOk;
}

int cmd_cost_eval(const CostEvalArgs& args, std::ostream& out) {
  const LoadedCircuit lc = load_with_params(args.circuit);
  const Partition partition = partition_for(args.partition, lc.circuit.num_qubits());
  CostEstimate est;
  Rng rng(args.seed);
  if (args.mode == "exact") {
    const Matrix w = circuit_matrix(lc.circuit, lc.params);
    est.value = decoupling_cost_choi(w, w, partition);
  } else if (args.mode == "density") {
    est = decoupling_cost_exact(lc.circuit, lc.params, partition);
  } else if (args.mode == "sampled") {
    if (args.shots < 1) throw std::invalid_argument("--shots must be >= 1");
    est = decoupling_cost_sampled(lc.circuit, lc.params, partition, args.shots, rng);
  } else if (args.mode == "mc") {
    if (args.shots < 2) throw std::invalid_argument("--shots must be >= 2 in mc mode");
    est = decoupling_cost_mc(lc.circuit, lc.params, partition, args.shots, rng);
  } else {
    throw std::invalid_argument("unknown mode '" + args.mode + "'");
  }
  nlohmann::json doc = est.to_json();
  doc["partition"] = partition.to_string();
  doc["mode"] = args.mode;
  out << doc.dump() << '\n';
  return kOk;
}

int cmd_grad_check(const GradCheckArgs& args, std::ostream& out) {
  const LoadedCircuit lc = load_with_params(args.circuit);
  const Circuit& w = lc.circuit;
  const Partition partition = partition_for(args.partition, w.num_qubits());
  nlohmann::json report;
  report["tolerance"] = args.tolerance;
  report["points"] = nlohmann::json::array();
  bool pass = true;
  if (w.num_params() > 0) {
    Rng rng(args.seed);
    ChoiCdEvaluator evaluator;
    const auto f = [&](std::span<const double> p) { return evaluator.evaluate(w, p, partition).value; };
    for (int k = 0; k < args.points; ++k) {
      const ParamVector p = random_angles(static_cast<std::size_t>(w.num_params()), rng);
      const GradientVector shift = shift_rule_gradient_cd(w, p, partition, evaluator);
      const GradientVector fd = finite_difference_gradient(f, p);
      double worst = 0.0;
      for (std::size_t i = 0; i < shift.size(); ++i) worst = std::max(worst, std::abs(shift[i] - fd[i]));
      const bool ok = worst <= args.tolerance;
      pass = pass && ok;
      report["points"].push_back({{"max_abs_diff", worst}, {"pass", ok}});
    }
  }
  report["pass"] = pass;
  out << report.dump(2) << '\n';
  return pass ? kOk : kCheckFailed;
}

int cmd_plot(const PlotArgs& args, std::ostream& out) {
  if (args.traces.empty()) throw std::invalid_argument("no trace files given");
  // One group per directory, in order of first appearance.
  std::vector<TraceGroup> groups;
  std::map<std::string, std::size_t> index;
  for (const auto& path : args.traces) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path.string());
    TrainingTrace trace = TrainingTrace::read_csv(in, path.string());
    std::string label = path.parent_path().filename().string();
    if (label.empty()) label = "runs";
    auto [it, fresh] = index.emplace(label, groups.size());
    if (fresh) groups.push_back({label, {}});
    groups[it->second].traces.push_back(std::move(trace));
  }
  std::ofstream svg(args.output);
  if (!svg) throw std::runtime_error("cannot write " + args.output.string());
  svg << render_training_svg(groups, args.title);
  if (!svg) throw std::runtime_error("error writing " + args.output.string());
  out << "wrote " << args.output.string() << '\n';
  return kOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Variational circuit decoupling toolkit"};
  app.require_subcommand(1);

  CompileArgs compile;
  auto* c = app.add_subcommand("compile", "Run an experiment config and write traces, summary and plot");
  c->add_option("config", compile.config, "Experiment config (JSON)")->required();
  c->add_option("--jobs", compile.jobs, "Worker threads (0 = all cores)");
  c->add_option("--output-dir", compile.output_dir, "Override the config's output directory");

  CostEvalArgs cost;
  auto* e = app.add_subcommand("cost-eval", "Evaluate the decoupling cost of a circuit");
  e->add_option("circuit", cost.circuit, "Circuit JSON")->required();
  e->add_option("--partition", cost.partition, "Blocks like \"0,1;2,3\" (default: two halves)");
  e->add_option("--mode", cost.mode, "exact | density | sampled | mc")
      ->check(CLI::IsMember({"exact", "density", "sampled", "mc"}));
  e->add_option("--shots", cost.shots, "Shots (sampled) or samples (mc)");
  e->add_option("--seed", cost.seed, "RNG seed");

  GradCheckArgs grad;
  auto* g = app.add_subcommand("grad-check", "Compare shift-rule and finite-difference gradients");
  g->add_option("circuit", grad.circuit, "Circuit JSON")->required();
  g->add_option("--partition", grad.partition, "Blocks like \"0;1\" (default: two halves)");
  g->add_option("--tol", grad.tolerance, "Largest accepted absolute difference");
  g->add_option("--seed", grad.seed, "RNG seed for the test points");
  g->add_option("--points", grad.points, "Number of random points")->check(CLI::PositiveNumber);

  PlotArgs plot;
  auto* p = app.add_subcommand("plot", "Render training traces as an SVG");
  p->add_option("traces", plot.traces, "Trace CSV files (grouped by directory)")->required();
  p->add_option("-o,--output", plot.output, "Output SVG")->required();
  p->add_option("--title", plot.title, "Plot title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    return app.exit(ex, out, err) == 0 ? kOk : kUsage;
  }

  try {
    if (c->parsed()) return cmd_compile(compile, out);
    if (e->parsed()) return cmd_cost_eval(cost, out);
    if (g->parsed()) return cmd_grad_check(grad, out);
    return cmd_plot(plot, out);
  } catch (const NumericalError& ex) {
    err << "numerical error: " << ex.what() << '\n';
    return kNumerical;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kUsage;
  }
}

}  // namespace decoupler::cli
