#include "decoupler/optimize.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace decoupler {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    // stod rejects "nan"/"inf" spellings on some inputs; accept them explicitly.
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    throw std::invalid_argument(where + ": bad number '" + s + "'");
  }
}

}  // namespace

void AdamConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("adam alpha must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw std::invalid_argument("adam beta1 must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw std::invalid_argument("adam beta2 must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("adam epsilon must be positive");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");
  if (patience < 1) throw std::invalid_argument("patience must be at least 1");
  if (min_improvement < 0.0) throw std::invalid_argument("min_improvement must be non-negative");
}

AdamState AdamState::zeros(std::size_t n) {
  AdamState s;
  s.first_moment.assign(n, 0.0);
  s.second_moment.assign(n, 0.0);
  return s;
}

void adam_step(AdamState& state, ParamVector& params, const GradientVector& grad, const AdamConfig& cfg) {
  const std::size_t n = params.size();
  if (grad.size() != n || state.first_moment.size() != n || state.second_moment.size() != n) {
    throw std::invalid_argument("adam_step: inconsistent vector lengths");
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    state.first_moment[i] = cfg.beta1 * state.first_moment[i] + (1.0 - cfg.beta1) * g;
    state.second_moment[i] = cfg.beta2 * state.second_moment[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.first_moment[i] / c1;
    const double v_hat = state.second_moment[i] / c2;
    params[i] -= cfg.alpha * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

void TrainingTrace::append(TraceRow row) {
  if (!rows_.empty() && row.iteration <= rows_.back().iteration) {
    throw std::invalid_argument("trace iterations must be strictly increasing");
  }
  rows_.push_back(std::move(row));
}

std::vector<TrainingTrace::Segment> TrainingTrace::segments() const {
  std::vector<Segment> out;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (out.empty() || out.back().phase != rows_[i].phase) out.push_back({rows_[i].phase, i, 0});
    ++out.back().count;
  }
  return out;
}

void TrainingTrace::write_csv(std::ostream& out, bool include_wall_time) const {
  out << kHeader << '\n';
  out << std::setprecision(17);
  for (const TraceRow& r : rows_) {
    out << r.iteration << ',' << r.phase << ',' << r.objective << ',' << r.fidelity << ',' << r.hst_cost << ',';
    if (include_wall_time) out << std::setprecision(6) << r.wall_time_ms << std::setprecision(17);
    out << '\n';
  }
}

TrainingTrace TrainingTrace::read_csv(std::istream& in, const std::string& source_name) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(source_name + ": empty trace file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) {
    throw std::invalid_argument(source_name + ":1: unexpected trace header '" + line + "'");
  }
  TrainingTrace trace;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    const std::string where = source_name + ":" + std::to_string(line_no);
    if (fields.size() != 6) throw std::invalid_argument(where + ": expected 6 fields");
    TraceRow r;
    r.iteration = static_cast<long>(parse_double(fields[0], where));
    r.phase = fields[1];
    r.objective = parse_double(fields[2], where);
    r.fidelity = parse_double(fields[3], where);
    r.hst_cost = parse_double(fields[4], where);
    r.wall_time_ms = fields[5].empty() ? 0.0 : parse_double(fields[5], where);
    try {
      trace.append(std::move(r));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where + ": " + e.what());
    }
  }
  return trace;
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::Threshold: return "threshold";
    case StopReason::Patience: return "patience";
    case StopReason::MaxIters: return "max_iters";
  }
  return "?";
}

PhaseOutcome train_phase(const PhaseProblem& problem, ParamVector params, const AdamConfig& cfg,
                         TrainingTrace& trace) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  AdamState state = AdamState::zeros(params.size());
  PhaseOutcome out;
  out.params = params;
  out.best_objective = std::numeric_limits<double>::infinity();
  double reference = std::numeric_limits<double>::infinity();
  int since_improvement = 0;

  for (int iter = 0;; ++iter) {
    const long global_iter = trace.next_iteration();
    double value = 0.0;
    try {
      value = problem.objective(params);
    } catch (const NumericalError& e) {
      throw NumericalError("phase '" + problem.phase + "', iteration " + std::to_string(global_iter) + ": " +
                           e.what());
    }
    if (!std::isfinite(value)) {
      throw NumericalError("phase '" + problem.phase + "', iteration " + std::to_string(global_iter) +
                           ": objective is not finite");
    }
    TraceRow row;
    row.iteration = global_iter;
    row.phase = problem.phase;
    row.objective = value;
    if (problem.diagnostics) std::tie(row.fidelity, row.hst_cost) = problem.diagnostics(params);
    row.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    trace.append(std::move(row));
    out.iterations = iter + 1;

    if (value < out.best_objective) {
      out.best_objective = value;
      out.params = params;
    }
    if (value < reference - cfg.min_improvement) {
      reference = value;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }

    if (value < cfg.cost_threshold) {
      out.reason = StopReason::Threshold;
      break;
    }
    if (since_improvement >= cfg.patience) {
      out.reason = StopReason::Patience;
      break;
    }
    if (out.iterations >= cfg.max_iters) {
      out.reason = StopReason::MaxIters;
      break;
    }

    GradientVector grad;
    try {
      grad = problem.gradient(params);
    } catch (const NumericalError& e) {
      throw NumericalError("phase '" + problem.phase + "', iteration " + std::to_string(global_iter) + ": " +
                           e.what());
    }
    adam_step(state, params, grad, cfg);
  }
  return out;
}

}  // namespace decoupler
