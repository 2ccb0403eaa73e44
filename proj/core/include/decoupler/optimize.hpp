#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "decoupler/circuit.hpp"
#include "decoupler/grad.hpp"

namespace decoupler {

struct AdamConfig {
  double alpha = 0.01;
  double beta1 = 0.8;
  double beta2 = 0.9;
  double epsilon = 1e-8;
  int max_iters = 3000;
  double cost_threshold = 1e-4;
  int patience = 200;
  /// Minimum decrease of the best value that resets the patience counter.
  double min_improvement = 1e-6;

  void validate() const;
};

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  long step_count = 0;

  static AdamState zeros(std::size_t n);
};

/// One bias-corrected ADAM update, in place.
void adam_step(AdamState& state, ParamVector& params, const GradientVector& grad, const AdamConfig& cfg);

struct TraceRow {
  long iteration = 0;
  std::string phase;
  double objective = 0.0;
  double fidelity = 0.0;
  double hst_cost = 0.0;
  double wall_time_ms = 0.0;
};

class TrainingTrace {
 public:
  static constexpr const char* kHeader = "iteration,phase,objective,fidelity,hst_cost,wall_time_ms";

  /// Iterations must be strictly increasing.
  void append(TraceRow row);
  const std::vector<TraceRow>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  long next_iteration() const { return rows_.empty() ? 0 : rows_.back().iteration + 1; }

  /// Contiguous runs of equal phase labels as (label, first row, row count).
  struct Segment {
    std::string phase;
    std::size_t first = 0;
    std::size_t count = 0;
  };
  std::vector<Segment> segments() const;

  void write_csv(std::ostream& out, bool include_wall_time = true) const;
  static TrainingTrace read_csv(std::istream& in, const std::string& source_name = "trace");

 private:
  std::vector<TraceRow> rows_;
};

enum class StopReason { Threshold, Patience, MaxIters };
std::string to_string(StopReason reason);

/// What a training phase needs: the objective, its gradient, and a
/// diagnostic returning (gate fidelity, hst cost) of the assembled candidate.
struct PhaseProblem {
  std::string phase;
  std::function<double(const ParamVector&)> objective;
  std::function<GradientVector(const ParamVector&)> gradient;
  std::function<std::pair<double, double>(const ParamVector&)> diagnostics;
};

struct PhaseOutcome {
  ParamVector params;
  StopReason reason = StopReason::MaxIters;
  int iterations = 0;
  double best_objective = 0.0;
};

/// Runs ADAM until the objective drops below cost_threshold, stops improving
/// for `patience` iterations, or max_iters rows are recorded. One trace row
/// per evaluated point. Returns the best point seen.
PhaseOutcome train_phase(const PhaseProblem& problem, ParamVector params, const AdamConfig& cfg,
                         TrainingTrace& trace);

}  // namespace decoupler
