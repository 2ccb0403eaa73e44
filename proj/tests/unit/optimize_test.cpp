#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "decoupler/optimize.hpp"
#include "testkit.hpp"

using namespace decoupler;
using testkit::Gen;

namespace {

PhaseProblem quadratic(std::string phase = "quad") {
  PhaseProblem p;
  p.phase = std::move(phase);
  p.objective = [](const ParamVector& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  };
  p.gradient = [](const ParamVector& x) {
    GradientVector g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = 2 * x[i];
    return g;
  };
  return p;
}

AdamConfig quick(int max_iters, double threshold = 1e-12, int patience = 1000000) {
  AdamConfig c;
  c.max_iters = max_iters;
  c.cost_threshold = threshold;
  c.patience = patience;
  return c;
}

}  // namespace

TEST(AdamStep, FirstStepMatchesHandEvaluation) {
  AdamState s = AdamState::zeros(1);
  ParamVector p{0.0};
  adam_step(s, p, {1.0}, AdamConfig{});
  EXPECT_NEAR(p[0], -0.01 / (1 + 1e-8), 1e-15);
  EXPECT_EQ(s.step_count, 1);
}

TEST(AdamStep, ZeroGradientLeavesParameters) {
  AdamState s = AdamState::zeros(3);
  ParamVector p{0.5, -1.0, 2.0};
  for (int k = 0; k < 10; ++k) adam_step(s, p, {0.0, 0.0, 0.0}, AdamConfig{});
  EXPECT_EQ(p, (ParamVector{0.5, -1.0, 2.0}));
  EXPECT_EQ(s.step_count, 10);
}

TEST(AdamStep, RejectsLengthMismatch) {
  AdamState s = AdamState::zeros(2);
  ParamVector p{0.0, 0.0};
  EXPECT_THROW(adam_step(s, p, {1.0}, AdamConfig{}), std::invalid_argument);
}

TEST(AdamStep, MinimizesParabola) {
  AdamState s = AdamState::zeros(1);
  ParamVector p{1.0};
  int steps = 0;
  while (std::abs(p[0]) >= 1e-3 && steps < 2000) {
    adam_step(s, p, {2 * p[0]}, AdamConfig{});
    ++steps;
  }
  EXPECT_LT(std::abs(p[0]), 1e-3);
}

// Reference recursion written out directly.
TEST(Properties, AdamMatchesReferenceRecursion) {
  testkit::for_all(20, 1, [](Gen& g) {
    AdamConfig cfg;
    cfg.alpha = g.uniform(1e-3, 0.1);
    cfg.beta1 = g.uniform(0.5, 0.95);
    cfg.beta2 = g.uniform(0.8, 0.999);
    const std::size_t n = static_cast<std::size_t>(g.integer(1, 5));
    ParamVector p = g.angles(n);
    std::vector<double> ref = p;
    std::vector<double> m(n, 0.0);
    std::vector<double> v(n, 0.0);
    AdamState s = AdamState::zeros(n);
    for (int t = 1; t <= 30; ++t) {
      GradientVector grad(n);
      for (double& x : grad) x = g.normal();
      adam_step(s, p, grad, cfg);
      for (std::size_t i = 0; i < n; ++i) {
        m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * grad[i] * grad[i];
        const double mh = m[i] / (1 - std::pow(cfg.beta1, t));
        const double vh = v[i] / (1 - std::pow(cfg.beta2, t));
        ref[i] -= cfg.alpha * mh / (std::sqrt(vh) + cfg.epsilon);
      }
    }
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(p[i], ref[i], 1e-12);
  });
}

TEST(Properties, AdamIsDeterministic) {
  testkit::for_all(10, 2, [](Gen& g) {
    const std::size_t n = 4;
    const ParamVector start = g.angles(n);
    std::vector<GradientVector> grads(15, GradientVector(n));
    for (auto& gr : grads) {
      for (double& x : gr) x = g.normal();
    }
    auto run = [&] {
      AdamState s = AdamState::zeros(n);
      ParamVector p = start;
      for (const auto& gr : grads) adam_step(s, p, gr, AdamConfig{});
      return p;
    };
    EXPECT_EQ(run(), run());
  });
}

TEST(AdamConfig, ValidatesRanges) {
  AdamConfig c;
  EXPECT_NO_THROW(c.validate());
  c.beta1 = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = AdamConfig{};
  c.alpha = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = AdamConfig{};
  c.epsilon = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(TrainPhase, ThresholdMetAtEntry) {
  TrainingTrace trace;
  const PhaseOutcome out = train_phase(quadratic(), {1e-4}, quick(100, 1e-6), trace);
  EXPECT_EQ(out.reason, StopReason::Threshold);
  EXPECT_EQ(trace.size(), 1U);
  EXPECT_EQ(out.iterations, 1);
}

TEST(TrainPhase, MaxItersGivesExactRowCount) {
  TrainingTrace trace;
  PhaseProblem p = quadratic();
  p.objective = [](const ParamVector&) { return 1.0; };
  p.gradient = [](const ParamVector& x) { return GradientVector(x.size(), 1.0); };
  const PhaseOutcome out = train_phase(p, {0.0, 0.0}, quick(5), trace);
  EXPECT_EQ(out.reason, StopReason::MaxIters);
  EXPECT_EQ(trace.size(), 5U);
  EXPECT_EQ(out.iterations, 5);
}

TEST(TrainPhase, PatienceStopsFlatObjective) {
  TrainingTrace trace;
  PhaseProblem p = quadratic();
  p.objective = [](const ParamVector&) { return 0.5; };
  const PhaseOutcome out = train_phase(p, {1.0}, quick(1000, 1e-12, 7), trace);
  EXPECT_EQ(out.reason, StopReason::Patience);
  EXPECT_EQ(out.iterations, 8);
}

TEST(TrainPhase, ZeroGradientKeepsParameters) {
  TrainingTrace trace;
  PhaseProblem p = quadratic();
  p.gradient = [](const ParamVector& x) { return GradientVector(x.size(), 0.0); };
  const PhaseOutcome out = train_phase(p, {0.3, -0.2}, quick(50), trace);
  EXPECT_EQ(out.params, (ParamVector{0.3, -0.2}));
}

TEST(TrainPhase, ReturnsBestPointAndRecordsDiagnostics) {
  TrainingTrace trace;
  PhaseProblem p = quadratic("local");
  int calls = 0;
  p.diagnostics = [&](const ParamVector&) {
    ++calls;
    return std::pair{0.25, 0.75};
  };
  const PhaseOutcome out = train_phase(p, {1.0}, quick(2000, 1e-6), trace);
  EXPECT_EQ(out.reason, StopReason::Threshold);
  EXPECT_LT(out.best_objective, 1e-6);
  EXPECT_EQ(calls, static_cast<int>(trace.size()));
  for (const auto& r : trace.rows()) {
    EXPECT_EQ(r.phase, "local");
    EXPECT_EQ(r.fidelity, 0.25);
    EXPECT_EQ(r.hst_cost, 0.75);
  }
}

TEST(TrainPhase, NumericalErrorsNamePhaseAndIteration) {
  TrainingTrace trace;
  PhaseProblem p = quadratic("cd");
  p.objective = [](const ParamVector& x) { return x[0] > 0.995 ? 1.0 : std::nan(""); };
  try {
    train_phase(p, {1.0}, quick(100), trace);
    FAIL() << "expected a numerical error";
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("phase 'cd'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("iteration"), std::string::npos) << msg;
  }
}

TEST(TrainingTrace, PhasesFormContiguousSegments) {
  TrainingTrace trace;
  train_phase(quadratic("a"), {1.0}, quick(3), trace);
  train_phase(quadratic("b"), {1.0}, quick(4), trace);
  const auto seg = trace.segments();
  ASSERT_EQ(seg.size(), 2U);
  EXPECT_EQ(seg[0].phase, "a");
  EXPECT_EQ(seg[0].count, 3U);
  EXPECT_EQ(seg[1].first, 3U);
  EXPECT_EQ(seg[1].count, 4U);
  for (std::size_t i = 0; i < trace.size(); ++i) EXPECT_EQ(trace.rows()[i].iteration, static_cast<long>(i));
  TraceRow stale;
  stale.iteration = 2;
  EXPECT_THROW(trace.append(stale), std::invalid_argument);
}

TEST(TrainingTrace, CsvRoundTrip) {
  TrainingTrace trace;
  train_phase(quadratic("cd"), {0.7, -0.1}, quick(6), trace);
  std::stringstream buf;
  trace.write_csv(buf);
  EXPECT_EQ(buf.str().substr(0, buf.str().find('\n')), TrainingTrace::kHeader);
  const TrainingTrace back = TrainingTrace::read_csv(buf);
  ASSERT_EQ(back.size(), trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    EXPECT_EQ(back.rows()[i].iteration, trace.rows()[i].iteration);
    EXPECT_EQ(back.rows()[i].phase, trace.rows()[i].phase);
    EXPECT_EQ(back.rows()[i].objective, trace.rows()[i].objective);
  }
  std::stringstream no_time;
  trace.write_csv(no_time, false);
  for (const auto& r : TrainingTrace::read_csv(no_time).rows()) EXPECT_EQ(r.wall_time_ms, 0.0);
}

TEST(TrainingTrace, ReadRejectsMalformedInput) {
  std::stringstream bad_header("iter,phase\n");
  EXPECT_THROW(TrainingTrace::read_csv(bad_header), std::invalid_argument);
  std::stringstream empty;
  EXPECT_THROW(TrainingTrace::read_csv(empty), std::invalid_argument);
  std::stringstream short_row(std::string(TrainingTrace::kHeader) + "\n0,cd,1.0\n");
  try {
    TrainingTrace::read_csv(short_row, "t.csv");
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("t.csv:2"), std::string::npos) << e.what();
  }
  std::stringstream decreasing(std::string(TrainingTrace::kHeader) + "\n1,cd,1,0,0,0\n0,cd,1,0,0,0\n");
  EXPECT_THROW(TrainingTrace::read_csv(decreasing), std::invalid_argument);
}
