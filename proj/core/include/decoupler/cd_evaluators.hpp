#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "decoupler/circuit.hpp"
#include "decoupler/cost.hpp"

namespace decoupler {

/// Evaluates C_D for a circuit under a doubled binding and counts calls.
class CdEvaluator {
 public:
  virtual ~CdEvaluator() = default;

  CostEstimate evaluate(const Circuit& w, const DoubledBinding& binding, const Partition& partition);
  CostEstimate evaluate(const Circuit& w, std::span<const double> params, const Partition& partition);

  long evaluations() const { return evaluations_; }
  void reset_count() { evaluations_ = 0; }

  virtual std::string name() const = 0;

 protected:
  virtual CostEstimate do_evaluate(const Circuit& w, const DoubledBinding& binding,
                                   const Partition& partition) = 0;

 private:
  long evaluations_ = 0;
};

/// Literal density-matrix route (decoupling_cost_exact).
class DensityCdEvaluator final : public CdEvaluator {
 public:
  std::string name() const override { return "density"; }

 protected:
  CostEstimate do_evaluate(const Circuit& w, const DoubledBinding& binding,
                           const Partition& partition) override;
};

/// Exact evaluation through the Choi contraction. Results for one base point
/// are cached, so the shifted evaluations of a gradient cost one operator
/// application per parameter.
class ChoiCdEvaluator final : public CdEvaluator {
 public:
  std::string name() const override { return "exact"; }

 protected:
  CostEstimate do_evaluate(const Circuit& w, const DoubledBinding& binding,
                           const Partition& partition) override;

 private:
  struct ShiftTerms {
    Complex z;
    double b = 0.0;
    double sign = 1.0;
  };
  struct Cache {
    std::uint64_t fingerprint = 0;
    ParamVector base;
    std::string partition;
    std::unique_ptr<RotationShiftCache> shifts;
    std::unique_ptr<SwapContraction> form;
    std::optional<SwapContraction::Bound> bound;
    Vector chi;
    double a = 0.0;
    std::map<std::size_t, ShiftTerms> terms;
  };
  void refresh(const Circuit& w, const ParamVector& base, const Partition& partition);

  Cache cache_;
  bool valid_ = false;
};

/// Destructive swap test with a fixed number of shots per evaluation; draws
/// from its own seeded stream.
class SampledCdEvaluator final : public CdEvaluator {
 public:
  SampledCdEvaluator(long shots, std::uint64_t seed);
  std::string name() const override { return "sampled"; }
  long shots() const { return shots_; }

 protected:
  CostEstimate do_evaluate(const Circuit& w, const DoubledBinding& binding,
                           const Partition& partition) override;

 private:
  long shots_;
  Rng rng_;
};

struct EvaluatorSpec {
  enum class Mode { Exact, Density, Sampled };
  Mode mode = Mode::Exact;
  long shots = 0;
  std::uint64_t seed = 0;
};

std::unique_ptr<CdEvaluator> make_evaluator(const EvaluatorSpec& spec);

/// Structural hash of a circuit (gate kinds, targets, parameter slots and
/// constant matrix contents).
std::uint64_t circuit_fingerprint(const Circuit& circuit);

}  // namespace decoupler
