#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "decoupler/cd_evaluators.hpp"
#include "decoupler/circuit.hpp"
#include "decoupler/cost.hpp"

namespace decoupler {

using GradientVector = std::vector<double>;

/// Raised when a gradient rule is asked for an objective it does not cover.
class UnsupportedObjective : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Scalar objective of a parameter vector. Expectation-form objectives are
/// affine in Tr[A U rho U^dagger] for a circuit U whose parameters each feed
/// one Pauli rotation, so the two-point shift rule is exact for them.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual int num_params() const = 0;
  virtual bool expectation_form() const = 0;

  double value(std::span<const double> params);
  /// Value with params[index] replaced by params[index] + shift.
  double value_shifted(std::span<const double> params, std::size_t index, double shift);

  long evaluations() const { return evaluations_; }
  void reset_count() { evaluations_ = 0; }

 protected:
  virtual double do_value(std::span<const double> params) = 0;
  virtual double do_value_shifted(std::span<const double> params, std::size_t index, double shift);

 private:
  long evaluations_ = 0;
};

class FunctionObjective final : public Objective {
 public:
  using Fn = std::function<double(std::span<const double>)>;
  FunctionObjective(Fn fn, int num_params, bool expectation_form = false)
      : fn_(std::move(fn)), num_params_(num_params), expectation_form_(expectation_form) {}

  int num_params() const override { return num_params_; }
  bool expectation_form() const override { return expectation_form_; }

 protected:
  double do_value(std::span<const double> params) override { return fn_(params); }

 private:
  Fn fn_;
  int num_params_;
  bool expectation_form_;
};

/// <psi| U^dagger A U |psi>.
class StateExpectationObjective final : public Objective {
 public:
  StateExpectationObjective(Circuit circuit, PureState initial, Matrix observable);

  int num_params() const override { return circuit_.num_params(); }
  bool expectation_form() const override { return true; }

 protected:
  double do_value(std::span<const double> params) override;

 private:
  Circuit circuit_;
  PureState initial_;
  Matrix observable_;
};

enum class MatchMetric { LHST, HST };

/// LHST or HST cost between the unitary of an ansatz circuit and a fixed
/// target. Shifted values reuse a per-point cache of prefix products.
class UnitaryMatchObjective final : public Objective {
 public:
  UnitaryMatchObjective(Circuit ansatz, Matrix target, MatchMetric metric);

  int num_params() const override { return ansatz_.num_params(); }
  bool expectation_form() const override { return true; }
  const Circuit& ansatz() const { return ansatz_; }
  const Matrix& target() const { return target_; }

 protected:
  double do_value(std::span<const double> params) override;
  double do_value_shifted(std::span<const double> params, std::size_t index, double shift) override;

 private:
  struct Terms {
    Complex z;
    double b = 0.0;
    double sign = 1.0;
  };
  void refresh(std::span<const double> params);

  Circuit ansatz_;
  Matrix target_;
  MatchMetric metric_;
  int n_;
  ParamVector base_;
  bool valid_ = false;
  std::unique_ptr<RotationShiftCache> shifts_;
  Matrix m_;
  Vector chi_;
  Complex trace_;
  double a_ = 0.0;
  std::map<std::size_t, Terms> terms_;
};

/// Doubled shift rule: one half of the sum over both copies of the +pi/2 and
/// -pi/2 differences. Four evaluations per requested parameter; the other
/// entries are zero. `std_errors`, if given, receives the propagated
/// standard error of each component.
GradientVector shift_rule_gradient_cd(const Circuit& w, std::span<const double> params,
                                      const Partition& partition, CdEvaluator& evaluator,
                                      std::span<const std::size_t> indices,
                                      GradientVector* std_errors = nullptr);
GradientVector shift_rule_gradient_cd(const Circuit& w, std::span<const double> params,
                                      const Partition& partition, CdEvaluator& evaluator,
                                      GradientVector* std_errors = nullptr);

/// Two-point rule for expectation-form objectives; throws
/// UnsupportedObjective otherwise.
GradientVector shift_rule_gradient_expectation(Objective& objective, std::span<const double> params,
                                               std::span<const std::size_t> indices);
GradientVector shift_rule_gradient_expectation(Objective& objective, std::span<const double> params);

/// Central differences.
GradientVector finite_difference_gradient(Objective& objective, std::span<const double> params,
                                          double h = 1e-5);
GradientVector finite_difference_gradient(const std::function<double(std::span<const double>)>& f,
                                          std::span<const double> params, double h = 1e-5);

std::vector<std::size_t> all_indices(std::size_t count);

}  // namespace decoupler
