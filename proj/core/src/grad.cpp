#include "decoupler/grad.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace decoupler {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

void check_length(std::span<const double> params, int expected) {
  if (params.size() != static_cast<std::size_t>(expected)) {
    throw std::invalid_argument("parameter vector has length " + std::to_string(params.size()) +
                                ", objective expects " + std::to_string(expected));
  }
}

void check_indices(std::span<const std::size_t> indices, std::size_t count) {
  for (std::size_t i : indices) {
    if (i >= count) throw std::invalid_argument("gradient index " + std::to_string(i) + " out of range");
  }
}

}  // namespace

std::vector<std::size_t> all_indices(std::size_t count) {
  std::vector<std::size_t> out(count);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

double Objective::value(std::span<const double> params) {
  check_length(params, num_params());
  ++evaluations_;
  return do_value(params);
}

double Objective::value_shifted(std::span<const double> params, std::size_t index, double shift) {
  check_length(params, num_params());
  if (index >= params.size()) throw std::invalid_argument("shift index out of range");
  ++evaluations_;
  return do_value_shifted(params, index, shift);
}

double Objective::do_value_shifted(std::span<const double> params, std::size_t index, double shift) {
  ParamVector p(params.begin(), params.end());
  p[index] += shift;
  return do_value(p);
}

StateExpectationObjective::StateExpectationObjective(Circuit circuit, PureState initial, Matrix observable)
    : circuit_(std::move(circuit)), initial_(std::move(initial)), observable_(std::move(observable)) {
  const auto d = static_cast<Eigen::Index>(dim_of(circuit_.num_qubits()));
  if (initial_.num_qubits() != circuit_.num_qubits() || observable_.rows() != d || observable_.cols() != d) {
    throw std::invalid_argument("state or observable width does not match circuit");
  }
  if (!is_hermitian(observable_, 1e-12)) throw std::invalid_argument("observable is not Hermitian");
}

double StateExpectationObjective::do_value(std::span<const double> params) {
  Vector psi = initial_.amplitudes();
  apply_in_place(circuit_, params, psi);
  return psi.dot(observable_ * psi).real();
}

UnitaryMatchObjective::UnitaryMatchObjective(Circuit ansatz, Matrix target, MatchMetric metric)
    : ansatz_(std::move(ansatz)), target_(std::move(target)), metric_(metric), n_(ansatz_.num_qubits()) {
  const auto d = static_cast<Eigen::Index>(dim_of(n_));
  if (target_.rows() != d || target_.cols() != d) {
    throw std::invalid_argument("target width does not match ansatz");
  }
}

void UnitaryMatchObjective::refresh(std::span<const double> params) {
  if (valid_ && std::equal(params.begin(), params.end(), base_.begin(), base_.end())) return;
  base_.assign(params.begin(), params.end());
  shifts_ = std::make_unique<RotationShiftCache>(ansatz_, params);
  m_ = shifts_->unitary().adjoint() * target_;
  terms_.clear();
  if (metric_ == MatchMetric::LHST) {
    chi_ = choi_vector(m_);
    a_ = local_bell_overlap(chi_, n_);
  } else {
    trace_ = m_.trace();
  }
  valid_ = true;
}

double UnitaryMatchObjective::do_value(std::span<const double> params) {
  refresh(params);
  if (metric_ == MatchMetric::LHST) return 1.0 - a_;
  const double d = static_cast<double>(m_.rows());
  return 1.0 - std::norm(trace_) / (d * d);
}

double UnitaryMatchObjective::do_value_shifted(std::span<const double> params, std::size_t index,
                                               double shift) {
  refresh(params);
  if (ansatz_.param_gate()[index] < 0) return do_value(params);
  auto it = terms_.find(index);
  if (it == terms_.end()) {
    // M(theta_i + s) = (c + i sn K) M with K the conjugated generator.
    const Matrix km = shifts_->conjugated_generator(index) * m_;
    Terms t;
    t.sign = shifts_->sign(index);
    if (metric_ == MatchMetric::LHST) {
      const Vector gamma = choi_vector(km);
      const Vector p_gamma = apply_local_bell_projector(gamma, n_);
      t.z = chi_.dot(p_gamma);
      t.b = gamma.dot(p_gamma).real();
    } else {
      t.z = km.trace();
    }
    it = terms_.emplace(index, t).first;
  }
  const Terms& t = it->second;
  const double s = t.sign * shift;
  const double c = std::cos(s / 2.0);
  const double sn = std::sin(s / 2.0);
  if (metric_ == MatchMetric::LHST) {
    return 1.0 - (c * c * a_ + sn * sn * t.b - 2.0 * c * sn * t.z.imag());
  }
  const double d = static_cast<double>(m_.rows());
  const Complex tr = c * trace_ + Complex(0.0, sn) * t.z;
  return 1.0 - std::norm(tr) / (d * d);
}

GradientVector shift_rule_gradient_cd(const Circuit& w, std::span<const double> params,
                                      const Partition& partition, CdEvaluator& evaluator,
                                      std::span<const std::size_t> indices, GradientVector* std_errors) {
  check_params(w, params);
  check_indices(indices, params.size());
  const ParamVector base(params.begin(), params.end());
  GradientVector grad(params.size(), 0.0);
  if (std_errors) std_errors->assign(params.size(), 0.0);
  for (std::size_t i : indices) {
    double sum = 0.0;
    double var = 0.0;
    for (ShiftCopy copy : {ShiftCopy::Alpha, ShiftCopy::Beta}) {
      const CostEstimate plus = evaluator.evaluate(w, DoubledBinding::shifted(base, copy, i, kHalfPi), partition);
      const CostEstimate minus = evaluator.evaluate(w, DoubledBinding::shifted(base, copy, i, -kHalfPi), partition);
      sum += plus.value - minus.value;
      var += plus.std_error * plus.std_error + minus.std_error * minus.std_error;
    }
    grad[i] = 0.5 * sum;
    if (!std::isfinite(grad[i])) throw NumericalError("non-finite gradient component " + std::to_string(i));
    if (std_errors) (*std_errors)[i] = 0.5 * std::sqrt(var);
  }
  return grad;
}

GradientVector shift_rule_gradient_cd(const Circuit& w, std::span<const double> params,
                                      const Partition& partition, CdEvaluator& evaluator,
                                      GradientVector* std_errors) {
  const auto idx = all_indices(params.size());
  return shift_rule_gradient_cd(w, params, partition, evaluator, idx, std_errors);
}

GradientVector shift_rule_gradient_expectation(Objective& objective, std::span<const double> params,
                                               std::span<const std::size_t> indices) {
  if (!objective.expectation_form()) {
    throw UnsupportedObjective("shift rule needs an expectation-form objective");
  }
  check_length(params, objective.num_params());
  check_indices(indices, params.size());
  GradientVector grad(params.size(), 0.0);
  for (std::size_t i : indices) {
    grad[i] = 0.5 * (objective.value_shifted(params, i, kHalfPi) - objective.value_shifted(params, i, -kHalfPi));
    if (!std::isfinite(grad[i])) throw NumericalError("non-finite gradient component " + std::to_string(i));
  }
  return grad;
}

GradientVector shift_rule_gradient_expectation(Objective& objective, std::span<const double> params) {
  const auto idx = all_indices(params.size());
  return shift_rule_gradient_expectation(objective, params, idx);
}

GradientVector finite_difference_gradient(Objective& objective, std::span<const double> params, double h) {
  return finite_difference_gradient(
      [&objective](std::span<const double> p) { return objective.value(p); }, params, h);
}

GradientVector finite_difference_gradient(const std::function<double(std::span<const double>)>& f,
                                          std::span<const double> params, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  ParamVector p(params.begin(), params.end());
  GradientVector grad(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + h;
    const double up = f(p);
    p[i] = saved - h;
    const double down = f(p);
    p[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace decoupler
