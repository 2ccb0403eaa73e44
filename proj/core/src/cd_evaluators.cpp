#include "decoupler/cd_evaluators.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

namespace decoupler {

namespace {

void mix(std::uint64_t& h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
}

std::uint64_t bits_of(double x) { return std::bit_cast<std::uint64_t>(x); }

bool shifted(const DoubledBinding& b) { return b.shift_copy != ShiftCopy::None && b.shift_amount != 0.0; }

}  // namespace

std::uint64_t circuit_fingerprint(const Circuit& circuit) {
  std::uint64_t h = static_cast<std::uint64_t>(circuit.num_qubits());
  mix(h, static_cast<std::uint64_t>(circuit.num_params()));
  for (const GateOp& g : circuit.gates()) {
    mix(h, static_cast<std::uint64_t>(g.kind));
    for (int t : g.targets) mix(h, static_cast<std::uint64_t>(t));
    if (g.is_parameterized()) {
      mix(h, static_cast<std::uint64_t>(g.axis));
      mix(h, static_cast<std::uint64_t>(g.param_index));
      mix(h, bits_of(g.sign));
    }
    if (g.matrix) {
      for (Eigen::Index i = 0; i < g.matrix->size(); ++i) {
        mix(h, bits_of(g.matrix->data()[i].real()));
        mix(h, bits_of(g.matrix->data()[i].imag()));
      }
    }
  }
  return h;
}

CostEstimate CdEvaluator::evaluate(const Circuit& w, const DoubledBinding& binding,
                                   const Partition& partition) {
  ++evaluations_;
  return do_evaluate(w, binding, partition);
}

CostEstimate CdEvaluator::evaluate(const Circuit& w, std::span<const double> params,
                                   const Partition& partition) {
  return evaluate(w, DoubledBinding::shared(ParamVector(params.begin(), params.end())), partition);
}

CostEstimate DensityCdEvaluator::do_evaluate(const Circuit& w, const DoubledBinding& binding,
                                             const Partition& partition) {
  return decoupling_cost_exact_doubled(w, binding, partition);
}

void ChoiCdEvaluator::refresh(const Circuit& w, const ParamVector& base, const Partition& partition) {
  const std::uint64_t fp = circuit_fingerprint(w);
  const std::string spec = partition.to_string();
  if (valid_ && cache_.fingerprint == fp && cache_.base == base && cache_.partition == spec) return;
  partition.require_width(w.num_qubits());
  check_params(w, base);
  if (!valid_ || cache_.fingerprint != fp || cache_.partition != spec || !cache_.form) {
    cache_.form = std::make_unique<SwapContraction>(w.num_qubits(), partition);
  }
  cache_.fingerprint = fp;
  cache_.partition = spec;
  cache_.base = base;
  cache_.shifts = std::make_unique<RotationShiftCache>(w, base);
  cache_.chi = choi_vector(cache_.shifts->unitary());
  cache_.bound = cache_.form->bind(cache_.chi);
  cache_.a = cache_.bound->quad(cache_.chi);
  cache_.terms.clear();
  valid_ = true;
}

CostEstimate ChoiCdEvaluator::do_evaluate(const Circuit& w, const DoubledBinding& binding,
                                          const Partition& partition) {
  refresh(w, binding.base, partition);
  const double norm = cache_.form->norm();
  CostEstimate est;
  const bool used = binding.shift_index < w.param_gate().size() &&
                    w.param_gate()[binding.shift_index] >= 0;
  if (!shifted(binding) || !used) {
    est.value = norm * (1.0 - cache_.a);
    if (!std::isfinite(est.value)) throw NumericalError("decoupling cost is not finite");
    if (est.value < -1e-10 || est.value > 1.0 + 1e-10) {
      throw NumericalError("decoupling cost " + std::to_string(est.value) + " outside [0, 1]");
    }
    est.value = std::clamp(est.value, 0.0, 1.0);
    return est;
  }
  auto it = cache_.terms.find(binding.shift_index);
  if (it == cache_.terms.end()) {
    // W(theta_i + s) = c W - i sn W K with K the generator conjugated by the
    // gates before the rotation. Both copies give the same value.
    const Matrix k = cache_.shifts->conjugated_generator(binding.shift_index);
    const Vector beta = choi_vector(cache_.shifts->unitary() * k);
    const Vector o_beta = cache_.bound->apply(beta);
    ShiftTerms t;
    t.z = cache_.chi.dot(o_beta);
    t.b = beta.dot(o_beta).real();
    t.sign = cache_.shifts->sign(binding.shift_index);
    it = cache_.terms.emplace(binding.shift_index, t).first;
  }
  const ShiftTerms& t = it->second;
  const double s = t.sign * binding.shift_amount;
  const double c = std::cos(s / 2.0);
  const double sn = std::sin(s / 2.0);
  const double mean = c * c * cache_.a + sn * sn * t.b + 2.0 * c * sn * t.z.imag();
  est.value = norm * (1.0 - mean);
  if (!std::isfinite(est.value)) throw NumericalError("decoupling cost is not finite");
  return est;
}

SampledCdEvaluator::SampledCdEvaluator(long shots, std::uint64_t seed) : shots_(shots), rng_(seed) {
  if (shots < 1) throw std::invalid_argument("sampled evaluator needs at least one shot");
}

CostEstimate SampledCdEvaluator::do_evaluate(const Circuit& w, const DoubledBinding& binding,
                                             const Partition& partition) {
  return decoupling_cost_sampled_doubled(w, binding, partition, shots_, rng_);
}

std::unique_ptr<CdEvaluator> make_evaluator(const EvaluatorSpec& spec) {
  switch (spec.mode) {
    case EvaluatorSpec::Mode::Exact: return std::make_unique<ChoiCdEvaluator>();
    case EvaluatorSpec::Mode::Density: return std::make_unique<DensityCdEvaluator>();
    case EvaluatorSpec::Mode::Sampled: return std::make_unique<SampledCdEvaluator>(spec.shots, spec.seed);
  }
  throw std::invalid_argument("unknown evaluator mode");
}

}  // namespace decoupler
