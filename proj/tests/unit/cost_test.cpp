#include <array>
#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "decoupler/cost.hpp"
#include "testkit.hpp"

using namespace decoupler;
using testkit::Gen;
using testkit::Mat;
using Blocks = std::vector<std::vector<int>>;

namespace {

Circuit gate_circuit(int n, const Mat& u) {
  std::vector<int> all;
  for (int q = 0; q < n; ++q) all.push_back(q);
  CircuitBuilder b(n);
  b.constant(u, all);
  return b.build();
}

Circuit cnot_circuit() {
  CircuitBuilder b(2);
  b.cnot(0, 1);
  return b.build();
}

const Partition& halves2() {
  static const Partition p(Blocks{{0}, {1}});
  return p;
}

double exact(const Circuit& c, const Partition& p) { return decoupling_cost_exact(c, {}, p).value; }

Mat singlet_projector() {
  testkit::Vec s = testkit::Vec::Zero(4);
  s(1) = 1.0 / std::sqrt(2.0);
  s(2) = -1.0 / std::sqrt(2.0);
  return s * s.adjoint();
}

}  // namespace

TEST(GateFidelity, ReferenceValues) {
  Gen g(1);
  const Mat u = g.unitary(4);
  EXPECT_NEAR(gate_fidelity(u, u), 1.0, 1e-12);
  EXPECT_NEAR(gate_fidelity(testkit::identity(2), testkit::pauli('X')), 1.0 / 3.0, 1e-15);
  const Mat zi = testkit::kron(testkit::pauli('Z'), testkit::identity(2));
  EXPECT_NEAR(gate_fidelity(testkit::identity(4), zi), 1.0 / 5.0, 1e-15);
  EXPECT_THROW(gate_fidelity(testkit::identity(2), testkit::identity(4)), std::invalid_argument);
}

TEST(HstCost, ReferenceValues) {
  Gen g(2);
  const Mat u = g.unitary(4);
  EXPECT_NEAR(hst_cost(u, u), 0.0, 1e-12);
  EXPECT_NEAR(hst_cost(testkit::identity(2), testkit::pauli('X')), 1.0, 1e-15);
  const Mat zi = testkit::kron(testkit::pauli('Z'), testkit::identity(2));
  EXPECT_NEAR(hst_cost(testkit::identity(4), zi), 1.0, 1e-15);
}

TEST(LhstCost, ReferenceValues) {
  Gen g(3);
  const Mat u = g.unitary(8);
  EXPECT_NEAR(lhst_cost(u, u), 0.0, 1e-12);
  EXPECT_NEAR(lhst_cost(testkit::identity(2), testkit::pauli('X')), 1.0, 1e-15);
  EXPECT_THROW(lhst_cost(testkit::identity(2), testkit::identity(4)), std::invalid_argument);
}

// Per-qubit Bell overlap from the reduced Choi state, computed with index loops.
TEST(LhstCost, MatchesReducedChoiDefinition) {
  testkit::for_all(20, 4, [](Gen& g) {
    const int n = g.integer(1, 3);
    const int d = 1 << n;
    const Mat u = g.unitary(d);
    const Mat v = g.unitary(d);
    const Mat m = v.adjoint() * u;
    // |chi> = (m (x) I)|Phi+>, output qubits first, reference n..2n-1.
    testkit::Vec chi = testkit::Vec::Zero(d * d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) chi(i * d + j) = m(i, j) / std::sqrt(static_cast<double>(d));
    }
    const Mat rho = chi * chi.adjoint();
    testkit::Vec phi = testkit::Vec::Zero(4);
    phi(0) = phi(3) = 1.0 / std::sqrt(2.0);
    double cost = 0.0;
    for (int q = 0; q < n; ++q) {
      const Mat pair = testkit::reduce(rho, 2 * n, {q, n + q});
      cost += 1.0 - (phi.adjoint() * pair * phi)(0, 0).real();
    }
    EXPECT_NEAR(lhst_cost(u, v), cost / n, 1e-12);
  });
}

TEST(LhstCost, JointlyFaithfulWithHst) {
  testkit::for_all(30, 5, [](Gen& g) {
    const Mat u = g.unitary(4);
    const Mat v = g.unitary(4);
    EXPECT_GT(hst_cost(u, v), 1e-10);
    EXPECT_GT(lhst_cost(u, v), 1e-10);
    const Mat same = std::exp(testkit::C(0, g.angle())) * u;
    EXPECT_LT(hst_cost(u, same), 1e-10);
    EXPECT_LT(lhst_cost(u, same), 1e-10);
  });
}

TEST(Properties, HstZeroExactlyWhenFidelityOne) {
  testkit::for_all(30, 6, [](Gen& g) {
    const int d = 1 << g.integer(1, 3);
    const Mat u = g.unitary(d);
    const Mat v = g.uniform() < 0.5 ? Mat(std::exp(testkit::C(0, g.angle())) * u) : g.unitary(d);
    const bool zero = hst_cost(u, v) < 1e-12;
    const bool one = std::abs(gate_fidelity(u, v) - 1.0) < 1e-12;
    EXPECT_EQ(zero, one);
  });
}

TEST(SymmetricTau, SingleQubitRemovesSinglet) {
  const DensityOperator tau = symmetric_tau(1);
  EXPECT_NEAR(tau.matrix().trace().real(), 1.0, 1e-15);
  const Mat expected = (testkit::identity(4) - singlet_projector()) / 3.0;
  EXPECT_LT(testkit::max_abs(tau.matrix() - expected), 1e-15);
}

TEST(SymmetricTau, InvariantUnderCopySwap) {
  for (int m = 1; m <= 3; ++m) {
    const Matrix tau = symmetric_tau(m).matrix();
    EXPECT_LT(testkit::max_abs(swap_operator(m) * tau - tau), 1e-12) << "m=" << m;
  }
  EXPECT_THROW(symmetric_tau(0), std::invalid_argument);
}

TEST(SymmetricTau, EqualsHaarSecondMoment) {
  Gen g(7);
  const int samples = 100000;
  Mat sum = Mat::Zero(4, 4);
  Eigen::MatrixXd re2 = Eigen::MatrixXd::Zero(4, 4);
  Eigen::MatrixXd im2 = Eigen::MatrixXd::Zero(4, 4);
  for (int s = 0; s < samples; ++s) {
    const testkit::Vec psi = g.state(2);
    const testkit::Vec pp = testkit::kron(psi, psi);
    const Mat x = pp * pp.adjoint();
    sum += x;
    re2 += x.real().cwiseAbs2();
    im2 += x.imag().cwiseAbs2();
  }
  const Mat mean = sum / samples;
  const Matrix tau = symmetric_tau(1).matrix();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double se_re = std::sqrt(std::max(re2(i, j) / samples - std::pow(mean(i, j).real(), 2), 0.0) / samples);
      const double se_im = std::sqrt(std::max(im2(i, j) / samples - std::pow(mean(i, j).imag(), 2), 0.0) / samples);
      EXPECT_NEAR(mean(i, j).real(), tau(i, j).real(), 3 * se_re + 1e-12) << i << "," << j;
      EXPECT_NEAR(mean(i, j).imag(), tau(i, j).imag(), 3 * se_im + 1e-12) << i << "," << j;
    }
  }
}

TEST(SampleSymmetricPair, SingleQubitIsUniformOverThreePairs) {
  Rng rng(11);
  const int draws = 10000;
  std::map<std::pair<int, int>, int> counts;
  long attempts = 0;
  for (int k = 0; k < draws; ++k) {
    const SymmetricPair p = sample_symmetric_pair(1, rng);
    ASSERT_EQ(p.z1.size(), 1U);
    ++counts[{p.z1[0], p.z2[0]}];
    attempts += p.attempts;
  }
  ASSERT_EQ(counts.size(), 3U);
  EXPECT_EQ(counts.count({1, 1}), 0U);
  const double pexp = 1.0 / 3.0;
  const double sigma = std::sqrt(draws * pexp * (1 - pexp));
  for (const auto& [pair, c] : counts) EXPECT_NEAR(c, draws * pexp, 3 * sigma);
  EXPECT_GE(static_cast<double>(draws) / static_cast<double>(attempts), 0.5);
}

TEST(SampleSymmetricPair, ParityEvenAndAcceptanceAtLeastHalf) {
  for (int m = 1; m <= 6; ++m) {
    Rng rng(100 + static_cast<std::uint64_t>(m));
    long attempts = 0;
    const int draws = 10000;
    for (int k = 0; k < draws; ++k) {
      const SymmetricPair p = sample_symmetric_pair(m, rng);
      int dot = 0;
      for (int i = 0; i < m; ++i) dot += p.z1[static_cast<std::size_t>(i)] * p.z2[static_cast<std::size_t>(i)];
      ASSERT_EQ(dot % 2, 0);
      attempts += p.attempts;
    }
    // Acceptance probability is (2^(2m-1) + 2^(m-1)) / 4^m, above 1/2.
    EXPECT_GE(static_cast<double>(draws) / static_cast<double>(attempts), 0.5) << "m=" << m;
  }
}

TEST(PrepareBellPairState, ReferenceStates) {
  const std::array<std::uint8_t, 1> zero{0};
  const std::array<std::uint8_t, 1> one{1};
  const PureState phi = prepare_bell_pair_state(zero, zero);
  EXPECT_NEAR(std::abs(phi[0] - 1.0 / std::sqrt(2.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(phi[3] - 1.0 / std::sqrt(2.0)), 0.0, 1e-15);
  const PureState singlet = prepare_bell_pair_state(one, one);
  const testkit::Vec amps = singlet.amplitudes();
  EXPECT_NEAR((amps.adjoint() * singlet_projector() * amps)(0, 0).real(), 1.0, 1e-12);
  const std::array<std::uint8_t, 2> two{0, 1};
  EXPECT_THROW(prepare_bell_pair_state(zero, two), std::invalid_argument);
}

// Pair i is (alpha qubit i, beta qubit m + i): X^z1 Z^z2 on the alpha qubit of |Phi+>.
TEST(PrepareBellPairState, MatchesPauliRotatedBellPairs) {
  for (int m = 1; m <= 2; ++m) {
    const int n = 2 * m;
    testkit::Vec phi = testkit::Vec::Zero(1 << n);
    for (std::size_t x = 0; x < (std::size_t{1} << m); ++x) phi(static_cast<Eigen::Index>((x << m) | x)) = 1.0;
    phi /= phi.norm();
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
      std::vector<std::uint8_t> z1(static_cast<std::size_t>(m));
      std::vector<std::uint8_t> z2(static_cast<std::size_t>(m));
      Mat op = testkit::identity(1 << n);
      for (int i = 0; i < m; ++i) {
        z1[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((bits >> (2 * i)) & 1U);
        z2[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((bits >> (2 * i + 1)) & 1U);
        Mat s = testkit::identity(2);
        if (z1[static_cast<std::size_t>(i)]) s = testkit::pauli('X') * s;
        if (z2[static_cast<std::size_t>(i)]) s = s * testkit::pauli('Z');
        op = testkit::on_qubit(s, i, n) * op;
      }
      const testkit::Vec expected = op * phi;
      const double overlap = std::norm(expected.dot(prepare_bell_pair_state(z1, z2).amplitudes()));
      EXPECT_NEAR(overlap, 1.0, 1e-12) << "m=" << m << " bits=" << bits;
    }
  }
}

TEST(PrepareBellPairState, EvenParityMixtureIsTau) {
  for (int m = 1; m <= 3; ++m) {
    const int n = 2 * m;
    Mat mix = Mat::Zero(1 << n, 1 << n);
    int count = 0;
    for (std::uint64_t a = 0; a < (std::uint64_t{1} << m); ++a) {
      for (std::uint64_t b = 0; b < (std::uint64_t{1} << m); ++b) {
        if (std::popcount(a & b) % 2) continue;
        std::vector<std::uint8_t> z1;
        std::vector<std::uint8_t> z2;
        for (int i = m - 1; i >= 0; --i) {
          z1.push_back(static_cast<std::uint8_t>((a >> i) & 1U));
          z2.push_back(static_cast<std::uint8_t>((b >> i) & 1U));
        }
        const testkit::Vec v = prepare_bell_pair_state(z1, z2).amplitudes();
        mix += v * v.adjoint();
        ++count;
      }
    }
    EXPECT_EQ(count, (1 << (2 * m - 1)) + (1 << (m - 1)));
    EXPECT_LT(testkit::max_abs(mix / count - symmetric_tau(m).matrix()), 1e-12) << "m=" << m;
  }
}

TEST(SwapOperator, InvolutionAndPurityIdentity) {
  Gen g(13);
  for (int m = 1; m <= 3; ++m) {
    const Matrix s = swap_operator(m);
    EXPECT_LT(testkit::max_abs(s * s - testkit::identity(1 << (2 * m))), 1e-12);
    const Mat rho = g.density(1 << m);
    EXPECT_NEAR((testkit::kron(rho, rho) * s).trace().real(), testkit::purity(rho), 1e-12);
  }
}

// Projectors from the symmetrized and antisymmetrized product basis.
TEST(SwapOperator, DifferenceOfSymmetricAndAntisymmetricProjectors) {
  for (int m = 1; m <= 3; ++m) {
    const int d = 1 << m;
    Mat ps = Mat::Zero(d * d, d * d);
    Mat pa = Mat::Zero(d * d, d * d);
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        testkit::Vec sym = testkit::Vec::Zero(d * d);
        testkit::Vec anti = testkit::Vec::Zero(d * d);
        sym(i * d + j) += 1.0;
        sym(j * d + i) += 1.0;
        ps += sym * sym.adjoint() / sym.squaredNorm();
        if (i != j) {
          anti(i * d + j) = 1.0;
          anti(j * d + i) = -1.0;
          pa += anti * anti.adjoint() / 2.0;
        }
      }
    }
    EXPECT_LT(testkit::max_abs(swap_operator(m) - (ps - pa)), 1e-12) << "m=" << m;
    EXPECT_NEAR(ps.trace().real(), (d * d + d) / 2.0, 1e-12);
  }
}

TEST(PauliTranspose, EqualsTranspose) {
  testkit::for_all(20, 14, [](Gen& g) {
    const int n = g.integer(1, 2);
    const Mat rho = g.density(1 << n);
    EXPECT_LT(testkit::max_abs(pauli_transpose(rho, n) - rho.transpose()), 1e-12);
  });
}

TEST(DecouplingCostExact, ReferenceCircuits) {
  EXPECT_NEAR(exact(Circuit::empty(2), halves2()), 0.0, 1e-12);
  CircuitBuilder sw(2);
  sw.swap(0, 1);
  EXPECT_NEAR(exact(sw.build(), halves2()), 0.0, 1e-12);
  EXPECT_NEAR(exact(cnot_circuit(), halves2()), 8.0 / 27.0, 1e-9);
  const CostEstimate e = decoupling_cost_exact(cnot_circuit(), {}, halves2());
  EXPECT_EQ(e.std_error, 0.0);
}

TEST(DecouplingCostExact, CnotMatchesMonteCarloDefinition) {
  Gen g(15);
  const testkit::McResult mc =
      testkit::decoupling_cost_by_definition(testkit::cnot(0, 1, 2), {{0}, {1}}, 200000, g);
  EXPECT_NEAR(exact(cnot_circuit(), halves2()), mc.mean, 4 * mc.std_error);
  EXPECT_NEAR(testkit::decoupling_cost_by_moments(testkit::cnot(0, 1, 2), {{0}, {1}}), 8.0 / 27.0, 1e-12);
}

TEST(DecouplingCostExact, MatchesClosedFormMoments) {
  testkit::for_all(20, 16, [](Gen& g) {
    const int n = g.integer(2, 3);
    const Mat w = g.unitary(1 << n);
    const std::vector<std::vector<int>> blocks = n == 2 ? std::vector<std::vector<int>>{{0}, {1}}
                                                        : std::vector<std::vector<int>>{{0, 2}, {1}};
    const Partition p(blocks);
    const double oracle = testkit::decoupling_cost_by_moments(w, blocks);
    const Circuit c = gate_circuit(n, w);
    EXPECT_NEAR(decoupling_cost_exact(c, {}, p).value, oracle, 1e-10);
    EXPECT_NEAR(decoupling_cost_choi(w, w, p), oracle, 1e-10);
  });
}

TEST(DecouplingCostExact, RejectsMismatchedPartition) {
  EXPECT_THROW(decoupling_cost_exact(cnot_circuit(), {}, Partition(Blocks{{0}, {1}, {2}})), std::invalid_argument);
}

TEST(Properties, FaithfulOnLocalAndSwappedLocal) {
  testkit::for_all(20, 17, [](Gen& g) {
    const bool four = g.uniform() < 0.5;
    const int b = four ? 4 : 2;
    const int n = four ? 4 : 2;
    const Mat local = testkit::kron(g.unitary(b), g.unitary(b));
    const Partition p = four ? Partition(Blocks{{0, 1}, {2, 3}}) : halves2();
    Mat swapped = testkit::swap_gate(0, n / 2, n);
    if (four) swapped = testkit::swap_gate(1, 3, n) * swapped;
    EXPECT_LT(exact(gate_circuit(n, local), p), 1e-10);
    EXPECT_LT(exact(gate_circuit(n, local * swapped), p), 1e-10);
  });
}

TEST(Properties, ExactCostInUnitInterval) {
  testkit::for_all(100, 18, [](Gen& g) {
    const int n = g.integer(2, 3);
    const Partition p = n == 2 ? halves2() : Partition(Blocks{{0}, {1, 2}});
    const double c = exact(gate_circuit(n, g.unitary(1 << n)), p);
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, 1.0 + 1e-10);
  });
}

TEST(Properties, FidelityBoundedByDecouplingCost) {
  testkit::for_all(200, 19, [](Gen& g) {
    const Mat w = g.unitary(4);
    const Mat local = testkit::kron(g.unitary(2), g.unitary(2));
    const double c = decoupling_cost_choi(w, w, halves2());
    EXPECT_LE(std::pow(gate_fidelity(local, w), 2), fidelity_upper_bound(c, 2) + 1e-9);
  });
}

TEST(Properties, ExactAndMonteCarloAgree) {
  testkit::for_all(10, 20, [](Gen& g) {
    const bool four = g.uniform() < 0.5;
    const int n = four ? 4 : 2;
    const Partition p = four ? Partition(Blocks{{0, 1}, {2, 3}}) : halves2();
    const Circuit c = gate_circuit(n, g.unitary(1 << n));
    Rng rng(g.next());
    const CostEstimate mc = decoupling_cost_mc(c, {}, p, 20000, rng);
    EXPECT_NEAR(mc.value, exact(c, p), 4 * mc.std_error);
  });
}

TEST(DecouplingCostSampled, IdentityIsExactlyZero) {
  Rng rng(21);
  const CostEstimate e = decoupling_cost_sampled(Circuit::empty(2), {}, halves2(), 1000, rng);
  EXPECT_EQ(e.value, 0.0);
  EXPECT_EQ(e.shots_used, 1000);
}

TEST(DecouplingCostSampled, CnotWithinFourStandardErrors) {
  Rng rng(22);
  const CostEstimate e = decoupling_cost_sampled(cnot_circuit(), {}, halves2(), 100000, rng);
  EXPECT_GT(e.std_error, 0.0);
  EXPECT_NEAR(e.value, 8.0 / 27.0, 4 * e.std_error);
}

TEST(DecouplingCostSampled, DeterministicForSeed) {
  Rng a(23);
  Rng b(23);
  EXPECT_EQ(decoupling_cost_sampled(cnot_circuit(), {}, halves2(), 5000, a).value,
            decoupling_cost_sampled(cnot_circuit(), {}, halves2(), 5000, b).value);
  Rng c(23);
  EXPECT_THROW(decoupling_cost_sampled(cnot_circuit(), {}, halves2(), 0, c), std::invalid_argument);
}

TEST(DecouplingCostSampled, RecordsGiveSameEstimate) {
  Rng a(24);
  Rng b(24);
  const DoubledBinding shared = DoubledBinding::shared({});
  const auto records = sample_shot_records(cnot_circuit(), shared, halves2(), 3000, a);
  ASSERT_EQ(records.size(), 3000U);
  for (const auto& r : records) {
    ASSERT_EQ(r.z1.size(), 2U);
    ASSERT_EQ(r.z2.size(), 2U);
  }
  const CostEstimate direct = decoupling_cost_sampled(cnot_circuit(), {}, halves2(), 3000, b);
  EXPECT_NEAR(estimate_from_records(records, halves2()).value, direct.value, 1e-12);
}

TEST(Properties, SampledConsistentWithExact) {
  int outside = 0;
  testkit::for_all(20, 25, [&](Gen& g) {
    const Circuit c = gate_circuit(2, g.unitary(4));
    Rng rng(g.next());
    const CostEstimate e = decoupling_cost_sampled(c, {}, halves2(), 100000, rng);
    if (std::abs(e.value - exact(c, halves2())) > 4 * e.std_error) ++outside;
  });
  EXPECT_LE(outside, 1);
}

TEST(DecouplingCostMc, ReferenceCircuits) {
  Rng rng(26);
  EXPECT_NEAR(decoupling_cost_mc(Circuit::empty(2), {}, halves2(), 1000, rng).value, 0.0, 1e-15);
  CircuitBuilder sw(2);
  sw.swap(0, 1);
  const CostEstimate s = decoupling_cost_mc(sw.build(), {}, halves2(), 1000, rng);
  EXPECT_NEAR(s.value, 0.0, 4 * s.std_error + 1e-12);
  const CostEstimate c = decoupling_cost_mc(cnot_circuit(), {}, halves2(), 1000000, rng);
  EXPECT_NEAR(c.value, 8.0 / 27.0, 4 * c.std_error);
}

TEST(FidelityUpperBound, ReferenceValues) {
  EXPECT_EQ(fidelity_upper_bound(0.0, 2), 1.0);
  EXPECT_NEAR(fidelity_upper_bound(1.0, 2), 3.0 / 5.0, 1e-15);
  EXPECT_NEAR(fidelity_upper_bound(0.5, 4), 0.5 + 3.0 / 17.0, 1e-15);
  EXPECT_THROW(fidelity_upper_bound(1.5, 2), std::invalid_argument);
}

TEST(Partition, ParseAndValidate) {
  const Partition p = Partition::parse("0;1;2,3@0,1");
  EXPECT_EQ(p.num_qubits(), 4);
  EXPECT_EQ(p.blocks().size(), 3U);
  EXPECT_EQ(p.scored(), (std::vector<int>{0, 1}));
  EXPECT_EQ(p.min_scored_block_size(), 1);
  EXPECT_EQ(Partition::parse(p.to_string()).blocks(), p.blocks());
  EXPECT_THROW(Partition::parse("0;0"), std::invalid_argument);
  EXPECT_THROW(Partition::parse("0;2"), std::invalid_argument);
  EXPECT_THROW(Partition::parse("0;1@2"), std::invalid_argument);
  EXPECT_THROW(Partition::parse("0;x"), std::invalid_argument);
  EXPECT_THROW(Partition::parse(""), std::invalid_argument);
  EXPECT_THROW(Partition(Blocks{{0}, {}}), std::invalid_argument);
}

TEST(Partition, Refinement) {
  const Partition coarse({{0, 1}, {2, 3}});
  EXPECT_TRUE(Partition(Blocks{{0}, {1}, {2, 3}}).refines(coarse));
  EXPECT_FALSE(Partition(Blocks{{0, 2}, {1}, {3}}).refines(coarse));
  EXPECT_TRUE(coarse.refines(coarse));
}

TEST(NormFactor, UsesSmallestScoredBlock) {
  EXPECT_NEAR(norm_factor(Partition(Blocks{{0}, {1}})), 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(norm_factor(Partition(Blocks{{0, 1}, {2, 3}})), 16.0 / 15.0, 1e-15);
  EXPECT_NEAR(norm_factor(Partition(Blocks{{0}, {1, 2}}, {1})), 16.0 / 15.0, 1e-15);
}
