#pragma once

// Independent reference implementations and seeded generators for tests.
// Nothing here calls into the library's simulation code.

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

namespace testkit {

using C = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

/// splitmix64; deliberately not the library's generator.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : s_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (s_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double angle() { return uniform(-std::numbers::pi, std::numbers::pi); }
  int integer(int lo, int hi) { return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1)); }
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  std::vector<double> angles(std::size_t n) {
    std::vector<double> out(n);
    for (double& a : out) a = angle();
    return out;
  }

  /// Unitary by modified Gram-Schmidt on complex Gaussian columns.
  Mat unitary(int dim) {
    Mat m(dim, dim);
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) m(i, j) = C(normal(), normal());
    }
    for (int j = 0; j < dim; ++j) {
      for (int k = 0; k < j; ++k) m.col(j) -= m.col(k).dot(m.col(j)) * m.col(k);
      m.col(j) /= m.col(j).norm();
    }
    return m;
  }
  Vec state(int dim) {
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v(i) = C(normal(), normal());
    return v / v.norm();
  }
  /// Random density matrix of full rank.
  Mat density(int dim) {
    Mat g(dim, dim);
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) g(i, j) = C(normal(), normal());
    }
    Mat rho = g * g.adjoint();
    return rho / rho.trace().real();
  }

 private:
  std::uint64_t s_;
};

/// Runs `body` on `cases` generators derived from `seed`; failures name the case.
inline void for_all(int cases, std::uint64_t seed, const std::function<void(Gen&)>& body) {
  for (int c = 0; c < cases; ++c) {
    Gen g(seed * 1000003ULL + static_cast<std::uint64_t>(c));
    SCOPED_TRACE("property case " + std::to_string(c) + " of seed " + std::to_string(seed));
    body(g);
  }
}

inline double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  }
  return out;
}

inline Mat identity(int dim) { return Mat::Identity(dim, dim); }

inline Mat pauli(char axis) {
  Mat m(2, 2);
  switch (axis) {
    case 'X': m << 0, 1, 1, 0; break;
    case 'Y': m << 0, C(0, -1), C(0, 1), 0; break;
    case 'Z': m << 1, 0, 0, -1; break;
    default: m = identity(2);
  }
  return m;
}

inline Mat hadamard() {
  Mat m(2, 2);
  m << 1, 1, 1, -1;
  return m / std::sqrt(2.0);
}

/// exp(-i theta sigma / 2) = cos(theta/2) I - i sin(theta/2) sigma.
inline Mat rot(char axis, double theta) {
  return std::cos(theta / 2) * identity(2) - C(0, 1) * std::sin(theta / 2) * pauli(axis);
}

/// Single-qubit gate on qubit q of n (qubit 0 most significant).
inline Mat on_qubit(const Mat& g, int q, int n) {
  Mat out = Mat::Identity(1, 1);
  for (int k = 0; k < n; ++k) out = kron(out, k == q ? g : identity(2));
  return out;
}

/// Permutation matrix of a basis map.
inline Mat basis_map(int n, const std::function<std::size_t(std::size_t)>& f) {
  const std::size_t d = std::size_t{1} << n;
  Mat out = Mat::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t x = 0; x < d; ++x) out(static_cast<Eigen::Index>(f(x)), static_cast<Eigen::Index>(x)) = 1.0;
  return out;
}

inline std::size_t bit(std::size_t x, int q, int n) { return (x >> (n - 1 - q)) & 1U; }
inline std::size_t flip(std::size_t x, int q, int n) { return x ^ (std::size_t{1} << (n - 1 - q)); }

inline Mat cnot(int control, int target, int n) {
  return basis_map(n, [=](std::size_t x) { return bit(x, control, n) ? flip(x, target, n) : x; });
}

inline Mat swap_gate(int a, int b, int n) {
  return basis_map(n, [=](std::size_t x) { return bit(x, a, n) != bit(x, b, n) ? flip(flip(x, a, n), b, n) : x; });
}

/// RZ RY RZ in time order (matrix RZ(c) RY(b) RZ(a)).
inline Mat zyz(double a, double b, double c) { return rot('Z', c) * rot('Y', b) * rot('Z', a); }

/// Partial trace by explicit index loops; keeps `keep` in the given order.
inline Mat reduce(const Mat& rho, int n, const std::vector<int>& keep) {
  std::vector<int> traced;
  for (int q = 0; q < n; ++q) {
    bool kept = false;
    for (int k : keep) kept = kept || k == q;
    if (!kept) traced.push_back(q);
  }
  const int dk = 1 << keep.size();
  const int dt = 1 << traced.size();
  auto compose = [&](int a, int t) {
    std::size_t x = 0;
    for (std::size_t i = 0; i < keep.size(); ++i) {
      if ((a >> (keep.size() - 1 - i)) & 1) x |= std::size_t{1} << (n - 1 - keep[i]);
    }
    for (std::size_t i = 0; i < traced.size(); ++i) {
      if ((t >> (traced.size() - 1 - i)) & 1) x |= std::size_t{1} << (n - 1 - traced[i]);
    }
    return static_cast<Eigen::Index>(x);
  };
  Mat out = Mat::Zero(dk, dk);
  for (int a = 0; a < dk; ++a) {
    for (int b = 0; b < dk; ++b) {
      for (int t = 0; t < dt; ++t) out(a, b) += rho(compose(a, t), compose(b, t));
    }
  }
  return out;
}

inline double purity(const Mat& rho) { return (rho * rho).trace().real(); }

/// |Tr[v^dagger u]|^2 contraction of the average gate fidelity.
inline double fidelity(const Mat& u, const Mat& v) {
  const double d = static_cast<double>(u.rows());
  const double t = std::norm((v.adjoint() * u).trace());
  return (d + t) / (d * (d + 1));
}

/// Decoupling cost straight from its definition: Haar product inputs, mean
/// linear entropy of each block's output, scaled by 4^m / (4^m - 1).
struct McResult {
  double mean = 0.0;
  double std_error = 0.0;
};
inline McResult decoupling_cost_by_definition(const Mat& w, const std::vector<std::vector<int>>& blocks, long samples,
                                              Gen& g) {
  int n = 0;
  while ((1 << n) < w.rows()) ++n;
  std::size_t m = blocks.front().size();
  for (const auto& b : blocks) m = std::min(m, b.size());
  const double norm = std::pow(4.0, static_cast<double>(m)) / (std::pow(4.0, static_cast<double>(m)) - 1.0);
  double sum = 0.0;
  double sum2 = 0.0;
  for (long s = 0; s < samples; ++s) {
    // Product input over blocks, assembled qubit by qubit in block order.
    std::vector<Vec> parts;
    for (const auto& b : blocks) parts.push_back(g.state(1 << b.size()));
    Vec psi(1 << n);
    for (Eigen::Index x = 0; x < psi.size(); ++x) {
      C amp = 1.0;
      for (std::size_t k = 0; k < blocks.size(); ++k) {
        int local = 0;
        for (int q : blocks[k]) local = (local << 1) | static_cast<int>(bit(static_cast<std::size_t>(x), q, n));
        amp *= parts[k](local);
      }
      psi(x) = amp;
    }
    const Vec out = w * psi;
    const Mat rho = out * out.adjoint();
    double y = 0.0;
    for (const auto& b : blocks) y += 1.0 - purity(reduce(rho, n, b));
    y = norm * y / static_cast<double>(blocks.size());
    sum += y;
    sum2 += y * y;
  }
  McResult r;
  r.mean = sum / static_cast<double>(samples);
  const double var = (sum2 / static_cast<double>(samples) - r.mean * r.mean) * static_cast<double>(samples) /
                     static_cast<double>(samples - 1);
  r.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(samples));
  return r;
}

/// Same quantity in closed form. The Haar second moment of a block is
/// (I + S_b) / (d_b (d_b + 1)) on two copies, so the mean block purity is
/// Tr[(W (x) W) rho_in (W (x) W)^dagger S_b]. Copy one holds qubits 0..n-1.
inline double decoupling_cost_by_moments(const Mat& w, const std::vector<std::vector<int>>& blocks) {
  int n = 0;
  while ((1 << n) < w.rows()) ++n;
  const int d = 1 << (2 * n);
  std::vector<Mat> swaps;
  Mat rho = identity(d);
  std::size_t m = blocks.front().size();
  for (const auto& b : blocks) {
    Mat s = identity(d);
    for (int q : b) s = swap_gate(q, n + q, 2 * n) * s;
    const double db = static_cast<double>(1 << b.size());
    rho = rho * (identity(d) + s) / (db * (db + 1.0));
    swaps.push_back(s);
    m = std::min(m, b.size());
  }
  const Mat ww = kron(w, w);
  const Mat out = ww * rho * ww.adjoint();
  double mean = 0.0;
  for (const Mat& s : swaps) mean += (out * s).trace().real();
  mean /= static_cast<double>(swaps.size());
  const double q = std::pow(4.0, static_cast<double>(m));
  return q / (q - 1.0) * (1.0 - mean);
}

}  // namespace testkit
