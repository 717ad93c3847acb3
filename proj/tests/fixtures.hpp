#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "qergodic/qergodic.hpp"

namespace fx {

using qergodic::Index;
using qergodic::Matrix;
using qergodic::Vector;

inline Matrix ex41(double r1 = 0.3, double r2 = 0.5) {
  Matrix q(2, 2);
  q << r1, 0, 1 - r2, r2;
  return q;
}

inline Matrix ex42(double rho, double q21, double q31, double q32) {
  Matrix q(3, 3);
  q << rho, 0, 0, q21, rho, 0, q31, q32, rho;
  return q;
}

inline Matrix ex43(double rho, double rho3, double q32, double q41, double q43) {
  Matrix q = Matrix::Zero(4, 4);
  q(0, 0) = rho;
  q(1, 1) = rho;
  q(2, 1) = q32;
  q(2, 2) = rho3;
  q(3, 0) = q41;
  q(3, 2) = q43;
  q(3, 3) = rho;
  return q;
}

inline Matrix ex44(double r1 = 0.5, double rho = 0.75, double q31 = 0.1, double q43 = 0.1,
                   double q52 = 0.1) {
  Matrix q = Matrix::Zero(5, 5);
  q(0, 0) = r1;
  for (int i = 1; i < 5; ++i) q(i, i) = rho;
  q(2, 0) = q31;
  q(3, 2) = q43;
  q(4, 1) = q52;
  return q;
}

inline Matrix ex45() {
  Matrix q(3, 3);
  q << 0.2, 0.1, 0, 0.1, 0, 0, 0.2, 0.3, 0.1;
  return q;
}

// Scalar block 0.8 above a 2x2 block with Perron root 0.5.
inline Matrix counterexample() {
  Matrix q(3, 3);
  q << 0.8, 0, 0, 0.1, 0.3, 0.2, 0.4, 0.1, 0.4;
  return q;
}

inline Matrix periodic_chain() {
  Matrix q(3, 3);
  q << 0, 0.9, 0, 0.8, 0, 0, 0.2, 0.1, 0.5;
  return q;
}

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

inline Vector uniform(Index d) { return Vector::Constant(d, 1.0 / static_cast<double>(d)); }

inline Vector random_pi(Index d, std::mt19937_64& rng, double zero_prob = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector p(d);
  for (Index i = 0; i < d; ++i) p(i) = u(rng) < zero_prob ? 0.0 : u(rng) + 1e-3;
  if (p.sum() == 0.0) p(d - 1) = 1.0;
  return p / p.sum();
}

// Random substochastic matrix: each row sums to at most 0.95, so every state
// leaks and the chain is transient.
inline Matrix random_q(Index d, std::mt19937_64& rng, double density = 0.5) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix q = Matrix::Zero(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      if (u(rng) < density) q(i, j) = u(rng);
    }
    if (q(i, (i + 1) % d) == 0.0) q(i, (i + 1) % d) = u(rng) + 0.01;
    const double s = q.row(i).sum();
    const double target = 0.2 + 0.75 * u(rng);
    if (s > 0) q.row(i) *= target / s;
  }
  return q;
}

// Lower triangular scalar chain with diagonal drawn from a few shared values
// so that ties in the Perron roots are common.
inline Matrix random_scalar_chain(Index k, std::mt19937_64& rng, double density = 0.6) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double levels[] = {0.3, 0.5, 0.7};
  Matrix q = Matrix::Zero(k, k);
  for (Index i = 0; i < k; ++i) {
    q(i, i) = levels[static_cast<int>(u(rng) * 3) % 3];
    double room = 0.95 - q(i, i);
    for (Index j = 0; j < i; ++j) {
      if (u(rng) < density) {
        q(i, j) = room * u(rng) / static_cast<double>(i);
      }
    }
  }
  return q;
}

inline std::vector<Index> random_perm(Index d, std::mt19937_64& rng) {
  std::vector<Index> p(static_cast<size_t>(d));
  std::iota(p.begin(), p.end(), Index{0});
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

// new state i is old state p[i]
inline Matrix permute(const Matrix& q, const std::vector<Index>& p) {
  const Index d = q.rows();
  Matrix r(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) r(i, j) = q(p[i], p[j]);
  }
  return r;
}

inline Vector permute(const Vector& v, const std::vector<Index>& p) {
  Vector r(v.size());
  for (Index i = 0; i < v.size(); ++i) r(i) = v(p[i]);
  return r;
}

// Conditioned occupation fractions by summing over every trajectory
// x_0..x_n of transient states.
inline Vector enumerate_occupation(const Matrix& q, const Vector& pi, int n) {
  const Index d = q.rows();
  Vector num = Vector::Zero(d);
  double den = 0.0;
  std::vector<Index> x(static_cast<size_t>(n + 1), 0);
  const auto total = static_cast<std::int64_t>(std::pow(static_cast<double>(d), n + 1));
  for (std::int64_t code = 0; code < total; ++code) {
    std::int64_t c = code;
    for (int t = 0; t <= n; ++t) {
      x[static_cast<size_t>(t)] = static_cast<Index>(c % d);
      c /= d;
    }
    double w = pi(x[0]);
    for (int t = 0; t < n && w != 0.0; ++t) w *= q(x[static_cast<size_t>(t)], x[static_cast<size_t>(t) + 1]);
    if (w == 0.0) continue;
    den += w;
    for (int t = 0; t <= n; ++t) num(x[static_cast<size_t>(t)]) += w / static_cast<double>(n + 1);
  }
  return num / den;
}

inline Matrix dense_power(const Matrix& a, int n) {
  Matrix r = Matrix::Identity(a.rows(), a.cols());
  for (int i = 0; i < n; ++i) r = r * a;
  return r;
}

}  // namespace fx
