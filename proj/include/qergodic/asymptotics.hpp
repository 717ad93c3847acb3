#pragma once

// Path-product sums over Gamma and their closed-form asymptotics: literal
// enumeration for small horizons, a scaled recursion for large ones, and
// ratio diagnostics between sequences.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "qergodic/error.hpp"
#include "qergodic/model.hpp"
#include "qergodic/paths.hpp"
#include "qergodic/spectral.hpp"
#include "qergodic/structure.hpp"

namespace qergodic {

/// D_0 L_0 D_1 L_1 ... D_{K-1} with dwell exponents: evaluates
/// sum over eta in Gamma_K(m+1-K) of D_0^{eta_0} L_0 D_1^{eta_1} ... D_{K-1}^{eta_{K-1}}.
struct ChainProduct {
  std::vector<Matrix> diag;
  std::vector<Matrix> link;  // size diag.size() - 1
};

/// Matrix value times exp(log_scale).
struct ScaledMatrix {
  Matrix value;
  double log_scale = 0.0;

  Matrix unscaled() const { return value * std::exp(log_scale); }
};

inline Matrix chain_brute(const ChainProduct& c, std::int64_t m) {
  const auto K = static_cast<std::int64_t>(c.diag.size());
  const Index rows = c.diag.front().rows(), cols = c.diag.back().cols();
  Matrix total = Matrix::Zero(rows, cols);
  for (const auto& eta : gamma_enumerate(K, m + 1 - K)) {
    Matrix p = matrix_power(c.diag[0], eta[0]);
    for (std::int64_t u = 1; u < K; ++u) p = p * c.link[u - 1] * matrix_power(c.diag[u], eta[u]);
    total += p;
  }
  return total;
}

/// W_u(s+1) = W_u(s) D_u + W_{u-1}(s) L_{u-1}, W_0(0) = Id; the result is
/// W_{K-1}(m). All partial sums share one running scale.
inline ScaledMatrix chain_recursive(const ChainProduct& c, std::int64_t m) {
  const size_t K = c.diag.size();
  const Index rows = c.diag.front().rows();
  std::vector<Matrix> w(K);
  w[0] = Matrix::Identity(rows, rows);
  for (size_t u = 1; u < K; ++u) w[u] = Matrix::Zero(rows, c.diag[u].cols());
  double log_scale = 0.0;
  for (std::int64_t s = 0; s < m; ++s) {
    for (size_t u = K; u-- > 0;) {
      Matrix next = w[u] * c.diag[u];
      if (u > 0) next += w[u - 1] * c.link[u - 1];
      w[u] = std::move(next);
    }
    double mx = 0.0;
    for (const auto& x : w) mx = std::max(mx, x.cwiseAbs().maxCoeff());
    if (mx > 0.0 && (mx < 1e-100 || mx > 1e100)) {
      for (auto& x : w) x /= mx;
      log_scale += std::log(mx);
    }
  }
  return {w[K - 1], log_scale};
}

namespace detail {

inline ChainProduct path_chain(const FrobeniusForm& form, const Path& theta) {
  ChainProduct c;
  for (size_t u = 0; u < theta.size(); ++u) {
    c.diag.push_back(form.diag_blocks[theta[u]]);
    if (u + 1 < theta.size()) c.link.push_back(form.block(theta[u], theta[u + 1]));
  }
  return c;
}

// The path with block ell doubled, joined by `mid`.
inline ChainProduct split_chain(const FrobeniusForm& form, const Path& theta, Index ell,
                                const Matrix& mid) {
  const auto [under, over] = split_at(theta, ell);
  ChainProduct c = path_chain(form, under);
  const ChainProduct tail = path_chain(form, over);
  c.link.push_back(mid);
  c.diag.insert(c.diag.end(), tail.diag.begin(), tail.diag.end());
  c.link.insert(c.link.end(), tail.link.begin(), tail.link.end());
  return c;
}

}  // namespace detail

/// Block (i,j) of Q^n for i >= j, by propagating the block row i of Q^n.
inline Matrix q_block_power(const FrobeniusForm& form, Index i, Index j, std::int64_t n) {
  if (i < j) throw Error(Errc::InvalidArgument, "q_block_power needs i >= j");
  std::vector<Matrix> row(static_cast<size_t>(i + 1));
  for (Index c = 0; c <= i; ++c) {
    row[c] = c == i ? Matrix(Matrix::Identity(form.block_size(i), form.block_size(i)))
                    : Matrix(Matrix::Zero(form.block_size(i), form.block_size(c)));
  }
  for (std::int64_t s = 0; s < n; ++s) {
    std::vector<Matrix> next(row.size());
    for (Index c = 0; c <= i; ++c) {
      Matrix acc = Matrix::Zero(form.block_size(i), form.block_size(c));
      for (Index mid = c; mid <= i; ++mid) {
        if (mid == c || form.linked(mid, c)) acc += row[mid] * form.block(mid, c);
      }
      next[c] = std::move(acc);
    }
    row = std::move(next);
  }
  return row[j];
}

/// Q(theta, n): literal sum over Gamma_kappa(n+1-kappa) up to n_brute, the
/// recursion beyond.
inline Matrix q_theta_n(const FrobeniusForm& form, const Path& theta, std::int64_t n,
                        std::int64_t n_brute = 25) {
  const auto c = detail::path_chain(form, theta);
  return n <= n_brute ? chain_brute(c, n) : chain_recursive(c, n).unscaled();
}

inline ScaledMatrix q_theta_n_scaled(const FrobeniusForm& form, const Path& theta,
                                     std::int64_t n) {
  return chain_recursive(detail::path_chain(form, theta), n);
}

/// hat Q^(ell)(theta, n): block ell repeated with an identity link,
/// sum over Gamma_{kappa+1}(n+1-kappa).
inline Matrix hat_q_ell(const FrobeniusForm& form, const Path& theta, Index ell, std::int64_t n,
                        std::int64_t n_brute = 25) {
  const auto c = detail::split_chain(
      form, theta, ell, Matrix::Identity(form.block_size(ell), form.block_size(ell)));
  return n <= n_brute ? chain_brute(c, n + 1) : chain_recursive(c, n + 1).unscaled();
}

/// sum_{r=0}^{n} Q(under, r) Q(over, n-r).
inline Matrix hat_q_ell_convolution(const FrobeniusForm& form, const Path& theta, Index ell,
                                    std::int64_t n, std::int64_t n_brute = 25) {
  const auto [under, over] = split_at(theta, ell);
  Matrix acc = Matrix::Zero(form.block_size(theta.front()), form.block_size(theta.back()));
  for (std::int64_t r = 0; r <= n; ++r) {
    acc += q_theta_n(form, under, r, n_brute) * q_theta_n(form, over, n - r, n_brute);
  }
  return acc;
}

/// hat Q^(ell,t)(theta, n): as hat_q_ell with e_t e_t^T in place of Id (t 0-based).
inline Matrix hat_q_ell_t(const FrobeniusForm& form, const Path& theta, Index ell, Index t,
                          std::int64_t n, std::int64_t n_brute = 25) {
  const Index dl = form.block_size(ell);
  if (t < 0 || t >= dl) throw Error(Errc::InvalidArgument, "t outside block");
  Matrix e = Matrix::Zero(dl, dl);
  e(t, t) = 1.0;
  const auto c = detail::split_chain(form, theta, ell, e);
  return n <= n_brute ? chain_brute(c, n + 1) : chain_recursive(c, n + 1).unscaled();
}

inline Matrix hat_q_ell_t_convolution(const FrobeniusForm& form, const Path& theta, Index ell,
                                      Index t, std::int64_t n, std::int64_t n_brute = 25) {
  const auto [under, over] = split_at(theta, ell);
  Matrix acc = Matrix::Zero(form.block_size(theta.front()), form.block_size(theta.back()));
  for (std::int64_t r = 0; r <= n; ++r) {
    const Matrix a = q_theta_n(form, under, r, n_brute);
    const Matrix b = q_theta_n(form, over, n - r, n_brute);
    acc += a.col(t) * b.row(t);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Scalar sequences

namespace detail {

inline ChainProduct scalar_chain(const std::vector<double>& rhos) {
  ChainProduct c;
  for (size_t u = 0; u < rhos.size(); ++u) {
    c.diag.push_back(Matrix::Constant(1, 1, rhos[u]));
    if (u + 1 < rhos.size()) c.link.push_back(Matrix::Ones(1, 1));
  }
  return c;
}

struct RootSplit {
  double top = 0.0;
  Index h_plus = 0;
  std::vector<double> minus;
};

inline RootSplit split_roots(const std::vector<double>& rhos, double rel_tol) {
  RootSplit s;
  s.top = *std::max_element(rhos.begin(), rhos.end());
  for (double r : rhos) {
    if (std::abs(r - s.top) <= rel_tol * s.top) {
      ++s.h_plus;
    } else {
      s.minus.push_back(r);
    }
  }
  return s;
}

inline double log_factorial(std::int64_t n) { return std::lgamma(static_cast<double>(n) + 1.0); }

}  // namespace detail

/// log xi_n with xi_n = sum over Gamma_kappa(n+1-kappa) of prod rho_u^{eta_u}.
inline double log_xi_n(const std::vector<double>& rhos, std::int64_t n) {
  const auto r = chain_recursive(detail::scalar_chain(rhos), n);
  return std::log(r.value(0, 0)) + r.log_scale;
}

inline double xi_n(const std::vector<double>& rhos, std::int64_t n) {
  return std::exp(log_xi_n(rhos, n));
}

/// Direct enumeration of xi_n (small n only).
inline double xi_n_brute(const std::vector<double>& rhos, std::int64_t n) {
  return chain_brute(detail::scalar_chain(rhos), n)(0, 0);
}

/// log of rho^{n+1-kappa} n^{h+-1}/(h+-1)! prod_{H-} 1/(1 - rho_u/rho).
inline double log_closed_form_xi(const std::vector<double>& rhos, std::int64_t n,
                                 double rel_tol = 1e-9) {
  const auto s = detail::split_roots(rhos, rel_tol);
  const auto kappa = static_cast<std::int64_t>(rhos.size());
  double v = static_cast<double>(n + 1 - kappa) * std::log(s.top) - detail::log_factorial(s.h_plus - 1);
  if (s.h_plus > 1) v += static_cast<double>(s.h_plus - 1) * std::log(static_cast<double>(n));
  for (double r : s.minus) v -= std::log1p(-r / s.top);
  return v;
}

inline double closed_form_xi(const std::vector<double>& rhos, std::int64_t n,
                             double rel_tol = 1e-9) {
  return std::exp(log_closed_form_xi(rhos, n, rel_tol));
}

/// Xi^m_l(zeta) = sum over eta_1..eta_l >= 0 with eta_1+...+eta_l <= m of
/// prod zeta_i^{eta_i}; equivalently a sum over Gamma_{l+1}(m) with one slack
/// coordinate. Computed by exact-total convolution.
inline double xi_aux(const std::vector<double>& zetas, std::int64_t m) {
  if (m < 0) return 0.0;
  std::vector<double> a(static_cast<size_t>(m + 1), 0.0);
  a[0] = 1.0;
  for (double z : zetas) {
    std::vector<double> b(a.size(), 0.0);
    for (std::int64_t s = 0; s <= m; ++s) {
      double p = 1.0;
      for (std::int64_t e = 0; e <= s; ++e) {
        b[s] += a[s - e] * p;
        p *= z;
      }
    }
    a = std::move(b);
  }
  double total = 0.0;
  for (double x : a) total += x;
  return total;
}

struct ProofSequences {
  double psi = 0.0;  // denominator term, divided by rho_max^n
  double xi = 0.0;   // numerator term, divided by rho_max^n
};

/// Psi_n(theta) and Xi_n(theta) for a maximal path, each divided by
/// rho_max^n. They differ only by (h-1)! versus h!.
inline ProofSequences proof_sequences(const AdmissiblePath& p, const SpectrumSet& spectra,
                                      double rho_max, Index h_max, std::int64_t n) {
  const double w = p.alpha * p.pi_mass;
  if (w == 0.0) return {};
  double base = std::log(std::abs(w)) +
                static_cast<double>(1 - p.kappa) * std::log(rho_max) +
                static_cast<double>(h_max) * std::log(static_cast<double>(n));
  for (Index u : p.H_minus) base -= std::log1p(-spectra.rho(p.theta[u]) / rho_max);
  const double sign = w < 0 ? -1.0 : 1.0;
  return {sign * std::exp(base - detail::log_factorial(h_max - 1)),
          sign * std::exp(base - detail::log_factorial(h_max))};
}

/// log(pi_{theta_1} Q(theta, n) g), pi and g in normal-form order.
inline double log_path_growth(const FrobeniusForm& form, const Path& theta,
                              const Vector& pi_normal, std::int64_t n,
                              const Vector* terminal_normal = nullptr) {
  const auto s = q_theta_n_scaled(form, theta, n);
  const Vector g = terminal_normal ? form.segment(*terminal_normal, theta.back())
                                   : Vector::Ones(form.block_size(theta.back()));
  const double x = form.segment(pi_normal, theta.front()).dot(s.value * g);
  return std::log(x) + s.log_scale;
}

/// log of alpha pi_mass rho^{n+1-kappa} n^{h-1}/(h-1)! prod_{H-} 1/(1 - rho_u/rho).
inline double log_path_growth_closed(const AdmissiblePath& p, const SpectrumSet& spectra,
                                     std::int64_t n) {
  double v = std::log(p.alpha * p.pi_mass) +
             static_cast<double>(n + 1 - p.kappa) * std::log(p.rho_theta) -
             detail::log_factorial(p.h_plus - 1);
  if (p.h_plus > 1) v += static_cast<double>(p.h_plus - 1) * std::log(static_cast<double>(n));
  for (Index u : p.H_minus) v -= std::log1p(-spectra.rho(p.theta[u]) / p.rho_theta);
  return v;
}

/// Conditioned occupation of state j from the generating function
/// g(z) = pi D_j(z) (Q D_j(z))^n 1, D_j(z) = diag(1,..,z,..,1):
/// g'(1) / ((n+1) g(1)), with g'/g from a central difference of log g.
inline double generating_function_occupation(const SubstochasticModel& m, Index j,
                                             std::int64_t n, double step = 1e-6) {
  if (!(step > 0.0)) throw Error(Errc::InvalidArgument, "step must be positive");
  auto log_g = [&](double z) {
    Vector d = Vector::Ones(m.size());
    d(j) = z;
    const Matrix qd = m.Q() * d.asDiagonal();
    Vector x = m.pi().cwiseProduct(d);
    double lg = 0.0;
    for (std::int64_t s = 0; s < n; ++s) {
      const double t = x.sum();
      lg += std::log(t);
      x = qd.transpose() * (x / t);
    }
    return lg + std::log(x.sum());
  };
  // pi_j = 0 and n = 0: g is constant.
  const double lp = log_g(1.0 + step), lm = log_g(1.0 - step);
  if (!std::isfinite(lp) || !std::isfinite(lm)) return 0.0;
  return (lp - lm) / (2.0 * step) / static_cast<double>(n + 1);
}

enum class Verdict { Converging, Diverging };

inline std::string to_string(Verdict v) {
  return v == Verdict::Converging ? "CONVERGING" : "DIVERGING";
}

struct RatioReport {
  std::vector<std::int64_t> grid;
  std::vector<double> ratios;
  double window_mean = 0.0;
  double drift = 0.0;  // last minus first ratio inside the window
  Verdict verdict = Verdict::Diverging;
};

/// Ratios a_n/b_n from log-values on a grid. CONVERGING iff |ratio - 1| does
/// not grow over the last `window` fraction of the grid and ends below tol.
inline RatioReport asymptotic_ratio_diagnostic(const std::vector<double>& log_a,
                                               const std::vector<double>& log_b,
                                               const std::vector<std::int64_t>& grid,
                                               double tol = 0.05, double window = 0.2) {
  if (log_a.size() != grid.size() || log_b.size() != grid.size() || grid.empty()) {
    throw Error(Errc::ShapeMismatch, "sequences must match the grid");
  }
  RatioReport r;
  r.grid = grid;
  for (size_t i = 0; i < grid.size(); ++i) r.ratios.push_back(std::exp(log_a[i] - log_b[i]));
  const size_t n = grid.size();
  const size_t len = std::max<size_t>(2, static_cast<size_t>(std::ceil(window * n)));
  const size_t start = n > len ? n - len : 0;
  bool shrinking = true;
  for (size_t i = start; i < n; ++i) {
    r.window_mean += r.ratios[i] / static_cast<double>(n - start);
    if (i > start && std::abs(r.ratios[i] - 1.0) > std::abs(r.ratios[i - 1] - 1.0) + 1e-12) {
      shrinking = false;
    }
  }
  r.drift = r.ratios[n - 1] - r.ratios[start];
  r.verdict = shrinking && std::abs(r.ratios[n - 1] - 1.0) <= tol ? Verdict::Converging
                                                                 : Verdict::Diverging;
  return r;
}

}  // namespace qergodic
