#pragma once

// Perron data of the diagonal blocks and the projection constants that
// weight admissible paths.

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <utility>
#include <vector>

#include "qergodic/error.hpp"
#include "qergodic/structure.hpp"

namespace qergodic {

struct PerronOptions {
  double tol = 1e-13;
  long max_iter = 1'000'000;
};

struct BlockSpectrum {
  double rho = 0.0;
  Vector v;  // right, sum 1
  Vector u;  // left, u^T v = 1
  double sub_modulus = 0.0;
  Index period = 1;
  bool primitive = true;
  bool scalar = true;
};

namespace detail {

// Dominant nonnegative eigenvector of a (possibly reducible, but with a
// common dominant root on every class) nonnegative matrix. The start vector is
// (a + sI)^(2^40) 1 from normalized squaring, s the max row sum; the shift
// moves roots near -rho (nearly periodic blocks) away from the top one.
inline Vector power_vector(const Matrix& a, const PerronOptions& opt, double& lambda) {
  const Index n = a.rows();
  Matrix b = a + a.rowwise().sum().maxCoeff() * Matrix::Identity(n, n);
  for (int s = 0; s < 40; ++s) {
    const double m = b.maxCoeff();
    if (!(m > 0.0) || !std::isfinite(m)) break;
    b /= m;
    b = b * b;
  }
  Vector x = b.rowwise().sum();
  if (!(x.sum() > 0.0) || !x.allFinite()) x = Vector::Ones(n);
  x /= x.sum();
  for (long it = 0; it < opt.max_iter; ++it) {
    Vector y = a * x;
    lambda = y.sum();
    if (!(lambda > 0.0)) throw Error(Errc::NoConvergence, "block iterate vanished");
    y /= lambda;
    const double res = (a * y - lambda * y).cwiseAbs().maxCoeff();
    x = std::move(y);
    if (res <= opt.tol * lambda) return x;
  }
  std::ostringstream os;
  os << "power iteration did not converge in " << opt.max_iter << " iterations";
  throw Error(Errc::NoConvergence, os.str());
}

// Spectral radius of b by Gelfand's formula at exponent 2^12, log-scaled.
inline double gelfand_radius(Matrix b) {
  double log_norm = 0.0;
  double nm = b.norm();
  if (nm == 0.0) return 0.0;
  b /= nm;
  log_norm = std::log(nm);
  for (int s = 0; s < 12; ++s) {
    b = b * b;
    log_norm *= 2.0;
    nm = b.norm();
    if (nm == 0.0 || !std::isfinite(log_norm)) return 0.0;
    b /= nm;
    log_norm += std::log(nm);
  }
  return std::exp(log_norm / 4096.0);
}

}  // namespace detail

/// Perron root and normalized eigenvectors of an irreducible nonnegative
/// block. Period-h blocks are iterated through block^h; the eigenvector of the
/// block itself is the cycle average sum_{i<h} block^i x / rho^i.
inline BlockSpectrum perron_block(const Matrix& block, const PerronOptions& opt = {}) {
  if (!(opt.tol > 0.0) || opt.tol > 1e-8) {
    throw Error(Errc::ToleranceTooLoose, "power-iteration tolerance must lie in (0, 1e-8]");
  }
  BlockSpectrum s;
  const Index n = block.rows();
  s.scalar = n == 1;
  s.period = block_period(block);
  s.primitive = is_primitive(block);
  if (s.scalar) {
    s.rho = block(0, 0);
    s.v = Vector::Ones(1);
    s.u = Vector::Ones(1);
    return s;
  }
  const Index h = s.period;
  const Matrix a = matrix_power(block, h);
  double lam = 0.0;
  const Vector x = detail::power_vector(a, opt, lam);
  s.rho = std::pow(lam, 1.0 / static_cast<double>(h));
  const Vector y = detail::power_vector(a.transpose(), opt, lam);

  Vector v = Vector::Zero(n), u = Vector::Zero(n);
  Vector xi = x, yi = y;
  for (Index i = 0; i < h; ++i) {
    v += xi;
    u += yi;
    xi = block * xi / s.rho;
    yi = block.transpose() * yi / s.rho;
  }
  v /= v.sum();
  u /= u.dot(v);
  s.rho = u.dot(block * v);  // two-sided Rayleigh quotient: error quadratic in the vectors
  s.v = std::move(v);
  s.u = std::move(u);
  s.sub_modulus = detail::gelfand_radius(block - s.rho * s.v * s.u.transpose());
  return s;
}

/// Coefficient of v in x = alpha v + w with w in the complementary invariant
/// subspace; u^T annihilates that subspace, so alpha = u^T x.
inline double projection_coefficient(const BlockSpectrum& s, const Vector& x) {
  if (x.size() != s.u.size()) throw Error(Errc::ShapeMismatch, "vector does not match block");
  return s.u.dot(x);
}

/// Per-block spectra with the declared policy for deciding rho_i = rho_j.
struct SpectrumSet {
  std::vector<BlockSpectrum> blocks;
  std::vector<double> scalar_entry;  // literal 1x1 entry, NaN for larger blocks
  double rho_max = 0.0;
  Index argmax = 0;
  double rho_eq_tol = 1e-9;
  bool exact_scalar_compare = true;
  std::vector<std::pair<Index, Index>> near_ties;

  Index k() const { return static_cast<Index>(blocks.size()); }
  double rho(Index i) const { return blocks[i].rho; }

  bool rho_equal(Index i, Index j) const {
    if (i == j) return true;
    if (exact_scalar_compare && blocks[i].scalar && blocks[j].scalar) {
      return scalar_entry[i] == scalar_entry[j];
    }
    const double a = rho(i), b = rho(j);
    return std::abs(a - b) <= rho_eq_tol * std::max(a, b);
  }
  /// rho_i < rho_j under the equality policy.
  bool rho_less(Index i, Index j) const { return !rho_equal(i, j) && rho(i) < rho(j); }
};

inline SpectrumSet compute_spectra(const FrobeniusForm& form, double rho_eq_tol = 1e-9,
                                   bool exact_scalar_compare = true,
                                   const PerronOptions& opt = {}) {
  if (!(rho_eq_tol >= 0.0)) throw Error(Errc::InvalidArgument, "rho_eq_tol must be nonnegative");
  SpectrumSet set;
  set.rho_eq_tol = rho_eq_tol;
  set.exact_scalar_compare = exact_scalar_compare;
  for (Index b = 0; b < form.k(); ++b) {
    const Matrix& blk = form.diag_blocks[b];
    set.blocks.push_back(perron_block(blk, opt));
    set.scalar_entry.push_back(blk.rows() == 1 ? blk(0, 0) : std::nan(""));
    if (set.blocks.back().rho > set.rho_max) {
      set.rho_max = set.blocks.back().rho;
      set.argmax = b;
    }
  }
  const Index k = set.k();
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < k; ++j) {
      if (!set.rho_equal(i, j)) continue;
      for (Index l = 0; l < k; ++l) {
        if (set.rho_equal(j, l) && !set.rho_equal(i, l)) {
          std::ostringstream os;
          os << "rho of blocks " << i + 1 << ", " << j + 1 << ", " << l + 1
             << " are not transitively equal under tolerance " << rho_eq_tol;
          throw Error(Errc::NonTransitiveTies, os.str());
        }
      }
    }
  }
  for (Index i = 0; i < k; ++i) {
    for (Index j = i + 1; j < k; ++j) {
      const double a = set.rho(i), b = set.rho(j);
      const double gap = std::abs(a - b);
      const bool eq = set.rho_equal(i, j);
      if ((eq && gap > 0.0) || (!eq && gap <= 1e3 * rho_eq_tol * std::max(a, b))) {
        set.near_ties.emplace_back(i, j);
      }
    }
  }
  return set;
}

struct PathAlpha {
  double value = 0.0;
  double magnitude = 0.0;  // same product with |u|^T |x|; zero only structurally
};

/// alpha_theta for a block path theta (theta[0] > theta[1] > ...): the
/// projection of `terminal` (normal order, all ones by default) onto the last
/// block's Perron vector, times the projections of Q_{theta_u theta_{u+1}} v
/// for every link.
inline PathAlpha path_alpha(const FrobeniusForm& form, const SpectrumSet& spectra,
                            const std::vector<Index>& theta, const Vector* terminal = nullptr) {
  if (theta.empty()) throw Error(Errc::InvalidArgument, "empty path");
  const Index last = theta.back();
  const Vector g = terminal ? form.segment(*terminal, last)
                            : Vector::Ones(form.block_size(last));
  const auto& sl = spectra.blocks[last];
  PathAlpha a{projection_coefficient(sl, g), sl.u.cwiseAbs().dot(g.cwiseAbs())};
  for (size_t p = 0; p + 1 < theta.size(); ++p) {
    const Index i = theta[p], j = theta[p + 1];
    const Vector x = form.block(i, j) * spectra.blocks[j].v;
    const auto& si = spectra.blocks[i];
    a.value *= projection_coefficient(si, x);
    a.magnitude *= si.u.cwiseAbs().dot(x.cwiseAbs());
  }
  return a;
}

}  // namespace qergodic
