#pragma once

// Admissible block paths, their classification, the maximal family and the
// Gamma_kappa(m) combinatorics.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qergodic/error.hpp"
#include "qergodic/spectral.hpp"
#include "qergodic/structure.hpp"

namespace qergodic {

/// Strictly decreasing sequence of 0-based block indices.
using Path = std::vector<Index>;

inline std::string format_path(const Path& theta) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < theta.size(); ++i) os << (i ? "," : "") << theta[i] + 1;
  os << ')';
  return os.str();
}

struct AdmissiblePath {
  Path theta;
  Index kappa = 0;
  double rho_theta = 0.0;
  Index top = 0;                // a block on theta attaining rho_theta
  std::vector<Index> H_plus;    // positions u (0-based) with rho_{theta_u} = rho_theta
  std::vector<Index> H_minus;   // the remaining positions
  Index h_plus = 0;
  Index h_minus = 0;
  double alpha = 0.0;
  double alpha_magnitude = 0.0;
  double pi_mass = 0.0;         // pi restricted to block theta_1, dotted with v
};

/// Depth-first enumeration over the block DAG (i -> j iff i > j and Q_ij is
/// structurally nonzero), singletons included, sorted lexicographically.
inline std::vector<Path> enumerate_paths(const FrobeniusForm& form, size_t cap = 1'000'000) {
  const Index k = form.k();
  std::vector<std::vector<Index>> next(k);
  for (const auto& [ij, blk] : form.sub_blocks) next[ij.first].push_back(ij.second);
  for (auto& n : next) std::sort(n.begin(), n.end());
  std::vector<Path> out;
  Path cur;
  std::function<void(Index)> dfs = [&](Index b) {
    cur.push_back(b);
    out.push_back(cur);
    if (out.size() > cap) {
      throw Error(Errc::PathExplosion,
                  "more than " + std::to_string(cap) + " admissible paths");
    }
    for (Index j : next[b]) dfs(j);
    cur.pop_back();
  };
  for (Index b = 0; b < k; ++b) dfs(b);
  std::sort(out.begin(), out.end());
  return out;
}

/// Fills rho(theta), H+/H-, alpha and the start mass. `pi` and `terminal` are
/// in normal-form order; terminal defaults to the all-ones vector.
inline AdmissiblePath classify_path(const FrobeniusForm& form, const SpectrumSet& spectra,
                                    const Path& theta, const Vector& pi,
                                    const Vector* terminal = nullptr) {
  AdmissiblePath p;
  p.theta = theta;
  p.kappa = static_cast<Index>(theta.size());
  p.top = theta.front();
  for (Index b : theta) {
    if (spectra.rho(b) > spectra.rho(p.top)) p.top = b;
  }
  p.rho_theta = spectra.rho(p.top);
  for (Index u = 0; u < p.kappa; ++u) {
    (spectra.rho_equal(theta[u], p.top) ? p.H_plus : p.H_minus).push_back(u);
  }
  p.h_plus = static_cast<Index>(p.H_plus.size());
  p.h_minus = static_cast<Index>(p.H_minus.size());
  const PathAlpha a = path_alpha(form, spectra, theta, terminal);
  p.alpha = a.value;
  p.alpha_magnitude = a.magnitude;
  p.pi_mass = form.segment(pi, theta.front()).dot(spectra.blocks[theta.front()].v);
  return p;
}

struct PathFamily {
  std::vector<AdmissiblePath> all;
  double rho_max_eff = 0.0;
  Index rho_max_block = 0;
  Index h_max = 0;
  std::vector<size_t> maximal;                // indices into all
  std::vector<std::vector<size_t>> per_block;  // block -> indices into all
  bool pi_restricted = true;

  const AdmissiblePath& at(size_t i) const { return all[i]; }
};

/// The maximal family. With `restrict_to_pi_support`, paths whose start block
/// carries no pi mass are dropped before rho_max and h+_max are taken.
inline PathFamily maximal_paths(std::vector<AdmissiblePath> paths, const SpectrumSet& spectra,
                                bool restrict_to_pi_support = true) {
  PathFamily f;
  f.all = std::move(paths);
  f.pi_restricted = restrict_to_pi_support;
  f.per_block.assign(static_cast<size_t>(spectra.k()), {});
  std::vector<size_t> cand;
  for (size_t i = 0; i < f.all.size(); ++i) {
    if (!restrict_to_pi_support || f.all[i].pi_mass != 0.0) cand.push_back(i);
  }
  if (cand.empty()) throw Error(Errc::EmptyFamily, "no admissible path starts in the support of pi");
  f.rho_max_block = f.all[cand.front()].top;
  for (size_t i : cand) {
    if (f.all[i].rho_theta > spectra.rho(f.rho_max_block)) f.rho_max_block = f.all[i].top;
  }
  f.rho_max_eff = spectra.rho(f.rho_max_block);
  std::vector<size_t> top;
  for (size_t i : cand) {
    if (spectra.rho_equal(f.all[i].top, f.rho_max_block)) {
      top.push_back(i);
      f.h_max = std::max(f.h_max, f.all[i].h_plus);
    }
  }
  for (size_t i : top) {
    if (f.all[i].h_plus != f.h_max) continue;
    f.maximal.push_back(i);
    for (Index b : f.all[i].theta) f.per_block[b].push_back(i);
  }
  return f;
}

/// Classified paths of the whole form plus the maximal family, in one step.
inline PathFamily path_family(const FrobeniusForm& form, const SpectrumSet& spectra,
                              const Vector& pi_normal, bool restrict_to_pi_support = true,
                              const Vector* terminal_normal = nullptr,
                              size_t cap = 1'000'000) {
  std::vector<AdmissiblePath> cls;
  for (const auto& theta : enumerate_paths(form, cap)) {
    cls.push_back(classify_path(form, spectra, theta, pi_normal, terminal_normal));
  }
  return maximal_paths(std::move(cls), spectra, restrict_to_pi_support);
}

/// (theta up to ell, theta from ell); lengths add up to kappa + 1.
inline std::pair<Path, Path> split_at(const Path& theta, Index ell) {
  const auto it = std::find(theta.begin(), theta.end(), ell);
  if (it == theta.end()) {
    throw Error(Errc::BlockNotOnPath,
                "block " + std::to_string(ell + 1) + " is not on " + format_path(theta));
  }
  return {Path(theta.begin(), it + 1), Path(it, theta.end())};
}

/// #Gamma_kappa(m) = C(kappa + m - 1, m); zero for m < 0.
inline std::uint64_t gamma_count(std::int64_t kappa, std::int64_t m) {
  if (kappa < 1) throw Error(Errc::InvalidArgument, "kappa must be at least 1");
  if (m < 0) return 0;
  unsigned __int128 r = 1;
  for (std::int64_t i = 1; i < kappa; ++i) {
    r = r * static_cast<unsigned __int128>(m + i) / static_cast<unsigned __int128>(i);
    if (r > std::numeric_limits<std::uint64_t>::max()) {
      throw Error(Errc::Overflow, "#Gamma exceeds 64 bits");
    }
  }
  return static_cast<std::uint64_t>(r);
}

/// All nonnegative kappa-tuples summing to m, in lexicographic order.
inline std::vector<std::vector<std::int64_t>> gamma_enumerate(std::int64_t kappa, std::int64_t m,
                                                              std::uint64_t cap = 50'000'000) {
  const std::uint64_t n = gamma_count(kappa, m);
  if (n > cap) throw Error(Errc::Overflow, "#Gamma too large to enumerate");
  std::vector<std::vector<std::int64_t>> out;
  out.reserve(n);
  if (m < 0) return out;
  std::vector<std::int64_t> cur(static_cast<size_t>(kappa), 0);
  std::function<void(std::int64_t, std::int64_t)> rec = [&](std::int64_t pos, std::int64_t left) {
    if (pos == kappa - 1) {
      cur[pos] = left;
      out.push_back(cur);
      return;
    }
    for (std::int64_t e = 0; e <= left; ++e) {
      cur[pos] = e;
      rec(pos + 1, left - e);
    }
  };
  rec(0, m);
  return out;
}

}  // namespace qergodic
