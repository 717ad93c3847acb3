#pragma once

// Closed-form quasi-ergodic and quasi-stationary measures: the irreducible
// case, block- and state-level formulas over maximal admissible paths, the
// all-scalar and single-path shortcuts, and the periodic pipeline.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qergodic/error.hpp"
#include "qergodic/model.hpp"
#include "qergodic/paths.hpp"
#include "qergodic/spectral.hpp"
#include "qergodic/structure.hpp"

namespace qergodic {

struct Options {
  double validation_tol = 1e-12;
  double rho_eq_tol = 1e-9;
  double alpha_tol = 1e-12;
  bool pi_restriction = true;
  bool exact_scalar_compare = true;
  PerronOptions perron;
  size_t path_cap = 1'000'000;
};

struct AssumptionReport {
  bool scalar_ok = true;
  std::optional<Path> witness_path;
  std::vector<std::pair<Path, double>> alpha_values;  // maximal paths: alpha * pi_mass
  std::vector<std::string> violations;
  std::vector<std::string> warnings;
  bool used_pi_restriction = true;

  bool certified() const { return violations.empty(); }
};

class AssumptionViolation : public Error {
 public:
  explicit AssumptionViolation(AssumptionReport report)
      : Error(Errc::AssumptionViolation, summary(report)), report_(std::move(report)) {}
  const AssumptionReport& report() const noexcept { return report_; }

 private:
  static std::string summary(const AssumptionReport& r) {
    std::string s = "no closed form certified";
    for (const auto& v : r.violations) s += "; " + v;
    return s;
  }
  AssumptionReport report_;
};

/// u_j v_j for an irreducible Q (input order).
inline Vector irreducible_qed(const Matrix& q, const PerronOptions& opt = {}) {
  const FrobeniusForm form = condense(q);
  if (form.k() != 1) {
    throw Error(Errc::NotIrreducible,
                "Q has " + std::to_string(form.k()) + " strongly connected components");
  }
  const BlockSpectrum s = perron_block(form.diag_blocks[0], opt);
  return form.to_input(s.u.cwiseProduct(s.v));
}

/// Normalized left Perron vector of the whole Q (input order). When a block
/// is periodic the iteration runs on Q + I, which has the same eigenvectors
/// and a unique dominant root. Several blocks at the leading root leave the
/// eigenvector undetermined; that is reported as NoConvergence.
inline Vector quasi_stationary_distribution(const Matrix& q, const PerronOptions& opt = {}) {
  const FrobeniusForm form = condense(q);
  const SpectrumSet spectra = compute_spectra(form, Options{}.rho_eq_tol, false, opt);
  Index leading = 0;
  for (Index b = 0; b < spectra.k(); ++b) leading += spectra.rho_equal(b, spectra.argmax) ? 1 : 0;
  if (leading > 1) {
    throw Error(Errc::NoConvergence, "leading eigenvector not isolated: " + std::to_string(leading) +
                                         " blocks share the spectral radius");
  }
  bool periodic = false;
  for (const auto& b : form.diag_blocks) periodic = periodic || block_period(b) > 1;
  Matrix a = q.transpose();
  if (periodic) a += Matrix::Identity(q.rows(), q.cols());
  double lam = 0.0;
  try {
    return detail::power_vector(a, opt, lam);
  } catch (const Error& e) {
    throw Error(Errc::NoConvergence,
                std::string("leading eigenvector not isolated (tied leading blocks?): ") +
                    e.what());
  }
}

/// Assumption check on the classified family: blocks with rho below rho_max
/// that lie on a path starting in the support of pi must be 1x1, and some
/// maximal path must carry alpha * pi_mass distinguishable from zero. The
/// zero test is relative to the same product built from |u|^T |x|, so a
/// value that vanishes through cancellation is caught.
inline AssumptionReport check_assumptions(const FrobeniusForm& form, const SpectrumSet& spectra,
                                          const PathFamily& family, double alpha_tol = 1e-12) {
  AssumptionReport r;
  r.used_pi_restriction = family.pi_restricted;
  std::vector<bool> relevant(static_cast<size_t>(form.k()), false);
  for (const auto& p : family.all) {
    if (p.pi_mass == 0.0) continue;
    for (Index b : p.theta) relevant[b] = true;
  }
  for (Index b = 0; b < form.k(); ++b) {
    if (relevant[b] && form.block_size(b) > 1 && spectra.rho_less(b, family.rho_max_block)) {
      r.scalar_ok = false;
      std::ostringstream os;
      os << "block " << b + 1 << " (size " << form.block_size(b) << ", rho "
         << spectra.rho(b) << ") lies below rho_max and is not scalar";
      r.violations.push_back(os.str());
    }
  }
  for (size_t i : family.maximal) {
    const auto& p = family.at(i);
    const double w = p.alpha * p.pi_mass;
    r.alpha_values.emplace_back(p.theta, w);
    if (!r.witness_path && family.rho_max_eff > 0.0 &&
        std::abs(w) > alpha_tol * p.alpha_magnitude * p.pi_mass) {
      r.witness_path = p.theta;
    }
  }
  if (family.rho_max_eff <= 0.0) {
    r.violations.push_back("rho_max is 0: survival vanishes after finitely many steps");
  } else if (!r.witness_path) {
    r.violations.push_back("every maximal path has alpha * pi_mass = 0");
  }
  for (const auto& [i, j] : spectra.near_ties) {
    std::ostringstream os;
    os << "near tie between rho of blocks " << i + 1 << " and " << j + 1 << " ("
       << spectra.rho(i) << " vs " << spectra.rho(j) << "), classified as "
       << (spectra.rho_equal(i, j) ? "equal" : "distinct");
    r.warnings.push_back(os.str());
  }
  return r;
}

namespace detail {

// alpha pi_mass prod_{H-} 1/(rho_max - rho_u) for each maximal path.
inline std::vector<double> maximal_weights(const SpectrumSet& spectra, const PathFamily& family) {
  std::vector<double> w;
  for (size_t i : family.maximal) {
    const auto& p = family.at(i);
    double x = p.alpha * p.pi_mass;
    for (Index u : p.H_minus) x /= family.rho_max_eff - spectra.rho(p.theta[u]);
    w.push_back(x);
  }
  return w;
}

inline void require_certified(const FrobeniusForm& form, const SpectrumSet& spectra,
                              const PathFamily& family, double alpha_tol) {
  AssumptionReport r = check_assumptions(form, spectra, family, alpha_tol);
  if (!r.certified()) throw AssumptionViolation(std::move(r));
}

}  // namespace detail

/// Limit fraction of time spent in each block.
inline Vector block_qed(const FrobeniusForm& form, const SpectrumSet& spectra,
                        const PathFamily& family, double alpha_tol = 1e-12) {
  detail::require_certified(form, spectra, family, alpha_tol);
  const auto w = detail::maximal_weights(spectra, family);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  Vector out = Vector::Zero(form.k());
  for (Index b = 0; b < form.k(); ++b) {
    if (!spectra.rho_equal(b, family.rho_max_block)) continue;
    double num = 0.0;
    for (size_t m = 0; m < family.maximal.size(); ++m) {
      const auto& theta = family.at(family.maximal[m]).theta;
      if (std::find(theta.begin(), theta.end(), b) != theta.end()) num += w[m];
    }
    out(b) = num / total / static_cast<double>(family.h_max);
  }
  return out;
}

/// Limit fraction of time per state, normal-form order: u_t v_t times the
/// block value.
inline Vector state_qed(const FrobeniusForm& form, const SpectrumSet& spectra,
                        const PathFamily& family, double alpha_tol = 1e-12) {
  const Vector blocks = block_qed(form, spectra, family, alpha_tol);
  Vector out = Vector::Zero(form.size());
  for (Index b = 0; b < form.k(); ++b) {
    if (blocks(b) <= 0.0) continue;
    const auto& s = spectra.blocks[b];
    out.segment(form.block_start(b), form.block_size(b)) = s.u.cwiseProduct(s.v) * blocks(b);
  }
  return out;
}

/// All blocks 1x1: the weights are products of subdiagonal entries read off
/// the permuted matrix, with no eigenvector machinery.
inline Vector scalar_case_qed(const FrobeniusForm& form, const PathFamily& family,
                              const Vector& pi_normal) {
  for (Index b = 0; b < form.k(); ++b) {
    if (form.block_size(b) != 1) {
      throw Error(Errc::NotScalarChain, "block " + std::to_string(b + 1) + " is not 1x1");
    }
  }
  const Matrix& q = form.permuted_Q;
  const double rmax = q(family.rho_max_block, family.rho_max_block);
  std::vector<double> w;
  for (size_t i : family.maximal) {
    const auto& th = family.at(i).theta;
    double x = pi_normal(th.front());
    for (size_t u = 0; u + 1 < th.size(); ++u) x *= q(th[u], th[u + 1]);
    for (Index b : th) {
      if (q(b, b) != rmax) x /= rmax - q(b, b);
    }
    w.push_back(x);
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  Vector out = Vector::Zero(form.k());
  for (Index b = 0; b < form.k(); ++b) {
    if (q(b, b) != rmax) continue;
    double num = 0.0;
    for (size_t m = 0; m < family.maximal.size(); ++m) {
      const auto& th = family.at(family.maximal[m]).theta;
      if (std::find(th.begin(), th.end(), b) != th.end()) num += w[m];
    }
    out(b) = num / total / static_cast<double>(family.h_max);
  }
  return out;
}

/// One maximal path: 1/h+_max on its rho_max blocks.
inline Vector single_path_qed(const SpectrumSet& spectra, const PathFamily& family) {
  if (family.maximal.size() != 1) {
    throw Error(Errc::NotSinglePath,
                std::to_string(family.maximal.size()) + " maximal paths");
  }
  Vector out = Vector::Zero(spectra.k());
  for (Index b : family.at(family.maximal.front()).theta) {
    if (spectra.rho_equal(b, family.rho_max_block)) out(b) = 1.0 / static_cast<double>(family.h_max);
  }
  return out;
}

struct QuasiErgodicResult {
  FrobeniusForm form;
  SpectrumSet spectra;
  PathFamily family;
  AssumptionReport report;
  bool certified = false;
  Vector block_measure;         // per block of `form`
  Vector state_measure;         // input order
  Vector state_measure_normal;  // normal-form order
  double rho_max = 0.0;
  Index h_max = 0;
  Index lift_N = 1;
  std::vector<Vector> residue_measures;  // limit along n = R mod N, input order
  double oscillation = 0.0;              // max deviation of a residue limit from the average
};

inline double observable_limit(const QuasiErgodicResult& r, const Vector& f) {
  if (f.size() != r.state_measure.size()) throw Error(Errc::ShapeMismatch, "observable length mismatch");
  return f.dot(r.state_measure);
}

namespace detail {

struct Phase {
  AssumptionReport report;
  Vector state_input;
};

// Aperiodic evaluation on an already condensed matrix with initial law and
// terminal vector in input order.
inline Phase aperiodic_phase(const FrobeniusForm& form, const SpectrumSet& spectra,
                             const Vector& pi_input, const Vector& g_input, const Options& opt) {
  const Vector pin = form.to_normal(pi_input);
  const Vector gn = form.to_normal(g_input);
  const PathFamily fam = path_family(form, spectra, pin, opt.pi_restriction, &gn, opt.path_cap);
  Phase ph;
  ph.report = check_assumptions(form, spectra, fam, opt.alpha_tol);
  if (ph.report.certified()) {
    ph.state_input = form.to_input(state_qed(form, spectra, fam, opt.alpha_tol));
  }
  return ph;
}

}  // namespace detail

/// End-to-end analysis without throwing on a failed assumption check:
/// `certified` tells whether the measures were filled in.
///
/// Periodic blocks: with N the lcm of the block periods and n = qN + R, the
/// visits at times m = i (mod N) form a chain driven by Q^N started from
/// pi Q^i and weighted at the horizon by Q^{(R-i) mod N} 1. Every phase
/// carries exactly the mass pi Q^n 1, so the limit along residue R is the
/// plain average of the N phase limits; state_measure averages over R.
inline QuasiErgodicResult analyze_chain(const SubstochasticModel& m, const Options& opt = {}) {
  QuasiErgodicResult r;
  r.form = condense(m.Q());
  r.spectra = compute_spectra(r.form, opt.rho_eq_tol, opt.exact_scalar_compare, opt.perron);
  const Vector pin = r.form.to_normal(m.pi());
  r.family = path_family(r.form, r.spectra, pin, opt.pi_restriction, nullptr, opt.path_cap);
  r.report = check_assumptions(r.form, r.spectra, r.family, opt.alpha_tol);
  r.rho_max = r.family.rho_max_eff;
  r.h_max = r.family.h_max;
  const PeriodicLift lift = aperiodic_lift(m, r.form);
  r.lift_N = lift.N;
  if (lift.N == 1) {
    r.certified = r.report.certified();
    if (!r.certified) return r;
    r.state_measure_normal = state_qed(r.form, r.spectra, r.family, opt.alpha_tol);
    r.state_measure = r.form.to_input(r.state_measure_normal);
    r.residue_measures = {r.state_measure};
    r.block_measure = block_qed(r.form, r.spectra, r.family, opt.alpha_tol);
    return r;
  } else {
    for (auto& v : r.report.violations) r.report.warnings.push_back("unlifted chain: " + v);
    r.report.violations.clear();
    const FrobeniusForm lf = condense(lift.lifted_Q);
    // entries of Q^N are rounded products, so ties are decided by tolerance
    const SpectrumSet ls = compute_spectra(lf, opt.rho_eq_tol, false, opt.perron);
    const Index N = lift.N;
    for (Index R = 0; R < N; ++R) {
      Vector acc = Vector::Zero(m.size());
      for (Index i = 0; i < N; ++i) {
        const double mass = lift.shifted_pis[i].sum();
        if (!(mass > 0.0)) {
          r.report.violations.push_back("pi Q^" + std::to_string(i) + " vanishes");
          continue;
        }
        const Vector pi_i = lift.shifted_pis[i] / mass;
        const auto ph =
            detail::aperiodic_phase(lf, ls, pi_i, lift.terminals[((R - i) % N + N) % N], opt);
        for (const auto& v : ph.report.violations) {
          r.report.violations.push_back("lift N=" + std::to_string(N) + ", residue " +
                                        std::to_string(R) + ", phase " + std::to_string(i) +
                                        ": " + v);
        }
        if (ph.report.certified()) acc += ph.state_input / static_cast<double>(N);
      }
      r.residue_measures.push_back(acc);
    }
    r.certified = r.report.certified();
    if (!r.certified) {
      r.residue_measures.clear();
      return r;
    }
    r.state_measure = Vector::Zero(m.size());
    for (const auto& v : r.residue_measures) r.state_measure += v / static_cast<double>(N);
    for (const auto& v : r.residue_measures) {
      r.oscillation = std::max(r.oscillation, (v - r.state_measure).cwiseAbs().maxCoeff());
    }
    r.state_measure_normal = r.form.to_normal(r.state_measure);
  }
  r.block_measure = Vector::Zero(r.form.k());
  for (Index b = 0; b < r.form.k(); ++b) {
    r.block_measure(b) = r.form.segment(r.state_measure_normal, b).sum();
  }
  return r;
}

/// As analyze_chain, but a failed assumption check raises AssumptionViolation.
inline QuasiErgodicResult full_qed(const SubstochasticModel& m, const Options& opt = {}) {
  QuasiErgodicResult r = analyze_chain(m, opt);
  if (!r.certified) throw AssumptionViolation(r.report);
  return r;
}

}  // namespace qergodic
