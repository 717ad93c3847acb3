#pragma once

// Validated substochastic chain model and the exact finite-horizon layer:
// survival probabilities, conditioned occupation fractions and trajectory
// simulation (plain and survival-conditioned).

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <thread>
#include <vector>

#include "qergodic/error.hpp"

namespace qergodic {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Transition block Q among the transient states of an absorbing chain,
/// together with the initial law pi and the absorption column R = 1 - Q1.
/// States are 0-based in the API; reports print them 1-based.
class SubstochasticModel {
 public:
  const Matrix& Q() const noexcept { return q_; }
  const Vector& pi() const noexcept { return pi_; }
  const Vector& R() const noexcept { return r_; }
  Index size() const noexcept { return q_.rows(); }
  double tolerance() const noexcept { return tol_; }

 private:
  friend SubstochasticModel validate(Matrix q, Vector pi, double tol);
  Matrix q_;
  Vector pi_;
  Vector r_;
  double tol_ = 1e-12;
};

namespace detail {

inline std::string fmt_entry(Index i, Index j, double x) {
  std::ostringstream os;
  os << "Q(" << i + 1 << "," << j + 1 << ") = " << x;
  return os.str();
}

// States from which some leaky state (R > tol) is reachable along edges of Q.
inline std::vector<bool> reaches_leak(const Matrix& q, const Vector& r, double tol) {
  const Index d = q.rows();
  std::vector<bool> ok(static_cast<size_t>(d), false);
  std::vector<Index> stack;
  for (Index i = 0; i < d; ++i) {
    if (r(i) > tol) {
      ok[i] = true;
      stack.push_back(i);
    }
  }
  while (!stack.empty()) {
    const Index j = stack.back();
    stack.pop_back();
    for (Index i = 0; i < d; ++i) {
      if (!ok[i] && q(i, j) != 0.0) {
        ok[i] = true;
        stack.push_back(i);
      }
    }
  }
  return ok;
}

}  // namespace detail

/// Checks the standing assumptions (nonnegative entries, row sums at most one,
/// pi a distribution, every state transient) and derives R.
inline SubstochasticModel validate(Matrix q, Vector pi, double tol = 1e-12) {
  if (q.rows() != q.cols() || q.rows() < 1) {
    throw Error(Errc::ShapeMismatch, "Q must be a non-empty square matrix");
  }
  const Index d = q.rows();
  if (pi.size() != d) {
    throw Error(Errc::ShapeMismatch, "pi has length " + std::to_string(pi.size()) +
                                         " but Q has " + std::to_string(d) + " states");
  }
  if (!(tol >= 0.0)) throw Error(Errc::InvalidArgument, "tolerance must be nonnegative");
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      if (!std::isfinite(q(i, j))) {
        throw Error(Errc::InvalidArgument, detail::fmt_entry(i, j, q(i, j)) + " is not finite");
      }
      if (q(i, j) < 0.0) throw Error(Errc::NegativeEntry, detail::fmt_entry(i, j, q(i, j)));
    }
  }
  Vector r(d);
  for (Index i = 0; i < d; ++i) {
    const double s = q.row(i).sum();
    if (s > 1.0 + tol) {
      std::ostringstream os;
      os << "row " << i + 1 << " sums to " << s;
      throw Error(Errc::RowSumExceedsOne, os.str());
    }
    r(i) = std::max(0.0, 1.0 - s);
  }
  for (Index i = 0; i < d; ++i) {
    if (!std::isfinite(pi(i)) || pi(i) < 0.0) {
      throw Error(Errc::NotADistribution, "pi(" + std::to_string(i + 1) + ") is negative");
    }
  }
  if (std::abs(pi.sum() - 1.0) > tol) {
    std::ostringstream os;
    os << "pi sums to " << pi.sum();
    throw Error(Errc::NotADistribution, os.str());
  }
  const auto ok = detail::reaches_leak(q, r, tol);
  for (Index i = 0; i < d; ++i) {
    if (!ok[i]) {
      throw Error(Errc::NotTransient, "state " + std::to_string(i + 1) +
                                          " cannot reach absorption (closed class)");
    }
  }
  SubstochasticModel m;
  m.q_ = std::move(q);
  m.pi_ = std::move(pi);
  m.r_ = std::move(r);
  m.tol_ = tol;
  return m;
}

/// log P_pi(T > n) = log(pi Q^n 1), accumulated with per-step renormalization.
inline double log_survival_probability(const SubstochasticModel& m, std::int64_t n) {
  if (n < 0) throw Error(Errc::InvalidArgument, "horizon must be nonnegative");
  Vector f = m.pi();
  double log_scale = 0.0;
  for (std::int64_t r = 0; r < n; ++r) {
    f = m.Q().transpose() * f;
    const double s = f.sum();
    if (s <= 0.0) return -std::numeric_limits<double>::infinity();
    log_scale += std::log(s);
    f /= s;
  }
  return log_scale;
}

inline double survival_probability(const SubstochasticModel& m, std::int64_t n) {
  return std::exp(log_survival_probability(m, n));
}

struct OccupationEstimate {
  double value = 0.0;
  std::int64_t n = 0;
  std::optional<double> std_error;
  std::optional<std::int64_t> trials_surviving;
};

namespace detail {

// Q^s 1 for s = 0..n, each rescaled to unit max-norm. Only ratios are used.
inline std::vector<Vector> backward_survival(const Matrix& q, std::int64_t n) {
  std::vector<Vector> back(static_cast<size_t>(n + 1));
  back[0] = Vector::Ones(q.rows());
  for (std::int64_t s = 1; s <= n; ++s) {
    Vector b = q * back[s - 1];
    const double mx = b.maxCoeff();
    if (mx > 0.0) b /= mx;
    back[s] = std::move(b);
  }
  return back;
}

}  // namespace detail

/// Exact E_pi[#{m <= n : X_m = j} / (n+1) | T > n] for every state j.
///
/// Term r of the numerator pi Q^r e_j e_j^T Q^{n-r} 1 divided by pi Q^n 1 is
/// the conditioned law of X_r; with forward and backward vectors kept at unit
/// scale it is F_r(j) B_{n-r}(j) / <F_r, B_{n-r}>, so no scale factor is ever
/// exponentiated.
inline Vector finite_horizon_occupation(const SubstochasticModel& m, std::int64_t n) {
  if (n < 0) throw Error(Errc::InvalidArgument, "horizon must be nonnegative");
  const auto back = detail::backward_survival(m.Q(), n);
  Vector f = m.pi();
  Vector acc = Vector::Zero(m.size());
  for (std::int64_t r = 0; r <= n; ++r) {
    const Vector& b = back[static_cast<size_t>(n - r)];
    const double denom = f.dot(b);
    if (!(denom > 0.0)) {
      throw Error(Errc::SurvivalUnderflow,
                  "P(T > " + std::to_string(n) + ") is numerically zero");
    }
    acc += f.cwiseProduct(b) / denom;
    if (r < n) {
      f = m.Q().transpose() * f;
      const double s = f.sum();
      if (s > 0.0) f /= s;
    }
  }
  return acc / static_cast<double>(n + 1);
}

inline OccupationEstimate finite_horizon_state_occupation(const SubstochasticModel& m, Index j,
                                                          std::int64_t n) {
  if (j < 0 || j >= m.size()) throw Error(Errc::InvalidArgument, "state index out of range");
  return {finite_horizon_occupation(m, n)(j), n, std::nullopt, std::nullopt};
}

/// Sum of the per-state values over `states`, accumulated in the given order.
inline OccupationEstimate finite_horizon_block_occupation(const SubstochasticModel& m,
                                                          std::span<const Index> states,
                                                          std::int64_t n) {
  for (Index j : states) {
    if (j < 0 || j >= m.size()) throw Error(Errc::InvalidArgument, "state index out of range");
  }
  if (states.empty()) return {0.0, n, std::nullopt, std::nullopt};
  const Vector occ = finite_horizon_occupation(m, n);
  double s = 0.0;
  for (Index j : states) s += occ(j);
  return {s, n, std::nullopt, std::nullopt};
}

/// E_pi[(1/(n+1)) sum_{i<=n} f(X_i) | T > n].
inline double finite_horizon_observable(const SubstochasticModel& m, const Vector& f,
                                        std::int64_t n) {
  if (f.size() != m.size()) throw Error(Errc::ShapeMismatch, "observable length mismatch");
  if (!f.allFinite()) throw Error(Errc::InvalidArgument, "observable must be finite");
  return f.dot(finite_horizon_occupation(m, n));
}

// ---------------------------------------------------------------------------
// Simulation

struct Trajectory {
  std::vector<Index> path;       // X_0, X_1, ... while transient
  std::int64_t absorption_time;  // T; equals path.size() when absorbed
  bool absorbed = true;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of trajectory `index` in a run seeded with `seed`.
inline std::uint64_t trajectory_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

// Uniform in [0,1) from the top 53 bits; independent of the standard library's
// distribution implementations so runs are reproducible across toolchains.
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Index drawn proportionally to the nonnegative weights; -1 means the residual
// mass `total - sum(w)` was hit.
template <class Weights>
Index draw(const Weights& w, double total, std::mt19937_64& rng) {
  const double target = unit(rng) * total;
  double cum = 0.0;
  Index last = -1;
  for (Index j = 0; j < w.size(); ++j) {
    if (w(j) <= 0.0) continue;
    cum += w(j);
    last = j;
    if (target < cum) return j;
  }
  // target beyond the weights: residual mass, unless the gap is only rounding
  return last < 0 || total - cum > 1e-12 * total ? -1 : last;
}

inline Index draw_initial(const Vector& pi, std::mt19937_64& rng) {
  const Index i = draw(pi, 1.0, rng);
  if (i >= 0) return i;
  Index last = 0;
  for (Index j = 0; j < pi.size(); ++j) {
    if (pi(j) > 0.0) last = j;
  }
  return last;
}

}  // namespace detail

/// Runs the chain from pi until absorption (or `max_steps` transient states).
inline Trajectory simulate_trajectory(const SubstochasticModel& m, std::uint64_t seed,
                                      std::int64_t max_steps =
                                          std::numeric_limits<std::int64_t>::max()) {
  std::mt19937_64 rng(seed);
  Trajectory t;
  Index x = detail::draw_initial(m.pi(), rng);
  while (true) {
    t.path.push_back(x);
    if (static_cast<std::int64_t>(t.path.size()) >= max_steps) {
      t.absorbed = false;
      break;
    }
    const double row = m.Q().row(x).sum();
    const Index y = detail::draw(m.Q().row(x), row + m.R()(x), rng);
    if (y < 0) break;
    x = y;
  }
  t.absorption_time = static_cast<std::int64_t>(t.path.size());
  return t;
}

namespace detail {

struct OccupationTally {
  std::vector<std::uint64_t> sum;
  std::vector<unsigned __int128> sum_sq;
  std::int64_t survivors = 0;

  explicit OccupationTally(Index d)
      : sum(static_cast<size_t>(d), 0), sum_sq(static_cast<size_t>(d), 0) {}

  void add(const std::vector<std::uint64_t>& counts) {
    ++survivors;
    for (size_t j = 0; j < counts.size(); ++j) {
      sum[j] += counts[j];
      sum_sq[j] += static_cast<unsigned __int128>(counts[j]) * counts[j];
    }
  }
  void merge(const OccupationTally& o) {
    survivors += o.survivors;
    for (size_t j = 0; j < sum.size(); ++j) {
      sum[j] += o.sum[j];
      sum_sq[j] += o.sum_sq[j];
    }
  }
};

constexpr std::int64_t kBatch = 1024;

// Tallies are integer counts, so the merged result does not depend on how
// batches are spread over workers.
template <class Trial>
OccupationTally run_batches(Index d, std::int64_t trials, unsigned workers, const Trial& trial) {
  const std::int64_t batches = (trials + kBatch - 1) / kBatch;
  std::vector<OccupationTally> out(static_cast<size_t>(batches), OccupationTally(d));
  std::atomic<std::int64_t> next{0};
  auto work = [&] {
    std::vector<std::uint64_t> counts(static_cast<size_t>(d));
    for (std::int64_t b = next++; b < batches; b = next++) {
      const std::int64_t lo = b * kBatch;
      const std::int64_t hi = std::min(trials, lo + kBatch);
      for (std::int64_t i = lo; i < hi; ++i) {
        std::fill(counts.begin(), counts.end(), 0);
        if (trial(static_cast<std::uint64_t>(i), counts)) out[b].add(counts);
      }
    }
  };
  workers = std::max(1u, workers);
  if (workers == 1 || batches == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  OccupationTally total(d);
  for (const auto& t : out) total.merge(t);
  return total;
}

inline std::vector<OccupationEstimate> summarize(const OccupationTally& t, std::int64_t n) {
  if (t.survivors == 0) {
    throw Error(Errc::NoSurvivors,
                "no trajectory survived past n = " + std::to_string(n));
  }
  const double s = static_cast<double>(t.survivors);
  const double len = static_cast<double>(n + 1);
  std::vector<OccupationEstimate> est;
  for (size_t j = 0; j < t.sum.size(); ++j) {
    const double mean = static_cast<double>(t.sum[j]) / s;
    const double mean_sq = static_cast<double>(t.sum_sq[j]) / s;
    double var = t.survivors > 1 ? (mean_sq - mean * mean) * s / (s - 1.0) : 0.0;
    var = std::max(0.0, var) / (len * len);
    est.push_back({mean / len, n, std::sqrt(var / s), t.survivors});
  }
  return est;
}

}  // namespace detail

/// Rejection estimate of the conditioned occupation fractions: simulate
/// `trials` trajectories and keep those with T > n.
inline std::vector<OccupationEstimate> monte_carlo_occupation(const SubstochasticModel& m,
                                                              std::int64_t n, std::int64_t trials,
                                                              std::uint64_t seed,
                                                              unsigned workers = 1) {
  if (trials < 1) throw Error(Errc::InvalidArgument, "trials must be at least 1");
  if (n < 0) throw Error(Errc::InvalidArgument, "horizon must be nonnegative");
  auto trial = [&](std::uint64_t i, std::vector<std::uint64_t>& counts) {
    const Trajectory t = simulate_trajectory(m, detail::trajectory_seed(seed, i), n + 1);
    if (t.absorbed) return false;
    for (Index x : t.path) ++counts[static_cast<size_t>(x)];
    return true;
  };
  return detail::summarize(detail::run_batches(m.size(), trials, workers, trial), n);
}

/// Exact sampling from the law of (X_0..X_n) given T > n: X_0 ~ pi(x) h_n(x)
/// and X_{m+1} ~ Q(x,y) h_{n-m-1}(y), with h_s = Q^s 1. Every trial survives,
/// so horizons far beyond the reach of rejection sampling are usable.
inline std::vector<OccupationEstimate> conditioned_monte_carlo_occupation(
    const SubstochasticModel& m, std::int64_t n, std::int64_t trials, std::uint64_t seed,
    unsigned workers = 1) {
  if (trials < 1) throw Error(Errc::InvalidArgument, "trials must be at least 1");
  if (n < 0) throw Error(Errc::InvalidArgument, "horizon must be nonnegative");
  const auto back = detail::backward_survival(m.Q(), n);
  const Vector start = m.pi().cwiseProduct(back[static_cast<size_t>(n)]);
  if (!(start.sum() > 0.0)) {
    throw Error(Errc::SurvivalUnderflow, "P(T > " + std::to_string(n) + ") is zero");
  }
  auto trial = [&](std::uint64_t i, std::vector<std::uint64_t>& counts) {
    std::mt19937_64 rng(detail::trajectory_seed(seed, i));
    Index x = detail::draw(start, start.sum(), rng);
    ++counts[static_cast<size_t>(x)];
    Vector w(m.size());
    for (std::int64_t step = 0; step < n; ++step) {
      w = m.Q().row(x).transpose().cwiseProduct(back[static_cast<size_t>(n - step - 1)]);
      x = detail::draw(w, w.sum(), rng);
      ++counts[static_cast<size_t>(x)];
    }
    return true;
  };
  return detail::summarize(detail::run_batches(m.size(), trials, workers, trial), n);
}

}  // namespace qergodic
