#pragma once

// Frobenius normal form (condensation of the transition digraph), block
// periods, primitivity and the aperiodic lift Q -> Q^N.

#include <Eigen/Dense>

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

#include "qergodic/error.hpp"
#include "qergodic/model.hpp"

namespace qergodic {

/// Lower block-triangular reordering of Q. Block b (0-based) occupies
/// normal-form positions [offsets[b], offsets[b+1]); block i can only feed
/// blocks j <= i.
struct FrobeniusForm {
  std::vector<Index> order;     // order[p]: input state at normal-form position p
  std::vector<Index> position;  // position[s]: normal-form position of input state s
  std::vector<Index> block_of;  // block of each normal-form position
  std::vector<Index> offsets;   // size k+1
  Matrix permuted_Q;
  std::vector<Matrix> diag_blocks;
  std::map<std::pair<Index, Index>, Matrix> sub_blocks;  // (i,j), i > j, structurally nonzero

  Index k() const { return static_cast<Index>(diag_blocks.size()); }
  Index size() const { return permuted_Q.rows(); }
  Index block_start(Index b) const { return offsets[b]; }
  Index block_size(Index b) const { return offsets[b + 1] - offsets[b]; }
  bool linked(Index i, Index j) const { return sub_blocks.count({i, j}) > 0; }

  /// Q_ij as a dense block (zero when not linked).
  Matrix block(Index i, Index j) const {
    return permuted_Q.block(offsets[i], offsets[j], block_size(i), block_size(j));
  }

  /// Input-order state indices of block b, ascending.
  std::vector<Index> block_states(Index b) const {
    return {order.begin() + offsets[b], order.begin() + offsets[b + 1]};
  }

  Vector to_normal(const Vector& x) const {
    Vector y(x.size());
    for (Index p = 0; p < x.size(); ++p) y(p) = x(order[p]);
    return y;
  }
  Vector to_input(const Vector& y) const {
    Vector x(y.size());
    for (Index p = 0; p < y.size(); ++p) x(order[p]) = y(p);
    return x;
  }
  /// Segment of a normal-order vector belonging to block b.
  Vector segment(const Vector& y, Index b) const {
    return y.segment(offsets[b], block_size(b));
  }
};

namespace detail {

// Tarjan's algorithm; returns component id per vertex.
inline std::vector<Index> strong_components(const Matrix& q, Index& count) {
  const Index d = q.rows();
  std::vector<Index> index(d, -1), low(d, 0), comp(d, -1), stack;
  std::vector<bool> on_stack(d, false);
  Index counter = 0;
  count = 0;
  std::function<void(Index)> visit = [&](Index v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (Index w = 0; w < d; ++w) {
      if (q(v, w) == 0.0) continue;
      if (index[w] < 0) {
        visit(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      while (true) {
        const Index w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comp[w] = count;
        if (w == v) break;
      }
      ++count;
    }
  };
  for (Index v = 0; v < d; ++v) {
    if (index[v] < 0) visit(v);
  }
  return comp;
}

inline bool strongly_connected(const Matrix& a) {
  if (a.rows() <= 1) return true;
  Index count = 0;
  strong_components(a, count);
  return count == 1;
}

}  // namespace detail

/// Condensation of the digraph of Q (edge u->v iff Q(u,v) != 0) ordered so
/// that every block's successors come first. Among blocks whose successors
/// are all placed, the one holding the smallest input index goes next, so an
/// input that is already lower block-triangular keeps its order.
inline FrobeniusForm condense(const Matrix& q) {
  if (q.rows() != q.cols() || q.rows() < 1) {
    throw Error(Errc::ShapeMismatch, "Q must be a non-empty square matrix");
  }
  const Index d = q.rows();
  Index count = 0;
  const auto comp = detail::strong_components(q, count);

  std::vector<Index> min_state(count, d);
  std::vector<std::vector<Index>> members(count);
  for (Index s = 0; s < d; ++s) {
    members[comp[s]].push_back(s);
    min_state[comp[s]] = std::min(min_state[comp[s]], s);
  }
  std::vector<std::vector<bool>> succ(count, std::vector<bool>(count, false));
  std::vector<Index> pending(count, 0);
  for (Index u = 0; u < d; ++u) {
    for (Index v = 0; v < d; ++v) {
      const Index a = comp[u], b = comp[v];
      if (q(u, v) != 0.0 && a != b && !succ[a][b]) {
        succ[a][b] = true;
        ++pending[a];
      }
    }
  }
  std::vector<Index> comp_order;
  std::vector<bool> placed(count, false);
  for (Index step = 0; step < count; ++step) {
    Index best = -1;
    for (Index c = 0; c < count; ++c) {
      if (!placed[c] && pending[c] == 0 && (best < 0 || min_state[c] < min_state[best])) best = c;
    }
    placed[best] = true;
    comp_order.push_back(best);
    for (Index a = 0; a < count; ++a) {
      if (succ[a][best]) --pending[a];
    }
  }

  FrobeniusForm f;
  f.position.assign(d, 0);
  f.offsets.push_back(0);
  for (Index b = 0; b < count; ++b) {
    for (Index s : members[comp_order[b]]) {
      f.position[s] = static_cast<Index>(f.order.size());
      f.order.push_back(s);
      f.block_of.push_back(b);
    }
    f.offsets.push_back(static_cast<Index>(f.order.size()));
  }
  f.permuted_Q.resize(d, d);
  for (Index p = 0; p < d; ++p) {
    for (Index r = 0; r < d; ++r) f.permuted_Q(p, r) = q(f.order[p], f.order[r]);
  }
  for (Index i = 0; i < count; ++i) {
    f.diag_blocks.push_back(f.block(i, i));
    for (Index j = 0; j < i; ++j) {
      Matrix b = f.block(i, j);
      if ((b.array() != 0.0).any()) f.sub_blocks.emplace(std::make_pair(i, j), std::move(b));
    }
  }
  return f;
}

inline FrobeniusForm condense(const SubstochasticModel& m) { return condense(m.Q()); }

/// Period of an irreducible block: gcd over edges (u,v) of
/// level(u) + 1 - level(v) for a BFS layering. A 1x1 zero block has no
/// cycle at all; it is given period 1.
inline Index block_period(const Matrix& block) {
  const Index n = block.rows();
  if (block.cols() != n || n < 1) throw Error(Errc::ShapeMismatch, "block must be square");
  if (!detail::strongly_connected(block)) {
    throw Error(Errc::NotIrreducible, "block is not strongly connected");
  }
  std::vector<Index> level(n, -1);
  std::vector<Index> queue{0};
  level[0] = 0;
  for (size_t h = 0; h < queue.size(); ++h) {
    const Index u = queue[h];
    for (Index v = 0; v < n; ++v) {
      if (block(u, v) != 0.0 && level[v] < 0) {
        level[v] = level[u] + 1;
        queue.push_back(v);
      }
    }
  }
  Index g = 0;
  for (Index u = 0; u < n; ++u) {
    for (Index v = 0; v < n; ++v) {
      if (block(u, v) != 0.0) g = std::gcd(g, std::abs(level[u] + 1 - level[v]));
    }
  }
  return g == 0 ? 1 : g;
}

/// Some power of the block's zero pattern at exponent (n-1)^2+1 is full.
inline bool wielandt_positive(const Matrix& block) {
  const Index n = block.rows();
  using Pattern = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
  const Pattern a = (block.array() != 0.0).cast<int>().matrix();
  Pattern p = a;
  const Index e = (n - 1) * (n - 1) + 1;
  for (Index i = 1; i < e; ++i) p = ((p * a).array() > 0).cast<int>().matrix();
  return (p.array() > 0).all();
}

/// Period 1 and not the trivial 1x1 zero block. For blocks up to 6x6 the
/// answer is confirmed by the Wielandt exponent.
inline bool is_primitive(const Matrix& block) {
  const bool trivial = block.rows() == 1 && block(0, 0) == 0.0;
  const bool primitive = !trivial && block_period(block) == 1;
  if (block.rows() <= 6 && primitive != wielandt_positive(block)) {
    throw Error(Errc::InvalidArgument, "period and Wielandt test disagree");
  }
  return primitive;
}

struct PeriodicLift {
  Index N = 1;
  Matrix lifted_Q;                  // Q^N, input order
  std::vector<Vector> shifted_pis;  // pi Q^i, i < N, unnormalized
  std::vector<Vector> terminals;    // Q^i 1, i < N
};

inline Matrix matrix_power(const Matrix& a, Index e) {
  Matrix r = Matrix::Identity(a.rows(), a.cols());
  Matrix b = a;
  while (e > 0) {
    if (e & 1) r = r * b;
    e >>= 1;
    if (e > 0) b = b * b;
  }
  return r;
}

/// N = lcm of the diagonal block periods, with Q^N and the shifted laws.
inline PeriodicLift aperiodic_lift(const SubstochasticModel& m, const FrobeniusForm& form) {
  PeriodicLift lift;
  for (const auto& b : form.diag_blocks) lift.N = std::lcm(lift.N, block_period(b));
  lift.lifted_Q = matrix_power(m.Q(), lift.N);
  Vector p = m.pi();
  Vector g = Vector::Ones(m.size());
  for (Index i = 0; i < lift.N; ++i) {
    lift.shifted_pis.push_back(p);
    lift.terminals.push_back(g);
    p = m.Q().transpose() * p;
    g = m.Q() * g;
  }
  return lift;
}

}  // namespace qergodic
