#pragma once

#include <algorithm>
#include <cstddef>
#include <set>
#include <utility>
#include <vector>

#include "regdiff/errors.hpp"
#include "regdiff/linalg.hpp"

namespace regdiff {

/// Directed agent network. Edge (from, to) means agent `from` sends its
/// iterate to agent `to`; self-loops are explicit edges (k, k).
struct Graph {
  std::size_t n_agents = 0;
  std::set<std::pair<std::size_t, std::size_t>> edges;

  void add_edge(std::size_t from, std::size_t to) { edges.emplace(from, to); }

  bool has_edge(std::size_t from, std::size_t to) const {
    return edges.count({from, to}) > 0;
  }

  /// In-neighborhood of k: agents whose iterates reach k (including k itself
  /// when a self-loop is present).
  std::vector<std::size_t> in_neighbors(std::size_t k) const {
    std::vector<std::size_t> r;
    for (std::size_t l = 0; l < n_agents; ++l)
      if (has_edge(l, k)) r.push_back(l);
    return r;
  }

  bool has_any_self_loop() const {
    for (std::size_t k = 0; k < n_agents; ++k)
      if (has_edge(k, k)) return true;
    return false;
  }

  bool strongly_connected() const {
    if (n_agents == 0) return false;
    if (n_agents == 1) return true;
    auto reach_all = [&](bool forward) {
      std::vector<bool> seen(n_agents, false);
      std::vector<std::size_t> stack{0};
      seen[0] = true;
      while (!stack.empty()) {
        std::size_t u = stack.back();
        stack.pop_back();
        for (std::size_t v = 0; v < n_agents; ++v) {
          bool connected = forward ? has_edge(u, v) : has_edge(v, u);
          if (connected && !seen[v]) {
            seen[v] = true;
            stack.push_back(v);
          }
        }
      }
      return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
    };
    return reach_all(true) && reach_all(false);
  }

  static Graph complete(std::size_t n) {
    Graph g;
    g.n_agents = n;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) g.add_edge(i, j);
    return g;
  }

  static Graph ring_with_self_loops(std::size_t n) {
    Graph g;
    g.n_agents = n;
    for (std::size_t i = 0; i < n; ++i) {
      g.add_edge(i, i);
      g.add_edge(i, (i + 1) % n);
      g.add_edge((i + 1) % n, i);
    }
    return g;
  }
};

enum class WeightingRule { kUniformAveraging, kMetropolis, kExplicitWeights };

/// Left-stochastic combination matrix: entry (l, k) scales data moving from
/// agent l to agent k, and every column sums to one.
struct CombinationMatrix {
  Matrix a;

  std::size_t size() const { return a.rows; }
  double operator()(std::size_t l, std::size_t k) const { return a(l, k); }

  double max_column_sum_error() const {
    double worst = 0.0;
    for (std::size_t k = 0; k < a.cols; ++k) {
      double s = 0.0;
      for (std::size_t l = 0; l < a.rows; ++l) s += a(l, k);
      worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
  }

  /// Combine step w_k = sum_l a_{lk} psi_l, applied to per-agent blocks.
  /// Summation over l in ascending order, fixing floating-point ordering.
  std::vector<Vector> combine(const std::vector<Vector>& psi) const {
    const std::size_t n = size();
    std::vector<Vector> out(n);
    for (std::size_t k = 0; k < n; ++k) {
      Vector acc(psi.empty() ? 0 : psi[0].size(), 0.0);
      for (std::size_t l = 0; l < n; ++l) {
        if (a(l, k) != 0.0) axpy(a(l, k), psi[l], acc);
      }
      out[k] = std::move(acc);
    }
    return out;
  }
};

struct PerronVector {
  Vector p;
};

inline void validate_graph(const Graph& graph) {
  if (!graph.strongly_connected())
    throw NotStronglyConnected("graph is not strongly connected");
  if (!graph.has_any_self_loop())
    throw NoSelfLoop("network needs at least one self-loop");
}

inline CombinationMatrix build_matrix(const Graph& graph, WeightingRule rule,
                                      const Matrix* explicit_weights = nullptr) {
  validate_graph(graph);
  const std::size_t n = graph.n_agents;
  CombinationMatrix cm;
  cm.a = Matrix(n, n);

  switch (rule) {
    case WeightingRule::kUniformAveraging: {
      for (std::size_t k = 0; k < n; ++k) {
        auto nbrs = graph.in_neighbors(k);
        for (std::size_t l : nbrs) cm.a(l, k) = 1.0 / static_cast<double>(nbrs.size());
      }
      break;
    }
    case WeightingRule::kMetropolis: {
      // a_{lk} = 1 / max(|N_l|, |N_k|) for l != k, self weight absorbs the
      // residual so columns stay stochastic.
      std::vector<std::size_t> deg(n);
      for (std::size_t k = 0; k < n; ++k) deg[k] = graph.in_neighbors(k).size();
      for (std::size_t k = 0; k < n; ++k) {
        double off = 0.0;
        for (std::size_t l = 0; l < n; ++l) {
          if (l == k || !graph.has_edge(l, k)) continue;
          cm.a(l, k) = 1.0 / static_cast<double>(std::max(deg[l], deg[k]));
          off += cm.a(l, k);
        }
        if (graph.has_edge(k, k)) cm.a(k, k) = 1.0 - off;
      }
      break;
    }
    case WeightingRule::kExplicitWeights: {
      if (explicit_weights == nullptr || explicit_weights->rows != n ||
          explicit_weights->cols != n)
        throw ValidationFailure("explicit weight matrix missing or mis-sized");
      cm.a = *explicit_weights;
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l)
          if (cm.a(l, k) != 0.0 && !graph.has_edge(l, k))
            throw ValidationFailure("nonzero weight on a non-edge");
      break;
    }
  }

  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t l = 0; l < n; ++l)
      if (cm.a(l, k) < 0.0) throw ValidationFailure("negative combination weight");
  if (cm.max_column_sum_error() > 1e-9)
    throw ColumnSumViolation("column sums deviate from 1 by more than 1e-9");
  return cm;
}

/// Power iteration for the Perron eigenvector: A p = p, entries positive,
/// normalized to sum 1.
inline PerronVector perron_vector(const CombinationMatrix& A, double tol = 1e-13,
                                  std::size_t max_iters = 100000) {
  const std::size_t n = A.size();
  Vector p(n, 1.0 / static_cast<double>(n));
  for (std::size_t it = 0; it < max_iters; ++it) {
    Vector next = A.a.apply(p);
    double s = 0.0;
    for (double v : next) s += v;
    for (double& v : next) v /= s;
    double rel = 0.0;
    for (std::size_t i = 0; i < n; ++i) rel = std::max(rel, std::abs(next[i] - p[i]));
    rel /= std::max(norm_inf(next), 1e-300);
    p = std::move(next);
    if (rel <= tol) {
      // residual check against the declared invariant
      Vector ap = A.a.apply(p);
      if (norm_inf(sub(ap, p)) >= 1e-12 * norm_inf(p)) continue;
      for (double v : p)
        if (v <= 0.0) throw NoConvergence("Perron vector has a non-positive entry");
      return PerronVector{p};
    }
  }
  throw NoConvergence("perron_vector: power iteration hit the iteration cap");
}

/// |lambda_2(A)| via power iteration on the deflated operator A - p 1^T,
/// which annihilates the Perron direction and acts as A on its complement.
inline double second_eigenvalue_modulus(const CombinationMatrix& A, double tol = 1e-8,
                                        std::size_t max_iters = 100000) {
  const std::size_t n = A.size();
  if (n == 1) return 0.0;
  const Vector p = perron_vector(A).p;

  auto deflated = [&](const Vector& x) {
    Vector y = A.a.apply(x);
    double s = 0.0;
    for (double v : x) s += v;
    axpy(-s, p, y);
    return y;
  };

  // A symmetric graph can make a fixed start exactly orthogonal to the
  // dominant deflated eigenvector, so run a few randomized starts and keep
  // the largest converged estimate.
  double best = 0.0;
  bool converged = false;
  for (std::uint64_t restart = 0; restart < 5; ++restart) {
    Vector x(n);
    std::uint64_t s = 0x9e3779b97f4a7c15ULL + restart;
    for (std::size_t i = 0; i < n; ++i) {
      s = s * 6364136223846793005ULL + 1442695040888963407ULL;
      x[i] = static_cast<double>(s >> 11) / 9007199254740992.0 - 0.5;
    }
    double nx = norm2(x);
    for (double& v : x) v /= nx;

    // Two-step ratio handles complex-conjugate lambda_2 pairs, whose one-step
    // ratio oscillates without converging.
    double prev_est = -1.0;
    for (std::size_t it = 0; it < max_iters; ++it) {
      Vector y = deflated(x);
      Vector z = deflated(y);
      double nz = norm2(z);
      double est = std::sqrt(nz);  // x normalized, so |lambda|^2 ~ ||z||
      if (nz < 1e-280) {
        converged = true;
        break;
      }
      for (double& v : z) v /= nz;
      x = std::move(z);
      if (prev_est >= 0.0 && std::abs(est - prev_est) <= tol * std::max(est, 1e-30)) {
        best = std::max(best, est);
        converged = true;
        break;
      }
      prev_est = est;
    }
  }
  if (!converged)
    throw NoConvergence("second_eigenvalue_modulus: power iteration hit the cap");
  return best;
}

}  // namespace regdiff
