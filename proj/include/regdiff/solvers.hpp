#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "regdiff/engine.hpp"
#include "regdiff/errors.hpp"
#include "regdiff/linalg.hpp"
#include "regdiff/regularizer.hpp"
#include "regdiff/risk.hpp"
#include "regdiff/smoothing.hpp"
#include "regdiff/topology.hpp"

namespace regdiff {

struct OracleSolution {
  Vector w_star;
  double objective = 0.0;
  double residual = 0.0;
  std::size_t iterations = 0;
};

inline Vector aggregate_smooth_gradient(const std::vector<AgentSpec>& agents,
                                        const PerronVector& p, const Vector& w) {
  Vector g(w.size(), 0.0);
  for (std::size_t k = 0; k < agents.size(); ++k)
    if (!agents[k].risk.is_zero()) axpy(p.p[k], agents[k].risk.exact_gradient(w), g);
  return g;
}

inline double aggregate_objective(const std::vector<AgentSpec>& agents,
                                  const PerronVector& p, const Vector& w,
                                  bool include_regularizers = true) {
  double s = 0.0;
  for (std::size_t k = 0; k < agents.size(); ++k) {
    s += p.p[k] * agents[k].risk.evaluate(w);
    if (include_regularizers) s += p.p[k] * agents[k].regularizer.evaluate(w);
  }
  return s;
}

inline Regularizer aggregate_regularizer(const std::vector<AgentSpec>& agents,
                                         const PerronVector& p) {
  std::vector<std::pair<double, Regularizer>> parts;
  for (std::size_t k = 0; k < agents.size(); ++k)
    if (!agents[k].regularizer.is_zero()) parts.emplace_back(p.p[k], agents[k].regularizer);
  if (parts.empty()) return Regularizer::zero();
  return Regularizer::weighted_sum(std::move(parts));
}

inline double aggregate_lambda_U(const std::vector<AgentSpec>& agents,
                                 const PerronVector& p) {
  double s = 0.0;
  for (std::size_t k = 0; k < agents.size(); ++k) s += p.p[k] * agents[k].risk.lambda_U();
  return s;
}

/// Strong-convexity modulus of the p-weighted smooth aggregate: exact minimum
/// eigenvalue when all risks are quadratic, the analytic 2*rho2-weighted lower
/// bound otherwise.
inline double aggregate_lambda_L(const std::vector<AgentSpec>& agents,
                                 const PerronVector& p) {
  bool all_quadratic = true;
  for (const AgentSpec& a : agents)
    if (a.risk.kind() == RiskKind::kLogisticL2) all_quadratic = false;
  if (all_quadratic) {
    std::size_t dim = agents.empty() ? 0 : agents[0].risk.dim();
    Matrix Hagg(dim, dim);
    for (std::size_t k = 0; k < agents.size(); ++k) {
      if (agents[k].risk.kind() != RiskKind::kQuadratic) continue;
      const Matrix& H = agents[k].risk.hessian();
      for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) Hagg(i, j) += p.p[k] * H(i, j);
    }
    SmoothRisk agg = SmoothRisk::quadratic(std::move(Hagg), Vector(dim, 0.0));
    return agg.lambda_L();
  }
  double s = 0.0;
  for (std::size_t k = 0; k < agents.size(); ++k) s += p.p[k] * agents[k].risk.lambda_L();
  return s;
}

/// Contraction factor of the centralized operator:
/// gamma_c = 1 - mu*lambda_L + mu^2 * lambda_U^2 / (2 - mu/delta).
inline double gamma_c(double mu, double delta, double lambda_L, double lambda_U) {
  return 1.0 - mu * lambda_L + mu * mu * (lambda_U * lambda_U / (2.0 - mu / delta));
}

/// Largest step size with gamma_c < 1 (subject to mu <= 2*delta), by bisection.
inline double mu_star(double delta, double lambda_L, double lambda_U) {
  auto ok = [&](double mu) {
    return mu < 2.0 * delta && gamma_c(mu, delta, lambda_L, lambda_U) < 1.0;
  };
  double lo = 0.0, hi = 2.0 * delta * (1.0 - 1e-12);
  if (ok(hi)) return hi;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (ok(mid))
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

/// Proximal-gradient solve of the non-smooth Pareto problem
///   w_star = argmin sum_k p_k { J_k(w) + R_k(w) }.
inline OracleSolution solve_nonsmooth(const std::vector<AgentSpec>& agents,
                                      const PerronVector& p, double tol = 1e-10,
                                      std::size_t max_iters = 1000000) {
  const std::size_t dim = agents.empty() ? 0 : agents[0].risk.dim();
  const Regularizer R = aggregate_regularizer(agents, p);
  const double lu = aggregate_lambda_U(agents, p);
  const double eta = lu > 0.0 ? 1.0 / lu : 1.0;

  Vector w(dim, 0.0);
  for (std::size_t it = 0; it < max_iters; ++it) {
    Vector g = aggregate_smooth_gradient(agents, p, w);
    Vector cand(dim);
    for (std::size_t i = 0; i < dim; ++i) cand[i] = w[i] - eta * g[i];
    Vector next = R.prox(cand, eta);
    const double residual = dist2(w, next);
    w = std::move(next);
    if (residual < tol) {
      OracleSolution sol;
      sol.w_star = w;
      sol.objective = aggregate_objective(agents, p, w);
      sol.residual = residual;
      sol.iterations = it + 1;
      return sol;
    }
  }
  throw NoConvergence("solve_nonsmooth: proximal gradient hit the iteration cap");
}

/// Gradient-descent solve of the smoothed aggregate
///   w_delta = argmin sum_k p_k { J_k(w) + R_k^delta(w) },
/// with step chosen from the combined smoothness bound.
inline OracleSolution solve_smoothed(const std::vector<AgentSpec>& agents,
                                     const PerronVector& p, double delta,
                                     double tol = 1e-10,
                                     std::size_t max_iters = 1000000) {
  if (delta <= 0.0) throw NonPositiveDelta("solve_smoothed requires delta > 0");
  const std::size_t dim = agents.empty() ? 0 : agents[0].risk.dim();
  double reg_mass = 0.0;
  for (std::size_t k = 0; k < agents.size(); ++k)
    if (!agents[k].regularizer.is_zero()) reg_mass += p.p[k];
  const double lip = aggregate_lambda_U(agents, p) + reg_mass / delta;
  const double eta = lip > 0.0 ? 1.0 / lip : 1.0;

  auto full_gradient = [&](const Vector& w) {
    Vector g = aggregate_smooth_gradient(agents, p, w);
    for (std::size_t k = 0; k < agents.size(); ++k)
      if (!agents[k].regularizer.is_zero())
        axpy(p.p[k], moreau_gradient(agents[k].regularizer, w, delta), g);
    return g;
  };

  Vector w(dim, 0.0);
  for (std::size_t it = 0; it < max_iters; ++it) {
    Vector g = full_gradient(w);
    const double gn = norm2(g);
    if (gn < tol) {
      OracleSolution sol;
      sol.w_star = w;
      sol.objective = aggregate_objective(agents, p, w, /*include_regularizers=*/false);
      for (std::size_t k = 0; k < agents.size(); ++k)
        if (!agents[k].regularizer.is_zero())
          sol.objective += p.p[k] * smooth_eval(agents[k].regularizer, w, delta,
                                               ProximityFunction::make_quadratic());
      sol.residual = gn;
      sol.iterations = it;
      return sol;
    }
    axpy(-eta, g, w);
  }
  throw NoConvergence("solve_smoothed: gradient descent hit the iteration cap");
}

/// Recover subgradients r_k of R_k at w_star with sum_k p_k (grad J_k + r_k) = 0.
/// Supported for l1-separable regularizers: forced to +/- weight on nonzero
/// coordinates, residual split evenly across owning agents on zero coordinates.
inline std::vector<Vector> recover_subgradients(const std::vector<AgentSpec>& agents,
                                                const PerronVector& p,
                                                const Vector& w_star,
                                                double tol = 1e-8) {
  const std::size_t n = agents.size();
  const std::size_t dim = w_star.size();
  std::vector<Vector> weights(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!agents[k].regularizer.l1_weights(dim, weights[k]))
      throw SubgradientInfeasible(
          "subgradient recovery supports only l1-separable regularizers");
  }

  Vector total(dim, 0.0);  // -sum p_k grad J_k(w_star)
  for (std::size_t k = 0; k < n; ++k)
    axpy(-p.p[k], agents[k].risk.exact_gradient(w_star), total);

  const double ztol = 1e-9;
  std::vector<Vector> r(n, Vector(dim, 0.0));
  for (std::size_t i = 0; i < dim; ++i) {
    if (std::abs(w_star[i]) > ztol) {
      double forced = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        r[k][i] = weights[k][i] * (w_star[i] > 0.0 ? 1.0 : -1.0);
        forced += p.p[k] * r[k][i];
      }
      if (std::abs(forced - total[i]) > tol)
        throw SubgradientInfeasible("stationarity violated on a nonzero coordinate");
    } else {
      double p_free = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        if (weights[k][i] > 0.0) p_free += p.p[k];
      if (p_free <= 0.0) {
        if (std::abs(total[i]) > tol)
          throw SubgradientInfeasible("no agent owns a zero coordinate with residual");
        continue;
      }
      const double c = total[i] / p_free;
      for (std::size_t k = 0; k < n; ++k) {
        if (weights[k][i] <= 0.0) continue;
        if (std::abs(c) > weights[k][i] + tol)
          throw SubgradientInfeasible("recovered value exceeds the subgradient interval");
        r[k][i] = c;
      }
    }
  }
  return r;
}

/// Right-hand side of the smoothing-bias bound:
///   delta * (2 / lambda_L) * sum_k p_k d(r_k).
inline double bias_bound_rhs(const std::vector<AgentSpec>& agents, const PerronVector& p,
                             double delta, const std::vector<Vector>& r_star,
                             const ProximityFunction& d =
                                 ProximityFunction::make_quadratic()) {
  const double lambda_L = aggregate_lambda_L(agents, p);
  double s = 0.0;
  for (std::size_t k = 0; k < agents.size(); ++k) s += p.p[k] * d.d(r_star[k]);
  return delta * (2.0 / lambda_L) * s;
}

}  // namespace regdiff
