#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "regdiff/errors.hpp"
#include "regdiff/linalg.hpp"
#include "regdiff/regularizer.hpp"
#include "regdiff/risk.hpp"
#include "regdiff/rng.hpp"
#include "regdiff/smoothing.hpp"
#include "regdiff/topology.hpp"

namespace regdiff {

enum class AgentClass { kFullyInformed, kDataInformed, kStructureInformed, kCustom };

struct AgentSpec {
  SmoothRisk risk;
  Regularizer regularizer;
  AgentClass cls = AgentClass::kCustom;
};

enum class Variant { kRegularizedDiffusion, kNonIncremental, kCentralizedReference };

struct DiffusionConfig {
  double mu = 0.0;
  double delta = 0.0;
  std::size_t n_iterations = 0;
  Variant variant = Variant::kRegularizedDiffusion;
  std::uint64_t seed = 0;
  bool exact_gradients = false;

  void validate() const {
    if (mu <= 0.0) throw ValidationFailure("mu must be positive");
    if (delta <= 0.0) throw ValidationFailure("delta must be positive");
    if (mu > 2.0 * delta + 1e-15) throw ValidationFailure("mu <= 2*delta is required");
  }
};

/// Resolve delta = mu^(1/2 - kappa); kappa must lie in (1/4, 1/2).
inline double delta_from_kappa(double mu, double kappa) {
  if (!(kappa > 0.25 && kappa < 0.5))
    throw ValidationFailure("kappa must lie in (1/4, 1/2)");
  return std::pow(mu, 0.5 - kappa);
}

struct NetworkState {
  std::vector<Vector> w;
  std::size_t iteration = 0;
};

inline constexpr double kDivergenceThreshold = 1e12;

namespace detail {

inline void check_divergence(const std::vector<Vector>& ws, std::size_t iter) {
  for (const Vector& w : ws)
    for (double v : w)
      if (!std::isfinite(v) || std::abs(v) > kDivergenceThreshold)
        throw DivergenceDetected("iterate diverged at iteration " + std::to_string(iter));
}

inline Vector agent_gradient(const AgentSpec& agent, const Vector& w,
                             const DiffusionConfig& config, const SubstreamRng& rng,
                             std::uint64_t rep, std::size_t k, std::size_t iter) {
  if (config.exact_gradients) return agent.risk.exact_gradient(w);
  auto g = rng.stream(rep, k, iter);
  return agent.risk.stochastic_gradient(w, g);
}

}  // namespace detail

/// One synchronous step of the regularized diffusion strategy: stochastic
/// gradient adapt, incremental regularizer update at the intermediate
/// iterate, then neighborhood combination.
inline NetworkState step_regularized_diffusion(const NetworkState& state,
                                               const std::vector<AgentSpec>& agents,
                                               const CombinationMatrix& A,
                                               const DiffusionConfig& config,
                                               const SubstreamRng& rng,
                                               std::uint64_t rep = 0) {
  const std::size_t n = agents.size();
  std::vector<Vector> psi(n);
  for (std::size_t k = 0; k < n; ++k) {
    Vector phi = state.w[k];
    axpy(-config.mu,
         detail::agent_gradient(agents[k], state.w[k], config, rng, rep, k,
                                state.iteration),
         phi);
    if (!agents[k].regularizer.is_zero())
      axpy(-config.mu, moreau_gradient(agents[k].regularizer, phi, config.delta), phi);
    psi[k] = std::move(phi);
  }
  NetworkState next;
  next.w = A.combine(psi);
  next.iteration = state.iteration + 1;
  detail::check_divergence(next.w, next.iteration);
  return next;
}

/// Non-incremental variant: the regularizer gradient is evaluated at the
/// pre-adapt iterate w_{k,i-1} instead of the intermediate phi.
inline NetworkState step_non_incremental(const NetworkState& state,
                                         const std::vector<AgentSpec>& agents,
                                         const CombinationMatrix& A,
                                         const DiffusionConfig& config,
                                         const SubstreamRng& rng,
                                         std::uint64_t rep = 0) {
  const std::size_t n = agents.size();
  std::vector<Vector> psi(n);
  for (std::size_t k = 0; k < n; ++k) {
    Vector phi = state.w[k];
    axpy(-config.mu,
         detail::agent_gradient(agents[k], state.w[k], config, rng, rep, k,
                                state.iteration),
         phi);
    if (!agents[k].regularizer.is_zero())
      axpy(-config.mu, moreau_gradient(agents[k].regularizer, state.w[k], config.delta),
           phi);
    psi[k] = std::move(phi);
  }
  NetworkState next;
  next.w = A.combine(psi);
  next.iteration = state.iteration + 1;
  detail::check_divergence(next.w, next.iteration);
  return next;
}

/// Centralized reference operator
///   T_c(x) = x - mu sum_k p_k grad J_k(x) - mu sum_k p_k grad R_k^delta(x),
/// evaluated with exact gradients.
inline Vector step_centralized(const Vector& w, const std::vector<AgentSpec>& agents,
                               const PerronVector& p, const DiffusionConfig& config) {
  Vector next = w;
  for (std::size_t k = 0; k < agents.size(); ++k) {
    axpy(-config.mu * p.p[k], agents[k].risk.exact_gradient(w), next);
    if (!agents[k].regularizer.is_zero())
      axpy(-config.mu * p.p[k], moreau_gradient(agents[k].regularizer, w, config.delta),
           next);
  }
  for (double v : next)
    if (!std::isfinite(v) || std::abs(v) > kDivergenceThreshold)
      throw DivergenceDetected("centralized recursion diverged");
  return next;
}

using MetricsSink = std::function<void(const NetworkState&)>;

/// Run n_iterations of the configured variant. Deterministic given
/// (config, seed, rep); the sink sees the initial state and every iterate.
inline NetworkState run(const std::vector<AgentSpec>& agents, const CombinationMatrix& A,
                        const PerronVector& p, const DiffusionConfig& config,
                        const MetricsSink& sink, std::uint64_t rep = 0,
                        const std::vector<Vector>* initial = nullptr) {
  config.validate();
  const std::size_t n = agents.size();
  const std::size_t dim = n > 0 ? agents[0].risk.dim() : 0;
  for (const AgentSpec& a : agents)
    if (a.risk.dim() != dim) throw ValidationFailure("inconsistent agent dimensions");

  SubstreamRng rng(config.seed);
  NetworkState state;
  state.w = initial ? *initial : std::vector<Vector>(n, Vector(dim, 0.0));
  state.iteration = 0;
  if (sink) sink(state);

  for (std::size_t i = 0; i < config.n_iterations; ++i) {
    try {
      switch (config.variant) {
        case Variant::kRegularizedDiffusion:
          state = step_regularized_diffusion(state, agents, A, config, rng, rep);
          break;
        case Variant::kNonIncremental:
          state = step_non_incremental(state, agents, A, config, rng, rep);
          break;
        case Variant::kCentralizedReference: {
          Vector wc = step_centralized(state.w[0], agents, p, config);
          NetworkState next;
          next.w.assign(state.w.size(), wc);
          next.iteration = state.iteration + 1;
          state = std::move(next);
          break;
        }
      }
    } catch (const DivergenceDetected&) {
      throw;
    } catch (const Error& e) {
      throw Error(std::string(e.what()) + " (iteration " + std::to_string(i) + ")");
    }
    if (sink) sink(state);
  }
  return state;
}

}  // namespace regdiff
