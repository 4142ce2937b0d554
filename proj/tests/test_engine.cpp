#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "regdiff/engine.hpp"
#include "regdiff/solvers.hpp"

using namespace regdiff;

namespace {

Matrix diag(const Vector& d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

std::vector<AgentSpec> two_quadratic_agents() {
  std::vector<AgentSpec> agents(2);
  agents[0].risk = SmoothRisk::quadratic(diag({1.0, 2.0}), {1.0, 2.0});
  agents[0].regularizer = Regularizer::l1(0.5);
  agents[1].risk = SmoothRisk::quadratic(diag({2.0, 1.0}), {0.5, 1.5});
  agents[1].regularizer = Regularizer::zero();
  return agents;
}

}  // namespace

TEST_CASE("config validation") {
  DiffusionConfig c;
  c.mu = 0.1;
  c.delta = 0.05;
  c.n_iterations = 1;
  REQUIRE_NOTHROW(c.validate());
  c.mu = 0.2;
  c.delta = 0.05;  // mu > 2 delta
  REQUIRE_THROWS_AS(c.validate(), ValidationFailure);
  c.mu = -1.0;
  REQUIRE_THROWS_AS(c.validate(), ValidationFailure);
}

TEST_CASE("delta from kappa") {
  REQUIRE(delta_from_kappa(1e-2, 0.3) == Catch::Approx(std::pow(1e-2, 0.2)));
  REQUIRE_THROWS_AS(delta_from_kappa(1e-2, 0.25), ValidationFailure);
  REQUIRE_THROWS_AS(delta_from_kappa(1e-2, 0.5), ValidationFailure);
}

TEST_CASE("single agent with zero regularizer is plain gradient descent") {
  std::vector<AgentSpec> agents(1);
  agents[0].risk = SmoothRisk::quadratic(diag({2.0}), {4.0});
  agents[0].regularizer = Regularizer::zero();
  auto A = build_matrix(Graph::complete(1), WeightingRule::kUniformAveraging);
  auto p = perron_vector(A);

  DiffusionConfig c;
  c.mu = 0.1;
  c.delta = 1.0;
  c.n_iterations = 1;
  c.exact_gradients = true;
  auto state = run(agents, A, p, c, nullptr);
  // w1 = 0 - 0.1 * (2*0 - 4) = 0.4
  REQUIRE(state.w[0][0] == Catch::Approx(0.4));
}

TEST_CASE("diffusion matches a hand-rolled reference loop bit for bit") {
  auto agents = two_quadratic_agents();
  auto A = build_matrix(Graph::complete(2), WeightingRule::kUniformAveraging);
  auto p = perron_vector(A);

  DiffusionConfig c;
  c.mu = 0.05;
  c.delta = 0.1;
  c.n_iterations = 100;
  c.exact_gradients = true;
  auto state = run(agents, A, p, c, nullptr);

  // independent straight-line re-implementation
  std::vector<Vector> w(2, Vector(2, 0.0));
  for (std::size_t it = 0; it < 100; ++it) {
    std::vector<Vector> psi(2);
    for (std::size_t k = 0; k < 2; ++k) {
      Vector phi(2);
      Vector g = agents[k].risk.exact_gradient(w[k]);
      for (std::size_t i = 0; i < 2; ++i) phi[i] = w[k][i] - c.mu * g[i];
      if (!agents[k].regularizer.is_zero()) {
        Vector pr = agents[k].regularizer.prox(phi, c.delta);
        for (std::size_t i = 0; i < 2; ++i)
          phi[i] -= c.mu * (phi[i] - pr[i]) / c.delta;
      }
      psi[k] = phi;
    }
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t i = 0; i < 2; ++i)
        w[k][i] = A(0, k) * psi[0][i] + A(1, k) * psi[1][i];
  }
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t i = 0; i < 2; ++i) REQUIRE(state.w[k][i] == w[k][i]);
}

TEST_CASE("single agent step equals the damped proximal form") {
  std::vector<AgentSpec> agents(1);
  agents[0].risk = SmoothRisk::quadratic(diag({1.5, 0.8}), {1.0, -0.7});
  agents[0].regularizer = Regularizer::l1(0.6);
  auto A = build_matrix(Graph::complete(1), WeightingRule::kUniformAveraging);
  auto p = perron_vector(A);

  DiffusionConfig c;
  c.mu = 0.04;
  c.delta = 0.2;
  c.n_iterations = 50;
  c.exact_gradients = true;
  auto state = run(agents, A, p, c, nullptr);

  // psi = (1 - mu/delta) phi + (mu/delta) prox_{delta R}(phi)
  Vector w(2, 0.0);
  const double ratio = c.mu / c.delta;
  for (std::size_t it = 0; it < 50; ++it) {
    Vector g = agents[0].risk.exact_gradient(w);
    Vector phi(2);
    for (std::size_t i = 0; i < 2; ++i) phi[i] = w[i] - c.mu * g[i];
    Vector pr = agents[0].regularizer.prox(phi, c.delta);
    for (std::size_t i = 0; i < 2; ++i)
      w[i] = (1.0 - ratio) * phi[i] + ratio * pr[i];
  }
  for (std::size_t i = 0; i < 2; ++i)
    REQUIRE(state.w[0][i] == Catch::Approx(w[i]).margin(1e-12));
}

TEST_CASE("identical agents stay in consensus under a doubly stochastic matrix") {
  std::vector<AgentSpec> agents(4);
  for (auto& a : agents) {
    a.risk = SmoothRisk::quadratic(diag({1.0, 1.0}), {1.0, -1.0});
    a.regularizer = Regularizer::l1(0.3);
  }
  auto A = build_matrix(Graph::ring_with_self_loops(4), WeightingRule::kMetropolis);
  auto p = perron_vector(A);

  DiffusionConfig c;
  c.mu = 0.05;
  c.delta = 0.1;
  c.n_iterations = 200;
  c.exact_gradients = true;
  run(agents, A, p, c, [&](const NetworkState& s) {
    for (std::size_t k = 1; k < 4; ++k)
      REQUIRE(dist2(s.w[k], s.w[0]) < 1e-12);
  });
}

TEST_CASE("runs are deterministic and variant-paired on common random numbers") {
  auto agents = two_quadratic_agents();
  for (auto& a : agents)
    a.risk = SmoothRisk::quadratic(a.risk.hessian(), {1.0, 1.0},
                                   NoiseMode::kSyntheticGaussian, 0.5);
  auto A = build_matrix(Graph::complete(2), WeightingRule::kUniformAveraging);
  auto p = perron_vector(A);

  DiffusionConfig c;
  c.mu = 0.02;
  c.delta = 0.1;
  c.n_iterations = 300;
  c.seed = 99;

  auto s1 = run(agents, A, p, c, nullptr);
  auto s2 = run(agents, A, p, c, nullptr);
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t i = 0; i < 2; ++i) REQUIRE(s1.w[k][i] == s2.w[k][i]);

  // zero regularizers: incremental and non-incremental variants coincide
  for (auto& a : agents) a.regularizer = Regularizer::zero();
  auto inc = run(agents, A, p, c, nullptr);
  c.variant = Variant::kNonIncremental;
  auto non = run(agents, A, p, c, nullptr);
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t i = 0; i < 2; ++i) REQUIRE(inc.w[k][i] == non.w[k][i]);
}

TEST_CASE("non-incremental variant differs with a regularizer but still converges") {
  auto agents = two_quadratic_agents();
  auto A = build_matrix(Graph::complete(2), WeightingRule::kUniformAveraging);
  auto p = perron_vector(A);

  DiffusionConfig c;
  c.mu = 0.02;
  c.delta = 0.1;
  c.n_iterations = 4000;
  c.exact_gradients = true;
  auto inc = run(agents, A, p, c, nullptr);
  c.variant = Variant::kNonIncremental;
  auto non = run(agents, A, p, c, nullptr);

  auto smoothed = solve_smoothed(agents, p, c.delta, 1e-12);
  REQUIRE(dist2(inc.w[0], smoothed.w_star) < 0.05);
  REQUIRE(dist2(non.w[0], smoothed.w_star) < 0.05);
}

TEST_CASE("centralized reference reaches the smoothed fixed point") {
  auto agents = two_quadratic_agents();
  auto A = build_matrix(Graph::complete(2), WeightingRule::kUniformAveraging);
  auto p = perron_vector(A);

  DiffusionConfig c;
  c.mu = 0.05;
  c.delta = 0.1;
  c.n_iterations = 5000;
  c.variant = Variant::kCentralizedReference;
  auto state = run(agents, A, p, c, nullptr);

  auto smoothed = solve_smoothed(agents, p, c.delta, 1e-12);
  REQUIRE(dist2(state.w[0], smoothed.w_star) < 1e-8);
  // fixed point: T_c(w_delta) = w_delta
  Vector fp = step_centralized(smoothed.w_star, agents, p, c);
  REQUIRE(dist2(fp, smoothed.w_star) < 1e-10);
}

TEST_CASE("divergence raises immediately") {
  std::vector<AgentSpec> agents(1);
  agents[0].risk = SmoothRisk::quadratic(diag({1.0}), {0.0});
  agents[0].regularizer = Regularizer::zero();
  auto A = build_matrix(Graph::complete(1), WeightingRule::kUniformAveraging);
  auto p = perron_vector(A);

  DiffusionConfig c;
  c.mu = 1e3;
  c.delta = 1e3;
  c.n_iterations = 500;
  c.exact_gradients = true;
  std::vector<Vector> init{Vector{1.0}};
  REQUIRE_THROWS_AS(run(agents, A, p, c, nullptr, 0, &init), DivergenceDetected);
}

TEST_CASE("sink observes the initial state and every iterate") {
  auto agents = two_quadratic_agents();
  auto A = build_matrix(Graph::complete(2), WeightingRule::kUniformAveraging);
  auto p = perron_vector(A);

  DiffusionConfig c;
  c.mu = 0.01;
  c.delta = 0.1;
  c.n_iterations = 7;
  c.exact_gradients = true;
  std::size_t calls = 0;
  run(agents, A, p, c, [&](const NetworkState& s) {
    REQUIRE(s.iteration == calls);
    ++calls;
  });
  REQUIRE(calls == 8);
}
