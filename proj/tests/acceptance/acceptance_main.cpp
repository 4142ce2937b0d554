// Acceptance gate: one PASS/FAIL line per criterion. Usage:
//   acceptance [N ...]    run the listed criteria (default: all)
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "regdiff/config.hpp"
#include "regdiff/engine.hpp"
#include "regdiff/experiment.hpp"
#include "regdiff/metrics.hpp"
#include "regdiff/presets.hpp"
#include "regdiff/smoothing.hpp"
#include "regdiff/solvers.hpp"

using namespace regdiff;

namespace {

std::size_t workers() {
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---- criterion 1: smoothing bias bound and decay slope -----------------------

bool criterion_bias(std::string& detail) {
  bool ok = true;
  std::ostringstream out;
  for (const std::string preset : {"bias-1d", "bias-10d"}) {
    auto config = parse_config(preset_config(preset));
    config.output_dir = "acceptance_out/bias_" + preset;
    VerifyReport rep = verify_bias(config, {1e-1, 1e-2, 1e-3, 1e-4}, true);
    ok = ok && rep.pass;
    out << preset << (rep.pass ? " ok" : " FAILED") << "; ";
    if (!rep.pass)
      for (const auto& line : rep.lines) out << line << "; ";
  }
  detail = out.str();
  return ok;
}

// ---- criterion 2: centralized contraction at rate gamma_c --------------------

bool criterion_contraction(std::string& detail) {
  auto config = parse_config(preset_config("contraction-quad"));
  VerifyReport rep = verify_contraction(config, 500);
  std::ostringstream out;
  for (const auto& line : rep.lines) out << line << "; ";
  detail = out.str();
  return rep.pass;
}

// ---- criterion 3: O(mu) steady-state MSD under delta = mu^(1/2-kappa) --------

bool criterion_msd(std::string& detail) {
  auto config = parse_config(preset_config("msd-quadratic"));
  config.output_dir = "acceptance_out/msd";
  VerifyReport rep = verify_msd(config, workers(), true);
  std::ostringstream out;
  for (const auto& line : rep.lines) out << line << "; ";
  detail = out.str();
  return rep.pass;
}

// ---- criterion 4: proximal and smoothing property suite ----------------------

double argmin_1d(const std::function<double(double)>& f, double lo, double hi) {
  for (int level = 0; level < 4; ++level) {
    double best_x = lo, best_v = f(lo);
    const double step = (hi - lo) / 200.0;
    for (int i = 1; i <= 200; ++i) {
      const double x = lo + step * i;
      const double v = f(x);
      if (v < best_v) {
        best_v = v;
        best_x = x;
      }
    }
    lo = best_x - step;
    hi = best_x + step;
  }
  return 0.5 * (lo + hi);
}

Vector prox_grid_separable(const Regularizer& R, const Vector& w, double delta) {
  Vector u(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    Vector probe(w.size(), 0.0);
    auto f = [&](double x) {
      probe[i] = x;
      double rv = R.evaluate(probe);
      if (rv == kPlusInfinity) return 1e100;
      return rv + (w[i] - x) * (w[i] - x) / (2.0 * delta);
    };
    u[i] = argmin_1d(f, -std::abs(w[i]) - 10.0, std::abs(w[i]) + 10.0);
  }
  return u;
}

// disk-constrained 2-d oracle in polar coordinates, where the feasible set is
// a box and nested grid refinement is sound
Vector prox_ball_grid(double radius, const Vector& w, double delta) {
  auto f = [&](double r, double th) {
    const double a = r * std::cos(th), b = r * std::sin(th);
    return ((w[0] - a) * (w[0] - a) + (w[1] - b) * (w[1] - b)) / (2.0 * delta);
  };
  double rlo = 0.0, rhi = radius, tlo = -3.2, thi = 3.2;
  double br = 0, bt = 0;
  for (int level = 0; level < 5; ++level) {
    double best = 1e300;
    const double sr = (rhi - rlo) / 120.0, st = (thi - tlo) / 120.0;
    for (int i = 0; i <= 120; ++i)
      for (int j = 0; j <= 120; ++j) {
        const double r = rlo + sr * i, th = tlo + st * j;
        const double v = f(r, th);
        if (v < best) {
          best = v;
          br = r;
          bt = th;
        }
      }
    rlo = std::max(0.0, br - sr);
    rhi = std::min(radius, br + sr);
    tlo = bt - st;
    thi = bt + st;
  }
  return {br * std::cos(bt), br * std::sin(bt)};
}

bool criterion_prox_properties(std::string& detail) {
  std::ostringstream out;
  bool ok = true;
  std::mt19937_64 g(1234);
  std::uniform_real_distribution<double> wd(-4.0, 4.0);
  std::uniform_real_distribution<double> dd(0.1, 2.0);

  struct Case {
    std::string name;
    Regularizer R;
    bool separable;
  };
  std::vector<Case> cases = {
      {"l1", Regularizer::l1(0.8), true},
      {"group_l1", Regularizer::group_l1(1.2, {1, 0, 1}), true},
      {"weighted_sum_l1",
       Regularizer::weighted_sum({{0.5, Regularizer::l1(0.6)},
                                  {1.0, Regularizer::group_l1(0.9, {0, 1, 1})}}),
       true},
      {"indicator_box", Regularizer::indicator_box(-1.0, 1.0), true},
      {"indicator_ball", Regularizer::indicator_ball(1.5), false}};

  // prox vs independent grid minimization: >= 100 cases per kind, < 1e-5
  for (const Case& c : cases) {
    double worst = 0.0;
    for (int trial = 0; trial < 120; ++trial) {
      const double delta = dd(g);
      Vector w;
      if (c.separable)
        w = {wd(g), wd(g), wd(g)};
      else
        w = {wd(g), wd(g)};
      Vector p = c.R.prox(w, delta);
      Vector o = c.separable ? prox_grid_separable(c.R, w, delta)
                             : prox_ball_grid(1.5, w, delta);
      for (std::size_t i = 0; i < w.size(); ++i)
        worst = std::max(worst, std::abs(p[i] - o[i]));
    }
    if (worst >= 1e-5) ok = false;
    out << c.name << " prox-vs-grid max err " << worst << "; ";
  }

  // Lipschitz and co-coercivity of the smoothed gradient: >= 1000 pairs per kind
  for (const Case& c : cases) {
    double worst_lip = 0.0, worst_coco = 0.0;
    for (double delta : {0.3, 1.0}) {
      for (int trial = 0; trial < 600; ++trial) {
        Vector x{wd(g), wd(g), wd(g)}, y{wd(g), wd(g), wd(g)};
        Vector gx = moreau_gradient(c.R, x, delta);
        Vector gy = moreau_gradient(c.R, y, delta);
        const double gd = dist2(gx, gy);
        worst_lip = std::max(worst_lip, gd - dist2(x, y) / delta);
        worst_coco =
            std::max(worst_coco, delta * gd * gd - dot(sub(gx, gy), sub(x, y)));
      }
    }
    if (worst_lip > 1e-10 || worst_coco > 1e-10) ok = false;
    out << c.name << " lip excess " << worst_lip << " coco excess " << worst_coco
        << "; ";
  }

  // finite-difference consistency of the envelope gradient
  for (const Case& c : cases) {
    double worst = 0.0;
    const double delta = 0.4;
    auto quad = ProximityFunction::make_quadratic();
    for (int trial = 0; trial < 50; ++trial) {
      Vector w{wd(g), wd(g), wd(g)};
      Vector grad = moreau_gradient(c.R, w, delta);
      Vector fd = regdiff::detail::numeric_gradient(
          [&](const Vector& x) { return smooth_eval(c.R, x, delta, quad); }, w, 1e-6);
      for (std::size_t i = 0; i < w.size(); ++i)
        worst = std::max(worst, std::abs(grad[i] - fd[i]));
    }
    if (worst >= 1e-5) ok = false;
    out << c.name << " fd err " << worst << "; ";
  }

  detail = out.str();
  return ok;
}

// ---- criterion 5: network property suite -------------------------------------

bool criterion_network_properties(std::string& detail) {
  std::ostringstream out;
  bool ok = true;

  // Perron invariants and column stochasticity across topologies and rules
  struct Net {
    std::string name;
    Graph graph;
    WeightingRule rule;
  };
  std::vector<Net> nets = {
      {"complete5-uniform", Graph::complete(5), WeightingRule::kUniformAveraging},
      {"ring8-metropolis", Graph::ring_with_self_loops(8), WeightingRule::kMetropolis},
      {"ring3-uniform", Graph::ring_with_self_loops(3), WeightingRule::kUniformAveraging}};
  for (const Net& net : nets) {
    auto A = build_matrix(net.graph, net.rule);
    const double col_err = A.max_column_sum_error();
    auto p = perron_vector(A);
    double psum = 0.0, pmin = 1.0;
    for (double v : p.p) {
      psum += v;
      pmin = std::min(pmin, v);
    }
    const double residual = norm_inf(sub(A.a.apply(p.p), p.p));
    const bool net_ok = col_err < 1e-12 && std::abs(psum - 1.0) < 1e-12 && pmin > 0.0 &&
                        residual < 1e-12 * norm_inf(p.p) &&
                        second_eigenvalue_modulus(A) < 1.0;
    ok = ok && net_ok;
    out << net.name << (net_ok ? " ok" : " FAILED") << "; ";
  }

  // consensus preservation: identical agents remain identical forever
  {
    std::vector<AgentSpec> agents(4);
    Matrix H(2, 2);
    H(0, 0) = 1.0;
    H(1, 1) = 2.0;
    for (auto& a : agents) {
      a.risk = SmoothRisk::quadratic(H, {1.0, -0.5});
      a.regularizer = Regularizer::l1(0.3);
    }
    auto A = build_matrix(Graph::ring_with_self_loops(4), WeightingRule::kMetropolis);
    auto p = perron_vector(A);
    DiffusionConfig dc;
    dc.mu = 0.05;
    dc.delta = 0.1;
    dc.n_iterations = 300;
    dc.exact_gradients = true;
    double worst = 0.0;
    run(agents, A, p, dc, [&](const NetworkState& s) {
      for (std::size_t k = 1; k < s.w.size(); ++k)
        worst = std::max(worst, dist2(s.w[k], s.w[0]));
    });
    if (worst > 1e-12) ok = false;
    out << "consensus drift " << worst << "; ";
  }

  // bit-identical reruns with stochastic gradients
  {
    std::vector<AgentSpec> agents(3);
    Matrix H(2, 2);
    H(0, 0) = 1.5;
    H(1, 1) = 0.8;
    for (std::size_t k = 0; k < 3; ++k) {
      agents[k].risk = SmoothRisk::quadratic(H, {0.5 + 0.1 * double(k), 1.0},
                                             NoiseMode::kSyntheticGaussian, 0.7);
      agents[k].regularizer = (k == 0) ? Regularizer::l1(0.2) : Regularizer::zero();
    }
    auto A = build_matrix(Graph::ring_with_self_loops(3), WeightingRule::kMetropolis);
    auto p = perron_vector(A);
    DiffusionConfig dc;
    dc.mu = 0.02;
    dc.delta = 0.1;
    dc.n_iterations = 500;
    dc.seed = 321;
    auto s1 = run(agents, A, p, dc, nullptr, /*rep=*/4);
    auto s2 = run(agents, A, p, dc, nullptr, /*rep=*/4);
    bool identical = true;
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t i = 0; i < 2; ++i)
        identical = identical && s1.w[k][i] == s2.w[k][i];
    ok = ok && identical;
    out << "rerun " << (identical ? "bit-identical" : "DIVERGED") << "; ";
  }

  detail = out.str();
  return ok;
}

// ---- criterion 6: cooperation and regularization orderings -------------------

bool criterion_fig3(std::string& detail) {
  auto config = parse_config(preset_config("paper-fig3"));
  config.output_dir = "acceptance_out/fig3";
  ExperimentResult res = run_experiment(config, workers(), true);

  std::ostringstream out;
  bool ok = res.curves.size() == 3;
  double mean[3] = {0, 0, 0}, ci[3] = {0, 0, 0};
  for (std::size_t c = 0; c < res.curves.size() && c < 3; ++c) {
    const auto& per_rep = res.curves[c].points[0].test_error_per_rep;
    std::vector<double> vals;
    for (double v : per_rep)
      if (!std::isnan(v)) vals.push_back(v);
    if (vals.empty()) {
      ok = false;
      continue;
    }
    for (double v : vals) mean[c] += v;
    mean[c] /= double(vals.size());
    ci[c] = ci_half_width(vals);
    out << res.curves[c].name << " test error " << mean[c] << " +/- " << ci[c] << "; ";
  }
  if (ok) {
    const bool order = mean[0] < mean[1] && mean[1] < mean[2];
    const bool separated =
        mean[0] + ci[0] < mean[1] - ci[1] && mean[1] + ci[1] < mean[2] - ci[2];
    out << (order ? "ordering ok" : "ORDERING VIOLATED") << "; "
        << (separated ? "intervals disjoint" : "INTERVALS OVERLAP");
    ok = order && separated;
  }
  detail = out.str();
  return ok;
}

// ---- criterion 7: single-agent reductions ------------------------------------

bool criterion_single_agent(std::string& detail) {
  std::ostringstream out;
  bool ok = true;

  // damped proximal point form, exact gradients
  {
    std::vector<AgentSpec> agents(1);
    Matrix H(3, 3);
    H(0, 0) = 1.2;
    H(1, 1) = 0.9;
    H(2, 2) = 1.7;
    agents[0].risk = SmoothRisk::quadratic(H, {1.0, -0.6, 0.4});
    agents[0].regularizer = Regularizer::l1(0.5);
    auto A = build_matrix(Graph::complete(1), WeightingRule::kUniformAveraging);
    auto p = perron_vector(A);

    DiffusionConfig dc;
    dc.mu = 0.03;
    dc.delta = 0.15;
    dc.n_iterations = 400;
    dc.exact_gradients = true;
    auto state = run(agents, A, p, dc, nullptr);

    Vector w(3, 0.0);
    const double ratio = dc.mu / dc.delta;
    for (std::size_t it = 0; it < dc.n_iterations; ++it) {
      Vector grad = agents[0].risk.exact_gradient(w);
      Vector phi(3);
      for (std::size_t i = 0; i < 3; ++i) phi[i] = w[i] - dc.mu * grad[i];
      Vector pr = agents[0].regularizer.prox(phi, dc.delta);
      for (std::size_t i = 0; i < 3; ++i)
        w[i] = (1.0 - ratio) * phi[i] + ratio * pr[i];
    }
    double err = dist2(state.w[0], w);
    if (err > 1e-12) ok = false;
    out << "damped proximal deviation " << err << "; ";
  }

  // zero regularizer: incremental and non-incremental coincide bit for bit
  {
    std::vector<AgentSpec> agents(1);
    Matrix H(2, 2);
    H(0, 0) = 1.0;
    H(1, 1) = 2.0;
    agents[0].risk =
        SmoothRisk::quadratic(H, {1.0, 1.0}, NoiseMode::kSyntheticGaussian, 0.5);
    agents[0].regularizer = Regularizer::zero();
    auto A = build_matrix(Graph::complete(1), WeightingRule::kUniformAveraging);
    auto p = perron_vector(A);

    DiffusionConfig dc;
    dc.mu = 0.02;
    dc.delta = 0.1;
    dc.n_iterations = 1000;
    dc.seed = 77;
    auto inc = run(agents, A, p, dc, nullptr);
    dc.variant = Variant::kNonIncremental;
    auto non = run(agents, A, p, dc, nullptr);
    bool identical = true;
    for (std::size_t i = 0; i < 2; ++i) identical = identical && inc.w[0][i] == non.w[0][i];
    ok = ok && identical;
    out << "zero-regularizer variants "
        << (identical ? "bit-identical" : "DIFFER");
  }

  detail = out.str();
  return ok;
}

struct Criterion {
  int id;
  std::string title;
  std::function<bool(std::string&)> fn;
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<Criterion> criteria = {
      {1, "smoothing bias within bound, decay slope >= 0.9", criterion_bias},
      {2, "centralized recursion contracts at gamma_c", criterion_contraction},
      {3, "steady-state MSD scales as O(mu)", criterion_msd},
      {4, "proximal and smoothing property suite", criterion_prox_properties},
      {5, "network property suite", criterion_network_properties},
      {6, "cooperation and regularization improve test error", criterion_fig3},
      {7, "single-agent reductions", criterion_single_agent}};

  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

  bool all_ok = true;
  for (const Criterion& c : criteria) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), c.id) == selected.end())
      continue;
    std::string detail;
    bool ok = false;
    try {
      ok = c.fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.title
              << " [" << detail << "]\n";
    all_ok = all_ok && ok;
  }
  return all_ok ? 0 : 1;
}
