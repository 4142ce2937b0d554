#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "regdiff/config.hpp"
#include "regdiff/engine.hpp"
#include "regdiff/errors.hpp"
#include "regdiff/metrics.hpp"
#include "regdiff/solvers.hpp"

namespace regdiff {

namespace detail {

inline void run_jobs(std::vector<std::function<void()>>& jobs, std::size_t workers) {
  if (workers <= 1 || jobs.size() <= 1) {
    for (auto& j : jobs) j();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex err_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size() || failed.load()) return;
      try {
        jobs[i]();
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t n = std::min(workers, jobs.size());
  pool.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline std::string fingerprint(const json& j) {
  const std::string dump = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline CombinationMatrix identity_combination(std::size_t n) {
  CombinationMatrix cm;
  cm.a = Matrix::identity(n);
  return cm;
}

/// Tail-window mean without the stationarity gate (per-repetition statistic;
/// the gate is applied to the across-repetition average).
inline double tail_mean_msd(const RunRecord& rec, double window_fraction) {
  const std::size_t n = rec.rows.size();
  const std::size_t win = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(window_fraction * double(n))));
  double s = 0.0;
  for (std::size_t i = n - win; i < n; ++i) s += rec.rows[i].msd_network;
  return s / static_cast<double>(win);
}

inline double tail_mean_test_error(const RunRecord& rec, double window_fraction) {
  const std::size_t n = rec.rows.size();
  const std::size_t win = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(window_fraction * double(n))));
  double s = 0.0;
  std::size_t count = 0;
  for (std::size_t i = n - win; i < n; ++i) {
    if (!std::isnan(rec.rows[i].test_error)) {
      s += rec.rows[i].test_error;
      ++count;
    }
  }
  return count > 0 ? s / static_cast<double>(count)
                   : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

struct CurvePointResult {
  double mu = 0.0;
  double delta = 0.0;
  RunRecord averaged;                     // rows averaged across repetitions
  std::vector<double> steady_per_rep;     // tail-window MSD per repetition
  std::vector<double> test_error_per_rep; // tail-window test error per repetition
};

struct CurveResult {
  std::string name;
  std::vector<CurvePointResult> points;
};

struct ExperimentResult {
  std::vector<CurveResult> curves;
  SweepSummary sweep;  // nonempty when a mu sweep with an MSD target ran
};

/// Execute every (curve, mu-point, repetition) of a parsed config, write run
/// and sweep CSVs plus the resolved-config echo, and return the summaries.
inline ExperimentResult run_experiment(const ExperimentConfig& config,
                                       std::size_t workers = 1,
                                       bool write_csv = true) {
  BuiltExperiment built = build_experiment(config);
  const std::string fp = detail::fingerprint(config.raw);

  if (write_csv) {
    std::filesystem::create_directories(config.output_dir);
    std::ofstream echo(config.output_dir + "/config_echo.json");
    echo << config.raw.dump(2) << '\n';
  }

  ExperimentResult result;
  for (const auto& curve_cfg : config.curves) {
    CurveResult curve;
    curve.name = curve_cfg.name;

    std::vector<AgentSpec> agents = built.agents;
    if (!curve_cfg.use_regularizers)
      for (AgentSpec& a : agents) a.regularizer = Regularizer::zero();
    const CombinationMatrix A = curve_cfg.cooperative
                                    ? built.A
                                    : detail::identity_combination(config.n_agents);

    for (std::size_t pt = 0; pt < config.mu_values.size(); ++pt) {
      const double mu = config.mu_values[pt];
      const double delta = config.resolve_delta(mu);

      Vector target(config.dim, 0.0);
      if (config.msd_target == "smoothed")
        target = solve_smoothed(agents, built.p, delta, config.oracle_tol).w_star;
      else if (config.msd_target == "nonsmooth")
        target = solve_nonsmooth(agents, built.p, config.oracle_tol).w_star;

      // gamma_c >= 1 is surfaced as a warning, not a hard failure
      {
        const double gc = gamma_c(mu, delta, aggregate_lambda_L(agents, built.p),
                                  aggregate_lambda_U(agents, built.p));
        if (gc >= 1.0)
          std::cerr << "warning: curve " << curve.name << " mu=" << mu
                    << " gives gamma_c=" << gc << " >= 1 (no contraction guarantee)\n";
      }

      DiffusionConfig dc;
      dc.mu = mu;
      dc.delta = delta;
      dc.n_iterations = config.iterations;
      dc.variant = curve_cfg.variant;
      dc.seed = config.seed;

      std::vector<RunRecord> records(config.repetitions);
      std::vector<std::function<void()>> jobs;
      for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
        jobs.push_back([&, rep] {
          RunRecord rec;
          rec.seed = config.seed;
          rec.config_fingerprint = fp;
          rec.rows.reserve(config.iterations + 1);
          const auto& test_set = built.test_set;
          auto sink = [&](const NetworkState& state) {
            RunRow row = make_row(state, built.p, target);
            const bool measure =
                config.test_error_stride > 0 && !test_set.empty() &&
                (state.iteration % config.test_error_stride == 0 ||
                 state.iteration == config.iterations);
            if (measure) {
              double acc = 0.0;
              for (const Vector& w : state.w) acc += test_error(w, test_set);
              row.test_error = acc / static_cast<double>(state.w.size());
            }
            rec.rows.push_back(row);
          };
          run(agents, A, built.p, dc, sink, rep);
          records[rep] = std::move(rec);
        });
      }
      detail::run_jobs(jobs, workers);

      CurvePointResult point;
      point.mu = mu;
      point.delta = delta;
      point.averaged.seed = config.seed;
      point.averaged.config_fingerprint = fp;
      point.averaged.rows.assign(config.iterations + 1, RunRow{});
      for (std::size_t i = 0; i <= config.iterations; ++i) {
        RunRow& avg = point.averaged.rows[i];
        avg.iter = i;
        double te = 0.0;
        std::size_t te_count = 0;
        for (const RunRecord& rec : records) {
          avg.msd_network += rec.rows[i].msd_network;
          avg.msd_centroid += rec.rows[i].msd_centroid;
          avg.disagreement += rec.rows[i].disagreement;
          if (!std::isnan(rec.rows[i].test_error)) {
            te += rec.rows[i].test_error;
            ++te_count;
          }
        }
        const double inv = 1.0 / static_cast<double>(records.size());
        avg.msd_network *= inv;
        avg.msd_centroid *= inv;
        avg.disagreement *= inv;
        if (te_count > 0) avg.test_error = te / static_cast<double>(te_count);
      }
      for (const RunRecord& rec : records) {
        point.steady_per_rep.push_back(detail::tail_mean_msd(rec, config.window_fraction));
        point.test_error_per_rep.push_back(
            detail::tail_mean_test_error(rec, config.window_fraction));
      }

      if (write_csv) {
        for (std::size_t rep = 0; rep < records.size(); ++rep) {
          std::ostringstream name;
          name << config.output_dir << "/run_" << curve.name << "_p" << pt << "_r" << rep
               << ".csv";
          write_run_csv(records[rep], name.str());
        }
        std::ostringstream name;
        name << config.output_dir << "/run_" << curve.name << "_p" << pt << "_mean.csv";
        write_run_csv(point.averaged, name.str());
      }
      curve.points.push_back(std::move(point));
    }
    result.curves.push_back(std::move(curve));
  }

  // mu-sweep summary over the first curve
  if (config.mu_values.size() >= 2 && !result.curves.empty()) {
    const CurveResult& c0 = result.curves.front();
    std::vector<double> xs, ys;
    for (const CurvePointResult& pt : c0.points) {
      SweepPoint sp;
      sp.axis = "mu";
      sp.value = pt.mu;
      try {
        sp.mean = steady_state_msd(pt.averaged, config.window_fraction);
      } catch (const TransientNotSettled& e) {
        std::cerr << "warning: mu=" << pt.mu << ": " << e.what() << '\n';
        sp.mean = detail::tail_mean_msd(pt.averaged, config.window_fraction);
      }
      sp.ci_half_width = ci_half_width(pt.steady_per_rep);
      result.sweep.points.push_back(sp);
      xs.push_back(sp.value);
      ys.push_back(sp.mean);
    }
    if (xs.size() >= 3) {
      auto [slope, intercept] = loglog_slope(xs, ys);
      result.sweep.slope = slope;
      result.sweep.intercept = intercept;
    }
    if (write_csv) write_sweep_csv(result.sweep, config.output_dir + "/sweep.csv");
  }
  return result;
}

struct VerifyReport {
  bool pass = true;
  std::vector<std::string> lines;

  void add(bool ok, const std::string& what) {
    pass = pass && ok;
    lines.push_back(std::string(ok ? "PASS  " : "FAIL  ") + what);
  }
  void note(const std::string& what) { lines.push_back("      " + what); }
};

/// Smoothing-bias verification: measured ||w_o - w_delta||^2 against
/// delta * (2/lambda_L) * sum p_k d(r_k) over a delta sweep, plus the
/// log-log decay slope of the measured bias.
inline VerifyReport verify_bias(const ExperimentConfig& config,
                                const std::vector<double>& deltas = {1e-1, 1e-2, 1e-3,
                                                                     1e-4},
                                bool write_csv = false) {
  BuiltExperiment built = build_experiment(config);
  VerifyReport report;

  OracleSolution nonsmooth = solve_nonsmooth(built.agents, built.p, config.oracle_tol);
  std::vector<Vector> r_star = recover_subgradients(built.agents, built.p,
                                                    nonsmooth.w_star);

  SweepSummary sweep;
  std::vector<double> xs, ys;
  for (double delta : deltas) {
    // the envelope gradient (w - prox)/delta amplifies rounding by 1/delta,
    // so the residual target cannot sit below that floor
    const double tol = std::max(config.oracle_tol, 1e-14 / delta);
    OracleSolution smoothed = solve_smoothed(built.agents, built.p, delta, tol);
    const double bias = dist2_sq(nonsmooth.w_star, smoothed.w_star);
    const double bound = bias_bound_rhs(built.agents, built.p, delta, r_star);
    std::ostringstream line;
    line << "bias bound at delta=" << delta << ": measured=" << bias
         << " <= bound=" << bound;
    report.add(bias <= bound + 1e-12, line.str());
    SweepPoint sp;
    sp.axis = "delta";
    sp.value = delta;
    sp.mean = bias;
    sweep.points.push_back(sp);
    // solver-floor biases carry no scaling information
    if (bias > 1e-16) {
      xs.push_back(delta);
      ys.push_back(bias);
    }
  }
  if (xs.size() >= 3) {
    auto [slope, intercept] = loglog_slope(xs, ys);
    (void)intercept;
    std::ostringstream line;
    line << "bias decay slope=" << slope << " >= 0.9";
    report.add(slope >= 0.9, line.str());
    sweep.slope = slope;
  } else {
    report.note("bias at solver floor for all deltas; decay slope vacuously satisfied");
  }
  if (write_csv) {
    std::filesystem::create_directories(config.output_dir);
    write_sweep_csv(sweep, config.output_dir + "/sweep.csv");
  }
  return report;
}

/// Centralized-contraction verification: per-step ratios of the exact-gradient
/// reference recursion against gamma_c at mu in {0.5, 0.1} * mu_star.
inline VerifyReport verify_contraction(const ExperimentConfig& config,
                                       std::size_t steps = 500) {
  BuiltExperiment built = build_experiment(config);
  VerifyReport report;
  const double lambda_L = aggregate_lambda_L(built.agents, built.p);
  const double lambda_U = aggregate_lambda_U(built.agents, built.p);
  const double delta = config.resolve_delta(config.mu_values.front());
  const double ms = mu_star(delta, lambda_L, lambda_U);
  {
    std::ostringstream line;
    line << "lambda_L=" << lambda_L << " lambda_U=" << lambda_U << " mu_star=" << ms;
    report.note(line.str());
  }

  // negative control: report the configured mu when it breaks the guarantee
  const double mu_cfg = config.mu_values.front();
  if (gamma_c(mu_cfg, delta, lambda_L, lambda_U) >= 1.0) {
    std::ostringstream line;
    line << "warning: configured mu=" << mu_cfg
         << " gives gamma_c=" << gamma_c(mu_cfg, delta, lambda_L, lambda_U)
         << " >= 1; no contraction guarantee at that step size";
    report.note(line.str());
  }

  for (double frac : {0.5, 0.1}) {
    const double mu = frac * ms;
    const double gc = gamma_c(mu, delta, lambda_L, lambda_U);
    DiffusionConfig dc;
    dc.mu = mu;
    dc.delta = delta;
    dc.exact_gradients = true;

    OracleSolution fixed = solve_smoothed(built.agents, built.p, delta, 1e-13);
    std::mt19937_64 g(config.seed + 17);
    std::normal_distribution<double> unit(0.0, 1.0);
    Vector w = fixed.w_star;
    for (double& v : w) v += unit(g);

    double max_ratio = 0.0;
    std::size_t measured = 0;
    for (std::size_t i = 0; i < steps; ++i) {
      const double before = dist2_sq(w, fixed.w_star);
      if (before < 1e-22) break;  // at the solver floor
      w = step_centralized(w, built.agents, built.p, dc);
      const double after = dist2_sq(w, fixed.w_star);
      max_ratio = std::max(max_ratio, after / before);
      ++measured;
    }
    std::ostringstream line;
    line << "contraction at mu=" << mu << " (gamma_c=" << gc
         << "): max squared-distance step ratio=" << max_ratio << " over " << measured
         << " steps";
    report.add(measured > 0 && max_ratio <= gc + 1e-6, line.str());
  }
  return report;
}

/// Steady-state MSD scaling: log-log slope of the tail-window network MSD
/// against mu under the coupling delta = mu^(1/2 - kappa).
inline VerifyReport verify_msd(const ExperimentConfig& config, std::size_t workers = 1,
                               bool write_csv = false) {
  VerifyReport report;
  if (!config.kappa) {
    report.add(false, "msd verification requires algorithm.kappa in the config");
    return report;
  }
  if (config.mu_values.size() < 3) {
    report.add(false, "msd verification requires a mu sweep with >= 3 points");
    return report;
  }
  ExperimentResult res = run_experiment(config, workers, write_csv);
  const SweepSummary& sweep = res.sweep;
  for (const SweepPoint& pt : sweep.points) {
    std::ostringstream line;
    line << "steady-state MSD at mu=" << pt.value << ": " << pt.mean << " (ci +/- "
         << pt.ci_half_width << ")";
    report.note(line.str());
  }
  std::ostringstream line;
  line << "MSD scaling slope=" << sweep.slope << " in [0.8, 1.3]";
  report.add(sweep.slope >= 0.8 && sweep.slope <= 1.3, line.str());
  return report;
}

}  // namespace regdiff
