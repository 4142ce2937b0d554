#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "regdiff/engine.hpp"
#include "regdiff/errors.hpp"
#include "regdiff/linalg.hpp"
#include "regdiff/risk.hpp"
#include "regdiff/topology.hpp"

namespace regdiff {

/// Weighted centroid w_c = sum_k p_k w_k and the dispersion
/// sum_k ||w_k - w_c||^2 of agents around it.
inline std::pair<Vector, double> centroid_and_disagreement(const NetworkState& state,
                                                           const PerronVector& p) {
  const std::size_t n = state.w.size();
  const std::size_t dim = n > 0 ? state.w[0].size() : 0;
  Vector wc(dim, 0.0);
  for (std::size_t k = 0; k < n; ++k) axpy(p.p[k], state.w[k], wc);
  double dis = 0.0;
  for (std::size_t k = 0; k < n; ++k) dis += dist2_sq(state.w[k], wc);
  return {wc, dis};
}

struct RunRow {
  std::size_t iter = 0;
  double msd_network = 0.0;   // mean over agents of ||target - w_k||^2
  double msd_centroid = 0.0;  // ||w_c - target||^2
  double disagreement = 0.0;  // sum_k ||w_k - w_c||^2
  double test_error = std::numeric_limits<double>::quiet_NaN();
};

struct RunRecord {
  std::vector<RunRow> rows;
  std::string config_fingerprint;
  std::uint64_t seed = 0;
};

inline RunRow make_row(const NetworkState& state, const PerronVector& p,
                       const Vector& target) {
  auto [wc, dis] = centroid_and_disagreement(state, p);
  RunRow row;
  row.iter = state.iteration;
  double acc = 0.0;
  for (const Vector& w : state.w) acc += dist2_sq(target, w);
  row.msd_network = acc / static_cast<double>(state.w.size());
  row.msd_centroid = dist2_sq(wc, target);
  row.disagreement = dis;
  return row;
}

/// Empirical surrogate for the steady-state limsup: mean network MSD over the
/// trailing window, gated on a 5% stationarity check against the half-window.
inline double steady_state_msd(const RunRecord& record, double window_fraction = 0.2) {
  const std::size_t n = record.rows.size();
  if (n < 2) throw TransientNotSettled("record has no window to average");
  const std::size_t win = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::ceil(window_fraction * double(n))));
  if (win >= n) throw TransientNotSettled("window covers the whole record");
  auto mean_over = [&](std::size_t count) {
    double s = 0.0;
    for (std::size_t i = n - count; i < n; ++i) s += record.rows[i].msd_network;
    return s / static_cast<double>(count);
  };
  const double full = mean_over(win);
  const double half = mean_over(std::max<std::size_t>(1, win / 2));
  if (std::abs(full - half) > 0.05 * std::max(std::abs(full), 1e-300))
    throw TransientNotSettled("trailing window is not stationary; run longer");
  return full;
}

/// Fraction of misclassified samples under sign(h^T w); ties count as errors.
inline double test_error(const Vector& w, const std::vector<Sample>& test_set) {
  if (test_set.empty()) throw ValidationFailure("test set must be nonempty");
  std::size_t wrong = 0;
  for (const Sample& s : test_set) {
    const double score = dot(s.h, w);
    const double pred = score > 0.0 ? 1.0 : (score < 0.0 ? -1.0 : 0.0);
    if (pred != s.gamma) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(test_set.size());
}

/// Least-squares fit of log(y) against log(x).
inline std::pair<double, double> loglog_slope(const std::vector<double>& xs,
                                              const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 3)
    throw ValidationFailure("loglog_slope needs at least 3 matched points");
  const std::size_t n = xs.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (xs[i] <= 0.0 || ys[i] <= 0.0)
      throw NonPositiveValue("loglog_slope requires strictly positive values");
    const double lx = std::log(xs[i]);
    const double ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / static_cast<double>(n);
  return {slope, intercept};
}

inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_run_csv(const RunRecord& record, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "iter,msd_network,msd_centroid,disagreement,test_error\n";
  for (const RunRow& r : record.rows) {
    out << r.iter << ',' << format_g17(r.msd_network) << ',' << format_g17(r.msd_centroid)
        << ',' << format_g17(r.disagreement) << ',' << format_g17(r.test_error) << '\n';
  }
}

struct SweepPoint {
  std::string axis;
  double value = 0.0;
  double mean = 0.0;
  double ci_half_width = 0.0;
};

/// Summary of a sweep: per-axis-value steady-state means with across-repetition
/// confidence half-widths, plus the fitted log-log scaling.
struct SweepSummary {
  std::vector<SweepPoint> points;
  double slope = 0.0;
  double intercept = 0.0;
};

inline void write_sweep_csv(const SweepSummary& summary, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "axis,value,mean,ci_half_width\n";
  for (const SweepPoint& pt : summary.points) {
    out << pt.axis << ',' << format_g17(pt.value) << ',' << format_g17(pt.mean) << ','
        << format_g17(pt.ci_half_width) << '\n';
  }
}

/// 95% confidence half-width from the across-repetition standard error.
inline double ci_half_width(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);
  return 1.96 * std::sqrt(var / static_cast<double>(n));
}

}  // namespace regdiff
