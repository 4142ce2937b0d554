#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "regdiff/errors.hpp"
#include "regdiff/linalg.hpp"

namespace regdiff {

inline constexpr double kPlusInfinity = std::numeric_limits<double>::infinity();

enum class RegKind { kZero, kL1, kGroupL1, kIndicatorBox, kIndicatorBall, kWeightedSum };

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

/// Closed convex regularizer with evaluation and closed-form proximal map.
/// Indicator kinds evaluate to +infinity outside their set; prox never
/// returns infinities.
struct Regularizer {
  RegKind kind = RegKind::kZero;
  double rho1 = 0.0;               // l1 / group_l1 weight
  std::vector<std::uint8_t> mask;  // group_l1 diagonal 0/1 selection
  double lo = 0.0, hi = 0.0;       // indicator_box bounds
  double radius = 0.0;             // indicator_ball
  std::vector<std::pair<double, Regularizer>> parts;  // weighted_sum: (coef, R)

  static Regularizer zero() { return {}; }

  static Regularizer l1(double rho) {
    Regularizer r;
    r.kind = RegKind::kL1;
    r.rho1 = rho;
    return r;
  }

  static Regularizer group_l1(double rho, std::vector<std::uint8_t> m) {
    Regularizer r;
    r.kind = RegKind::kGroupL1;
    r.rho1 = rho;
    r.mask = std::move(m);
    return r;
  }

  static Regularizer indicator_box(double lo, double hi) {
    Regularizer r;
    r.kind = RegKind::kIndicatorBox;
    r.lo = lo;
    r.hi = hi;
    return r;
  }

  static Regularizer indicator_ball(double radius) {
    Regularizer r;
    r.kind = RegKind::kIndicatorBall;
    r.radius = radius;
    return r;
  }

  static Regularizer weighted_sum(std::vector<std::pair<double, Regularizer>> ps) {
    Regularizer r;
    r.kind = RegKind::kWeightedSum;
    r.parts = std::move(ps);
    return r;
  }

  bool is_zero() const {
    if (kind == RegKind::kZero) return true;
    if (kind == RegKind::kWeightedSum) {
      for (const auto& [c, p] : parts)
        if (c != 0.0 && !p.is_zero()) return false;
      return true;
    }
    return false;
  }

  double evaluate(const Vector& w) const {
    switch (kind) {
      case RegKind::kZero:
        return 0.0;
      case RegKind::kL1: {
        double s = 0.0;
        for (double v : w) s += std::abs(v);
        return rho1 * s;
      }
      case RegKind::kGroupL1: {
        double s = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i)
          if (i < mask.size() && mask[i]) s += std::abs(w[i]);
        return rho1 * s;
      }
      case RegKind::kIndicatorBox: {
        for (double v : w)
          if (v < lo - 1e-300 || v > hi + 1e-300) return kPlusInfinity;
        return 0.0;
      }
      case RegKind::kIndicatorBall:
        return norm2(w) <= radius * (1.0 + 1e-15) ? 0.0 : kPlusInfinity;
      case RegKind::kWeightedSum: {
        double s = 0.0;
        for (const auto& [c, p] : parts) {
          double v = p.evaluate(w);
          if (v == kPlusInfinity) return kPlusInfinity;
          s += c * v;
        }
        return s;
      }
    }
    return 0.0;
  }

  /// Per-coordinate l1 weight vector when the regularizer is a (sum of)
  /// l1/group_l1 terms; nullopt-style: returns false when a non-separable
  /// kind is present.
  bool l1_weights(std::size_t dim, Vector& out, double coef = 1.0) const {
    if (out.size() != dim) out.assign(dim, 0.0);
    switch (kind) {
      case RegKind::kZero:
        return true;
      case RegKind::kL1:
        for (std::size_t i = 0; i < dim; ++i) out[i] += coef * rho1;
        return true;
      case RegKind::kGroupL1:
        for (std::size_t i = 0; i < dim; ++i)
          if (i < mask.size() && mask[i]) out[i] += coef * rho1;
        return true;
      case RegKind::kWeightedSum:
        for (const auto& [c, p] : parts)
          if (!p.l1_weights(dim, out, coef * c)) return false;
        return true;
      default:
        return false;
    }
  }

  Vector prox(const Vector& w, double delta) const {
    if (delta <= 0.0) throw NonPositiveDelta("prox requires delta > 0");
    switch (kind) {
      case RegKind::kZero:
        return w;
      case RegKind::kL1: {
        Vector r(w.size());
        for (std::size_t i = 0; i < w.size(); ++i)
          r[i] = soft_threshold(w[i], delta * rho1);
        return r;
      }
      case RegKind::kGroupL1: {
        // Masked coordinates are soft-thresholded, unmasked pass through.
        Vector r(w.size());
        for (std::size_t i = 0; i < w.size(); ++i)
          r[i] = (i < mask.size() && mask[i]) ? soft_threshold(w[i], delta * rho1) : w[i];
        return r;
      }
      case RegKind::kIndicatorBox: {
        Vector r(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) r[i] = std::clamp(w[i], lo, hi);
        return r;
      }
      case RegKind::kIndicatorBall: {
        double n = norm2(w);
        if (n <= radius) return w;
        return scale(radius / n, w);
      }
      case RegKind::kWeightedSum:
        return prox_weighted_sum(w, delta);
    }
    return w;
  }

 private:
  Vector prox_weighted_sum(const Vector& w, double delta) const {
    // l1-type parts are coordinate-separable and collapse into a single
    // per-coordinate threshold, regardless of overlapping masks.
    Vector t;
    if (l1_weights(w.size(), t)) {
      Vector r(w.size());
      for (std::size_t i = 0; i < w.size(); ++i)
        r[i] = soft_threshold(w[i], delta * t[i]);
      return r;
    }
    // Otherwise only a single non-trivial part is exact.
    const Regularizer* active = nullptr;
    double active_coef = 0.0;
    for (const auto& [c, p] : parts) {
      if (c == 0.0 || p.is_zero()) continue;
      if (active != nullptr)
        throw NonSeparableSum(
            "weighted_sum prox: overlapping non-separable parts have no closed form");
      active = &p;
      active_coef = c;
    }
    if (active == nullptr) return w;
    return active->prox(w, delta * active_coef);
  }
};

}  // namespace regdiff
