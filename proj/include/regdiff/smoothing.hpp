#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include "regdiff/errors.hpp"
#include "regdiff/linalg.hpp"
#include "regdiff/regularizer.hpp"

namespace regdiff {

/// Strongly convex proximity function with unit normalization: d(u) >= ||u||^2/2
/// and min d = 0 at u = 0. The conjugate is carried along for the infimal
/// convolution form and the low-dimensional numerical oracles.
struct ProximityFunction {
  std::function<double(const Vector&)> d;
  std::function<double(const Vector&)> d_conjugate;
  bool quadratic = false;

  static ProximityFunction make_quadratic() {
    ProximityFunction f;
    f.d = [](const Vector& u) { return 0.5 * norm2_sq(u); };
    f.d_conjugate = [](const Vector& v) { return 0.5 * norm2_sq(v); };
    f.quadratic = true;
    return f;
  }
};

inline constexpr std::size_t kMaxGenericProximityDim = 16;

/// Gradient of the Moreau envelope: (w - prox_{delta R}(w)) / delta.
inline Vector moreau_gradient(const Regularizer& R, const Vector& w, double delta) {
  if (delta <= 0.0) throw NonPositiveDelta("moreau_gradient requires delta > 0");
  Vector p = R.prox(w, delta);
  Vector g(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) g[i] = (w[i] - p[i]) / delta;
  return g;
}

namespace detail {

inline Vector numeric_gradient(const std::function<double(const Vector&)>& f,
                               const Vector& x, double h = 1e-6) {
  Vector g(x.size());
  Vector xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    xp[i] = xi + h;
    const double fp = f(xp);
    xp[i] = xi - h;
    const double fm = f(xp);
    xp[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Conjugate R*(u) in closed form for the primitive kinds.
inline double conjugate_eval(const Regularizer& R, const Vector& u) {
  switch (R.kind) {
    case RegKind::kZero: {
      // conjugate of 0 is the indicator of {0}
      for (double v : u)
        if (std::abs(v) > 1e-12) return kPlusInfinity;
      return 0.0;
    }
    case RegKind::kL1: {
      for (double v : u)
        if (std::abs(v) > R.rho1 * (1.0 + 1e-12)) return kPlusInfinity;
      return 0.0;
    }
    case RegKind::kGroupL1: {
      for (std::size_t i = 0; i < u.size(); ++i) {
        const bool masked = i < R.mask.size() && R.mask[i];
        const double cap = masked ? R.rho1 : 0.0;
        if (std::abs(u[i]) > cap * (1.0 + 1e-12) + 1e-12) return kPlusInfinity;
      }
      return 0.0;
    }
    case RegKind::kIndicatorBox: {
      // support function of the box
      double s = 0.0;
      for (double v : u) s += std::max(v * R.hi, v * R.lo);
      return s;
    }
    case RegKind::kIndicatorBall:
      return R.radius * norm2(u);
    case RegKind::kWeightedSum:
      throw ConjugateUnavailable("no closed-form conjugate for weighted_sum");
  }
  return 0.0;
}

/// prox of the scaled conjugate via the Moreau decomposition:
/// prox_{eta R*}(v) = v - eta * prox_{(1/eta) R}(v / eta).
inline Vector prox_conjugate(const Regularizer& R, const Vector& v, double eta) {
  Vector inner = R.prox(scale(1.0 / eta, v), 1.0 / eta);
  Vector r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) r[i] = v[i] - eta * inner[i];
  return r;
}

}  // namespace detail

/// R^delta(w) via the infimal convolution
///   min_u { R(u) + delta * d*((w - u)/delta) }.
/// Quadratic proximity uses the Moreau envelope in closed form; generic
/// proximity runs a proximal-gradient inner solver (dimension capped).
inline double smooth_eval(const Regularizer& R, const Vector& w, double delta,
                          const ProximityFunction& d) {
  if (delta <= 0.0) throw NonPositiveDelta("smooth_eval requires delta > 0");
  if (d.quadratic) {
    Vector p = R.prox(w, delta);
    double rv = R.evaluate(p);
    return rv + dist2_sq(w, p) / (2.0 * delta);
  }
  if (w.size() > kMaxGenericProximityDim)
    throw DimensionTooLargeForGenericProximity(
        "generic proximity inner solver limited to dimension 16");

  auto smooth_part = [&](const Vector& u) {
    Vector z(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) z[i] = (w[i] - u[i]) / delta;
    return delta * d.d_conjugate(z);
  };
  // d is 1-strongly convex, so grad d* is 1-Lipschitz and the smooth part has
  // modulus 1/delta; step delta is safe.
  const double eta = delta;
  Vector u = R.prox(w, delta);
  for (std::size_t it = 0; it < 200000; ++it) {
    Vector g = detail::numeric_gradient(smooth_part, u);
    Vector cand(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) cand[i] = u[i] - eta * g[i];
    Vector next = R.prox(cand, eta);
    double step = dist2(next, u);
    u = std::move(next);
    if (step < 1e-10 * eta) break;
  }
  return R.evaluate(u) + smooth_part(u);
}

/// Theorem-faithful gradient oracle: the maximizing u of
///   w^T u - R*(u) - delta * d(u),
/// computed by proximal-gradient ascent on the strongly concave dual.
/// Test-oracle path used to cross-check moreau_gradient.
inline Vector conjugate_smooth_gradient_oracle(const Regularizer& R, const Vector& w,
                                               double delta,
                                               const ProximityFunction& d) {
  if (delta <= 0.0) throw NonPositiveDelta("oracle requires delta > 0");
  if (w.size() > kMaxGenericProximityDim)
    throw DimensionTooLargeForGenericProximity("oracle limited to dimension 16");
  if (R.kind == RegKind::kWeightedSum)
    throw ConjugateUnavailable("oracle needs a closed-form conjugate");

  // Minimize psi(u) = R*(u) + delta*d(u) - w^T u, which is delta-strongly convex.
  auto smooth_part = [&](const Vector& u) { return delta * d.d(u) - dot(w, u); };
  auto smooth_grad = [&](const Vector& u) {
    Vector g;
    if (d.quadratic) {
      g = scale(delta, u);
    } else {
      g = detail::numeric_gradient([&](const Vector& x) { return delta * d.d(x); }, u);
    }
    for (std::size_t i = 0; i < u.size(); ++i) g[i] -= w[i];
    return g;
  };

  Vector u(w.size(), 0.0);
  double eta = 1.0 / std::max(delta, 1.0);
  for (std::size_t it = 0; it < 500000; ++it) {
    Vector g = smooth_grad(u);
    Vector next;
    double eta_try = eta;
    // backtracking on the smooth-part upper bound
    for (int bt = 0; bt < 60; ++bt) {
      Vector cand(u.size());
      for (std::size_t i = 0; i < u.size(); ++i) cand[i] = u[i] - eta_try * g[i];
      next = detail::prox_conjugate(R, cand, eta_try);
      const double lhs = smooth_part(next);
      const double quad =
          smooth_part(u) + dot(g, sub(next, u)) + dist2_sq(next, u) / (2.0 * eta_try);
      if (lhs <= quad + 1e-15) break;
      eta_try *= 0.5;
    }
    eta = eta_try;
    double step = dist2(next, u) / std::max(eta, 1e-300);
    u = std::move(next);
    if (step < 1e-10) break;
  }
  return u;
}

/// Immutable pairing of a regularizer with its smoothing parameter; gradient
/// and evaluation follow the quadratic-proximity closed forms by default.
class SmoothedRegularizer {
 public:
  SmoothedRegularizer(Regularizer base, double delta,
                      ProximityFunction proximity = ProximityFunction::make_quadratic())
      : base_(std::move(base)), delta_(delta), proximity_(std::move(proximity)) {
    if (delta_ <= 0.0) throw NonPositiveDelta("SmoothedRegularizer requires delta > 0");
  }

  const Regularizer& base() const { return base_; }
  double delta() const { return delta_; }

  Vector gradient(const Vector& w) const {
    if (proximity_.quadratic) return moreau_gradient(base_, w, delta_);
    return conjugate_smooth_gradient_oracle(base_, w, delta_, proximity_);
  }

  double evaluate(const Vector& w) const {
    return smooth_eval(base_, w, delta_, proximity_);
  }

 private:
  Regularizer base_;
  double delta_;
  ProximityFunction proximity_;
};

}  // namespace regdiff
