#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "regdiff/errors.hpp"
#include "regdiff/linalg.hpp"

namespace regdiff {

struct Sample {
  double gamma = 1.0;  // binary class label, +1 or -1
  Vector h;            // feature vector
};

/// Feature generator h = gamma * template + v, v ~ N(0, sigma^2 I), with
/// labels uniform on {-1, +1}.
struct DataModel {
  Vector template_vec;
  double noise_sigma = 0.0;

  Sample draw(std::mt19937_64& g) const {
    Sample s;
    s.gamma = (g() & 1u) ? 1.0 : -1.0;
    s.h.resize(template_vec.size());
    if (noise_sigma > 0.0) {
      std::normal_distribution<double> noise(0.0, noise_sigma);
      for (std::size_t i = 0; i < s.h.size(); ++i)
        s.h[i] = s.gamma * template_vec[i] + noise(g);
    } else {
      for (std::size_t i = 0; i < s.h.size(); ++i)
        s.h[i] = s.gamma * template_vec[i];
    }
    return s;
  }
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

enum class RiskKind { kZero, kQuadratic, kLogisticL2 };
enum class NoiseMode { kStreaming, kSyntheticGaussian };

/// Differentiable stochastic risk with exact-gradient and sampled-gradient
/// access. Immutable after construction; RNG streams are owned by callers.
class SmoothRisk {
 public:
  static SmoothRisk zero(std::size_t dim) {
    SmoothRisk r;
    r.kind_ = RiskKind::kZero;
    r.dim_ = dim;
    return r;
  }

  /// J(w) = w^T H w / 2 - b^T w. Synthetic-noise mode perturbs the exact
  /// gradient with N(0, sigma^2 I); streaming mode uses the LMS form
  /// (h h^T) w - gamma h.
  static SmoothRisk quadratic(Matrix H, Vector b,
                              NoiseMode mode = NoiseMode::kSyntheticGaussian,
                              double synth_sigma = 0.0) {
    SmoothRisk r;
    r.kind_ = RiskKind::kQuadratic;
    r.dim_ = b.size();
    r.H_ = std::move(H);
    r.b_ = std::move(b);
    r.noise_mode_ = mode;
    r.synth_sigma_ = synth_sigma;
    r.compute_quadratic_spectrum();
    return r;
  }

  /// J(w) = E ln(1 + exp(-gamma h^T w)) + rho2 ||w||^2. The population
  /// gradient is approximated on a frozen evaluation set drawn once here.
  static SmoothRisk logistic_l2(double rho2, DataModel model, std::mt19937_64& g,
                                std::size_t eval_set_size = 100000) {
    SmoothRisk r;
    r.kind_ = RiskKind::kLogisticL2;
    r.dim_ = model.template_vec.size();
    r.rho2_ = rho2;
    r.model_ = std::move(model);
    r.noise_mode_ = NoiseMode::kStreaming;
    r.frozen_.reserve(eval_set_size);
    double max_h_sq = 0.0;
    for (std::size_t i = 0; i < eval_set_size; ++i) {
      r.frozen_.push_back(r.model_.draw(g));
      max_h_sq = std::max(max_h_sq, norm2_sq(r.frozen_.back().h));
    }
    r.lambda_U_ = 0.25 * max_h_sq + 2.0 * rho2;
    r.lambda_L_ = 2.0 * rho2;
    return r;
  }

  RiskKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  bool is_zero() const { return kind_ == RiskKind::kZero; }
  double lambda_U() const { return lambda_U_; }
  double lambda_L() const { return lambda_L_; }
  NoiseMode noise_mode() const { return noise_mode_; }
  const DataModel& data_model() const { return model_; }
  const Matrix& hessian() const { return H_; }

  double evaluate(const Vector& w) const {
    switch (kind_) {
      case RiskKind::kZero:
        return 0.0;
      case RiskKind::kQuadratic:
        return 0.5 * dot(w, H_.apply(w)) - dot(b_, w);
      case RiskKind::kLogisticL2: {
        double s = 0.0;
        for (const Sample& smp : frozen_) {
          const double m = -smp.gamma * dot(smp.h, w);
          // log1p(exp(m)) computed stably for large |m|
          s += (m > 30.0) ? m : std::log1p(std::exp(m));
        }
        return s / static_cast<double>(frozen_.size()) + rho2_ * norm2_sq(w);
      }
    }
    return 0.0;
  }

  Vector exact_gradient(const Vector& w) const {
    switch (kind_) {
      case RiskKind::kZero:
        return Vector(dim_, 0.0);
      case RiskKind::kQuadratic: {
        Vector g = H_.apply(w);
        axpy(-1.0, b_, g);
        return g;
      }
      case RiskKind::kLogisticL2: {
        Vector g(dim_, 0.0);
        for (const Sample& s : frozen_) {
          const double c = -s.gamma * sigmoid(-s.gamma * dot(s.h, w));
          axpy(c, s.h, g);
        }
        const double inv = 1.0 / static_cast<double>(frozen_.size());
        for (double& v : g) v *= inv;
        axpy(2.0 * rho2_, w, g);
        return g;
      }
    }
    return Vector(dim_, 0.0);
  }

  /// Instantaneous loss gradient for an observed sample (streaming form).
  Vector stochastic_gradient(const Vector& w, const Sample& s) const {
    switch (kind_) {
      case RiskKind::kZero:
        return Vector(dim_, 0.0);
      case RiskKind::kQuadratic: {
        // (h h^T) w - gamma h
        const double hw = dot(s.h, w);
        Vector g = scale(hw, s.h);
        axpy(-s.gamma, s.h, g);
        return g;
      }
      case RiskKind::kLogisticL2: {
        const double c = -s.gamma * sigmoid(-s.gamma * dot(s.h, w));
        Vector g = scale(c, s.h);
        axpy(2.0 * rho2_, w, g);
        return g;
      }
    }
    return Vector(dim_, 0.0);
  }

  /// One stochastic gradient draw, dispatching on the configured noise mode.
  Vector stochastic_gradient(const Vector& w, std::mt19937_64& g) const {
    if (kind_ == RiskKind::kZero) return Vector(dim_, 0.0);
    if (kind_ == RiskKind::kQuadratic && noise_mode_ == NoiseMode::kSyntheticGaussian) {
      Vector grad = exact_gradient(w);
      if (synth_sigma_ > 0.0) {
        std::normal_distribution<double> noise(0.0, synth_sigma_);
        for (double& v : grad) v += noise(g);
      }
      return grad;
    }
    return stochastic_gradient(w, model_.draw(g));
  }

 private:
  void compute_quadratic_spectrum() {
    // power iteration for lambda_max, then on the shifted matrix for lambda_min
    const std::size_t n = dim_;
    auto power = [&](auto&& apply_op) {
      Vector x(n);
      for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 + 0.01 * double(i);
      double nx = norm2(x);
      for (double& v : x) v /= nx;
      double prev = 0.0;
      for (std::size_t it = 0; it < 200000; ++it) {
        Vector y = apply_op(x);
        double ny = norm2(y);
        if (ny < 1e-300) return 0.0;
        for (double& v : y) v /= ny;
        x = std::move(y);
        if (it > 2 && std::abs(ny - prev) <= 1e-12 * std::max(ny, 1.0)) return ny;
        prev = ny;
      }
      return prev;
    };
    lambda_U_ = power([&](const Vector& x) { return H_.apply(x); });
    const double shift = lambda_U_;
    double top_shifted = power([&](const Vector& x) {
      Vector y = scale(shift, x);
      axpy(-1.0, H_.apply(x), y);
      return y;
    });
    lambda_L_ = shift - top_shifted;
    if (lambda_L_ < 0.0 && lambda_L_ > -1e-10) lambda_L_ = 0.0;
  }

  RiskKind kind_ = RiskKind::kZero;
  std::size_t dim_ = 0;
  Matrix H_;
  Vector b_;
  double rho2_ = 0.0;
  DataModel model_;
  NoiseMode noise_mode_ = NoiseMode::kStreaming;
  double synth_sigma_ = 0.0;
  std::vector<Sample> frozen_;
  double lambda_U_ = 0.0;
  double lambda_L_ = 0.0;
};

/// Empirical fit of the gradient-noise bound E||s||^2 <= beta^2 ||w||^2 + sigma^2:
/// least squares on (||w||^2, mean ||ghat - g||^2) pairs, clamped nonnegative.
struct NoiseMoments {
  double beta_sq = 0.0;
  double sigma_sq = 0.0;
};

inline NoiseMoments noise_moments(const SmoothRisk& J, const std::vector<Vector>& w_grid,
                                  std::size_t n_draws, std::mt19937_64& g) {
  std::vector<double> xs, ys;
  for (const Vector& w : w_grid) {
    const Vector exact = J.exact_gradient(w);
    double acc = 0.0;
    for (std::size_t i = 0; i < n_draws; ++i) {
      Vector ghat = J.stochastic_gradient(w, g);
      acc += dist2_sq(ghat, exact);
    }
    xs.push_back(norm2_sq(w));
    ys.push_back(acc / static_cast<double>(n_draws));
  }
  // affine least squares y = beta_sq * x + sigma_sq
  const std::size_t n = xs.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  NoiseMoments m;
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-30) {
    m.beta_sq = 0.0;
    m.sigma_sq = sy / static_cast<double>(n);
  } else {
    m.beta_sq = (n * sxy - sx * sy) / denom;
    m.sigma_sq = (sy - m.beta_sq * sx) / static_cast<double>(n);
  }
  m.beta_sq = std::max(0.0, m.beta_sq);
  m.sigma_sq = std::max(0.0, m.sigma_sq);
  return m;
}

}  // namespace regdiff
