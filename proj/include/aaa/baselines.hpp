#pragma once

// Classical epsilon-LDP perturbations for bounded numeric data and their
// conditional variances: Laplace, Duchi et al., Piecewise, Hybrid, and
// generalized randomized response over a finite index set.

#include <cmath>
#include <cstdint>
#include <string>

#include "aaa/error.hpp"
#include "aaa/rng.hpp"

namespace aaa {

class PrivacyBudget {
 public:
  explicit PrivacyBudget(double epsilon) : epsilon_(epsilon) {
    require(epsilon > 0.0 && !std::isnan(epsilon), ErrorKind::invalid_parameter,
            "privacy budget must be positive, got " + std::to_string(epsilon));
  }
  double epsilon() const noexcept { return epsilon_; }
  double exp_eps() const noexcept { return std::exp(epsilon_); }

 private:
  double epsilon_;
};

namespace detail {

inline void check_bounded(double x, double beta) {
  require(beta > 0.0, ErrorKind::invalid_parameter, "beta must be positive");
  if (!(x >= -beta && x <= beta)) {
    throw Error(ErrorKind::out_of_domain,
                "value " + std::to_string(x) + " outside [-" + std::to_string(beta) + ", " + std::to_string(beta) + "]");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Laplace

inline double laplace_scale(double beta, PrivacyBudget eps) { return 2.0 * beta / eps.epsilon(); }

/// x + Laplace(0, 2 beta / eps), sampled by inverse CDF from one uniform.
template <class Rng>
double laplace_perturb(double x, double beta, PrivacyBudget eps, Rng& rng) {
  detail::check_bounded(x, beta);
  const double b = laplace_scale(beta, eps);
  const double u = uniform_open01(rng) - 0.5;
  const double noise = u < 0.0 ? b * std::log1p(2.0 * u) : -b * std::log1p(-2.0 * u);
  return x + noise;
}

inline double laplace_variance(double beta, PrivacyBudget eps) {
  const double b = laplace_scale(beta, eps);
  return 2.0 * b * b;
}

// ---------------------------------------------------------------------------
// Duchi et al.

/// Output magnitude beta (e^eps + 1) / (e^eps - 1).
inline double duchi_magnitude(double beta, PrivacyBudget eps) {
  return beta / std::tanh(eps.epsilon() / 2.0);
}

/// Pr[output = +magnitude | x].
inline double duchi_positive_probability(double x, double beta, PrivacyBudget eps) {
  detail::check_bounded(x, beta);
  return 0.5 * std::tanh(eps.epsilon() / 2.0) * (x / beta) + 0.5;
}

template <class Rng>
double duchi_perturb(double x, double beta, PrivacyBudget eps, Rng& rng) {
  const double p = duchi_positive_probability(x, beta, eps);
  const double mag = duchi_magnitude(beta, eps);
  return uniform01(rng) < p ? mag : -mag;
}

inline double duchi_conditional_variance(double x, double beta, PrivacyBudget eps) {
  detail::check_bounded(x, beta);
  const double mag = duchi_magnitude(beta, eps);
  return mag * mag - x * x;
}

// ---------------------------------------------------------------------------
// Piecewise (inputs in [-1, 1])

struct PiecewiseParams {
  double c;       // output support [-c, c]
  double p;       // density on the high window
  double left;    // l(x)
  double right;   // r(x) = l(x) + c - 1

  double low_density(double exp_eps) const noexcept { return p / exp_eps; }
};

inline PiecewiseParams piecewise_params(double x, PrivacyBudget eps) {
  if (!(x >= -1.0 && x <= 1.0)) {
    throw Error(ErrorKind::out_of_domain, "piecewise input " + std::to_string(x) + " outside [-1, 1]");
  }
  const double half = std::exp(eps.epsilon() / 2.0);
  const double c = (half + 1.0) / (half - 1.0);
  const double p = (eps.exp_eps() - half) / (2.0 * half + 2.0);
  const double l = (c + 1.0) / 2.0 * x - (c - 1.0) / 2.0;
  return {c, p, l, l + c - 1.0};
}

/// Conditional output density f(y | x); zero outside [-C, C].
inline double piecewise_density(double y, double x, PrivacyBudget eps) {
  const PiecewiseParams pp = piecewise_params(x, eps);
  if (y < -pp.c || y > pp.c) return 0.0;
  if (y >= pp.left && y <= pp.right) return pp.p;
  return pp.low_density(eps.exp_eps());
}

template <class Rng>
double piecewise_perturb(double x, PrivacyBudget eps, Rng& rng) {
  const PiecewiseParams pp = piecewise_params(x, eps);
  const double half = std::exp(eps.epsilon() / 2.0);
  if (uniform01(rng) < half / (half + 1.0)) return pp.left + (pp.right - pp.left) * uniform01(rng);
  // Outer region [-C, l) u (r, C]: pick a side proportionally to its length.
  const double left_len = pp.left + pp.c;
  const double right_len = pp.c - pp.right;
  const double u = uniform01(rng) * (left_len + right_len);
  if (u < left_len) return -pp.c + u;
  return pp.right + (u - left_len);
}

/// Piecewise on [-beta, beta]: scale in, perturb, scale out.
template <class Rng>
double piecewise_perturb_scaled(double x, double beta, PrivacyBudget eps, Rng& rng) {
  detail::check_bounded(x, beta);
  return beta * piecewise_perturb(x / beta, eps, rng);
}

/// Conditional variance for x in [-1, 1].
inline double piecewise_conditional_variance(double x, PrivacyBudget eps) {
  require(x >= -1.0 && x <= 1.0, ErrorKind::out_of_domain, "piecewise input outside [-1, 1]");
  const double h = std::exp(eps.epsilon() / 2.0) - 1.0;
  return x * x / h + (h + 4.0) / (3.0 * h * h);
}

// ---------------------------------------------------------------------------
// Hybrid: Piecewise with probability alpha, otherwise Duchi.

inline constexpr double kHybridThreshold = 0.61;

inline double hybrid_alpha(PrivacyBudget eps) {
  return eps.epsilon() > kHybridThreshold ? 1.0 - std::exp(-eps.epsilon() / 2.0) : 0.0;
}

template <class Rng>
double hybrid_perturb(double x, double beta, PrivacyBudget eps, Rng& rng) {
  detail::check_bounded(x, beta);
  const double alpha = hybrid_alpha(eps);
  if (alpha > 0.0 && uniform01(rng) < alpha) return piecewise_perturb_scaled(x, beta, eps, rng);
  return duchi_perturb(x, beta, eps, rng);
}

inline double hybrid_conditional_variance(double x, double beta, PrivacyBudget eps) {
  const double alpha = hybrid_alpha(eps);
  return alpha * beta * beta * piecewise_conditional_variance(x / beta, eps) +
         (1.0 - alpha) * duchi_conditional_variance(x, beta, eps);
}

// ---------------------------------------------------------------------------
// Generalized randomized response over {0, ..., size-1}

/// Probability of reporting the true index.
inline double grr_keep_probability(int size, double epsilon) {
  const double e = std::exp(epsilon);
  if (std::isinf(e)) return 1.0;
  return e / (e + (size - 1));
}

/// Probability of reporting one specific other index.
inline double grr_other_probability(int size, double epsilon) {
  const double e = std::exp(epsilon);
  if (std::isinf(e)) return 0.0;
  return 1.0 / (e + (size - 1));
}

/// Exact Pr[report = out | index = in].
inline double grr_probability(int out, int in, int size, double epsilon) {
  return out == in ? grr_keep_probability(size, epsilon) : grr_other_probability(size, epsilon);
}

/// Reports `index` with probability e^eps / (e^eps + size - 1), otherwise a
/// uniform draw from the other size - 1 indices. Accepts eps = 0 and +inf.
template <class Rng>
int generalized_rr(int index, int size, double epsilon, Rng& rng) {
  require(size >= 1, ErrorKind::invalid_parameter, "randomized response needs at least one index");
  if (index < 0 || index >= size) {
    throw Error(ErrorKind::out_of_domain, "index " + std::to_string(index) + " outside [0, " + std::to_string(size) + ")");
  }
  require(epsilon >= 0.0, ErrorKind::invalid_parameter, "negative privacy budget");
  if (size == 1 || uniform01(rng) < grr_keep_probability(size, epsilon)) return index;
  const auto other = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(size - 1)));
  return other < index ? other : other + 1;
}

}  // namespace aaa
