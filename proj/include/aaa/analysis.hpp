#pragma once

// Variance and error metrics: expected noise variance of a table under a pmf,
// the closed-form expected variances of the baselines, the relative error
// between planned and realized variance, and squared error of a mean.

#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <utility>

#include "aaa/baselines.hpp"
#include "aaa/domain.hpp"
#include "aaa/error.hpp"
#include "aaa/mechanism.hpp"

namespace aaa {

enum class Mechanism { aaa, laplace, duchi, piecewise, hybrid };

inline constexpr std::array<Mechanism, 5> kAllMechanisms{Mechanism::aaa, Mechanism::laplace, Mechanism::duchi,
                                                         Mechanism::piecewise, Mechanism::hybrid};

inline const char* to_string(Mechanism m) {
  switch (m) {
    case Mechanism::aaa: return "aaa";
    case Mechanism::laplace: return "laplace";
    case Mechanism::duchi: return "duchi";
    case Mechanism::piecewise: return "piecewise";
    case Mechanism::hybrid: return "hybrid";
  }
  return "unknown";
}

inline Mechanism parse_mechanism(std::string_view name) {
  for (Mechanism m : kAllMechanisms) {
    if (name == to_string(m)) return m;
  }
  throw Error(ErrorKind::invalid_parameter,
              "unknown mechanism '" + std::string(name) + "' (expected aaa, laplace, duchi, piecewise or hybrid)");
}

/// sum_i p_i [ sum_{|j|<M} (sigma j)^2 q[i][j] + sigma^2 T2 (q[i][-M] + q[i][M]) ],
/// the same expression the noise program minimizes.
inline double expected_variance(const NoiseTable& table, const QuantizedPmf& pmf) {
  require(static_cast<int>(pmf.size()) == table.rows(), ErrorKind::size_mismatch,
          "pmf has " + std::to_string(pmf.size()) + " masses, table " + std::to_string(table.rows()) + " rows");
  const int m = table.m();
  const double sigma = table.domain().sigma();
  const double t2 = tail_second_moment(m, table.r());
  double total = 0.0;
  for (int i = 0; i < table.rows(); ++i) {
    const double p = pmf[static_cast<std::size_t>(i)];
    if (p == 0.0) continue;
    double row = t2 * (table.q(i, -m) + table.q(i, m));
    for (int j = -m + 1; j < m; ++j) row += static_cast<double>(j) * j * table.q(i, j);
    total += p * sigma * sigma * row;
  }
  return total;
}

/// phi = (v_hat - v) / v_hat.
inline double variance_relative_error(double v_hat, double v) {
  require(v_hat > 0.0, ErrorKind::invalid_parameter, "planned variance must be positive");
  return (v_hat - v) / v_hat;
}

/// Planned variance (under the pmf the table was solved for), realized
/// variance (under the true pmf) and their relative error.
struct VarianceReport {
  double v_hat = 0.0;
  double v = 0.0;
  double phi = 0.0;
};

inline VarianceReport variance_report(const NoiseTable& table, const QuantizedPmf& estimated,
                                      const QuantizedPmf& truth) {
  VarianceReport rep;
  rep.v_hat = expected_variance(table, estimated);
  rep.v = expected_variance(table, truth);
  rep.phi = variance_relative_error(rep.v_hat, rep.v);
  return rep;
}

/// Interval (-psi / (1 + psi), psi / (1 - psi)) for a pmf estimate whose
/// relative error is at most psi at every edge.
inline std::pair<double, double> claim3_bound(double psi) {
  require(psi >= 0.0, ErrorKind::invalid_parameter, "relative error bound must be nonnegative");
  require(psi < 1.0, ErrorKind::invalid_parameter, "relative error bound must be below 1 for a finite upper bound");
  return {-psi / (1.0 + psi), psi / (1.0 - psi)};
}

/// Conditional variance of a baseline at x in [-beta, beta].
inline double baseline_conditional_variance(Mechanism mech, double x, double beta, PrivacyBudget eps) {
  switch (mech) {
    case Mechanism::laplace: return laplace_variance(beta, eps);
    case Mechanism::duchi: return duchi_conditional_variance(x, beta, eps);
    case Mechanism::piecewise: return beta * beta * piecewise_conditional_variance(x / beta, eps);
    case Mechanism::hybrid: return hybrid_conditional_variance(x, beta, eps);
    case Mechanism::aaa: break;
  }
  throw Error(ErrorKind::invalid_parameter, "aaa has no closed-form conditional variance");
}

/// pmf-weighted average of the baseline's conditional variance over the edges.
inline double baseline_expected_variance(Mechanism mech, const QuantizedPmf& pmf, PrivacyBudget eps,
                                         const QuantizedDomain& domain) {
  require(static_cast<int>(pmf.size()) == domain.n_edges(), ErrorKind::size_mismatch,
          "pmf size differs from the number of edges");
  double total = 0.0;
  for (int i = 0; i < domain.n_edges(); ++i) {
    const double p = pmf[static_cast<std::size_t>(i)];
    if (p != 0.0) total += p * baseline_conditional_variance(mech, domain.edge(i), domain.beta(), eps);
  }
  return total;
}

inline double squared_error(double estimate, double truth) {
  const double d = estimate - truth;
  return d * d;
}

}  // namespace aaa
