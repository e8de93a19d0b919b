#pragma once

// Quantized data domain [-beta, beta] with N uniform bins, randomized rounding
// to the N+1 bin edges, and the quantized pmfs that rounding induces.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aaa/error.hpp"
#include "aaa/rng.hpp"

namespace aaa {

class QuantizedDomain {
 public:
  QuantizedDomain(double beta, int n_bins) : beta_(beta), n_bins_(n_bins) {
    require(std::isfinite(beta) && beta > 0.0, ErrorKind::invalid_parameter,
            "domain half-width must be positive, got " + std::to_string(beta));
    require(n_bins >= 1, ErrorKind::invalid_parameter,
            "bin count must be at least 1, got " + std::to_string(n_bins));
    sigma_ = 2.0 * beta / n_bins;
    edges_.resize(static_cast<std::size_t>(n_bins) + 1);
    for (int j = 0; j <= n_bins; ++j) edges_[j] = -beta + j * sigma_;
    edges_.back() = beta;
  }

  double beta() const noexcept { return beta_; }
  int n_bins() const noexcept { return n_bins_; }
  int n_edges() const noexcept { return n_bins_ + 1; }
  double sigma() const noexcept { return sigma_; }
  std::span<const double> edges() const noexcept { return edges_; }
  double edge(int j) const { return edges_.at(static_cast<std::size_t>(j)); }

  bool contains(double x) const noexcept { return x >= -beta_ && x <= beta_; }

  friend bool operator==(const QuantizedDomain& a, const QuantizedDomain& b) noexcept {
    return a.beta_ == b.beta_ && a.n_bins_ == b.n_bins_;
  }

 private:
  double beta_;
  int n_bins_;
  double sigma_;
  std::vector<double> edges_;
};

inline QuantizedDomain make_domain(double beta, int n_bins) { return {beta, n_bins}; }

/// Probability masses on the N+1 edges of a domain.
class QuantizedPmf {
 public:
  QuantizedPmf() = default;

  explicit QuantizedPmf(std::vector<double> masses, double tol = 1e-9) : masses_(std::move(masses)) {
    require(!masses_.empty(), ErrorKind::invalid_input, "pmf must have at least one mass");
    double total = 0.0;
    for (double m : masses_) {
      if (!(std::isfinite(m) && m >= -tol && m <= 1.0 + tol)) {
        throw Error(ErrorKind::invalid_input, "pmf mass outside [0, 1]: " + std::to_string(m));
      }
      total += m;
    }
    require(std::abs(total - 1.0) <= tol, ErrorKind::invalid_input,
            "pmf masses sum to " + std::to_string(total));
    for (double& m : masses_) m = std::clamp(m, 0.0, 1.0);
  }

  /// Uniform pmf over `size` edges.
  static QuantizedPmf uniform(std::size_t size) {
    return QuantizedPmf(std::vector<double>(size, 1.0 / static_cast<double>(size)));
  }

  /// Scales nonnegative weights to sum to one.
  static QuantizedPmf normalized(std::vector<double> weights) {
    double total = 0.0;
    for (double w : weights) {
      require(std::isfinite(w) && w >= 0.0, ErrorKind::invalid_input, "negative or non-finite weight");
      total += w;
    }
    require(total > 0.0, ErrorKind::invalid_input, "weights sum to zero");
    for (double& w : weights) w /= total;
    return QuantizedPmf(std::move(weights));
  }

  std::size_t size() const noexcept { return masses_.size(); }
  double operator[](std::size_t i) const { return masses_[i]; }
  std::span<const double> masses() const noexcept { return masses_; }

  /// Masses reflected through the domain centre: p'[i] = p[N - i].
  QuantizedPmf mirrored() const {
    QuantizedPmf out;
    out.masses_.assign(masses_.rbegin(), masses_.rend());
    return out;
  }

  friend bool operator==(const QuantizedPmf&, const QuantizedPmf&) = default;

 private:
  std::vector<double> masses_;
};

struct RoundingWeights {
  int left_index;
  double w_left;
  double w_right() const noexcept { return 1.0 - w_left; }
};

/// Tent weights of x against its bracketing edges. An x on an interior edge
/// x_i returns (i, 1); x = +beta returns (N-1, 0).
inline RoundingWeights rounding_weights(const QuantizedDomain& domain, double x) {
  if (!domain.contains(x)) throw Error(ErrorKind::out_of_domain, "value " + std::to_string(x) + " outside [-beta, beta]");
  const int n = domain.n_bins();
  const auto edges = domain.edges();
  int i = static_cast<int>(std::floor((x + domain.beta()) / domain.sigma()));
  i = std::clamp(i, 0, n - 1);
  while (i + 1 <= n - 1 && x >= edges[i + 1]) ++i;
  while (i > 0 && x < edges[i]) --i;
  const double w = 1.0 - (x - edges[i]) / domain.sigma();
  return {i, std::clamp(w, 0.0, 1.0)};
}

/// Randomized rounding to an edge index; E[edge value] = x.
template <class Rng>
int round_randomized(const QuantizedDomain& domain, double x, Rng& rng) {
  const RoundingWeights rw = rounding_weights(domain, x);
  if (rw.w_left >= 1.0) return rw.left_index;
  return uniform01(rng) < rw.w_left ? rw.left_index : rw.left_index + 1;
}

/// Expected-rounding pmf of a dataset: masses[i] = mean_x w_i(x).
inline QuantizedPmf empirical_quantized_pmf(const QuantizedDomain& domain, std::span<const double> data) {
  require(!data.empty(), ErrorKind::invalid_input, "empirical pmf of empty data");
  std::vector<double> acc(static_cast<std::size_t>(domain.n_edges()), 0.0);
  for (double x : data) {
    const RoundingWeights rw = rounding_weights(domain, x);
    acc[rw.left_index] += rw.w_left;
    acc[rw.left_index + 1] += rw.w_right();
  }
  const double n = static_cast<double>(data.size());
  for (double& a : acc) a /= n;
  return QuantizedPmf(std::move(acc));
}

/// Affine map t(x) = scale * x + offset.
struct LinearTransform {
  double scale = 1.0;
  double offset = 0.0;

  LinearTransform() = default;
  LinearTransform(double s, double o) : scale(s), offset(o) {
    require(scale != 0.0 && std::isfinite(scale) && std::isfinite(offset), ErrorKind::invalid_parameter,
            "linear transform needs a finite nonzero scale");
  }

  double forward(double x) const noexcept { return scale * x + offset; }
  double inverse(double y) const noexcept { return (y - offset) / scale; }
};

struct Rescaled {
  std::vector<double> values;
  LinearTransform transform;
};

/// Maps min(data) to -target_beta and max(data) to +target_beta. Constant data
/// maps to 0 with scale 1.
inline Rescaled rescale_to(std::span<const double> data, double target_beta) {
  require(!data.empty(), ErrorKind::invalid_input, "rescale of empty data");
  require(target_beta > 0.0, ErrorKind::invalid_parameter, "target half-width must be positive");
  const auto [lo_it, hi_it] = std::minmax_element(data.begin(), data.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  LinearTransform t = (hi > lo) ? LinearTransform(2.0 * target_beta / (hi - lo), 0.0) : LinearTransform(1.0, -lo);
  if (hi > lo) t.offset = -target_beta - t.scale * lo;
  Rescaled out{{}, t};
  out.values.reserve(data.size());
  for (double x : data) out.values.push_back(std::clamp(t.forward(x), -target_beta, target_beta));
  return out;
}

}  // namespace aaa
