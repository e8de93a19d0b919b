#pragma once

// Quantized distribution estimation under epsilon-LDP: each client rounds its
// value to an edge, perturbs the edge index with generalized randomized
// response, and the aggregator inverts the response matrix.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "aaa/baselines.hpp"
#include "aaa/domain.hpp"
#include "aaa/error.hpp"

namespace aaa {

/// The (N+1)x(N+1) response matrix: diagonal e^eps / (N + e^eps), every
/// other entry 1 / (N + e^eps). Stored by its two distinct values.
struct RrMatrix {
  int size = 0;
  double epsilon = 0.0;
  double diagonal = 1.0;
  double off_diagonal = 0.0;

  double operator()(int row, int col) const noexcept { return row == col ? diagonal : off_diagonal; }

  /// A^{-1} = c I + d J, with J the all-ones matrix.
  struct Inverse {
    double c;
    double d;
  };

  /// A = (a - b) I + b J, so A^{-1} = I / (a - b) - b J / ((a - b)(a - b + n b)).
  Inverse inverse() const {
    const double a_minus_b = diagonal - off_diagonal;
    require(a_minus_b > 0.0, ErrorKind::invalid_parameter, "response matrix is singular at eps = 0");
    const double row_sum = a_minus_b + size * off_diagonal;
    return {1.0 / a_minus_b, -off_diagonal / (a_minus_b * row_sum)};
  }

  /// A^{-1} v.
  std::vector<double> solve(std::span<const double> v) const {
    require(static_cast<int>(v.size()) == size, ErrorKind::size_mismatch, "vector size differs from matrix size");
    const Inverse inv = inverse();
    double total = 0.0;
    for (double x : v) total += x;
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = inv.c * v[i] + inv.d * total;
    return out;
  }

  /// A v.
  std::vector<double> apply(std::span<const double> v) const {
    require(static_cast<int>(v.size()) == size, ErrorKind::size_mismatch, "vector size differs from matrix size");
    double total = 0.0;
    for (double x : v) total += x;
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (diagonal - off_diagonal) * v[i] + off_diagonal * total;
    return out;
  }
};

inline RrMatrix build_rr_matrix(int n_bins, double epsilon) {
  require(n_bins >= 1, ErrorKind::invalid_parameter, "response matrix needs N >= 1");
  require(epsilon >= 0.0, ErrorKind::invalid_parameter, "negative privacy budget");
  const int size = n_bins + 1;
  return {size, epsilon, grr_keep_probability(size, epsilon), grr_other_probability(size, epsilon)};
}

struct PerturbedHistogram {
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  std::vector<double> frequencies() const {
    std::vector<double> f(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) f[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
    return f;
  }
};

/// One client's report: randomized rounding followed by randomized response.
template <class Rng>
int perturb_edge_index(const QuantizedDomain& domain, double x, double epsilon, Rng& rng) {
  const int edge = round_randomized(domain, x, rng);
  return generalized_rr(edge, domain.n_edges(), epsilon, rng);
}

/// Client i draws from `stream.fork({i})`, so reports do not depend on order.
inline PerturbedHistogram collect_perturbed_histogram(const QuantizedDomain& domain, std::span<const double> data,
                                                      double epsilon, const Stream& stream) {
  require(!data.empty(), ErrorKind::invalid_input, "histogram of empty data");
  PerturbedHistogram hist{std::vector<std::uint64_t>(static_cast<std::size_t>(domain.n_edges()), 0), 0};
  for (std::size_t i = 0; i < data.size(); ++i) {
    Stream client = stream.fork({i});
    ++hist.counts[static_cast<std::size_t>(perturb_edge_index(domain, data[i], epsilon, client))];
  }
  hist.total = data.size();
  return hist;
}

struct Reconstruction {
  QuantizedPmf pmf;
  bool degenerate = false;  // every entry clipped to zero; pmf is uniform
};

/// Observed frequencies through A^{-1}, negatives clipped to zero, then
/// renormalized. An all-zero vector after clipping yields a flagged uniform pmf.
inline Reconstruction reconstruct_frequencies(std::span<const double> frequencies, const RrMatrix& matrix) {
  std::vector<double> v = matrix.solve(frequencies);
  double total = 0.0;
  for (double& x : v) {
    if (!(x > 0.0)) x = 0.0;
    total += x;
  }
  if (!(total > 0.0)) return {QuantizedPmf::uniform(v.size()), true};
  for (double& x : v) x /= total;
  return {QuantizedPmf(std::move(v)), false};
}

inline Reconstruction reconstruct_pmf(const PerturbedHistogram& hist, const RrMatrix& matrix) {
  require(static_cast<int>(hist.counts.size()) == matrix.size, ErrorKind::size_mismatch,
          "histogram has " + std::to_string(hist.counts.size()) + " bins, matrix " + std::to_string(matrix.size));
  require(hist.total > 0, ErrorKind::invalid_input, "empty histogram");
  return reconstruct_frequencies(hist.frequencies(), matrix);
}

/// sup_j |p(j) - p_hat(j)| / p(j) over indices with p(j) > 0; infinite when
/// p_hat puts mass where p has none.
inline double relative_error_bound(const QuantizedPmf& p_true, const QuantizedPmf& p_hat) {
  require(p_true.size() == p_hat.size(), ErrorKind::size_mismatch, "pmfs differ in size");
  double psi = 0.0;
  for (std::size_t j = 0; j < p_true.size(); ++j) {
    if (p_true[j] > 0.0) {
      psi = std::max(psi, std::abs(p_true[j] - p_hat[j]) / p_true[j]);
    } else if (p_hat[j] > 0.0) {
      return std::numeric_limits<double>::infinity();
    }
  }
  return psi;
}

}  // namespace aaa
