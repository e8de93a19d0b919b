#pragma once

// Multidimensional means by attribute sampling: every client reports k of
// the d attributes, chosen uniformly without replacement, and each attribute
// runs the one-dimensional two-phase protocol on the clients that drew it.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aaa/domain.hpp"
#include "aaa/error.hpp"
#include "aaa/mechanism.hpp"
#include "aaa/rng.hpp"

namespace aaa {

/// Attribute assignment for client c draws from stream.fork({kAttributeTag, c}).
inline constexpr std::uint64_t kAttributeTag = 4;

/// n x d values; column j lies in [-betas[j], betas[j]].
class MultiDataset {
 public:
  MultiDataset(std::vector<std::vector<double>> rows, std::vector<double> betas)
      : rows_(std::move(rows)), betas_(std::move(betas)) {
    require(!rows_.empty(), ErrorKind::invalid_input, "multidimensional dataset has no rows");
    require(!betas_.empty(), ErrorKind::invalid_input, "multidimensional dataset has no columns");
    for (double b : betas_) require(b > 0.0 && std::isfinite(b), ErrorKind::invalid_parameter, "bounds must be positive");
    for (std::size_t c = 0; c < rows_.size(); ++c) {
      if (rows_[c].size() != betas_.size()) {
        throw Error(ErrorKind::size_mismatch, "row " + std::to_string(c) + " has " + std::to_string(rows_[c].size()) +
                                                  " values, expected " + std::to_string(betas_.size()));
      }
      for (std::size_t j = 0; j < betas_.size(); ++j) {
        if (!(std::abs(rows_[c][j]) <= betas_[j])) {
          throw Error(ErrorKind::out_of_domain, "row " + std::to_string(c) + ", column " + std::to_string(j) +
                                                    " outside its bounds");
        }
      }
    }
  }

  std::size_t size() const noexcept { return rows_.size(); }
  int dims() const noexcept { return static_cast<int>(betas_.size()); }
  double beta(int j) const { return betas_.at(static_cast<std::size_t>(j)); }
  double value(std::size_t c, int j) const { return rows_[c][static_cast<std::size_t>(j)]; }

  std::vector<double> column(int j) const {
    std::vector<double> out;
    out.reserve(rows_.size());
    for (const auto& r : rows_) out.push_back(r.at(static_cast<std::size_t>(j)));
    return out;
  }

 private:
  std::vector<std::vector<double>> rows_;
  std::vector<double> betas_;
};

/// k distinct attributes per client, in the order drawn (partial Fisher-Yates).
inline std::vector<std::vector<int>> assign_attributes(std::size_t n_clients, int d, int k, const Stream& stream) {
  require(d >= 1, ErrorKind::invalid_parameter, "need at least one attribute");
  require(k >= 1 && k <= d, ErrorKind::invalid_parameter,
          "clients must report between 1 and d = " + std::to_string(d) + " attributes, got k = " + std::to_string(k));
  std::vector<std::vector<int>> out(n_clients);
  std::vector<int> perm(static_cast<std::size_t>(d));
  for (std::size_t c = 0; c < n_clients; ++c) {
    for (int j = 0; j < d; ++j) perm[static_cast<std::size_t>(j)] = j;
    Stream rng = stream.fork({kAttributeTag, c});
    for (int t = 0; t < k; ++t) {
      const auto pick = t + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(d - t)));
      std::swap(perm[static_cast<std::size_t>(t)], perm[static_cast<std::size_t>(pick)]);
    }
    out[c].assign(perm.begin(), perm.begin() + k);
  }
  return out;
}

struct MultidimResult {
  std::vector<double> estimates;           // per attribute
  std::vector<std::size_t> assigned;       // n^(j): clients that drew attribute j
  std::vector<std::size_t> phase2_counts;  // clients that averaged into estimates[j]
};

/// Clients holding attribute j, in client order.
inline std::vector<std::vector<std::size_t>> clients_by_attribute(const std::vector<std::vector<int>>& assignment,
                                                                  int d) {
  std::vector<std::vector<std::size_t>> by(static_cast<std::size_t>(d));
  for (std::size_t c = 0; c < assignment.size(); ++c) {
    for (int j : assignment[c]) by[static_cast<std::size_t>(j)].push_back(c);
  }
  return by;
}

/// Attribute j runs the one-dimensional protocol on its clients with
/// stream.fork({j}) and the domain [-beta_j, beta_j] split into n_bins bins.
/// The noise program's constraints do not depend on beta, so one warm basis
/// serves every attribute.
inline MultidimResult run_multidim_protocol(const MultiDataset& data, PrivacyBudget eps, double split, int k,
                                            const NoiseShape& shape, int n_bins, const Stream& stream,
                                            const lp::SolveOptions& opts = {},
                                            std::span<const int> warm_basis = {}) {
  require(split > 0.0 && split < 1.0, ErrorKind::invalid_parameter, "split ratio must lie in (0, 1)");
  const int d = data.dims();
  const auto by = clients_by_attribute(assign_attributes(data.size(), d, k, stream), d);
  MultidimResult res;
  for (int j = 0; j < d; ++j) {
    const auto& members = by[static_cast<std::size_t>(j)];
    if (members.size() < 2) {
      throw Error(ErrorKind::degenerate_dimension, "attribute " + std::to_string(j) + " was drawn by " +
                                                       std::to_string(members.size()) + " clients, need at least 2");
    }
    std::vector<double> values;
    values.reserve(members.size());
    for (std::size_t c : members) values.push_back(data.value(c, j));
    const QuantizedDomain domain(data.beta(j), n_bins);
    try {
      const ProtocolResult r = run_protocol(values, eps, split, shape, domain,
                                            stream.fork({static_cast<std::uint64_t>(j)}), opts, warm_basis);
      res.estimates.push_back(r.mean_estimate);
      res.phase2_counts.push_back(r.phase2_count);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::degenerate_split) throw;
      throw Error(ErrorKind::degenerate_dimension, "attribute " + std::to_string(j) + ": " + e.what());
    }
    res.assigned.push_back(members.size());
  }
  return res;
}

}  // namespace aaa
