#pragma once

// The distribution-aware additive mechanism.
//
// Inputs are randomized-rounded to the N+1 edges x_i = -beta + i*sigma. An
// input on edge i receives additive noise sigma*j, where j is drawn from
// a conditional law fixed by the row q[i][-M..M]:
//
//   P(j | i) = q[i][j]                       |j| <  M
//            = q[i][+M] * r^(j - M)          j  >= M
//            = q[i][-M] * r^(-M - j)         j  <= -M
//
// The rows are the solution of a linear program that minimizes the
// pmf-weighted noise variance subject to normalization, zero mean, and the
// epsilon-LDP ratio bound at every output grid point k = i + j.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <span>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "aaa/baselines.hpp"
#include "aaa/domain.hpp"
#include "aaa/error.hpp"
#include "aaa/freqest.hpp"
#include "aaa/lp.hpp"
#include "aaa/rng.hpp"

namespace aaa {

// ---------------------------------------------------------------------------
// Geometric tail moments

namespace detail {

inline void check_tail_args(int m, double r) {
  require(m >= 1, ErrorKind::invalid_parameter, "tail offset must be >= 1");
  require(r >= 0.0, ErrorKind::invalid_parameter, "tail ratio must be nonnegative");
  require(r < 1.0, ErrorKind::divergent_series, "tail ratio " + std::to_string(r) + " >= 1 diverges");
}

}  // namespace detail

/// sum_{g >= 0} (m + g) r^g = m / (1 - r) + r / (1 - r)^2.
inline double tail_first_moment(int m, double r) {
  detail::check_tail_args(m, r);
  const double s = 1.0 - r;
  return m / s + r / (s * s);
}

/// sum_{g >= 0} (m + g)^2 r^g = m^2 / (1 - r) + (2m - 1) r / (1 - r)^2 + 2r / (1 - r)^3.
inline double tail_second_moment(int m, double r) {
  detail::check_tail_args(m, r);
  const double s = 1.0 - r;
  const double md = m;
  return md * md / s + (2.0 * md - 1.0) * r / (s * s) + 2.0 * r / (s * s * s);
}

// ---------------------------------------------------------------------------
// Noise table

struct NoiseShape {
  int m;     // explicit window is j in [-m, m]
  double r;  // geometric tail ratio beyond |j| = m

  /// Window half-width from the range ratio q = |noise range| / |data range| = 2M / N.
  static NoiseShape from_range_ratio(double ratio, int n_bins, double r) {
    return {static_cast<int>(std::lround(ratio * n_bins / 2.0)), r};
  }
  double range_ratio(int n_bins) const noexcept { return 2.0 * m / n_bins; }
};

inline void validate_shape(const NoiseShape& shape, const QuantizedDomain& domain) {
  require(shape.m >= domain.n_bins(), ErrorKind::invalid_parameter,
          "noise window M = " + std::to_string(shape.m) + " must be >= N = " + std::to_string(domain.n_bins()));
  require(shape.r > 0.0 && shape.r < 1.0, ErrorKind::invalid_parameter,
          "tail ratio must lie in (0, 1), got " + std::to_string(shape.r));
}

class NoiseTable {
 public:
  NoiseTable(QuantizedDomain domain, NoiseShape shape, double epsilon, std::vector<double> q)
      : domain_(std::move(domain)), shape_(shape), epsilon_(epsilon), q_(std::move(q)) {
    validate_shape(shape_, domain_);
    require(q_.size() == static_cast<std::size_t>(rows()) * width(), ErrorKind::size_mismatch,
            "noise table needs (N+1)(2M+1) = " + std::to_string(static_cast<std::size_t>(rows()) * width()) +
                " entries, got " + std::to_string(q_.size()));
    for (double v : q_) require(std::isfinite(v) && v >= 0.0, ErrorKind::invalid_input, "negative noise mass");
    build_cdf();
  }

  /// Every row puts all mass on j = 0.
  static NoiseTable zero_noise(const QuantizedDomain& domain, NoiseShape shape, double epsilon) {
    const int width = 2 * shape.m + 1;
    std::vector<double> q(static_cast<std::size_t>(domain.n_edges()) * width, 0.0);
    for (int i = 0; i < domain.n_edges(); ++i) q[static_cast<std::size_t>(i) * width + shape.m] = 1.0;
    return {domain, shape, epsilon, std::move(q)};
  }

  const QuantizedDomain& domain() const noexcept { return domain_; }
  const NoiseShape& shape() const noexcept { return shape_; }
  double epsilon() const noexcept { return epsilon_; }
  int rows() const noexcept { return domain_.n_edges(); }
  int width() const noexcept { return 2 * shape_.m + 1; }
  int m() const noexcept { return shape_.m; }
  double r() const noexcept { return shape_.r; }
  std::span<const double> values() const noexcept { return q_; }

  /// q[i][j] for j in [-M, M].
  double q(int i, int j) const noexcept {
    return q_[static_cast<std::size_t>(i) * width() + static_cast<std::size_t>(j + shape_.m)];
  }

  /// P(noise index j | edge i) for any integer j.
  double noise_mass(int i, long j) const noexcept {
    const int m = shape_.m;
    if (j > -m && j < m) return q(i, static_cast<int>(j));
    if (j >= m) return q(i, m) * std::pow(shape_.r, static_cast<double>(j - m));
    return q(i, -m) * std::pow(shape_.r, static_cast<double>(-m - j));
  }

  /// P(output grid index k | edge i), where output = -beta + k * sigma.
  double output_mass(int i, long k) const noexcept { return noise_mass(i, k - i); }

  /// Output grid range holding every distinct likelihood ratio: beyond it the
  /// ratios between rows are constant in k.
  long first_output() const noexcept { return -shape_.m; }
  long last_output() const noexcept { return domain_.n_bins() + shape_.m; }

  /// Draw a noise index for edge i from the window-plus-geometric-tails mixture.
  template <class Rng>
  long sample_noise(int i, Rng& rng) const {
    const std::size_t base = static_cast<std::size_t>(i) * (width() + 1);
    const double* cdf = cdf_.data() + base;
    const double total = cdf[width()];
    const double u = uniform01(rng) * total;
    // Slots: 0 = left tail, 1..2M-1 = j in (-M, M), 2M = right tail.
    const auto slot = static_cast<int>(std::upper_bound(cdf + 1, cdf + width() + 1, u) - (cdf + 1));
    const int m = shape_.m;
    if (slot <= 0) return -m - static_cast<long>(geometric_failures(rng, 1.0 - shape_.r));
    if (slot >= 2 * m) return m + static_cast<long>(geometric_failures(rng, 1.0 - shape_.r));
    return slot - m;
  }

 private:
  void build_cdf() {
    const int m = shape_.m;
    const double tail = 1.0 / (1.0 - shape_.r);
    cdf_.assign(static_cast<std::size_t>(rows()) * (width() + 1), 0.0);
    for (int i = 0; i < rows(); ++i) {
      double* c = cdf_.data() + static_cast<std::size_t>(i) * (width() + 1);
      double acc = 0.0;
      c[0] = 0.0;
      for (int slot = 0; slot < width(); ++slot) {
        const int j = slot - m;
        double mass = 0.0;
        if (j == -m) mass = q(i, -m) * tail;
        else if (j == m) mass = q(i, m) * tail;
        else mass = q(i, j);
        acc += mass;
        c[slot + 1] = acc;
      }
    }
  }

  QuantizedDomain domain_;
  NoiseShape shape_;
  double epsilon_;
  std::vector<double> q_;
  std::vector<double> cdf_;
};

struct TableCheck {
  double max_normalization_error = 0.0;  // |sum of row masses incl. tails - 1|
  double max_mean_error = 0.0;           // |E[j | i]| in grid units
  double min_entry = 0.0;

  bool passes(double tol) const noexcept {
    return max_normalization_error <= tol && max_mean_error <= tol && min_entry >= -tol;
  }
};

/// Row mass and row mean (in grid units) with the tails summed in closed form.
inline std::pair<double, double> row_moments(const NoiseTable& t, int i) {
  const int m = t.m();
  double mass = (t.q(i, -m) + t.q(i, m)) / (1.0 - t.r());
  double mean = tail_first_moment(m, t.r()) * (t.q(i, m) - t.q(i, -m));
  for (int j = -m + 1; j < m; ++j) {
    mass += t.q(i, j);
    mean += j * t.q(i, j);
  }
  return {mass, mean};
}

inline TableCheck check_table(const NoiseTable& t) {
  TableCheck c;
  c.min_entry = std::numeric_limits<double>::infinity();
  for (int i = 0; i < t.rows(); ++i) {
    const auto [mass, mean] = row_moments(t, i);
    c.max_normalization_error = std::max(c.max_normalization_error, std::abs(mass - 1.0));
    c.max_mean_error = std::max(c.max_mean_error, std::abs(mean));
  }
  for (double v : t.values()) c.min_entry = std::min(c.min_entry, v);
  return c;
}

// ---------------------------------------------------------------------------
// Linear program

/// Variable layout: q[i][j] at i*(2M+1) + (j+M), then one envelope variable
/// t_k per output index k in [-M, N+M].
struct LpLayout {
  int n_edges;
  int m;

  int width() const noexcept { return 2 * m + 1; }
  int num_q() const noexcept { return n_edges * width(); }
  int num_outputs() const noexcept { return n_edges + 2 * m; }  // k in [-M, N+M]
  int num_vars() const noexcept { return num_q() + num_outputs(); }
  int q_index(int i, int j) const noexcept { return i * width() + (j + m); }
  int t_index(long k) const noexcept { return num_q() + static_cast<int>(k + m); }
};

/// The LP variable and coefficient carrying d_i(k) = P(output k | edge i).
inline lp::Term output_term(const LpLayout& layout, double r, int i, long k) {
  const long j = k - i;
  if (j >= layout.m) return {layout.q_index(i, layout.m), std::pow(r, static_cast<double>(j - layout.m))};
  if (j <= -layout.m) return {layout.q_index(i, -layout.m), std::pow(r, static_cast<double>(-layout.m - j))};
  return {layout.q_index(i, static_cast<int>(j)), 1.0};
}

/// Minimize sum_i p_i [ sum_{|j|<M} (sigma j)^2 q[i][j] + sigma^2 T2 (q[i][-M] + q[i][M]) ]
/// subject to, for every edge i,
///   sum_{|j|<M} q[i][j] + (q[i][-M] + q[i][M]) / (1 - r) = 1
///   sum_{|j|<M} j q[i][j] + T1 (q[i][M] - q[i][-M])   = 0
/// and for every output k in [-M, N+M]:  t_k <= d_i(k) <= e^eps t_k.
/// With eps = +inf the privacy rows are omitted.
///
/// Finite budgets above kMaxProgramEpsilon are enforced at that cap: past
/// e^10 the ratio rows fall below the solver's feasibility resolution, and a
/// table meeting the tighter ratio is private for the larger budget anyway.
inline constexpr double kMaxProgramEpsilon = 10.0;

inline lp::LinearProgram build_lp(const QuantizedPmf& pmf, PrivacyBudget eps, const NoiseShape& shape,
                                  const QuantizedDomain& domain) {
  require(static_cast<int>(pmf.size()) == domain.n_edges(), ErrorKind::size_mismatch,
          "pmf has " + std::to_string(pmf.size()) + " masses, domain " + std::to_string(domain.n_edges()) + " edges");
  validate_shape(shape, domain);
  const LpLayout layout{domain.n_edges(), shape.m};
  const int m = shape.m;
  const double sigma2 = domain.sigma() * domain.sigma();
  const double t1 = tail_first_moment(m, shape.r);
  const double t2 = tail_second_moment(m, shape.r);
  const double tail_mass = 1.0 / (1.0 - shape.r);

  lp::LinearProgram prog(layout.num_vars());
  for (int i = 0; i < layout.n_edges; ++i) {
    const double p = pmf[static_cast<std::size_t>(i)];
    for (int j = -m + 1; j < m; ++j) prog.set_objective(layout.q_index(i, j), p * sigma2 * j * j);
    prog.set_objective(layout.q_index(i, -m), p * sigma2 * t2);
    prog.set_objective(layout.q_index(i, m), p * sigma2 * t2);
  }

  for (int i = 0; i < layout.n_edges; ++i) {
    std::vector<lp::Term> norm;
    std::vector<lp::Term> mean;
    for (int j = -m + 1; j < m; ++j) {
      norm.push_back({layout.q_index(i, j), 1.0});
      if (j != 0) mean.push_back({layout.q_index(i, j), static_cast<double>(j)});
    }
    norm.push_back({layout.q_index(i, -m), tail_mass});
    norm.push_back({layout.q_index(i, m), tail_mass});
    mean.push_back({layout.q_index(i, -m), -t1});
    mean.push_back({layout.q_index(i, m), t1});
    prog.add_constraint(std::move(norm), lp::Sense::equal, 1.0);
    prog.add_constraint(std::move(mean), lp::Sense::equal, 0.0);
  }

  const double e = std::exp(std::min(eps.epsilon(), kMaxProgramEpsilon));
  if (std::isfinite(eps.exp_eps())) {
    for (long k = -m; k <= domain.n_bins() + m; ++k) {
      const int t = layout.t_index(k);
      for (int i = 0; i < layout.n_edges; ++i) {
        const lp::Term d = output_term(layout, shape.r, i, k);
        prog.add_constraint({{d.var, d.coeff}, {t, -e}}, lp::Sense::less_equal, 0.0);
        prog.add_constraint({{t, 1.0}, {d.var, -d.coeff}}, lp::Sense::less_equal, 0.0);
      }
    }
  }
  return prog;
}

struct OptimizedNoise {
  NoiseTable table;
  double lp_objective;
  long lp_iterations;
  std::vector<int> basis;  // seeds later solves with the same N, M, r and eps
};

// ---------------------------------------------------------------------------
// Privacy verification

struct PrivacyReport {
  double max_ratio = 1.0;   // max over outputs k of max_i d_i(k) / min_i d_i(k)
  long worst_output = 0;
  int worst_numerator_row = 0;
  int worst_denominator_row = 0;
  bool passes = false;
};

/// Enumerates every output in [-M, N+M] plus one point past each end (the
/// tail regimes, whose ratios no longer change with k). A zero d_i(k) next
/// to a positive d_i'(k) is a disjoint-support violation with ratio +inf.
inline PrivacyReport verify_privacy(const NoiseTable& table, double epsilon, double tol = 1e-6) {
  PrivacyReport rep;
  for (long k = table.first_output() - 1; k <= table.last_output() + 1; ++k) {
    int hi = 0;
    int lo = 0;
    for (int i = 1; i < table.rows(); ++i) {
      if (table.output_mass(i, k) > table.output_mass(hi, k)) hi = i;
      if (table.output_mass(i, k) < table.output_mass(lo, k)) lo = i;
    }
    const double num = table.output_mass(hi, k);
    const double den = table.output_mass(lo, k);
    if (num <= 0.0) continue;
    const double ratio = den > 0.0 ? num / den : std::numeric_limits<double>::infinity();
    if (ratio > rep.max_ratio) {
      rep.max_ratio = ratio;
      rep.worst_output = k;
      rep.worst_numerator_row = hi;
      rep.worst_denominator_row = lo;
    }
  }
  const double bound = std::exp(epsilon);
  rep.passes = std::isinf(bound) || rep.max_ratio <= bound * (1.0 + tol);
  return rep;
}

inline constexpr double kTableTolerance = 1e-7;

/// Magnitude below which a solver value is rounding residue rather than mass.
inline constexpr double kResidueTolerance = 1e-12;

/// Solves the program and reshapes the optimum into a table. Entries in
/// [-1e-9, 0) are clipped to zero and residues up to 1e-12 dropped; the table
/// must then pass check_table at 1e-7 and verify_privacy. The pmf enters only
/// the objective, so a basis from any earlier solve on the same grid, shape
/// and budget is a valid warm start.
inline OptimizedNoise solve_noise_table(const QuantizedPmf& pmf, PrivacyBudget eps, const NoiseShape& shape,
                                        const QuantizedDomain& domain, const lp::SolveOptions& opts = {},
                                        std::span<const int> warm_basis = {}) {
  const lp::LinearProgram prog = build_lp(pmf, eps, shape, domain);
  lp::LpSolution sol = lp::solve(prog, opts, warm_basis);
  if (!sol.optimal()) {
    std::ostringstream msg;
    msg << "noise program " << lp::to_string(sol.status) << " after " << sol.iterations << " iterations (N="
        << domain.n_bins() << ", M=" << shape.m << ", r=" << shape.r << ", eps=" << eps.epsilon() << ", "
        << prog.num_vars() << " variables, " << prog.num_constraints() << " constraints)";
    throw Error(ErrorKind::lp_failure, msg.str());
  }
  const LpLayout layout{domain.n_edges(), shape.m};
  std::vector<double> q(sol.x.begin(), sol.x.begin() + layout.num_q());
  for (double& v : q) {
    if (v < -1e-9) throw Error(ErrorKind::lp_failure, "solver returned noise mass " + std::to_string(v));
    if (v <= kResidueTolerance) v = 0.0;
  }
  NoiseTable table(domain, shape, eps.epsilon(), std::move(q));
  const TableCheck check = check_table(table);
  require(check.passes(kTableTolerance), ErrorKind::lp_failure,
          "solved table violates invariants: normalization " + std::to_string(check.max_normalization_error) +
              ", mean " + std::to_string(check.max_mean_error));
  const PrivacyReport privacy = verify_privacy(table, eps.epsilon());
  require(privacy.passes, ErrorKind::lp_failure,
          "solved table exceeds the privacy bound: ratio " + std::to_string(privacy.max_ratio) + " at output " +
              std::to_string(privacy.worst_output));
  return {std::move(table), sol.objective_value, sol.iterations, std::move(sol.basis)};
}

/// Optimal basis for the uniform pmf: a fixed, data-independent warm start
/// for every solve sharing (domain, shape, eps).
inline std::vector<int> reference_basis(PrivacyBudget eps, const NoiseShape& shape, const QuantizedDomain& domain,
                                        const lp::SolveOptions& opts = {}) {
  return solve_noise_table(QuantizedPmf::uniform(static_cast<std::size_t>(domain.n_edges())), eps, shape, domain,
                           opts)
      .basis;
}

// ---------------------------------------------------------------------------
// Perturbation

/// Exact P(output index k | input x): the rounding-weighted mixture of the two
/// bracketing rows.
inline double output_probability(const NoiseTable& table, double x, long k) {
  const RoundingWeights rw = rounding_weights(table.domain(), x);
  double p = rw.w_left * table.output_mass(rw.left_index, k);
  if (rw.w_left < 1.0) p += rw.w_right() * table.output_mass(rw.left_index + 1, k);
  return p;
}

template <class Rng>
double aaa_perturb(const NoiseTable& table, double x, Rng& rng) {
  const QuantizedDomain& d = table.domain();
  const int i = round_randomized(d, x, rng);
  const long j = table.sample_noise(i, rng);
  return d.edge(i) + d.sigma() * static_cast<double>(j);
}

// ---------------------------------------------------------------------------
// Two-phase protocol

/// Stream coordinates used by the protocol and the experiment harness.
enum StreamTag : std::uint64_t {
  kSplitTag = 1,
  kPhase1Tag = 2,
  kPhase2Tag = 3,
  kBaselineTag = 16,
};

/// Client c joins phase 1 with probability s, decided on stream.fork({kSplitTag, c}).
inline std::vector<bool> split_clients(std::size_t n, double s, const Stream& stream) {
  std::vector<bool> phase1(n);
  for (std::size_t c = 0; c < n; ++c) {
    Stream client = stream.fork({kSplitTag, c});
    phase1[c] = bernoulli(client, s);
  }
  return phase1;
}

struct ProtocolResult {
  double mean_estimate = 0.0;
  QuantizedPmf phase1_pmf;
  NoiseTable noise_table;
  std::size_t phase1_count = 0;
  std::size_t phase2_count = 0;
  double lp_objective = 0.0;
  bool degenerate_reconstruction = false;
};

/// Runs both phases on an explicit split. phase1[c] selects client c for
/// distribution estimation; every other client perturbs with the table.
inline ProtocolResult run_protocol_split(std::span<const double> data, const std::vector<bool>& phase1,
                                         PrivacyBudget eps, const NoiseShape& shape, const QuantizedDomain& domain,
                                         const Stream& stream, const lp::SolveOptions& opts = {},
                                         std::span<const int> warm_basis = {}) {
  require(!data.empty(), ErrorKind::invalid_input, "protocol on empty data");
  require(phase1.size() == data.size(), ErrorKind::size_mismatch, "split mask size differs from data size");
  std::vector<double> first;
  std::vector<std::size_t> second;
  for (std::size_t c = 0; c < data.size(); ++c) {
    if (phase1[c]) first.push_back(data[c]);
    else second.push_back(c);
  }
  require(!first.empty() && !second.empty(), ErrorKind::degenerate_split,
          "split left " + std::to_string(first.size()) + " estimation and " + std::to_string(second.size()) +
              " perturbation clients");

  // Phase 1: client c reports on stream.fork({kPhase1Tag, c}).
  PerturbedHistogram hist{std::vector<std::uint64_t>(static_cast<std::size_t>(domain.n_edges()), 0), 0};
  for (std::size_t c = 0; c < data.size(); ++c) {
    if (!phase1[c]) continue;
    Stream client = stream.fork({kPhase1Tag, c});
    ++hist.counts[static_cast<std::size_t>(perturb_edge_index(domain, data[c], eps.epsilon(), client))];
    ++hist.total;
  }
  Reconstruction rec = reconstruct_pmf(hist, build_rr_matrix(domain.n_bins(), eps.epsilon()));

  OptimizedNoise noise = solve_noise_table(rec.pmf, eps, shape, domain, opts, warm_basis);

  double sum = 0.0;
  for (std::size_t c : second) {
    Stream client = stream.fork({kPhase2Tag, c});
    sum += aaa_perturb(noise.table, data[c], client);
  }
  return {sum / static_cast<double>(second.size()),
          std::move(rec.pmf),
          std::move(noise.table),
          first.size(),
          second.size(),
          noise.lp_objective,
          rec.degenerate};
}

inline ProtocolResult run_protocol(std::span<const double> data, PrivacyBudget eps, double split,
                                   const NoiseShape& shape, const QuantizedDomain& domain, const Stream& stream,
                                   const lp::SolveOptions& opts = {}, std::span<const int> warm_basis = {}) {
  require(split > 0.0 && split < 1.0, ErrorKind::invalid_parameter, "split ratio must lie in (0, 1)");
  return run_protocol_split(data, split_clients(data.size(), split, stream), eps, shape, domain, stream, opts,
                            warm_basis);
}

// ---------------------------------------------------------------------------
// Table files

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorKind::parse_error, what + ": not a number: '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

/// Header line `beta=.. N=.. M=.. r=.. eps=..`, then N+1 lines of 2M+1
/// masses. Values are written in shortest round-trip form.
inline void write_table(std::ostream& os, const NoiseTable& t) {
  os << "beta=" << detail::format_double(t.domain().beta()) << " N=" << t.domain().n_bins() << " M=" << t.m()
     << " r=" << detail::format_double(t.r()) << " eps=" << detail::format_double(t.epsilon()) << '\n';
  for (int i = 0; i < t.rows(); ++i) {
    for (int j = -t.m(); j <= t.m(); ++j) {
      if (j > -t.m()) os << ' ';
      os << detail::format_double(t.q(i, j));
    }
    os << '\n';
  }
}

inline NoiseTable read_table(std::istream& is) {
  std::string header;
  require(static_cast<bool>(std::getline(is, header)), ErrorKind::parse_error, "noise table: missing header");
  double beta = 0.0, r = 0.0, eps = 0.0;
  int n = -1, m = -1;
  std::istringstream hs(header);
  std::string tok;
  int seen = 0;
  while (hs >> tok) {
    const auto eq = tok.find('=');
    require(eq != std::string::npos, ErrorKind::parse_error, "noise table header: bad token '" + tok + "'");
    const std::string key = tok.substr(0, eq);
    const std::string_view val = std::string_view(tok).substr(eq + 1);
    if (key == "beta") beta = detail::parse_double(val, "beta");
    else if (key == "N") n = static_cast<int>(detail::parse_double(val, "N"));
    else if (key == "M") m = static_cast<int>(detail::parse_double(val, "M"));
    else if (key == "r") r = detail::parse_double(val, "r");
    else if (key == "eps") eps = detail::parse_double(val, "eps");
    else throw Error(ErrorKind::parse_error, "noise table header: unknown key '" + key + "'");
    ++seen;
  }
  require(seen == 5 && n >= 1 && m >= 1, ErrorKind::parse_error, "noise table header incomplete: '" + header + "'");
  QuantizedDomain domain(beta, n);
  const std::size_t width = 2 * static_cast<std::size_t>(m) + 1;
  std::vector<double> q;
  q.reserve(static_cast<std::size_t>(n + 1) * width);
  std::string line;
  for (int i = 0; i <= n; ++i) {
    require(static_cast<bool>(std::getline(is, line)), ErrorKind::parse_error,
            "noise table: missing row " + std::to_string(i));
    std::istringstream ls(line);
    std::size_t count = 0;
    while (ls >> tok) {
      q.push_back(detail::parse_double(tok, "noise table row " + std::to_string(i)));
      ++count;
    }
    require(count == width, ErrorKind::parse_error,
            "noise table row " + std::to_string(i) + " has " + std::to_string(count) + " entries, expected " +
                std::to_string(width));
  }
  return {domain, NoiseShape{m, r}, eps, std::move(q)};
}

}  // namespace aaa
