#pragma once

// Experiment harness behind the command-line tool: resolved configuration,
// dataset resolution, seeded trial loops and CSV writers.
//
// Run r uses the stream Stream(derive_key(seed + r, {})). Within a run the
// single-attribute pipeline uses its fork({0}); the multidimensional
// pipeline uses fork({j}) for attribute j, so d = 1 reproduces the
// single-attribute numbers. Every mechanism in a run sees the same split.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "aaa/analysis.hpp"
#include "aaa/baselines.hpp"
#include "aaa/data.hpp"
#include "aaa/domain.hpp"
#include "aaa/error.hpp"
#include "aaa/mechanism.hpp"
#include "aaa/multidim.hpp"
#include "aaa/rng.hpp"

namespace aaa {

/// Synthetic data draws from Stream(derive_key(seed, {kDataTag, column})).
inline constexpr std::uint64_t kDataTag = 32;

/// `kind:key=value,key=value`. Kinds: gaussian, exponential, bernoulli and
/// csv produce samples; tgauss, sexp, beta and point describe a true
/// distribution for the variance and optimize commands.
struct DatasetSpec {
  std::string kind = "gaussian";
  std::map<std::string, double> params;

  static DatasetSpec parse(std::string_view text);
  double get(const std::string& key, double fallback) const {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }
  std::string to_string() const;
};

namespace detail {

inline std::string fmt(double v) { return format_double(v); }

template <class T, class F>
std::string join(const std::vector<T>& xs, F&& f, char sep = ';') {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += f(xs[i]);
  }
  return out;
}

}  // namespace detail

inline DatasetSpec DatasetSpec::parse(std::string_view text) {
  DatasetSpec spec;
  spec.params.clear();
  const auto colon = text.find(':');
  spec.kind = std::string(detail::trim(text.substr(0, colon)));
  static const std::vector<std::string> kinds{"gaussian", "exponential", "bernoulli", "csv",
                                              "tgauss",   "sexp",        "beta",      "point"};
  if (std::find(kinds.begin(), kinds.end(), spec.kind) == kinds.end()) {
    throw Error(ErrorKind::invalid_parameter, "unknown dataset kind '" + spec.kind + "'");
  }
  if (colon == std::string_view::npos) return spec;
  for (std::string_view item : detail::split_fields(text.substr(colon + 1))) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::parse_error, "dataset parameter '" + std::string(item) + "' is not key=value");
    }
    const auto value = detail::parse_number(detail::trim(item.substr(eq + 1)));
    if (!value) throw Error(ErrorKind::parse_error, "dataset parameter '" + std::string(item) + "' is not numeric");
    spec.params[std::string(detail::trim(item.substr(0, eq)))] = *value;
  }
  return spec;
}

inline std::string DatasetSpec::to_string() const {
  std::string out = kind;
  char sep = ':';
  for (const auto& [k, v] : params) {
    out += sep;
    out += k + "=" + detail::fmt(v);
    sep = ',';
  }
  return out;
}

struct ExperimentConfig {
  std::vector<Mechanism> mechanisms{kAllMechanisms.begin(), kAllMechanisms.end()};
  std::vector<double> eps{0.5, 1.0, 2.0, 4.0};
  double beta = 1.0;
  int bins = 16;
  std::optional<int> noise_window;  // M; 4N when unset
  double tail_ratio = 0.5;
  double split = 0.1;
  DatasetSpec dataset;
  std::string csv_path;
  std::vector<int> columns{0};
  int runs = 10;
  std::uint64_t seed = 1;
  int dims = 1;  // multidim: attributes d
  int k = 1;     // multidim: attributes reported per client
  unsigned threads = 1;

  int window() const { return noise_window.value_or(4 * bins); }
  NoiseShape shape() const { return {window(), tail_ratio}; }
  QuantizedDomain domain() const { return {beta, bins}; }

  void validate() const {
    require(!mechanisms.empty(), ErrorKind::invalid_parameter, "no mechanisms selected");
    require(!eps.empty(), ErrorKind::invalid_parameter, "empty eps grid");
    for (double e : eps) {
      require(e > 0.0 && !std::isnan(e), ErrorKind::invalid_parameter, "eps values must be positive");
    }
    require(beta > 0.0 && std::isfinite(beta), ErrorKind::invalid_parameter, "beta must be positive");
    require(bins >= 1, ErrorKind::invalid_parameter, "bins must be at least 1");
    validate_shape(shape(), domain());
    require(split > 0.0 && split < 1.0, ErrorKind::invalid_parameter, "split must lie in (0, 1)");
    require(runs >= 1, ErrorKind::invalid_parameter, "runs must be at least 1");
    require(dims >= 1 && k >= 1 && k <= dims, ErrorKind::invalid_parameter, "need 1 <= k <= d");
    require(threads >= 1, ErrorKind::invalid_parameter, "threads must be at least 1");
  }

  /// One comment line with every setting that affects the output.
  std::string describe(std::string_view command) const {
    std::ostringstream os;
    os << "# command=" << command
       << " mechanisms=" << detail::join(mechanisms, [](Mechanism m) { return std::string(aaa::to_string(m)); })
       << " eps=" << detail::join(eps, [](double e) { return detail::fmt(e); }) << " beta=" << detail::fmt(beta)
       << " bins=" << bins << " noise_window=" << window() << " tail_ratio=" << detail::fmt(tail_ratio)
       << " split=" << detail::fmt(split) << " dataset=" << dataset.to_string();
    if (dataset.kind == "csv") {
      os << " csv=" << csv_path << " columns=" << detail::join(columns, [](int c) { return std::to_string(c); });
    }
    os << " runs=" << runs << " seed=" << seed;
    if (command == "multidim") os << " d=" << dims << " k=" << k;
    return os.str();
  }
};

// ---------------------------------------------------------------------------
// Dataset resolution

namespace detail {

inline Dataset synthetic_column(const ExperimentConfig& cfg, std::uint64_t column) {
  const DatasetSpec& s = cfg.dataset;
  const Stream rng(derive_key(cfg.seed, {kDataTag, column}));
  const double n_real = s.get("n", 10000);
  require(n_real >= 1 && n_real == std::floor(n_real), ErrorKind::invalid_parameter, "dataset n must be a positive integer");
  const auto n = static_cast<std::size_t>(n_real);
  if (s.kind == "gaussian") {
    return gen_gaussian_clipped(n, s.get("mean", 0.0), s.get("sd", 1.0), s.get("lo", -5.0), s.get("hi", 5.0), rng);
  }
  if (s.kind == "exponential") return gen_exponential_clipped(n, s.get("rate", 1.0), s.get("hi", 5.0), rng);
  if (s.kind == "bernoulli") return gen_bernoulli(n, s.get("p", 0.5), rng);
  throw Error(ErrorKind::invalid_parameter, "dataset kind '" + s.kind + "' does not produce samples");
}

}  // namespace detail

/// The single-attribute dataset, rescaled onto [-beta, beta].
inline Dataset resolve_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.kind == "csv") {
    require(!cfg.csv_path.empty(), ErrorKind::invalid_parameter, "csv dataset needs a path");
    return rescale_dataset(load_csv(cfg.csv_path, cfg.columns.at(0)), cfg.beta);
  }
  return rescale_dataset(detail::synthetic_column(cfg, 0), cfg.beta);
}

/// d attributes, each rescaled independently onto [-beta, beta].
inline MultiDataset resolve_multi_dataset(const ExperimentConfig& cfg) {
  std::vector<std::vector<double>> cols;
  if (cfg.dataset.kind == "csv") {
    require(!cfg.csv_path.empty(), ErrorKind::invalid_parameter, "csv dataset needs a path");
    require(static_cast<int>(cfg.columns.size()) == cfg.dims, ErrorKind::size_mismatch,
            "csv needs one column index per attribute");
    const auto rows = load_csv_columns(cfg.csv_path, cfg.columns);
    for (int j = 0; j < cfg.dims; ++j) {
      Dataset ds{{}, "csv", 0.0, 0.0, std::nullopt};
      for (const auto& r : rows) ds.values.push_back(r[static_cast<std::size_t>(j)]);
      const auto [lo, hi] = std::minmax_element(ds.values.begin(), ds.values.end());
      ds.lo = *lo;
      ds.hi = *hi;
      cols.push_back(rescale_dataset(ds, cfg.beta).values);
    }
  } else {
    for (int j = 0; j < cfg.dims; ++j) {
      cols.push_back(rescale_dataset(detail::synthetic_column(cfg, static_cast<std::uint64_t>(j)), cfg.beta).values);
    }
  }
  std::vector<std::vector<double>> rows(cols.front().size(), std::vector<double>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (std::size_t c = 0; c < rows.size(); ++c) rows[c][j] = cols[j][c];
  }
  return {std::move(rows), std::vector<double>(cols.size(), cfg.beta)};
}

/// Quantized true pmf for the variance and optimize commands.
inline QuantizedPmf resolve_pmf(const ExperimentConfig& cfg) {
  const DatasetSpec& s = cfg.dataset;
  const QuantizedDomain domain = cfg.domain();
  if (s.kind == "tgauss") return true_pmf(TruncatedGaussian{s.get("mean", 0.0), s.get("sd", 0.1)}, domain);
  if (s.kind == "sexp") return true_pmf(ShiftedExponential{s.get("rate", 6.0)}, domain);
  if (s.kind == "beta") return true_pmf(BetaDensity{s.get("a", 0.5), s.get("b", 0.5)}, domain);
  if (s.kind == "point") {
    const std::vector<double> x{s.get("x", 0.0)};
    return empirical_quantized_pmf(domain, x);
  }
  throw Error(ErrorKind::invalid_parameter, "dataset kind '" + s.kind + "' is not a distribution (use tgauss, sexp, beta or point)");
}

// ---------------------------------------------------------------------------
// Trials

template <class Rng>
double baseline_perturb(Mechanism m, double x, double beta, PrivacyBudget eps, Rng& rng) {
  switch (m) {
    case Mechanism::laplace: return laplace_perturb(x, beta, eps, rng);
    case Mechanism::duchi: return duchi_perturb(x, beta, eps, rng);
    case Mechanism::piecewise: return piecewise_perturb_scaled(x, beta, eps, rng);
    case Mechanism::hybrid: return hybrid_perturb(x, beta, eps, rng);
    case Mechanism::aaa: break;
  }
  throw Error(ErrorKind::invalid_parameter, "aaa is not a baseline");
}

/// Squared error of every configured mechanism for one attribute in one run.
/// AAA runs both phases; baselines perturb the same phase-2 clients, client c
/// drawing from stream.fork({kBaselineTag, mechanism, c}).
inline std::vector<double> attribute_errors(std::span<const double> values, double truth, const ExperimentConfig& cfg,
                                            PrivacyBudget eps, const QuantizedDomain& domain, const Stream& stream,
                                            std::span<const int> warm_basis) {
  const std::vector<bool> phase1 = split_clients(values.size(), cfg.split, stream);
  std::vector<double> errors;
  for (Mechanism m : cfg.mechanisms) {
    double estimate = 0.0;
    if (m == Mechanism::aaa) {
      estimate = run_protocol_split(values, phase1, eps, cfg.shape(), domain, stream, {}, warm_basis).mean_estimate;
    } else {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t c = 0; c < values.size(); ++c) {
        if (phase1[c]) continue;
        Stream client = stream.fork({kBaselineTag, static_cast<std::uint64_t>(m), c});
        sum += baseline_perturb(m, values[c], domain.beta(), eps, client);
        ++count;
      }
      require(count > 0, ErrorKind::degenerate_split, "split left no perturbation clients");
      estimate = sum / static_cast<double>(count);
    }
    errors.push_back(squared_error(estimate, truth));
  }
  return errors;
}

/// errors[e][m][r]: squared error at eps index e, mechanism index m, run r.
using TrialErrors = std::vector<std::vector<std::vector<double>>>;

namespace detail {

inline Stream run_stream(const ExperimentConfig& cfg, int run) {
  return Stream(derive_key(cfg.seed + static_cast<std::uint64_t>(run), {}));
}

/// Calls body(run) for every run, spread over cfg.threads workers. Each run
/// writes only its own slot, so the result does not depend on scheduling.
template <class Body>
void for_each_run(const ExperimentConfig& cfg, Body&& body) {
  const unsigned workers = std::min<unsigned>(cfg.threads, static_cast<unsigned>(cfg.runs));
  if (workers <= 1) {
    for (int r = 0; r < cfg.runs; ++r) body(r);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> failures(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int r = static_cast<int>(w); r < cfg.runs; r += static_cast<int>(workers)) body(r);
      } catch (...) {
        failures[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
}

inline bool uses_aaa(const ExperimentConfig& cfg) {
  return std::find(cfg.mechanisms.begin(), cfg.mechanisms.end(), Mechanism::aaa) != cfg.mechanisms.end();
}

}  // namespace detail

inline TrialErrors estimate_trials(const ExperimentConfig& cfg, const Dataset& data) {
  cfg.validate();
  const QuantizedDomain domain = cfg.domain();
  const double truth = mean_of(data.values);
  TrialErrors out;
  for (double e : cfg.eps) {
    const PrivacyBudget eps(e);
    const std::vector<int> warm = detail::uses_aaa(cfg) ? reference_basis(eps, cfg.shape(), domain) : std::vector<int>{};
    std::vector<std::vector<double>> per_run(static_cast<std::size_t>(cfg.runs));
    detail::for_each_run(cfg, [&](int r) {
      per_run[static_cast<std::size_t>(r)] =
          attribute_errors(data.values, truth, cfg, eps, domain, detail::run_stream(cfg, r).fork({0}), warm);
    });
    std::vector<std::vector<double>> by_mech(cfg.mechanisms.size(), std::vector<double>(per_run.size()));
    for (std::size_t r = 0; r < per_run.size(); ++r) {
      for (std::size_t m = 0; m < cfg.mechanisms.size(); ++m) by_mech[m][r] = per_run[r][m];
    }
    out.push_back(std::move(by_mech));
  }
  return out;
}

/// Sum over attributes of the squared error, per eps, mechanism and run.
inline TrialErrors multidim_trials(const ExperimentConfig& cfg, const MultiDataset& data) {
  cfg.validate();
  std::vector<double> truths;
  for (int j = 0; j < data.dims(); ++j) truths.push_back(mean_of(data.column(j)));
  TrialErrors out;
  for (double e : cfg.eps) {
    const PrivacyBudget eps(e);
    const std::vector<int> warm =
        detail::uses_aaa(cfg) ? reference_basis(eps, cfg.shape(), cfg.domain()) : std::vector<int>{};
    std::vector<std::vector<double>> per_run(static_cast<std::size_t>(cfg.runs));
    detail::for_each_run(cfg, [&](int r) {
      const Stream run = detail::run_stream(cfg, r);
      const auto by = clients_by_attribute(assign_attributes(data.size(), data.dims(), cfg.k, run), data.dims());
      std::vector<double> sums(cfg.mechanisms.size(), 0.0);
      for (int j = 0; j < data.dims(); ++j) {
        const auto& members = by[static_cast<std::size_t>(j)];
        if (members.size() < 2) {
          throw Error(ErrorKind::degenerate_dimension,
                      "attribute " + std::to_string(j) + " was drawn by fewer than 2 clients");
        }
        std::vector<double> values;
        values.reserve(members.size());
        for (std::size_t c : members) values.push_back(data.value(c, j));
        const QuantizedDomain domain(data.beta(j), cfg.bins);
        const auto errs = attribute_errors(values, truths[static_cast<std::size_t>(j)], cfg, eps, domain,
                                           run.fork({static_cast<std::uint64_t>(j)}), warm);
        for (std::size_t m = 0; m < sums.size(); ++m) sums[m] += errs[m];
      }
      per_run[static_cast<std::size_t>(r)] = std::move(sums);
    });
    std::vector<std::vector<double>> by_mech(cfg.mechanisms.size(), std::vector<double>(per_run.size()));
    for (std::size_t r = 0; r < per_run.size(); ++r) {
      for (std::size_t m = 0; m < cfg.mechanisms.size(); ++m) by_mech[m][r] = per_run[r][m];
    }
    out.push_back(std::move(by_mech));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands. Each writes a config comment line, a header row and data rows.

inline void cmd_variance(const ExperimentConfig& cfg, std::ostream& os) {
  cfg.validate();
  const QuantizedPmf pmf = resolve_pmf(cfg);
  const QuantizedDomain domain = cfg.domain();
  os << cfg.describe("variance") << "\nmechanism,eps,expected_variance\n";
  for (double e : cfg.eps) {
    const PrivacyBudget eps(e);
    for (Mechanism m : cfg.mechanisms) {
      const double v = m == Mechanism::aaa ? solve_noise_table(pmf, eps, cfg.shape(), domain).lp_objective
                                           : baseline_expected_variance(m, pmf, eps, domain);
      os << to_string(m) << ',' << detail::fmt(e) << ',' << detail::fmt(v) << '\n';
    }
  }
}

inline void write_mse_rows(const ExperimentConfig& cfg, const TrialErrors& errors, std::ostream& os,
                           const std::string& suffix) {
  for (std::size_t e = 0; e < cfg.eps.size(); ++e) {
    for (std::size_t m = 0; m < cfg.mechanisms.size(); ++m) {
      double total = 0.0;
      for (double x : errors[e][m]) total += x;
      os << to_string(cfg.mechanisms[m]) << ',' << detail::fmt(cfg.eps[e]) << ','
         << detail::fmt(total / static_cast<double>(cfg.runs)) << suffix << '\n';
    }
  }
}

inline void cmd_estimate(const ExperimentConfig& cfg, std::ostream& os) {
  cfg.validate();
  const Dataset data = resolve_dataset(cfg);
  const TrialErrors errors = estimate_trials(cfg, data);
  os << cfg.describe("estimate") << "\nmechanism,eps,mse,runs,seed\n";
  write_mse_rows(cfg, errors, os, "," + std::to_string(cfg.runs) + "," + std::to_string(cfg.seed));
}

inline void cmd_multidim(const ExperimentConfig& cfg, std::ostream& os) {
  cfg.validate();
  const MultiDataset data = resolve_multi_dataset(cfg);
  const TrialErrors errors = multidim_trials(cfg, data);
  os << cfg.describe("multidim") << "\nmechanism,eps,sum_mse,d,k,runs,seed\n";
  write_mse_rows(cfg, errors, os,
                 "," + std::to_string(cfg.dims) + "," + std::to_string(cfg.k) + "," + std::to_string(cfg.runs) + "," +
                     std::to_string(cfg.seed));
}

enum class SweepParameter { split, bin_size, noise_range };

inline SweepParameter parse_sweep_parameter(std::string_view name) {
  if (name == "s") return SweepParameter::split;
  if (name == "bin_size") return SweepParameter::bin_size;
  if (name == "noise_range") return SweepParameter::noise_range;
  throw Error(ErrorKind::invalid_parameter, "unknown sweep parameter '" + std::string(name) +
                                                "' (expected s, bin_size or noise_range)");
}

/// Config with one sweep value applied. A bin size must divide 2 beta; a
/// noise range q sets M = q N / 2.
inline ExperimentConfig apply_sweep_value(ExperimentConfig cfg, SweepParameter p, double value) {
  switch (p) {
    case SweepParameter::split: cfg.split = value; break;
    case SweepParameter::bin_size: {
      require(value > 0.0, ErrorKind::invalid_parameter, "bin size must be positive");
      const double n = 2.0 * cfg.beta / value;
      const double rounded = std::round(n);
      require(rounded >= 1.0 && std::abs(n - rounded) <= 1e-9 * n, ErrorKind::invalid_parameter,
              "bin size " + detail::fmt(value) + " does not divide 2 beta");
      cfg.bins = static_cast<int>(rounded);
      break;
    }
    case SweepParameter::noise_range:
      cfg.noise_window = NoiseShape::from_range_ratio(value, cfg.bins, cfg.tail_ratio).m;
      break;
  }
  return cfg;
}

/// One estimate block per grid value, in grid order.
inline void cmd_sweep(const ExperimentConfig& cfg, SweepParameter p, const std::vector<double>& grid,
                      std::ostream& os) {
  require(!grid.empty(), ErrorKind::invalid_parameter, "empty sweep grid");
  for (double v : grid) cmd_estimate(apply_sweep_value(cfg, p, v), os);
}

/// Solves the table for the configured distribution at the single eps,
/// writes it to `table_out` and a key=value summary to `summary`.
inline void cmd_optimize(const ExperimentConfig& cfg, std::ostream& table_out, std::ostream& summary) {
  cfg.validate();
  require(cfg.eps.size() == 1, ErrorKind::invalid_parameter, "optimize takes exactly one eps value");
  const PrivacyBudget eps(cfg.eps.front());
  const QuantizedPmf pmf = resolve_pmf(cfg);
  const OptimizedNoise noise = solve_noise_table(pmf, eps, cfg.shape(), cfg.domain());
  write_table(table_out, noise.table);
  const PrivacyReport privacy = verify_privacy(noise.table, eps.epsilon());
  const TableCheck check = check_table(noise.table);
  summary << cfg.describe("optimize") << '\n'
          << "lp_objective=" << detail::fmt(noise.lp_objective) << '\n'
          << "lp_iterations=" << noise.lp_iterations << '\n'
          << "max_ratio=" << detail::fmt(privacy.max_ratio) << '\n'
          << "exp_eps=" << detail::fmt(eps.exp_eps()) << '\n'
          << "privacy=" << (privacy.passes ? "pass" : "fail") << '\n'
          << "max_normalization_error=" << detail::fmt(check.max_normalization_error) << '\n'
          << "max_mean_error=" << detail::fmt(check.max_mean_error) << '\n';
}

}  // namespace aaa
