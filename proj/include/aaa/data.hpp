#pragma once

// Datasets: clipped synthetic generators, exact quantized pmfs of truncated
// reference densities, and CSV ingestion.

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include "aaa/domain.hpp"
#include "aaa/error.hpp"
#include "aaa/rng.hpp"

namespace aaa {

struct Dataset {
  std::vector<double> values;
  std::string provenance;
  double lo = 0.0;  // range used when rescaling: clip bounds, or data min/max
  double hi = 0.0;
  std::optional<double> beta_after_rescale;
};

/// Maps [ds.lo, ds.hi] linearly onto [-beta, beta]. A degenerate range maps
/// every value to 0.
inline Dataset rescale_dataset(const Dataset& ds, double beta) {
  require(beta > 0.0 && std::isfinite(beta), ErrorKind::invalid_parameter, "rescale half-width must be positive");
  require(!ds.values.empty(), ErrorKind::invalid_input, "rescale of an empty dataset");
  Dataset out{{}, ds.provenance, -beta, beta, beta};
  out.values.reserve(ds.values.size());
  const double width = ds.hi - ds.lo;
  for (double x : ds.values) {
    const double y = width > 0.0 ? -beta + 2.0 * beta * (x - ds.lo) / width : 0.0;
    out.values.push_back(std::clamp(y, -beta, beta));
  }
  return out;
}

inline double mean_of(std::span<const double> values) {
  require(!values.empty(), ErrorKind::invalid_input, "mean of no values");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

// ---------------------------------------------------------------------------
// Synthetic generators. Out-of-range draws are clamped, never redrawn.

inline Dataset gen_gaussian_clipped(std::size_t n, double mean, double stddev, double clip_lo, double clip_hi,
                                    const Stream& stream) {
  require(n >= 1, ErrorKind::invalid_parameter, "dataset size must be positive");
  require(stddev >= 0.0 && std::isfinite(stddev) && std::isfinite(mean), ErrorKind::invalid_parameter,
          "gaussian needs a finite mean and a nonnegative standard deviation");
  require(clip_lo <= clip_hi, ErrorKind::invalid_parameter, "clip range is empty");
  Stream rng = stream;
  Dataset ds{{}, "gaussian(mean=" + std::to_string(mean) + ",sd=" + std::to_string(stddev) + ")", clip_lo, clip_hi,
             std::nullopt};
  ds.values.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ds.values.push_back(std::clamp(mean + stddev * standard_normal(rng), clip_lo, clip_hi));
  return ds;
}

inline Dataset gen_exponential_clipped(std::size_t n, double rate, double clip_hi, const Stream& stream) {
  require(n >= 1, ErrorKind::invalid_parameter, "dataset size must be positive");
  require(rate > 0.0, ErrorKind::invalid_parameter, "exponential rate must be positive");
  require(clip_hi >= 0.0, ErrorKind::invalid_parameter, "exponential clip bound must be nonnegative");
  Stream rng = stream;
  Dataset ds{{}, "exponential(rate=" + std::to_string(rate) + ")", 0.0, clip_hi, std::nullopt};
  ds.values.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ds.values.push_back(std::min(-std::log(uniform_open01(rng)) / rate, clip_hi));
  return ds;
}

inline Dataset gen_bernoulli(std::size_t n, double p, const Stream& stream) {
  require(n >= 1, ErrorKind::invalid_parameter, "dataset size must be positive");
  require(p >= 0.0 && p <= 1.0, ErrorKind::invalid_parameter, "bernoulli p must lie in [0, 1]");
  Stream rng = stream;
  Dataset ds{{}, "bernoulli(p=" + std::to_string(p) + ")", 0.0, 1.0, std::nullopt};
  ds.values.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ds.values.push_back(bernoulli(rng, p) ? 1.0 : 0.0);
  return ds;
}

// ---------------------------------------------------------------------------
// Reference densities, truncated to the domain and renormalized.

struct TruncatedGaussian {
  double mean;
  double stddev;
};

/// f(x) proportional to rate * exp(-rate (x + beta)) on [-beta, beta].
struct ShiftedExponential {
  double rate;
};

/// (x + beta) / (2 beta) ~ Beta(a, b).
struct BetaDensity {
  double a;
  double b;
};

using ReferenceDensity = std::variant<TruncatedGaussian, ShiftedExponential, BetaDensity>;

namespace detail {

/// Untruncated CDF F(x) and partial first moment G(x) = integral of t f(t) up to x.
struct CdfMoment {
  double cdf;
  double moment;
};

inline CdfMoment cdf_moment(const TruncatedGaussian& g, double x, double /*beta*/) {
  const double z = (x - g.mean) / g.stddev;
  const double phi_cdf = 0.5 * boost::math::erfc(-z / std::sqrt(2.0));
  const double phi_pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  return {phi_cdf, g.mean * phi_cdf - g.stddev * phi_pdf};
}

inline CdfMoment cdf_moment(const ShiftedExponential& e, double x, double beta) {
  const double u = x + beta;
  const double lu = e.rate * u;
  const double cdf = -std::expm1(-lu);
  // integral_0^u v rate e^{-rate v} dv, then shift by -beta.
  const double first = (cdf - lu * std::exp(-lu)) / e.rate;
  return {cdf, first - beta * cdf};
}

inline CdfMoment cdf_moment(const BetaDensity& b, double x, double beta) {
  const double y = std::clamp((x + beta) / (2.0 * beta), 0.0, 1.0);
  const double cdf = boost::math::ibeta(b.a, b.b, y);
  // E[Y; Y <= y] = a / (a + b) * I_y(a + 1, b).
  const double partial = b.a / (b.a + b.b) * boost::math::ibeta(b.a + 1.0, b.b, y);
  return {cdf, -beta * cdf + 2.0 * beta * partial};
}

inline void validate_density(const ReferenceDensity& d) {
  if (const auto* g = std::get_if<TruncatedGaussian>(&d)) {
    require(std::isfinite(g->mean) && g->stddev > 0.0 && std::isfinite(g->stddev), ErrorKind::invalid_parameter,
            "truncated gaussian needs a finite mean and positive standard deviation");
  } else if (const auto* e = std::get_if<ShiftedExponential>(&d)) {
    require(e->rate > 0.0 && std::isfinite(e->rate), ErrorKind::invalid_parameter,
            "exponential rate must be positive");
  } else {
    const auto& b = std::get<BetaDensity>(d);
    require(b.a > 0.0 && b.b > 0.0 && std::isfinite(b.a) && std::isfinite(b.b), ErrorKind::invalid_parameter,
            "beta shape parameters must be positive");
  }
}

}  // namespace detail

/// Exact expected-rounding pmf of a density truncated to [-beta, beta]:
/// masses[i] = E[w_i(X)], with each tent segment integrated in closed form.
inline QuantizedPmf true_pmf(const ReferenceDensity& density, const QuantizedDomain& domain) {
  detail::validate_density(density);
  const double beta = domain.beta();
  const double sigma = domain.sigma();
  std::vector<detail::CdfMoment> at(static_cast<std::size_t>(domain.n_edges()));
  for (int i = 0; i < domain.n_edges(); ++i) {
    at[static_cast<std::size_t>(i)] =
        std::visit([&](const auto& d) { return detail::cdf_moment(d, domain.edge(i), beta); }, density);
  }
  const double total = at.back().cdf - at.front().cdf;
  require(total > 0.0 && std::isfinite(total), ErrorKind::invalid_parameter,
          "density has no mass on [-beta, beta]");

  std::vector<double> masses(at.size(), 0.0);
  for (int i = 0; i < domain.n_bins(); ++i) {
    const double a = domain.edge(i);
    const double b = domain.edge(i + 1);
    const double mass = at[i + 1].cdf - at[i].cdf;
    const double moment = at[i + 1].moment - at[i].moment;
    // Left edge weight (b - x) / sigma, right edge weight (x - a) / sigma.
    masses[i] += std::max(0.0, (b * mass - moment) / sigma);
    masses[i + 1] += std::max(0.0, (moment - a * mass) / sigma);
  }
  for (double& m : masses) m /= total;
  return QuantizedPmf::normalized(std::move(masses));
}

// ---------------------------------------------------------------------------
// CSV input: comma-separated, optional single header row.

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_number(std::string_view field) {
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

}  // namespace detail

/// Reads the given zero-based columns of every data row. The first non-blank
/// line is a header when any selected field fails to parse; later failures
/// are errors citing the line number. Blank lines are skipped.
inline std::vector<std::vector<double>> load_csv_columns(const std::string& path, const std::vector<int>& columns) {
  require(!columns.empty(), ErrorKind::invalid_parameter, "no columns selected");
  for (int c : columns) require(c >= 0, ErrorKind::invalid_parameter, "column index must be nonnegative");
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open '" + path + "'");

  std::vector<std::vector<double>> rows;
  std::string line;
  long line_no = 0;
  bool seen_first = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line);
    std::vector<double> row;
    row.reserve(columns.size());
    std::string problem;
    for (int c : columns) {
      if (static_cast<std::size_t>(c) >= fields.size()) {
        problem = "has no column " + std::to_string(c);
        break;
      }
      const auto v = detail::parse_number(fields[static_cast<std::size_t>(c)]);
      if (!v) {
        problem = "column " + std::to_string(c) + " is not a number: '" + std::string(fields[static_cast<std::size_t>(c)]) + "'";
        break;
      }
      row.push_back(*v);
    }
    const bool header = !seen_first && !problem.empty();
    seen_first = true;
    if (header) continue;
    if (!problem.empty()) throw Error(ErrorKind::parse_error, path + ":" + std::to_string(line_no) + ": " + problem);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::invalid_input, "'" + path + "' has no data rows");
  return rows;
}

/// One numeric column as a dataset whose rescale range is the data min/max.
inline Dataset load_csv(const std::string& path, int column) {
  const auto rows = load_csv_columns(path, {column});
  Dataset ds{{}, "csv(" + path + ",column=" + std::to_string(column) + ")", 0.0, 0.0, std::nullopt};
  ds.values.reserve(rows.size());
  for (const auto& r : rows) ds.values.push_back(r.front());
  const auto [lo, hi] = std::minmax_element(ds.values.begin(), ds.values.end());
  ds.lo = *lo;
  ds.hi = *hi;
  return ds;
}

}  // namespace aaa
