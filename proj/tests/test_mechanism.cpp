#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include "aaa/analysis.hpp"
#include "aaa/data.hpp"
#include "aaa/mechanism.hpp"
#include "oracles.hpp"

using namespace aaa;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

struct Case {
  std::string name;
  QuantizedPmf pmf;
  double eps;
};

// Solved tables on N = 8, M = 4N, r = 0.5, shared by the property tests.
const QuantizedDomain kDomain(1.0, 8);
const NoiseShape kShape{32, 0.5};

std::vector<QuantizedPmf> suite_pmfs() {
  std::vector<double> point(9, 0.0);
  point[4] = 1.0;
  return {QuantizedPmf::uniform(9), true_pmf(TruncatedGaussian{0.0, 0.1}, kDomain),
          true_pmf(ShiftedExponential{6.0}, kDomain), true_pmf(BetaDensity{0.5, 0.5}, kDomain),
          QuantizedPmf(point)};
}

const std::vector<std::pair<Case, OptimizedNoise>>& solved_suite() {
  static const auto suite = [] {
    std::vector<std::pair<Case, OptimizedNoise>> out;
    const auto pmfs = suite_pmfs();
    const char* names[] = {"uniform", "tgauss", "sexp", "beta", "point"};
    for (double e : {0.5, 1.0, 2.0, 4.0}) {
      const auto warm = reference_basis(PrivacyBudget(e), kShape, kDomain);
      for (std::size_t p = 0; p < pmfs.size(); ++p) {
        out.emplace_back(Case{names[p], pmfs[p], e},
                         solve_noise_table(pmfs[p], PrivacyBudget(e), kShape, kDomain, {}, warm));
      }
    }
    return out;
  }();
  return suite;
}

/// Two-sided geometric noise with ratio a on every row: the discrete Laplace
/// reference whose worst ratio is a^(-N).
NoiseTable geometric_table(const QuantizedDomain& d, int m, double a) {
  const int width = 2 * m + 1;
  std::vector<double> q(static_cast<std::size_t>(d.n_edges()) * width);
  const double c = (1.0 - a) / (1.0 + a);
  for (int i = 0; i < d.n_edges(); ++i) {
    for (int j = -m; j <= m; ++j) q[static_cast<std::size_t>(i) * width + (j + m)] = c * std::pow(a, std::abs(j));
  }
  return {d, NoiseShape{m, a}, 0.0, std::move(q)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Tails

TEST(TailMoments, HandValues) {
  EXPECT_DOUBLE_EQ(tail_second_moment(5, 0.0), 25.0);
  EXPECT_NEAR(tail_second_moment(1, 0.5), 12.0, 1e-12);
  EXPECT_NEAR(tail_second_moment(3, 0.5), 36.0, 1e-12);
  EXPECT_DOUBLE_EQ(tail_first_moment(5, 0.0), 5.0);
  EXPECT_NEAR(tail_first_moment(1, 0.5), 4.0, 1e-12);
  EXPECT_NEAR(tail_first_moment(2, 0.5), 6.0, 1e-12);
}

TEST(TailMoments, MatchTruncatedSums) {
  for (int m = 1; m <= 64; ++m) {
    for (double r : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const double t1 = oracle::truncated_tail_sum(m, r, 1);
      const double t2 = oracle::truncated_tail_sum(m, r, 2);
      EXPECT_NEAR(tail_first_moment(m, r) / t1, 1.0, 1e-9) << m << ' ' << r;
      EXPECT_NEAR(tail_second_moment(m, r) / t2, 1.0, 1e-9) << m << ' ' << r;
    }
  }
}

TEST(TailMoments, DivergentAndInvalid) {
  try {
    tail_second_moment(3, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::divergent_series);
  }
  EXPECT_THROW(tail_first_moment(0, 0.5), Error);
  EXPECT_THROW(tail_first_moment(2, -0.1), Error);
}

// ---------------------------------------------------------------------------
// Table basics

TEST(NoiseTableType, NoiseMassAndTails) {
  const QuantizedDomain d(1.0, 2);
  const auto t = geometric_table(d, 4, 0.5);
  EXPECT_DOUBLE_EQ(t.noise_mass(1, 6), t.q(1, 4) * 0.25);
  EXPECT_DOUBLE_EQ(t.noise_mass(1, -4), t.q(1, -4));
  EXPECT_DOUBLE_EQ(t.noise_mass(1, -7), t.q(1, -4) * 0.125);
  double total = 0.0;
  for (long j = -40; j <= 40; ++j) total += t.noise_mass(0, j);
  EXPECT_NEAR(total, 1.0, std::pow(0.5, 36) / 0.5);
  const auto z = NoiseTable::zero_noise(d, NoiseShape{4, 0.5}, 1.0);
  EXPECT_EQ(z.noise_mass(2, 0), 1.0);
  EXPECT_EQ(z.noise_mass(2, 1), 0.0);
}

TEST(NoiseTableType, ShapeValidation) {
  const QuantizedDomain d(1.0, 4);
  EXPECT_THROW(NoiseTable::zero_noise(d, NoiseShape{3, 0.5}, 1.0), Error);
  EXPECT_THROW(NoiseTable::zero_noise(d, NoiseShape{4, 1.0}, 1.0), Error);
  EXPECT_THROW(NoiseTable(d, NoiseShape{4, 0.5}, 1.0, std::vector<double>(3, 0.0)), Error);
  EXPECT_EQ(NoiseShape::from_range_ratio(4.0, 16, 0.5).m, 32);
  EXPECT_DOUBLE_EQ((NoiseShape{32, 0.5}.range_ratio(16)), 4.0);
}

TEST(NoiseTableType, GeometricTableInvariants) {
  const auto t = geometric_table(QuantizedDomain(1.0, 4), 8, 0.6);
  const auto c = check_table(t);
  EXPECT_LT(c.max_normalization_error, 1e-14);
  EXPECT_LT(c.max_mean_error, 1e-13);
}

// ---------------------------------------------------------------------------
// Privacy verifier

TEST(VerifyPrivacy, ZeroNoiseHasDisjointSupport) {
  const auto z = NoiseTable::zero_noise(QuantizedDomain(1.0, 4), NoiseShape{4, 0.5}, 1.0);
  const auto rep = verify_privacy(z, 1.0);
  EXPECT_EQ(rep.max_ratio, kInf);
  EXPECT_FALSE(rep.passes);
  EXPECT_TRUE(verify_privacy(z, kInf).passes);
}

TEST(VerifyPrivacy, DiscreteLaplaceClosedForm) {
  for (int n : {2, 4, 8}) {
    for (double eps_ref : {0.5, 1.0, 3.0}) {
      const QuantizedDomain d(1.0, n);
      const double a = std::exp(-eps_ref / n);
      const auto t = geometric_table(d, 2 * n, a);
      const auto rep = verify_privacy(t, eps_ref);
      EXPECT_NEAR(rep.max_ratio, std::exp(eps_ref), 1e-12 * std::exp(eps_ref));
      EXPECT_TRUE(rep.passes);
      EXPECT_FALSE(verify_privacy(t, 0.99 * eps_ref).passes);
    }
  }
}

// ---------------------------------------------------------------------------
// Program construction

TEST(BuildLp, VariableCount) {
  const QuantizedDomain d(1.0, 4);
  const auto prog = build_lp(QuantizedPmf::uniform(5), PrivacyBudget(1.0), NoiseShape{8, 0.5}, d);
  EXPECT_EQ(prog.num_vars(), 106);
  // Two equalities per row, two privacy rows per (k, i).
  EXPECT_EQ(prog.num_constraints(), 2u * 5 + 2u * 21 * 5);
}

TEST(BuildLp, SizeMismatch) {
  try {
    build_lp(QuantizedPmf::uniform(4), PrivacyBudget(1.0), NoiseShape{8, 0.5}, QuantizedDomain(1.0, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::size_mismatch);
  }
}

TEST(SolveNoiseTable, InfiniteBudgetGivesZeroNoise) {
  const QuantizedDomain d(1.0, 4);
  const auto sol = solve_noise_table(QuantizedPmf::uniform(5), PrivacyBudget(kInf), NoiseShape{8, 0.5}, d);
  EXPECT_NEAR(sol.lp_objective, 0.0, 1e-12);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(sol.table.q(i, 0), 1.0, 1e-12);
}

TEST(SolveNoiseTable, MirrorInvariance) {
  const QuantizedDomain d2(1.0, 2);
  const NoiseShape s2{8, 0.5};
  const QuantizedPmf sym(std::vector<double>{0.25, 0.5, 0.25});
  const auto a = solve_noise_table(sym, PrivacyBudget(1.0), s2, d2);
  const auto b = solve_noise_table(sym.mirrored(), PrivacyBudget(1.0), s2, d2);
  EXPECT_NEAR(a.lp_objective, b.lp_objective, 1e-7);

  const QuantizedPmf skew(std::vector<double>{0.05, 0.1, 0.15, 0.3, 0.4});
  const QuantizedDomain d4(1.0, 4);
  for (double e : {1.0, 2.0}) {
    const auto x = solve_noise_table(skew, PrivacyBudget(e), NoiseShape{16, 0.5}, d4);
    const auto y = solve_noise_table(skew.mirrored(), PrivacyBudget(e), NoiseShape{16, 0.5}, d4);
    EXPECT_NEAR(x.lp_objective, y.lp_objective, 1e-7);
  }
}

TEST(SolveNoiseTable, CentralPointMassBeatsDuchi) {
  // Duchi is worst at the center, so a point mass there must be beaten.
  const QuantizedDomain d(1.0, 2);
  const QuantizedPmf p(std::vector<double>{0.0, 1.0, 0.0});
  const auto sol = solve_noise_table(p, PrivacyBudget(1.0), NoiseShape{4, 0.5}, d);
  EXPECT_TRUE(check_table(sol.table).passes(1e-7));
  EXPECT_TRUE(verify_privacy(sol.table, 1.0).passes);
  EXPECT_LE(sol.lp_objective, baseline_expected_variance(Mechanism::duchi, p, PrivacyBudget(1.0), d));
}

TEST(SolveNoiseTable, ConcentratedPmfBelowLaplaceAtEpsFour) {
  const QuantizedDomain d(1.0, 4);
  const QuantizedPmf p(std::vector<double>{0.0, 0.1, 0.8, 0.1, 0.0});
  const auto sol = solve_noise_table(p, PrivacyBudget(4.0), NoiseShape{16, 0.5}, d);
  EXPECT_LT(sol.lp_objective, laplace_variance(1.0, PrivacyBudget(4.0)));
}

TEST(SolveNoiseTable, InfeasibleWindowIsReported) {
  // A window of M = N cannot hold the ratio bound at small eps.
  const QuantizedDomain d(1.0, 4);
  try {
    solve_noise_table(QuantizedPmf::uniform(5), PrivacyBudget(0.25), NoiseShape{4, 0.5}, d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::lp_failure);
    EXPECT_NE(std::string(e.what()).find("infeasible"), std::string::npos);
  }
}

TEST(SolveNoiseTable, LargeBudgetsSolveAtTheCap) {
  const QuantizedDomain d(1.0, 8);
  const NoiseShape s{32, 0.5};
  const auto pmf = QuantizedPmf::uniform(9);
  const auto capped = solve_noise_table(pmf, PrivacyBudget(kMaxProgramEpsilon), s, d);
  for (double e : {16.0, 40.0}) {
    const auto sol = solve_noise_table(pmf, PrivacyBudget(e), s, d);
    EXPECT_NEAR(sol.lp_objective, capped.lp_objective, 1e-12);
    EXPECT_TRUE(verify_privacy(sol.table, e).passes);
    EXPECT_LE(verify_privacy(sol.table, kMaxProgramEpsilon).max_ratio,
              std::exp(kMaxProgramEpsilon) * (1.0 + 1e-6));
  }
}

TEST(SolveNoiseTable, WarmStartMatchesColdObjective) {
  const QuantizedDomain d(1.0, 4);
  const NoiseShape s{16, 0.5};
  const QuantizedPmf p(std::vector<double>{0.1, 0.2, 0.4, 0.2, 0.1});
  const auto cold = solve_noise_table(p, PrivacyBudget(1.0), s, d);
  const auto warm = solve_noise_table(p, PrivacyBudget(1.0), s, d, {}, reference_basis(PrivacyBudget(1.0), s, d));
  EXPECT_NEAR(cold.lp_objective, warm.lp_objective, 1e-9);
}

// ---------------------------------------------------------------------------
// Properties of every table in the solved suite

TEST(SolvedSuite, InvariantsAndRowPrivacy) {
  for (const auto& [c, sol] : solved_suite()) {
    const auto chk = check_table(sol.table);
    EXPECT_LE(chk.max_normalization_error, 1e-7) << c.name << " eps " << c.eps;
    EXPECT_LE(chk.max_mean_error, 1e-7) << c.name << " eps " << c.eps;
    EXPECT_GE(chk.min_entry, -1e-9) << c.name << " eps " << c.eps;
    const auto rep = verify_privacy(sol.table, c.eps);
    EXPECT_LE(rep.max_ratio, std::exp(c.eps) * (1.0 + 1e-6)) << c.name << " eps " << c.eps;
  }
}

TEST(SolvedSuite, CompositePrivacyAtRealInputs) {
  for (const auto& [c, sol] : solved_suite()) {
    EXPECT_LE(oracle::composite_max_ratio(sol.table, 161), std::exp(c.eps) * (1.0 + 1e-6)) << c.name << " eps "
                                                                                              << c.eps;
  }
}

TEST(SolvedSuite, OutputProbabilityMatchesOracle) {
  const auto& sol = solved_suite().front().second;
  for (double x : {-1.0, -0.33, 0.0, 0.125, 0.71, 1.0}) {
    for (long k = -34; k <= 42; k += 3) {
      EXPECT_NEAR(output_probability(sol.table, x, k), oracle::composite_mass(sol.table, x, k), 1e-15);
    }
  }
}

TEST(SolvedSuite, AnalyticUnbiasedness) {
  for (const auto& [c, sol] : solved_suite()) {
    for (int g = 0; g <= 20; ++g) {
      const double x = -1.0 + g / 10.0;
      EXPECT_NEAR(oracle::analytic_bias(sol.table, x), 0.0, 1e-7) << c.name << " eps " << c.eps << " x " << x;
    }
  }
}

TEST(SolvedSuite, ObjectiveEqualsExpectedVariance) {
  for (const auto& [c, sol] : solved_suite()) {
    EXPECT_NEAR(expected_variance(sol.table, c.pmf), sol.lp_objective, 1e-7 * std::max(1.0, sol.lp_objective));
  }
}

TEST(SolvedSuite, DominatesDistributionObliviousBaselines) {
  for (const auto& [c, sol] : solved_suite()) {
    const PrivacyBudget eps(c.eps);
    EXPECT_LE(sol.lp_objective, laplace_variance(1.0, eps)) << c.name << " eps " << c.eps;
    EXPECT_LE(sol.lp_objective, baseline_expected_variance(Mechanism::duchi, c.pmf, eps, kDomain))
        << c.name << " eps " << c.eps;
  }
}

// ---------------------------------------------------------------------------
// Sampling

TEST(SampleNoise, ZeroRowAlwaysZero) {
  const auto z = NoiseTable::zero_noise(QuantizedDomain(1.0, 2), NoiseShape{4, 0.5}, 1.0);
  Stream rng(1);
  for (int t = 0; t < 1000; ++t) ASSERT_EQ(z.sample_noise(1, rng), 0);
}

TEST(SampleNoise, RightTailIsGeometric) {
  const QuantizedDomain d(1.0, 2);
  const int m = 4;
  const double r = 0.4;
  std::vector<double> q(3 * 9, 0.0);
  for (int i = 0; i < 3; ++i) q[static_cast<std::size_t>(i) * 9 + 8] = 1.0 - r;
  const NoiseTable t(d, NoiseShape{m, r}, 1.0, q);
  Stream rng(2);
  const int n = 1'000'000;
  std::map<long, int> counts;
  for (int s = 0; s < n; ++s) ++counts[t.sample_noise(0, rng)];
  for (int g = 0; g < 6; ++g) {
    const double p = (1.0 - r) * std::pow(r, g);
    EXPECT_NEAR(counts[m + g] / static_cast<double>(n), p, 4.0 * std::sqrt(p * (1 - p) / n)) << g;
  }
  EXPECT_EQ(counts.begin()->first, m);
}

TEST(SampleNoise, SolvedRowHasZeroMean) {
  const auto& sol = solved_suite()[7].second;
  Stream rng(3);
  const int n = 1'000'000;
  for (int i : {0, 4, 8}) {
    double sum = 0.0, sum2 = 0.0;
    for (int s = 0; s < n; ++s) {
      const double j = static_cast<double>(sol.table.sample_noise(i, rng));
      sum += j;
      sum2 += j * j;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / n);
    EXPECT_NEAR(mean, 0.0, 4.0 * se) << "row " << i;
  }
}

TEST(AaaPerturb, EdgesAndMidpointsWithZeroNoise) {
  const QuantizedDomain d(1.0, 4);
  const auto z = NoiseTable::zero_noise(d, NoiseShape{4, 0.5}, 1.0);
  Stream rng(4);
  for (int t = 0; t < 1000; ++t) ASSERT_EQ(aaa_perturb(z, 0.5, rng), 0.5);
  int left = 0;
  const int n = 200000;
  for (int t = 0; t < n; ++t) {
    const double y = aaa_perturb(z, 0.25, rng);
    ASSERT_TRUE(y == 0.0 || y == 0.5);
    left += (y == 0.0);
  }
  EXPECT_NEAR(left / static_cast<double>(n), 0.5, 4.0 * 0.5 / std::sqrt(n));
  EXPECT_THROW(aaa_perturb(z, 1.5, rng), Error);
}

TEST(AaaPerturb, MonteCarloUnbiased) {
  for (std::size_t idx : {1u, 6u}) {
    const auto& sol = solved_suite()[idx].second;
    Stream rng(5 + idx);
    const int n = 1'000'000;
    double sum = 0.0, sum2 = 0.0;
    for (int s = 0; s < n; ++s) {
      const double y = aaa_perturb(sol.table, 0.37, rng);
      sum += y;
      sum2 += y * y;
    }
    const double mean = sum / n;
    EXPECT_NEAR(mean, 0.37, 4.0 * std::sqrt((sum2 / n - mean * mean) / n));
  }
}

// ---------------------------------------------------------------------------
// Protocol

TEST(Protocol, DeterministicForFixedSeed) {
  const QuantizedDomain d(1.0, 4);
  const NoiseShape s{16, 0.5};
  Stream data_rng(6);
  std::vector<double> xs(3000);
  for (double& x : xs) x = std::clamp(0.3 * standard_normal(data_rng), -1.0, 1.0);
  const auto a = run_protocol(xs, PrivacyBudget(2.0), 0.2, s, d, Stream(99));
  const auto b = run_protocol(xs, PrivacyBudget(2.0), 0.2, s, d, Stream(99));
  EXPECT_EQ(a.mean_estimate, b.mean_estimate);
  EXPECT_EQ(a.phase1_pmf, b.phase1_pmf);
  EXPECT_EQ(std::vector<double>(a.noise_table.values().begin(), a.noise_table.values().end()),
            std::vector<double>(b.noise_table.values().begin(), b.noise_table.values().end()));
  EXPECT_EQ(a.phase1_count + a.phase2_count, xs.size());
}

TEST(Protocol, SplitBoundaries) {
  const QuantizedDomain d(1.0, 4);
  const NoiseShape s{16, 0.5};
  const std::vector<double> xs{0.1, -0.2, 0.3, 0.4};
  std::vector<bool> one{true, false, false, false};
  const auto r = run_protocol_split(xs, one, PrivacyBudget(2.0), s, d, Stream(1));
  EXPECT_EQ(r.phase1_count, 1u);
  EXPECT_EQ(r.phase2_count, 3u);
  const std::vector<bool> all(4, true);
  try {
    run_protocol_split(xs, all, PrivacyBudget(2.0), s, d, Stream(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_split);
  }
  EXPECT_THROW(run_protocol(xs, PrivacyBudget(2.0), 1.0, s, d, Stream(1)), Error);
  EXPECT_THROW(run_protocol(std::vector<double>{}, PrivacyBudget(2.0), 0.5, s, d, Stream(1)), Error);
}

TEST(Protocol, HighBudgetSanityAgainstLaplace) {
  const QuantizedDomain d(1.0, 8);
  const NoiseShape s{32, 0.5};
  Stream data_rng(7);
  std::vector<double> xs(100000);
  for (double& x : xs) x = std::clamp(0.25 * standard_normal(data_rng), -1.0, 1.0);
  const Stream stream(123);
  const auto res = run_protocol(xs, PrivacyBudget(8.0), 0.1, s, d, stream);
  const auto phase1 = split_clients(xs.size(), 0.1, stream);
  double truth = 0.0, lap = 0.0;
  std::size_t n2 = 0;
  for (std::size_t c = 0; c < xs.size(); ++c) {
    if (phase1[c]) continue;
    truth += xs[c];
    Stream client = stream.fork({kBaselineTag, c});
    lap += laplace_perturb(xs[c], 1.0, PrivacyBudget(8.0), client);
    ++n2;
  }
  truth /= static_cast<double>(n2);
  lap /= static_cast<double>(n2);
  const double aaa_err = squared_error(res.mean_estimate, truth);
  // Squared error is about (variance / n) for both; allow the statistical spread.
  EXPECT_LE(aaa_err, 10.0 * std::max(squared_error(lap, truth), laplace_variance(1.0, PrivacyBudget(8.0)) / n2));
  EXPECT_EQ(res.phase2_count, n2);
}

// ---------------------------------------------------------------------------
// Table files

TEST(TableFile, RoundTripIsBitExact) {
  for (std::size_t idx : {0u, 9u, 19u}) {
    const auto& t = solved_suite()[idx].second.table;
    std::stringstream ss;
    write_table(ss, t);
    const auto back = read_table(ss);
    EXPECT_EQ(back.domain(), t.domain());
    EXPECT_EQ(back.m(), t.m());
    EXPECT_EQ(back.r(), t.r());
    EXPECT_EQ(back.epsilon(), t.epsilon());
    ASSERT_EQ(back.values().size(), t.values().size());
    for (std::size_t k = 0; k < t.values().size(); ++k) ASSERT_EQ(back.values()[k], t.values()[k]);
    EXPECT_TRUE(check_table(back).passes(1e-7));
  }
}

TEST(TableFile, MalformedInput) {
  std::istringstream empty("");
  EXPECT_THROW(read_table(empty), Error);
  std::istringstream bad_header("beta=1 N=2 M=2 r=0.5\n");
  EXPECT_THROW(read_table(bad_header), Error);
  std::istringstream short_row("beta=1 N=1 M=1 r=0.5 eps=1\n0 1 0\n0 1\n");
  try {
    read_table(short_row);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::parse_error);
  }
}
