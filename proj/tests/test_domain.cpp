#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "aaa/domain.hpp"
#include "aaa/rng.hpp"

using namespace aaa;

TEST(QuantizedDomain, FourBinsOnUnitInterval) {
  const auto d = make_domain(1.0, 4);
  EXPECT_DOUBLE_EQ(d.sigma(), 0.5);
  const std::vector<double> expected{-1.0, -0.5, 0.0, 0.5, 1.0};
  ASSERT_EQ(d.n_edges(), 5);
  for (int j = 0; j < 5; ++j) EXPECT_DOUBLE_EQ(d.edge(j), expected[j]);
}

TEST(QuantizedDomain, HundredBins) { EXPECT_NEAR(make_domain(1.0, 100).sigma(), 0.02, 1e-15); }

TEST(QuantizedDomain, SingleBin) {
  const auto d = make_domain(5.0, 1);
  EXPECT_DOUBLE_EQ(d.sigma(), 10.0);
  EXPECT_DOUBLE_EQ(d.edge(0), -5.0);
  EXPECT_DOUBLE_EQ(d.edge(1), 5.0);
}

TEST(QuantizedDomain, EdgesUniformAndExactAtEnds) {
  for (int n : {1, 3, 7, 16, 25, 100}) {
    const auto d = make_domain(0.7, n);
    EXPECT_EQ(d.edge(0), -0.7);
    EXPECT_EQ(d.edge(n), 0.7);
    for (int j = 1; j <= n; ++j) EXPECT_NEAR(d.edge(j) - d.edge(j - 1), d.sigma(), 4e-16);
  }
}

TEST(QuantizedDomain, RejectsBadParameters) {
  for (double beta : {0.0, -1.0, std::nan("")}) {
    try {
      make_domain(beta, 4);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::invalid_parameter);
    }
  }
  EXPECT_THROW(make_domain(1.0, 0), Error);
}

TEST(RoundingWeights, EdgeMidpointAndHandValue) {
  const auto d = make_domain(1.0, 4);
  auto rw = rounding_weights(d, 0.5);
  EXPECT_EQ(rw.left_index, 3);
  EXPECT_DOUBLE_EQ(rw.w_left, 1.0);
  rw = rounding_weights(d, 0.25);
  EXPECT_EQ(rw.left_index, 2);
  EXPECT_DOUBLE_EQ(rw.w_left, 0.5);
  rw = rounding_weights(d, -0.3);
  EXPECT_EQ(rw.left_index, 1);
  EXPECT_NEAR(rw.w_left, 0.6, 1e-15);
  rw = rounding_weights(d, 1.0);
  EXPECT_EQ(rw.left_index, 3);
  EXPECT_DOUBLE_EQ(rw.w_right(), 1.0);
  rw = rounding_weights(d, -1.0);
  EXPECT_EQ(rw.left_index, 0);
  EXPECT_DOUBLE_EQ(rw.w_left, 1.0);
}

TEST(RoundingWeights, OutOfDomain) {
  const auto d = make_domain(1.0, 4);
  try {
    rounding_weights(d, 1.0000001);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::out_of_domain);
  }
  EXPECT_THROW(rounding_weights(d, NAN), Error);
}

TEST(RoundingWeights, WeightsValidOnDenseGrid) {
  const auto d = make_domain(2.0, 7);
  for (int t = 0; t <= 2000; ++t) {
    const double x = -2.0 + 4.0 * t / 2000.0;
    const auto rw = rounding_weights(d, x);
    ASSERT_GE(rw.w_left, 0.0);
    ASSERT_LE(rw.w_left, 1.0);
    // The weighted edge reproduces x.
    EXPECT_NEAR(rw.w_left * d.edge(rw.left_index) + rw.w_right() * d.edge(rw.left_index + 1), x, 1e-14);
  }
}

TEST(RoundRandomized, EdgeIsDeterministic) {
  const auto d = make_domain(1.0, 4);
  Stream rng(3);
  for (int t = 0; t < 1000; ++t) ASSERT_EQ(round_randomized(d, 0.0, rng), 2);
}

TEST(RoundRandomized, HandFrequencyAndUnbiasedness) {
  const auto d = make_domain(1.0, 4);
  Stream rng(11);
  const int n = 1'000'000;
  long left = 0;
  double sum = 0.0;
  for (int t = 0; t < n; ++t) {
    const int i = round_randomized(d, -0.3, rng);
    left += (i == 1);
    sum += d.edge(i);
  }
  EXPECT_NEAR(static_cast<double>(left) / n, 0.6, 0.002);
  // Rounded value has variance 0.6 * 0.4 * sigma^2.
  const double se = std::sqrt(0.24 * 0.25 / n);
  EXPECT_NEAR(sum / n, -0.3, 4 * se);
}

TEST(RoundRandomized, MidpointSymmetric) {
  const auto d = make_domain(1.0, 4);
  Stream rng(5);
  const int n = 200000;
  long left = 0;
  for (int t = 0; t < n; ++t) left += (round_randomized(d, 0.75, rng) == 3);
  EXPECT_NEAR(static_cast<double>(left) / n, 0.5, 3.0 / std::sqrt(n));
}

TEST(EmpiricalPmf, HandExamples) {
  const auto d = make_domain(1.0, 4);
  const std::vector<double> edge{0.0};
  auto p = empirical_quantized_pmf(d, edge);
  EXPECT_DOUBLE_EQ(p[2], 1.0);

  const std::vector<double> one{-0.3};
  p = empirical_quantized_pmf(d, one);
  EXPECT_NEAR(p[1], 0.6, 1e-15);
  EXPECT_NEAR(p[2], 0.4, 1e-15);

  const std::vector<double> two{-0.3, 0.3};
  p = empirical_quantized_pmf(d, two);
  EXPECT_NEAR(p[1], 0.3, 1e-15);
  EXPECT_NEAR(p[2], 0.4, 1e-15);
  EXPECT_NEAR(p[3], 0.3, 1e-15);
  EXPECT_EQ(p[0], 0.0);
  EXPECT_EQ(p[4], 0.0);
}

TEST(EmpiricalPmf, SumsToOneAndErrors) {
  const auto d = make_domain(1.0, 9);
  Stream rng(8);
  std::vector<double> xs(5000);
  for (double& x : xs) x = -1.0 + 2.0 * uniform01(rng);
  const auto p = empirical_quantized_pmf(d, xs);
  double total = 0.0;
  for (double m : p.masses()) total += m;
  EXPECT_NEAR(total, 1.0, 1e-12);

  const std::vector<double> empty;
  try {
    empirical_quantized_pmf(d, empty);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_input);
  }
  const std::vector<double> bad{0.0, 2.0};
  try {
    empirical_quantized_pmf(d, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::out_of_domain);
  }
}

TEST(QuantizedPmfType, RejectsInvalidMasses) {
  EXPECT_THROW(QuantizedPmf(std::vector<double>{0.5, 0.4}), Error);
  EXPECT_THROW(QuantizedPmf(std::vector<double>{1.2, -0.2}), Error);
  EXPECT_THROW(QuantizedPmf(std::vector<double>{}), Error);
  EXPECT_NO_THROW(QuantizedPmf(std::vector<double>{0.25, 0.75}));
}

TEST(RescaleTo, Examples) {
  const std::vector<double> a{0.0, 10.0};
  auto r = rescale_to(a, 1.0);
  EXPECT_DOUBLE_EQ(r.values[0], -1.0);
  EXPECT_DOUBLE_EQ(r.values[1], 1.0);

  const std::vector<double> c{2.0, 2.0, 2.0};
  r = rescale_to(c, 1.0);
  for (double v : r.values) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(r.transform.scale, 1.0);

  const std::vector<double> three{0.0, 5.0, 10.0};
  r = rescale_to(three, 1.0);
  EXPECT_DOUBLE_EQ(r.values[0], -1.0);
  EXPECT_NEAR(r.values[1], 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(r.values[2], 1.0);
}

TEST(RescaleTo, InverseRoundTrip) {
  Stream rng(21);
  std::vector<double> xs(1000);
  for (double& x : xs) x = 100.0 * standard_normal(rng) + 37.0;
  const auto r = rescale_to(xs, 2.5);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    EXPECT_NEAR(r.transform.inverse(r.values[i]), xs[i], 1e-12 * std::max(1.0, std::abs(xs[i])));
  }
}
