#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "probchain/cpoisson.hpp"

using namespace probchain;
using namespace probchain::cpoiss;
using Catch::Approx;

TEST_CASE("log gamma agrees with the standard library") {
  CHECK(log_gamma(0.5) == Approx(0.5723649429247004).epsilon(1e-14));
  CHECK(log_gamma(1.0) == Approx(0.0).margin(1e-14));
  CHECK(log_gamma(2.0) == Approx(0.0).margin(1e-14));
  for (double x = 0.05; x < 200.0; x *= 1.37)
    CHECK(log_gamma(x) == Approx(std::lgamma(x)).epsilon(1e-12).margin(1e-13));
  for (double x : {0.0, -0.5, -2.25}) CHECK_THROWS_AS(log_gamma(x), std::invalid_argument);
}

TEST_CASE("density is the formula as written") {
  const CPoissModel m{21.0, 1.0, 0.0, 1.0};
  for (double x : {0.0, 0.5, 3.0, 20.5, 40.0}) {
    const double want = std::exp(x * std::log(21.0) - x - std::lgamma(x + 1.0));
    CHECK(cpoiss_density(x, m) == Approx(want).epsilon(1e-12));
  }
  CHECK_THROWS_AS(cpoiss_density(-1.0, m), std::invalid_argument);

  CPoissModel s = m;
  s.x_scale = 0.5;
  s.x_shift = -3.0;
  s.norm = 2.0;
  CHECK(cpoiss_density(1.0, s) == 0.0);  // u = 0.5 (1 - 3) < 0
  CHECK(cpoiss_density(7.0, s) == Approx(2.0 * cpoiss_density(2.0, m)).epsilon(1e-12));
}

TEST_CASE("p_max translation") {
  const auto m = shift_for_pmax(CPoissModel{21.0}, 21, 0.58);
  CHECK(m.x_shift == Approx(-11.439270684).epsilon(1e-10));
  CHECK(shift_for_pmax(CPoissModel{}, 11, 0.84).x_shift == Approx(-1.917887).epsilon(1e-6));
  CHECK(shift_for_pmax(CPoissModel{}, 5, 1.0).x_shift == 0.0);
  CHECK_THROWS_AS(shift_for_pmax(CPoissModel{}, 5, 0.0), std::invalid_argument);
}

TEST_CASE("noise acts as a longer chain") {
  const auto [base, noisy] = noise_elongation_shift(10, 0.5, 0.3);
  CHECK(base == Approx(10 * std::log(0.5)));
  CHECK(noisy == Approx(-3.957053).epsilon(1e-6));
  CHECK_THROWS_AS(noise_elongation_shift(10, 0.0, 0.1), std::invalid_argument);
}

TEST_CASE("Freedman-Diaconis histogram") {
  std::vector<double> v(1000);
  std::iota(v.begin(), v.end(), 0.0);
  const double w = freedman_diaconis_width(v);
  CHECK(w == Approx(2.0 * 499.5 / 10.0));
  const auto h = make_histogram(v);
  CHECK(std::accumulate(h.counts.begin(), h.counts.end(), std::uint64_t{0}) == 1000);
  CHECK(h.edges.front() == 0.0);
  CHECK(h.edges.back() >= 999.0);
  CHECK(h.edges.size() == h.bins() + 1);

  const std::vector<double> flat(10, 2.5);
  const auto one = make_histogram(flat);
  CHECK(one.bins() == 1);
  CHECK(one.counts[0] == 10);

  const auto fixed = make_histogram(v, 100.0);
  CHECK(fixed.bins() == 10);
  CHECK(fixed.counts[9] == 100);
  CHECK(fixed.center(0) == 50.0);
}

TEST_CASE("quantiles interpolate") {
  const std::vector<double> s{1, 2, 3, 4};
  CHECK(quantile_sorted(s, 0.0) == 1.0);
  CHECK(quantile_sorted(s, 1.0) == 4.0);
  CHECK(quantile_sorted(s, 0.5) == 2.5);
}

TEST_CASE("sum of logs on the unit interval: mean n, variance n") {
  Rand48 rng(7);
  for (int n : {1, 4}) {
    const auto s = sample_sumlog(n, 0.0, 1.0, 200000, rng);
    const auto m = sample_moments(s.values);
    CHECK(m.mean == Approx(n).margin(4.0 * std::sqrt(n / 200000.0)));
    CHECK(m.variance == Approx(n).epsilon(0.03));
    CHECK(m.skewness == Approx(2.0 / std::sqrt(n)).epsilon(0.1));
  }
}

// -ln p for p ~ U(0, q] is -ln q + Exp(1), so the mean of a sum of three is
// 3 (1 - ln q).
TEST_CASE("sub-interval mean") {
  Rand48 rng(8);
  const auto s = sample_sumlog(3, 0.0, 0.5, 200000, rng);
  CHECK(sample_moments(s.values).mean == Approx(5.079441541679836).margin(0.02));
  CHECK(s.p_max == 0.5);
}

TEST_CASE("interval checks") {
  Rand48 rng(1);
  CHECK_THROWS_AS(sample_sumlog(0, 0.0, 1.0, 10, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_sumlog(3, 0.5, 0.5, 10, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_sumlog(3, 0.0, 1.5, 10, rng), std::invalid_argument);
  const auto s = sample_sumlog(2, 0.3, 0.6, 5000, rng);
  for (double x : s.values) {
    REQUIRE(x >= -2 * std::log(0.6) - 1e-12);
    REQUIRE(x < -2 * std::log(0.3));
  }
}

TEST_CASE("parallel sampling is independent of jobs") {
  const auto a = sample_sumlog_parallel(5, 0.0, 0.84, 150000, 3, 1);
  const auto b = sample_sumlog_parallel(5, 0.0, 0.84, 150000, 3, 4);
  CHECK(a.values == b.values);
  CHECK(a.histogram.counts == b.histogram.counts);
}

TEST_CASE("moments") {
  const std::vector<double> v{1, 2, 3, 4, 10};
  const auto m = sample_moments(v);
  CHECK(m.mean == 4.0);
  CHECK(m.variance == Approx(12.5));
  CHECK(m.skewness > 0.0);
  CHECK_THROWS_AS(sample_moments(std::vector<double>{1.0}), std::invalid_argument);
}

namespace {
// A histogram whose counts are the model itself, rounded.
SumLogSample synthetic(double lambda, int n, double p_max, double scale, double norm) {
  SumLogSample s;
  s.n = n;
  s.p_max = p_max;
  CPoissModel m = shift_for_pmax(CPoissModel{lambda, scale, 0.0, norm}, n, p_max);
  const double w = 0.25;
  for (int i = 0; i <= 160; ++i) s.histogram.edges.push_back(i * w);
  for (int i = 0; i < 160; ++i)
    s.histogram.counts.push_back(
        static_cast<std::uint64_t>(std::llround(cpoiss_density(s.histogram.center(i), m))));
  return s;
}
}  // namespace

TEST_CASE("fit recovers a known scale") {
  const auto s = synthetic(11.0, 11, 0.84, 0.6, 1e6);
  const auto f = fit_cpoiss(s, 11.0);
  CHECK(f.model.x_scale == Approx(0.6).epsilon(1e-4));
  CHECK(f.model.norm == Approx(1e6).epsilon(1e-3));
  CHECK(f.model.x_shift == Approx(11 * std::log(0.84)));
  CHECK(f.dof == 158);
  CHECK(f.reduced_chi_square < 0.01);
}

TEST_CASE("shared fit uses one scale") {
  std::vector<SumLogSample> ss{synthetic(11.0, 11, 0.84, 0.45, 5e5), synthetic(21.0, 21, 0.84, 0.45, 5e5)};
  const std::vector<double> lambdas{11.0, 21.0};
  const auto f = fit_cpoiss_shared(ss, lambdas);
  CHECK(f.x_scale == Approx(0.45).epsilon(1e-4));
  REQUIRE(f.fits.size() == 2);
  for (const auto& r : f.fits) CHECK(r.model.x_scale == f.x_scale);
  CHECK_THROWS_AS(fit_cpoiss_shared(ss, std::vector<double>{11.0}), std::invalid_argument);
}

TEST_CASE("too few bins is a fit error") {
  SumLogSample s;
  s.histogram.edges = {0, 1, 2};
  s.histogram.counts = {5, 7};
  CHECK_THROWS_AS(fit_cpoiss(s, 3.0), FitError);
}

TEST_CASE("mode and histogram export") {
  const CPoissModel m{21.0, 1.0, 0.0, 1.0};
  const double mode = model_mode(m);
  CHECK(cpoiss_density(mode, m) >= cpoiss_density(mode + 0.01, m));
  CHECK(cpoiss_density(mode, m) >= cpoiss_density(mode - 0.01, m));
  // d/du [u ln lambda - u - ln Gamma(u+1)] = 0  ->  digamma(u+1) = ln lambda - 1
  const double h = 1e-5;
  const double digamma = (log_gamma(mode + 1.0 + h) - log_gamma(mode + 1.0 - h)) / (2.0 * h);
  CHECK(digamma == Approx(std::log(21.0) - 1.0).margin(1e-6));
  CHECK(mode == Approx(7.22).margin(0.01));

  Rand48 rng(2);
  const auto s = sample_sumlog(5, 0.0, 1.0, 5000, rng);
  const auto t = histogram_csv(s, CPoissModel{5.0});
  CHECK(t.header == std::vector<std::string>{"bin_center", "count", "model_density"});
  CHECK(t.rows.size() == s.histogram.bins());
  CHECK(csv::parse(csv::to_string(t)) == t);
}
