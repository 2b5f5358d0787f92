#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "probchain/chain_error.hpp"

using namespace probchain;
using namespace probchain::chain;
using Catch::Approx;

TEST_CASE("true product, direct and in logs") {
  const std::vector<double> p{0.5, 0.5, 0.2};
  const auto c = product_true(p);
  CHECK(c.direct == Approx(0.05L));
  CHECK(c.log_value == Approx(std::log(0.05)));
  CHECK_FALSE(c.underflowed());

  const std::vector<double> zero{0.3, 0.0};
  CHECK(product_true(zero).log_value == -std::numeric_limits<double>::infinity());
  CHECK_FALSE(product_true(zero).underflowed());

  const std::vector<double> bad{0.3, 1.2};
  CHECK_THROWS_AS(product_true(bad), std::invalid_argument);
  const std::vector<double> nan{std::nan("")};
  CHECK_THROWS_AS(product_true(nan), std::invalid_argument);
}

TEST_CASE("log sum survives where the direct product underflows") {
  std::vector<double> p(20000, 0.5);
  const auto c = product_true(p);
  CHECK(c.underflowed());
  CHECK(c.log_value == Approx(20000 * std::log(0.5)));
}

TEST_CASE("perturbation and truncation") {
  CHECK(perturb(0.5, 0.1, false) == Approx(0.6));
  CHECK(perturb(0.05, -0.1, false) == Approx(-0.05));
  CHECK(perturb(0.05, -0.1, true) == 0.0);
  CHECK(perturb(0.95, 0.1, true) == 1.0);
  CHECK(perturb(0.95, 0.1, false) == Approx(1.05));
}

TEST_CASE("perturbed product draws one noise value per factor") {
  const std::vector<double> p{0.4, 0.7, 0.9};
  Rand48 a(17), b(17);
  const NoiseSpec noise{NoiseFamily::uniform, false, 0.2};
  const wide_t got = product_perturbed(p, noise, a);
  wide_t want = 1.0L;
  for (double pi : p) want *= pi + next_bipolar(b, 0.2);
  CHECK(got == want);
  CHECK(a.state() == b.state());
}

TEST_CASE("relative error") {
  CHECK(relative_error(0.5L, 0.4L) == Approx(0.2));
  CHECK(relative_error(0.5L, -0.5L) == Approx(2.0));
}

TEST_CASE("analytic relative error for a constant offset") {
  CHECK(analytic_rel_error(0.5, 0.05, 10) == Approx(1.5937424601).epsilon(1e-12));
  CHECK(analytic_rel_error(0.5, 0.0, 10) == 0.0);
  CHECK(analytic_rel_error(0.5, -0.05, 1) == Approx(0.1));
  CHECK_THROWS_AS(analytic_rel_error(0.0, 0.1, 3), std::invalid_argument);
}

TEST_CASE("amplitude grid keeps decimal values exact") {
  CHECK(amplitude_at(7, 0.01) == 0.07);
  CHECK(amplitude_at(30, 0.01) == 0.3);
  CHECK(amplitude_at(3, 0.025) == Approx(0.075));
}

TEST_CASE("rounding to one decimal goes half away from zero") {
  CHECK(round_to_tenth(0.25) == 0.3);
  CHECK(round_to_tenth(-0.25) == -0.3);
  CHECK(round_to_tenth(0.24) == 0.2);
  CHECK(round_to_tenth(1.05) == Approx(1.1));
}

TEST_CASE("zero amplitude gives zero error") {
  Rand48 r(1);
  CHECK(ratio_of_sums(7, NoiseFamily::uniform, false, 0.0, 1000, r) == 0.0);
  CHECK(ratio_of_sums(7, NoiseFamily::gaussian, true, 0.0, 1000, r) == 0.0);
}

// For n = 1 the ratio of sums tends to E|noise| / E[p] = 2 E|noise|.
TEST_CASE("single-factor chains match the closed form") {
  const double a = 0.2;
  GridOptions g;
  g.chain_lengths = {1};
  g.samples = 50000;
  g.repetitions = 8;
  g.amplitude_count = 21;
  g.family = NoiseFamily::uniform;
  auto uni = run_grid(g, 3).front();
  CHECK(uni.points[20].amplitude == a);
  CHECK(uni.points[20].mean_rel_error == Approx(a).margin(0.003));

  g.family = NoiseFamily::gaussian;
  auto gau = run_grid(g, 3).front();
  const double want = 2.0 * a * kUniformSigma * std::sqrt(2.0 / std::numbers::pi);
  CHECK(gau.points[20].mean_rel_error == Approx(want).margin(0.003));
}

TEST_CASE("truncation can only shrink the error") {
  GridOptions g;
  g.chain_lengths = {9};
  g.samples = 20000;
  g.repetitions = 3;
  g.amplitude_count = 31;
  auto open = run_grid(g, 5).front();
  g.truncated = true;
  auto clamped = run_grid(g, 5).front();
  CHECK(clamped.points[30].mean_rel_error < open.points[30].mean_rel_error);
}

TEST_CASE("error grows with chain length and amplitude") {
  GridOptions g;
  g.chain_lengths = {3, 9, 21};
  g.samples = 20000;
  g.repetitions = 3;
  g.amplitude_count = 31;
  g.truncated = true;
  const auto curves = run_grid(g, 11);
  for (int k : {10, 20, 30}) {
    CHECK(curves[0].points[k].mean_rel_error < curves[1].points[k].mean_rel_error);
    CHECK(curves[1].points[k].mean_rel_error < curves[2].points[k].mean_rel_error);
  }
  for (const auto& c : curves)
    CHECK(c.points[10].mean_rel_error < c.points[30].mean_rel_error);
}

TEST_CASE("grid results do not depend on the worker count") {
  GridOptions g;
  g.chain_lengths = {1, 5, 13};
  g.samples = 2000;
  g.repetitions = 4;
  g.amplitude_count = 6;
  const auto one = run_grid(g, 21, 1);
  const auto four = run_grid(g, 21, 4);
  CHECK(to_csv(one) == to_csv(four));
}

TEST_CASE("relative_error_mc is one column of the grid") {
  ChainSpec spec;
  spec.n = 5;
  spec.samples = 1000;
  spec.repetitions = 3;
  spec.amplitude_count = 4;
  const auto c = relative_error_mc(spec, 2);
  GridOptions g;
  g.chain_lengths = {5};
  g.samples = 1000;
  g.repetitions = 3;
  g.amplitude_count = 4;
  CHECK(to_csv({c}) == to_csv(run_grid(g, 2)));

  spec.n = 0;
  CHECK_THROWS_AS(relative_error_mc(spec, 2), std::invalid_argument);
}

TEST_CASE("standard error comes from the spread over repetitions") {
  GridOptions g;
  g.chain_lengths = {5};
  g.samples = 500;
  g.repetitions = 1;
  g.amplitude_count = 3;
  CHECK(run_grid(g, 1).front().points[2].std_error == 0.0);
  g.repetitions = 6;
  CHECK(run_grid(g, 1).front().points[2].std_error > 0.0);
}

TEST_CASE("curves round-trip through CSV") {
  GridOptions g;
  g.family = NoiseFamily::gaussian;
  g.truncated = true;
  g.chain_lengths = {2, 4};
  g.samples = 300;
  g.repetitions = 2;
  g.amplitude_count = 5;
  const auto curves = run_grid(g, 4);
  const auto table = to_csv(curves);
  const auto back = curves_from_csv(csv::parse(csv::to_string(table)));
  CHECK(to_csv(back) == table);
  REQUIRE(back.size() == 2);
  CHECK(back[1].family == NoiseFamily::gaussian);
  CHECK(back[1].truncated);
  CHECK(back[1].points[3].mean_rel_error == curves[1].points[3].mean_rel_error);
}

TEST_CASE("error table layout") {
  TableOptions opt;
  opt.samples = 200;
  opt.repetitions = 2;
  const auto t = error_table(NoiseFamily::uniform, true, opt, 1);
  CHECK(t.amplitudes.size() == 31);
  CHECK(t.chain_lengths.size() == 20);
  CHECK(t.chain_lengths.back() == 39);
  CHECK(t.row_of(0.3) == 30);
  CHECK(t.col_of(13) == 6);
  CHECK(t.value(0, 5) == 0.0);
  CHECK_THROWS_AS(t.col_of(2), std::out_of_range);
  const auto text = format_table(t);
  CHECK(text.rfind("e \\  n   1   3", 0) == 0);
  CHECK(text.find("\n0.30  ") != std::string::npos);

  const auto dat = format_plot_data(run_grid({NoiseFamily::uniform, false, {3}, 100, 1, 0.01, 3}, 1).front());
  CHECK(dat.find("# n=3 noise=uniform") == 0);
  CHECK(dat.find("\n0.02 ") != std::string::npos);
}
