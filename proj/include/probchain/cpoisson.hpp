// Distribution of sums of log probabilities and the continuous-Poisson model
//
//     cPoiss(x, n) = n^x e^-x / Gamma(x + 1)
//
// evaluated verbatim (note e^-x, not e^-n). The density is not normalized;
// a fitted vertical factor `norm` absorbs that, and one abscissa scale
// `x_scale` is shared by every chain length fitted together.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "probchain/csv.hpp"
#include "probchain/parallel.hpp"
#include "probchain/rand48.hpp"

namespace probchain::cpoiss {

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ln Gamma(x) for x > 0. Lanczos approximation (g = 7, 9 terms), with the
// reflection formula below 1/2; about 15 significant digits.
inline double log_gamma(double x) {
  if (!(x > 0.0)) throw std::invalid_argument("log_gamma requires x > 0");
  static constexpr double kCoef[9] = {
      0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
      771.32342877765313,      -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
  constexpr double kG = 7.0;
  constexpr double kPi = std::numbers::pi;
  if (x < 0.5) return std::log(kPi / std::sin(kPi * x)) - log_gamma(1.0 - x);
  const double z = x - 1.0;
  double a = kCoef[0];
  for (int i = 1; i < 9; ++i) a += kCoef[i] / (z + i);
  const double t = z + kG + 0.5;
  return 0.5 * std::log(2.0 * kPi) + (z + 0.5) * std::log(t) - t + std::log(a);
}

struct CPoissModel {
  double lambda = 1.0;
  double x_scale = 1.0;
  double x_shift = 0.0;
  double norm = 1.0;
};

// norm * lambda^u e^-u / Gamma(u + 1) with u = x_scale * (x + x_shift);
// zero where u < 0.
inline double cpoiss_density(double x, const CPoissModel& m) {
  if (!(x >= 0.0)) throw std::invalid_argument("cpoiss_density requires x >= 0");
  const double u = m.x_scale * (x + m.x_shift);
  if (u < 0.0) return 0.0;
  return m.norm * std::exp(u * std::log(m.lambda) - u - log_gamma(u + 1.0));
}

// Translation for probabilities drawn from (0, p_max]: x_shift = n ln p_max.
inline CPoissModel shift_for_pmax(CPoissModel m, int n, double p_max) {
  if (!(p_max > 0.0 && p_max <= 1.0)) throw std::invalid_argument("p_max must be in (0,1]");
  m.x_shift = n * std::log(p_max);
  return m;
}

// Uniform noise on [-e, e] has sd e/sqrt(3) and acts as a longer chain:
// the sum-log mean moves from n ln p_mean to n ln(p_mean + e/sqrt(3)).
inline std::pair<double, double> noise_elongation_shift(int n, double p_mean, double e) {
  if (!(p_mean > 0.0)) throw std::invalid_argument("p_mean must be > 0");
  if (!(e >= 0.0)) throw std::invalid_argument("noise amplitude must be >= 0");
  const double sigma_e = e / std::numbers::sqrt3;
  return {n * std::log(p_mean), n * std::log(p_mean + sigma_e)};
}

struct Histogram {
  std::vector<double> edges;  // bins().size() + 1 entries
  std::vector<std::uint64_t> counts;

  [[nodiscard]] std::size_t bins() const { return counts.size(); }
  [[nodiscard]] double center(std::size_t i) const { return 0.5 * (edges[i] + edges[i + 1]); }
  [[nodiscard]] std::size_t non_empty() const {
    return static_cast<std::size_t>(
        std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }));
  }
};

// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// 2 IQR n^(-1/3).
inline double freedman_diaconis_width(std::span<const double> values) {
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  const double iqr = quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25);
  return 2.0 * iqr / std::cbrt(static_cast<double>(s.size()));
}

// Bins of equal width from min to max. A zero width (constant data) gives a
// single degenerate bin.
inline Histogram make_histogram(std::span<const double> values,
                                std::optional<double> bin_width = std::nullopt) {
  if (values.empty()) throw std::invalid_argument("histogram of empty data");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  const double h = bin_width ? *bin_width : freedman_diaconis_width(values);
  Histogram out;
  if (!(h > 0.0) || hi == lo) {
    out.edges = {lo, hi};
    out.counts = {values.size()};
    return out;
  }
  const auto nbins = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((hi - lo) / h)));
  out.edges.resize(nbins + 1);
  for (std::size_t i = 0; i <= nbins; ++i) out.edges[i] = lo + static_cast<double>(i) * h;
  out.counts.assign(nbins, 0);
  for (double v : values) {
    auto i = static_cast<std::size_t>((v - lo) / h);
    out.counts[std::min(i, nbins - 1)]++;
  }
  return out;
}

struct SumLogSample {
  int n = 1;
  double p_min = 0.0;
  double p_max = 1.0;
  std::vector<double> values;  // x = -sum ln p_i
  Histogram histogram;
};

namespace detail {
inline void check_interval(int n, double p_min, double p_max) {
  if (n < 1) throw std::invalid_argument("chain length must be >= 1");
  if (!(p_min >= 0.0 && p_min < p_max && p_max <= 1.0))
    throw std::invalid_argument("probability interval must satisfy 0 <= p_min < p_max <= 1");
}

template <UniformSource R>
void draw_sumlogs(int n, double p_min, double p_max, std::span<double> out, R& rng) {
  const double width = p_max - p_min;
  for (double& x : out) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      double p;
      do {
        p = p_max - width * rng.next_uniform();  // (p_min, p_max]
      } while (p <= 0.0);
      s -= std::log(p);
    }
    x = s;
  }
}
}  // namespace detail

// `count` values of -sum ln p_i with p_i ~ U(p_min, p_max].
template <UniformSource R>
SumLogSample sample_sumlog(int n, double p_min, double p_max, std::size_t count, R& rng,
                           std::optional<double> bin_width = std::nullopt) {
  detail::check_interval(n, p_min, p_max);
  SumLogSample s{n, p_min, p_max, std::vector<double>(count), {}};
  detail::draw_sumlogs(n, p_min, p_max, s.values, rng);
  if (count > 0) s.histogram = make_histogram(s.values, bin_width);
  return s;
}

// Same distribution drawn in fixed-size chunks, each on its own derived
// stream; identical output for any `jobs`.
inline SumLogSample sample_sumlog_parallel(int n, double p_min, double p_max, std::size_t count,
                                           std::uint32_t seed, int jobs = 1,
                                           std::optional<double> bin_width = std::nullopt) {
  detail::check_interval(n, p_min, p_max);
  constexpr std::size_t kChunk = 1 << 16;
  SumLogSample s{n, p_min, p_max, std::vector<double>(count), {}};
  const std::size_t chunks = (count + kChunk - 1) / kChunk;
  parallel_for(chunks, jobs, [&](std::size_t c) {
    Rand48 rng = derived_stream(seed, {static_cast<std::uint64_t>(n), c});
    const std::size_t begin = c * kChunk;
    const std::size_t len = std::min(kChunk, count - begin);
    detail::draw_sumlogs(n, p_min, p_max, std::span<double>(s.values).subspan(begin, len), rng);
  });
  if (count > 0) s.histogram = make_histogram(s.values, bin_width);
  return s;
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double skewness = 0.0;  // g1
};

inline Moments sample_moments(std::span<const double> v) {
  if (v.size() < 2) throw std::invalid_argument("need at least two values");
  const auto n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double m2 = 0.0, m3 = 0.0;
  for (double x : v) {
    const double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  Moments m;
  m.mean = mean;
  m.variance = m2 / (n - 1.0);
  m2 /= n;
  m3 /= n;
  m.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  return m;
}

struct FitResult {
  CPoissModel model;
  double chi_square = 0.0;
  int dof = 0;
  double reduced_chi_square = 0.0;
};

namespace detail {
// Weighted least squares against bin counts, variance max(count, 1). For a
// fixed shape the optimal norm is closed-form.
struct ChiSquare {
  double chi2 = 0.0;
  double norm = 0.0;
};

inline ChiSquare chi_square_for(const Histogram& h, CPoissModel m) {
  m.norm = 1.0;
  double sfc = 0.0, sff = 0.0;
  std::vector<double> f(h.bins());
  for (std::size_t i = 0; i < h.bins(); ++i) {
    f[i] = cpoiss_density(std::max(h.center(i), 0.0), m);
    const double w = 1.0 / std::max<double>(static_cast<double>(h.counts[i]), 1.0);
    sfc += w * f[i] * static_cast<double>(h.counts[i]);
    sff += w * f[i] * f[i];
  }
  ChiSquare out;
  out.norm = sff > 0.0 ? sfc / sff : 0.0;
  for (std::size_t i = 0; i < h.bins(); ++i) {
    const double c = static_cast<double>(h.counts[i]);
    const double r = c - out.norm * f[i];
    out.chi2 += r * r / std::max(c, 1.0);
  }
  if (!(sff > 0.0)) out.chi2 = std::numeric_limits<double>::infinity();
  return out;
}

inline void require_fittable(const SumLogSample& s) {
  if (s.histogram.non_empty() < 5)
    throw FitError("histogram has fewer than 5 non-empty bins");
}

// Minimizes f over [lo, hi]: log-spaced scan, then golden-section refinement
// around the best scan point.
template <typename F>
double minimize_scale(F&& f, double lo, double hi) {
  constexpr int kScan = 400;
  const double ratio = std::pow(hi / lo, 1.0 / (kScan - 1));
  std::vector<double> grid(kScan);
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kScan; ++i) {
    grid[i] = lo * std::pow(ratio, i);
    const double v = f(grid[i]);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  if (!std::isfinite(best_val)) throw FitError("chi-square is not finite anywhere");
  double a = grid[std::max(best - 1, 0)];
  double b = grid[std::min(best + 1, kScan - 1)];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > 1e-10 * (a + b)) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double mid = 0.5 * (a + b);
  return f(mid) <= best_val ? mid : grid[best];
}

inline FitResult finish(const SumLogSample& s, CPoissModel m) {
  const auto cs = chi_square_for(s.histogram, m);
  FitResult r;
  r.model = m;
  r.model.norm = cs.norm;
  r.chi_square = cs.chi2;
  r.dof = static_cast<int>(s.histogram.bins()) - 2;
  r.reduced_chi_square = r.dof > 0 ? r.chi_square / r.dof : std::numeric_limits<double>::infinity();
  return r;
}
}  // namespace detail

struct FitOptions {
  double scale_min = 0.02;
  double scale_max = 5.0;
};

// Fits x_scale and norm; lambda is given and x_shift = n ln p_max.
inline FitResult fit_cpoiss(const SumLogSample& s, double lambda, FitOptions opt = {}) {
  detail::require_fittable(s);
  const CPoissModel base = shift_for_pmax(CPoissModel{lambda, 1.0, 0.0, 1.0}, s.n, s.p_max);
  const double scale = detail::minimize_scale(
      [&](double k) {
        CPoissModel m = base;
        m.x_scale = k;
        return detail::chi_square_for(s.histogram, m).chi2;
      },
      opt.scale_min, opt.scale_max);
  CPoissModel m = base;
  m.x_scale = scale;
  return detail::finish(s, m);
}

struct SharedFit {
  double x_scale = 1.0;
  std::vector<FitResult> fits;
};

// One x_scale for all samples, a separate norm per sample; minimizes the
// total chi-square.
inline SharedFit fit_cpoiss_shared(std::span<const SumLogSample> samples,
                                   std::span<const double> lambdas, FitOptions opt = {}) {
  if (samples.empty() || samples.size() != lambdas.size())
    throw std::invalid_argument("need one lambda per sample");
  std::vector<CPoissModel> base;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    detail::require_fittable(samples[i]);
    base.push_back(shift_for_pmax(CPoissModel{lambdas[i], 1.0, 0.0, 1.0}, samples[i].n,
                                  samples[i].p_max));
  }
  const double scale = detail::minimize_scale(
      [&](double k) {
        double total = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
          CPoissModel m = base[i];
          m.x_scale = k;
          total += detail::chi_square_for(samples[i].histogram, m).chi2;
        }
        return total;
      },
      opt.scale_min, opt.scale_max);
  SharedFit out{scale, {}};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CPoissModel m = base[i];
    m.x_scale = scale;
    out.fits.push_back(detail::finish(samples[i], m));
  }
  return out;
}

// Mode of the model on the x axis. lambda^u e^-u / Gamma(u+1) is log-concave
// in u, so a golden-section search on [0, 10 lambda + 10] finds it.
inline double model_mode(const CPoissModel& m) {
  auto neg_log = [&](double u) { return -(u * std::log(m.lambda) - u - log_gamma(u + 1.0)); };
  double a = 0.0, b = 10.0 * m.lambda + 10.0;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  while (b - a > 1e-12 * (1.0 + b)) {
    if (neg_log(c) < neg_log(d)) {
      b = d;
    } else {
      a = c;
    }
    c = b - inv_phi * (b - a);
    d = a + inv_phi * (b - a);
  }
  const double u = 0.5 * (a + b);
  return u / m.x_scale - m.x_shift;
}

// Histogram with the fitted model evaluated at each bin center.
inline csv::Table histogram_csv(const SumLogSample& s, const CPoissModel& m) {
  csv::Table t;
  t.header = {"bin_center", "count", "model_density"};
  for (std::size_t i = 0; i < s.histogram.bins(); ++i) {
    const double c = s.histogram.center(i);
    t.rows.push_back({csv::format_number(c), csv::format_number(s.histogram.counts[i]),
                      csv::format_number(cpoiss_density(std::max(c, 0.0), m))});
  }
  return t;
}

}  // namespace probchain::cpoiss
