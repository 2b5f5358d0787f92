// Error propagation through products of probabilities.
//
// A chain of n probabilities p_i is multiplied once as given and once with
// additive noise on every factor. The quantity of interest is the relative
// error |p_true - p_measured| / p_true. The Monte-Carlo estimator follows the
// original reference program: per repetition, the summed absolute error
// over all samples is divided by the summed true product (a ratio of sums,
// not a mean of ratios, which diverges as p_true -> 0).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "probchain/csv.hpp"
#include "probchain/parallel.hpp"
#include "probchain/rand48.hpp"

namespace probchain::chain {

// Widest native binary floating-point type; 80-bit extended on x86-64.
using wide_t = long double;

struct ChainProduct {
  double log_value = 0.0;  // sum of ln p_i, -inf if any p_i == 0
  wide_t direct = 1.0;     // prod p_i in wide_t

  // The direct product lost all significance although the chain is non-zero.
  [[nodiscard]] bool underflowed() const {
    return direct == 0.0L && std::isfinite(log_value);
  }
};

namespace detail {
inline void require_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("probability outside [0,1]: " + std::to_string(p));
}
}  // namespace detail

inline ChainProduct product_true(std::span<const double> p) {
  ChainProduct out;
  for (double pi : p) {
    detail::require_probability(pi);
    out.direct *= pi;
    out.log_value += std::log(pi);
  }
  return out;
}

// One factor p + eps, clamped into [0,1] when the noise is truncated.
inline double perturb(double p, double eps, bool truncated) {
  const double q = p + eps;
  return truncated ? std::clamp(q, 0.0, 1.0) : q;
}

// Untruncated factors may leave [0,1]; negative factors flip the sign of the
// product, as in the reference program.
template <UniformSource R>
wide_t product_perturbed(std::span<const double> p, const NoiseSpec& noise, R& rng) {
  wide_t prod = 1.0L;
  for (double pi : p) {
    detail::require_probability(pi);
    prod *= perturb(pi, draw_noise(rng, noise), noise.truncated);
  }
  return prod;
}

inline double relative_error(wide_t p_true, wide_t p_measured) {
  return static_cast<double>(std::fabs(p_true - p_measured) / p_true);
}

// |1 - (1 + eps/P)^n|: relative error of P^n when every factor is off by eps.
inline double analytic_rel_error(double P, double eps, int n) {
  if (!(P > 0.0)) throw std::invalid_argument("analytic_rel_error requires P > 0");
  if (n < 0) throw std::invalid_argument("chain length must be non-negative");
  return std::fabs(1.0 - std::pow(1.0 + eps / P, n));
}

struct ChainSpec {
  int n = 1;
  NoiseSpec noise{};  // family and truncation; amplitude is swept
  std::size_t samples = 100000;
  int repetitions = 20;
  double amplitude_step = 0.01;
  int amplitude_count = 100;

  void validate() const {
    if (n < 1) throw std::invalid_argument("chain length n must be >= 1");
    if (samples < 1) throw std::invalid_argument("samples must be >= 1");
    if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
    if (amplitude_count < 1) throw std::invalid_argument("amplitude count must be >= 1");
    if (!(amplitude_step > 0.0)) throw std::invalid_argument("amplitude step must be > 0");
  }
};

// k-th grid amplitude. When the step is 1/M for integer M the value is
// computed as k/M so that 0.07 prints as 0.07.
inline double amplitude_at(int k, double step) {
  const double inv = 1.0 / step;
  const double m = std::round(inv);
  if (m >= 1.0 && std::fabs(inv - m) < 1e-9 * m) return k / m;
  return k * step;
}

struct CurvePoint {
  double amplitude = 0.0;
  double mean_rel_error = 0.0;
  double std_error = 0.0;  // standard error of the mean over repetitions

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct ErrorCurve {
  NoiseFamily family = NoiseFamily::uniform;
  bool truncated = false;
  int n = 1;
  std::vector<CurvePoint> points;

  friend bool operator==(const ErrorCurve&, const ErrorCurve&) = default;
};

// One repetition of one grid cell: sum|p_true - p_measured| / sum p_true over
// `samples` chains of i.i.d. U[0,1) probabilities.
template <UniformSource R>
double ratio_of_sums(int n, NoiseFamily family, bool truncated, double amplitude,
                     std::size_t samples, R& rng) {
  std::vector<double> p(static_cast<std::size_t>(n));
  wide_t sumd = 0.0L;
  wide_t sum = 0.0L;
  for (std::size_t s = 0; s < samples; ++s) {
    wide_t target = 1.0L;
    for (auto& pi : p) {
      pi = rng.next_uniform();
      target *= pi;
    }
    wide_t prod = 1.0L;
    for (double pi : p) prod *= perturb(pi, draw_noise(rng, family, amplitude), truncated);
    sumd += std::fabs(target - prod);
    sum += target;
  }
  return sum > 0.0L ? static_cast<double>(sumd / sum) : 0.0;
}

struct GridOptions {
  NoiseFamily family = NoiseFamily::uniform;
  bool truncated = false;
  std::vector<int> chain_lengths;
  std::size_t samples = 100000;
  int repetitions = 20;
  double amplitude_step = 0.01;
  int amplitude_count = 100;
};

// Every (n, amplitude, repetition) cell runs on its own derived stream, so
// the result is independent of `jobs`.
inline std::vector<ErrorCurve> run_grid(const GridOptions& opt, std::uint32_t seed,
                                        int jobs = 1) {
  for (int n : opt.chain_lengths)
    ChainSpec{n, {opt.family, opt.truncated, 0.0}, opt.samples, opt.repetitions,
              opt.amplitude_step, opt.amplitude_count}
        .validate();

  const std::size_t lengths = opt.chain_lengths.size();
  const auto amps = static_cast<std::size_t>(opt.amplitude_count);
  const auto reps = static_cast<std::size_t>(opt.repetitions);
  std::vector<double> cell(lengths * amps * reps);

  parallel_for(cell.size(), jobs, [&](std::size_t u) {
    const std::size_t rep = u % reps;
    const std::size_t k = (u / reps) % amps;
    const std::size_t li = u / (reps * amps);
    const int n = opt.chain_lengths[li];
    Rand48 rng = derived_stream(
        seed, {static_cast<std::uint64_t>(opt.family), opt.truncated ? 1u : 0u,
               static_cast<std::uint64_t>(n), k, rep});
    cell[u] = ratio_of_sums(n, opt.family, opt.truncated,
                            amplitude_at(static_cast<int>(k), opt.amplitude_step),
                            opt.samples, rng);
  });

  std::vector<ErrorCurve> curves;
  curves.reserve(lengths);
  for (std::size_t li = 0; li < lengths; ++li) {
    ErrorCurve c{opt.family, opt.truncated, opt.chain_lengths[li], {}};
    for (std::size_t k = 0; k < amps; ++k) {
      const double* v = &cell[(li * amps + k) * reps];
      double mean = 0.0;
      for (std::size_t r = 0; r < reps; ++r) mean += v[r];
      mean /= static_cast<double>(reps);
      double ss = 0.0;
      for (std::size_t r = 0; r < reps; ++r) ss += (v[r] - mean) * (v[r] - mean);
      const double se =
          reps > 1 ? std::sqrt(ss / static_cast<double>(reps - 1) / static_cast<double>(reps))
                   : 0.0;
      c.points.push_back({amplitude_at(static_cast<int>(k), opt.amplitude_step), mean, se});
    }
    curves.push_back(std::move(c));
  }
  return curves;
}

inline ErrorCurve relative_error_mc(const ChainSpec& spec, std::uint32_t seed, int jobs = 1) {
  spec.validate();
  GridOptions opt{spec.noise.family, spec.noise.truncated,    {spec.n},
                  spec.samples,      spec.repetitions,        spec.amplitude_step,
                  spec.amplitude_count};
  return run_grid(opt, seed, jobs).front();
}

// Half away from zero, one decimal.
inline double round_to_tenth(double x) { return std::round(x * 10.0) / 10.0; }

// Relative error indexed by amplitude (rows) and chain length (columns).
struct ErrorTable {
  NoiseFamily family = NoiseFamily::uniform;
  bool truncated = false;
  std::vector<double> amplitudes;
  std::vector<int> chain_lengths;
  std::vector<double> mean;     // row-major
  std::vector<double> std_error;  // row-major

  [[nodiscard]] double value(std::size_t row, std::size_t col) const {
    return mean[row * chain_lengths.size() + col];
  }
  [[nodiscard]] double rounded(std::size_t row, std::size_t col) const {
    return round_to_tenth(value(row, col));
  }
  [[nodiscard]] std::size_t row_of(double amplitude) const {
    for (std::size_t r = 0; r < amplitudes.size(); ++r)
      if (std::fabs(amplitudes[r] - amplitude) < 1e-9) return r;
    throw std::out_of_range("amplitude not in table");
  }
  [[nodiscard]] std::size_t col_of(int n) const {
    for (std::size_t c = 0; c < chain_lengths.size(); ++c)
      if (chain_lengths[c] == n) return c;
    throw std::out_of_range("chain length not in table");
  }
};

struct TableOptions {
  std::size_t samples = 100000;
  int repetitions = 20;
  double amplitude_step = 0.01;
  int amplitude_count = 31;  // 0.00 .. 0.30
  std::vector<int> chain_lengths = {1,  3,  5,  7,  9,  11, 13, 15, 17, 19,
                                    21, 23, 25, 27, 29, 31, 33, 35, 37, 39};
};

inline ErrorTable table_from_curves(const std::vector<ErrorCurve>& curves) {
  if (curves.empty()) throw std::invalid_argument("no curves");
  ErrorTable t;
  t.family = curves.front().family;
  t.truncated = curves.front().truncated;
  for (const auto& p : curves.front().points) t.amplitudes.push_back(p.amplitude);
  for (const auto& c : curves) t.chain_lengths.push_back(c.n);
  const std::size_t cols = curves.size();
  t.mean.resize(t.amplitudes.size() * cols);
  t.std_error.resize(t.mean.size());
  for (std::size_t c = 0; c < cols; ++c) {
    if (curves[c].points.size() != t.amplitudes.size())
      throw std::invalid_argument("curves have different amplitude grids");
    for (std::size_t r = 0; r < t.amplitudes.size(); ++r) {
      t.mean[r * cols + c] = curves[c].points[r].mean_rel_error;
      t.std_error[r * cols + c] = curves[c].points[r].std_error;
    }
  }
  return t;
}

inline ErrorTable error_table(NoiseFamily family, bool truncated, const TableOptions& opt,
                                 std::uint32_t seed, int jobs = 1) {
  GridOptions g{family,          truncated,          opt.chain_lengths, opt.samples,
                opt.repetitions, opt.amplitude_step, opt.amplitude_count};
  return table_from_curves(run_grid(g, seed, jobs));
}

// Fixed-width text in the layout of a printed error table.
inline std::string format_table(const ErrorTable& t) {
  std::ostringstream os;
  os << "e \\  n";
  for (int n : t.chain_lengths) os << std::setw(4) << n;
  os << '\n';
  os << std::fixed;
  for (std::size_t r = 0; r < t.amplitudes.size(); ++r) {
    os << std::setprecision(2) << t.amplitudes[r] << "  ";
    for (std::size_t c = 0; c < t.chain_lengths.size(); ++c)
      os << std::setw(4) << std::setprecision(1) << t.rounded(r, c);
    os << '\n';
  }
  return os.str();
}

// gnuplot-compatible "e rel_error" columns for one chain length.
inline std::string format_plot_data(const ErrorCurve& c) {
  std::ostringstream os;
  os << "# n=" << c.n << " noise=" << to_string(c.family)
     << (c.truncated ? " truncated" : "") << "\n# e rel_error\n";
  for (const auto& p : c.points)
    os << csv::format_number(p.amplitude) << ' ' << csv::format_number(p.mean_rel_error)
       << '\n';
  return os.str();
}

inline csv::Table to_csv(const std::vector<ErrorCurve>& curves) {
  csv::Table t;
  t.header = {"family", "truncated", "e", "n", "mean_rel_error", "stderr"};
  for (const auto& c : curves)
    for (const auto& p : c.points)
      t.rows.push_back({std::string(to_string(c.family)), c.truncated ? "1" : "0",
                        csv::format_number(p.amplitude), csv::format_number(c.n),
                        csv::format_number(p.mean_rel_error), csv::format_number(p.std_error)});
  return t;
}

// Inverse of to_csv; curves come back in order of first appearance of n.
inline std::vector<ErrorCurve> curves_from_csv(const csv::Table& t) {
  const auto fam = t.column("family"), tr = t.column("truncated"), e = t.column("e"),
             n = t.column("n"), m = t.column("mean_rel_error"), se = t.column("stderr");
  std::vector<ErrorCurve> out;
  for (const auto& row : t.rows) {
    const int len = static_cast<int>(csv::parse_int(row[n]));
    const NoiseFamily f = parse_noise_family(row[fam]);
    const bool trunc = row[tr] == "1";
    auto it = std::find_if(out.begin(), out.end(), [&](const ErrorCurve& c) {
      return c.n == len && c.family == f && c.truncated == trunc;
    });
    if (it == out.end()) {
      out.push_back({f, trunc, len, {}});
      it = std::prev(out.end());
    }
    it->points.push_back(
        {csv::parse_double(row[e]), csv::parse_double(row[m]), csv::parse_double(row[se])});
  }
  return out;
}

}  // namespace probchain::chain
