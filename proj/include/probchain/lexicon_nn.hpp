// Sequence-free word matching: every word becomes a vector of character
// counts, both a reference and a test copy get a little noise, and each test
// vector is matched to its Euclidean nearest reference.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "probchain/csv.hpp"
#include "probchain/detail/translit_table.hpp"
#include "probchain/parallel.hpp"
#include "probchain/rand48.hpp"

namespace probchain::lexicon {

// A-Z, a-z, 0-9
inline constexpr std::size_t kDims = 62;
using Counts = std::array<std::uint16_t, kDims>;

struct LetterCountVector {
  std::string word;
  Counts counts{};

  int total() const {
    return std::accumulate(counts.begin(), counts.end(), 0);
  }
};

inline int dim_of(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return 26 + (c - 'a');
  if (c >= '0' && c <= '9') return 52 + (c - '0');
  return -1;
}

namespace detail {

// Lenient UTF-8 decoding. A byte that cannot start or continue a well-formed
// sequence is read as Latin-1, which is what most legacy word lists are.
inline std::vector<std::uint32_t> decode_utf8(std::string_view s) {
  std::vector<std::uint32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int len = 0;
    std::uint32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0 && b0 >= 0xC2) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0 && b0 <= 0xF4) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool ok = len > 0 && i + len <= s.size();
    for (int k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) ok = false;
      cp = (cp << 6) | (b & 0x3F);
    }
    if (ok && len == 3 && (cp < 0x800 || (cp >= 0xD800 && cp <= 0xDFFF))) ok = false;
    if (ok && len == 4 && (cp < 0x10000 || cp > 0x10FFFF)) ok = false;
    if (!ok) {
      out.push_back(b0);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline const char* translit(std::uint32_t cp) {
  const auto* first = std::begin(kTranslit);
  const auto* last = std::end(kTranslit);
  const auto* it = std::lower_bound(
      first, last, cp, [](const Translit& t, std::uint32_t c) { return t.code < c; });
  return (it != last && it->code == cp) ? it->ascii : nullptr;
}

}  // namespace detail

// Letters outside ASCII go through the transliteration table; combining marks
// and anything else that is not a letter or digit is dropped.
inline LetterCountVector vectorize(std::string_view word) {
  if (word.empty()) throw std::invalid_argument("empty word");
  LetterCountVector v;
  v.word = std::string(word);
  auto bump = [&v](char c) {
    const int d = dim_of(c);
    if (d >= 0) ++v.counts[static_cast<std::size_t>(d)];
  };
  for (std::uint32_t cp : detail::decode_utf8(word)) {
    if (cp < 0x80) {
      bump(static_cast<char>(cp));
    } else if (const char* t = detail::translit(cp)) {
      for (; *t; ++t) bump(*t);
    }
  }
  if (v.total() == 0)
    throw std::invalid_argument("word '" + v.word + "' has no countable characters");
  return v;
}

// Entries keep their file order; duplicate lines stay separate entries.
struct Lexicon {
  std::string name;
  std::vector<LetterCountVector> entries;
  std::vector<std::uint32_t> class_of;  // anagram class per entry
  std::size_t class_count = 0;
  std::size_t skipped = 0;  // lines with nothing countable

  std::size_t size() const { return entries.size(); }
};

inline void index_classes(Lexicon& lex) {
  std::map<Counts, std::uint32_t> ids;
  lex.class_of.resize(lex.entries.size());
  for (std::size_t i = 0; i < lex.entries.size(); ++i) {
    auto [it, fresh] =
        ids.try_emplace(lex.entries[i].counts, static_cast<std::uint32_t>(ids.size()));
    lex.class_of[i] = it->second;
  }
  lex.class_count = ids.size();
}

inline Lexicon make_lexicon(std::string name, std::span<const std::string> words) {
  Lexicon lex;
  lex.name = std::move(name);
  for (const auto& w : words) lex.entries.push_back(vectorize(w));
  index_classes(lex);
  return lex;
}

// One word per line; blank lines and '#' lines are ignored. Words that reduce
// to nothing (pure punctuation, say) are counted in `skipped`.
inline Lexicon read_lexicon(std::istream& is, std::string name) {
  Lexicon lex;
  lex.name = std::move(name);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t");
    const std::string_view w(line.data() + b, e - b + 1);
    try {
      lex.entries.push_back(vectorize(w));
    } catch (const std::invalid_argument&) {
      ++lex.skipped;
    }
  }
  index_classes(lex);
  return lex;
}

inline Lexicon load_lexicon(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open lexicon '" + path + "'");
  auto slash = path.find_last_of("/\\");
  std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
  return read_lexicon(in, std::move(name));
}

// Noise must stay far below the unit spacing of integer counts: with
// |noise| < 1/124 per element, even 62 coordinates cannot close the gap.
inline constexpr double kMaxNoise = 1.0 / 124.0;

struct SampleSets {
  std::vector<std::uint32_t> indices;  // lexicon entry behind slot i
  std::vector<double> reference;       // slot-major, kDims per slot
  std::vector<double> test;

  std::size_t size() const { return indices.size(); }
  std::span<const double> ref_row(std::size_t i) const {
    return {reference.data() + i * kDims, kDims};
  }
  std::span<const double> test_row(std::size_t i) const {
    return {test.data() + i * kDims, kDims};
  }
};

// Partial Fisher-Yates draw without replacement, then all reference noise,
// then all test noise.
template <UniformSource R>
SampleSets build_sets(const Lexicon& lex, std::size_t sample_size, double noise_a,
                      R& rng) {
  if (sample_size == 0) throw std::invalid_argument("sample size must be positive");
  if (sample_size > lex.size())
    throw std::invalid_argument("sample size " + std::to_string(sample_size) +
                                " exceeds lexicon size " + std::to_string(lex.size()));
  if (!(noise_a >= 0.0) || noise_a >= kMaxNoise)
    throw std::invalid_argument("noise amplitude must lie in [0, 1/124)");

  std::vector<std::uint32_t> pool(lex.size());
  std::iota(pool.begin(), pool.end(), 0u);
  const std::size_t n = lex.size();
  for (std::size_t i = 0; i < sample_size; ++i) {
    auto j = i + static_cast<std::size_t>(rng.next_uniform() * static_cast<double>(n - i));
    if (j >= n) j = n - 1;
    std::swap(pool[i], pool[j]);
  }
  SampleSets s;
  s.indices.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(sample_size));

  auto fill = [&](std::vector<double>& dst) {
    dst.resize(sample_size * kDims);
    for (std::size_t i = 0; i < sample_size; ++i) {
      const auto& c = lex.entries[s.indices[i]].counts;
      for (std::size_t k = 0; k < kDims; ++k)
        dst[i * kDims + k] = c[k] + next_bipolar(rng, noise_a);
    }
  };
  fill(s.reference);
  fill(s.test);
  return s;
}

namespace detail {
inline double sq_distance_bounded(const double* a, const double* b, double bound) {
  double d = 0.0;
  for (std::size_t k = 0; k < kDims; k += 2) {
    const double x = a[k] - b[k];
    const double y = a[k + 1] - b[k + 1];
    d += x * x + y * y;
    if (d > bound) return d;
  }
  return d;
}
}  // namespace detail

namespace detail {
inline Counts rounded_counts(const double* row) {
  Counts c{};
  for (std::size_t k = 0; k < kDims; ++k) {
    const double r = std::nearbyint(row[k]);
    c[k] = static_cast<std::uint16_t>(std::clamp(r, 0.0, 65535.0));
  }
  return c;
}

inline double max_rounding_gap(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x - std::nearbyint(x)));
  return m;
}
}  // namespace detail

// Exact nearest reference for every test vector; ties go to the lowest slot.
//
// Fast path: rounding a row recovers its integer counts, and if no coordinate
// strays more than g from an integer, rows with different rounded counts are
// at least (1-2g)^2 apart. When the best match among references sharing the
// test row's rounded counts beats that, nothing else can be nearer.
//
// Otherwise references are visited outward from the test row's coordinate
// sum; a direction stops once (sum gap)^2 / 62 exceeds the best distance,
// which by Cauchy-Schwarz bounds the true squared distance from below.
inline std::vector<std::uint32_t> nearest_references(const SampleSets& s, int jobs = 1) {
  const std::size_t n = s.size();
  std::vector<double> sums(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = s.ref_row(i);
    sums[i] = std::accumulate(r.begin(), r.end(), 0.0);
  }
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return sums[a] < sums[b] || (sums[a] == sums[b] && a < b);
  });
  std::vector<double> sorted_sums(n);
  for (std::size_t i = 0; i < n; ++i) sorted_sums[i] = sums[order[i]];

  const double gap = std::max(detail::max_rounding_gap(s.reference),
                              detail::max_rounding_gap(s.test));
  const bool certify = gap < 0.5;
  const double separation = (1.0 - 2.0 * gap) * (1.0 - 2.0 * gap);
  std::map<Counts, std::vector<std::uint32_t>> buckets;
  if (certify)
    for (std::uint32_t i = 0; i < n; ++i)
      buckets[detail::rounded_counts(s.reference.data() + i * kDims)].push_back(i);

  std::vector<std::uint32_t> nearest(n);
  constexpr double kInvDims = 1.0 / static_cast<double>(kDims);
  parallel_for(n, jobs, [&](std::size_t t) {
    const double* q = s.test.data() + t * kDims;

    double best = std::numeric_limits<double>::infinity();
    std::uint32_t arg = 0;
    auto consider = [&](std::uint32_t r) {
      const double d =
          detail::sq_distance_bounded(q, s.reference.data() + r * kDims, best);
      if (d < best || (d == best && r < arg)) {
        best = d;
        arg = r;
      }
    };

    if (certify) {
      auto it = buckets.find(detail::rounded_counts(q));
      if (it != buckets.end()) {
        for (std::uint32_t r : it->second) consider(r);
        if (best < separation) {
          nearest[t] = arg;
          return;
        }
      }
    }

    double qs = 0.0;
    for (std::size_t k = 0; k < kDims; ++k) qs += q[k];
    const auto start = static_cast<std::size_t>(
        std::lower_bound(sorted_sums.begin(), sorted_sums.end(), qs) - sorted_sums.begin());
    std::size_t up = start;
    std::size_t down = start;
    bool up_open = up < n;
    bool down_open = down > 0;
    while (up_open || down_open) {
      if (up_open) {
        const double g = sorted_sums[up] - qs;
        if (g * g * kInvDims > best) {
          up_open = false;
        } else {
          consider(order[up]);
          up_open = ++up < n;
        }
      }
      if (down_open) {
        const double g = qs - sorted_sums[down - 1];
        if (g * g * kInvDims > best) {
          down_open = false;
        } else {
          consider(order[--down]);
          down_open = down > 0;
        }
      }
    }
    nearest[t] = arg;
  });
  return nearest;
}

// Same answer as nearest_references, by checking every pair. For tests.
inline std::vector<std::uint32_t> nearest_references_brute(const SampleSets& s) {
  const std::size_t n = s.size();
  std::vector<std::uint32_t> nearest(n);
  for (std::size_t t = 0; t < n; ++t) {
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t r = 0; r < n; ++r) {
      double d = 0.0;
      for (std::size_t k = 0; k < kDims; ++k) {
        const double x = s.test[t * kDims + k] - s.reference[r * kDims + k];
        d += x * x;
      }
      if (d < best) {
        best = d;
        nearest[t] = r;
      }
    }
  }
  return nearest;
}

// A test vector is correct when its nearest reference is the same lexicon
// entry. Two entries with the same spelling count as different labels.
inline double nn_classify(const SampleSets& s, int jobs = 1) {
  if (s.size() == 0) throw std::invalid_argument("empty sample");
  const auto nearest = nearest_references(s, jobs);
  std::size_t hits = 0;
  for (std::size_t t = 0; t < nearest.size(); ++t) hits += nearest[t] == t;
  return static_cast<double>(hits) / static_cast<double>(nearest.size());
}

// Sum over the sample of 1/|anagram class within the sample|, divided by the
// sample size. That is simply distinct classes present / sample size.
inline double expected_accuracy_oracle(const Lexicon& lex,
                                       std::span<const std::uint32_t> sample) {
  if (sample.empty()) throw std::invalid_argument("empty sample");
  std::vector<std::uint32_t> classes;
  classes.reserve(sample.size());
  for (auto i : sample) classes.push_back(lex.class_of.at(i));
  std::sort(classes.begin(), classes.end());
  const auto distinct = std::unique(classes.begin(), classes.end()) - classes.begin();
  return static_cast<double>(distinct) / static_cast<double>(sample.size());
}

inline double expected_accuracy_oracle(const Lexicon& lex) {
  if (lex.size() == 0) throw std::invalid_argument("empty lexicon");
  return static_cast<double>(lex.class_count) / static_cast<double>(lex.size());
}

// The binomial standard error used when comparing a run with its oracle.
inline double binomial_se(double p, std::size_t n) {
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

struct ExperimentOptions {
  std::size_t repeats = 6;
  std::size_t sample_size = 20000;
  double noise = 0.0001;
};

struct ExperimentResult {
  std::string lexicon_name;
  std::size_t lexicon_size = 0;
  std::size_t sample_size = 0;
  std::vector<double> accuracy;  // per repeat
  std::vector<double> oracle;    // per repeat, same sample
  double mean = 0.0;
  double sd = 0.0;  // n-1 denominator
  double oracle_mean = 0.0;
};

// Repeat r draws from its own stream, so the outcome does not depend on jobs.
inline ExperimentResult run_experiment(const Lexicon& lex, const ExperimentOptions& opt,
                                       std::uint32_t seed, int jobs = 1) {
  if (opt.repeats == 0) throw std::invalid_argument("repeats must be positive");
  if (lex.size() < opt.sample_size)
    throw std::invalid_argument("lexicon '" + lex.name + "' has " +
                                std::to_string(lex.size()) + " words, sample needs " +
                                std::to_string(opt.sample_size));
  ExperimentResult res;
  res.lexicon_name = lex.name;
  res.lexicon_size = lex.size();
  res.sample_size = opt.sample_size;
  for (std::size_t r = 0; r < opt.repeats; ++r) {
    auto rng = derived_stream(seed, {r});
    const auto sets = build_sets(lex, opt.sample_size, opt.noise, rng);
    res.accuracy.push_back(nn_classify(sets, jobs));
    res.oracle.push_back(expected_accuracy_oracle(lex, sets.indices));
  }
  const double k = static_cast<double>(opt.repeats);
  res.mean = std::accumulate(res.accuracy.begin(), res.accuracy.end(), 0.0) / k;
  res.oracle_mean = std::accumulate(res.oracle.begin(), res.oracle.end(), 0.0) / k;
  if (opt.repeats > 1) {
    double ss = 0.0;
    for (double a : res.accuracy) ss += (a - res.mean) * (a - res.mean);
    res.sd = std::sqrt(ss / (k - 1.0));
  }
  return res;
}

inline csv::Table to_csv(std::span<const ExperimentResult> results) {
  csv::Table t;
  t.header = {"lexicon_name",          "lexicon_size", "sample_size",
              "mean_accuracy_percent", "sd_percent",   "oracle_expectation_percent"};
  for (const auto& r : results)
    t.rows.push_back({r.lexicon_name, csv::format_number(std::uint64_t{r.lexicon_size}),
                      csv::format_number(std::uint64_t{r.sample_size}),
                      csv::format_number(100.0 * r.mean), csv::format_number(100.0 * r.sd),
                      csv::format_number(100.0 * r.oracle_mean)});
  return t;
}

}  // namespace probchain::lexicon
