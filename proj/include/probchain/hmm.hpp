// Discrete-observation hidden Markov models, just enough to ask whether the
// transition matrix carries class information: classify with the real
// models, then again with A replaced by the uniform matrix.

#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "probchain/csv.hpp"
#include "probchain/parallel.hpp"
#include "probchain/rand48.hpp"

namespace probchain::hmm {

using Symbol = std::uint32_t;
using Sequence = std::vector<Symbol>;

inline constexpr double kStochasticTol = 1e-12;

// Row-major storage. A is k x k, B is k x L.
struct DiscreteHmm {
  std::size_t k = 0;
  std::size_t L = 0;
  std::vector<double> pi;
  std::vector<double> A;
  std::vector<double> B;

  double a(std::size_t i, std::size_t j) const { return A[i * k + j]; }
  double b(std::size_t i, Symbol o) const { return B[i * L + o]; }

  void validate() const {
    if (k == 0 || L == 0) throw std::invalid_argument("hmm needs k >= 1 and L >= 1");
    if (pi.size() != k || A.size() != k * k || B.size() != k * L)
      throw std::invalid_argument("hmm parameter shapes do not match k and L");
    auto check = [](std::span<const double> row, const char* what) {
      double s = 0.0;
      for (double v : row) {
        if (!(v >= 0.0) || !std::isfinite(v))
          throw std::invalid_argument(std::string(what) + " has a negative or non-finite entry");
        s += v;
      }
      if (std::abs(s - 1.0) > kStochasticTol)
        throw std::invalid_argument(std::string(what) + " does not sum to 1");
    };
    check(pi, "pi");
    for (std::size_t i = 0; i < k; ++i) check({A.data() + i * k, k}, "row of A");
    for (std::size_t i = 0; i < k; ++i) check({B.data() + i * L, L}, "row of B");
  }

  friend bool operator==(const DiscreteHmm&, const DiscreteHmm&) = default;
};

inline DiscreteHmm make_hmm(std::vector<double> pi, const std::vector<std::vector<double>>& A,
                            const std::vector<std::vector<double>>& B) {
  DiscreteHmm h;
  h.k = pi.size();
  h.L = B.empty() ? 0 : B.front().size();
  h.pi = std::move(pi);
  for (const auto& r : A) {
    if (r.size() != h.k) throw std::invalid_argument("A must be k x k");
    h.A.insert(h.A.end(), r.begin(), r.end());
  }
  for (const auto& r : B) {
    if (r.size() != h.L) throw std::invalid_argument("B rows differ in length");
    h.B.insert(h.B.end(), r.begin(), r.end());
  }
  h.validate();
  return h;
}

// sum_r A[i][r] * A[r][j]
inline double two_step_transition(const DiscreteHmm& h, std::size_t i, std::size_t j) {
  if (i >= h.k || j >= h.k) throw std::out_of_range("state index out of range");
  double s = 0.0;
  for (std::size_t r = 0; r < h.k; ++r) s += h.a(i, r) * h.a(r, j);
  return s;
}

// log P(seq | h). alpha is renormalized every step and the logs of the
// normalizers are summed. A zero normalizer means the sequence is impossible.
inline double forward_loglik(const DiscreteHmm& h, std::span<const Symbol> seq) {
  if (seq.empty()) throw std::invalid_argument("empty sequence");
  for (Symbol o : seq)
    if (o >= h.L) throw std::out_of_range("symbol outside the alphabet");

  std::vector<double> alpha(h.k), next(h.k);
  double c = 0.0;
  for (std::size_t i = 0; i < h.k; ++i) {
    alpha[i] = h.pi[i] * h.b(i, seq[0]);
    c += alpha[i];
  }
  if (c <= 0.0) return -std::numeric_limits<double>::infinity();
  double ll = std::log(c);
  for (double& v : alpha) v /= c;

  for (std::size_t t = 1; t < seq.size(); ++t) {
    c = 0.0;
    for (std::size_t j = 0; j < h.k; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < h.k; ++i) s += alpha[i] * h.a(i, j);
      next[j] = s * h.b(j, seq[t]);
      c += next[j];
    }
    if (c <= 0.0) return -std::numeric_limits<double>::infinity();
    ll += std::log(c);
    for (std::size_t j = 0; j < h.k; ++j) alpha[j] = next[j] / c;
  }
  return ll;
}

inline DiscreteHmm flatten_transitions(const DiscreteHmm& h) {
  DiscreteHmm f = h;
  std::fill(f.A.begin(), f.A.end(), 1.0 / static_cast<double>(h.k));
  return f;
}

// Every entry of A and B below `floor` is raised to it and the rows are
// renormalized. pi is left alone.
inline DiscreteHmm with_backoff(const DiscreteHmm& h, double floor) {
  if (!(floor >= 0.0) || floor * static_cast<double>(std::max(h.k, h.L)) >= 1.0)
    throw std::invalid_argument("back-off floor must be in [0, 1/max(k, L))");
  if (floor == 0.0) return h;
  DiscreteHmm f = h;
  auto fix = [floor](std::span<double> row) {
    double s = 0.0;
    for (double& v : row) s += (v = std::max(v, floor));
    for (double& v : row) v /= s;
  };
  for (std::size_t i = 0; i < f.k; ++i) fix({f.A.data() + i * f.k, f.k});
  for (std::size_t i = 0; i < f.k; ++i) fix({f.B.data() + i * f.L, f.L});
  return f;
}

namespace detail {
template <UniformSource R>
std::size_t draw_categorical(std::span<const double> p, R& rng) {
  const double u = rng.next_uniform();
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    acc += p[i];
    last = i;
    if (u < acc) return i;
  }
  return last;  // rounding left u above the final partial sum
}
}  // namespace detail

struct SequenceDataset {
  std::vector<Sequence> sequences;
  std::vector<std::uint32_t> labels;

  std::size_t size() const { return sequences.size(); }
  void append(const SequenceDataset& o) {
    sequences.insert(sequences.end(), o.sequences.begin(), o.sequences.end());
    labels.insert(labels.end(), o.labels.begin(), o.labels.end());
  }
};

template <UniformSource R>
SequenceDataset generate(const DiscreteHmm& h, std::size_t length, std::size_t count, R& rng,
                         std::uint32_t label = 0) {
  if (length == 0) throw std::invalid_argument("sequence length must be positive");
  SequenceDataset ds;
  ds.sequences.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    Sequence seq(length);
    std::size_t s = detail::draw_categorical(h.pi, rng);
    for (std::size_t t = 0; t < length; ++t) {
      if (t > 0) s = detail::draw_categorical({h.A.data() + s * h.k, h.k}, rng);
      seq[t] = static_cast<Symbol>(detail::draw_categorical({h.B.data() + s * h.L, h.L}, rng));
    }
    ds.sequences.push_back(std::move(seq));
    ds.labels.push_back(label);
  }
  return ds;
}

// argmax over models of forward_loglik; ties (including all -inf) go to the
// lowest model index.
inline std::vector<std::uint32_t> classify(std::span<const DiscreteHmm> models,
                                           const SequenceDataset& ds, int jobs = 1) {
  std::vector<std::uint32_t> out(ds.size());
  parallel_for(ds.size(), jobs, [&](std::size_t n) {
    double best = -std::numeric_limits<double>::infinity();
    std::uint32_t arg = 0;
    for (std::uint32_t m = 0; m < models.size(); ++m) {
      const double ll = forward_loglik(models[m], ds.sequences[n]);
      if (ll > best) {
        best = ll;
        arg = m;
      }
    }
    out[n] = arg;
  });
  return out;
}

inline double accuracy(std::span<const std::uint32_t> predicted,
                       std::span<const std::uint32_t> labels) {
  if (predicted.empty()) throw std::invalid_argument("nothing to score");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hit += predicted[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(predicted.size());
}

struct NecessityReport {
  std::string model_set;
  double accuracy_true = 0.0;
  double accuracy_flat = 0.0;
  double drop = 0.0;  // accuracy_true - accuracy_flat
};

inline NecessityReport markov_necessity_test(std::span<const DiscreteHmm> models,
                                             const SequenceDataset& test, int jobs = 1,
                                             double backoff = 0.0) {
  if (models.size() < 2) throw std::invalid_argument("need at least two class models");
  if (test.size() == 0) throw std::invalid_argument("empty test set");
  for (auto l : test.labels)
    if (l >= models.size()) throw std::invalid_argument("label without a model");

  std::vector<DiscreteHmm> real, flat;
  for (const auto& m : models) {
    real.push_back(backoff > 0.0 ? with_backoff(m, backoff) : m);
    flat.push_back(flatten_transitions(real.back()));
  }
  NecessityReport r;
  r.accuracy_true = accuracy(classify(real, test, jobs), test.labels);
  r.accuracy_flat = accuracy(classify(flat, test, jobs), test.labels);
  r.drop = r.accuracy_true - r.accuracy_flat;
  return r;
}

// Equal share of `count` sequences per model; class m uses stream {m}.
inline SequenceDataset generate_test_set(std::span<const DiscreteHmm> models,
                                         std::size_t length, std::size_t count,
                                         std::uint32_t seed) {
  SequenceDataset ds;
  const std::size_t per = count / models.size();
  const std::size_t extra = count % models.size();
  for (std::uint32_t m = 0; m < models.size(); ++m) {
    auto rng = derived_stream(seed, {m});
    ds.append(generate(models[m], length, per + (m < extra ? 1 : 0), rng, m));
  }
  return ds;
}

// Built-in class pairs.
//   cycles:   two deterministic 3-cycles running in opposite directions,
//             identity emissions; only the order of symbols differs.
//   emission: uniform transitions, different emission tables.
//   mixed:    both differ.
inline std::vector<DiscreteHmm> scenario(const std::string& name) {
  const double t = 1.0 / 3.0;
  const std::vector<double> pi3{t, t, t};
  const std::vector<std::vector<double>> eye{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const std::vector<std::vector<double>> flat{{t, t, t}, {t, t, t}, {t, t, t}};
  if (name == "cycles")
    return {make_hmm(pi3, {{0, 1, 0}, {0, 0, 1}, {1, 0, 0}}, eye),
            make_hmm(pi3, {{0, 0, 1}, {1, 0, 0}, {0, 1, 0}}, eye)};
  if (name == "emission")
    return {make_hmm(pi3, flat, {{0.5, 0.2, 0.2, 0.1}, {0.2, 0.5, 0.2, 0.1}, {0.2, 0.2, 0.5, 0.1}}),
            make_hmm(pi3, flat, {{0.4, 0.2, 0.2, 0.2}, {0.2, 0.4, 0.2, 0.2}, {0.1, 0.1, 0.4, 0.4}})};
  if (name == "mixed")
    return {make_hmm(pi3, {{0.1, 0.8, 0.1}, {0.1, 0.1, 0.8}, {0.8, 0.1, 0.1}},
                     {{0.7, 0.2, 0.1}, {0.1, 0.7, 0.2}, {0.2, 0.1, 0.7}}),
            make_hmm(pi3, {{0.1, 0.1, 0.8}, {0.8, 0.1, 0.1}, {0.1, 0.8, 0.1}},
                     {{0.6, 0.2, 0.2}, {0.2, 0.6, 0.2}, {0.2, 0.2, 0.6}})};
  throw std::invalid_argument("unknown scenario '" + name + "' (cycles, emission, mixed)");
}

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"cycles", "emission", "mixed"};
  return names;
}

// Model files: whitespace-separated numbers, '#' to end of line is a comment.
//   k L
//   pi (k numbers)
//   A  (k rows of k)
//   B  (k rows of L)
// Rows off by more than 1e-6 are rejected; smaller slop (typical of values
// printed with six decimals) is renormalized away.
inline constexpr double kFileTol = 1e-6;

inline DiscreteHmm read_model(std::istream& is) {
  std::vector<std::string> tok;
  std::string line;
  while (std::getline(is, line)) {
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream ls(line);
    std::string w;
    while (ls >> w) tok.push_back(w);
  }
  std::size_t pos = 0;
  auto next_number = [&]() {
    if (pos >= tok.size()) throw std::invalid_argument("model file ends early");
    return csv::parse_double(tok[pos++]);
  };
  auto next_count = [&]() {
    const double v = next_number();
    if (!(v >= 1.0) || v != std::floor(v) || v > 1e6)
      throw std::invalid_argument("k and L must be positive integers");
    return static_cast<std::size_t>(v);
  };
  DiscreteHmm h;
  h.k = next_count();
  h.L = next_count();
  auto read_rows = [&](std::vector<double>& dst, std::size_t rows, std::size_t cols,
                       const char* what) {
    dst.resize(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        const double v = next_number();
        if (!(v >= 0.0)) throw std::invalid_argument(std::string(what) + " has a negative entry");
        dst[r * cols + c] = v;
        s += v;
      }
      if (std::abs(s - 1.0) > kFileTol)
        throw std::invalid_argument(std::string(what) + " row " + std::to_string(r) +
                                    " sums to " + csv::format_number(s));
      for (std::size_t c = 0; c < cols; ++c) dst[r * cols + c] /= s;
    }
  };
  read_rows(h.pi, 1, h.k, "pi");
  read_rows(h.A, h.k, h.k, "A");
  read_rows(h.B, h.k, h.L, "B");
  if (pos != tok.size()) throw std::invalid_argument("trailing numbers in model file");
  h.validate();
  return h;
}

inline DiscreteHmm load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
  return read_model(in);
}

inline void write_model(std::ostream& os, const DiscreteHmm& h) {
  os << h.k << ' ' << h.L << '\n';
  auto row = [&os](const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) os << (i ? " " : "") << csv::format_number(p[i]);
    os << '\n';
  };
  row(h.pi.data(), h.k);
  for (std::size_t i = 0; i < h.k; ++i) row(h.A.data() + i * h.k, h.k);
  for (std::size_t i = 0; i < h.k; ++i) row(h.B.data() + i * h.L, h.L);
}

inline csv::Table to_csv(std::span<const NecessityReport> reports) {
  csv::Table t;
  t.header = {"model_set", "accuracy_true", "accuracy_flat", "drop"};
  for (const auto& r : reports)
    t.rows.push_back({r.model_set, csv::format_number(r.accuracy_true),
                      csv::format_number(r.accuracy_flat), csv::format_number(r.drop)});
  return t;
}

}  // namespace probchain::hmm
