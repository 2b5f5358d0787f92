// Synthetic lexical search. A balanced tree of depth d and fan-out b carries
// a random "true" transition probability on every edge; the root-to-leaf
// path with the largest product is the target word and the other b^d - 1
// paths are distractors. Each trial nudges every edge probability by bipolar
// uniform noise of amplitude eps and checks whether the argmax survives.
//
// F measure is (precision + recall) / 2, micro-averaged over paths as
// classes. A miss counts once as a false negative (the target) and once as
// a false positive (the chosen distractor), so precision = recall = hits /
// trials and F is the fraction of trials in which the target is recovered.

#pragma once

#include <array>
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

namespace probchain::tree {

inline constexpr std::uint64_t kDefaultPathBudget = 10'000'000;

class BudgetExceeded : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// b^d, or 0 when it does not fit in 64 bits.
inline std::uint64_t path_count(int depth, int breadth) {
  std::uint64_t n = 1;
  for (int i = 0; i < depth; ++i) {
    if (n > std::numeric_limits<std::uint64_t>::max() / static_cast<std::uint64_t>(breadth))
      return 0;
    n *= static_cast<std::uint64_t>(breadth);
  }
  return n;
}

// levels[k] holds the b^(k+1) edges from depth k to depth k+1; edge j joins
// node j / b to node j. A leaf index read in base b is the path, most
// significant digit first, so leaf order is lexicographic path order.
struct LetterTree {
  int depth = 0;
  int breadth = 0;
  std::vector<std::vector<double>> levels;

  [[nodiscard]] std::uint64_t paths() const { return path_count(depth, breadth); }
};

template <UniformSource R>
LetterTree generate_tree(int depth, int breadth, R& rng,
                         std::uint64_t path_budget = kDefaultPathBudget) {
  if (depth < 1) throw std::invalid_argument("tree depth must be >= 1");
  if (breadth < 2) throw std::invalid_argument("tree breadth must be >= 2");
  const std::uint64_t paths = path_count(depth, breadth);
  if (paths == 0 || paths > path_budget)
    throw BudgetExceeded("tree with " + std::to_string(breadth) + "^" + std::to_string(depth) +
                         " paths exceeds the path budget of " + std::to_string(path_budget));
  LetterTree t{depth, breadth, {}};
  std::size_t width = 1;
  for (int k = 0; k < depth; ++k) {
    width *= static_cast<std::size_t>(breadth);
    std::vector<double> level(width);
    for (double& p : level) {
      do {
        p = rng.next_uniform();
      } while (p == 0.0);  // open interval (0,1)
    }
    t.levels.push_back(std::move(level));
  }
  return t;
}

// Path digits (one child index per level) of a leaf.
inline std::vector<int> path_digits(const LetterTree& t, std::uint64_t leaf) {
  std::vector<int> digits(static_cast<std::size_t>(t.depth));
  for (int k = t.depth - 1; k >= 0; --k) {
    digits[static_cast<std::size_t>(k)] = static_cast<int>(leaf % static_cast<std::uint64_t>(t.breadth));
    leaf /= static_cast<std::uint64_t>(t.breadth);
  }
  return digits;
}

namespace detail {
struct LogSearch {
  const std::vector<std::vector<double>>& logp;
  int depth;
  int breadth;
  double best = -std::numeric_limits<double>::infinity();
  std::uint64_t best_leaf = 0;

  void descend(int level, std::uint64_t node, double partial) {
    const std::uint64_t first = node * static_cast<std::uint64_t>(breadth);
    const auto& lv = logp[static_cast<std::size_t>(level)];
    if (level == depth - 1) {
      for (int c = 0; c < breadth; ++c) {
        const double s = partial + lv[first + c];
        if (s > best) {
          best = s;
          best_leaf = first + c;
        }
      }
      return;
    }
    for (int c = 0; c < breadth; ++c) descend(level + 1, first + c, partial + lv[first + c]);
  }
};
}  // namespace detail

// Leaf with the largest sum of log edge probabilities. Depth-first, O(d)
// extra space; ties go to the lexicographically smallest path.
inline std::uint64_t target_path(const LetterTree& t) {
  std::vector<std::vector<double>> logp;
  logp.reserve(t.levels.size());
  for (const auto& lv : t.levels) {
    std::vector<double> l(lv.size());
    for (std::size_t i = 0; i < lv.size(); ++i) l[i] = std::log(lv[i]);
    logp.push_back(std::move(l));
  }
  detail::LogSearch s{logp, t.depth, t.breadth};
  s.descend(0, 0, 0.0);
  return s.best_leaf;
}

inline constexpr std::size_t kMaxEpsPerPass = 8;

struct EpsOutcome {
  double f = 0.0;                  // fraction of trials recovering the target
  double negative_fraction = 0.0;  // trials with at least one negative factor
};

namespace detail {
// One perturbed pass over the tree for up to kMaxEpsPerPass amplitudes at
// once. Each edge draws a single uniform u; amplitude k perturbs it by
// eps_k * 2(u - 0.5), the same value next_bipolar(rng, eps_k) would give.
// Path scores are signed products of type Score.
template <typename Score, UniformSource R>
struct PerturbedSearch {
  using Partial = std::array<Score, kMaxEpsPerPass>;

  const LetterTree& tree;
  std::span<const double> eps;
  R& rng;
  std::vector<double> delta = std::vector<double>(static_cast<std::size_t>(tree.breadth));
  std::array<Score, kMaxEpsPerPass> best{};
  std::array<std::uint64_t, kMaxEpsPerPass> best_leaf{};
  std::array<bool, kMaxEpsPerPass> negative{};

  void reset() {
    best.fill(-std::numeric_limits<Score>::infinity());
    best_leaf.fill(0);
    negative.fill(false);
  }

  void descend(int level, std::uint64_t node, const Partial& partial) {
    const std::size_t m = eps.size();
    const int b = tree.breadth;
    const std::uint64_t first = node * static_cast<std::uint64_t>(b);
    const double* lv = tree.levels[static_cast<std::size_t>(level)].data() + first;
    if (level == tree.depth - 1) {
      for (int c = 0; c < b; ++c) delta[c] = 2.0 * (rng.next_uniform() - 0.5);
      for (std::size_t k = 0; k < m; ++k) {
        const Score pk = partial[k];
        const double ek = eps[k];
        Score bk = best[k];
        int arg = -1;
        bool neg = false;
        for (int c = 0; c < b; ++c) {
          const double q = lv[c] + ek * delta[c];
          neg |= q < 0.0;
          const Score v = pk * q;
          if (v > bk) {
            bk = v;
            arg = c;
          }
        }
        if (arg >= 0) {
          best[k] = bk;
          best_leaf[k] = first + static_cast<std::uint64_t>(arg);
        }
        negative[k] = negative[k] || neg;
      }
      return;
    }
    for (int c = 0; c < b; ++c) {
      const double d = 2.0 * (rng.next_uniform() - 0.5);
      Partial next;
      for (std::size_t k = 0; k < m; ++k) {
        const double q = lv[c] + eps[k] * d;
        negative[k] = negative[k] || q < 0.0;
        next[k] = partial[k] * q;
      }
      descend(level + 1, first + static_cast<std::uint64_t>(c), next);
    }
  }
};
}  // namespace detail

// Runs `trials` perturbed searches, every amplitude in `eps` seeing the same
// uniforms (common random numbers). Uniforms are consumed in depth-first
// edge order.
template <typename Score = long double, UniformSource R>
std::vector<EpsOutcome> perturb_and_classify(const LetterTree& t, std::span<const double> eps,
                                             int trials, R& rng) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  for (double e : eps)
    if (!(e >= 0.0)) throw std::invalid_argument("eps must be >= 0");
  const std::uint64_t target = target_path(t);
  std::vector<EpsOutcome> out(eps.size());
  std::vector<int> hits(eps.size(), 0), neg(eps.size(), 0);
  for (int trial = 0; trial < trials; ++trial) {
    // Amplitudes beyond one pass share the trial's uniforms by replaying the
    // stream from the trial's start state.
    const R start = rng;
    for (std::size_t off = 0; off < eps.size(); off += kMaxEpsPerPass) {
      if (off > 0) rng = start;
      const std::size_t m = std::min(kMaxEpsPerPass, eps.size() - off);
      detail::PerturbedSearch<Score, R> s{t, eps.subspan(off, m), rng};
      s.reset();
      typename detail::PerturbedSearch<Score, R>::Partial ones;
      ones.fill(Score{1});
      s.descend(0, 0, ones);
      for (std::size_t k = 0; k < m; ++k) {
        hits[off + k] += s.best_leaf[k] == target ? 1 : 0;
        neg[off + k] += s.negative[k] ? 1 : 0;
      }
    }
  }
  for (std::size_t k = 0; k < eps.size(); ++k) {
    out[k].f = static_cast<double>(hits[k]) / trials;
    out[k].negative_fraction = static_cast<double>(neg[k]) / trials;
  }
  return out;
}

template <UniformSource R>
EpsOutcome perturb_and_classify(const LetterTree& t, double eps, int trials, R& rng) {
  const double e[1] = {eps};
  return perturb_and_classify(t, std::span<const double>(e), trials, rng).front();
}

struct SweepConfig {
  std::vector<int> depths = {3, 5, 7, 9};
  std::vector<int> breadths = {2, 3, 4, 5, 6};
  std::vector<double> eps = {0.01, 0.02, 0.04, 0.08, 0.16, 0.32};
  int models = 100;  // per topology
  int trials = 400;  // per model
  std::uint64_t path_budget = kDefaultPathBudget;
};

struct SweepRow {
  int depth = 0;  // 0 marks the column-means row
  double eps = 0.0;
  double mean_f_percent = 0.0;
  double sd_percent = 0.0;
  int models = 0;
  double negative_fraction = 0.0;

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct Topology {
  int depth = 0;
  int breadth = 0;
};

struct SweepTable {
  std::vector<double> eps;
  std::vector<SweepRow> rows;            // depth-major, eps-minor, then means
  std::vector<Topology> skipped;         // over the path budget
  // Per-model F values, [topology index][model][eps], for finer analysis.
  std::vector<Topology> topologies;
  std::vector<std::vector<std::vector<double>>> model_f;

  [[nodiscard]] const SweepRow& at(int depth, double e) const {
    for (const auto& r : rows)
      if (r.depth == depth && std::fabs(r.eps - e) < 1e-12) return r;
    throw std::out_of_range("no sweep row for that depth and eps");
  }
};

namespace detail {
inline void mean_sd(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}
}  // namespace detail

// Table of F (percent) by depth and eps, pooled over every breadth and
// model. Each (depth, breadth, model) is a work unit on its own stream.
inline SweepTable sweep(const SweepConfig& cfg, std::uint32_t seed, int jobs = 1) {
  if (cfg.depths.empty() || cfg.breadths.empty() || cfg.eps.empty())
    throw std::invalid_argument("sweep grids must be non-empty");
  if (cfg.models < 1 || cfg.trials < 1)
    throw std::invalid_argument("models and trials must be >= 1");

  SweepTable out;
  out.eps = cfg.eps;
  for (int d : cfg.depths)
    for (int b : cfg.breadths) {
      if (d < 1 || b < 2) throw std::invalid_argument("depth >= 1 and breadth >= 2 required");
      const auto paths = path_count(d, b);
      if (paths == 0 || paths > cfg.path_budget)
        out.skipped.push_back({d, b});
      else
        out.topologies.push_back({d, b});
    }

  const auto models = static_cast<std::size_t>(cfg.models);
  out.model_f.assign(out.topologies.size(),
                     std::vector<std::vector<double>>(models, std::vector<double>(cfg.eps.size())));
  std::vector<std::vector<double>> model_neg(out.topologies.size() * models);

  // Largest trees first so the pool finishes evenly.
  std::vector<std::size_t> order(out.topologies.size() * models);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ta = out.topologies[a / models];
    const auto& tb = out.topologies[b / models];
    return path_count(ta.depth, ta.breadth) > path_count(tb.depth, tb.breadth);
  });

  parallel_for(order.size(), jobs, [&](std::size_t i) {
    const std::size_t u = order[i];
    const auto& topo = out.topologies[u / models];
    const std::size_t m = u % models;
    Rand48 rng = derived_stream(seed, {static_cast<std::uint64_t>(topo.depth),
                                       static_cast<std::uint64_t>(topo.breadth), m});
    const LetterTree tree = generate_tree(topo.depth, topo.breadth, rng, cfg.path_budget);
    const auto res = perturb_and_classify(tree, std::span<const double>(cfg.eps), cfg.trials, rng);
    auto& f = out.model_f[u / models][m];
    auto& neg = model_neg[u];
    neg.resize(cfg.eps.size());
    for (std::size_t k = 0; k < res.size(); ++k) {
      f[k] = res[k].f;
      neg[k] = res[k].negative_fraction;
    }
  });

  auto summarize = [&](int depth_key, auto&& include) {
    for (std::size_t k = 0; k < cfg.eps.size(); ++k) {
      std::vector<double> fs;
      double negsum = 0.0;
      for (std::size_t ti = 0; ti < out.topologies.size(); ++ti) {
        if (!include(out.topologies[ti])) continue;
        for (std::size_t m = 0; m < models; ++m) {
          fs.push_back(100.0 * out.model_f[ti][m][k]);
          negsum += model_neg[ti * models + m][k];
        }
      }
      if (fs.empty()) continue;
      SweepRow r;
      r.depth = depth_key;
      r.eps = cfg.eps[k];
      detail::mean_sd(fs, r.mean_f_percent, r.sd_percent);
      r.models = static_cast<int>(fs.size());
      r.negative_fraction = negsum / static_cast<double>(fs.size());
      out.rows.push_back(r);
    }
  };
  for (int d : cfg.depths) summarize(d, [d](const Topology& t) { return t.depth == d; });
  summarize(0, [](const Topology&) { return true; });
  return out;
}

inline csv::Table to_csv(const SweepTable& t) {
  csv::Table out;
  out.header = {"d", "eps", "mean_F_percent", "sd_percent", "models", "negative_fraction"};
  for (const auto& r : t.rows)
    out.rows.push_back({r.depth == 0 ? std::string("m") : csv::format_number(r.depth),
                        csv::format_number(r.eps), csv::format_number(r.mean_f_percent),
                        csv::format_number(r.sd_percent), csv::format_number(r.models),
                        csv::format_number(r.negative_fraction)});
  return out;
}

inline std::vector<SweepRow> rows_from_csv(const csv::Table& t) {
  const auto d = t.column("d"), e = t.column("eps"), f = t.column("mean_F_percent"),
             sd = t.column("sd_percent"), m = t.column("models"),
             neg = t.column("negative_fraction");
  std::vector<SweepRow> out;
  for (const auto& row : t.rows)
    out.push_back({row[d] == "m" ? 0 : static_cast<int>(csv::parse_int(row[d])),
                   csv::parse_double(row[e]), csv::parse_double(row[f]),
                   csv::parse_double(row[sd]), static_cast<int>(csv::parse_int(row[m])),
                   csv::parse_double(row[neg])});
  return out;
}

// Rows D=<depth> and a final "m" row; each eps column followed by its sd.
inline std::string format_table(const SweepTable& t) {
  std::ostringstream os;
  os << std::fixed;
  os << std::left << std::setw(8) << "D \\ eps" << std::right;
  for (double e : t.eps) os << std::setw(8) << std::setprecision(2) << e << std::setw(6) << "sd";
  os << '\n';
  int current = -1;
  for (const auto& r : t.rows) {
    if (r.depth != current) {
      if (current != -1) os << '\n';
      current = r.depth;
      os << std::left << std::setw(8) << (r.depth == 0 ? std::string("m") : "D=" + std::to_string(r.depth))
         << std::right;
    }
    os << std::setw(8) << std::setprecision(1) << r.mean_f_percent << std::setw(6)
       << std::setprecision(1) << r.sd_percent;
  }
  os << '\n';
  for (const auto& s : t.skipped)
    os << "# skipped d=" << s.depth << " b=" << s.breadth << " (over path budget)\n";
  return os.str();
}

}  // namespace probchain::tree
