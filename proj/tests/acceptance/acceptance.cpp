// Acceptance checks, one PASS/FAIL line per criterion.
//   acceptance            run all
//   acceptance 3 7        run the listed ones
// Exit status is nonzero if any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include "probchain/probchain.hpp"
#include "probchain/cli.hpp"
#include "reference_table.hpp"

using namespace probchain;
namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kSeed = 1;

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (detail.tellp() > 0) detail << "; ";
    detail << what << (ok ? "" : " [miss]");
  }
};

std::string fmt(double v, int prec = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cores() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

void near(Verdict& v, const std::string& label, double got, double want, double tol) {
  v.check(std::fabs(got - want) <= tol,
          label + " " + fmt(got) + " vs " + fmt(want, 2) + "+-" + fmt(tol, 3));
}

// errprop: desk cells, desk runtime, then the full paper-size grid.
Verdict criterion1() {
  Verdict v;
  chain::TableOptions desk;
  desk.samples = 10000;
  desk.repetitions = 5;
  const auto t0 = std::chrono::steady_clock::now();
  const auto t = chain::error_table(NoiseFamily::uniform, true, desk, kSeed, cores());
  const double secs = seconds_since(t0);
  near(v, "desk e=0.06 n=13", t.value(t.row_of(0.06), t.col_of(13)), 0.3, 0.15);
  near(v, "desk e=0.30 n=9", t.value(t.row_of(0.30), t.col_of(9)), 0.9, 0.15);
  near(v, "desk e=0.30 n=21", t.value(t.row_of(0.30), t.col_of(21)), 1.3, 0.15);
  v.check(secs < 120.0, "desk grid " + fmt(secs, 1) + " s");

  const auto full = chain::error_table(NoiseFamily::uniform, true, chain::TableOptions{},
                                          kSeed, cores());
  int good = 0;
  for (int r = 0; r < reference::kRows; ++r)
    for (int c = 0; c < reference::kCols; ++c)
      if (std::fabs(full.value(r, c) - reference::kTruncatedUniform[r][c]) <= 0.1 + 1e-9) ++good;
  const int cells = reference::kRows * reference::kCols;
  v.check(good >= 0.9 * cells,
          "paper grid " + std::to_string(good) + "/" + std::to_string(cells) + " cells within 0.1");
  return v;
}

double cell(NoiseFamily f, bool truncated, int n, double e, std::size_t samples = 10000,
            int reps = 5) {
  chain::ChainSpec s;
  s.n = n;
  s.noise.family = f;
  s.noise.truncated = truncated;
  s.samples = samples;
  s.repetitions = reps;
  s.amplitude_step = e;
  s.amplitude_count = 2;
  return chain::relative_error_mc(s, kSeed, cores()).points[1].mean_rel_error;
}

Verdict criterion2() {
  Verdict v;
  near(v, "e=0.07 n=13", cell(NoiseFamily::gaussian, false, 13, 0.07), 0.2, 0.1);
  near(v, "e=0.30 n=9", cell(NoiseFamily::gaussian, false, 9, 0.30), 0.5, 0.1);
  near(v, "e=0.30 n=21", cell(NoiseFamily::gaussian, false, 21, 0.30), 0.9, 0.15);
  return v;
}

Verdict criterion3() {
  Verdict v;
  near(v, "n=10", cell(NoiseFamily::uniform, false, 10, 0.30), 1.0, 0.15);
  near(v, "n=20", cell(NoiseFamily::uniform, false, 20, 0.30), 2.0, 0.3);
  return v;
}

// -sum ln p over U(0,1] is Gamma(n, 1): mean n, variance n.
Verdict criterion4() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  for (int n : {1, 5, 20}) {
    const auto s = cpoiss::sample_sumlog_parallel(n, 0.0, 1.0, 1000000, kSeed, cores());
    const auto m = cpoiss::sample_moments(s.values);
    near(v, "n=" + std::to_string(n) + " mean", m.mean, n, 3.0 * std::sqrt(n) / 1000.0);
    near(v, "variance", m.variance, n, 0.05 * n);
  }
  const double secs = seconds_since(t0);
  v.check(secs < 30.0, fmt(secs, 1) + " s");
  return v;
}

Verdict criterion5() {
  Verdict v;
  std::vector<cpoiss::SumLogSample> samples;
  std::vector<double> lambdas;
  for (int l : {11, 21, 31, 41}) {
    samples.push_back(cpoiss::sample_sumlog_parallel(l, 0.0, 0.84, 1000000, kSeed, cores()));
    lambdas.push_back(l);
  }
  const auto fit = cpoiss::fit_cpoiss_shared(samples, lambdas);
  v.detail << "shared x_scale " << fmt(fit.x_scale, 4);
  for (std::size_t i = 0; i < fit.fits.size(); ++i)
    v.check(fit.fits[i].reduced_chi_square < 3.0,
            "lambda " + fmt(lambdas[i], 0) + " reduced chi2 " + fmt(fit.fits[i].reduced_chi_square, 2));
  return v;
}

Verdict criterion6() {
  Verdict v;
  tree::SweepConfig cfg;
  cfg.models = 25;
  cfg.trials = 100;
  const auto t0 = std::chrono::steady_clock::now();
  const auto table = tree::sweep(cfg, kSeed, cores());
  const double secs = seconds_since(t0);
  near(v, "D=3 eps=0.01", table.at(3, 0.01).mean_f_percent, 97.1, 3.0);
  near(v, "D=3 eps=0.02", table.at(3, 0.02).mean_f_percent, 93.6, 3.0);
  near(v, "D=3 eps=0.32", table.at(3, 0.32).mean_f_percent, 35.8, 3.0);

  bool mono_eps = true, mono_depth = true;
  for (int d : cfg.depths)
    for (std::size_t e = 1; e < cfg.eps.size(); ++e)
      mono_eps &= table.at(d, cfg.eps[e]).mean_f_percent < table.at(d, cfg.eps[e - 1]).mean_f_percent;
  for (double e : cfg.eps)
    for (std::size_t d = 1; d < cfg.depths.size(); ++d)
      mono_depth &= table.at(cfg.depths[d], e).mean_f_percent <
                    table.at(cfg.depths[d - 1], e).mean_f_percent;
  v.check(mono_eps, "F falls with eps");
  v.check(mono_depth, "F falls with depth");
  v.check(secs < 600.0, fmt(secs, 1) + " s");
  if (!table.skipped.empty()) {
    v.detail << "; over path budget:";
    for (const auto& s : table.skipped) v.detail << " d=" << s.depth << ",b=" << s.breadth;
  }
  return v;
}

// Random words over a four-letter alphabet, so anagram classes are large.
lexicon::Lexicon anagram_heavy() {
  Rand48 r(99);
  std::vector<std::string> words;
  for (int i = 0; i < 6000; ++i) {
    std::string w;
    const int len = 3 + static_cast<int>(r.next_uniform() * 4);
    for (int k = 0; k < len; ++k) w += "abcd"[static_cast<int>(r.next_uniform() * 4)];
    words.push_back(w);
  }
  return lexicon::make_lexicon("synthetic-abcd", words);
}

Verdict criterion7() {
  Verdict v;
  const auto natural =
      lexicon::load_lexicon(std::string(PROBCHAIN_TEST_DATA) + "/web2-quarter.txt");
  const auto synthetic = anagram_heavy();
  struct Case {
    const lexicon::Lexicon* lex;
    std::size_t sample;
  };
  for (const Case c : {Case{&natural, 20000}, Case{&synthetic, 5000}}) {
    int within = 0;
    double worst = 0.0, mean_acc = 0.0;
    for (std::uint32_t seed = 1; seed <= 10; ++seed) {
      const auto res = lexicon::run_experiment(*c.lex, {1, c.sample, 0.0001}, seed, cores());
      const double acc = res.accuracy[0], oracle = res.oracle[0];
      const double se = lexicon::binomial_se(oracle, c.sample);
      const double z = se > 0.0 ? std::fabs(acc - oracle) / se : (acc == oracle ? 0.0 : 1e9);
      worst = std::max(worst, z);
      within += z <= 3.0;
      mean_acc += acc / 10.0;
    }
    v.check(within == 10, c.lex->name + " (" + std::to_string(c.lex->size()) + " words, sample " +
                              std::to_string(c.sample) + "): " + std::to_string(within) +
                              "/10 seeds within 3 SE, worst |z| " + fmt(worst, 2));
    if (c.lex == &natural)
      v.check(natural.size() >= 30000 && mean_acc > 0.90 && mean_acc < 0.999,
              "mean accuracy " + fmt(100.0 * mean_acc, 2) + "% in 90..99.9");
  }
  return v;
}

Verdict criterion8() {
  Verdict v;
  Rand48 r(8);
  double worst = 0.0;
  for (std::size_t k = 1; k <= 4; ++k)
    for (std::size_t T = 1; T <= 8; ++T)
      for (int rep = 0; rep < 3; ++rep) {
        auto row = [&](std::size_t n) {
          std::vector<double> x(n);
          double s = 0.0;
          for (auto& e : x) s += (e = r.next_uniform() + 1e-3);
          for (auto& e : x) e /= s;
          return x;
        };
        std::vector<std::vector<double>> A, B;
        for (std::size_t i = 0; i < k; ++i) A.push_back(row(k));
        for (std::size_t i = 0; i < k; ++i) B.push_back(row(3));
        // make_hmm wants exact row sums; fix the last entry
        auto fix = [](std::vector<double>& x) {
          double s = 0.0;
          for (std::size_t i = 0; i + 1 < x.size(); ++i) s += x[i];
          x.back() = 1.0 - s;
        };
        auto pi = row(k);
        fix(pi);
        for (auto& a : A) fix(a);
        for (auto& b : B) fix(b);
        const auto h = hmm::make_hmm(pi, A, B);
        hmm::Sequence seq(T);
        for (auto& o : seq) o = static_cast<hmm::Symbol>(r.next_uniform() * 3);

        double total = 0.0;
        std::vector<std::size_t> s(T);
        std::function<void(std::size_t, double)> rec = [&](std::size_t t, double p) {
          if (t == T) {
            total += p;
            return;
          }
          for (std::size_t i = 0; i < k; ++i) {
            s[t] = i;
            rec(t + 1, p * (t == 0 ? h.pi[i] : h.a(s[t - 1], i)) * h.b(i, seq[t]));
          }
        };
        rec(0, 1.0);
        worst = std::max(worst, std::fabs(hmm::forward_loglik(h, seq) - std::log(total)));
      }
  v.check(worst <= 1e-9, "forward vs path sum, worst " + [&] {
    char b[32];
    std::snprintf(b, sizeof b, "%.2e", worst);
    return std::string(b);
  }());

  const auto cycles = hmm::scenario("cycles");
  const auto rc = hmm::markov_necessity_test(cycles, hmm::generate_test_set(cycles, 12, 10000, kSeed), cores());
  v.check(rc.accuracy_true > 0.99 && std::fabs(rc.accuracy_flat - 0.5) < 0.02,
          "cycles " + fmt(rc.accuracy_true) + " -> " + fmt(rc.accuracy_flat) + " (chance 0.5)");
  const auto emission = hmm::scenario("emission");
  const auto re = hmm::markov_necessity_test(emission, hmm::generate_test_set(emission, 12, 10000, kSeed), cores());
  v.check(re.drop < 0.02, "emission drop " + fmt(re.drop, 4));
  return v;
}

std::map<std::string, std::string> csv_outputs(const fs::path& dir) {
  std::map<std::string, std::string> m;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".csv") continue;
    const std::string name = e.path().filename().string();
    std::ifstream f(e.path(), std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    m[name.substr(name.find('Z') + 1)] = s.str();
  }
  return m;
}

Verdict criterion9() {
  Verdict v;
  const std::string lex = std::string(PROBCHAIN_TEST_DATA) + "/web2-quarter.txt";
  const std::vector<std::vector<std::string>> runs{
      {"errprop", "--lengths", "1,7,21", "--samples", "2000", "--repetitions", "3", "--amplitudes", "6"},
      {"errprop", "--noise", "gaussian", "--truncated", "--lengths", "3,9", "--samples", "2000",
       "--repetitions", "2", "--amplitudes", "4"},
      {"cpoiss", "--samples", "70000"},
      {"treeclass", "--depths", "3,5", "--breadths", "2,4", "--models", "4", "--trials", "30"},
      {"lexnn", "--lexicon", lex, "--sample", "800", "--repeats", "3"},
      {"hmmflat", "--count", "300"}};
  const fs::path root = fs::temp_directory_path() / ("probchain-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(root);
  int k = 0;
  for (const auto& base : runs) {
    std::vector<std::map<std::string, std::string>> got;
    bool ok = true;
    for (const char* jobs : {"1", "1", "4", "4"}) {
      const fs::path dir = root / std::to_string(k++);
      auto args = base;
      args.insert(args.end(), {"--seed", "77", "--jobs", jobs, "--out-dir", dir.string()});
      std::ostringstream out, err;
      if (cli::main_entry(args, out, err) != cli::kExitOk) {
        ok = false;
        v.detail << "[" << base[0] << " failed: " << err.str() << "] ";
        break;
      }
      got.push_back(csv_outputs(dir));
    }
    if (ok) ok = !got[0].empty() && std::all_of(got.begin(), got.end(), [&](const auto& g) { return g == got[0]; });
    const std::size_t files = got.empty() ? 0 : got[0].size();
    v.check(ok, base[0] + " " + std::to_string(files) + " csv x4");
  }
  fs::remove_all(root);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Verdict()>> all{criterion1, criterion2, criterion3,
                                                  criterion4, criterion5, criterion6,
                                                  criterion7, criterion8, criterion9};
  std::vector<int> pick;
  for (int i = 1; i < argc; ++i) {
    const int id = std::atoi(argv[i]);
    if (id < 1 || id > static_cast<int>(all.size())) {
      std::cerr << "usage: acceptance [1-9 ...]\n";
      return 2;
    }
    pick.push_back(id);
  }
  if (pick.empty())
    for (int i = 1; i <= static_cast<int>(all.size()); ++i) pick.push_back(i);

  int failed = 0;
  for (int id : pick) {
    Verdict v;
    try {
      v = all[id - 1]();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "error: " << e.what();
    }
    failed += !v.pass;
    std::cout << "criterion " << id << ": " << (v.pass ? "PASS" : "FAIL") << " - " << v.detail.str()
              << std::endl;
  }
  return failed ? 1 : 0;
}
