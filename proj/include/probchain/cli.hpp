// Command-line front end: one subcommand per experiment, common seed /
// preset / output flags, flat key=value config files, and a manifest next to
// every output so a run can be repeated exactly.

#pragma once

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "probchain/chain_error.hpp"
#include "probchain/cpoisson.hpp"
#include "probchain/csv.hpp"
#include "probchain/hmm.hpp"
#include "probchain/lexicon_nn.hpp"
#include "probchain/rand48.hpp"
#include "probchain/tree_classifier.hpp"
#include "probchain/version.hpp"

namespace probchain::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

inline constexpr const char* kOutDirEnv = "PROBCHAIN_OUT_DIR";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string seed = "1";
  std::string preset = "desk";
  std::string out_dir;
  int jobs = 0;  // 0: one per hardware thread
  std::string config;
};

struct ErrpropOptions {
  std::string noise = "uniform";
  bool truncated = false;
  std::vector<int> lengths = chain::TableOptions{}.chain_lengths;
  std::optional<std::size_t> samples;
  std::optional<int> repetitions;
  double step = 0.01;
  int amplitudes = 31;
};

struct CpoissOptions {
  std::vector<int> lambdas = {11, 21, 31, 41};
  double pmin = 0.0;
  double pmax = 0.84;
  std::optional<std::size_t> samples;
  std::optional<double> bin_width;
  double scale_min = 0.02;
  double scale_max = 5.0;
};

struct TreeOptions {
  std::vector<int> depths = tree::SweepConfig{}.depths;
  std::vector<int> breadths = tree::SweepConfig{}.breadths;
  std::vector<double> eps = tree::SweepConfig{}.eps;
  std::optional<int> models;
  std::optional<int> trials;
  std::uint64_t path_budget = tree::kDefaultPathBudget;
};

struct LexOptions {
  std::string lexicon;
  std::optional<std::size_t> sample;
  std::size_t repeats = 6;
  double noise = 0.0001;
};

struct HmmOptions {
  std::vector<std::string> scenarios = hmm::scenario_names();
  std::vector<std::string> models;  // model files forming one extra class set
  std::size_t length = 12;
  std::optional<std::size_t> count;
  double backoff = 0.0;
};

struct Options {
  std::string subcommand;
  Common common;
  ErrpropOptions errprop;
  CpoissOptions cpoiss;
  TreeOptions tree;
  LexOptions lexnn;
  HmmOptions hmmflat;
};

namespace detail {

inline void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "32-bit seed, or 'time' for the clock in microseconds")
      ->capture_default_str();
  sub->add_option("--preset", c.preset, "sample sizes: desk (small) or paper (full)")
      ->check(CLI::IsMember({"desk", "paper"}))
      ->capture_default_str();
  sub->add_option("--out-dir", c.out_dir,
                  std::string("output directory (default $") + kOutDirEnv + " or .)");
  sub->add_option("--jobs", c.jobs, "worker threads, 0 = all cores; results do not depend on it")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sub->add_option("--config", c.config, "key=value file; command-line flags win")
      ->check(CLI::ExistingFile);
}

inline void build(CLI::App& app, Options& o) {
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  auto* ep = app.add_subcommand("errprop", "relative error of noisy probability products");
  add_common(ep, o.common);
  ep->add_option("--noise", o.errprop.noise, "uniform or gaussian")
      ->check(CLI::IsMember({"uniform", "gaussian"}))
      ->capture_default_str();
  ep->add_flag("--truncated", o.errprop.truncated, "clamp perturbed probabilities into [0,1]");
  ep->add_option("--lengths", o.errprop.lengths, "chain lengths")
      ->delimiter(',')
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ep->add_option("--samples", o.errprop.samples, "chains per repetition [desk 10000, paper 100000]")
      ->check(CLI::PositiveNumber);
  ep->add_option("--repetitions", o.errprop.repetitions, "repetitions per cell [desk 5, paper 20]")
      ->check(CLI::PositiveNumber);
  ep->add_option("--step", o.errprop.step, "amplitude step")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ep->add_option("--amplitudes", o.errprop.amplitudes, "number of amplitudes, from 0")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  auto* cp = app.add_subcommand("cpoiss", "sum-of-log histograms and continuous Poisson fit");
  add_common(cp, o.common);
  cp->add_option("--lambdas", o.cpoiss.lambdas, "chain lengths, one histogram each")
      ->delimiter(',')
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cp->add_option("--pmin", o.cpoiss.pmin, "lower end of the probability interval")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cp->add_option("--pmax", o.cpoiss.pmax, "upper end of the probability interval")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cp->add_option("--samples", o.cpoiss.samples, "values per histogram [desk 62500, paper 1000000]")
      ->check(CLI::PositiveNumber);
  cp->add_option("--bin-width", o.cpoiss.bin_width, "histogram bin width (default Freedman-Diaconis)")
      ->check(CLI::PositiveNumber);
  cp->add_option("--scale-min", o.cpoiss.scale_min, "lower end of the x_scale search")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cp->add_option("--scale-max", o.cpoiss.scale_max, "upper end of the x_scale search")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  auto* tc = app.add_subcommand("treeclass", "max-product path recovery in noisy trees");
  add_common(tc, o.common);
  tc->add_option("--depths", o.tree.depths, "tree depths")
      ->delimiter(',')
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  tc->add_option("--breadths", o.tree.breadths, "tree breadths")
      ->delimiter(',')
      ->check(CLI::Range(2, 1 << 20))
      ->capture_default_str();
  tc->add_option("--eps", o.tree.eps, "noise amplitudes")
      ->delimiter(',')
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  tc->add_option("--models", o.tree.models, "trees per topology [desk 25, paper 100]")
      ->check(CLI::PositiveNumber);
  tc->add_option("--trials", o.tree.trials, "noisy trials per tree [desk 100, paper 400]")
      ->check(CLI::PositiveNumber);
  tc->add_option("--path-budget", o.tree.path_budget, "skip topologies with more paths")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  auto* lx = app.add_subcommand("lexnn", "nearest-neighbor matching of letter-count vectors");
  add_common(lx, o.common);
  lx->add_option("--lexicon", o.lexnn.lexicon, "word list, UTF-8, one word per line (required)")
      ->check(CLI::ExistingFile);
  lx->add_option("--sample", o.lexnn.sample, "words per repeat [desk 1250, paper 20000]")
      ->check(CLI::PositiveNumber);
  lx->add_option("--repeats", o.lexnn.repeats, "independent samples")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  lx->add_option("--noise", o.lexnn.noise, "bipolar noise amplitude, below 1/124")
      ->check(CLI::Range(0.0, lexicon::kMaxNoise - 1e-15))
      ->capture_default_str();

  auto* hf = app.add_subcommand("hmmflat", "does flattening the transition matrix hurt?");
  add_common(hf, o.common);
  hf->add_option("--scenarios", o.hmmflat.scenarios, "built-in class pairs: cycles, emission, mixed")
      ->delimiter(',')
      ->check(CLI::IsMember(hmm::scenario_names()))
      ->capture_default_str();
  hf->add_option("--models", o.hmmflat.models, "model files, one class each (at least two)")
      ->delimiter(',')
      ->check(CLI::ExistingFile);
  hf->add_option("--length", o.hmmflat.length, "symbols per sequence")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  hf->add_option("--count", o.hmmflat.count, "test sequences per class set [desk 625, paper 10000]")
      ->check(CLI::PositiveNumber);
  hf->add_option("--backoff", o.hmmflat.backoff, "floor for zero probabilities, 0 = off")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// Flat key=value pairs. Blank lines and '#' lines are skipped; a key may
// appear only once.
inline std::vector<std::pair<std::string, std::string>> read_config(std::istream& is) {
  std::vector<std::pair<std::string, std::string>> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(lineno) + ": expected key=value");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw UsageError("config line " + std::to_string(lineno) + ": empty key");
    for (const auto& [k, v] : kv)
      if (k == key) throw UsageError("config key '" + key + "' given twice");
    kv.emplace_back(std::move(key), std::move(value));
  }
  return kv;
}

inline std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file '" + path + "'");
  return read_config(in);
}

inline std::uint32_t resolve_seed(const std::string& text) {
  if (text == "time" || text == "time-microseconds") {
    const auto us = std::chrono::duration_cast<std::chrono::microseconds>(
                        std::chrono::system_clock::now().time_since_epoch())
                        .count();
    return static_cast<std::uint32_t>(static_cast<std::uint64_t>(us));
  }
  std::uint64_t v = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size() || v > 0xFFFFFFFFull)
    throw UsageError("--seed must be an integer in [0, 4294967295] or 'time'");
  return static_cast<std::uint32_t>(v);
}

struct Parsed {
  int status = -1;  // -1: go ahead and run; otherwise exit with this
  Options options;
};

// Two passes: the first finds the subcommand and the config file; config
// keys are then appended as --key=value for options the command line left
// unset, and everything is parsed again from scratch.
inline Parsed parse_args(const std::vector<std::string>& args, std::ostream& out,
                         std::ostream& err) {
  Parsed p;
  auto attempt = [&](const std::vector<std::string>& tokens, Options& o, CLI::App& app) {
    detail::build(app, o);
    std::vector<std::string> rev(tokens.rbegin(), tokens.rend());
    app.parse(rev);
    o.subcommand = app.get_subcommands().front()->get_name();
  };
  auto usage = [&](const std::string& msg) {
    err << "probchain: " << msg << "\nRun with --help for more information.\n";
    p.status = kExitUsage;
    return p;
  };

  constexpr const char* kTitle = "Error propagation in products of probabilities";
  std::vector<std::string> tokens = args;
  Options first;
  CLI::App app1{kTitle, "probchain"};
  CLI::App app2{kTitle, "probchain"};
  CLI::App* active = &app1;
  try {
    attempt(tokens, first, app1);
    if (!first.common.config.empty()) {
      CLI::App* sub = app1.get_subcommand(first.subcommand);
      for (const auto& [key, value] : read_config_file(first.common.config)) {
        if (key == "config") throw UsageError("config files cannot include other configs");
        CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (opt == nullptr)
          throw UsageError("unknown config key '" + key + "' for " + first.subcommand);
        if (opt->count() == 0) tokens.push_back("--" + key + "=" + value);
      }
    }
    active = &app2;
    attempt(tokens, p.options, app2);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help, --version
      active->exit(e, out, err);
      p.status = kExitOk;
      return p;
    }
    return usage(e.what());
  } catch (const UsageError& e) {
    return usage(e.what());
  }

  try {
    resolve_seed(p.options.common.seed);
  } catch (const UsageError& e) {
    return usage(e.what());
  }
  if (p.options.subcommand == "lexnn" && p.options.lexnn.lexicon.empty())
    return usage("lexnn requires --lexicon <path>");
  if (p.options.subcommand == "hmmflat" && p.options.hmmflat.models.size() == 1)
    return usage("--models needs at least two model files");
  if (p.options.subcommand == "cpoiss" && !(p.options.cpoiss.pmin < p.options.cpoiss.pmax))
    return usage("--pmin must be below --pmax");
  if (p.options.subcommand == "cpoiss" &&
      !(p.options.cpoiss.scale_min < p.options.cpoiss.scale_max))
    return usage("--scale-min must be below --scale-max");
  return p;
}

namespace detail {

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    if constexpr (std::is_same_v<T, std::string>)
      s += v[i];
    else
      s += csv::format_number(v[i]);
  }
  return s;
}

inline std::string utc_stamp(std::chrono::system_clock::time_point t, const char* fmt) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, fmt);
  return os.str();
}

using Params = std::vector<std::pair<std::string, std::string>>;

// Collects the files of one run under a common stem.
class RunOutput {
 public:
  RunOutput(const std::filesystem::path& dir, const std::string& sub, std::uint32_t seed,
            std::chrono::system_clock::time_point started) {
    std::filesystem::create_directories(dir);
    const std::string base =
        sub + "-" + std::to_string(seed) + "-" + utc_stamp(started, "%Y%m%dT%H%M%SZ");
    stem_ = dir / base;
    for (int k = 2; std::filesystem::exists(path(".csv")); ++k)
      stem_ = dir / (base + "-" + std::to_string(k));
  }

  std::filesystem::path path(const std::string& suffix) const {
    return std::filesystem::path(stem_.string() + suffix);
  }

  void write(const std::string& suffix, const std::string& content) {
    const auto p = path(suffix);
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << content;
    if (!f) throw std::runtime_error("write failed for " + p.string());
    files_.push_back(p);
  }

  void write_csv(const std::string& suffix, const csv::Table& t) { write(suffix, csv::to_string(t)); }

  const std::vector<std::filesystem::path>& files() const { return files_; }

 private:
  std::filesystem::path stem_;
  std::vector<std::filesystem::path> files_;
};

inline bool paper(const Common& c) { return c.preset == "paper"; }

inline Params common_params(const Common& c, std::uint32_t seed, int jobs) {
  return {{"seed", std::to_string(seed)}, {"preset", c.preset}, {"jobs", std::to_string(jobs)}};
}

inline Params run_errprop(const Options& o, std::uint32_t seed, int jobs, RunOutput& out,
                          std::ostream& log) {
  const auto& e = o.errprop;
  chain::GridOptions g;
  g.family = parse_noise_family(e.noise);
  g.truncated = e.truncated;
  g.chain_lengths = e.lengths;
  g.samples = e.samples.value_or(paper(o.common) ? 100000 : 10000);
  g.repetitions = e.repetitions.value_or(paper(o.common) ? 20 : 5);
  g.amplitude_step = e.step;
  g.amplitude_count = e.amplitudes;

  const auto curves = chain::run_grid(g, seed, jobs);
  out.write_csv(".csv", chain::to_csv(curves));
  const std::string table = chain::format_table(chain::table_from_curves(curves));
  out.write("-table.txt", "# noise=" + e.noise + (e.truncated ? " truncated" : "") + "\n" + table);
  for (const auto& c : curves) out.write("-n" + std::to_string(c.n) + ".dat", chain::format_plot_data(c));
  log << table;

  return {{"noise", e.noise},
          {"truncated", e.truncated ? "true" : "false"},
          {"lengths", join(g.chain_lengths)},
          {"samples", std::to_string(g.samples)},
          {"repetitions", std::to_string(g.repetitions)},
          {"step", csv::format_number(g.amplitude_step)},
          {"amplitudes", std::to_string(g.amplitude_count)}};
}

inline Params run_cpoiss(const Options& o, std::uint32_t seed, int jobs, RunOutput& out,
                         std::ostream& log) {
  const auto& c = o.cpoiss;
  const std::size_t count = c.samples.value_or(paper(o.common) ? 1000000 : 62500);
  std::vector<cpoiss::SumLogSample> samples;
  std::vector<double> lambdas;
  for (int n : c.lambdas) {
    samples.push_back(cpoiss::sample_sumlog_parallel(n, c.pmin, c.pmax, count, seed, jobs, c.bin_width));
    lambdas.push_back(n);
  }
  const auto fit = cpoiss::fit_cpoiss_shared(samples, lambdas, {c.scale_min, c.scale_max});

  csv::Table summary;
  summary.header = {"lambda", "samples", "x_scale", "x_shift", "norm", "chi_square",
                    "dof", "reduced_chi_square", "mean", "variance", "model_mode"};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& f = fit.fits[i];
    const auto mom = cpoiss::sample_moments(samples[i].values);
    summary.rows.push_back({csv::format_number(c.lambdas[i]), std::to_string(count),
                            csv::format_number(f.model.x_scale), csv::format_number(f.model.x_shift),
                            csv::format_number(f.model.norm), csv::format_number(f.chi_square),
                            csv::format_number(f.dof), csv::format_number(f.reduced_chi_square),
                            csv::format_number(mom.mean), csv::format_number(mom.variance),
                            csv::format_number(cpoiss::model_mode(f.model))});
    out.write_csv("-hist-lambda" + std::to_string(c.lambdas[i]) + ".csv",
                  cpoiss::histogram_csv(samples[i], f.model));
    log << "lambda " << c.lambdas[i] << ": mean " << mom.mean << ", variance " << mom.variance
        << ", reduced chi-square " << f.reduced_chi_square << '\n';
  }
  out.write_csv(".csv", summary);
  log << "shared x_scale " << fit.x_scale << '\n';

  Params p{{"lambdas", join(c.lambdas)},
           {"pmin", csv::format_number(c.pmin)},
           {"pmax", csv::format_number(c.pmax)},
           {"samples", std::to_string(count)},
           {"scale-min", csv::format_number(c.scale_min)},
           {"scale-max", csv::format_number(c.scale_max)}};
  if (c.bin_width) p.emplace_back("bin-width", csv::format_number(*c.bin_width));
  return p;
}

inline Params run_treeclass(const Options& o, std::uint32_t seed, int jobs, RunOutput& out,
                            std::ostream& log) {
  const auto& t = o.tree;
  tree::SweepConfig cfg;
  cfg.depths = t.depths;
  cfg.breadths = t.breadths;
  cfg.eps = t.eps;
  cfg.models = t.models.value_or(paper(o.common) ? 100 : 25);
  cfg.trials = t.trials.value_or(paper(o.common) ? 400 : 100);
  cfg.path_budget = t.path_budget;

  const auto table = tree::sweep(cfg, seed, jobs);
  out.write_csv(".csv", tree::to_csv(table));
  const std::string text = tree::format_table(table);
  out.write("-table.txt", text);
  log << text;

  return {{"depths", join(cfg.depths)},
          {"breadths", join(cfg.breadths)},
          {"eps", join(cfg.eps)},
          {"models", std::to_string(cfg.models)},
          {"trials", std::to_string(cfg.trials)},
          {"path-budget", std::to_string(cfg.path_budget)}};
}

inline Params run_lexnn(const Options& o, std::uint32_t seed, int jobs, RunOutput& out,
                        std::ostream& log) {
  const auto& l = o.lexnn;
  const auto lex = lexicon::load_lexicon(l.lexicon);
  lexicon::ExperimentOptions opt;
  opt.repeats = l.repeats;
  opt.sample_size = l.sample.value_or(paper(o.common) ? 20000 : 1250);
  opt.noise = l.noise;
  const auto res = lexicon::run_experiment(lex, opt, seed, jobs);
  out.write_csv(".csv", lexicon::to_csv(std::span(&res, 1)));
  log << lex.name << ": " << lex.size() << " words, " << lex.class_count << " anagram classes";
  if (lex.skipped) log << ", " << lex.skipped << " lines skipped";
  log << "\naccuracy " << 100.0 * res.mean << "% (sd " << 100.0 * res.sd << "), oracle "
      << 100.0 * res.oracle_mean << "%\n";

  return {{"lexicon", l.lexicon},
          {"sample", std::to_string(opt.sample_size)},
          {"repeats", std::to_string(opt.repeats)},
          {"noise", csv::format_number(opt.noise)}};
}

inline Params run_hmmflat(const Options& o, std::uint32_t seed, int jobs, RunOutput& out,
                          std::ostream& log) {
  const auto& h = o.hmmflat;
  const std::size_t count = h.count.value_or(paper(o.common) ? 10000 : 625);
  std::vector<std::pair<std::string, std::vector<hmm::DiscreteHmm>>> sets;
  for (const auto& s : h.scenarios) sets.emplace_back(s, hmm::scenario(s));
  if (!h.models.empty()) {
    std::vector<hmm::DiscreteHmm> ms;
    for (const auto& f : h.models) ms.push_back(hmm::load_model(f));
    sets.emplace_back("files", std::move(ms));
  }
  if (sets.empty()) throw std::invalid_argument("no model sets to test");

  std::vector<hmm::NecessityReport> reports;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const auto& [name, models] = sets[i];
    const auto test = hmm::generate_test_set(models, h.length, count, derive_seed(seed, {i}));
    auto r = hmm::markov_necessity_test(models, test, jobs, h.backoff);
    r.model_set = name;
    log << name << ": accuracy " << r.accuracy_true << " -> " << r.accuracy_flat
        << " when flattened\n";
    reports.push_back(std::move(r));
  }
  out.write_csv(".csv", hmm::to_csv(reports));

  Params p{{"scenarios", join(h.scenarios)},
           {"length", std::to_string(h.length)},
           {"count", std::to_string(count)},
           {"backoff", csv::format_number(h.backoff)}};
  if (!h.models.empty()) p.emplace_back("models", join(h.models));
  return p;
}

}  // namespace detail

struct RunResult {
  int status = kExitOk;
  std::vector<std::filesystem::path> files;  // manifest last
};

inline RunResult run(const Options& o, std::ostream& log, std::ostream& err) {
  RunResult res;
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const std::uint32_t seed = resolve_seed(o.common.seed);
    int jobs = o.common.jobs;
    if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

    std::filesystem::path dir = o.common.out_dir;
    if (dir.empty()) {
      const char* env = std::getenv(kOutDirEnv);
      dir = (env && *env) ? env : ".";
    }
    detail::RunOutput out(dir, o.subcommand, seed, started);

    detail::Params params = detail::common_params(o.common, seed, jobs);
    detail::Params specific;
    if (o.subcommand == "errprop") specific = detail::run_errprop(o, seed, jobs, out, log);
    else if (o.subcommand == "cpoiss") specific = detail::run_cpoiss(o, seed, jobs, out, log);
    else if (o.subcommand == "treeclass") specific = detail::run_treeclass(o, seed, jobs, out, log);
    else if (o.subcommand == "lexnn") specific = detail::run_lexnn(o, seed, jobs, out, log);
    else if (o.subcommand == "hmmflat") specific = detail::run_hmmflat(o, seed, jobs, out, log);
    else throw std::logic_error("unhandled subcommand " + o.subcommand);
    params.insert(params.end(), specific.begin(), specific.end());

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream m;
    m << "# probchain " << kVersion << '\n'
      << "# subcommand " << o.subcommand << '\n'
      << "# created " << detail::utc_stamp(started, "%Y-%m-%dT%H:%M:%SZ") << '\n'
      << "# runtime_seconds " << std::fixed << std::setprecision(3) << secs << '\n'
      << "# rerun: probchain " << o.subcommand << " --config <this file>\n";
    for (const auto& [k, v] : params) m << k << '=' << v << '\n';
    out.write(".manifest", m.str());

    res.files = out.files();
    for (const auto& f : res.files) log << "wrote " << f.string() << '\n';
  } catch (const std::exception& e) {
    err << "probchain " << o.subcommand << ": " << e.what() << '\n';
    res.status = kExitFailure;
  }
  return res;
}

inline int main_entry(const std::vector<std::string>& args, std::ostream& out = std::cout,
                      std::ostream& err = std::cerr) {
  const Parsed p = parse_args(args, out, err);
  if (p.status >= 0) return p.status;
  return run(p.options, out, err).status;
}

inline int main_entry(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return main_entry(args);
}

}  // namespace probchain::cli
