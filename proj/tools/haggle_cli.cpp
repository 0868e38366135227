// Command-line front end: batch experiments, method comparison, built-in
// oracle checks, and trace replay.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "haggle/experiment.hpp"

namespace fs = std::filesystem;
using namespace haggle;

namespace {

void print_summary(const std::vector<ExperimentResult>& results, std::ostream& os) {
  std::ostringstream ss;
  write_summary_csv(results, ss);
  // render the CSV as a fixed-width table
  std::string line;
  std::istringstream in(ss.str());
  while (std::getline(in, line)) {
    std::istringstream cells(line);
    std::string cell;
    bool first = true;
    while (std::getline(cells, cell, ',')) {
      os << (first ? "" : "  ");
      os.width(first ? 18 : 12);
      os << cell;
      first = false;
    }
    os << '\n';
  }
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<std::string> out_dir, int trace_sessions) {
  ExperimentConfig config = load_config(config_path);
  if (seed) config.master_seed = *seed;
  if (out_dir) config.output_dir = *out_dir;
  if (trace_sessions > 0) config.trace_sessions = trace_sessions;
  ExperimentResult res = run_experiment(config);
  write_outputs(res, config.output_dir);
  print_summary({res}, std::cout);
  std::cout << "outputs written to " << config.output_dir << '\n';
  return 0;
}

int cmd_compare(std::optional<std::string> config_path, bool paper_scale,
                std::optional<std::uint64_t> seed, std::optional<std::string> out_dir,
                std::optional<int> customers, std::optional<int> runs,
                std::optional<int> n) {
  ExperimentConfig base =
      config_path ? load_config(*config_path)
                  : (paper_scale ? ExperimentConfig{} : ExperimentConfig::desk_scale());
  if (seed) base.master_seed = *seed;
  if (out_dir) base.output_dir = *out_dir;
  if (customers) base.num_customers = *customers;
  if (runs) base.num_distributions = *runs;
  if (n) base.n = *n;
  base.validate();

  std::vector<ExperimentResult> results;
  for (Method m : {Method::mu, Method::s, Method::b}) {
    for (StrategyKind strat : {StrategyKind::tdf, StrategyKind::tftm}) {
      ExperimentConfig config = base;
      config.method = m;
      config.customer_strategy = strat;
      std::cerr << "running " << method_name(m) << "/" << strategy_name(strat) << "...\n";
      ExperimentResult res = run_experiment(config);
      std::string combo = std::string(method_name(m)) + "_" + strategy_name(strat);
      write_outputs(res, (fs::path(base.output_dir) / combo).string());
      results.push_back(std::move(res));
    }
  }
  fs::create_directories(base.output_dir);
  std::ofstream f(fs::path(base.output_dir) / "summary.csv");
  write_summary_csv(results, f);
  print_summary(results, std::cout);
  std::cout << "outputs written to " << base.output_dir << '\n';
  return 0;
}

// ---- oracle-check: brute-force and hand-computed cross-checks ------------
// These checks are written independently of the library internals they
// verify: bundle enumeration by subset recursion, valuations by direct
// polynomial evaluation, Pareto properties from first principles.

int failures = 0;

void check(bool ok, const std::string& name) {
  std::cout << (ok ? "ok   " : "FAIL ") << name << '\n';
  if (!ok) ++failures;
}

void oracle_bundles() {
  for (int n = 1; n <= 6; ++n) {
    // enumerate subsets by recursion, independent of all_bundles
    std::vector<std::uint32_t> subsets{0};
    for (int i = 0; i < n; ++i) {
      const std::size_t sz = subsets.size();
      for (std::size_t s = 0; s < sz; ++s) subsets.push_back(subsets[s] | (1u << i));
    }
    std::set<std::uint32_t> nonempty(subsets.begin(), subsets.end());
    nonempty.erase(0u);
    auto bundles = all_bundles(n);
    std::set<std::uint32_t> got;
    for (const auto& b : bundles) got.insert(b.bits());
    check(got == nonempty && bundles.size() == nonempty.size(),
          "all_bundles covers every nonempty subset, n=" + std::to_string(n));
  }
  Bundle b = Bundle::from_goods({0, 2}, 4);
  std::set<std::uint32_t> expect;
  for (const auto& other : all_bundles(4))
    if (std::popcount(other.bits() ^ b.bits()) == 1) expect.insert(other.bits());
  std::set<std::uint32_t> got;
  for (const auto& nb : neighborhood(b)) got.insert(nb.bits());
  check(got == expect, "neighborhood matches Hamming-1 scan");
}

double direct_polynomial(const CoefficientLayout& layout, const Eigen::VectorXd& a,
                         std::uint32_t bits) {
  // constant + sum over set goods + pairwise + triple products
  double v = a[0];
  int idx = 1;
  for (int i = 0; i < layout.n; ++i, ++idx)
    if ((bits >> i) & 1u) v += a[idx];
  for (int i = 0; i < layout.n; ++i)
    for (int j = i + 1; j < layout.n; ++j, ++idx)
      if (((bits >> i) & 1u) && ((bits >> j) & 1u)) v += a[idx];
  for (int i = 0; i < layout.n; ++i)
    for (int j = i + 1; j < layout.n; ++j)
      for (int k = j + 1; k < layout.n; ++k, ++idx)
        if (((bits >> i) & 1u) && ((bits >> j) & 1u) && ((bits >> k) & 1u)) v += a[idx];
  return v;
}

void oracle_transform() {
  const int n = 4;
  CoefficientLayout layout(n);
  Eigen::MatrixXd t = build_transform(layout);
  Rng rng = make_rng(7);
  std::normal_distribution<double> normal(0.0, 50.0);
  bool ok = true;
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd a(layout.dim());
    for (int i = 0; i < a.size(); ++i) a[i] = normal(rng);
    Eigen::VectorXd v = t * a;
    for (std::uint32_t bits = 1; bits < (1u << n); ++bits)
      ok = ok && std::abs(v[bits - 1] - direct_polynomial(layout, a, bits)) < 1e-9;
  }
  check(ok, "transform matrix agrees with direct polynomial evaluation");
}

void oracle_pareto() {
  Rng rng = make_rng(11);
  std::uniform_real_distribution<double> val(-500.0, 1500.0);
  std::uniform_real_distribution<double> price(-2000.0, 2000.0);
  std::uniform_int_distribution<int> pick_n(2, 6);
  bool lemma_ok = true, prop_ok = true;
  for (int rep = 0; rep < 300; ++rep) {
    const int n = pick_n(rng);
    const int m = (1 << n) - 1;
    std::vector<double> vc(m), vs(m);
    for (int i = 0; i < m; ++i) {
      vc[i] = val(rng);
      vs[i] = std::abs(val(rng)) + 1.0;
    }
    double best = -1e300;
    for (int i = 0; i < m; ++i) best = std::max(best, vc[i] - vs[i]);
    for (int i = 0; i < m; ++i) {
      if (vc[i] - vs[i] == best) continue;
      // Lemma: against any maximal-gains deal, either the customer or the
      // shop must be strictly worse off
      for (int j = 0; j < m; ++j) {
        if (vc[j] - vs[j] != best) continue;
        double p = price(rng), pstar = price(rng);
        lemma_ok = lemma_ok &&
                   (vc[i] - p < vc[j] - pstar || p - vs[i] < pstar - vs[j]);
        // constructive Pareto improvement: shop indifferent, customer gains
        double pprime = p + vs[j] - vs[i];
        prop_ok = prop_ok && std::abs((pprime - vs[j]) - (p - vs[i])) < 1e-9 &&
                  vc[j] - pprime > vc[i] - p;
        break;
      }
    }
  }
  check(lemma_ok, "maximal-gains bundles dominate (inequality disjunction)");
  check(prop_ok, "constructive price transfer improves the customer only");
}

void oracle_formulas() {
  StrategyParams cust{StrategyKind::tdf, 0.5, 0.03};
  StrategyParams shop{StrategyKind::tdf, 1.5, 0.03};
  check(std::abs(tdf_price(100.0, Role::customer, cust, 0) - 50.0) < 1e-12 &&
            std::abs(tdf_price(100.0, Role::shop, shop, 0) - 150.0) < 1e-12 &&
            std::abs(tdf_price(100.0, Role::customer, cust, 1000) - 100.0) < 1e-9,
        "tdf opening and limit prices");
  check(std::abs(predict_rounds(100.0, 80.0, 70.0) - 2.0) < 1e-12 &&
            predict_rounds(100.0, 80.0, 80.0) ==
                std::numeric_limits<double>::infinity() &&
            predict_rounds(100.0, 100.0, 90.0) == 0.0,
        "predicted remaining rounds");
  check(std::abs(recommend_probability(4.0 * std::log(2.0)) - 0.5) < 1e-12 &&
            recommend_probability(0.0) == 0.0 &&
            recommend_probability(std::numeric_limits<double>::infinity()) == 1.0,
        "recommendation probability");
}

int cmd_oracle_check() {
  oracle_bundles();
  oracle_transform();
  oracle_pareto();
  oracle_formulas();
  if (failures) {
    std::cout << failures << " check(s) failed\n";
    return 1;
  }
  std::cout << "all checks passed\n";
  return 0;
}

int cmd_replay(const std::string& trace_path) {
  std::ifstream in(trace_path);
  if (!in) {
    std::cerr << "cannot open trace file: " << trace_path << '\n';
    return 1;
  }
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::cout << "\n=== " << line.substr(1) << " ===\n";
      continue;
    }
    std::istringstream fields(line);
    int round;
    std::string who, bits, price, event;
    fields >> round >> who >> bits >> price >> event;
    std::cout.width(4);
    std::cout << round << "  ";
    std::cout.width(8);
    std::cout << who << "  " << bits << "  ";
    std::cout.width(10);
    std::cout << price << "  " << event;
    std::string extra;
    while (fields >> extra) std::cout << ' ' << extra;
    std::cout << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bundle-and-price negotiation simulator"};
  app.require_subcommand(1);

  std::string config_path, trace_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> customers, runs, n;
  bool paper_scale = false;
  int trace_sessions = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "override the master seed");
    cmd->add_option("--out", out_dir, "override the output directory");
  };

  CLI::App* run = app.add_subcommand("run", "run one experiment from a config file");
  run->add_option("--config", config_path, "experiment config (json)")->required();
  run->add_option("--traces", trace_sessions, "dump traces for the first N sessions");
  add_common(run);

  CLI::App* compare =
      app.add_subcommand("compare", "run mu, s and b on shared seeds and compare");
  compare->add_option("--config", config_path, "experiment config (json)");
  compare->add_flag("--paper-scale", paper_scale,
                    "default to n=10, 12000 customers, 10 runs instead of desk scale");
  compare->add_option("--customers", customers, "customers per run");
  compare->add_option("--runs", runs, "number of runs (distributions)");
  compare->add_option("--n", n, "catalog size");
  add_common(compare);

  CLI::App* oracle = app.add_subcommand("oracle-check", "run brute-force oracle checks");
  (void)oracle;

  CLI::App* replay = app.add_subcommand("replay", "pretty-print a stored session trace");
  replay->add_option("--trace", trace_path, "trace file from a run with --traces")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("run")) return cmd_run(config_path, seed, out_dir, trace_sessions);
    if (app.got_subcommand("compare"))
      return cmd_compare(config_path.empty() ? std::nullopt
                                             : std::optional<std::string>(config_path),
                         paper_scale, seed, out_dir, customers, runs, n);
    if (app.got_subcommand("oracle-check")) return cmd_oracle_check();
    if (app.got_subcommand("replay")) return cmd_replay(trace_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
