#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "haggle/bundle.hpp"
#include "haggle/estimators.hpp"
#include "haggle/negotiation.hpp"
#include "haggle/preferences.hpp"
#include "haggle/recommender.hpp"
#include "haggle/rng.hpp"

namespace haggle {

enum class Method { mu, s, b };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::mu: return "mu";
    case Method::s: return "s";
    case Method::b: return "b";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "mu") return Method::mu;
  if (s == "s") return Method::s;
  if (s == "b") return Method::b;
  throw std::invalid_argument("unknown method: " + s);
}

inline const char* strategy_name(StrategyKind k) {
  return k == StrategyKind::tdf ? "tdf" : "tftm";
}

inline StrategyKind parse_strategy(const std::string& s) {
  if (s == "tdf") return StrategyKind::tdf;
  if (s == "tftm") return StrategyKind::tftm;
  throw std::invalid_argument("unknown strategy: " + s);
}

struct ExperimentConfig {
  int n = 10;
  int num_customers = 12000;
  int num_distributions = 10;
  double breakdown_prob = 0.02;
  StrategyKind customer_strategy = StrategyKind::tdf;
  Method method = Method::mu;

  double gap_init_customer = 0.5;
  double gap_init_shop = 1.5;
  double delta = 0.03;
  double tftm_delta = 1.0;  // carried for config fidelity; unused by tftm

  PopulationParams population;
  ShopParams shop;
  LambdaSchedule lambda;
  int oracle_budget = 20000;
  double oracle_bucket_width = 25.0;

  int moving_avg_window = 100;
  std::uint64_t master_seed = 1;
  std::string output_dir = "out";
  int max_pairs = 10000;
  int trace_sessions = 0;  // dump traces for this many sessions of run 0

  void validate() const {
    if (n < 1 || n > kMaxCatalogSize) throw std::invalid_argument("config: n out of range");
    if (num_customers < 1) throw std::invalid_argument("config: num_customers < 1");
    if (num_distributions < 1) throw std::invalid_argument("config: num_distributions < 1");
    if (moving_avg_window < 1) throw std::invalid_argument("config: moving_avg_window < 1");
    if (breakdown_prob < 0.0 || breakdown_prob > 1.0)
      throw std::invalid_argument("config: breakdown_prob out of [0,1]");
  }

  /// Small configuration for quick comparative runs and CI.
  static ExperimentConfig desk_scale() {
    ExperimentConfig c;
    c.n = 6;
    c.num_customers = 2000;
    c.num_distributions = 3;
    return c;
  }
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  std::vector<std::vector<int>> partition;
  for (std::uint32_t mask : c.population.partition_masks.empty()
                                ? PopulationParams::default_partition(c.n)
                                : c.population.partition_masks) {
    std::vector<int> goods;
    for (int i = 0; i < c.n; ++i)
      if ((mask >> i) & 1u) goods.push_back(i);
    partition.push_back(goods);
  }
  j = nlohmann::json{
      {"n", c.n},
      {"num_customers", c.num_customers},
      {"num_distributions", c.num_distributions},
      {"breakdown_prob", c.breakdown_prob},
      {"customer_strategy", strategy_name(c.customer_strategy)},
      {"method", method_name(c.method)},
      {"strategy",
       {{"gap_init_customer", c.gap_init_customer},
        {"gap_init_shop", c.gap_init_shop},
        {"delta", c.delta},
        {"tftm_delta", c.tftm_delta}}},
      {"population",
       {{"partition", partition},
        {"linear_mean_lo", c.population.linear_mean_lo},
        {"linear_mean_hi", c.population.linear_mean_hi},
        {"cross_mean_lo", c.population.cross_mean_lo},
        {"cross_mean_hi", c.population.cross_mean_hi},
        {"std_lo", c.population.std_lo},
        {"std_hi", c.population.std_hi},
        {"a0_std", c.population.a0_std},
        {"quad_scale", c.population.quad_scale},
        {"cubic_scale", c.population.cubic_scale},
        {"within_corr_lo", c.population.within_corr_lo},
        {"within_corr_hi", c.population.within_corr_hi},
        {"cross_corr_lo", c.population.cross_corr_lo},
        {"cross_corr_hi", c.population.cross_corr_hi}}},
      {"shop",
       {{"cost_lo", c.shop.cost_lo},
        {"cost_hi", c.shop.cost_hi},
        {"discount2", c.shop.discount2},
        {"discount3", c.shop.discount3}}},
      {"lambda",
       {{"lambda0", c.lambda.lambda0}, {"growth", c.lambda.growth}, {"cap", c.lambda.cap}}},
      {"oracle", {{"budget", c.oracle_budget}, {"bucket_width", c.oracle_bucket_width}}},
      {"moving_avg_window", c.moving_avg_window},
      {"master_seed", c.master_seed},
      {"output_dir", c.output_dir},
      {"max_pairs", c.max_pairs},
      {"trace_sessions", c.trace_sessions}};
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  auto get = [&](const nlohmann::json& obj, const char* key, auto& out) {
    if (obj.contains(key)) obj.at(key).get_to(out);
  };
  get(j, "n", c.n);
  get(j, "num_customers", c.num_customers);
  get(j, "num_distributions", c.num_distributions);
  get(j, "breakdown_prob", c.breakdown_prob);
  if (j.contains("customer_strategy"))
    c.customer_strategy = parse_strategy(j.at("customer_strategy").get<std::string>());
  if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
  if (j.contains("strategy")) {
    const auto& s = j.at("strategy");
    get(s, "gap_init_customer", c.gap_init_customer);
    get(s, "gap_init_shop", c.gap_init_shop);
    get(s, "delta", c.delta);
    get(s, "tftm_delta", c.tftm_delta);
  }
  if (j.contains("population")) {
    const auto& p = j.at("population");
    if (p.contains("partition")) {
      c.population.partition_masks.clear();
      for (const auto& block : p.at("partition")) {
        std::uint32_t mask = 0;
        for (int g : block.get<std::vector<int>>()) mask |= 1u << g;
        c.population.partition_masks.push_back(mask);
      }
    }
    get(p, "linear_mean_lo", c.population.linear_mean_lo);
    get(p, "linear_mean_hi", c.population.linear_mean_hi);
    get(p, "cross_mean_lo", c.population.cross_mean_lo);
    get(p, "cross_mean_hi", c.population.cross_mean_hi);
    get(p, "std_lo", c.population.std_lo);
    get(p, "std_hi", c.population.std_hi);
    get(p, "a0_std", c.population.a0_std);
    get(p, "quad_scale", c.population.quad_scale);
    get(p, "cubic_scale", c.population.cubic_scale);
    get(p, "within_corr_lo", c.population.within_corr_lo);
    get(p, "within_corr_hi", c.population.within_corr_hi);
    get(p, "cross_corr_lo", c.population.cross_corr_lo);
    get(p, "cross_corr_hi", c.population.cross_corr_hi);
  }
  if (j.contains("shop")) {
    const auto& s = j.at("shop");
    get(s, "cost_lo", c.shop.cost_lo);
    get(s, "cost_hi", c.shop.cost_hi);
    get(s, "discount2", c.shop.discount2);
    get(s, "discount3", c.shop.discount3);
  }
  if (j.contains("lambda")) {
    const auto& l = j.at("lambda");
    get(l, "lambda0", c.lambda.lambda0);
    get(l, "growth", c.lambda.growth);
    get(l, "cap", c.lambda.cap);
  }
  if (j.contains("oracle")) {
    const auto& o = j.at("oracle");
    get(o, "budget", c.oracle_budget);
    get(o, "bucket_width", c.oracle_bucket_width);
  }
  get(j, "moving_avg_window", c.moving_avg_window);
  get(j, "master_seed", c.master_seed);
  get(j, "output_dir", c.output_dir);
  get(j, "max_pairs", c.max_pairs);
  get(j, "trace_sessions", c.trace_sessions);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  in >> j;
  ExperimentConfig c = j.get<ExperimentConfig>();
  c.validate();
  return c;
}

/// Uniform random bundle at Hamming distance exactly 3 from a uniformly
/// chosen maximal-gains bundle, falling back to distance 2 when no nonempty
/// bundle exists at distance 3.
inline Bundle initial_bundle(const BestBundles& best, int n, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick_star(0, best.best.size() - 1);
  const Bundle star = best.best[pick_star(rng)];
  for (int dist : {3, 2}) {
    std::vector<std::uint32_t> candidates;
    for (std::uint32_t bits = 1; bits < (1u << n); ++bits)
      if (std::popcount(bits ^ star.bits()) == dist) candidates.push_back(bits);
    if (!candidates.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
      return Bundle(candidates[pick(rng)], n);
    }
  }
  return star;  // n = 1 only
}

struct CustomerRecord {
  int run = 0;
  int customer = 0;
  double max_gains = 0.0;
  double min_gains = 0.0;
  double gains_init = 0.0;
  double gains_interest = 0.0;
  double gains_final = 0.0;
  double percentage = 0.0;
  double rel_percentage = 0.0;
  bool deal = false;
  int rounds = 0;
};

/// Per-customer performance record. b_final is the bundle on the table at
/// termination, deal or breakdown alike.
inline CustomerRecord compute_metrics(const SessionOutcome& outcome,
                                      const CustomerValuation& cv, const ShopValuation& sv,
                                      const Bundle& b_init, const Bundle& b_interest,
                                      const BestBundles& best) {
  CustomerRecord r;
  r.max_gains = best.max_gains;
  r.min_gains = best.min_gains;
  r.gains_init = gains(cv, sv, b_init);
  r.gains_interest = gains(cv, sv, b_interest);
  r.gains_final = gains(cv, sv, outcome.final_offer.bundle);
  r.percentage = best.max_gains == best.min_gains
                     ? 1.0
                     : (r.gains_final - best.min_gains) / (best.max_gains - best.min_gains);
  r.rel_percentage = best.max_gains == r.gains_init
                         ? 1.0
                         : (r.gains_final - r.gains_init) / (best.max_gains - r.gains_init);
  r.deal = outcome.result == SessionOutcome::Result::deal;
  r.rounds = outcome.rounds;
  return r;
}

struct SessionTraceRecord {
  int run = 0;
  int customer = 0;
  Trace trace;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<std::vector<CustomerRecord>> runs;
  std::vector<SessionTraceRecord> traces;

  /// Trailing moving average of rel_percentage at each customer index,
  /// averaged across runs.
  std::vector<double> moving_avg_rel_percentage() const {
    const int m = config.num_customers;
    const int w = config.moving_avg_window;
    std::vector<double> out(m, 0.0);
    for (const auto& run : runs) {
      double window_sum = 0.0;
      for (int i = 0; i < m; ++i) {
        window_sum += run[i].rel_percentage;
        if (i >= w) window_sum -= run[i - w].rel_percentage;
        out[i] += window_sum / std::min(i + 1, w);
      }
    }
    for (double& x : out) x /= static_cast<double>(runs.size());
    return out;
  }
};

struct Aggregate {
  double max_gains = 0, min_gains = 0, gains_init = 0, gains_interest = 0,
         gains_final = 0, percentage = 0, rel_percentage = 0, rounds = 0, deals = 0;
};

/// Per-run means (rounds over deals only, deals as a count), then mean and
/// sample standard deviation across runs.
inline std::pair<Aggregate, Aggregate> aggregate(const ExperimentResult& res) {
  std::vector<Aggregate> per_run;
  for (const auto& run : res.runs) {
    Aggregate a;
    double round_sum = 0.0;
    for (const auto& r : run) {
      a.max_gains += r.max_gains;
      a.min_gains += r.min_gains;
      a.gains_init += r.gains_init;
      a.gains_interest += r.gains_interest;
      a.gains_final += r.gains_final;
      a.percentage += r.percentage;
      a.rel_percentage += r.rel_percentage;
      if (r.deal) {
        a.deals += 1;
        round_sum += r.rounds;
      }
    }
    const double m = static_cast<double>(run.size());
    a.max_gains /= m;
    a.min_gains /= m;
    a.gains_init /= m;
    a.gains_interest /= m;
    a.gains_final /= m;
    a.percentage /= m;
    a.rel_percentage /= m;
    a.rounds = a.deals > 0 ? round_sum / a.deals : 0.0;
    per_run.push_back(a);
  }
  auto fields = [](Aggregate& a) {
    return std::array<double*, 9>{&a.max_gains,   &a.min_gains,      &a.gains_init,
                                  &a.gains_interest, &a.gains_final, &a.percentage,
                                  &a.rel_percentage, &a.rounds,      &a.deals};
  };
  Aggregate mean, sd;
  auto mean_f = fields(mean);
  for (auto& a : per_run) {
    auto f = fields(a);
    for (std::size_t i = 0; i < f.size(); ++i) *mean_f[i] += *f[i];
  }
  for (double* p : mean_f) *p /= static_cast<double>(per_run.size());
  if (per_run.size() > 1) {
    auto sd_f = fields(sd);
    for (auto& a : per_run) {
      auto f = fields(a);
      for (std::size_t i = 0; i < f.size(); ++i) {
        const double d = *f[i] - *mean_f[i];
        *sd_f[i] += d * d;
      }
    }
    for (double* p : sd_f) *p = std::sqrt(*p / static_cast<double>(per_run.size() - 1));
  }
  return {mean, sd};
}

/// Executes one run: a fixed population and shop valuation, customers
/// strictly in sequence. The mu estimator keeps its gains table across the
/// whole run. Customer draws use their own seed stream so the customer
/// sequence is identical across methods.
inline std::vector<CustomerRecord> run_single(const ExperimentConfig& config, int run_index,
                                              std::vector<SessionTraceRecord>* traces = nullptr) {
  const PreferencePopulation pop =
      sample_population(config.n, derive_seed(config.master_seed, run_index, 1),
                        config.population);
  const ShopValuation sv =
      sample_shop(config.n, derive_seed(config.master_seed, run_index, 2), config.shop);

  std::unique_ptr<Estimator> estimator;
  switch (config.method) {
    case Method::mu:
      estimator = std::make_unique<LearnedEstimator>(sv, config.lambda);
      break;
    case Method::s:
      estimator = std::make_unique<OracleEstimator>(
          pop, sv, derive_seed(config.master_seed, run_index, 5), config.oracle_budget,
          config.oracle_bucket_width);
      break;
    case Method::b:
      estimator = std::make_unique<RandomEstimator>();
      break;
  }

  std::vector<CustomerRecord> records;
  records.reserve(config.num_customers);
  for (int i = 0; i < config.num_customers; ++i) {
    Rng customer_rng = make_rng(derive_seed(config.master_seed, run_index, 3, i));
    const CustomerValuation cv = sample_customer(pop, customer_rng);
    const BestBundles best = best_bundles(cv, sv);
    const Bundle b_init = initial_bundle(best, config.n, customer_rng);

    StrategyParams cust_params{config.customer_strategy, config.gap_init_customer,
                               config.customer_strategy == StrategyKind::tftm
                                   ? config.tftm_delta
                                   : config.delta};
    StrategyParams shop_params{StrategyKind::tdf, config.gap_init_shop, config.delta};
    Agent customer(Role::customer, cust_params, [&cv](const Bundle& b) { return cv.value(b); });
    Agent shop(Role::shop, shop_params, [&sv](const Bundle& b) { return sv.value(b); });
    Recommender rec(sv, *estimator, b_init);

    Rng session_rng = make_rng(derive_seed(config.master_seed, run_index, 4, i));
    SessionResult sres = run_session(customer, shop, &rec, b_init,
                                     {config.breakdown_prob, config.max_pairs}, session_rng);

    CustomerRecord r =
        compute_metrics(sres.outcome, cv, sv, b_init, rec.interest_bundle(), best);
    r.run = run_index;
    r.customer = i;
    records.push_back(r);

    if (traces && run_index == 0 && i < config.trace_sessions)
      traces->push_back({run_index, i, std::move(sres.trace)});
  }
  return records;
}

inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult res;
  res.config = config;
  for (int r = 0; r < config.num_distributions; ++r)
    res.runs.push_back(run_single(config, r, &res.traces));
  return res;
}

// ---- CSV emission --------------------------------------------------------

inline std::string fmt6(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

inline void write_per_customer_csv(const ExperimentResult& res, std::ostream& os) {
  os << "run,customer,max_gains,min_gains,gains_init,gains_interest,gains_final,"
        "percentage,rel_percentage,deal,rounds\n";
  for (const auto& run : res.runs)
    for (const auto& r : run)
      os << r.run << ',' << r.customer << ',' << fmt6(r.max_gains) << ','
         << fmt6(r.min_gains) << ',' << fmt6(r.gains_init) << ',' << fmt6(r.gains_interest)
         << ',' << fmt6(r.gains_final) << ',' << fmt6(r.percentage) << ','
         << fmt6(r.rel_percentage) << ',' << (r.deal ? 1 : 0) << ',' << r.rounds << '\n';
}

inline void write_moving_avg_csv(const ExperimentResult& res, std::ostream& os) {
  os << "customer,rel_percentage\n";
  const std::vector<double> ma = res.moving_avg_rel_percentage();
  for (std::size_t i = 0; i < ma.size(); ++i) os << i << ',' << fmt6(ma[i]) << '\n';
}

inline void write_summary_csv(const std::vector<ExperimentResult>& results, std::ostream& os) {
  os << "indicator";
  for (const auto& res : results) {
    std::string col = std::string(method_name(res.config.method)) + "_" +
                      strategy_name(res.config.customer_strategy);
    os << ',' << col << "_mean," << col << "_sd";
  }
  os << '\n';
  static const char* row_names[] = {"max_gains",   "min_gains",      "gains_b_init",
                                    "gains_b_interest", "gains_b_final", "percentage",
                                    "rel_percentage",   "rounds",        "deals"};
  std::vector<std::pair<Aggregate, Aggregate>> aggs;
  for (const auto& res : results) aggs.push_back(aggregate(res));
  for (int row = 0; row < 9; ++row) {
    os << row_names[row];
    for (const auto& [mean, sd] : aggs) {
      auto pick = [&](const Aggregate& a) {
        const double vals[] = {a.max_gains,   a.min_gains,      a.gains_init,
                               a.gains_interest, a.gains_final, a.percentage,
                               a.rel_percentage, a.rounds,      a.deals};
        return vals[row];
      };
      os << ',' << fmt6(pick(mean)) << ',' << fmt6(pick(sd));
    }
    os << '\n';
  }
}

inline void write_traces(const ExperimentResult& res, std::ostream& os) {
  for (const auto& t : res.traces) {
    os << "# session run=" << t.run << " customer=" << t.customer << " n=" << res.config.n
       << '\n';
    for (const auto& e : t.trace) os << format_trace_event(e, res.config.n) << '\n';
  }
}

/// Writes per_customer.csv, moving_avg.csv, summary.csv (and traces.txt when
/// trace collection is on) into dir.
inline void write_outputs(const ExperimentResult& res, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream f(fs::path(dir) / "per_customer.csv");
    write_per_customer_csv(res, f);
  }
  {
    std::ofstream f(fs::path(dir) / "moving_avg.csv");
    write_moving_avg_csv(res, f);
  }
  {
    std::ofstream f(fs::path(dir) / "summary.csv");
    write_summary_csv({res}, f);
  }
  if (!res.traces.empty()) {
    std::ofstream f(fs::path(dir) / "traces.txt");
    write_traces(res, f);
  }
}

}  // namespace haggle
