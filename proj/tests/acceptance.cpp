// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria 1-5 share a single desk-scale comparative run.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "haggle/experiment.hpp"

using namespace haggle;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int idx, const std::string& name, bool pass, const std::string& detail) {
  if (!pass) ++g_failures;
  std::printf("criterion %d [%s] %s: %s\n", idx, pass ? "PASS" : "FAIL", name.c_str(),
              detail.c_str());
  std::fflush(stdout);
}

double mean_of(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
  double s = 0.0;
  for (std::size_t i = lo; i < hi; ++i) s += v[i];
  return s / static_cast<double>(hi - lo);
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", x);
  return buf;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main() {
  // ---- shared desk-scale comparative run (criteria 1-5) -------------------
  const auto t0 = Clock::now();
  std::map<Method, std::map<StrategyKind, ExperimentResult>> results;
  std::map<Method, std::map<StrategyKind, Aggregate>> agg;
  for (Method m : {Method::mu, Method::s, Method::b}) {
    for (StrategyKind k : {StrategyKind::tdf, StrategyKind::tftm}) {
      ExperimentConfig c = ExperimentConfig::desk_scale();
      c.method = m;
      c.customer_strategy = k;
      results[m][k] = run_experiment(c);
      agg[m][k] = aggregate(results[m][k]).first;
    }
  }
  const double elapsed =
      std::chrono::duration<double>(Clock::now() - t0).count();

  // 1. method ordering: S > mu > B in mean relative percentage, both
  //    strategies, gaps > 0.02, within the runtime budget
  {
    bool pass = elapsed < 300.0;
    std::string detail;
    for (StrategyKind k : {StrategyKind::tdf, StrategyKind::tftm}) {
      const double rs = agg[Method::s][k].rel_percentage;
      const double rm = agg[Method::mu][k].rel_percentage;
      const double rb = agg[Method::b][k].rel_percentage;
      pass = pass && rs > rm + 0.02 && rm > rb + 0.02;
      detail += std::string(strategy_name(k)) + " S/mu/B=" + fmt(rs) + "/" + fmt(rm) +
                "/" + fmt(rb) + " ";
    }
    detail += "elapsed=" + fmt(elapsed) + "s";
    report(1, "method ordering", pass, detail);
  }

  // 2. learning curve: mu's moving average rises by > 0.05 from the first
  //    decile of customers to the last
  {
    std::vector<double> ma = results[Method::mu][StrategyKind::tdf].moving_avg_rel_percentage();
    const std::size_t dec = ma.size() / 10;
    const double first = mean_of(ma, 0, dec);
    const double last = mean_of(ma, ma.size() - dec, ma.size());
    report(2, "learning curve", last - first > 0.05,
           "first-decile=" + fmt(first) + " last-decile=" + fmt(last));
  }

  // 3. gap closing: the windowed S - mu difference shrinks, both strategies
  {
    bool pass = true;
    std::string detail;
    for (StrategyKind k : {StrategyKind::tdf, StrategyKind::tftm}) {
      std::vector<double> ms = results[Method::s][k].moving_avg_rel_percentage();
      std::vector<double> mm = results[Method::mu][k].moving_avg_rel_percentage();
      std::vector<double> diff(ms.size());
      for (std::size_t i = 0; i < ms.size(); ++i) diff[i] = ms[i] - mm[i];
      const std::size_t dec = diff.size() / 10;
      const double first = mean_of(diff, 0, dec);
      const double last = mean_of(diff, diff.size() - dec, diff.size());
      pass = pass && last < first;
      detail += std::string(strategy_name(k)) + " first/last=" + fmt(first) + "/" +
                fmt(last) + " ";
    }
    report(3, "gap closing", pass, detail);
  }

  // 4. strategy trade-off: under every method, tftm deals more and faster;
  //    tdf lands higher final gains
  {
    bool pass = true;
    std::string detail;
    for (Method m : {Method::mu, Method::s, Method::b}) {
      const Aggregate& tdf = agg[m][StrategyKind::tdf];
      const Aggregate& tftm = agg[m][StrategyKind::tftm];
      pass = pass && tftm.deals > tdf.deals && tftm.rounds < tdf.rounds &&
             tdf.gains_final > tftm.gains_final;
      detail += std::string(method_name(m)) + " deals=" + fmt(tdf.deals) + "/" +
                fmt(tftm.deals) + " rounds=" + fmt(tdf.rounds) + "/" + fmt(tftm.rounds) +
                " gf=" + fmt(tdf.gains_final) + "/" + fmt(tftm.gains_final) + " ";
    }
    report(4, "strategy trade-off", pass, detail);
  }

  // 5. benchmark beaten on speed and volume, both strategies
  {
    bool pass = true;
    std::string detail;
    for (StrategyKind k : {StrategyKind::tdf, StrategyKind::tftm}) {
      const Aggregate& am = agg[Method::mu][k];
      const Aggregate& as = agg[Method::s][k];
      const Aggregate& ab = agg[Method::b][k];
      pass = pass && am.rounds < ab.rounds && as.rounds < ab.rounds &&
             am.deals >= ab.deals && as.deals >= ab.deals;
      detail += std::string(strategy_name(k)) + " rounds mu/S/B=" + fmt(am.rounds) + "/" +
                fmt(as.rounds) + "/" + fmt(ab.rounds) + " deals=" + fmt(am.deals) + "/" +
                fmt(as.deals) + "/" + fmt(ab.deals) + " ";
    }
    report(5, "benchmark beaten", pass, detail);
  }

  // 6. Pareto characterization: 1000 random instances, zero failures, < 10 s
  {
    const auto p0 = Clock::now();
    Rng rng = make_rng(2024);
    std::uniform_int_distribution<int> pick_n(2, 6);
    std::uniform_real_distribution<double> val(-500.0, 1500.0);
    std::uniform_real_distribution<double> price(-2000.0, 2000.0);
    long violations = 0;
    for (int rep = 0; rep < 1000; ++rep) {
      const int n = pick_n(rng);
      std::vector<double> values((1u << n) - 1);
      for (double& v : values) v = val(rng);
      std::vector<double> costs(n);
      for (double& c : costs) c = std::abs(val(rng)) + 1.0;
      CustomerValuation cv(values, n);
      ShopValuation sv(costs, {});
      BestBundles best = best_bundles(cv, sv);
      for (const Bundle& bstar : best.best) {
        for (const Bundle& b : all_bundles(n)) {
          if (gains(cv, sv, b) == best.max_gains) continue;
          // (a) disjunction of strict inequalities at arbitrary prices
          const double p = price(rng), pstar = price(rng);
          const bool cw = cv.value(b) - p < cv.value(bstar) - pstar;
          const bool sw = p - sv.value(b) < pstar - sv.value(bstar);
          if (!(cw || sw)) ++violations;
          // (b) the constructive transfer: shop indifferent, customer better
          const double pprime = p + sv.value(bstar) - sv.value(b);
          if (std::abs((pprime - sv.value(bstar)) - (p - sv.value(b))) > 1e-9)
            ++violations;
          if (!(cv.value(bstar) - pprime > cv.value(b) - p)) ++violations;
        }
      }
    }
    const double secs = std::chrono::duration<double>(Clock::now() - p0).count();
    report(6, "Pareto characterization", violations == 0 && secs < 10.0,
           "violations=" + std::to_string(violations) + " elapsed=" + fmt(secs) + "s");
  }

  // 7. formula exactness against hand oracles, 1e-9 relative
  {
    auto close = [](double a, double b) {
      return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
    };
    bool pass = true;
    // concession-pace extrapolation
    pass = pass && predict_rounds(100.0, 60.0, 40.0) == 2.0;
    pass = pass && close(predict_rounds(200.0, 110.0, 80.0), 3.0);
    pass = pass && std::isinf(predict_rounds(100.0, 60.0, 60.0));
    pass = pass && predict_rounds(100.0, 120.0, 100.0) == 0.0;
    // recommendation probability
    pass = pass && recommend_probability(0.0) == 0.0;
    pass = pass && close(recommend_probability(4.0 * std::log(2.0)), 0.5);
    pass = pass && close(recommend_probability(8.0), 1.0 - std::exp(-2.0));
    // running mean of recorded gains deltas
    {
      GainsTable t;
      Bundle a(1, 3), b(3, 3);
      for (double d : {5.0, 7.0, 9.0}) t.record(a, b, d);
      pass = pass && close(t.mean(a, b), 7.0);
      t.record(a, b, -21.0);
      pass = pass && close(t.mean(a, b), 0.0);
      ShopValuation sv({80, 70, 60}, {});
      GainsTable t2;
      record_exchange(t2, a, 100.0, b, 130.0, sv);
      pass = pass && close(t2.mean(a, b), (130.0 - 150.0) - (100.0 - 80.0));
      pass = pass && close(t2.mean(b, a), -t2.mean(a, b));
    }
    // lambda schedule
    pass = pass && close(lambda_value({0.01, 0.001, 5.0}, 0), 0.01);
    pass = pass && close(lambda_value({0.01, 0.001, 5.0}, 1000), 1.01);
    pass = pass && lambda_value({0.01, 0.001, 5.0}, 100000) == 5.0;
    // time-dependent gap
    {
      StrategyParams cu{StrategyKind::tdf, 0.5, 0.03};
      StrategyParams sh{StrategyKind::tdf, 1.5, 0.03};
      pass = pass && tdf_price(100.0, Role::customer, cu, 0) == 50.0;
      pass = pass && tdf_price(100.0, Role::shop, sh, 0) == 150.0;
      pass = pass && close(tdf_price(100.0, Role::customer, cu, 10),
                           100.0 * (1.0 - 0.5 * std::exp(-0.3)));
      pass = pass && close(tdf_price(80.0, Role::shop, sh, 20),
                           80.0 * (1.0 + 0.5 * std::exp(-0.6)));
    }
    // polynomial valuation via the subset transform
    {
      CoefficientLayout layout(3);
      Eigen::VectorXd a = Eigen::VectorXd::Zero(layout.dim());
      a[0] = 1.0;                    // constant
      a[1] = 2.0;                    // good 0
      a[2] = 4.0;                    // good 1
      a[4] = 8.0;                    // pair {0,1}
      a[layout.dim() - 1] = 16.0;    // triple {0,1,2}
      Eigen::VectorXd v = build_transform(layout) * a;
      pass = pass && close(v[0b001 - 1], 3.0);
      pass = pass && close(v[0b011 - 1], 15.0);
      pass = pass && close(v[0b111 - 1], 31.0);
    }
    // outcome metrics
    {
      CustomerValuation cv({60.0, 10.0, 100.0}, 2);
      ShopValuation sv({20.0, 20.0}, {});
      BestBundles best = best_bundles(cv, sv);
      Bundle b_init(2, 2), b_final(1, 2);
      SessionOutcome deal{SessionOutcome::Result::deal, {b_final, 35.0, Role::shop, 6},
                          4, b_final, 35.0};
      CustomerRecord r = compute_metrics(deal, cv, sv, b_init, b_init, best);
      pass = pass && close(r.percentage, 50.0 / 70.0);
      pass = pass && close(r.rel_percentage, 50.0 / 70.0);
      pass = pass && close(r.gains_final, 40.0);
    }
    report(7, "formula exactness", pass, pass ? "all hand cases match" : "mismatch");
  }

  // 8. statistical checks
  {
    bool pass = true;
    std::string detail;
    // MVN sampler moments at 1e5 draws, 3 standard errors
    {
      PreferencePopulation pop = sample_population(4, 21);
      Rng rng = make_rng(31);
      Bundle b1(3, 4), b2(5, 4);
      const int draws = 100000;
      double s1 = 0, s2 = 0, s12 = 0;
      for (int d = 0; d < draws; ++d) {
        CustomerValuation cv = sample_customer(pop, rng);
        const double x = cv.value(b1), y = cv.value(b2);
        s1 += x;
        s2 += y;
        s12 += x * y;
      }
      const double m1 = s1 / draws, m2 = s2 / draws;
      const bool ok1 = std::abs(m1 - pop.value_mean(b1)) <
                       3.0 * std::sqrt(pop.value_cov(b1, b1) / draws);
      const bool ok2 = std::abs(m2 - pop.value_mean(b2)) <
                       3.0 * std::sqrt(pop.value_cov(b2, b2) / draws);
      const double cov = s12 / draws - m1 * m2;
      const bool ok3 =
          std::abs(cov - pop.value_cov(b1, b2)) <
          0.1 * std::abs(pop.value_cov(b1, b2)) + 0.01 * std::sqrt(pop.value_cov(b1, b1) *
                                                                   pop.value_cov(b2, b2));
      pass = pass && ok1 && ok2 && ok3;
      detail += std::string("mvn=") + (ok1 && ok2 && ok3 ? "ok" : "off") + " ";
    }
    // softmax: uniform at lambda 0, argmax at lambda 1e3
    {
      GainsTable t;
      Bundle b(1, 4);
      std::vector<Bundle> pool = {Bundle(3, 4), Bundle(5, 4), Bundle(9, 4)};
      t.record(b, pool[0], 1.0);
      t.record(b, pool[1], 2.0);
      t.record(b, pool[2], 3.0);
      Rng rng = make_rng(41);
      std::map<std::uint32_t, int> counts;
      const int trials = 9000;
      for (int i = 0; i < trials; ++i)
        counts[softmax_order(t, b, pool, 0.0, rng)[0].bits()] += 1;
      double chi2 = 0.0;
      for (const auto& [bits, c] : counts)
        chi2 += (c - 3000.0) * (c - 3000.0) / 3000.0;
      const bool uniform_ok = counts.size() == 3 && chi2 < 9.21;  // df=2, alpha=0.01
      bool argmax_ok = true;
      for (int i = 0; i < 100; ++i)
        argmax_ok = argmax_ok && softmax_order(t, b, pool, 1000.0, rng)[0] == pool[2];
      pass = pass && uniform_ok && argmax_ok;
      detail += std::string("softmax=") + (uniform_ok && argmax_ok ? "ok" : "off") + " ";
    }
    // benchmark permutation uniformity, chi^2 over the 6 orders of 3 items
    {
      std::vector<Bundle> pool = {Bundle(1, 3), Bundle(2, 3), Bundle(4, 3)};
      Rng rng = make_rng(51);
      std::map<std::string, int> counts;
      const int trials = 12000;
      for (int i = 0; i < trials; ++i) {
        std::string key;
        for (const Bundle& b : benchmark_order(pool, rng)) key += std::to_string(b.bits());
        counts[key] += 1;
      }
      double chi2 = 0.0;
      for (const auto& [k, c] : counts) chi2 += (c - 2000.0) * (c - 2000.0) / 2000.0;
      const bool perm_ok = counts.size() == 6 && chi2 < 15.086;  // df=5, alpha=0.01
      pass = pass && perm_ok;
      detail += std::string("permutation=") + (perm_ok ? "ok" : "off") + " ";
    }
    // breakdown geometric tail at q = 0.02 on undealable sessions
    {
      Rng rng = make_rng(61);
      SessionConfig cfg;
      double sum = 0.0;
      int over = 0;
      const int sessions = 10000;
      for (int s = 0; s < sessions; ++s) {
        Agent customer(Role::customer, {StrategyKind::tftm, 0.5, 1.0},
                       [](const Bundle&) { return 10.0; });
        Agent shop(Role::shop, {StrategyKind::tftm, 1.5, 1.0},
                   [](const Bundle&) { return 100.0; });
        auto res = run_session(customer, shop, nullptr, Bundle(1, 2), cfg, rng);
        sum += res.outcome.rounds;
        if (res.outcome.rounds > 100) ++over;
      }
      const double mean = sum / sessions;
      const double tail = static_cast<double>(over) / sessions;
      const bool tail_ok =
          std::abs(mean - 50.0) < 2.0 && std::abs(tail - std::pow(0.98, 100)) < 0.02;
      pass = pass && tail_ok;
      detail += "breakdown mean=" + fmt(mean) + " tail=" + fmt(tail);
    }
    report(8, "statistical checks", pass, detail);
  }

  // 9. determinism: same master seed, byte-identical CSVs
  {
    ExperimentConfig c;
    c.n = 4;
    c.num_customers = 150;
    c.num_distributions = 2;
    c.moving_avg_window = 20;
    c.oracle_budget = 2000;
    c.trace_sessions = 3;
    c.master_seed = 99;
    namespace fs = std::filesystem;
    const fs::path base = fs::temp_directory_path() / "haggle_acceptance";
    fs::remove_all(base);
    write_outputs(run_experiment(c), (base / "a").string());
    write_outputs(run_experiment(c), (base / "b").string());
    bool pass = true;
    std::string detail;
    for (const char* name : {"per_customer.csv", "moving_avg.csv", "summary.csv",
                             "traces.txt"}) {
      const std::string ca = slurp(base / "a" / name), cb = slurp(base / "b" / name);
      const bool same = !ca.empty() && ca == cb;
      pass = pass && same;
      detail += std::string(name) + "=" + (same ? "identical" : "DIFFERS") + " ";
    }
    fs::remove_all(base);
    report(9, "determinism", pass, detail);
  }

  std::printf("%s\n", g_failures == 0 ? "acceptance: all criteria passed"
                                      : "acceptance: FAILURES present");
  return g_failures == 0 ? 0 : 1;
}
