#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "haggle/bundle.hpp"
#include "haggle/preferences.hpp"
#include "haggle/rng.hpp"

namespace haggle {

/// Running-mean estimates of the expected gains-from-trade difference when
/// switching negotiation from one bundle to an adjacent one. Keyed on
/// ordered bundle pairs only; no per-customer state. Unseen pairs report
/// mean 0, count 0.
class GainsTable {
 public:
  struct Entry {
    double mean = 0.0;
    std::int64_t count = 0;
  };

  void record(const Bundle& from, const Bundle& to, double delta) {
    Entry& e = entries_[key(from.bits(), to.bits())];
    e.count += 1;
    e.mean += (delta - e.mean) / static_cast<double>(e.count);
    total_ += 1;
  }

  Entry get(const Bundle& from, const Bundle& to) const {
    auto it = entries_.find(key(from.bits(), to.bits()));
    return it == entries_.end() ? Entry{} : it->second;
  }

  double mean(const Bundle& from, const Bundle& to) const { return get(from, to).mean; }
  std::int64_t total_examples() const { return total_; }
  std::size_t pair_count() const { return entries_.size(); }

  /// Flat-table snapshot: "from-bits to-bits mean count" per line.
  void save(std::ostream& os) const {
    std::map<std::uint64_t, Entry> sorted(entries_.begin(), entries_.end());
    for (const auto& [k, e] : sorted)
      os << (k >> 16) << ' ' << (k & 0xffffu) << ' ' << e.mean << ' ' << e.count << '\n';
  }

  static GainsTable load(std::istream& is) {
    GainsTable t;
    std::uint32_t from, to;
    Entry e;
    while (is >> from >> to >> e.mean >> e.count) {
      t.entries_[key(from, to)] = e;
      t.total_ += e.count;
    }
    return t;
  }

 private:
  static std::uint64_t key(std::uint32_t from, std::uint32_t to) {
    return (static_cast<std::uint64_t>(from) << 16) | to;
  }

  std::unordered_map<std::uint64_t, Entry> entries_;
  std::int64_t total_ = 0;
};

/// Records one recommendation exchange as two training examples: the
/// gains-delta of moving from b to b2 and its negation for the reverse
/// direction. p is the customer's last offer on the interest bundle b, p2
/// her counter on the recommended bundle b2.
inline void record_exchange(GainsTable& table, const Bundle& b, double p,
                            const Bundle& b2, double p2, const ShopValuation& sv) {
  if (hamming(b, b2) != 1)
    throw std::invalid_argument("record_exchange: bundles must be adjacent");
  const double delta = (p2 - sv.value(b2)) - (p - sv.value(b));
  table.record(b, b2, delta);
  table.record(b2, b, -delta);
}

struct LambdaSchedule {
  double lambda0 = 0.001;
  double growth = 1e-5;  // per recorded example
  double cap = 5.0;
};

inline double lambda_value(const LambdaSchedule& sched, std::int64_t examples_recorded) {
  return std::min(sched.cap, sched.lambda0 + sched.growth * static_cast<double>(examples_recorded));
}

/// Sequential softmax sampling without replacement: the first element is
/// drawn with probability proportional to exp(lambda * mean), removed, and
/// the rule repeated on the remainder. Exponents are max-shifted; the
/// result is invariant to adding a constant to all means.
inline std::vector<Bundle> softmax_order(const GainsTable& table, const Bundle& b,
                                         std::vector<Bundle> pool, double lambda,
                                         Rng& rng) {
  std::vector<Bundle> out;
  out.reserve(pool.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> w;
  while (!pool.empty()) {
    w.resize(pool.size());
    double shift = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      w[i] = lambda * table.mean(b, pool[i]);
      shift = std::max(shift, w[i]);
    }
    double total = 0.0;
    for (double& x : w) total += (x = std::exp(x - shift));
    double u = unit(rng) * total;
    std::size_t pick = pool.size() - 1;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      u -= w[i];
      if (u <= 0.0) {
        pick = i;
        break;
      }
    }
    out.push_back(pool[pick]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

/// Uniform random permutation of the neighborhood (the benchmark policy).
inline std::vector<Bundle> benchmark_order(std::vector<Bundle> pool, Rng& rng) {
  for (std::size_t i = pool.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(pool[i - 1], pool[pick(rng)]);
  }
  return pool;
}

/// Common interface for the three neighborhood-ordering policies consumed
/// by the recommendation controller.
class Estimator {
 public:
  virtual ~Estimator() = default;
  /// Order the neighbors of the interest bundle, best recommendation first.
  /// latest_price is the customer's most recent offer on the interest bundle.
  virtual std::vector<Bundle> order(const Bundle& interest, double latest_price,
                                    std::vector<Bundle> neighbors, Rng& rng) = 0;
  /// Feed one recommendation exchange back into the estimator; only the
  /// learned estimator uses this.
  virtual void observe_exchange(const Bundle& /*b*/, double /*p*/, const Bundle& /*b2*/,
                                double /*p2*/) {}
};

/// The online-learning estimator: tabular running means ordered by the
/// sequential softmax rule, with lambda rising as examples accumulate.
class LearnedEstimator : public Estimator {
 public:
  LearnedEstimator(const ShopValuation& sv, LambdaSchedule sched = {})
      : sv_(&sv), sched_(sched) {}

  std::vector<Bundle> order(const Bundle& interest, double /*latest_price*/,
                            std::vector<Bundle> neighbors, Rng& rng) override {
    const double lambda = lambda_value(sched_, table_.total_examples());
    return softmax_order(table_, interest, std::move(neighbors), lambda, rng);
  }

  void observe_exchange(const Bundle& b, double p, const Bundle& b2, double p2) override {
    record_exchange(table_, b, p, b2, p2, *sv_);
  }

  GainsTable& table() { return table_; }
  const GainsTable& table() const { return table_; }
  double current_lambda() const { return lambda_value(sched_, table_.total_examples()); }

 private:
  const ShopValuation* sv_;
  LambdaSchedule sched_;
  GainsTable table_;
};

/// The distribution oracle: has access to the true generating distribution
/// and orders neighbors by the Monte-Carlo estimate of
/// E[v_c(b') | v_c(b) >= p] - v_s(b'). Prices are bucketed and the seed is
/// fixed per (bundle, bucket) context, so estimates are pure functions of
/// the context and can be memoized.
class OracleEstimator : public Estimator {
 public:
  OracleEstimator(const PreferencePopulation& pop, const ShopValuation& sv,
                  std::uint64_t seed_base, int budget = 20000,
                  double bucket_width = 25.0, double min_accept_rate = 1e-3)
      : pop_(&pop),
        sv_(&sv),
        seed_base_(seed_base),
        budget_(budget),
        bucket_width_(bucket_width),
        min_accept_rate_(min_accept_rate) {}

  /// Rejection-sampled E[v_c(target) | v_c(given) >= threshold] for each
  /// target, over the joint normal of the involved bundle valuations. Falls
  /// back to the unconditioned mean when the condition is essentially never
  /// satisfied.
  std::vector<double> conditional_means(const Bundle& given, double threshold,
                                        const std::vector<Bundle>& targets) const {
    const int k = static_cast<int>(targets.size());
    Eigen::VectorXd mean(k + 1);
    Eigen::MatrixXd cov(k + 1, k + 1);
    auto bundle_at = [&](int i) -> const Bundle& { return i == 0 ? given : targets[i - 1]; };
    for (int i = 0; i <= k; ++i) {
      mean[i] = pop_->value_mean(bundle_at(i));
      for (int j = i; j <= k; ++j)
        cov(i, j) = cov(j, i) = pop_->value_cov(bundle_at(i), bundle_at(j));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    Eigen::MatrixXd factor = es.eigenvectors() *
                             es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

    Rng rng = make_rng(derive_seed(seed_base_, given.bits(), bucket_of(threshold)));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(k + 1), x(k + 1);
    Eigen::VectorXd sums = Eigen::VectorXd::Zero(k);
    std::int64_t accepted = 0, attempts = 0;
    const std::int64_t max_attempts =
        static_cast<std::int64_t>(static_cast<double>(budget_) / min_accept_rate_);
    while (accepted < budget_ && attempts < max_attempts) {
      ++attempts;
      for (int i = 0; i <= k; ++i) z[i] = normal(rng);
      x = mean + factor * z;
      if (x[0] < threshold) continue;
      ++accepted;
      sums += x.tail(k);
    }
    std::vector<double> out(k);
    if (accepted == 0 ||
        (accepted < budget_ &&
         static_cast<double>(accepted) / static_cast<double>(attempts) < min_accept_rate_)) {
      if (!warned_) {
        std::cerr << "OracleEstimator: acceptance rate below " << min_accept_rate_
                  << " for bundle " << given.to_bit_string()
                  << ", falling back to unconditioned means\n";
        warned_ = true;
      }
      for (int i = 0; i < k; ++i) out[i] = pop_->value_mean(targets[i]);
      return out;
    }
    for (int i = 0; i < k; ++i) out[i] = sums[i] / static_cast<double>(accepted);
    return out;
  }

  std::vector<Bundle> order(const Bundle& interest, double latest_price,
                            std::vector<Bundle> neighbors, Rng& /*rng*/) override {
    const std::int64_t bucket = bucket_of(latest_price);
    const std::uint64_t key =
        (static_cast<std::uint64_t>(interest.bits()) << 40) ^ static_cast<std::uint64_t>(bucket);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      // quantized threshold keeps the estimate a pure function of the context
      const double threshold = static_cast<double>(bucket) * bucket_width_;
      std::vector<Bundle> nbrs = neighborhood(interest);
      std::vector<double> means = conditional_means(interest, threshold, nbrs);
      std::unordered_map<std::uint32_t, double> by_bits;
      for (std::size_t i = 0; i < nbrs.size(); ++i)
        by_bits[nbrs[i].bits()] = means[i] - sv_->value(nbrs[i]);
      it = cache_.emplace(key, std::move(by_bits)).first;
    }
    const auto& score = it->second;
    std::stable_sort(neighbors.begin(), neighbors.end(),
                     [&](const Bundle& a, const Bundle& b) {
                       const double sa = score.at(a.bits()), sb = score.at(b.bits());
                       if (sa != sb) return sa > sb;
                       return a < b;  // deterministic tie-break
                     });
    return neighbors;
  }

 private:
  std::int64_t bucket_of(double price) const {
    if (!std::isfinite(price)) return price > 0 ? std::numeric_limits<std::int64_t>::max()
                                                : std::numeric_limits<std::int64_t>::min();
    return static_cast<std::int64_t>(std::floor(price / bucket_width_));
  }

  const PreferencePopulation* pop_;
  const ShopValuation* sv_;
  std::uint64_t seed_base_;
  int budget_;
  double bucket_width_;
  double min_accept_rate_;
  mutable bool warned_ = false;
  std::unordered_map<std::uint64_t, std::unordered_map<std::uint32_t, double>> cache_;
};

/// The benchmark: a uniformly random recommendation order.
class RandomEstimator : public Estimator {
 public:
  std::vector<Bundle> order(const Bundle& /*interest*/, double /*latest_price*/,
                            std::vector<Bundle> neighbors, Rng& rng) override {
    return benchmark_order(std::move(neighbors), rng);
  }
};

}  // namespace haggle
