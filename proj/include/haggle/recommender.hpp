#pragma once

#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <set>
#include <unordered_map>

#include "haggle/bundle.hpp"
#include "haggle/estimators.hpp"
#include "haggle/negotiation.hpp"
#include "haggle/preferences.hpp"
#include "haggle/rng.hpp"

namespace haggle {

inline constexpr double kConcessionEpsilon = 1e-9;

/// Predicted remaining rounds to a deal, extrapolated from the customer's
/// concession pace on the current bundle: (v_s(b) - p) / (p - p_prev).
/// A stalled or retreating customer maps to the +infinity sentinel, a price
/// at or above the shop's valuation to 0.
inline double predict_rounds(double shop_value_b, double p, double p_prev) {
  if (p - p_prev <= kConcessionEpsilon) return std::numeric_limits<double>::infinity();
  if (p >= shop_value_b) return 0.0;
  return (shop_value_b - p) / (p - p_prev);
}

/// 1 - exp(-0.25 dt), the probability that the shop recommends an
/// alternative bundle this round.
inline double recommend_probability(double dt) {
  if (dt < 0.0) dt = 0.0;
  if (std::isinf(dt)) return 1.0;
  return 1.0 - std::exp(-0.25 * dt);
}

/// Impact of a recommendation: 1 iff the customer's newest offer has a
/// strictly higher net monetary value for the shop than her best past offer.
inline int sign_promising(const Offer& best, const Offer& current, const ShopValuation& sv) {
  return current.price - sv.value(current.bundle) > best.price - sv.value(best.bundle) ? 1 : 0;
}

/// The shop's recommendation controller: tracks the interest bundle,
/// consumes the ordered recommendation set head-first, diverts the search
/// when a recommendation draws a promising response, and always returns to
/// the interest bundle before recommending again.
class Recommender : public ShopAdvisor {
 public:
  Recommender(const ShopValuation& sv, Estimator& estimator, const Bundle& b_init)
      : sv_(&sv), estimator_(&estimator), interest_(b_init) {}

  Bundle interest_bundle() const override { return interest_; }
  const std::deque<Bundle>& recommendation_set() const { return rec_set_; }
  const std::optional<Offer>& best_customer_offer() const { return best_offer_; }

  void on_customer_offer(const Offer& offer, Rng& rng, Trace* trace) override {
    if (pending_rec_ && offer.bundle == *pending_rec_) {
      const int s = best_offer_ ? sign_promising(*best_offer_, offer, *sv_) : 1;
      if (trace && last_rec_event_ >= 0) (*trace)[last_rec_event_].sign = s;
      estimator_->observe_exchange(interest_, interest_price_at_rec_, *pending_rec_,
                                   offer.price);
      if (s == 1) {
        interest_ = *pending_rec_;
        recommended_.clear();
        suppressed_ = false;
        rebuild_rec_set(offer.price, rng);
      }
      pending_rec_.reset();
    }

    const double net = offer.price - sv_->value(offer.bundle);
    if (!best_offer_ || net > best_offer_->price - sv_->value(best_offer_->bundle))
      best_offer_ = offer;

    PriceHistory& ph = prices_[offer.bundle.bits()];
    ph.prev = ph.last;
    ph.last = offer.price;
    ph.count += 1;

    if (!rec_set_built_) {
      rebuild_rec_set(offer.price, rng);
      rec_set_built_ = true;
    }
  }

  Bundle counter_bundle(const Offer& current, int /*pair_round*/, Rng& rng,
                        Trace* trace) override {
    if (suppressed_) return current.bundle;

    // Eq. 1 needs two customer prices for the same bundle; until then the
    // gate stays closed.
    auto it = prices_.find(current.bundle.bits());
    if (it == prices_.end() || it->second.count < 2) return current.bundle;
    const PriceHistory& ph = it->second;

    const double dt = predict_rounds(sv_->value(current.bundle), ph.last, ph.prev);
    const double pr = recommend_probability(dt);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) >= pr) return current.bundle;

    // a recommendation is always preceded by an offer containing the
    // interest bundle
    if (!(current.bundle == interest_)) return interest_;

    if (rec_set_.empty()) {
      rebuild_rec_set(ph.last, rng);
      if (rec_set_.empty()) {
        suppressed_ = true;
        return current.bundle;
      }
    }
    Bundle next = rec_set_.front();
    rec_set_.pop_front();
    recommended_.insert(next.bits());
    pending_rec_ = next;
    interest_price_at_rec_ = ph.last;
    if (trace) {
      trace->push_back({current.round + 1, Role::shop, next.bits(), 0.0,
                        EventKind::recommend, dt, pr, -1});
      last_rec_event_ = static_cast<int>(trace->size()) - 1;
    }
    return next;
  }

 private:
  struct PriceHistory {
    double last = 0.0, prev = 0.0;
    int count = 0;
  };

  void rebuild_rec_set(double latest_price, Rng& rng) {
    std::vector<Bundle> nbrs = neighborhood(interest_);
    std::erase_if(nbrs, [&](const Bundle& b) { return recommended_.contains(b.bits()); });
    rec_set_.clear();
    if (nbrs.empty()) return;
    for (const Bundle& b : estimator_->order(interest_, latest_price, std::move(nbrs), rng))
      rec_set_.push_back(b);
  }

  const ShopValuation* sv_;
  Estimator* estimator_;
  Bundle interest_;
  std::deque<Bundle> rec_set_;
  bool rec_set_built_ = false;
  std::optional<Bundle> pending_rec_;
  double interest_price_at_rec_ = 0.0;
  std::optional<Offer> best_offer_;
  std::set<std::uint32_t> recommended_;  // since the last interest change
  bool suppressed_ = false;
  std::unordered_map<std::uint32_t, PriceHistory> prices_;
  int last_rec_event_ = -1;
};

}  // namespace haggle
