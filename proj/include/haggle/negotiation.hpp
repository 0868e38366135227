#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "haggle/bundle.hpp"
#include "haggle/rng.hpp"

namespace haggle {

enum class Role { customer, shop };

inline const char* role_name(Role r) { return r == Role::customer ? "customer" : "shop"; }

struct Offer {
  Bundle bundle;
  double price;
  Role proposer;
  int round;  // index in the session history, starting at 0
};

struct History {
  std::vector<Offer> offers;
};

enum class StrategyKind { tdf, tftm };

struct StrategyParams {
  StrategyKind kind = StrategyKind::tdf;
  double gap_init = 0.5;  // 0.5 for the customer, 1.5 for the shop
  double delta = 0.03;    // decay rate per round; carried but unused by tftm
};

/// Time-dependent-fraction bid: the gap between bid and valuation is a
/// fraction of the valuation, closing as gap_init * exp(-delta t). The
/// customer bids below her valuation, the shop asks above his; a shop
/// gap_init of 1.5 means the opening ask is 1.5x the valuation.
inline double tdf_price(double valuation, Role role, const StrategyParams& params, int t) {
  const double decay = std::exp(-params.delta * t);
  if (role == Role::customer) return valuation * (1.0 - params.gap_init * decay);
  return valuation * (1.0 + (params.gap_init - 1.0) * decay);
}

/// Tit-for-tat concession: the improvement in the bargainer's own net
/// monetary value between the opponent's last two offers, clamped at zero
/// (the monotone clamp: no negative concessions, so the price never moves
/// away from the opponent).
inline double tftm_concession(std::optional<double> opp_net_last,
                              std::optional<double> opp_net_prev) {
  if (!opp_net_last || !opp_net_prev) return 0.0;
  return std::max(0.0, *opp_net_last - *opp_net_prev);
}

inline double tftm_price(const std::function<double(const Bundle&)>& own_valuation,
                         const std::vector<Offer>& opponent_history,
                         double own_last_price, Role role) {
  std::optional<double> last, prev;
  const std::size_t k = opponent_history.size();
  auto net = [&](const Offer& o) {
    return role == Role::customer ? own_valuation(o.bundle) - o.price
                                  : o.price - own_valuation(o.bundle);
  };
  if (k >= 1) last = net(opponent_history[k - 1]);
  if (k >= 2) prev = net(opponent_history[k - 2]);
  const double c = tftm_concession(last, prev);
  return role == Role::customer ? own_last_price + c : own_last_price - c;
}

/// Accept when the incoming offer is at least as good for the responder as
/// the responder's own planned counter-offer. Ties are accepted.
inline bool accept_offer(double own_net_incoming, double own_net_planned_counter) {
  return own_net_incoming >= own_net_planned_counter;
}

/// One negotiating party. Valuations are supplied as a function so the same
/// agent type serves both sides. State is only used by the tftm strategy.
class Agent {
 public:
  Agent(Role role, StrategyParams params, std::function<double(const Bundle&)> valuation)
      : role_(role), params_(params), valuation_(std::move(valuation)) {}

  Role role() const { return role_; }
  const StrategyParams& params() const { return params_; }
  double valuation(const Bundle& b) const { return valuation_(b); }

  double net_value(const Offer& o) const {
    return role_ == Role::customer ? valuation_(o.bundle) - o.price
                                   : o.price - valuation_(o.bundle);
  }

  /// The price this agent would put on bundle b at pair-round t, without
  /// committing any state.
  double peek_price(const Bundle& b, int t) const {
    if (params_.kind == StrategyKind::tdf) return tdf_price(valuation_(b), role_, params_, t);
    // tftm: the opening move is specified by gap_init, like tdf at t = 0
    if (!last_own_price_) {
      const double v = valuation_(b);
      return role_ == Role::customer ? v * (1.0 - params_.gap_init)
                                     : v * params_.gap_init;
    }
    const double c = tftm_concession(opp_net_last_, opp_net_prev_);
    // When the bundle on the table changes, the standing price is carried
    // over as a fraction of the valuation (the "monotone fraction"): the
    // agent re-evaluates and bids on the new bundle, implicitly rejecting
    // bundles it values little by offering a low price.
    double base = *last_own_price_;
    if (last_own_bundle_ && !(b == *last_own_bundle_)) {
      const double v_old = valuation_(*last_own_bundle_);
      if (std::abs(v_old) > 1e-6) base = *last_own_price_ * (valuation_(b) / v_old);
    }
    return role_ == Role::customer ? base + c : base - c;
  }

  void commit(const Offer& own) {
    last_own_price_ = own.price;
    last_own_bundle_ = own.bundle;
  }

  void observe(const Offer& opponent) {
    opp_net_prev_ = opp_net_last_;
    opp_net_last_ = net_value(opponent);
  }

 private:
  Role role_;
  StrategyParams params_;
  std::function<double(const Bundle&)> valuation_;
  std::optional<double> last_own_price_;
  std::optional<Bundle> last_own_bundle_;
  std::optional<double> opp_net_last_, opp_net_prev_;
};

enum class EventKind { offer, accept, recommend, breakdown };

inline const char* event_name(EventKind e) {
  switch (e) {
    case EventKind::offer: return "offer";
    case EventKind::accept: return "accept";
    case EventKind::recommend: return "recommend";
    case EventKind::breakdown: return "breakdown";
  }
  return "?";
}

struct TraceEvent {
  int round;
  Role actor;
  std::uint32_t bundle_bits;
  double price;
  EventKind kind;
  // recommend events only
  double dt = std::numeric_limits<double>::quiet_NaN();
  double prob = std::numeric_limits<double>::quiet_NaN();
  int sign = -1;  // filled in when the customer's response arrives
};

using Trace = std::vector<TraceEvent>;

/// The shop side's recommendation controller, as seen by the session loop:
/// it watches every customer offer and picks the bundle for each shop
/// counter-offer.
class ShopAdvisor {
 public:
  virtual ~ShopAdvisor() = default;
  virtual void on_customer_offer(const Offer& offer, Rng& rng, Trace* trace) = 0;
  virtual Bundle counter_bundle(const Offer& current, int pair_round, Rng& rng,
                                Trace* trace) = 0;
  /// The advisor's current estimate of the customer's interest bundle.
  virtual Bundle interest_bundle() const = 0;
};

struct SessionConfig {
  double breakdown_prob = 0.02;
  int max_pairs = 10000;  // hard stop for the no-breakdown, no-deal case
};

struct SessionOutcome {
  enum class Result { deal, breakdown };
  Result result;
  Offer final_offer;  // bundle on the table at termination
  int rounds;         // offer pairs elapsed, >= 1
  std::optional<Bundle> deal_bundle;
  std::optional<double> deal_price;
};

struct SessionResult {
  SessionOutcome outcome;
  History history;
  Trace trace;
};

/// One full shop-customer episode following the alternating-offers loop:
/// the customer opens on b_init; each iteration the shop first checks
/// acceptance, then (conditional on the continuation probability) consults
/// the advisor and counter-offers; the customer checks acceptance and
/// counters. Ends on a deal or on the exogenous breakdown draw.
inline SessionResult run_session(Agent& customer, Agent& shop, ShopAdvisor* advisor,
                                 const Bundle& b_init, const SessionConfig& config,
                                 Rng& rng) {
  History hist;
  Trace trace;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto finish = [&](SessionOutcome outcome) {
    return SessionResult{std::move(outcome), std::move(hist), std::move(trace)};
  };

  auto push_offer = [&](const Offer& o) {
    hist.offers.push_back(o);
    trace.push_back({o.round, o.proposer, o.bundle.bits(), o.price, EventKind::offer});
  };

  Offer opening{b_init, customer.peek_price(b_init, 0), Role::customer, 0};
  customer.commit(opening);
  shop.observe(opening);
  push_offer(opening);
  if (advisor) advisor->on_customer_offer(opening, rng, &trace);

  for (int t = 0;; ++t) {
    const Offer incoming = hist.offers.back();  // customer's latest

    const double planned_ask = shop.peek_price(incoming.bundle, t);
    if (accept_offer(shop.net_value(incoming), planned_ask - shop.valuation(incoming.bundle))) {
      trace.push_back({incoming.round + 1, Role::shop, incoming.bundle.bits(),
                       incoming.price, EventKind::accept});
      return finish({SessionOutcome::Result::deal, incoming, t + 1, incoming.bundle,
                     incoming.price});
    }

    if (unit(rng) < config.breakdown_prob || t + 1 > config.max_pairs) {
      trace.push_back({incoming.round + 1, Role::shop, incoming.bundle.bits(),
                       incoming.price, EventKind::breakdown});
      return finish({SessionOutcome::Result::breakdown, incoming, t + 1, std::nullopt,
                     std::nullopt});
    }

    Bundle counter = advisor ? advisor->counter_bundle(incoming, t, rng, &trace)
                             : incoming.bundle;
    Offer shop_offer{counter, shop.peek_price(counter, t), Role::shop,
                     incoming.round + 1};
    shop.commit(shop_offer);
    customer.observe(shop_offer);
    push_offer(shop_offer);

    const double planned_bid = customer.peek_price(counter, t + 1);
    if (accept_offer(customer.net_value(shop_offer),
                     customer.valuation(counter) - planned_bid)) {
      trace.push_back({shop_offer.round + 1, Role::customer, counter.bits(),
                       shop_offer.price, EventKind::accept});
      return finish({SessionOutcome::Result::deal, shop_offer, t + 1, counter,
                     shop_offer.price});
    }

    Offer counter_bid{counter, planned_bid, Role::customer, shop_offer.round + 1};
    customer.commit(counter_bid);
    shop.observe(counter_bid);
    push_offer(counter_bid);
    if (advisor) advisor->on_customer_offer(counter_bid, rng, &trace);
  }
}

/// Line-delimited trace record: round proposer bundle-bits price event, with
/// dt, probability and sign appended on recommend lines.
inline std::string format_trace_event(const TraceEvent& e, int n) {
  char buf[160];
  std::string bits = Bundle(e.bundle_bits, n).to_bit_string();
  if (e.kind == EventKind::recommend) {
    std::snprintf(buf, sizeof(buf), "%d %s %s %.6g recommend dt=%.6g pr=%.6g sign=%d",
                  e.round, role_name(e.actor), bits.c_str(), e.price, e.dt, e.prob,
                  e.sign);
  } else {
    std::snprintf(buf, sizeof(buf), "%d %s %s %.6g %s", e.round, role_name(e.actor),
                  bits.c_str(), e.price, event_name(e.kind));
  }
  return buf;
}

}  // namespace haggle
