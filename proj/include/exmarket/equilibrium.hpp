#pragma once

// Stage-2 semantics: which market states free trading can reach under a set
// of exchange constraints, and the worst case over them.
//
// An agent with v_i >= lambda_i acts as a buyer (indifferent agents prefer
// resources over money), everyone else as a seller. A state is reachable when
// trades sum to zero, every agent respects their interval, price line, budget
// and endowment, and no further trade is possible: either every buyer is
// budget- or interval-capped, or every seller is sold out.

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "exmarket/random.hpp"
#include "exmarket/types.hpp"
#include "exmarket/welfare.hpp"

namespace exmarket::equilibrium {

inline bool is_buyer(const Agent& a, const ExchangeConstraint& c) {
  return a.value >= c.price;
}

/// Most a buyer can still absorb: interval cap or budget at the price.
inline double buyer_cap(const Agent& a, const ExchangeConstraint& c) {
  const double budget_cap = c.price > 0.0 ? a.budget / c.price : kInf;
  return std::min(c.upper, budget_cap);
}

/// Most a seller can release: interval cap or endowment. Always finite.
inline double seller_cap(const Agent& a, const ExchangeConstraint& c) {
  return std::min(-c.lower, a.endowment);
}

/// Reachability of a concrete state: self-consistency, feasibility, and the
/// no-further-trade condition. Budget and endowment limits are checked as
/// part of feasibility since rational agents never cross them.
inline bool is_reachable(const Instance& instance,
                         const std::vector<ExchangeConstraint>& constraints,
                         const MarketState& state) {
  const std::size_t n = instance.size();
  if (constraints.size() != n || state.trades.size() != n ||
      state.payments.size() != n) {
    throw std::invalid_argument("constraint/state lengths do not match instance");
  }
  double sum = 0.0;
  for (double x : state.trades) sum += x;
  if (std::abs(sum) > kTol) return false;

  bool buyers_done = true, sellers_done = true;
  for (std::size_t i = 0; i < n; ++i) {
    const Agent& a = instance[i];
    const ExchangeConstraint& c = constraints[i];
    const double x = state.trades[i];
    const double p = state.payments[i];
    if (x < c.lower - kTol || x > c.upper + kTol) return false;
    if (!nearly_equal(p, c.price * x)) return false;
    if (p > a.budget + kTol) return false;
    if (x < -a.endowment - kTol) return false;
    if (is_buyer(a, c)) {
      const bool capped =
          p >= a.budget - kTol || x >= c.upper - kTol;  // upper may be +inf
      if (!capped) buyers_done = false;
    } else {
      const double floor = std::max(-a.endowment, c.lower);
      if (x > floor + kTol) sellers_done = false;
    }
  }
  return buyers_done || sellers_done;
}

/// Reachable-set summary when the equilibrium is unique.
struct ReachableSetSummary {
  bool unique = true;
  MarketState state;
  double worst_welfare = 0.0;
  std::vector<double> per_agent_worst_utility;
  std::vector<std::size_t> buyer_set;
  std::vector<std::size_t> seller_set;
};

/// Uniqueness criterion: when aggregate buyer demand (interval- and
/// budget-capped) equals aggregate seller supply, exactly one state is
/// reachable and every cap binds. Returns nullopt when the balance fails or
/// a cap is infinite.
inline std::optional<ReachableSetSummary> check_equilibrium_unique(
    const Instance& instance,
    const std::vector<ExchangeConstraint>& constraints) {
  const std::size_t n = instance.size();
  if (constraints.size() != n) {
    throw std::invalid_argument("constraint length does not match instance");
  }
  double demand = 0.0, supply = 0.0;
  std::vector<std::size_t> buyers, sellers;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_buyer(instance[i], constraints[i])) {
      buyers.push_back(i);
      demand += buyer_cap(instance[i], constraints[i]);
    } else {
      sellers.push_back(i);
      supply += seller_cap(instance[i], constraints[i]);
    }
  }
  if (!std::isfinite(demand) || !std::isfinite(supply)) return std::nullopt;
  if (!nearly_equal(demand, supply)) return std::nullopt;

  ReachableSetSummary out;
  out.state = MarketState::zeros(n);
  for (std::size_t i : buyers) {
    out.state.trades[i] = buyer_cap(instance[i], constraints[i]);
  }
  for (std::size_t i : sellers) {
    out.state.trades[i] = -seller_cap(instance[i], constraints[i]);
  }
  out.per_agent_worst_utility.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.state.payments[i] = constraints[i].price * out.state.trades[i];
    out.per_agent_worst_utility[i] =
        instance[i].value * out.state.trades[i] - out.state.payments[i];
  }
  out.worst_welfare = welfare::mlw(instance, out.state.trades);
  out.buyer_set = std::move(buyers);
  out.seller_set = std::move(sellers);
  return out;
}

struct WorstWelfare {
  double welfare = 0.0;
  /// False when the buyer-side minimization fell back to the greedy bound;
  /// `welfare` is then a certified lower bound and `state` a witness whose
  /// own welfare may sit slightly above it.
  bool exact = true;
  MarketState state;
};

namespace detail {

// Minimize sum_i min(v_i x_i, B_i) over { sum x = target, 0 <= x_i <= cap_i }
// exactly, by enumerating polytope vertices: all coordinates at a bound
// except at most one. Caps and target are finite, caps pre-clamped to target.
inline void min_concave_split_exact(const std::vector<double>& values,
                                    const std::vector<double>& budgets,
                                    const std::vector<double>& caps,
                                    double target, std::vector<double>& best_x,
                                    double& best) {
  const std::size_t m = caps.size();
  if (m > 24) {
    throw std::invalid_argument("exact worst-case split limited to 24 buyers");
  }
  const double eps = 1e-12 * std::max(1.0, target);
  best = kInf;
  best_x.assign(m, 0.0);
  const std::uint64_t masks = 1ull << m;
  std::vector<double> x(m);
  for (std::uint64_t mask = 0; mask < masks; ++mask) {
    double base = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (mask >> i & 1) base += caps[i];
    }
    if (base > target + eps) continue;
    const double rem = target - base;
    auto evaluate = [&](std::size_t frac) {
      double val = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        x[i] = (mask >> i & 1) ? caps[i] : 0.0;
      }
      if (frac != m) x[frac] += rem;
      for (std::size_t i = 0; i < m; ++i) {
        val += std::min(values[i] * x[i], budgets[i]);
      }
      if (val < best) {
        best = val;
        best_x = x;
      }
    };
    if (rem <= eps) {
      evaluate(m);
      continue;
    }
    for (std::size_t f = 0; f < m; ++f) {
      if ((mask >> f & 1) || rem > caps[f] + eps) continue;
      evaluate(f);
    }
  }
}

// Greedy lower bound for the same minimization: each term is bounded below
// by its chord x * min(v c, B) / c, and the linear chord sum is minimized by
// filling the flattest chords first. The fill is a feasible witness.
inline void min_concave_split_greedy(const std::vector<double>& values,
                                     const std::vector<double>& budgets,
                                     const std::vector<double>& caps,
                                     double target, std::vector<double>& x,
                                     double& bound) {
  const std::size_t m = caps.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> slope(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    slope[i] = caps[i] > 0.0 ? std::min(values[i] * caps[i], budgets[i]) / caps[i]
                             : 0.0;
  }
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return slope[a] < slope[b]; });
  x.assign(m, 0.0);
  bound = 0.0;
  double rem = target;
  for (std::size_t i : order) {
    if (rem <= 0.0) break;
    const double take = std::min(caps[i], rem);
    x[i] = take;
    bound += slope[i] * take;
    rem -= take;
  }
}

}  // namespace detail

/// Minimum liquid welfare over all reachable states. When demand covers
/// supply, sellers are forced out entirely and the worst buyer split of the
/// supply is a concave minimization solved exactly up to `exact_limit`
/// buyers (greedy chord bound beyond). When supply covers demand, buyers are
/// forced to their caps and the worst case routes sales through the
/// highest-value sellers.
inline WorstWelfare worst_reachable_welfare(
    const Instance& instance,
    const std::vector<ExchangeConstraint>& constraints,
    std::size_t exact_limit = 12) {
  const std::size_t n = instance.size();
  if (constraints.size() != n) {
    throw std::invalid_argument("constraint length does not match instance");
  }
  std::vector<std::size_t> buyers, sellers;
  double demand = 0.0, supply = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_buyer(instance[i], constraints[i])) {
      buyers.push_back(i);
      demand += buyer_cap(instance[i], constraints[i]);
    } else {
      sellers.push_back(i);
      supply += seller_cap(instance[i], constraints[i]);
    }
  }

  WorstWelfare out;
  out.state = MarketState::zeros(n);
  double fixed = 0.0;
  for (const Agent& a : instance.agents()) fixed += a.value * a.endowment;

  if (demand >= supply) {
    // Sellers exhaust; the traded volume is the total supply.
    for (std::size_t j : sellers) {
      const double sold = seller_cap(instance[j], constraints[j]);
      out.state.trades[j] = -sold;
      fixed += instance[j].value * -sold;
    }
    std::vector<double> values, budgets, caps;
    std::vector<std::size_t> active;
    for (std::size_t i : buyers) {
      const double cap =
          std::min(buyer_cap(instance[i], constraints[i]), supply);
      if (cap <= 0.0) continue;
      active.push_back(i);
      values.push_back(instance[i].value);
      budgets.push_back(instance[i].budget);
      caps.push_back(cap);
    }
    double buyer_min = 0.0;
    std::vector<double> x;
    if (supply <= 0.0) {
      x.assign(active.size(), 0.0);
    } else if (active.size() <= exact_limit) {
      detail::min_concave_split_exact(values, budgets, caps, supply, x,
                                      buyer_min);
    } else {
      detail::min_concave_split_greedy(values, budgets, caps, supply, x,
                                       buyer_min);
      out.exact = false;
    }
    for (std::size_t a = 0; a < active.size(); ++a) {
      out.state.trades[active[a]] = x[a];
    }
    out.welfare = fixed + buyer_min;
  } else {
    // Buyers exhaust; the worst case sells as much as possible from the
    // highest-value sellers.
    for (std::size_t i : buyers) {
      const double cap = buyer_cap(instance[i], constraints[i]);
      out.state.trades[i] = cap;
      fixed += std::min(instance[i].value * cap, instance[i].budget);
    }
    std::vector<std::size_t> order = sellers;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return instance[a].value > instance[b].value;
    });
    double rem = demand;
    for (std::size_t j : order) {
      const double sold = std::min(seller_cap(instance[j], constraints[j]), rem);
      out.state.trades[j] = -sold;
      fixed += instance[j].value * -sold;
      rem -= sold;
      if (rem <= 0.0) break;
    }
    out.welfare = fixed;
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.state.payments[i] = constraints[i].price * out.state.trades[i];
  }
  return out;
}

/// Per-agent minimum utility over all reachable states. On the short side of
/// the market every agent is forced to their cap; on the long side the worst
/// case lets everyone else trade first.
inline std::vector<double> worst_case_utilities(
    const Instance& instance,
    const std::vector<ExchangeConstraint>& constraints) {
  const std::size_t n = instance.size();
  if (constraints.size() != n) {
    throw std::invalid_argument("constraint length does not match instance");
  }
  std::vector<double> caps(n, 0.0);
  std::vector<bool> buying(n, false);
  double demand = 0.0, supply = 0.0;
  std::size_t inf_buyers = 0;
  double finite_demand = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    buying[i] = is_buyer(instance[i], constraints[i]);
    if (buying[i]) {
      caps[i] = buyer_cap(instance[i], constraints[i]);
      demand += caps[i];
      if (std::isfinite(caps[i])) {
        finite_demand += caps[i];
      } else {
        ++inf_buyers;
      }
    } else {
      caps[i] = seller_cap(instance[i], constraints[i]);
      supply += caps[i];
    }
  }

  std::vector<double> utilities(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Agent& a = instance[i];
    const double margin =
        buying[i] ? a.value - constraints[i].price : constraints[i].price - a.value;
    if (caps[i] <= 0.0) continue;
    double worst_trade;
    if (buying[i]) {
      if (demand <= supply) {
        worst_trade = caps[i];
      } else {
        // Everyone else buys first.
        const std::size_t other_inf = inf_buyers - (std::isfinite(caps[i]) ? 0 : 1);
        const double others =
            other_inf > 0 ? kInf
                          : finite_demand - (std::isfinite(caps[i]) ? caps[i] : 0.0);
        worst_trade = std::max(0.0, supply - others);
      }
    } else {
      if (supply <= demand) {
        worst_trade = caps[i];
      } else {
        // demand is finite here since supply always is.
        const double others = supply - caps[i];
        worst_trade = std::max(0.0, demand - others);
      }
    }
    utilities[i] = margin * worst_trade;
  }
  return utilities;
}

/// One reachable state realized by random bilateral trading: random willing
/// buyer-seller pairs exchange random feasible quantities until no pair
/// remains or `max_steps` is hit, after which a greedy pass clears the short
/// side. The result always satisfies is_reachable.
inline MarketState simulate_trades(
    const Instance& instance,
    const std::vector<ExchangeConstraint>& constraints, RandomSource& rng,
    std::size_t max_steps) {
  const std::size_t n = instance.size();
  if (constraints.size() != n) {
    throw std::invalid_argument("constraint length does not match instance");
  }
  if (max_steps == 0) throw std::invalid_argument("max_steps must be >= 1");

  MarketState state = MarketState::zeros(n);
  const double act_eps = 1e-12 * std::max(1.0, instance.total_endowment());
  std::vector<std::size_t> buyers, sellers;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_buyer(instance[i], constraints[i])) {
      buyers.push_back(i);
    } else {
      sellers.push_back(i);
    }
  }
  auto buyer_residual = [&](std::size_t i) {
    return buyer_cap(instance[i], constraints[i]) - state.trades[i];
  };
  auto seller_residual = [&](std::size_t j) {
    return seller_cap(instance[j], constraints[j]) + state.trades[j];
  };
  auto apply = [&](std::size_t b, std::size_t s, double q) {
    state.trades[b] += q;
    state.payments[b] += constraints[b].price * q;
    state.trades[s] -= q;
    state.payments[s] -= constraints[s].price * q;
  };

  std::vector<std::size_t> wb, ws;
  auto refresh = [&]() {
    wb.clear();
    ws.clear();
    for (std::size_t i : buyers) {
      if (buyer_residual(i) > act_eps) wb.push_back(i);
    }
    for (std::size_t j : sellers) {
      if (seller_residual(j) > act_eps) ws.push_back(j);
    }
  };

  for (std::size_t step = 0; step < max_steps; ++step) {
    refresh();
    if (wb.empty() || ws.empty()) return state;
    const std::size_t b = wb[rng.uniform_index(wb.size())];
    const std::size_t s = ws[rng.uniform_index(ws.size())];
    const double qmax = std::min(buyer_residual(b), seller_residual(s));
    apply(b, s, rng.uniform01() * qmax);
  }

  // Clearing pass: pair off residuals in index order, each trade exhausting
  // one side of the pair.
  std::size_t guard = 2 * n + 4;
  while (guard-- > 0) {
    refresh();
    if (wb.empty() || ws.empty()) return state;
    const double q = std::min(buyer_residual(wb.front()), seller_residual(ws.front()));
    if (!std::isfinite(q)) {
      // An unbounded buyer facing an unbounded seller cannot occur: seller
      // residuals are capped by endowments.
      throw std::runtime_error("trade simulator: infinite clearing quantity");
    }
    apply(wb.front(), ws.front(), q);
  }
  throw std::runtime_error("trade simulator failed to clear the market");
}

}  // namespace exmarket::equilibrium
