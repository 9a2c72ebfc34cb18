#pragma once

// Market liquid welfare and its optimal structure.
//
// The liquid welfare of a trade vector caps each agent's gain from purchases
// by their budget:  sum_i [ v_i * Gamma_i + min{v_i * x_i, B_i} ].
// The welfare-maximizing distribution routes all resources to a prefix of
// value-sorted buyers, each buying up to B_i / v_i, with one pivot agent
// absorbing the remainder. A single uniform price plus per-agent intervals
// reproduces that optimum as the unique equilibrium of free trading.

#include <cmath>
#include <cstdint>
#include <vector>

#include "exmarket/types.hpp"

namespace exmarket::welfare {

/// Liquid welfare of a trade vector (canonical order). Performs no
/// feasibility check; trades below -Gamma_i are the caller's responsibility
/// and produce values no market run ever evaluates.
inline double mlw(const Instance& instance, const std::vector<double>& trades) {
  if (trades.size() != instance.size()) {
    throw std::invalid_argument("trade vector length does not match instance");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < instance.size(); ++i) {
    if (!std::isfinite(trades[i])) {
      throw std::invalid_argument("trade entries must be finite");
    }
    const Agent& a = instance[i];
    total += a.value * a.endowment + std::min(a.value * trades[i], a.budget);
  }
  return total;
}

struct OptimalDistribution {
  std::size_t k_star = 0;      ///< buyer prefix size, 0 = empty prefix
  std::vector<double> x_star;  ///< welfare-optimal trades
  double opt = 0.0;            ///< maximum liquid welfare
};

/// Per-agent demand cap B_i / v_i; zero-value agents are treated as infinite
/// demand, which keeps them out of every buyer prefix.
inline double demand_cap(const Agent& a) {
  return a.value > 0.0 ? a.budget / a.value : kInf;
}

/// Welfare-optimal resource distribution. The prefix is the largest l such
/// that the first l agents' total demand fits into the remaining agents'
/// endowment; l = 0 (empty prefix) is always admissible.
inline OptimalDistribution optimal_distribution(const Instance& instance) {
  const std::size_t n = instance.size();
  std::vector<double> suffix_endow(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    suffix_endow[i] = suffix_endow[i + 1] + instance[i].endowment;
  }
  std::size_t k = 0;
  double prefix_demand = 0.0, demand_at_k = 0.0;
  for (std::size_t l = 1; l <= n; ++l) {
    prefix_demand += demand_cap(instance[l - 1]);
    if (prefix_demand <= suffix_endow[l]) {
      k = l;
      demand_at_k = prefix_demand;
    }
  }
  OptimalDistribution out;
  out.k_star = k;
  out.x_star.resize(n, 0.0);
  for (std::size_t i = 0; i < k; ++i) out.x_star[i] = demand_cap(instance[i]);
  if (k < n) {
    out.x_star[k] = suffix_endow[k + 1] - demand_at_k;
    for (std::size_t i = k + 1; i < n; ++i) {
      out.x_star[i] = -instance[i].endowment;
    }
  }
  out.opt = mlw(instance, out.x_star);
  return out;
}

/// Exhaustive search over the lattice of per-agent trades with common step
/// Gamma_total / resolution, maximizing liquid welfare subject to trades
/// summing to zero. Independent of the closed-form optimum; intended as an
/// oracle for small instances. Error shrinks linearly in the step.
inline double brute_force_opt(const Instance& instance,
                              std::size_t grid_resolution) {
  if (grid_resolution < 100) {
    throw std::invalid_argument("grid resolution must be at least 100");
  }
  if (instance.size() > 8) {
    throw std::invalid_argument("instance too large for the grid-point budget");
  }
  const std::size_t n = instance.size();
  const double total = instance.total_endowment();
  if (total <= 0.0) {
    return mlw(instance, std::vector<double>(n, 0.0));
  }
  const double step = total / static_cast<double>(grid_resolution);
  const auto res = static_cast<std::int64_t>(grid_resolution);

  // dp over partial trade sums, in lattice units, offset by `res`.
  const std::int64_t span = 2 * res + 1;
  const double neg_inf = -kInf;
  std::vector<double> dp(span, neg_inf), next(span, neg_inf);
  dp[res] = 0.0;

  std::vector<double> remaining_endow(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    remaining_endow[i] = remaining_endow[i + 1] + instance[i].endowment;
  }

  for (std::size_t i = 0; i < n; ++i) {
    const Agent& a = instance[i];
    const auto lo = static_cast<std::int64_t>(std::ceil(-a.endowment / step));
    const auto hi = static_cast<std::int64_t>(
        std::floor((total - a.endowment) / step));
    // Everything still sellable after this agent; partial sums beyond it can
    // never return to zero.
    const auto sell_cap = static_cast<std::int64_t>(
        std::floor(remaining_endow[i + 1] / step)) + 1;
    std::fill(next.begin(), next.end(), neg_inf);
    for (std::int64_t s = 0; s < span; ++s) {
      if (dp[s] == neg_inf) continue;
      for (std::int64_t c = lo; c <= hi; ++c) {
        const std::int64_t t = s + c;
        if (t < 0 || t >= span || t - res > sell_cap) continue;
        const double x = static_cast<double>(c) * step;
        const double gain = std::min(a.value * x, a.budget);
        if (dp[s] + gain > next[t]) next[t] = dp[s] + gain;
      }
    }
    dp.swap(next);
  }
  double base = 0.0;
  for (const Agent& a : instance.agents()) base += a.value * a.endowment;
  return base + dp[res];
}

struct MopConstraints {
  double price = 0.0;
  std::vector<ExchangeConstraint> constraints;
};

/// Uniform price plus per-agent intervals whose unique equilibrium attains
/// the optimal liquid welfare. Buyers of the optimal distribution keep
/// [0, x*_i], sellers keep [x*_i, 0]; agents whose value ties the price are
/// re-intervaled so that demand exactly balances supply. Not truthful.
inline MopConstraints market_optimal_price(const Instance& instance) {
  const std::size_t n = instance.size();
  const OptimalDistribution od = optimal_distribution(instance);
  std::vector<double> x = od.x_star;

  // A zero-value pivot only ever buys from zero-value sellers, a trade that
  // moves no welfare but would drag the uniform price to zero. Shrink those
  // sales to what the positive-value prefix needs and drop the pivot's buy.
  if (od.k_star < n && instance[od.k_star].value == 0.0 && x[od.k_star] > 0.0) {
    double supply = 0.0;
    for (std::size_t j = od.k_star + 1; j < n; ++j) supply += -x[j];
    const double factor =
        supply > 0.0 ? (supply - x[od.k_star]) / supply : 0.0;
    for (std::size_t j = od.k_star + 1; j < n; ++j) x[j] *= factor;
    x[od.k_star] = 0.0;
  }

  // No tolerance snapping here: dropping even tiny trades from the balance
  // bookkeeping would unbalance the constructed caps. Signed zeros compare
  // equal to zero, so zero-trade agents are excluded exactly.
  bool any_trade = false;
  for (double xi : x) {
    if (xi != 0.0) any_trade = true;
  }
  MopConstraints out;
  out.constraints.assign(n, ExchangeConstraint::no_trade());
  if (!any_trade) {
    // Degenerate market: price above every valuation, nobody trades, and the
    // no-trade welfare is already optimal.
    out.price = instance[0].value + 1.0;
    for (auto& c : out.constraints) c.price = out.price;
    return out;
  }

  // Zero-trade agents keep zero-width intervals and have no say in the
  // price. Buyers of a positive amount all hold positive values.
  double price = kInf;
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > 0.0) price = std::min(price, instance[i].value);
  }

  // Agents whose value equals the candidate price need their own treatment:
  // the imbalance left by everyone else decides whether they buy or sell.
  std::vector<std::size_t> tied;
  double demand_rest = 0.0, supply_rest = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Agent& a = instance[i];
    if (a.value == price) {
      tied.push_back(i);
      continue;
    }
    if (x[i] > 0.0) {
      demand_rest += std::min(x[i], a.budget / price);
    } else {
      supply_rest += std::min(-x[i], a.endowment);
    }
  }
  const double delta = supply_rest - demand_rest;

  for (std::size_t i = 0; i < n; ++i) {
    if (instance[i].value == price) continue;
    if (x[i] > 0.0) {
      out.constraints[i] = {0.0, x[i], 0.0};
    } else {
      out.constraints[i] = {x[i], 0.0, 0.0};
    }
  }

  if (delta >= 0.0) {
    // Tied agents absorb the leftover supply as buyers, split in proportion
    // to their budget caps at the price.
    double cap_sum = 0.0;
    for (std::size_t i : tied) cap_sum += instance[i].budget / price;
    for (std::size_t i : tied) {
      const double cap = instance[i].budget / price;
      const double r = cap_sum > 0.0 ? delta * (cap / cap_sum) : 0.0;
      out.constraints[i] = {0.0, r, 0.0};
    }
  } else {
    // Tied agents must sell. Raise the price halfway toward the next larger
    // buyer value so the comparison v_i >= price stays numerically robust,
    // then split the required supply in proportion to endowments.
    double next_buyer_value = kInf;
    for (std::size_t i = 0; i < n; ++i) {
      if (x[i] > 0.0 && instance[i].value > price) {
        next_buyer_value = std::min(next_buyer_value, instance[i].value);
      }
    }
    if (next_buyer_value == kInf) next_buyer_value = price + 2.0;
    double endow_sum = 0.0;
    for (std::size_t i : tied) endow_sum += instance[i].endowment;
    for (std::size_t i : tied) {
      const double l =
          endow_sum > 0.0 ? -delta * (instance[i].endowment / endow_sum) : 0.0;
      out.constraints[i] = {-l, 0.0, 0.0};
    }
    price = (price + next_buyer_value) / 2.0;
  }

  out.price = price;
  for (auto& c : out.constraints) c.price = price;
  return out;
}

/// Uniform price guaranteeing at least half the optimal welfare when every
/// agent may trade without interval limits: opt / (2 * Gamma_total).
inline double approx_price(const Instance& instance) {
  const double total = instance.total_endowment();
  if (total <= 0.0) {
    throw std::invalid_argument(
        "approximate price undefined: no resources in the market");
  }
  return optimal_distribution(instance).opt / (2.0 * total);
}

/// Aggregate of the welfare-side quantities. approx_price is NaN when the
/// market holds no resources.
struct WelfareSummary {
  double opt = 0.0;
  std::size_t k_star = 0;
  std::vector<double> x_star;
  double mop_price = 0.0;
  std::vector<ExchangeConstraint> mop_intervals;
  double approx_price = 0.0;
};

inline WelfareSummary summarize(const Instance& instance) {
  WelfareSummary s;
  OptimalDistribution od = optimal_distribution(instance);
  s.opt = od.opt;
  s.k_star = od.k_star;
  s.x_star = std::move(od.x_star);
  MopConstraints mop = market_optimal_price(instance);
  s.mop_price = mop.price;
  s.mop_intervals = std::move(mop.constraints);
  s.approx_price = instance.total_endowment() > 0.0
                       ? welfare::approx_price(instance)
                       : std::numeric_limits<double>::quiet_NaN();
  return s;
}

}  // namespace exmarket::welfare
