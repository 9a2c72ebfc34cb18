#pragma once

// The three market mechanisms.
//
// Sampling-based uniform pricing: price a random fraction of agents out of
// the market, estimate the half-optimal uniform price from their reports,
// and let everyone else trade freely at it. Universally truthful and
// profitable; near-half-optimal in large markets.
//
// Differential pricing: split agents at the partition point k, the largest
// value-sorted prefix whose total budget fits into the tail's endowment at
// the pivot value. Each agent's trade cap comes from the resulting
// allocation function and their unit price from the threshold-payment rule
// p_i = b_i x_i - integral of the allocation between its sign-crossing value
// and b_i, which makes truth-telling optimal. Half-optimal everywhere, at
// the cost of a bounded subsidy.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "exmarket/equilibrium.hpp"
#include "exmarket/random.hpp"
#include "exmarket/types.hpp"
#include "exmarket/welfare.hpp"

namespace exmarket::mechanisms {

/// One agent as the mechanism sees it: reported value, effective budget and
/// endowment (reported in the multi-parameter setting, public otherwise),
/// and the canonical instance position it maps back to.
struct ReportedAgent {
  double value = 0.0;
  double budget = 0.0;
  double endowment = 0.0;
  std::size_t pos = 0;
};

/// Agents under their reports, sorted descending by reported value; ties keep
/// the lower original input index first.
inline std::vector<ReportedAgent> reported_view(const Instance& instance,
                                                const ReportProfile& reports) {
  reports.validate_against(instance);
  std::vector<ReportedAgent> view(instance.size());
  for (std::size_t i = 0; i < instance.size(); ++i) {
    view[i].value = reports.values[i];
    view[i].budget = reports.budgets ? (*reports.budgets)[i] : instance[i].budget;
    view[i].endowment =
        reports.endowments ? (*reports.endowments)[i] : instance[i].endowment;
    view[i].pos = i;
  }
  std::stable_sort(view.begin(), view.end(),
                   [&](const ReportedAgent& a, const ReportedAgent& b) {
                     if (a.value != b.value) return a.value > b.value;
                     return instance.original_index(a.pos) <
                            instance.original_index(b.pos);
                   });
  return view;
}

struct PartitionPoint {
  std::size_t k = 0;  ///< buyer prefix size; 0 = empty prefix
  double q = 0.0;     ///< pivot price; q <= 0 signals the no-trade fallback
};

namespace detail {

// Partition point and pivot price over an explicitly sorted agent list.
// k = max{ l : sum_{i<=l} B_i <= v_l * sum_{i>l} Gamma_i }, with l = 0 as the
// always-admissible base. q mimics a uniform market price: the budget/supply
// ratio when the prefix outbids the tail at the pivot value, else the pivot
// value itself. k = n (only possible with zero total budget) yields q = 0.
inline PartitionPoint partition_sorted(const std::vector<ReportedAgent>& sorted) {
  const std::size_t n = sorted.size();
  std::vector<double> suffix_endow(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    suffix_endow[i] = suffix_endow[i + 1] + sorted[i].endowment;
  }
  std::size_t k = 0;
  double prefix_budget = 0.0, budget_at_k = 0.0;
  for (std::size_t l = 1; l <= n; ++l) {
    prefix_budget += sorted[l - 1].budget;
    if (prefix_budget <= sorted[l - 1].value * suffix_endow[l]) {
      k = l;
      budget_at_k = prefix_budget;
    }
  }
  PartitionPoint out;
  out.k = k;
  if (k == n) {
    out.q = 0.0;
    return out;
  }
  const double pivot_value = sorted[k].value;
  if (budget_at_k > pivot_value * suffix_endow[k]) {
    out.q = budget_at_k / suffix_endow[k];
  } else {
    out.q = pivot_value;
  }
  return out;
}

// Designed net trades for a full reported profile: prefix agents buy
// B_i / q, the pivot absorbs the remainder, the tail sells out. All zero in
// the no-trade fallback.
inline std::vector<double> designed_allocations(
    const std::vector<ReportedAgent>& sorted, const PartitionPoint& pp) {
  const std::size_t n = sorted.size();
  std::vector<double> x(n, 0.0);
  if (pp.k == n || pp.q <= 0.0) return x;
  double prefix_budget = 0.0;
  for (std::size_t i = 0; i < pp.k; ++i) {
    x[i] = sorted[i].budget / pp.q;
    prefix_budget += sorted[i].budget;
  }
  double tail_endow = 0.0;
  for (std::size_t i = pp.k + 1; i < n; ++i) {
    x[i] = -sorted[i].endowment;
    tail_endow += sorted[i].endowment;
  }
  x[pp.k] = tail_endow - prefix_budget / pp.q;
  return x;
}

// Evaluation context for one agent's allocation as a function of their own
// reported value z, everyone else fixed. `others` keep their sorted order;
// the probe slots in before equal values (the tie preference that keeps the
// allocation monotone from the right).
struct ProbeContext {
  std::vector<double> value;    // others, descending
  std::vector<double> pref_b;   // pref_b[l] = budget sum of first l others
  std::vector<double> pref_g;   // same for endowments
  double total_g = 0.0;         // all endowments including the probe's
  double probe_budget = 0.0;
  double probe_endow = 0.0;
};

inline ProbeContext make_probe_context(const std::vector<ReportedAgent>& sorted,
                                       std::size_t probe_sorted_index) {
  ProbeContext ctx;
  const std::size_t m = sorted.size() - 1;
  ctx.value.reserve(m);
  ctx.pref_b.assign(m + 1, 0.0);
  ctx.pref_g.assign(m + 1, 0.0);
  for (std::size_t i = 0, j = 0; i < sorted.size(); ++i) {
    if (i == probe_sorted_index) {
      ctx.probe_budget = sorted[i].budget;
      ctx.probe_endow = sorted[i].endowment;
      continue;
    }
    ctx.value.push_back(sorted[i].value);
    ctx.pref_b[j + 1] = ctx.pref_b[j] + sorted[i].budget;
    ctx.pref_g[j + 1] = ctx.pref_g[j] + sorted[i].endowment;
    ++j;
  }
  ctx.total_g = ctx.pref_g[m] + ctx.probe_endow;
  return ctx;
}

// 0-based insertion slot of the probe at value z: after all strictly larger
// others, before equal ones.
inline std::size_t probe_slot(const ProbeContext& ctx, double z) {
  return static_cast<std::size_t>(
      std::lower_bound(ctx.value.begin(), ctx.value.end(), z,
                       [](double v, double zz) { return v > zz; }) -
      ctx.value.begin());
}

struct Regime {
  std::size_t pos1 = 0;  // probe position, 1-based
  std::size_t k = 0;
  double q = 0.0;
  bool trade = false;
  bool pivot_price_is_z = false;  // q equals the probe's own value
  double tail_endow = 0.0;        // endowment strictly below the pivot
  double prefix_budget = 0.0;     // budget of the prefix 1..k
};

inline Regime regime_at(const ProbeContext& ctx, double z) {
  const std::size_t m = ctx.value.size();
  const std::size_t n = m + 1;
  const std::size_t slot = probe_slot(ctx, z);
  Regime r;
  r.pos1 = slot + 1;

  auto value_at = [&](std::size_t l) {  // 1-based position
    if (l == r.pos1) return z;
    return l < r.pos1 ? ctx.value[l - 1] : ctx.value[l - 2];
  };
  auto prefix_budget = [&](std::size_t l) {
    if (l < r.pos1) return ctx.pref_b[l];
    return ctx.pref_b[l - 1] + ctx.probe_budget;
  };
  auto suffix_endow = [&](std::size_t l) {
    const double pg = l < r.pos1 ? ctx.pref_g[l]
                                 : ctx.pref_g[l - 1] + ctx.probe_endow;
    return ctx.total_g - pg;
  };

  std::size_t k = 0;
  for (std::size_t l = 1; l <= n; ++l) {
    if (prefix_budget(l) <= value_at(l) * suffix_endow(l)) k = l;
  }
  r.k = k;
  if (k == n) return r;  // zero total budget, nothing can trade
  r.prefix_budget = prefix_budget(k);
  const double sg = suffix_endow(k);
  const double pivot_value = value_at(k + 1);
  if (r.prefix_budget > pivot_value * sg) {
    r.q = r.prefix_budget / sg;
  } else {
    r.q = pivot_value;
    r.pivot_price_is_z = (k + 1 == r.pos1);
  }
  if (r.q <= 0.0) return r;
  r.trade = true;
  r.tail_endow = suffix_endow(k + 1);
  return r;
}

inline double allocation_at(const ProbeContext& ctx, const Regime& r) {
  if (!r.trade) return 0.0;
  if (r.pos1 <= r.k) return ctx.probe_budget / r.q;
  if (r.pos1 == r.k + 1) return r.tail_endow - r.prefix_budget / r.q;
  return -ctx.probe_endow;
}

inline double allocation_at(const ProbeContext& ctx, double z) {
  return allocation_at(ctx, regime_at(ctx, z));
}

// One maximal interval on which the allocation is c0 - c1 / z (c1 = 0 for
// the constant regimes).
struct Piece {
  double lo = 0.0, hi = 0.0;
  double c0 = 0.0, c1 = 0.0;
  double eval(double z) const { return c1 == 0.0 ? c0 : c0 - c1 / z; }
};

// Candidate regime edges: the others' values plus, per value segment, the
// budget/endowment ratio roots of every prefix. Regime constancy between
// consecutive candidates is verified by interior samples; a failed check
// splits the piece.
inline std::vector<double> piece_boundaries(const ProbeContext& ctx,
                                            double z_max) {
  std::vector<double> bounds{0.0, z_max};
  for (double v : ctx.value) {
    if (v > 0.0 && v < z_max) bounds.push_back(v);
  }
  std::vector<double> segment = bounds;
  std::sort(segment.begin(), segment.end());
  const std::size_t n = ctx.value.size() + 1;
  for (std::size_t s = 0; s + 1 < segment.size(); ++s) {
    const double lo = segment[s], hi = segment[s + 1];
    if (hi - lo <= 0.0) continue;
    const double zm = lo + (hi - lo) / 2.0;
    const std::size_t pos1 = probe_slot(ctx, zm) + 1;
    for (std::size_t l = 1; l <= n; ++l) {
      const double pb = l < pos1 ? ctx.pref_b[l] : ctx.pref_b[l - 1] + ctx.probe_budget;
      const double pg = l < pos1 ? ctx.pref_g[l] : ctx.pref_g[l - 1] + ctx.probe_endow;
      const double sg = ctx.total_g - pg;
      if (sg <= 0.0) continue;
      const double root = pb / sg;
      if (root > lo && root < hi) bounds.push_back(root);
    }
  }
  std::sort(bounds.begin(), bounds.end());
  std::vector<double> out;
  for (double b : bounds) {
    if (out.empty() || b - out.back() > 1e-12 * std::max(1.0, b)) {
      out.push_back(b);
    }
  }
  if (out.back() < z_max) out.push_back(z_max);
  return out;
}

inline void append_pieces(const ProbeContext& ctx, double lo, double hi,
                          int depth, std::vector<Piece>& out) {
  const double zm = lo + (hi - lo) / 2.0;
  const Regime r = regime_at(ctx, zm);
  Piece piece;
  piece.lo = lo;
  piece.hi = hi;
  if (r.trade && r.pos1 == r.k + 1 && r.pivot_price_is_z) {
    piece.c0 = r.tail_endow;
    piece.c1 = r.prefix_budget;
  } else {
    piece.c0 = allocation_at(ctx, r);
    piece.c1 = 0.0;
  }
  const double tol =
      1e-9 * std::max({1.0, std::abs(piece.c0), ctx.total_g});
  const bool ok =
      depth >= 40 ||
      (std::abs(allocation_at(ctx, lo + (hi - lo) * 0.25) -
                piece.eval(lo + (hi - lo) * 0.25)) <= tol &&
       std::abs(allocation_at(ctx, lo + (hi - lo) * 0.75) -
                piece.eval(lo + (hi - lo) * 0.75)) <= tol);
  if (ok) {
    out.push_back(piece);
    return;
  }
  append_pieces(ctx, lo, zm, depth + 1, out);
  append_pieces(ctx, zm, hi, depth + 1, out);
}

inline std::vector<Piece> allocation_pieces(const ProbeContext& ctx,
                                            double z_max) {
  const std::vector<double> bounds = piece_boundaries(ctx, z_max);
  std::vector<Piece> pieces;
  pieces.reserve(bounds.size());
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
    append_pieces(ctx, bounds[i], bounds[i + 1], 0, pieces);
  }
  return pieces;
}

// Sign-crossing value of the (monotone) piecewise allocation. Within a flat
// zero stretch every choice yields the same payment integral; this returns
// the edge adjacent to the signed region: the last strictly negative point
// when one exists, otherwise the first strictly positive point, else 0.
inline double threshold_from_pieces(const std::vector<Piece>& pieces) {
  bool was_negative = false;
  for (const Piece& piece : pieces) {
    const double at_lo = piece.c1 == 0.0
                             ? piece.c0
                             : (piece.lo > 0.0 ? piece.eval(piece.lo) : -kInf);
    const double at_hi = piece.eval(piece.hi);
    if (at_hi < 0.0) {
      was_negative = true;
      continue;
    }
    if (at_lo < 0.0) {
      // Negative-to-nonnegative transition inside this piece; only the
      // logarithmic pieces can cross in the interior.
      if (piece.c1 > 0.0 && piece.c0 > 0.0) {
        return std::clamp(piece.c1 / piece.c0, piece.lo, piece.hi);
      }
      return piece.hi;
    }
    if (was_negative) return piece.lo;
    if (at_lo > 0.0) return piece.lo;
    if (at_hi > 0.0) {
      if (piece.c1 > 0.0 && piece.c0 > 0.0) {
        return std::clamp(piece.c1 / piece.c0, piece.lo, piece.hi);
      }
      return piece.hi;
    }
    // Identically zero so far; keep scanning for the positive edge.
  }
  return was_negative && !pieces.empty() ? pieces.back().hi : 0.0;
}

// Signed integral of the piecewise allocation between a and b.
inline double integrate_pieces(const std::vector<Piece>& pieces, double a,
                               double b) {
  if (a == b) return 0.0;
  const double sign = a <= b ? 1.0 : -1.0;
  const double lo = std::min(a, b), hi = std::max(a, b);
  double total = 0.0;
  for (const Piece& piece : pieces) {
    const double l = std::max(lo, piece.lo);
    const double h = std::min(hi, piece.hi);
    if (h <= l) continue;
    total += piece.c0 * (h - l);
    if (piece.c1 != 0.0) total -= piece.c1 * std::log(h / l);
  }
  return sign * total;
}

inline double piece_span(const ProbeContext& ctx, double report) {
  double top = report;
  for (double v : ctx.value) top = std::max(top, v);
  // Past every other value and every ratio root the probe owns the top slot
  // and its allocation is constant, so this bound covers all regime changes.
  if (ctx.total_g > 0.0) {
    top = std::max(top, (ctx.pref_b.back() + ctx.probe_budget) / ctx.total_g);
  }
  return top + 1.0;
}

}  // namespace detail

/// Partition point and pivot price for a reported profile.
inline PartitionPoint partition_point(const Instance& instance,
                                      const ReportProfile& reports) {
  return detail::partition_sorted(reported_view(instance, reports));
}

/// The allocation an agent would receive after replacing their reported value
/// with z, everyone else fixed. Monotone non-decreasing in z. `agent` is a
/// canonical instance position.
inline double allocation_fn(double z, std::size_t agent,
                            const Instance& instance,
                            const ReportProfile& reports) {
  if (z < 0.0 || !std::isfinite(z)) {
    throw std::invalid_argument("probe value must be finite and nonnegative");
  }
  const auto sorted = reported_view(instance, reports);
  std::size_t sorted_index = 0;
  while (sorted[sorted_index].pos != agent) ++sorted_index;
  const auto ctx = detail::make_probe_context(sorted, sorted_index);
  return detail::allocation_at(ctx, z);
}

/// Sign-crossing value of the agent's allocation function; the lower limit
/// of the payment integral.
inline double threshold(std::size_t agent, const Instance& instance,
                        const ReportProfile& reports) {
  const auto sorted = reported_view(instance, reports);
  std::size_t sorted_index = 0;
  while (sorted[sorted_index].pos != agent) ++sorted_index;
  const auto ctx = detail::make_probe_context(sorted, sorted_index);
  const auto pieces =
      detail::allocation_pieces(ctx, detail::piece_span(ctx, reports.values[agent]));
  return detail::threshold_from_pieces(pieces);
}

/// Net trades the mechanism grants under a reported profile, in canonical
/// instance order. At exact report ties this is the left limit of each
/// agent's allocation function, which keeps the trades summing to zero.
inline std::vector<double> designed_allocations(const Instance& instance,
                                                const ReportProfile& reports) {
  const auto sorted = reported_view(instance, reports);
  const auto x = detail::designed_allocations(sorted,
                                              detail::partition_sorted(sorted));
  std::vector<double> out(instance.size());
  for (std::size_t s = 0; s < sorted.size(); ++s) out[sorted[s].pos] = x[s];
  return out;
}

/// Threshold payment p_i = b_i x_i - integral of the allocation from the
/// sign-crossing value to b_i, evaluated piecewise analytically (constant and
/// logarithmic pieces). x_i is the granted allocation.
inline double myerson_payment(std::size_t agent, const Instance& instance,
                              const ReportProfile& reports) {
  const auto sorted = reported_view(instance, reports);
  const auto pp = detail::partition_sorted(sorted);
  const auto designed = detail::designed_allocations(sorted, pp);
  std::size_t sorted_index = 0;
  while (sorted[sorted_index].pos != agent) ++sorted_index;
  const double report = reports.values[agent];
  const auto ctx = detail::make_probe_context(sorted, sorted_index);
  const auto pieces =
      detail::allocation_pieces(ctx, detail::piece_span(ctx, report));
  const double v_hat = detail::threshold_from_pieces(pieces);
  return report * designed[sorted_index] -
         detail::integrate_pieces(pieces, v_hat, report);
}

namespace detail {

inline MechanismOutcome finish_outcome(const Instance& instance,
                                       MechanismOutcome outcome) {
  auto unique = equilibrium::check_equilibrium_unique(instance, outcome.constraints);
  if (unique) outcome.equilibrium = std::move(unique->state);
  auto worst = equilibrium::worst_reachable_welfare(instance, outcome.constraints);
  outcome.welfare_worst = worst.welfare;
  outcome.welfare_exact = worst.exact;
  outcome.worst_state = std::move(worst.state);
  return outcome;
}

}  // namespace detail

/// Differential-pricing mechanism: interval [min(x_i, 0), max(x_i, 0)] from
/// the designed allocation, unit price p_i / x_i from the threshold payment
/// (the reported value itself for zero-trade agents).
inline MechanismOutcome differential_mechanism(const Instance& instance,
                                               const ReportProfile& reports) {
  const std::size_t n = instance.size();
  const auto sorted = reported_view(instance, reports);
  const auto pp = detail::partition_sorted(sorted);
  const auto designed = detail::designed_allocations(sorted, pp);

  DifferentialTrace trace;
  trace.partition_point = pp.k;
  trace.price_q = pp.q;
  trace.degenerate = (pp.k == n || pp.q <= 0.0);
  trace.thresholds.assign(n, 0.0);
  trace.allocations.assign(n, 0.0);
  trace.payments.assign(n, 0.0);
  trace.breakpoints.assign(n, {});

  MechanismOutcome outcome;
  outcome.constraints.assign(n, ExchangeConstraint::no_trade());
  const double snap = 1e-12 * std::max(1.0, instance.total_endowment());

  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t i = sorted[s].pos;
    const double report = reports.values[i];
    const auto ctx = detail::make_probe_context(sorted, s);
    const auto pieces =
        detail::allocation_pieces(ctx, detail::piece_span(ctx, report));
    const double v_hat = detail::threshold_from_pieces(pieces);
    trace.thresholds[i] = v_hat;
    for (const auto& piece : pieces) trace.breakpoints[i].push_back(piece.hi);
    trace.breakpoints[i].pop_back();  // the span sentinel is not a regime edge

    double x = designed[s];
    if (std::abs(x) <= snap) x = 0.0;
    double payment = 0.0;
    double price = report;
    if (x != 0.0) {
      payment = report * x - detail::integrate_pieces(pieces, v_hat, report);
      price = payment / x;
      // Rounding must not push the price across the agent's own report: the
      // payment rule guarantees (report - price) * x >= 0.
      price = x > 0.0 ? std::min(price, report) : std::max(price, report);
      price = std::max(price, 0.0);
      if (x < 0.0 && price <= report) {
        // Exact value ties can price a designed seller at their own report,
        // and a resource-preferring indifferent agent would then withhold the
        // sale. One representable step up restores the strict preference.
        price = std::nextafter(report, kInf);
      }
      payment = price * x;
    }
    trace.allocations[i] = x;
    trace.payments[i] = payment;
    outcome.constraints[i] = {std::min(x, 0.0), std::max(x, 0.0), price};
  }

  double paid = 0.0;
  for (double p : trace.payments) paid += p;
  outcome.subsidy = -paid;
  outcome.trace = std::move(trace);
  return detail::finish_outcome(instance, std::move(outcome));
}

namespace detail {

inline Instance sub_instance(const std::vector<ReportedAgent>& sorted,
                             const std::vector<std::size_t>& members) {
  std::vector<Agent> agents;
  agents.reserve(members.size());
  for (std::size_t s : members) {
    agents.push_back({sorted[s].value, sorted[s].budget, sorted[s].endowment});
  }
  return Instance(std::move(agents));
}

inline MechanismOutcome sampling_outcome(const Instance& instance,
                                         const std::vector<ReportedAgent>& sorted,
                                         double beta, RandomSource& rng,
                                         bool price_from_sample) {
  if (!(beta > 0.0 && beta < 0.5)) {
    throw std::invalid_argument("sample rate must lie in (0, 1/2)");
  }
  const std::size_t n = instance.size();
  SamplingTrace trace;
  trace.sample_rate = beta;
  std::vector<bool> in_sample(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.bernoulli(beta)) in_sample[i] = true;
  }
  std::vector<std::size_t> sample_sorted;  // indices into `sorted`
  for (std::size_t s = 0; s < n; ++s) {
    if (in_sample[sorted[s].pos]) {
      sample_sorted.push_back(s);
      trace.sampled.push_back(sorted[s].pos);
    } else {
      trace.complement.push_back(sorted[s].pos);
    }
  }

  if (!sample_sorted.empty()) {
    trace.sampled_opt =
        welfare::optimal_distribution(sub_instance(sorted, sample_sorted)).opt;
  }
  double denom = 0.0;
  if (price_from_sample) {
    for (std::size_t s : sample_sorted) denom += sorted[s].endowment;
  } else {
    // Endowments outside the sample are public information.
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_sample[i]) denom += instance[i].endowment;
    }
  }

  MechanismOutcome outcome;
  outcome.constraints.assign(n, ExchangeConstraint::no_trade());
  if (denom <= 0.0) {
    trace.degenerate = true;
  } else {
    const double factor = price_from_sample ? 1.0 : (1.0 - beta) / beta;
    trace.uniform_price = factor * trace.sampled_opt / (2.0 * denom);
    for (std::size_t i = 0; i < n; ++i) {
      outcome.constraints[i] = in_sample[i]
                                   ? ExchangeConstraint::no_trade(trace.uniform_price)
                                   : ExchangeConstraint::unconstrained(trace.uniform_price);
    }
  }
  outcome.subsidy = 0.0;  // uniform price: payments balance in every state
  outcome.trace = std::move(trace);
  return finish_outcome(instance, std::move(outcome));
}

}  // namespace detail

/// Sampling-based uniform-price mechanism for the single-parameter setting
/// (values private; budgets and endowments public). Sampled agents cannot
/// trade; the rest face price (1-beta)/beta * OPT(sample) / (2 * endowment
/// outside the sample).
inline MechanismOutcome uniform_large(const Instance& instance,
                                      const ReportProfile& reports, double beta,
                                      RandomSource& rng) {
  return detail::sampling_outcome(instance, reported_view(instance, reports),
                                  beta, rng, /*price_from_sample=*/false);
}

/// Multi-parameter variant: budgets and endowments are reported too, so the
/// price OPT(sample) / (2 * sampled endowment) uses sample data only.
inline MechanismOutcome uniform_large_mp(const Instance& instance,
                                         const ReportProfile& reports,
                                         double beta, RandomSource& rng) {
  return detail::sampling_outcome(instance, reported_view(instance, reports),
                                  beta, rng, /*price_from_sample=*/true);
}

/// The market-optimal price applied directly to reports. Welfare-optimal
/// under truth but manipulable; kept as a control for truthfulness audits.
inline MechanismOutcome mop_mechanism(const Instance& instance,
                                      const ReportProfile& reports) {
  reports.validate_against(instance);
  std::vector<Agent> as_reported;
  as_reported.reserve(instance.size());
  for (std::size_t i = 0; i < instance.size(); ++i) {
    as_reported.push_back(
        {reports.values[i], instance[i].budget, instance[i].endowment});
  }
  const Instance reported_instance(std::move(as_reported));
  const auto mop = welfare::market_optimal_price(reported_instance);

  MechanismOutcome outcome;
  outcome.constraints.assign(instance.size(), ExchangeConstraint::no_trade());
  for (std::size_t j = 0; j < instance.size(); ++j) {
    outcome.constraints[reported_instance.original_index(j)] = mop.constraints[j];
  }
  SamplingTrace trace;
  trace.uniform_price = mop.price;
  trace.sampled_opt = welfare::optimal_distribution(reported_instance).opt;
  for (std::size_t i = 0; i < instance.size(); ++i) trace.complement.push_back(i);
  outcome.subsidy = 0.0;
  outcome.trace = std::move(trace);
  return detail::finish_outcome(instance, std::move(outcome));
}

}  // namespace exmarket::mechanisms
