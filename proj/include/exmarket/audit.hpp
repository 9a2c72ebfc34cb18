#pragma once

// Seeded audit campaigns: truthfulness sweeps, approximation-ratio and
// profitability measurements, large-market parameter checks, and the
// price-sweep lower bound. Campaigns are deterministic under their seed and
// emit JSON reports plus a per-instance CSV table.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "exmarket/mechanisms.hpp"
#include "exmarket/model.hpp"

namespace exmarket::audit {

enum class MechanismId { kUniformLarge, kUniformLargeMp, kDifferential, kMop };

inline const char* mechanism_name(MechanismId id) {
  switch (id) {
    case MechanismId::kUniformLarge: return "uniform-large";
    case MechanismId::kUniformLargeMp: return "uniform-large-mp";
    case MechanismId::kDifferential: return "differential";
    case MechanismId::kMop: return "mop";
  }
  return "?";
}

inline MechanismId parse_mechanism(const std::string& name,
                                   bool allow_mop = false) {
  if (name == "uniform-large") return MechanismId::kUniformLarge;
  if (name == "uniform-large-mp") return MechanismId::kUniformLargeMp;
  if (name == "differential") return MechanismId::kDifferential;
  if (allow_mop && name == "mop") return MechanismId::kMop;
  throw std::invalid_argument("unknown mechanism: " + name);
}

inline MechanismOutcome run_mechanism(MechanismId id, const Instance& instance,
                                      const ReportProfile& reports, double beta,
                                      std::uint64_t seed) {
  switch (id) {
    case MechanismId::kUniformLarge: {
      RandomSource rng(seed);
      return mechanisms::uniform_large(instance, reports, beta, rng);
    }
    case MechanismId::kUniformLargeMp: {
      RandomSource rng(seed);
      return mechanisms::uniform_large_mp(instance, reports, beta, rng);
    }
    case MechanismId::kDifferential:
      return mechanisms::differential_mechanism(instance, reports);
    case MechanismId::kMop:
      return mechanisms::mop_mechanism(instance, reports);
  }
  throw std::logic_error("unreachable");
}

/// Random-instance family for campaigns: sizes drawn uniformly from
/// [n_min, n_max], agent parameters from `gen`.
struct InstanceFamily {
  std::size_t n_min = 2;
  std::size_t n_max = 8;
  GenConfig gen;
};

struct Violation {
  std::string instance_digest;
  std::size_t agent = 0;  // input-order index; npos for instance-level findings
  std::string detail;
};

struct SubsidyStats {
  double min = 0.0, mean = 0.0, max = 0.0;
  std::size_t count = 0;
  void add(double s) {
    min = count == 0 ? s : std::min(min, s);
    max = count == 0 ? s : std::max(max, s);
    mean = (mean * static_cast<double>(count) + s) / static_cast<double>(count + 1);
    ++count;
  }
};

struct UtilityRow {
  std::string instance_digest;
  std::size_t agent = 0;
  double truthful = 0.0;
  double best_misreport = 0.0;
};

struct RatioRow {
  std::string instance_digest;
  std::size_t n = 0;
  double opt = 0.0;
  double mlw = 0.0;
  double ratio = 0.0;
  double subsidy = 0.0;
  std::uint64_t seed = 0;
};

struct AuditReport {
  std::string campaign;
  std::string mechanism;
  std::uint64_t seed = 0;
  std::size_t instances_tested = 0;
  std::vector<Violation> violations;
  double worst_ratio = std::numeric_limits<double>::quiet_NaN();
  double median_ratio = std::numeric_limits<double>::quiet_NaN();
  double floor_fraction = std::numeric_limits<double>::quiet_NaN();
  SubsidyStats subsidy;
  std::vector<UtilityRow> utilities;
  std::array<double, 4> theta_max{0.0, 0.0, 0.0, 0.0};
  std::vector<RatioRow> rows;
  bool small_market = false;

  bool passed() const { return violations.empty(); }
};

/// Tightest large-market parameters of an instance, measured on the optimal
/// distribution: (1) largest single-agent welfare share, (2) largest buyer
/// demand share, (3) largest seller supply share, (4) largest endowment
/// share. Degenerate denominators report the clause as satisfied at 0.
inline std::array<double, 4> measure_theta(const Instance& instance) {
  const auto od = welfare::optimal_distribution(instance);
  std::array<double, 4> theta{0.0, 0.0, 0.0, 0.0};
  double buy_total = 0.0, sell_total = 0.0;
  for (std::size_t i = 0; i < instance.size(); ++i) {
    if (od.x_star[i] >= 0.0) {
      buy_total += od.x_star[i];
    } else {
      sell_total += -od.x_star[i];
    }
  }
  const double endow_total = instance.total_endowment();
  for (std::size_t i = 0; i < instance.size(); ++i) {
    const Agent& a = instance[i];
    const double contribution =
        a.value * a.endowment + std::min(a.value * od.x_star[i], a.budget);
    if (od.opt > 0.0) {
      theta[0] = std::max(theta[0], contribution / od.opt);
    }
    if (od.x_star[i] >= 0.0 && buy_total > 0.0) {
      theta[1] = std::max(theta[1], od.x_star[i] / buy_total);
    }
    if (od.x_star[i] < 0.0 && sell_total > 0.0) {
      theta[2] = std::max(theta[2], -od.x_star[i] / sell_total);
    }
    if (endow_total > 0.0) {
      theta[3] = std::max(theta[3], a.endowment / endow_total);
    }
  }
  return theta;
}

namespace detail {

inline Instance draw_instance(const InstanceFamily& family, RandomSource& rng) {
  const std::size_t span = family.n_max - family.n_min + 1;
  const std::size_t n = family.n_min + rng.uniform_index(span);
  return generate_random_instance(n, family.gen, rng);
}

// Candidate misreports for one agent: a log grid of multiplicative
// perturbations of the truthful report spanning [0.01x, 100x], plus every
// other agent's value (order-changing tie probes are the dangerous ones).
inline std::vector<double> misreport_grid(const ReportProfile& truth,
                                          std::size_t agent,
                                          std::size_t grid_points) {
  std::vector<double> grid;
  const double v = truth.values[agent];
  if (grid_points > 0 && v > 0.0) {
    const double lo = std::log(0.01), hi = std::log(100.0);
    for (std::size_t g = 0; g < grid_points; ++g) {
      const double t = grid_points == 1
                           ? 0.5
                           : static_cast<double>(g) /
                                 static_cast<double>(grid_points - 1);
      grid.push_back(v * std::exp(lo + t * (hi - lo)));
    }
  }
  for (std::size_t j = 0; j < truth.values.size(); ++j) {
    if (j != agent) grid.push_back(truth.values[j]);
  }
  return grid;
}

inline std::string format_gain(double truthful, double gained) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "utility %.12g -> %.12g", truthful, gained);
  return buf;
}

}  // namespace detail

/// For every sampled instance, every agent, and every grid misreport, re-runs
/// the mechanism (same coin flips for the sampling mechanisms) and records
/// any worst-case-utility gain beyond `tol`. The multi-parameter mechanism is
/// additionally probed with budget and endowment misreports.
inline AuditReport audit_truthfulness(MechanismId id,
                                      const InstanceFamily& family,
                                      std::size_t trials, RandomSource& rng,
                                      std::size_t misreports = 50,
                                      double beta = 0.1, double tol = 1e-7) {
  if (trials == 0) throw std::invalid_argument("trials must be >= 1");
  AuditReport report;
  report.campaign = "truthfulness";
  report.mechanism = mechanism_name(id);
  report.seed = rng.seed();

  const bool multi_parameter = id == MechanismId::kUniformLargeMp;
  for (std::size_t t = 0; t < trials; ++t) {
    const Instance instance = detail::draw_instance(family, rng);
    const std::uint64_t mech_seed = rng.next_u64();
    const std::string digest = instance_digest(instance);
    const ReportProfile truth = ReportProfile::truthful(instance);
    const MechanismOutcome honest =
        run_mechanism(id, instance, truth, beta, mech_seed);
    const std::vector<double> u_truth =
        equilibrium::worst_case_utilities(instance, honest.constraints);

    for (std::size_t i = 0; i < instance.size(); ++i) {
      double best = u_truth[i];
      auto probe = [&](const ReportProfile& lie, const char* kind,
                       double reported) {
        const MechanismOutcome out =
            run_mechanism(id, instance, lie, beta, mech_seed);
        const double u =
            equilibrium::worst_case_utilities(instance, out.constraints)[i];
        best = std::max(best, u);
        if (u > u_truth[i] + tol) {
          report.violations.push_back(
              {digest, instance.original_index(i),
               std::string(kind) + " misreport " + std::to_string(reported) +
                   ": " + detail::format_gain(u_truth[i], u)});
        }
      };

      const std::size_t value_points =
          multi_parameter ? (misreports + 2) / 3 : misreports;
      for (double m : detail::misreport_grid(truth, i, value_points)) {
        ReportProfile lie = truth;
        lie.values[i] = m;
        probe(lie, "value", m);
      }
      if (multi_parameter) {
        const std::size_t param_points = misreports / 3;
        for (std::size_t g = 0; g < param_points; ++g) {
          const double t01 =
              param_points == 1 ? 0.5
                                : static_cast<double>(g) /
                                      static_cast<double>(param_points - 1);
          const double factor = std::exp(std::log(0.01) + t01 * std::log(1e4));
          ReportProfile lie = truth;
          lie.budgets = std::vector<double>(instance.size());
          for (std::size_t j = 0; j < instance.size(); ++j) {
            (*lie.budgets)[j] = instance[j].budget;
          }
          (*lie.budgets)[i] = instance[i].budget * factor;
          probe(lie, "budget", (*lie.budgets)[i]);

          ReportProfile lie2 = truth;
          lie2.endowments = std::vector<double>(instance.size());
          for (std::size_t j = 0; j < instance.size(); ++j) {
            (*lie2.endowments)[j] = instance[j].endowment;
          }
          (*lie2.endowments)[i] = instance[i].endowment * factor;
          probe(lie2, "endowment", (*lie2.endowments)[i]);
        }
      }
      report.utilities.push_back(
          {digest, instance.original_index(i), u_truth[i], best});
    }
    ++report.instances_tested;
  }
  return report;
}

/// Worst-case welfare ratio per instance; a configured floor turns shortfalls
/// into violations.
inline AuditReport audit_ratio(MechanismId id, const InstanceFamily& family,
                               std::size_t trials, RandomSource& rng,
                               std::optional<double> floor = std::nullopt,
                               double beta = 0.1) {
  if (trials == 0) throw std::invalid_argument("trials must be >= 1");
  AuditReport report;
  report.campaign = "ratio";
  report.mechanism = mechanism_name(id);
  report.seed = rng.seed();
  for (std::size_t t = 0; t < trials; ++t) {
    const Instance instance = detail::draw_instance(family, rng);
    const std::uint64_t mech_seed = rng.next_u64();
    const ReportProfile truth = ReportProfile::truthful(instance);
    const MechanismOutcome out =
        run_mechanism(id, instance, truth, beta, mech_seed);
    const double opt = welfare::optimal_distribution(instance).opt;
    const double ratio = opt > 0.0 ? out.welfare_worst / opt : 1.0;
    report.rows.push_back({instance_digest(instance), instance.size(), opt,
                           out.welfare_worst, ratio, out.subsidy, mech_seed});
    if (std::isnan(report.worst_ratio) || ratio < report.worst_ratio) {
      report.worst_ratio = ratio;
    }
    if (floor && ratio < *floor) {
      report.violations.push_back(
          {instance_digest(instance), instance.size(),
           "ratio " + std::to_string(ratio) + " below floor " +
               std::to_string(*floor)});
    }
    ++report.instances_tested;
  }
  return report;
}

/// Uniform-price mechanisms must balance payments in every simulated
/// reachable state; the differential mechanism's subsidy must not exceed the
/// total agent utility.
inline AuditReport audit_profitability(MechanismId id,
                                       const InstanceFamily& family,
                                       std::size_t trials, RandomSource& rng,
                                       std::size_t sim_seeds = 10,
                                       double beta = 0.1) {
  if (trials == 0) throw std::invalid_argument("trials must be >= 1");
  AuditReport report;
  report.campaign = "profitability";
  report.mechanism = mechanism_name(id);
  report.seed = rng.seed();
  const bool uniform =
      id == MechanismId::kUniformLarge || id == MechanismId::kUniformLargeMp ||
      id == MechanismId::kMop;
  for (std::size_t t = 0; t < trials; ++t) {
    const Instance instance = detail::draw_instance(family, rng);
    const std::uint64_t mech_seed = rng.next_u64();
    const std::string digest = instance_digest(instance);
    const ReportProfile truth = ReportProfile::truthful(instance);
    const MechanismOutcome out =
        run_mechanism(id, instance, truth, beta, mech_seed);
    report.subsidy.add(out.subsidy);
    if (uniform) {
      for (std::size_t s = 0; s < sim_seeds; ++s) {
        RandomSource sim_rng(rng.next_u64());
        const MarketState state = equilibrium::simulate_trades(
            instance, out.constraints, sim_rng, 64 * instance.size() + 64);
        double paid = 0.0;
        for (double p : state.payments) paid += p;
        if (std::abs(paid) > kTol) {
          report.violations.push_back(
              {digest, instance.size(),
               "payments sum to " + std::to_string(paid) + " at sim seed " +
                   std::to_string(sim_rng.seed())});
        }
      }
    } else {
      const auto& trace = std::get<DifferentialTrace>(out.trace);
      double total_utility = 0.0;
      for (std::size_t i = 0; i < instance.size(); ++i) {
        total_utility +=
            instance[i].value * trace.allocations[i] - trace.payments[i];
      }
      if (out.subsidy > total_utility + kTol) {
        report.violations.push_back(
            {digest, instance.size(),
             "subsidy " + std::to_string(out.subsidy) +
                 " exceeds total utility " + std::to_string(total_utility)});
      }
    }
    ++report.instances_tested;
  }
  return report;
}

/// The three-agent family on which no uniform unconstrained price beats half
/// the optimum: sweeping prices over (0, 2 v_max] must stay at or below the
/// (1/2 + epsilon) ratio, and the best grid price should attain it.
inline AuditReport lower_bound_sweep(double epsilon,
                                     std::size_t price_grid = 10000) {
  if (!(epsilon > 0.0 && epsilon < 0.5)) {
    throw std::invalid_argument("epsilon must lie in (0, 1/2)");
  }
  if (price_grid == 0) throw std::invalid_argument("price grid must be nonempty");
  const double v1 = (0.5 + epsilon) / (2.0 * epsilon);
  const Instance instance = make_instance(
      {{v1, 1.0, 0.0}, {1.0, 1.0, 0.0}, {0.0, 0.0, 1.0}});
  const double opt = welfare::optimal_distribution(instance).opt;

  AuditReport report;
  report.campaign = "lower-bound";
  report.mechanism = "uniform-unconstrained";
  report.instances_tested = 1;
  double best = 0.0;
  for (std::size_t g = 0; g < price_grid; ++g) {
    const double lambda = 2.0 * v1 * static_cast<double>(g + 1) /
                          static_cast<double>(price_grid);
    std::vector<ExchangeConstraint> cs(
        instance.size(), ExchangeConstraint::unconstrained(lambda));
    best = std::max(
        best, equilibrium::worst_reachable_welfare(instance, cs).welfare);
  }
  report.worst_ratio = opt > 0.0 ? best / opt : 1.0;
  report.rows.push_back({instance_digest(instance), instance.size(), opt, best,
                         report.worst_ratio, 0.0, 0});
  if (report.worst_ratio > 0.5 + epsilon + kTol) {
    report.violations.push_back(
        {instance_digest(instance), instance.size(),
         "price sweep exceeded the (1/2 + epsilon) ratio bound"});
  }
  return report;
}

/// Runs a sampling mechanism across seeds on i.i.d. bounded instances and
/// reports the worst-case-ratio distribution plus large-market parameters.
inline AuditReport large_market_campaign(std::size_t n, double beta,
                                         std::size_t seeds, bool multi_parameter,
                                         RandomSource& rng,
                                         const GenConfig& gen = {},
                                         double ratio_floor = 0.35,
                                         double required_fraction = 0.95) {
  if (seeds == 0) throw std::invalid_argument("need at least one seed");
  AuditReport report;
  report.campaign = "large-market";
  report.mechanism = multi_parameter ? "uniform-large-mp" : "uniform-large";
  report.seed = rng.seed();
  report.small_market = n < 100;

  std::vector<double> ratios;
  ratios.reserve(seeds);
  for (std::size_t s = 0; s < seeds; ++s) {
    const Instance instance = generate_random_instance(n, gen, rng);
    const std::uint64_t mech_seed = rng.next_u64();
    const ReportProfile truth = ReportProfile::truthful(instance);
    const MechanismOutcome out = run_mechanism(
        multi_parameter ? MechanismId::kUniformLargeMp : MechanismId::kUniformLarge,
        instance, truth, beta, mech_seed);
    const double opt = welfare::optimal_distribution(instance).opt;
    const double ratio = opt > 0.0 ? out.welfare_worst / opt : 1.0;
    ratios.push_back(ratio);
    report.rows.push_back({instance_digest(instance), n, opt, out.welfare_worst,
                           ratio, out.subsidy, mech_seed});
    const auto theta = measure_theta(instance);
    for (std::size_t c = 0; c < 4; ++c) {
      report.theta_max[c] = std::max(report.theta_max[c], theta[c]);
    }
    ++report.instances_tested;
  }
  std::vector<double> sorted_ratios = ratios;
  std::sort(sorted_ratios.begin(), sorted_ratios.end());
  report.worst_ratio = sorted_ratios.front();
  report.median_ratio = sorted_ratios[sorted_ratios.size() / 2];
  std::size_t hits = 0;
  for (double r : ratios) {
    if (r >= ratio_floor) ++hits;
  }
  report.floor_fraction =
      static_cast<double>(hits) / static_cast<double>(ratios.size());
  if (!report.small_market && report.floor_fraction < required_fraction) {
    report.violations.push_back(
        {"", n,
         "only " + std::to_string(report.floor_fraction * 100.0) +
             "% of runs met the ratio floor"});
  }
  return report;
}

// --- report serialization ----------------------------------------------------

inline nlohmann::json to_json(const AuditReport& report) {
  nlohmann::json doc;
  doc["campaign"] = report.campaign;
  doc["mechanism"] = report.mechanism;
  doc["seed"] = report.seed;
  doc["instances_tested"] = report.instances_tested;
  doc["passed"] = report.passed();
  doc["violations"] = nlohmann::json::array();
  for (const Violation& v : report.violations) {
    doc["violations"].push_back(
        {{"instance", v.instance_digest}, {"agent", v.agent}, {"detail", v.detail}});
  }
  if (!std::isnan(report.worst_ratio)) doc["worst_ratio"] = report.worst_ratio;
  if (!std::isnan(report.median_ratio)) doc["median_ratio"] = report.median_ratio;
  if (!std::isnan(report.floor_fraction)) {
    doc["floor_fraction"] = report.floor_fraction;
  }
  if (report.subsidy.count > 0) {
    doc["subsidy"] = {{"min", report.subsidy.min},
                      {"mean", report.subsidy.mean},
                      {"max", report.subsidy.max}};
  }
  if (!report.utilities.empty()) {
    auto rows = nlohmann::json::array();
    for (const UtilityRow& u : report.utilities) {
      rows.push_back({{"instance", u.instance_digest},
                      {"agent", u.agent},
                      {"truthful", u.truthful},
                      {"best_misreport", u.best_misreport}});
    }
    doc["utilities"] = std::move(rows);
  }
  doc["theta"] = report.theta_max;
  if (report.small_market) doc["small_market"] = true;
  if (!report.rows.empty()) {
    auto rows = nlohmann::json::array();
    for (const RatioRow& r : report.rows) {
      rows.push_back({{"instance_digest", r.instance_digest},
                      {"n", r.n},
                      {"opt", r.opt},
                      {"mlw", r.mlw},
                      {"ratio", r.ratio},
                      {"subsidy", r.subsidy},
                      {"seed", r.seed}});
    }
    doc["rows"] = std::move(rows);
  }
  return doc;
}

/// Per-instance table, sorted by digest then seed. Twelve significant digits,
/// '.' decimal separator, no locale.
inline std::string to_csv(const AuditReport& report) {
  std::vector<RatioRow> rows = report.rows;
  std::sort(rows.begin(), rows.end(), [](const RatioRow& a, const RatioRow& b) {
    if (a.instance_digest != b.instance_digest) {
      return a.instance_digest < b.instance_digest;
    }
    return a.seed < b.seed;
  });
  std::string out = "instance_digest,n,opt,mlw,ratio,subsidy,seed\n";
  char buf[256];
  for (const RatioRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%zu,%.12g,%.12g,%.12g,%.12g,%llu\n",
                  r.instance_digest.c_str(), r.n, r.opt, r.mlw, r.ratio,
                  r.subsidy, static_cast<unsigned long long>(r.seed));
    out += buf;
  }
  return out;
}

}  // namespace exmarket::audit
