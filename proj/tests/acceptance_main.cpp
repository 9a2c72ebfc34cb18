// Acceptance suite: one line per criterion, nonzero exit on any failure.
// Tolerances are pinned here, not configurable.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "exmarket/audit.hpp"
#include "support/oracles.hpp"

using namespace exmarket;
using testsupport::instance_a;
using testsupport::instance_b;
using testsupport::instance_c;

namespace {

GenConfig narrow_family() { return {}; }  // [1,2]^3

GenConfig mid_family() {
  GenConfig g;
  g.value_min = 0.5;
  g.budget_min = 0.5;
  g.endowment_min = 0.5;
  return g;
}

// Wide parameter spread: exercises empty buyer prefixes, budget-dominant
// pivots, and scarce-endowment tails.
GenConfig wide_family() {
  GenConfig g;
  g.value_min = 0.1;
  g.value_max = 2.0;
  g.budget_min = 0.1;
  g.budget_max = 3.0;
  g.endowment_min = 0.1;
  g.endowment_max = 2.0;
  return g;
}

Instance draw(RandomSource& rng, const GenConfig& gen, std::size_t n_min,
              std::size_t n_max) {
  const std::size_t n = n_min + rng.uniform_index(n_max - n_min + 1);
  return generate_random_instance(n, gen, rng);
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

bool criterion_1(std::string& note) {
  const auto t0 = std::chrono::steady_clock::now();
  RandomSource rng(101);
  double worst_rel = 0.0;
  for (int t = 0; t < 200; ++t) {
    const Instance inst = draw(rng, mid_family(), 2, 5);
    const double opt = welfare::optimal_distribution(inst).opt;
    const double bf = welfare::brute_force_opt(inst, 1000);
    if (bf > opt + 1e-9) {
      note = "grid search exceeded the closed form: " + std::to_string(bf) +
             " > " + std::to_string(opt);
      return false;
    }
    const double rel = (opt - bf) / std::max(opt, 1e-12);
    worst_rel = std::max(worst_rel, rel);
    if (rel > 0.01) {
      note = "grid gap " + std::to_string(rel) + " above 1% at instance " +
             instance_digest(inst);
      return false;
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "worst relative gap %.3e, %.1fs", worst_rel,
                elapsed_s(t0));
  note = buf;
  return true;
}

bool criterion_2(std::string& note) {
  const auto t0 = std::chrono::steady_clock::now();
  for (double eps : {0.1, 0.01}) {
    const auto report = audit::lower_bound_sweep(eps, 10000);
    const double want_ratio = 0.5 + eps;
    const double want_opt = 1.0 / (0.5 + eps);
    if (std::abs(report.worst_ratio - want_ratio) > 1e-3) {
      note = "best ratio " + std::to_string(report.worst_ratio) + " misses " +
             std::to_string(want_ratio);
      return false;
    }
    if (std::abs(report.rows[0].opt - want_opt) > 1e-9) {
      note = "opt " + std::to_string(report.rows[0].opt) + " misses " +
             std::to_string(want_opt);
      return false;
    }
    if (!report.passed()) {
      note = "sweep exceeded the bound";
      return false;
    }
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1fs", elapsed_s(t0));
  note = buf;
  return true;
}

std::vector<Instance> criterion_3_corpus() {
  std::vector<Instance> out;
  RandomSource rng(303);
  for (int t = 0; t < 100; ++t) out.push_back(draw(rng, mid_family(), 1, 10));
  for (int t = 0; t < 100; ++t) out.push_back(draw(rng, wide_family(), 1, 10));
  return out;
}

bool criterion_3(std::string& note) {
  for (const Instance& inst : criterion_3_corpus()) {
    const double opt = welfare::optimal_distribution(inst).opt;
    const auto mop = welfare::market_optimal_price(inst);
    const auto unique =
        equilibrium::check_equilibrium_unique(inst, mop.constraints);
    if (!unique) {
      note = "optimal-price constraints not equilibrium-unique at " +
             instance_digest(inst);
      return false;
    }
    if (std::abs(unique->worst_welfare - opt) > 1e-9) {
      note = "unique-state welfare off by " +
             std::to_string(unique->worst_welfare - opt) + " at " +
             instance_digest(inst);
      return false;
    }
  }
  note = "200 instances";
  return true;
}

bool agrees_with_unique(const Instance& inst,
                        const std::vector<ExchangeConstraint>& cs,
                        const MarketState& unique_state, std::string& note) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    RandomSource rng(seed);
    const MarketState sim =
        equilibrium::simulate_trades(inst, cs, rng, 32 * inst.size() + 32);
    for (std::size_t i = 0; i < inst.size(); ++i) {
      if (std::abs(sim.trades[i] - unique_state.trades[i]) > 1e-9) {
        note = "simulated trade differs by " +
               std::to_string(sim.trades[i] - unique_state.trades[i]) + " at " +
               instance_digest(inst) + " seed " + std::to_string(seed);
        return false;
      }
    }
  }
  return true;
}

bool criterion_4(std::string& note) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto corpus = criterion_3_corpus();
  for (const Instance& inst : corpus) {
    const auto mop = welfare::market_optimal_price(inst);
    const auto unique =
        equilibrium::check_equilibrium_unique(inst, mop.constraints);
    if (!unique) {
      note = "optimal-price constraints not unique at " + instance_digest(inst);
      return false;
    }
    if (!agrees_with_unique(inst, mop.constraints, unique->state, note)) {
      return false;
    }
  }
  std::size_t diff_checked = 0;
  for (std::size_t idx = 0; idx < corpus.size(); idx += 4) {
    const Instance& inst = corpus[idx];
    const auto out =
        mechanisms::differential_mechanism(inst, ReportProfile::truthful(inst));
    if (!out.equilibrium) {
      note = "differential outcome lacks a unique equilibrium at " +
             instance_digest(inst);
      return false;
    }
    if (!agrees_with_unique(inst, out.constraints, *out.equilibrium, note)) {
      return false;
    }
    ++diff_checked;
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "200 price instances + %zu mechanism outcomes, %.1fs",
                diff_checked, elapsed_s(t0));
  note = buf;
  return true;
}

bool criterion_5(std::string& note) {
  const auto t0 = std::chrono::steady_clock::now();
  RandomSource rng(505);
  double min_ratio = 1.0;
  for (int t = 0; t < 1000; ++t) {
    const Instance inst =
        draw(rng, t % 2 == 0 ? wide_family() : mid_family(), 1, 10);
    const auto out =
        mechanisms::differential_mechanism(inst, ReportProfile::truthful(inst));
    const double opt = welfare::optimal_distribution(inst).opt;
    const double ratio = opt > 0.0 ? out.welfare_worst / opt : 1.0;
    min_ratio = std::min(min_ratio, ratio);
    if (ratio < 0.5 - 1e-9) {
      note = "ratio " + std::to_string(ratio) + " below 1/2 at " +
             instance_digest(inst);
      return false;
    }
  }
  const auto out_b = mechanisms::differential_mechanism(
      instance_b(), ReportProfile::truthful(instance_b()));
  const auto out_c = mechanisms::differential_mechanism(
      instance_c(), ReportProfile::truthful(instance_c()));
  if (std::abs(out_b.welfare_worst - 25.0) > 1e-9 ||
      std::abs(welfare::optimal_distribution(instance_b()).opt - 30.0) > 1e-9) {
    note = "fixed instance B misses welfare 25 / optimum 30";
    return false;
  }
  if (std::abs(out_c.welfare_worst - 12.0) > 1e-9 ||
      std::abs(welfare::optimal_distribution(instance_c()).opt - 14.0) > 1e-9) {
    note = "fixed instance C misses welfare 12 / optimum 14";
    return false;
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "min ratio %.6f over 1000 instances, %.1fs",
                min_ratio, elapsed_s(t0));
  note = buf;
  return true;
}

bool criterion_6(std::string& note) {
  const auto t0 = std::chrono::steady_clock::now();
  RandomSource rng(606);
  audit::InstanceFamily family{2, 8, wide_family()};
  const auto report = audit::audit_truthfulness(
      audit::MechanismId::kDifferential, family, 200, rng, 50, 0.1, 1e-7);
  if (!report.passed()) {
    note = "found " + std::to_string(report.violations.size()) +
           " utility gains; first: " + report.violations.front().detail;
    return false;
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "200 instances x agents x (50 grid + tie probes), %.1fs",
                elapsed_s(t0));
  note = buf;
  return true;
}

bool criterion_7(std::string& note) {
  const auto t0 = std::chrono::steady_clock::now();
  RandomSource rng(707);
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    const Instance inst = draw(rng, wide_family(), 2, 8);
    const ReportProfile truth = ReportProfile::truthful(inst);
    const std::size_t agent = rng.uniform_index(inst.size());
    const double analytic = mechanisms::myerson_payment(agent, inst, truth);
    const double quad = testsupport::oracle_payment(agent, inst, truth, 1e-7);
    worst = std::max(worst, std::abs(analytic - quad));
    if (std::abs(analytic - quad) > 1e-6) {
      note = "payment mismatch " + std::to_string(analytic - quad) + " at " +
             instance_digest(inst) + " agent " + std::to_string(agent);
      return false;
    }
  }
  const Instance a = instance_a();
  const ReportProfile truth_a = ReportProfile::truthful(a);
  const double p1 = mechanisms::myerson_payment(0, a, truth_a);
  const double p3 = mechanisms::myerson_payment(2, a, truth_a);
  if (std::abs(p1 - 1.0) > 1e-9 ||
      std::abs(p3 - (-1.0 - std::log(3.0))) > 1e-9) {
    note = "fixed-instance payments off: p1=" + std::to_string(p1) +
           " p3=" + std::to_string(p3);
    return false;
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "worst |analytic - quadrature| %.2e, %.1fs",
                worst, elapsed_s(t0));
  note = buf;
  return true;
}

bool criterion_8(std::string& note) {
  RandomSource rng(808);
  for (int t = 0; t < 300; ++t) {
    const Instance inst = draw(rng, wide_family(), 1, 10);
    const auto out =
        mechanisms::differential_mechanism(inst, ReportProfile::truthful(inst));
    const auto& trace = std::get<DifferentialTrace>(out.trace);
    double total_utility = 0.0;
    for (std::size_t i = 0; i < inst.size(); ++i) {
      total_utility += inst[i].value * trace.allocations[i] - trace.payments[i];
    }
    if (out.subsidy > total_utility + 1e-9) {
      note = "subsidy " + std::to_string(out.subsidy) +
             " above total utility " + std::to_string(total_utility) + " at " +
             instance_digest(inst);
      return false;
    }
  }
  const auto out_a = mechanisms::differential_mechanism(
      instance_a(), ReportProfile::truthful(instance_a()));
  if (std::abs(out_a.subsidy - std::log(3.0)) > 1e-9) {
    note = "fixed-instance subsidy " + std::to_string(out_a.subsidy) +
           " misses ln 3";
    return false;
  }
  note = "300 outcomes + fixed instance";
  return true;
}

bool criterion_9(std::string& note) {
  const auto t0 = std::chrono::steady_clock::now();
  RandomSource rng(909);
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    const Instance inst = draw(rng, mid_family(), 2, 10);
    const ReportProfile truth = ReportProfile::truthful(inst);
    const bool mp = t % 2 == 1;
    RandomSource mech_rng(rng.next_u64());
    const auto out = mp
                         ? mechanisms::uniform_large_mp(inst, truth, 0.1, mech_rng)
                         : mechanisms::uniform_large(inst, truth, 0.1, mech_rng);
    for (std::uint64_t s = 0; s < 10; ++s) {
      RandomSource sim_rng(rng.next_u64());
      const MarketState state = equilibrium::simulate_trades(
          inst, out.constraints, sim_rng, 32 * inst.size() + 32);
      double paid = 0.0;
      for (double p : state.payments) paid += p;
      worst = std::max(worst, std::abs(paid));
      if (std::abs(paid) > 1e-9) {
        note = "payments sum to " + std::to_string(paid) + " at " +
               instance_digest(inst);
        return false;
      }
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "worst |sum p| %.2e over 5000 states, %.1fs",
                worst, elapsed_s(t0));
  note = buf;
  return true;
}

bool criterion_10(std::string& note) {
  const auto t0 = std::chrono::steady_clock::now();
  audit::InstanceFamily family{2, 8, mid_family()};
  for (bool mp : {false, true}) {
    RandomSource rng(mp ? 1011 : 1010);
    const auto report = audit::audit_truthfulness(
        mp ? audit::MechanismId::kUniformLargeMp
           : audit::MechanismId::kUniformLarge,
        family, 50, rng, 20, 0.2, 1e-9);
    if (!report.passed()) {
      note = std::string(mp ? "multi-parameter" : "single-parameter") +
             " sampling mechanism manipulable: " +
             report.violations.front().detail;
      return false;
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "100 instances x 20 misreports, %.1fs",
                elapsed_s(t0));
  note = buf;
  return true;
}

bool criterion_11(std::string& note) {
  const auto t0 = std::chrono::steady_clock::now();
  RandomSource rng(1101);
  const auto report = audit::large_market_campaign(2000, 0.1, 100, false, rng,
                                                   narrow_family(), 0.35, 0.95);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "floor fraction %.2f, median ratio %.4f, worst %.4f, %.1fs",
                report.floor_fraction, report.median_ratio, report.worst_ratio,
                elapsed_s(t0));
  note = buf;
  return report.floor_fraction >= 0.95;
}

bool criterion_12(std::string& note) {
  const auto t0 = std::chrono::steady_clock::now();
  RandomSource rng(1212);
  for (int t = 0; t < 500; ++t) {
    const Instance inst = draw(rng, wide_family(), 2, 10);
    const ReportProfile truth = ReportProfile::truthful(inst);
    const std::size_t agent = rng.uniform_index(inst.size());
    double top = 0.0;
    for (const Agent& a : inst.agents()) top = std::max(top, a.value);
    double prev = -kInf;
    for (int g = 0; g < 200; ++g) {
      const double z = (2.0 * top + 1.0) * static_cast<double>(g) / 199.0;
      const double x = mechanisms::allocation_fn(z, agent, inst, truth);
      if (x < prev - 1e-9) {
        note = "allocation decreased by " + std::to_string(prev - x) + " at " +
               instance_digest(inst) + " agent " + std::to_string(agent);
        return false;
      }
      prev = x;
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "500 pairs x 200-point grids, %.1fs",
                elapsed_s(t0));
  note = buf;
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    bool (*fn)(std::string&);
  };
  const std::vector<Criterion> criteria = {
      {1, "optimal distribution matches the grid-search oracle", criterion_1},
      {2, "uniform-price sweep reproduces the 1/2 + eps bound", criterion_2},
      {3, "market-optimal price reaches the optimum uniquely", criterion_3},
      {4, "seeded simulations land on the unique state", criterion_4},
      {5, "differential mechanism is 1/2-approximate", criterion_5},
      {6, "differential mechanism is truthful under misreport sweeps",
       criterion_6},
      {7, "analytic payments match adaptive quadrature", criterion_7},
      {8, "subsidy never exceeds total agent utility", criterion_8},
      {9, "uniform mechanisms balance payments in every state", criterion_9},
      {10, "sampling mechanisms are universally truthful per coin flip",
       criterion_10},
      {11, "large-market ratio floor holds across seeds", criterion_11},
      {12, "allocation functions are monotone in the reported value",
       criterion_12},
  };
  int failures = 0;
  const int only = argc > 1 ? std::atoi(argv[1]) : 0;
  for (const Criterion& c : criteria) {
    if (only != 0 && c.id != only) continue;
    std::string note;
    const bool ok = c.fn(note);
    std::printf("[%s] %2d. %s%s%s\n", ok ? "PASS" : "FAIL", c.id, c.name,
                note.empty() ? "" : " -- ", note.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  return failures;
}
