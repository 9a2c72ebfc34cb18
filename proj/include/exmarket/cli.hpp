#pragma once

// Command-line front door. Subcommands:
//   gen       emit a random instance document
//   opt       optimal-distribution summary of an instance
//   mop       market-optimal price and intervals
//   run       execute a mechanism and emit the outcome document
//   simulate  run the stage-2 trade simulator under given constraints
//   audit     truthfulness | ratio | profitability | large-market | lower-bound
//   theta     large-market parameters of an instance
// Exit codes: 0 success, 1 audit violation, 2 usage or schema error.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "exmarket/audit.hpp"
#include "exmarket/mechanisms.hpp"
#include "exmarket/model.hpp"

namespace exmarket::cli {

namespace detail {

inline void emit(const std::string& text, const std::string& out_path,
                 std::ostream& out) {
  if (out_path.empty()) {
    out << text;
    if (text.empty() || text.back() != '\n') out << '\n';
    return;
  }
  std::ofstream f(out_path);
  if (!f) throw SchemaError("cannot write output file: " + out_path);
  f << text;
  if (text.empty() || text.back() != '\n') f << '\n';
}

inline Instance load_instance(const std::string& path) {
  if (path.empty()) throw SchemaError("an --instance file is required");
  return read_instance(path);
}

}  // namespace detail

/// Runs the CLI on `args` (without argv[0]). Streams replace stdout/stderr so
/// the front door is testable in-process.
inline int run(const std::vector<std::string>& args, std::ostream& out,
               std::ostream& err) {
  CLI::App app{"budgeted exchange-market mechanisms", "exmarket"};
  app.require_subcommand(1);

  // gen
  auto* gen_cmd = app.add_subcommand("gen", "generate a random instance");
  std::size_t gen_n = 0;
  std::uint64_t gen_seed = 0;
  GenConfig gen_cfg;
  std::string gen_out;
  gen_cmd->add_option("--n", gen_n, "number of agents")->required();
  gen_cmd->add_option("--seed", gen_seed, "generator seed");
  gen_cmd->add_option("--vmin", gen_cfg.value_min);
  gen_cmd->add_option("--vmax", gen_cfg.value_max);
  gen_cmd->add_option("--bmin", gen_cfg.budget_min);
  gen_cmd->add_option("--bmax", gen_cfg.budget_max);
  gen_cmd->add_option("--gmin", gen_cfg.endowment_min);
  gen_cmd->add_option("--gmax", gen_cfg.endowment_max);
  gen_cmd->add_option("--out", gen_out, "output path (default stdout)");

  // shared instance/mechanism options
  std::string instance_path, out_path, mechanism = "differential";
  std::string constraints_path, format = "json", campaign;
  double beta = 0.1, epsilon = 0.1;
  std::uint64_t seed = 0;
  std::size_t trials = 200, campaign_n = 2000, grid = 10000, max_steps = 1000;
  std::size_t n_min = 2, n_max = 8;

  auto* opt_cmd = app.add_subcommand("opt", "optimal distribution summary");
  opt_cmd->add_option("--instance", instance_path)->required();
  opt_cmd->add_option("--out", out_path);

  auto* mop_cmd = app.add_subcommand("mop", "market-optimal price constraints");
  mop_cmd->add_option("--instance", instance_path)->required();
  mop_cmd->add_option("--out", out_path);

  auto* run_cmd = app.add_subcommand("run", "execute a mechanism");
  run_cmd->add_option("--instance", instance_path)->required();
  run_cmd->add_option("--mechanism", mechanism,
                      "uniform-large | uniform-large-mp | differential");
  run_cmd->add_option("--beta", beta);
  run_cmd->add_option("--seed", seed);
  run_cmd->add_option("--out", out_path);

  auto* sim_cmd = app.add_subcommand("simulate", "stage-2 trade simulator");
  sim_cmd->add_option("--instance", instance_path)->required();
  sim_cmd->add_option("--constraints", constraints_path,
                      "outcome document or {\"constraints\": [...]}")
      ->required();
  sim_cmd->add_option("--seed", seed);
  sim_cmd->add_option("--max-steps", max_steps);
  sim_cmd->add_option("--out", out_path);

  auto* audit_cmd = app.add_subcommand("audit", "run an audit campaign");
  audit_cmd
      ->add_option("--campaign", campaign,
                   "truthfulness | ratio | profitability | large-market | "
                   "lower-bound")
      ->required();
  audit_cmd->add_option("--mechanism", mechanism,
                        "mechanism under audit (mop allowed as a control)");
  audit_cmd->add_option("--trials", trials);
  audit_cmd->add_option("--seed", seed);
  audit_cmd->add_option("--beta", beta);
  audit_cmd->add_option("--epsilon", epsilon);
  audit_cmd->add_option("--n", campaign_n, "agents per large-market instance");
  audit_cmd->add_option("--n-min", n_min, "family size lower bound");
  audit_cmd->add_option("--n-max", n_max, "family size upper bound");
  audit_cmd->add_option("--grid", grid, "price grid for lower-bound");
  audit_cmd->add_option("--format", format, "json | csv");
  audit_cmd->add_option("--out", out_path);

  auto* theta_cmd = app.add_subcommand("theta", "large-market parameters");
  theta_cmd->add_option("--instance", instance_path)->required();
  theta_cmd->add_option("--out", out_path);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (gen_cmd->parsed()) {
      RandomSource rng(gen_seed);
      const Instance instance = generate_random_instance(gen_n, gen_cfg, rng);
      detail::emit(instance_to_json(instance).dump(2), gen_out, out);
      return 0;
    }
    if (opt_cmd->parsed()) {
      const Instance instance = detail::load_instance(instance_path);
      const auto od = welfare::optimal_distribution(instance);
      nlohmann::json doc;
      doc["k_star"] = od.k_star;
      doc["x_star"] = to_input_order(instance, od.x_star);
      doc["opt"] = od.opt;
      detail::emit(doc.dump(2), out_path, out);
      return 0;
    }
    if (mop_cmd->parsed()) {
      const Instance instance = detail::load_instance(instance_path);
      const auto mop = welfare::market_optimal_price(instance);
      nlohmann::json doc;
      doc["lambda_star"] = mop.price;
      doc["constraints"] = constraints_to_json(instance, mop.constraints);
      const auto unique =
          equilibrium::check_equilibrium_unique(instance, mop.constraints);
      if (unique) {
        doc["welfare"] = unique->worst_welfare;
        doc["x"] = to_input_order(instance, unique->state.trades);
      }
      detail::emit(doc.dump(2), out_path, out);
      return 0;
    }
    if (run_cmd->parsed()) {
      const Instance instance = detail::load_instance(instance_path);
      const auto id = audit::parse_mechanism(mechanism);
      const ReportProfile truth = ReportProfile::truthful(instance);
      const MechanismOutcome outcome =
          audit::run_mechanism(id, instance, truth, beta, seed);
      nlohmann::json doc = outcome_to_json(instance, outcome);
      const double opt = welfare::optimal_distribution(instance).opt;
      doc["opt"] = opt;
      doc["ratio"] = opt > 0.0 ? outcome.welfare_worst / opt : 1.0;
      detail::emit(doc.dump(2), out_path, out);
      return 0;
    }
    if (sim_cmd->parsed()) {
      const Instance instance = detail::load_instance(instance_path);
      std::ifstream in(constraints_path);
      if (!in) throw SchemaError("cannot open constraints file: " + constraints_path);
      nlohmann::json doc;
      try {
        in >> doc;
      } catch (const nlohmann::json::exception& e) {
        throw SchemaError("malformed constraints document: " +
                          std::string(e.what()));
      }
      if (!doc.contains("constraints")) {
        throw SchemaError("document is missing the \"constraints\" key");
      }
      const auto constraints = constraints_from_json(instance, doc["constraints"]);
      RandomSource rng(seed);
      const MarketState state =
          equilibrium::simulate_trades(instance, constraints, rng, max_steps);
      nlohmann::json result;
      result["x"] = to_input_order(instance, state.trades);
      result["p"] = to_input_order(instance, state.payments);
      detail::emit(result.dump(2), out_path, out);
      return 0;
    }
    if (theta_cmd->parsed()) {
      const Instance instance = detail::load_instance(instance_path);
      nlohmann::json doc;
      doc["theta"] = audit::measure_theta(instance);
      detail::emit(doc.dump(2), out_path, out);
      return 0;
    }
    if (audit_cmd->parsed()) {
      RandomSource rng(seed);
      audit::InstanceFamily family;
      family.n_min = n_min;
      family.n_max = n_max;
      if (n_min == 0 || n_max < n_min) {
        throw std::invalid_argument("family bounds need 1 <= n-min <= n-max");
      }
      std::optional<audit::AuditReport> report;
      if (campaign == "truthfulness") {
        report = audit::audit_truthfulness(
            audit::parse_mechanism(mechanism, /*allow_mop=*/true), family,
            trials, rng, 50, beta);
      } else if (campaign == "ratio") {
        const auto id = audit::parse_mechanism(mechanism, true);
        std::optional<double> floor;
        if (id == audit::MechanismId::kDifferential) floor = 0.5 - kTol;
        report = audit::audit_ratio(id, family, trials, rng, floor, beta);
      } else if (campaign == "profitability") {
        report = audit::audit_profitability(
            audit::parse_mechanism(mechanism, true), family, trials, rng, 10,
            beta);
      } else if (campaign == "large-market") {
        report = audit::large_market_campaign(
            campaign_n, beta, trials,
            mechanism == "uniform-large-mp", rng);
      } else if (campaign == "lower-bound") {
        report = audit::lower_bound_sweep(epsilon, grid);
      } else {
        throw std::invalid_argument("unknown campaign: " + campaign);
      }
      if (format == "csv") {
        detail::emit(audit::to_csv(*report), out_path, out);
      } else if (format == "json") {
        detail::emit(audit::to_json(*report).dump(2), out_path, out);
      } else {
        throw std::invalid_argument("unknown format: " + format);
      }
      return report->passed() ? 0 : 1;
    }
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 2;
  }
  err << "error: no subcommand\n";
  return 2;
}

}  // namespace exmarket::cli
