#pragma once

// Instance construction, random generation, and JSON serialization.
//
// Document formats (arrays follow the input order of the instance document):
//   instance: {"agents": [{"v": number, "B": number, "Gamma": number}, ...]}
//   outcome:  {"constraints": [{"lo": number|"-inf", "hi": number|"+inf",
//              "lambda": number}, ...], "x": [...], "p": [...],
//              "mlw_worst": number, "subsidy": number, "trace": {...}}

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "exmarket/random.hpp"
#include "exmarket/types.hpp"

namespace exmarket {

/// Builds the canonical instance from (value, budget, endowment) triples.
inline Instance make_instance(std::vector<Agent> agents) {
  return Instance(std::move(agents));
}

/// Sampling ranges for i.i.d. agent generation. Bounds must be positive,
/// finite, and ordered.
struct GenConfig {
  double value_min = 1.0, value_max = 2.0;
  double budget_min = 1.0, budget_max = 2.0;
  double endowment_min = 1.0, endowment_max = 2.0;

  void validate() const {
    auto check = [](double lo, double hi, const char* what) {
      if (!(lo > 0.0) || !(hi >= lo) || !std::isfinite(hi)) {
        throw std::invalid_argument(std::string("invalid ") + what +
                                    " range: bounds must be positive and ordered");
      }
    };
    check(value_min, value_max, "value");
    check(budget_min, budget_max, "budget");
    check(endowment_min, endowment_max, "endowment");
  }
};

/// Draws n agents i.i.d. from the configured ranges. Deterministic under the
/// seed of `rng`.
inline Instance generate_random_instance(std::size_t n, const GenConfig& cfg,
                                         RandomSource& rng) {
  if (n == 0) throw std::invalid_argument("instance size must be at least 1");
  cfg.validate();
  std::vector<Agent> agents;
  agents.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Agent a;
    a.value = rng.uniform(cfg.value_min, cfg.value_max);
    a.budget = rng.uniform(cfg.budget_min, cfg.budget_max);
    a.endowment = rng.uniform(cfg.endowment_min, cfg.endowment_max);
    agents.push_back(a);
  }
  return Instance(std::move(agents));
}

// --- JSON serialization -----------------------------------------------------

inline nlohmann::json instance_to_json(const Instance& instance) {
  // Agents are emitted in input order so the document round-trips to the
  // identical canonical order and original indices.
  std::vector<nlohmann::json> agents(instance.size());
  for (std::size_t i = 0; i < instance.size(); ++i) {
    const Agent& a = instance[i];
    agents[instance.original_index(i)] = {
        {"v", a.value}, {"B", a.budget}, {"Gamma", a.endowment}};
  }
  return nlohmann::json{{"agents", agents}};
}

inline Instance instance_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("agents")) {
    throw SchemaError("instance document is missing the \"agents\" key");
  }
  const auto& arr = doc.at("agents");
  if (!arr.is_array() || arr.empty()) {
    throw SchemaError("\"agents\" must be a non-empty array");
  }
  std::vector<Agent> agents;
  agents.reserve(arr.size());
  for (const auto& item : arr) {
    if (!item.is_object() || !item.contains("v") || !item.contains("B") ||
        !item.contains("Gamma")) {
      throw SchemaError("each agent needs numeric \"v\", \"B\", \"Gamma\"");
    }
    Agent a;
    try {
      a.value = item.at("v").get<double>();
      a.budget = item.at("B").get<double>();
      a.endowment = item.at("Gamma").get<double>();
    } catch (const nlohmann::json::exception&) {
      throw SchemaError("agent fields must be numbers");
    }
    if (!std::isfinite(a.value) || !std::isfinite(a.budget) ||
        !std::isfinite(a.endowment) || a.value < 0 || a.budget < 0 ||
        a.endowment < 0) {
      throw SchemaError("agent fields must be finite and nonnegative");
    }
    agents.push_back(a);
  }
  return Instance(std::move(agents));
}

inline Instance read_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open instance file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("malformed instance document: " + std::string(e.what()));
  }
  return instance_from_json(doc);
}

inline void write_instance(const Instance& instance, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write instance file: " + path);
  out << instance_to_json(instance).dump(2) << '\n';
}

inline nlohmann::json bound_to_json(double b) {
  if (b == kInf) return "+inf";
  if (b == -kInf) return "-inf";
  return b;
}

inline double bound_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "+inf" || s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    throw SchemaError("unrecognized interval bound: " + s);
  }
  if (!j.is_number()) throw SchemaError("interval bound must be a number or ±inf");
  return j.get<double>();
}

/// Reorders a canonical-order vector into the instance's input order.
template <typename T>
std::vector<T> to_input_order(const Instance& instance,
                              const std::vector<T>& canonical) {
  std::vector<T> out(canonical.size());
  for (std::size_t i = 0; i < canonical.size(); ++i) {
    out[instance.original_index(i)] = canonical[i];
  }
  return out;
}

/// Reorders an input-order vector into canonical order.
template <typename T>
std::vector<T> to_canonical_order(const Instance& instance,
                                  const std::vector<T>& input) {
  std::vector<T> out(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    out[i] = input[instance.original_index(i)];
  }
  return out;
}

inline nlohmann::json constraints_to_json(
    const Instance& instance, const std::vector<ExchangeConstraint>& cs) {
  auto ordered = to_input_order(instance, cs);
  nlohmann::json arr = nlohmann::json::array();
  for (const ExchangeConstraint& c : ordered) {
    arr.push_back({{"lo", bound_to_json(c.lower)},
                   {"hi", bound_to_json(c.upper)},
                   {"lambda", c.price}});
  }
  return arr;
}

inline std::vector<ExchangeConstraint> constraints_from_json(
    const Instance& instance, const nlohmann::json& arr) {
  if (!arr.is_array() || arr.size() != instance.size()) {
    throw SchemaError("constraints array must match the instance size");
  }
  std::vector<ExchangeConstraint> input_order;
  input_order.reserve(arr.size());
  for (const auto& item : arr) {
    if (!item.is_object() || !item.contains("lo") || !item.contains("hi") ||
        !item.contains("lambda")) {
      throw SchemaError("each constraint needs \"lo\", \"hi\", \"lambda\"");
    }
    ExchangeConstraint c;
    c.lower = bound_from_json(item.at("lo"));
    c.upper = bound_from_json(item.at("hi"));
    c.price = item.at("lambda").get<double>();
    if (c.lower > 0 || c.upper < 0 || !(c.price >= 0)) {
      throw SchemaError("constraint must satisfy lo <= 0 <= hi and lambda >= 0");
    }
    input_order.push_back(c);
  }
  return to_canonical_order(instance, input_order);
}

inline nlohmann::json trace_to_json(const Instance& instance,
                                    const MechanismOutcome& outcome) {
  nlohmann::json t;
  if (const auto* d = std::get_if<DifferentialTrace>(&outcome.trace)) {
    t["k"] = d->partition_point;
    t["q"] = d->price_q;
    t["v_hat"] = to_input_order(instance, d->thresholds);
    t["allocations"] = to_input_order(instance, d->allocations);
    t["payments"] = to_input_order(instance, d->payments);
    t["breakpoints"] = to_input_order(instance, d->breakpoints);
    if (d->degenerate) t["degenerate"] = true;
  } else {
    const auto& s = std::get<SamplingTrace>(outcome.trace);
    std::vector<std::size_t> L, R;
    for (std::size_t i : s.sampled) L.push_back(instance.original_index(i));
    for (std::size_t i : s.complement) R.push_back(instance.original_index(i));
    std::sort(L.begin(), L.end());
    std::sort(R.begin(), R.end());
    t["L"] = L;
    t["R"] = R;
    t["beta"] = s.sample_rate;
    t["opt_L"] = s.sampled_opt;
    t["lambda"] = s.uniform_price;
    if (s.degenerate) t["degenerate"] = true;
  }
  return t;
}

inline nlohmann::json outcome_to_json(const Instance& instance,
                                      const MechanismOutcome& outcome) {
  nlohmann::json doc;
  doc["constraints"] = constraints_to_json(instance, outcome.constraints);
  // x/p report the unique equilibrium when there is one, otherwise the
  // worst reachable state backing mlw_worst.
  const MarketState& state =
      outcome.equilibrium ? *outcome.equilibrium : outcome.worst_state;
  doc["x"] = to_input_order(instance, state.trades);
  doc["p"] = to_input_order(instance, state.payments);
  doc["equilibrium_unique"] = outcome.equilibrium.has_value();
  doc["mlw_worst"] = outcome.welfare_worst;
  doc["mlw_exact"] = outcome.welfare_exact;
  doc["subsidy"] = outcome.subsidy;
  doc["trace"] = trace_to_json(instance, outcome);
  return doc;
}

inline void write_outcome(const Instance& instance,
                          const MechanismOutcome& outcome,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write outcome file: " + path);
  out << outcome_to_json(instance, outcome).dump(2) << '\n';
}

/// FNV-1a hash of the canonical agent data; stable across runs and platforms
/// with identical doubles.
inline std::string instance_digest(const Instance& instance) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](double x) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(x));
    std::memcpy(&bits, &x, sizeof(bits));
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  for (const Agent& a : instance.agents()) {
    mix(a.value);
    mix(a.budget);
    mix(a.endowment);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace exmarket
