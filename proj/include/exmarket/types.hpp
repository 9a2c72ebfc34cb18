#pragma once

// Core domain types for budgeted exchange markets: agents endowed with
// divisible resources and money, per-agent trade intervals with unit prices,
// and the market states that free trading under those constraints produces.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace exmarket {

/// Absolute tolerance used by equality comparisons in market logic.
inline constexpr double kTol = 1e-9;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Equality within `tol`, scaled up for magnitudes above one.
inline bool nearly_equal(double a, double b, double tol = kTol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

struct Agent {
  double value = 0.0;      ///< utility per unit of resource
  double budget = 0.0;     ///< money available for net purchases
  double endowment = 0.0;  ///< resource units initially held
};

/// Thrown when a document violates the instance or outcome schema.
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void require_finite_nonneg(double x, const char* what) {
  if (!std::isfinite(x) || x < 0.0) {
    throw std::invalid_argument(std::string(what) +
                                " must be finite and nonnegative");
  }
}

}  // namespace detail

/// An agent set held in canonical order: descending value, ties broken by
/// lower original input index. Original indices are retained so results can
/// be reported back in input order.
class Instance {
 public:
  explicit Instance(std::vector<Agent> agents) {
    if (agents.empty()) {
      throw std::invalid_argument("instance needs at least one agent");
    }
    for (const Agent& a : agents) {
      detail::require_finite_nonneg(a.value, "agent value");
      detail::require_finite_nonneg(a.budget, "agent budget");
      detail::require_finite_nonneg(a.endowment, "agent endowment");
    }
    original_.resize(agents.size());
    std::iota(original_.begin(), original_.end(), std::size_t{0});
    std::stable_sort(original_.begin(), original_.end(),
                     [&](std::size_t a, std::size_t b) {
                       return agents[a].value > agents[b].value;
                     });
    agents_.reserve(agents.size());
    for (std::size_t pos : original_) agents_.push_back(agents[pos]);
    inverse_.resize(agents.size());
    for (std::size_t i = 0; i < original_.size(); ++i) {
      inverse_[original_[i]] = i;
    }
    for (const Agent& a : agents_) total_endowment_ += a.endowment;
    if (!std::isfinite(total_endowment_)) {
      throw std::invalid_argument("total endowment overflows");
    }
  }

  std::size_t size() const { return agents_.size(); }
  const Agent& operator[](std::size_t i) const { return agents_[i]; }
  const std::vector<Agent>& agents() const { return agents_; }

  /// Input index of the agent at canonical position `i`.
  std::size_t original_index(std::size_t i) const { return original_[i]; }
  /// Canonical position of the agent that was at `input` in the input order.
  std::size_t position_of_input(std::size_t input) const {
    return inverse_[input];
  }

  double total_endowment() const { return total_endowment_; }

 private:
  std::vector<Agent> agents_;
  std::vector<std::size_t> original_;
  std::vector<std::size_t> inverse_;
  double total_endowment_ = 0.0;
};

/// Reported private parameters, aligned with the canonical agent order of an
/// Instance. Budgets and endowments are only reported in the multi-parameter
/// setting; when absent the public (true) values apply.
struct ReportProfile {
  std::vector<double> values;
  std::optional<std::vector<double>> budgets;
  std::optional<std::vector<double>> endowments;

  static ReportProfile truthful(const Instance& instance) {
    ReportProfile r;
    r.values.reserve(instance.size());
    for (const Agent& a : instance.agents()) r.values.push_back(a.value);
    return r;
  }

  void validate_against(const Instance& instance) const {
    auto check = [&](const std::vector<double>& xs, const char* what) {
      if (xs.size() != instance.size()) {
        throw std::invalid_argument(std::string(what) +
                                    " length does not match instance");
      }
      for (double x : xs) detail::require_finite_nonneg(x, what);
    };
    check(values, "reported values");
    if (budgets) check(*budgets, "reported budgets");
    if (endowments) check(*endowments, "reported endowments");
  }
};

/// Per-agent trade interval [lower, upper] with lower <= 0 <= upper (possibly
/// infinite) and the unit price the agent pays or receives.
struct ExchangeConstraint {
  double lower = 0.0;
  double upper = 0.0;
  double price = 0.0;

  static ExchangeConstraint no_trade(double price = 0.0) {
    return {0.0, 0.0, price};
  }
  static ExchangeConstraint unconstrained(double price) {
    return {-kInf, kInf, price};
  }
  bool zero_width() const { return lower == 0.0 && upper == 0.0; }
};

/// Net trades and net payments for all agents, in canonical instance order.
/// trades[i] > 0 means agent i is a net buyer; payments[i] = price * trade.
struct MarketState {
  std::vector<double> trades;
  std::vector<double> payments;

  static MarketState zeros(std::size_t n) {
    return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  }
};

/// Internal quantities of the differential-pricing mechanism.
struct DifferentialTrace {
  std::size_t partition_point = 0;  ///< largest admissible buyer prefix
  double price_q = 0.0;             ///< pivot price the intervals are built on
  std::vector<double> thresholds;   ///< per-agent sign-crossing value
  std::vector<double> allocations;  ///< designed net trade per agent
  std::vector<double> payments;     ///< designed net payment per agent
  std::vector<std::vector<double>> breakpoints;  ///< allocation regime edges
  bool degenerate = false;          ///< no-trade fallback was taken
};

/// Internal quantities of the sampling-based uniform-price mechanisms.
struct SamplingTrace {
  std::vector<std::size_t> sampled;     ///< canonical indices priced out (L)
  std::vector<std::size_t> complement;  ///< canonical indices free to trade
  double sample_rate = 0.0;
  double sampled_opt = 0.0;   ///< optimal liquid welfare of the sampled set
  double uniform_price = 0.0;
  bool degenerate = false;    ///< no-trade fallback was taken
};

/// Everything a mechanism run produces: the constraints handed to stage 2,
/// the equilibrium (when unique), a worst-case reachable state with its
/// welfare, the subsidy, and the mechanism's internal trace.
struct MechanismOutcome {
  std::vector<ExchangeConstraint> constraints;
  std::optional<MarketState> equilibrium;  ///< nullopt: multiple states reachable
  MarketState worst_state;                 ///< minimizer backing welfare_worst
  double welfare_worst = 0.0;
  bool welfare_exact = true;  ///< false: welfare_worst is a certified lower bound
  double subsidy = 0.0;       ///< -sum of designed payments
  std::variant<DifferentialTrace, SamplingTrace> trace;
};

}  // namespace exmarket
