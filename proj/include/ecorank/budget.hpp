#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace ecorank {

/// Per-call price of a backend, in abstract cost units:
///   cost = prompt_cost * prompt_tokens + output_cost * output_tokens + fixed_cost
struct Pricing {
  double prompt_cost = 0.0;
  double output_cost = 0.0;
  double fixed_cost = 0.0;
  std::string unit = "token-equivalents";

  /// Throws ConfigError if any component is negative or non-finite.
  void validate() const;

  /// Price of a one-token prompt with a one-token answer. Used to order
  /// backends from cheap to expensive.
  double reference_call_cost() const;

  bool operator==(const Pricing&) const = default;
};

using PricingTable = std::map<std::string, Pricing>;

double call_cost(std::int64_t prompt_tokens, std::int64_t output_tokens,
                 const Pricing& pricing);

struct CostRecord {
  std::int64_t prompt_tokens = 0;
  std::int64_t output_tokens = 0;
  double cost = 0.0;
  std::string backend_name;
  std::size_t stage_index = 0;
};

/// Reserved budget returned by Ledger::try_charge. Must be settled or
/// released on the ledger that issued it.
struct Permit {
  std::uint64_t id = 0;
  double amount = 0.0;
};

/// Hard-capped spend tracker for one query. A call is only made after
/// try_charge grants a permit, so the sum of reservations and settled
/// costs never exceeds the budget as long as actual costs stay within
/// their estimates.
class Ledger {
 public:
  explicit Ledger(double budget = 0.0);

  double budget() const noexcept { return budget_; }
  double spent() const noexcept { return spent_; }
  double reserved() const noexcept { return reserved_; }
  /// Budget not yet spent or reserved, under the current ceiling.
  double remaining() const noexcept;
  const std::vector<CostRecord>& records() const noexcept { return records_; }

  /// Reserves `estimated` if it fits; std::nullopt leaves the ledger unchanged.
  std::optional<Permit> try_charge(double estimated);

  /// Replaces the reservation with the actual cost. If the actual cost is
  /// larger than the reservation the difference is still recorded (actual
  /// usage wins) and overrun() becomes true.
  void settle(const Permit& permit, CostRecord record);
  void release(const Permit& permit);

  /// True when some settled record cost more than its reservation and the
  /// ledger went over budget as a result.
  bool overrun() const noexcept { return spent_ > budget_; }

  /// Lowers the spend ceiling used by try_charge below the budget. Pipelines
  /// raise the ceiling stage by stage so unspent allowance rolls forward.
  /// Clamped to [0, budget].
  void set_ceiling(double ceiling);
  double ceiling() const noexcept { return ceiling_; }

  /// Sum of settled costs recorded with the given stage index.
  double spent_in_stage(std::size_t stage_index) const;

 private:
  double budget_;
  double ceiling_;
  double spent_ = 0.0;
  double reserved_ = 0.0;
  std::uint64_t next_permit_ = 1;
  std::map<std::uint64_t, double> open_;
  std::vector<CostRecord> records_;
};

/// Fractions of a per-query budget assigned to successive stages.
class BudgetSplit {
 public:
  /// Throws InvalidSplit unless every fraction is in [0,1] and they sum to
  /// 1 within 1e-9.
  explicit BudgetSplit(std::vector<double> fractions);
  const std::vector<double>& fractions() const noexcept { return fractions_; }
  std::size_t size() const noexcept { return fractions_.size(); }

 private:
  std::vector<double> fractions_;
};

inline constexpr double kSplitTolerance = 1e-9;

std::vector<double> split_budget(double total, const BudgetSplit& split);

/// Integral variant: every stage but the last is floored and the last stage
/// receives the remainder, so the parts sum to `total` exactly.
std::vector<std::int64_t> split_budget_tokens(std::int64_t total,
                                              const BudgetSplit& split);

/// Converts a money budget into per-backend token budgets.
///
/// `cost_ratios` gives each backend's per-token price relative to a unit
/// backend and `unit_price` is the money cost of one token on that unit
/// backend. The reference backend's token count is rounded to
/// `significant_figures`, and every other backend receives the reference
/// count scaled by the inverse price ratio (a backend three times cheaper
/// gets three times the tokens).
std::map<std::string, std::int64_t> tokens_for_budget(
    double money, const std::map<std::string, double>& cost_ratios,
    const std::string& reference, double unit_price,
    int significant_figures = 1);

/// Budget category presets: cents per query, matching the low/medium/high
/// tiers used throughout the tools.
struct BudgetCategory {
  std::string name;
  double cents = 0.0;
};
const std::vector<BudgetCategory>& standard_budget_categories();
/// Cost ratios relative to the reference backend "t5-xl".
const std::map<std::string, double>& standard_cost_ratios();
/// Cents per reference-backend token implied by the high budget category.
double standard_cents_per_reference_token();

PricingTable pricing_table_from_json(const nlohmann::json& doc);
nlohmann::json pricing_table_to_json(const PricingTable& table);
PricingTable load_pricing_table(const std::filesystem::path& path);

}  // namespace ecorank
