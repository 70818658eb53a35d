#include "ecorank/budget.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ecorank/errors.hpp"

namespace ecorank {

void Pricing::validate() const {
  for (double v : {prompt_cost, output_cost, fixed_cost}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ConfigError("pricing components must be finite and non-negative");
    }
  }
}

double Pricing::reference_call_cost() const {
  return prompt_cost + output_cost + fixed_cost;
}

double call_cost(std::int64_t prompt_tokens, std::int64_t output_tokens,
                 const Pricing& pricing) {
  return pricing.prompt_cost * static_cast<double>(prompt_tokens) +
         pricing.output_cost * static_cast<double>(output_tokens) +
         pricing.fixed_cost;
}

Ledger::Ledger(double budget) : budget_(budget), ceiling_(budget) {
  if (!std::isfinite(budget) || budget < 0.0) {
    throw ConfigError("budget must be finite and non-negative");
  }
}

double Ledger::remaining() const noexcept {
  return std::max(0.0, ceiling_ - spent_ - reserved_);
}

std::optional<Permit> Ledger::try_charge(double estimated) {
  if (!(estimated >= 0.0)) throw ConfigError("estimated cost must be >= 0");
  if (spent_ + reserved_ + estimated > ceiling_) return std::nullopt;
  Permit permit{next_permit_++, estimated};
  open_.emplace(permit.id, estimated);
  reserved_ += estimated;
  return permit;
}

void Ledger::settle(const Permit& permit, CostRecord record) {
  auto it = open_.find(permit.id);
  if (it == open_.end()) throw Error("settle: unknown or already closed permit");
  reserved_ -= it->second;
  open_.erase(it);
  if (open_.empty()) reserved_ = 0.0;
  spent_ += record.cost;
  records_.push_back(std::move(record));
}

void Ledger::release(const Permit& permit) {
  auto it = open_.find(permit.id);
  if (it == open_.end()) throw Error("release: unknown or already closed permit");
  reserved_ -= it->second;
  open_.erase(it);
  if (open_.empty()) reserved_ = 0.0;
}

void Ledger::set_ceiling(double ceiling) {
  ceiling_ = std::clamp(ceiling, 0.0, budget_);
}

double Ledger::spent_in_stage(std::size_t stage_index) const {
  double total = 0.0;
  for (const auto& r : records_) {
    if (r.stage_index == stage_index) total += r.cost;
  }
  return total;
}

BudgetSplit::BudgetSplit(std::vector<double> fractions)
    : fractions_(std::move(fractions)) {
  if (fractions_.empty()) throw InvalidSplit("budget split has no fractions");
  double sum = 0.0;
  for (double f : fractions_) {
    if (!std::isfinite(f) || f < 0.0 || f > 1.0) {
      throw InvalidSplit("budget fraction " + std::to_string(f) +
                         " is outside [0,1]");
    }
    sum += f;
  }
  if (std::abs(sum - 1.0) > kSplitTolerance) {
    throw InvalidSplit("budget fractions sum to " + std::to_string(sum) +
                       ", expected 1");
  }
}

std::vector<double> split_budget(double total, const BudgetSplit& split) {
  if (!(total >= 0.0)) throw InvalidSplit("total budget must be >= 0");
  std::vector<double> out;
  out.reserve(split.size());
  for (double f : split.fractions()) out.push_back(total * f);
  return out;
}

std::vector<std::int64_t> split_budget_tokens(std::int64_t total,
                                              const BudgetSplit& split) {
  if (total < 0) throw InvalidSplit("total budget must be >= 0");
  std::vector<std::int64_t> out;
  out.reserve(split.size());
  std::int64_t assigned = 0;
  const auto& fr = split.fractions();
  for (std::size_t i = 0; i + 1 < fr.size(); ++i) {
    // The epsilon absorbs products like 0.29 * 100 = 28.999999999999996.
    auto part = static_cast<std::int64_t>(
        std::floor(static_cast<double>(total) * fr[i] + 1e-9));
    part = std::min(part, total - assigned);
    out.push_back(part);
    assigned += part;
  }
  out.push_back(total - assigned);
  return out;
}

namespace {

double round_significant(double x, int digits) {
  if (x <= 0.0) return 0.0;
  double magnitude = std::floor(std::log10(x)) - (digits - 1);
  double scale = std::pow(10.0, magnitude);
  return std::round(x / scale) * scale;
}

}  // namespace

std::map<std::string, std::int64_t> tokens_for_budget(
    double money, const std::map<std::string, double>& cost_ratios,
    const std::string& reference, double unit_price, int significant_figures) {
  if (!(money >= 0.0)) throw ConfigError("money budget must be >= 0");
  if (!(unit_price > 0.0)) throw ConfigError("unit price must be positive");
  if (significant_figures < 1) throw ConfigError("significant_figures must be >= 1");
  auto ref = cost_ratios.find(reference);
  if (ref == cost_ratios.end()) {
    throw ConfigError("reference backend " + reference + " has no cost ratio");
  }
  for (const auto& [name, ratio] : cost_ratios) {
    if (!(ratio > 0.0)) throw ConfigError("cost ratio for " + name + " must be positive");
  }
  double ref_tokens =
      round_significant(money / (unit_price * ref->second), significant_figures);
  std::map<std::string, std::int64_t> out;
  for (const auto& [name, ratio] : cost_ratios) {
    out[name] = std::llround(ref_tokens * ref->second / ratio);
  }
  return out;
}

const std::vector<BudgetCategory>& standard_budget_categories() {
  static const std::vector<BudgetCategory> categories = {
      {"B1", 0.57}, {"B2", 0.11}, {"B3", 0.05}};
  return categories;
}

const std::map<std::string, double>& standard_cost_ratios() {
  static const std::map<std::string, double> ratios = {
      {"t5-xl", 1.0}, {"t5-l", 1.0 / 3.0}, {"gpt-3.5", 10.0}};
  return ratios;
}

double standard_cents_per_reference_token() { return 0.57 / 20000.0; }

PricingTable pricing_table_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("pricing table must be a JSON object");
  PricingTable table;
  for (const auto& [name, entry] : doc.items()) {
    if (!entry.is_object()) throw ConfigError("pricing entry " + name + " must be an object");
    Pricing p;
    try {
      p.prompt_cost = entry.value("c_p", 0.0);
      p.output_cost = entry.value("c_o", 0.0);
      p.fixed_cost = entry.value("c_f", 0.0);
      p.unit = entry.value("unit", std::string("token-equivalents"));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("pricing entry " + name + ": " + e.what());
    }
    p.validate();
    table.emplace(name, std::move(p));
  }
  return table;
}

nlohmann::json pricing_table_to_json(const PricingTable& table) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [name, p] : table) {
    doc[name] = {{"c_p", p.prompt_cost},
                 {"c_o", p.output_cost},
                 {"c_f", p.fixed_cost},
                 {"unit", p.unit}};
  }
  return doc;
}

PricingTable load_pricing_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open pricing table " + path.string());
  try {
    return pricing_table_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("pricing table " + path.string() + ": " + e.what());
  }
}

}  // namespace ecorank
