#include <doctest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "ecorank/budget.hpp"
#include "ecorank/errors.hpp"

using namespace ecorank;

TEST_CASE("call_cost examples") {
  CHECK(call_cost(10, 1, {1, 1, 0}) == 11);
  CHECK(call_cost(0, 0, {5, 7, 3}) == 3);
  CHECK(call_cost(100, 5, {0.5, 1.5, 0}) == 57.5);
}

TEST_CASE("pricing validation") {
  CHECK_THROWS_AS((Pricing{-1, 0, 0}.validate()), ConfigError);
  CHECK_THROWS_AS((Pricing{0, 0, std::nan("")}.validate()), ConfigError);
  CHECK_NOTHROW((Pricing{0, 0, 0}.validate()));
  CHECK(Pricing{1, 2, 3}.reference_call_cost() == 6);
}

TEST_CASE("split_budget examples") {
  CHECK(split_budget(4000, BudgetSplit({0.5, 0.5})) == std::vector<double>{2000, 2000});
  CHECK(split_budget_tokens(1001, BudgetSplit({0.5, 0.5})) == std::vector<std::int64_t>{500, 501});
  CHECK(split_budget_tokens(2000, BudgetSplit({0.2, 0.8})) == std::vector<std::int64_t>{400, 1600});
  auto parts = split_budget(2000, BudgetSplit({0.2, 0.8}));
  CHECK(parts[0] == doctest::Approx(400));
  CHECK(parts[0] + parts[1] == doctest::Approx(2000).epsilon(1e-12));
}

TEST_CASE("BudgetSplit rejects invalid fractions") {
  CHECK_THROWS_AS(BudgetSplit({0.5, 0.6}), InvalidSplit);
  CHECK_THROWS_AS(BudgetSplit({1.2, -0.2}), InvalidSplit);
  CHECK_THROWS_AS(BudgetSplit({}), InvalidSplit);
  CHECK_NOTHROW(BudgetSplit({0.1, 0.2, 0.7}));
  CHECK_NOTHROW(BudgetSplit({1.0, 0.0}));
}

TEST_CASE("integral split conserves the total") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    double a = std::uniform_real_distribution<double>(0, 1)(rng);
    double b = std::uniform_real_distribution<double>(0, 1 - a)(rng);
    std::int64_t total = rng() % 100000;
    auto parts = split_budget_tokens(total, BudgetSplit({a, b, 1 - a - b}));
    CHECK(parts[0] + parts[1] + parts[2] == total);
    for (auto p : parts) CHECK(p >= 0);
  }
}

TEST_CASE("try_charge examples") {
  Ledger l(10);
  CHECK(l.try_charge(10).has_value());
  Ledger m(10);
  auto p = m.try_charge(5);
  m.settle(*p, {4, 1, 5, "x", 0});
  CHECK_FALSE(m.try_charge(6).has_value());
  CHECK(m.spent() == 5);
  CHECK(m.reserved() == 0);
  Ledger z(0);
  CHECK(z.try_charge(0).has_value());
  CHECK_FALSE(z.try_charge(0.001).has_value());
}

TEST_CASE("ledger settles actual usage and releases reservations") {
  Ledger l(100);
  auto p = l.try_charge(30);
  CHECK(l.remaining() == 70);
  l.settle(*p, {10, 1, 11, "b", 1});
  CHECK(l.spent() == 11);
  CHECK(l.remaining() == 89);
  CHECK(l.spent_in_stage(1) == 11);
  CHECK(l.spent_in_stage(0) == 0);
  auto q = l.try_charge(20);
  l.release(*q);
  CHECK(l.reserved() == 0);
  CHECK(l.records().size() == 1);
  CHECK_FALSE(l.overrun());
}

TEST_CASE("ledger ceilings hold back budget for later stages") {
  Ledger l(100);
  l.set_ceiling(40);
  CHECK_FALSE(l.try_charge(41).has_value());
  auto p = l.try_charge(30);
  l.settle(*p, {0, 0, 30, "b", 0});
  l.set_ceiling(100);
  CHECK(l.remaining() == 70);
  l.set_ceiling(500);
  CHECK(l.ceiling() == 100);
}

TEST_CASE("permits granted are monotone in budget") {
  auto granted = [](double budget) {
    Ledger l(budget);
    int n = 0;
    while (auto p = l.try_charge(1.0)) {
      l.settle(*p, {1, 0, 1.0, "u", 0});
      ++n;
    }
    return n;
  };
  int prev = 0;
  for (double b = 0; b <= 40; b += 0.5) {
    int n = granted(b);
    CHECK(n >= prev);
    CHECK(n == static_cast<int>(b));
    prev = n;
  }
}

TEST_CASE("budget category token counts") {
  const auto& ratios = standard_cost_ratios();
  const double unit = standard_cents_per_reference_token();
  std::map<std::string, std::map<std::string, std::int64_t>> expected = {
      {"B1", {{"t5-xl", 20000}, {"t5-l", 60000}, {"gpt-3.5", 2000}}},
      {"B2", {{"t5-xl", 4000}, {"t5-l", 12000}, {"gpt-3.5", 400}}},
      {"B3", {{"t5-xl", 2000}, {"t5-l", 6000}, {"gpt-3.5", 200}}}};
  for (const auto& cat : standard_budget_categories()) {
    CHECK(tokens_for_budget(cat.cents, ratios, "t5-xl", unit) == expected.at(cat.name));
  }
  // Inverse scaling: three times cheaper, three times the tokens.
  auto t = tokens_for_budget(0.57, {{"a", 1.0}, {"b", 1.0 / 3}}, "a", 0.57 / 20000);
  CHECK(t.at("b") == 3 * t.at("a"));
}

TEST_CASE("pricing table JSON round trip") {
  auto doc = nlohmann::json::parse(R"({"exp": {"c_p": 1, "c_o": 2, "c_f": 0.5, "unit": "cents"},
                                       "cheap": {"c_p": 0.25, "c_o": 0.25}})");
  auto table = pricing_table_from_json(doc);
  CHECK(table.at("exp").output_cost == 2);
  CHECK(table.at("exp").unit == "cents");
  CHECK(table.at("cheap").fixed_cost == 0);
  CHECK(pricing_table_from_json(pricing_table_to_json(table)) == table);
  CHECK_THROWS_AS(pricing_table_from_json(nlohmann::json::parse(R"({"x": {"c_p": -1}})")),
                  ConfigError);
}
