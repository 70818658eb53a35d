#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "ecorank/cli.hpp"
#include "ecorank/dataio.hpp"
#include "ecorank/errors.hpp"
#include "ecorank/eval.hpp"
#include "ecorank/textproc.hpp"

namespace py = pybind11;
using namespace ecorank;

namespace {

// Tasks cross the boundary as JSONL text; the Python side handles dicts.
std::vector<RankingTask> tasks_of(const std::string& jsonl) {
  std::istringstream in(jsonl);
  return parse_jsonl(in);
}

py::tuple rerank(const std::string& tasks_jsonl, const std::string& config_json,
                 std::uint64_t seed, std::size_t jobs, const std::string& base_dir) {
  RunConfig rc = RunConfig::from_json(nlohmann::json::parse(config_json), base_dir);
  Dataset data;
  data.tasks = tasks_of(tasks_jsonl);
  data.judgments = judgments_from_gold(data.tasks);
  std::vector<QueryOutcome> outcomes;
  {
    py::gil_scoped_release release;
    auto registry = build_registry(rc.backends, data, seed, base_dir);
    outcomes = rerank_all(data.tasks, rc.pipeline, registry, rc.templates, jobs);
  }
  std::vector<RankedList> lists;
  for (const auto& o : outcomes) lists.push_back(o.ranked);
  std::ostringstream run;
  write_run(run, lists);
  return py::make_tuple(run.str(), spend_report(outcomes).dump());
}

std::string synthetic(const std::string& spec_json) {
  auto tasks = generate_synthetic(synthetic_spec_from_json(nlohmann::json::parse(spec_json)));
  std::ostringstream out;
  write_jsonl(out, tasks);
  return out.str();
}

int main_entry(std::vector<std::string> args) {
  args.insert(args.begin(), "ecorank");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Budget-constrained passage re-ranking";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  m.def(
      "call_cost",
      [](std::int64_t prompt, std::int64_t output, double c_p, double c_o, double c_f) {
        Pricing p;
        p.prompt_cost = c_p;
        p.output_cost = c_o;
        p.fixed_cost = c_f;
        return call_cost(prompt, output, p);
      },
      py::arg("prompt_tokens"), py::arg("output_tokens"), py::arg("c_p"), py::arg("c_o"),
      py::arg("c_f") = 0.0);
  m.def("tokens_for_budget", &tokens_for_budget, py::arg("money"), py::arg("cost_ratios"),
        py::arg("reference"), py::arg("unit_price"), py::arg("significant_figures") = 1);
  m.def("count_tokens", [](const std::string& s) { return count_tokens(s); });
  m.def("token_f1", [](const std::string& a, const std::string& b) { return token_f1(a, b); });
  m.def(
      "reciprocal_rank",
      [](const std::vector<std::string>& ranked, const std::set<std::string>& gold) {
        return reciprocal_rank(ranked, gold);
      },
      py::arg("ranked"), py::arg("gold"));
  m.def(
      "recall_at_k",
      [](const std::vector<std::string>& ranked, const std::set<std::string>& gold,
         std::size_t k) { return recall_at_k(ranked, gold, k); },
      py::arg("ranked"), py::arg("gold"), py::arg("k"));
  m.def("rerank_jsonl", &rerank, py::arg("tasks_jsonl"), py::arg("config_json"),
        py::arg("seed") = 0, py::arg("jobs") = 1, py::arg("base_dir") = "");
  m.def("synthetic_jsonl", &synthetic, py::arg("spec_json"));
  m.def("main", &main_entry, py::arg("args"));
}
