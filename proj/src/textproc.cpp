#include "ecorank/textproc.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>

namespace ecorank {
namespace {

bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) {
      std::string tok(text.substr(start, i - start));
      std::transform(tok.begin(), tok.end(), tok.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
      });
      tokens.push_back(std::move(tok));
    }
  }
  return tokens;
}

std::int64_t count_tokens(std::string_view text) {
  std::int64_t n = 0;
  bool in_token = false;
  for (char c : text) {
    if (is_space(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++n;
    }
  }
  return n;
}

double token_f1(std::string_view generated, std::string_view reference) {
  auto gen = tokenize(generated);
  auto ref = tokenize(reference);
  if (gen.empty() || ref.empty()) return 0.0;
  std::unordered_map<std::string, int> ref_counts;
  for (const auto& t : ref) ++ref_counts[t];
  std::int64_t overlap = 0;
  for (const auto& t : gen) {
    auto it = ref_counts.find(t);
    if (it != ref_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  double precision = static_cast<double>(overlap) / static_cast<double>(gen.size());
  double recall = static_cast<double>(overlap) / static_cast<double>(ref.size());
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace ecorank
