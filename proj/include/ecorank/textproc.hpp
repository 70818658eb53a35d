#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ecorank {

/// Lowercased, whitespace-delimited tokens; never contains empty strings.
std::vector<std::string> tokenize(std::string_view text);

/// Number of tokens `tokenize` would produce. This is the length function
/// used for all cost accounting.
std::int64_t count_tokens(std::string_view text);

/// Token-level F1 with clipped multiset overlap. 0 when either side is empty.
double token_f1(std::string_view generated, std::string_view reference);

}  // namespace ecorank
