#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace logitest {

// Lowercases, splits on non-alphanumeric boundaries and camelCase humps,
// and drops tokens shorter than 2 characters. "getPetById" becomes
// ["get", "pet", "by", "id"].
std::vector<std::string> tokenize(std::string_view text);

std::string to_lower(std::string_view text);

// Collapses every run of whitespace to a single space and trims the ends.
std::string collapse_whitespace(std::string_view text);

// FNV-1a 64-bit hash; stable across platforms and builds.
std::uint64_t fnv1a64(std::string_view data);

std::string hex64(std::uint64_t value);

}  // namespace logitest
