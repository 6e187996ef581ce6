#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace promptwall {

std::string base64_encode(std::string_view input);

// Strict decode: alphabet + correct '=' padding only.
std::optional<std::string> base64_decode(std::string_view input);

// True when at least `min_ratio` of the bytes are printable ASCII or
// ordinary whitespace. Empty input is not plausible text.
bool looks_like_text(std::string_view bytes, double min_ratio = 0.9);

struct Base64Run {
  std::size_t begin = 0;  // offsets into the scanned text
  std::size_t end = 0;
  std::string decoded;
};

// Maximal base64-alphabet runs of length >= min_len (and a multiple of 4)
// that strictly decode to plausible text. This is the shared definition of a
// "recognized" encoded payload for the rule engine and the scripted model.
std::vector<Base64Run> find_base64_runs(std::string_view text, std::size_t min_len);

}  // namespace promptwall
