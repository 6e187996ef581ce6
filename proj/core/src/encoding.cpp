#include "promptwall/encoding.hpp"

#include <array>
#include <cctype>

#include "promptwall/rng.hpp"

namespace promptwall {

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::array<int, 256> build_decode_table() {
  std::array<int, 256> table{};
  table.fill(-1);
  for (int i = 0; i < 64; ++i) {
    table[static_cast<unsigned char>(kAlphabet[i])] = i;
  }
  return table;
}

const std::array<int, 256> kDecodeTable = build_decode_table();

bool is_base64_char(char c) {
  return kDecodeTable[static_cast<unsigned char>(c)] >= 0 || c == '=';
}

}  // namespace

std::string base64_encode(std::string_view input) {
  std::string out;
  out.reserve((input.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 3 <= input.size()) {
    std::uint32_t n = (static_cast<unsigned char>(input[i]) << 16) |
                      (static_cast<unsigned char>(input[i + 1]) << 8) |
                      static_cast<unsigned char>(input[i + 2]);
    out.push_back(kAlphabet[(n >> 18) & 63]);
    out.push_back(kAlphabet[(n >> 12) & 63]);
    out.push_back(kAlphabet[(n >> 6) & 63]);
    out.push_back(kAlphabet[n & 63]);
    i += 3;
  }
  const std::size_t rest = input.size() - i;
  if (rest == 1) {
    std::uint32_t n = static_cast<unsigned char>(input[i]) << 16;
    out.push_back(kAlphabet[(n >> 18) & 63]);
    out.push_back(kAlphabet[(n >> 12) & 63]);
    out.append("==");
  } else if (rest == 2) {
    std::uint32_t n = (static_cast<unsigned char>(input[i]) << 16) |
                      (static_cast<unsigned char>(input[i + 1]) << 8);
    out.push_back(kAlphabet[(n >> 18) & 63]);
    out.push_back(kAlphabet[(n >> 12) & 63]);
    out.push_back(kAlphabet[(n >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

std::optional<std::string> base64_decode(std::string_view input) {
  if (input.size() % 4 != 0) {
    return std::nullopt;
  }
  if (input.empty()) {
    return std::string();
  }
  std::string out;
  out.reserve(input.size() / 4 * 3);
  int padding = 0;
  for (std::size_t i = 0; i < input.size(); i += 4) {
    std::uint32_t n = 0;
    int chars = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      const char c = input[i + j];
      if (c == '=') {
        // Padding is only legal in the last two positions of the last group.
        if (i + 4 != input.size() || (j == 2 && input[i + 3] != '=') || j < 2) {
          return std::nullopt;
        }
        ++padding;
        n <<= 6;
        continue;
      }
      if (padding > 0) {
        return std::nullopt;
      }
      const int d = kDecodeTable[static_cast<unsigned char>(c)];
      if (d < 0) {
        return std::nullopt;
      }
      n = (n << 6) | static_cast<std::uint32_t>(d);
      ++chars;
    }
    out.push_back(static_cast<char>((n >> 16) & 0xFF));
    if (chars >= 3) {
      out.push_back(static_cast<char>((n >> 8) & 0xFF));
    }
    if (chars == 4) {
      out.push_back(static_cast<char>(n & 0xFF));
    }
  }
  return out;
}

bool looks_like_text(std::string_view bytes, double min_ratio) {
  if (bytes.empty()) {
    return false;
  }
  std::size_t printable = 0;
  for (unsigned char c : bytes) {
    if (std::isprint(c) || c == '\n' || c == '\r' || c == '\t') {
      ++printable;
    }
  }
  return static_cast<double>(printable) >= min_ratio * static_cast<double>(bytes.size());
}

std::vector<Base64Run> find_base64_runs(std::string_view text, std::size_t min_len) {
  std::vector<Base64Run> runs;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_base64_char(text[i])) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < text.size() && is_base64_char(text[end])) {
      ++end;
    }
    const std::string_view run = text.substr(i, end - i);
    if (run.size() >= min_len && run.size() % 4 == 0) {
      if (auto decoded = base64_decode(run); decoded && looks_like_text(*decoded)) {
        runs.push_back(Base64Run{i, end, std::move(*decoded)});
      }
    }
    i = end;
  }
  return runs;
}

std::string hex_nonce128(std::uint64_t seed, int redraw) {
  std::uint64_t state = seed ^ (0xA5A5A5A5A5A5A5A5ULL * static_cast<std::uint64_t>(redraw + 1));
  static const char* kHex = "0123456789abcdef";
  std::string nonce;
  nonce.reserve(32);
  for (int word = 0; word < 2; ++word) {
    std::uint64_t bits = splitmix64(state);
    for (int i = 0; i < 16; ++i) {
      nonce.push_back(kHex[(bits >> (60 - 4 * i)) & 0xF]);
    }
  }
  return nonce;
}

}  // namespace promptwall
