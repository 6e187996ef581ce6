#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "promptwall/trust.hpp"

namespace promptwall {

enum class SpotlightMode { Delimit, Datamark, Encode };

const char* to_string(SpotlightMode mode);
std::optional<SpotlightMode> spotlight_mode_from_string(std::string_view name);

// Datamark substitution character, U+02C6 MODIFIER LETTER CIRCUMFLEX.
inline constexpr std::string_view kDatamarkChar = "\xCB\x86";

// Finding kinds shared with the guardrail engine.
enum class FindingKind { OverridePhrase, EncodedPayload, MarkerSpoof, SinkPhrase };

const char* to_string(FindingKind kind);

struct Finding {
  FindingKind kind = FindingKind::OverridePhrase;
  std::size_t segment_index = 0;
  std::size_t begin = 0;  // character range in the segment's text
  std::size_t end = 0;
  std::string decoded;  // non-empty for EncodedPayload
};

struct SpotlightedText {
  SpotlightMode mode = SpotlightMode::Delimit;
  std::string marker;    // 32-hex nonce (Delimit), the mark char (Datamark), empty (Encode)
  std::string body;      // Delimit: raw text; Datamark: marked text; Encode: base64
  std::string preamble;
};

class SpotlightError : public std::runtime_error {
 public:
  enum class Kind { TrustedInput, AdversarialInput, Integrity };

  SpotlightError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class Spotlighter {
 public:
  explicit Spotlighter(std::string preamble_text) : preamble_(std::move(preamble_text)) {}

  // Marks a non-trusted segment as data. Delimit draws a fresh 128-bit hex
  // marker from the seed, re-drawing (up to 16 times) while the marker occurs
  // in the text. Trusted input is a misuse error; re-draw exhaustion and
  // datamark-char collisions are adversarial-input errors.
  SpotlightedText spotlight(const TaggedSegment& segment, SpotlightMode mode,
                            std::uint64_t rng_seed) const;

  // Full model-facing string: preamble plus the mode-specific structure.
  std::string render(const SpotlightedText& text) const;

  // Inverse of render: integrity error on malformed structure.
  SpotlightedText parse_rendered(std::string_view rendered) const;

  const std::string& preamble() const { return preamble_; }

 private:
  std::string preamble_;
};

// Exact inverse of spotlight for the same mode. Integrity error on a
// malformed body (bad base64, residual spaces, bad marker).
std::string unspotlight(const SpotlightedText& text);

// MarkerSpoof finding when the untrusted text contains the active marker.
std::optional<Finding> detect_marker_spoof(const TaggedSegment& segment,
                                           std::string_view marker);

// True for a line that is exactly a 32-hex delimit nonce.
bool is_spotlight_marker_line(std::string_view line);

}  // namespace promptwall
