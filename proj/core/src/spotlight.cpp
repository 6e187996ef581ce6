#include "promptwall/spotlight.hpp"

#include <cctype>

#include "promptwall/encoding.hpp"
#include "promptwall/rng.hpp"

namespace promptwall {

namespace {

constexpr int kMaxRedraws = 16;

std::string datamark_body(std::string_view text) {
  std::string body;
  body.reserve(text.size());
  for (char c : text) {
    if (c == ' ') {
      body += kDatamarkChar;
    } else {
      body.push_back(c);
    }
  }
  return body;
}

std::string datamark_invert(std::string_view body) {
  std::string text;
  text.reserve(body.size());
  std::size_t i = 0;
  while (i < body.size()) {
    if (body.substr(i, kDatamarkChar.size()) == kDatamarkChar) {
      text.push_back(' ');
      i += kDatamarkChar.size();
    } else {
      text.push_back(body[i]);
      ++i;
    }
  }
  return text;
}

}  // namespace

const char* to_string(SpotlightMode mode) {
  switch (mode) {
    case SpotlightMode::Delimit:
      return "delimit";
    case SpotlightMode::Datamark:
      return "datamark";
    case SpotlightMode::Encode:
      return "encode";
  }
  return "?";
}

std::optional<SpotlightMode> spotlight_mode_from_string(std::string_view name) {
  if (name == "delimit") return SpotlightMode::Delimit;
  if (name == "datamark") return SpotlightMode::Datamark;
  if (name == "encode") return SpotlightMode::Encode;
  return std::nullopt;
}

const char* to_string(FindingKind kind) {
  switch (kind) {
    case FindingKind::OverridePhrase:
      return "override_phrase";
    case FindingKind::EncodedPayload:
      return "encoded_payload";
    case FindingKind::MarkerSpoof:
      return "marker_spoof";
    case FindingKind::SinkPhrase:
      return "sink_phrase";
  }
  return "?";
}

SpotlightedText Spotlighter::spotlight(const TaggedSegment& segment, SpotlightMode mode,
                                       std::uint64_t rng_seed) const {
  if (is_trusted(segment.channel)) {
    throw SpotlightError(SpotlightError::Kind::TrustedInput,
                         "spotlight: refusing to mark trusted-system text as data");
  }
  const std::string text = detokenize(segment);

  SpotlightedText out;
  out.mode = mode;
  out.preamble = preamble_;

  switch (mode) {
    case SpotlightMode::Delimit: {
      // An attacker guessing one marker must not deny service: re-draw.
      for (int redraw = 0; redraw <= kMaxRedraws; ++redraw) {
        std::string marker = hex_nonce128(rng_seed, redraw);
        if (text.find(marker) == std::string::npos &&
            preamble_.find(marker) == std::string::npos) {
          out.marker = std::move(marker);
          out.body = text;
          return out;
        }
      }
      throw SpotlightError(SpotlightError::Kind::AdversarialInput,
                           "spotlight: marker re-draw exhausted (16 collisions)");
    }
    case SpotlightMode::Datamark: {
      if (text.find(kDatamarkChar) != std::string::npos) {
        throw SpotlightError(SpotlightError::Kind::AdversarialInput,
                             "spotlight: input already contains the datamark character");
      }
      out.marker = std::string(kDatamarkChar);
      out.body = datamark_body(text);
      return out;
    }
    case SpotlightMode::Encode: {
      out.body = base64_encode(text);
      return out;
    }
  }
  throw SpotlightError(SpotlightError::Kind::Integrity, "spotlight: unknown mode");
}

std::string Spotlighter::render(const SpotlightedText& text) const {
  switch (text.mode) {
    case SpotlightMode::Delimit:
      return text.preamble + "\n" + text.marker + "\n" + text.body + "\n" + text.marker;
    case SpotlightMode::Datamark:
      return text.preamble + "\n" + text.body;
    case SpotlightMode::Encode:
      return text.preamble + "\nbase64:" + text.body;
  }
  return text.body;
}

SpotlightedText Spotlighter::parse_rendered(std::string_view rendered) const {
  const std::string text(rendered);
  const std::size_t preamble_end = text.find('\n');
  if (preamble_end == std::string::npos) {
    throw SpotlightError(SpotlightError::Kind::Integrity,
                         "parse_rendered: missing preamble line");
  }
  SpotlightedText out;
  out.preamble = text.substr(0, preamble_end);
  const std::string rest = text.substr(preamble_end + 1);

  if (rest.rfind("base64:", 0) == 0) {
    out.mode = SpotlightMode::Encode;
    out.body = rest.substr(7);
    return out;
  }
  const std::size_t marker_end = rest.find('\n');
  if (marker_end != std::string::npos &&
      is_spotlight_marker_line(std::string_view(rest).substr(0, marker_end))) {
    out.mode = SpotlightMode::Delimit;
    out.marker = rest.substr(0, marker_end);
    const std::string body = rest.substr(marker_end + 1);
    const std::string closing = "\n" + out.marker;
    if (body.size() < closing.size() ||
        body.compare(body.size() - closing.size(), closing.size(), closing) != 0) {
      throw SpotlightError(SpotlightError::Kind::Integrity,
                           "parse_rendered: missing closing marker");
    }
    out.body = body.substr(0, body.size() - closing.size());
    if (out.body.find(out.marker) != std::string::npos) {
      throw SpotlightError(SpotlightError::Kind::Integrity,
                           "parse_rendered: marker occurs inside the body");
    }
    return out;
  }
  if (rest.find(std::string(kDatamarkChar)) != std::string::npos) {
    out.mode = SpotlightMode::Datamark;
    out.marker = std::string(kDatamarkChar);
    out.body = rest;
    return out;
  }
  throw SpotlightError(SpotlightError::Kind::Integrity,
                       "parse_rendered: no recognizable spotlight structure");
}

std::string unspotlight(const SpotlightedText& text) {
  switch (text.mode) {
    case SpotlightMode::Delimit:
      if (!is_spotlight_marker_line(text.marker)) {
        throw SpotlightError(SpotlightError::Kind::Integrity,
                             "unspotlight: malformed delimit marker");
      }
      if (text.body.find(text.marker) != std::string::npos) {
        throw SpotlightError(SpotlightError::Kind::Integrity,
                             "unspotlight: marker occurs inside the body");
      }
      return text.body;
    case SpotlightMode::Datamark:
      if (text.body.find(' ') != std::string::npos) {
        throw SpotlightError(SpotlightError::Kind::Integrity,
                             "unspotlight: datamark body has residual spaces");
      }
      return datamark_invert(text.body);
    case SpotlightMode::Encode: {
      auto decoded = base64_decode(text.body);
      if (!decoded) {
        throw SpotlightError(SpotlightError::Kind::Integrity,
                             "unspotlight: body is not valid base64");
      }
      return *decoded;
    }
  }
  throw SpotlightError(SpotlightError::Kind::Integrity, "unspotlight: unknown mode");
}

bool is_spotlight_marker_line(std::string_view line) {
  if (line.size() != 32) return false;
  for (char c : line) {
    const bool hex = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
    if (!hex) return false;
  }
  return true;
}

std::optional<Finding> detect_marker_spoof(const TaggedSegment& segment,
                                           std::string_view marker) {
  if (marker.empty()) {
    return std::nullopt;
  }
  const std::string text = detokenize(segment);
  const std::size_t pos = text.find(marker);
  if (pos == std::string::npos) {
    return std::nullopt;
  }
  Finding finding;
  finding.kind = FindingKind::MarkerSpoof;
  finding.begin = pos;
  finding.end = pos + marker.size();
  return finding;
}

}  // namespace promptwall
