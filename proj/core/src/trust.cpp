#include "promptwall/trust.hpp"

#include <cctype>

namespace promptwall {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

const char* to_string(TrustTag tag) {
  switch (tag) {
    case TrustTag::TrustedSystem:
      return "system";
    case TrustTag::UntrustedUser:
      return "user";
    case TrustTag::ExternalContent:
      return "external";
    case TrustTag::ToolOutput:
      return "tool";
    case TrustTag::AIGenerated:
      return "ai";
  }
  return "?";
}

std::optional<TrustTag> trust_tag_from_string(std::string_view name) {
  if (name == "system") return TrustTag::TrustedSystem;
  if (name == "user") return TrustTag::UntrustedUser;
  if (name == "external") return TrustTag::ExternalContent;
  if (name == "tool") return TrustTag::ToolOutput;
  if (name == "ai") return TrustTag::AIGenerated;
  return std::nullopt;
}

TaggedSegment tokenize_and_tag(std::string_view text, TrustTag tag) {
  TaggedSegment segment;
  segment.channel = tag;
  const std::uint64_t base = is_trusted(tag) ? 0 : kUntrustedIdBase;

  std::size_t i = 0;
  // A leading whitespace run has no word to attach to and becomes its own token.
  if (i < text.size() && is_space(text[i])) {
    std::size_t end = i;
    while (end < text.size() && is_space(text[end])) ++end;
    segment.tokens.push_back(Token{std::string(text.substr(i, end - i)), tag, base});
    i = end;
  }
  while (i < text.size()) {
    std::size_t end = i;
    while (end < text.size() && !is_space(text[end])) ++end;
    while (end < text.size() && is_space(text[end])) ++end;
    segment.tokens.push_back(
        Token{std::string(text.substr(i, end - i)), tag, base + segment.tokens.size()});
    i = end;
  }
  return segment;
}

std::string detokenize(const TaggedSegment& segment) {
  std::string text;
  for (const Token& token : segment.tokens) {
    text += token.text;
  }
  return text;
}

TrustTag lowest_tag(const Conversation& conversation) {
  if (conversation.empty()) {
    throw std::invalid_argument("lowest_tag: conversation has no segments");
  }
  TrustTag lowest = TrustTag::TrustedSystem;
  for (const TaggedSegment& segment : conversation.segments()) {
    lowest = lower_trust(lowest, segment.channel);
  }
  return lowest;
}

}  // namespace promptwall
