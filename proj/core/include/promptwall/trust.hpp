#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace promptwall {

// Provenance channels, highest trust first. The declared order is total:
// system > user > external > tool > ai.
enum class TrustTag {
  TrustedSystem = 0,
  UntrustedUser = 1,
  ExternalContent = 2,
  ToolOutput = 3,
  AIGenerated = 4,
};

// Trusted ids live below the split, everything else at or above it, so the
// two namespaces can never collide.
inline constexpr std::uint64_t kUntrustedIdBase = 1ULL << 31;

const char* to_string(TrustTag tag);
std::optional<TrustTag> trust_tag_from_string(std::string_view name);

inline bool is_trusted(TrustTag tag) { return tag == TrustTag::TrustedSystem; }

// Returns the less trusted of the two.
inline TrustTag lower_trust(TrustTag a, TrustTag b) { return a < b ? b : a; }

struct Token {
  std::string text;  // word plus its trailing whitespace, never empty
  TrustTag tag = TrustTag::UntrustedUser;
  std::uint64_t id = 0;
};

struct TaggedSegment {
  std::vector<Token> tokens;
  TrustTag channel = TrustTag::UntrustedUser;

  bool empty() const { return tokens.empty(); }
};

// Append-only conversation history.
class Conversation {
 public:
  Conversation() = default;

  void append(TaggedSegment segment) { segments_.push_back(std::move(segment)); }

  const std::vector<TaggedSegment>& segments() const { return segments_; }
  bool empty() const { return segments_.empty(); }
  std::size_t size() const { return segments_.size(); }

 private:
  std::vector<TaggedSegment> segments_;
};

// Splits text on whitespace boundaries, whitespace kept as token suffixes so
// detokenize is lossless. Ids come from the namespace matching the tag.
TaggedSegment tokenize_and_tag(std::string_view text, TrustTag tag);

std::string detokenize(const TaggedSegment& segment);

// Least-trusted channel present. Throws std::invalid_argument on an empty
// conversation.
TrustTag lowest_tag(const Conversation& conversation);

}  // namespace promptwall
