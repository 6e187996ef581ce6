#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "promptwall/spotlight.hpp"
#include "promptwall/trust.hpp"

namespace promptwall {

enum class RuleKind { Pattern, HeuristicClassifier, ModelCheck };
enum class RuleAction { Block, Transform, Flag };
enum class ConflictStrategy { MostRestrictive, FirstMatch, Priority };
enum class Decision { Allow, Block, Transform };

const char* to_string(RuleAction action);
const char* to_string(Decision decision);

// Weighted features of the transparent injection heuristic. Feature values
// are in [0,1]; the score is the clamped weighted sum.
struct HeuristicWeights {
  double override_phrases = 0.6;
  double role_reassignment = 0.4;
  double encoded_run = 0.5;
  double imperative_density = 0.2;
};

struct Rule {
  std::string id;
  RuleKind kind = RuleKind::Pattern;
  RuleAction action = RuleAction::Block;
  // Pattern: case-insensitive word-boundary phrases, or regexes via "re:".
  std::vector<std::string> patterns;
  FindingKind finding_kind = FindingKind::OverridePhrase;
  // HeuristicClassifier:
  HeuristicWeights weights;
  double threshold = 0.5;
  // ModelCheck: instruction template with an {input} slot, evaluated by
  // running the undefended scripted model on the rendered text.
  std::string template_text;
};

struct EncodedScanConfig {
  bool enabled = true;
  std::size_t min_len = 16;
  int max_depth = 2;
  RuleAction action = RuleAction::Block;
};

// Rule id reported for encoded-payload findings folded into a verdict.
inline constexpr std::string_view kEncodedScanRuleId = "encoded-payload-scan";

struct Policy {
  std::vector<Rule> rules;
  ConflictStrategy conflict_strategy = ConflictStrategy::MostRestrictive;
  std::map<std::string, int> priorities;  // Priority strategy only
  EncodedScanConfig scan_encoded;
};

struct EvidenceSpan {
  std::size_t segment_index = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct RuleMatch {
  std::string rule_id;
  RuleAction action = RuleAction::Block;
  double severity = 0.0;
  std::vector<EvidenceSpan> spans;
};

struct Verdict {
  Decision decision = Decision::Allow;
  std::vector<RuleMatch> matched;
  double score = 0.0;
  std::vector<Finding> findings;
};

// Configuration problem, raised at load/validation and never at evaluation.
class PolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Heuristic score of a text, exposed so fixtures can freeze severities.
double heuristic_score(const HeuristicWeights& weights, const std::string& text);

class PolicyEngine {
 public:
  explicit PolicyEngine(Policy policy);

  // The shipped rule pack: override-phrase and role-reassignment blocks, a
  // flag-only sink-phrase rule, the weighted heuristic, and a flag-only
  // model-check canary.
  static Policy default_policy();

  const Policy& policy() const { return policy_; }

  // Evidence and severity when the rule fires against the segment.
  std::optional<RuleMatch> evaluate_rule(const Rule& rule, const TaggedSegment& segment,
                                         std::size_t segment_index = 0) const;

  // Maximal base64 runs >= min_len, decoded (recursing to max_depth) and
  // re-screened; findings carry the decoded text.
  std::vector<Finding> scan_encoded(const TaggedSegment& segment, std::size_t min_len,
                                    int max_depth, std::size_t segment_index = 0) const;

  // Every rule against every non-trusted segment, combined per the policy's
  // conflict strategy; score is the maximum severity observed.
  Verdict evaluate_policy(const Conversation& conversation) const;

  // Matched evidence spans replaced by "[REDACTED]" (overlaps merged first);
  // channel unchanged.
  TaggedSegment sanitize(const TaggedSegment& segment, const Verdict& verdict,
                         std::size_t segment_index = 0) const;

 private:
  Policy policy_;
};

}  // namespace promptwall
