#include "promptwall/mock_model.hpp"

#include <optional>

#include "promptwall/encoding.hpp"
#include "promptwall/spotlight.hpp"

namespace promptwall {

namespace {

constexpr std::size_t kRecognizedRunMinLen = 16;
constexpr int kMaxDecodeDepth = 2;

constexpr std::string_view kIgnorePrefix = "IGNORE PREVIOUS INSTRUCTIONS:";
constexpr std::string_view kExecutePrefix = "EXECUTE_TOOL:";
constexpr std::string_view kReplicatePrefix = "REPLICATE:";
constexpr std::string_view kRewritePrefix = "REWRITE_SYSTEM:";
constexpr std::string_view kEncodeCue = "base64:";

struct Directive {
  enum class Kind { Ignore, ExecuteTool, Replicate, RewriteSystem };
  Kind kind = Kind::Ignore;
  std::string payload;
  std::string tool;
  std::vector<std::string> args;
  std::string line;
};

std::string_view trim_left(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
  return text.substr(i);
}

bool is_ident_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// `name("arg", ...)` with \" \\ \n \t escapes. Malformed calls are treated as
// plain text, never as a directive.
bool parse_tool_call(std::string_view text, std::string& name, std::vector<std::string>& args) {
  text = trim_left(text);
  std::size_t i = 0;
  while (i < text.size() && is_ident_char(text[i])) ++i;
  if (i == 0) return false;
  name = std::string(text.substr(0, i));
  text = trim_left(text.substr(i));
  if (text.empty() || text[0] != '(') return false;
  text = text.substr(1);
  args.clear();
  text = trim_left(text);
  if (!text.empty() && text[0] == ')') {
    return trim_left(text.substr(1)).empty();
  }
  while (true) {
    text = trim_left(text);
    if (text.empty() || text[0] != '"') return false;
    std::string arg;
    std::size_t j = 1;
    bool closed = false;
    while (j < text.size()) {
      const char c = text[j];
      if (c == '\\' && j + 1 < text.size()) {
        const char e = text[j + 1];
        if (e == 'n') arg.push_back('\n');
        else if (e == 't') arg.push_back('\t');
        else arg.push_back(e);
        j += 2;
        continue;
      }
      if (c == '"') {
        closed = true;
        ++j;
        break;
      }
      arg.push_back(c);
      ++j;
    }
    if (!closed) return false;
    args.push_back(std::move(arg));
    text = trim_left(text.substr(j));
    if (!text.empty() && text[0] == ',') {
      text = text.substr(1);
      continue;
    }
    if (!text.empty() && text[0] == ')') {
      return trim_left(text.substr(1)).empty();
    }
    return false;
  }
}

std::optional<Directive> parse_directive(std::string_view line) {
  Directive d;
  d.line = std::string(line);
  if (line.rfind(kIgnorePrefix, 0) == 0) {
    d.kind = Directive::Kind::Ignore;
    d.payload = std::string(trim_left(line.substr(kIgnorePrefix.size())));
    return d;
  }
  if (line.rfind(kExecutePrefix, 0) == 0) {
    if (!parse_tool_call(line.substr(kExecutePrefix.size()), d.tool, d.args)) {
      return std::nullopt;
    }
    d.kind = Directive::Kind::ExecuteTool;
    return d;
  }
  if (line.rfind(kReplicatePrefix, 0) == 0) {
    d.kind = Directive::Kind::Replicate;
    d.payload = std::string(trim_left(line.substr(kReplicatePrefix.size())));
    return d;
  }
  if (line.rfind(kRewritePrefix, 0) == 0) {
    d.kind = Directive::Kind::RewriteSystem;
    d.payload = std::string(trim_left(line.substr(kRewritePrefix.size())));
    return d;
  }
  return std::nullopt;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::string excerpt(std::string_view text) {
  constexpr std::size_t kMax = 80;
  if (text.size() <= kMax) return std::string(text);
  return std::string(text.substr(0, kMax)) + "...";
}

void emit_action(const Directive& d, std::size_t segment_index, ModelRun& out) {
  Action action;
  action.segment_index = segment_index;
  switch (d.kind) {
    case Directive::Kind::Ignore:
      action.kind = ActionKind::EmitText;
      action.text = d.payload;
      break;
    case Directive::Kind::ExecuteTool:
      action.kind = ActionKind::CallTool;
      action.tool = d.tool;
      action.args = d.args;
      break;
    case Directive::Kind::Replicate:
      // The forwarded body is the whole directive line: the worm replicates
      // verbatim.
      action.kind = ActionKind::ForwardMessage;
      action.text = d.line;
      break;
    case Directive::Kind::RewriteSystem:
      action.kind = ActionKind::RewriteSystemPrompt;
      action.text = d.payload;
      break;
  }
  out.actions.push_back(std::move(action));
}

// Directive scan of decoded base64 content. Returns true when any directive
// was executed at this depth or below.
bool process_decoded(std::string_view text, std::size_t segment_index, int depth, ModelRun& out) {
  bool any = false;
  for (std::string_view line : split_lines(text)) {
    if (auto d = parse_directive(line)) {
      emit_action(*d, segment_index, out);
      any = true;
      continue;
    }
    if (depth < kMaxDecodeDepth) {
      for (const Base64Run& run : find_base64_runs(line, kRecognizedRunMinLen)) {
        if (!process_decoded(run.decoded, segment_index, depth + 1, out)) {
          out.actions.push_back(
              Action{ActionKind::EmitText, run.decoded, {}, {}, segment_index});
        }
        any = true;
      }
    }
  }
  return any;
}

}  // namespace

const char* to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::EmitText:
      return "emit_text";
    case ActionKind::CallTool:
      return "call_tool";
    case ActionKind::ForwardMessage:
      return "forward_message";
    case ActionKind::RewriteSystemPrompt:
      return "rewrite_system_prompt";
  }
  return "?";
}

ModelRun run_model(const ModelConfig& config, const Conversation& conversation) {
  ModelRun out;

  std::set<TrustTag> obey = config.obey_channels;
  obey.insert(TrustTag::TrustedSystem);

  const auto& segments = conversation.segments();
  for (std::size_t index = 0; index < segments.size(); ++index) {
    const TaggedSegment& segment = segments[index];
    const std::string text = detokenize(segment);
    const bool obeyed = obey.count(segment.channel) > 0;
    const bool ai_refused =
        config.honor_ai_tag && segment.channel == TrustTag::AIGenerated;
    const bool datamarked =
        config.honor_spotlight && text.find(kDatamarkChar) != std::string::npos;

    bool saw_directive = false;
    bool in_region = false;
    std::string region_marker;

    for (std::string_view line : split_lines(text)) {
      if (config.honor_spotlight && is_spotlight_marker_line(line)) {
        if (!in_region) {
          in_region = true;
          region_marker = std::string(line);
        } else if (line == region_marker) {
          in_region = false;
          region_marker.clear();
        }
        continue;
      }

      std::optional<RefusalReason> refusal;
      if (!obeyed) {
        refusal = RefusalReason::ChannelNotObeyed;
      } else if (ai_refused) {
        refusal = RefusalReason::AiTagged;
      } else if (config.honor_spotlight &&
                 (in_region || datamarked || line.rfind(kEncodeCue, 0) == 0)) {
        refusal = RefusalReason::Spotlighted;
      }

      if (auto d = parse_directive(line)) {
        saw_directive = true;
        if (refusal) {
          out.refusals.push_back(Refusal{*refusal, index, excerpt(line)});
        } else {
          emit_action(*d, index, out);
        }
        continue;
      }

      for (const Base64Run& run : find_base64_runs(line, kRecognizedRunMinLen)) {
        saw_directive = true;
        if (refusal) {
          out.refusals.push_back(
              Refusal{*refusal, index, excerpt(line.substr(run.begin, run.end - run.begin))});
          continue;
        }
        if (!process_decoded(run.decoded, index, 1, out)) {
          out.actions.push_back(Action{ActionKind::EmitText, run.decoded, {}, {}, index});
        }
      }
    }

    if (is_trusted(segment.channel) && !saw_directive) {
      out.actions.push_back(
          Action{ActionKind::EmitText, std::string(kBenignReply), {}, {}, index});
    }
  }
  return out;
}

}  // namespace promptwall
