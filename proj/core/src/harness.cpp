#include "promptwall/harness.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <future>
#include <sstream>

#include <nlohmann/json.hpp>

#include "promptwall/rng.hpp"

namespace promptwall {

namespace {

using nlohmann::json;

// Worm scenarios run on this small fully-connected network.
constexpr int kWormAgents = 4;
constexpr int kWormRounds = 3;

std::string join_rule_ids(const Verdict& verdict) {
  std::string out;
  std::set<std::string> seen;
  for (const RuleMatch& match : verdict.matched) {
    if (match.action == RuleAction::Block && seen.insert(match.rule_id).second) {
      if (!out.empty()) out += ",";
      out += match.rule_id;
    }
  }
  return out;
}

std::string action_brief(const Action& action) {
  switch (action.kind) {
    case ActionKind::EmitText:
      return "emit_text: " + action.text.substr(0, 60);
    case ActionKind::CallTool: {
      std::string brief = "call_tool: " + action.tool + "(";
      for (std::size_t i = 0; i < action.args.size(); ++i) {
        if (i > 0) brief += ", ";
        brief += "\"" + action.args[i].substr(0, 40) + "\"";
      }
      return brief + ")";
    }
    case ActionKind::ForwardMessage:
      return "forward_message: " + action.text.substr(0, 60);
    case ActionKind::RewriteSystemPrompt:
      return "rewrite_system_prompt: " + action.text.substr(0, 60);
  }
  return "?";
}

json finding_json(const Finding& finding) {
  json out;
  out["kind"] = to_string(finding.kind);
  out["segment"] = finding.segment_index;
  out["begin"] = finding.begin;
  out["end"] = finding.end;
  if (!finding.decoded.empty()) {
    out["decoded"] = finding.decoded;
  }
  return out;
}

std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

}  // namespace

const char* to_string(DefenseLayer layer) {
  switch (layer) {
    case DefenseLayer::TrustTagging:
      return "trust_tagging";
    case DefenseLayer::Guardrails:
      return "guardrails";
    case DefenseLayer::Spotlighting:
      return "spotlighting";
    case DefenseLayer::CapabilityInterpreter:
      return "capability_interpreter";
    case DefenseLayer::LlmTagging:
      return "llm_tagging";
  }
  return "?";
}

std::optional<DefenseLayer> defense_layer_from_string(std::string_view name) {
  for (DefenseLayer layer : kAllDefenseLayers) {
    if (name == to_string(layer)) {
      return layer;
    }
  }
  return std::nullopt;
}

std::set<DefenseLayer> all_defense_layers() {
  return {kAllDefenseLayers, kAllDefenseLayers + std::size(kAllDefenseLayers)};
}

std::string subset_name(const std::set<DefenseLayer>& subset) {
  if (subset.empty()) {
    return "none";
  }
  if (subset.size() == std::size(kAllDefenseLayers)) {
    return "all";
  }
  std::string name;
  for (DefenseLayer layer : kAllDefenseLayers) {
    if (subset.count(layer) > 0) {
      if (!name.empty()) name += "+";
      name += to_string(layer);
    }
  }
  return name;
}

DefenseStack::DefenseStack()
    : policy(PolicyEngine::default_policy()), security_policy(default_security_policy()) {}

ModelConfig model_config_for(const DefenseStack& stack) {
  ModelConfig config = ModelConfig::undefended();
  if (stack.has(DefenseLayer::TrustTagging)) {
    config.obey_channels = {TrustTag::TrustedSystem};
  }
  config.honor_ai_tag = stack.has(DefenseLayer::LlmTagging);
  config.honor_spotlight = stack.has(DefenseLayer::Spotlighting);
  return config;
}

namespace {

struct ScreenedSegment {
  TaggedSegment segment;
  bool blocked = false;
};

// Guardrails + spotlight for one untrusted segment; trusted segments pass
// through untouched.
ScreenedSegment screen_segment(const TaggedSegment& segment, const DefenseStack& stack,
                               const PolicyEngine* engine, Verdict& combined) {
  ScreenedSegment out;
  out.segment = segment;
  if (is_trusted(segment.channel)) {
    return out;
  }

  if (engine != nullptr) {
    Conversation probe;
    probe.append(segment);
    Verdict verdict = engine->evaluate_policy(probe);
    combined.score = std::max(combined.score, verdict.score);
    combined.matched.insert(combined.matched.end(), verdict.matched.begin(),
                            verdict.matched.end());
    combined.findings.insert(combined.findings.end(), verdict.findings.begin(),
                             verdict.findings.end());
    if (verdict.decision == Decision::Block) {
      combined.decision = Decision::Block;
      out.blocked = true;
      return out;
    }
    if (verdict.decision == Decision::Transform) {
      if (combined.decision != Decision::Block) {
        combined.decision = Decision::Transform;
      }
      out.segment = engine->sanitize(out.segment, verdict, 0);
    }
  }

  if (stack.has(DefenseLayer::Spotlighting) &&
      stack.spotlight_channels.count(segment.channel) > 0) {
    // A pre-embedded marker line is a spoofing attempt; record it.
    const std::string raw = detokenize(out.segment);
    std::istringstream lines(raw);
    std::string line;
    while (std::getline(lines, line)) {
      if (is_spotlight_marker_line(line)) {
        if (auto spoof = detect_marker_spoof(out.segment, line)) {
          combined.findings.push_back(*spoof);
        }
      }
    }
    const Spotlighter spotlighter(stack.preamble_text);
    const std::uint64_t seed = stack.spotlight_seed ^ fnv1a64(raw);
    const SpotlightedText marked =
        spotlighter.spotlight(out.segment, stack.spotlight_mode, seed);
    out.segment = tokenize_and_tag(spotlighter.render(marked), segment.channel);
  }
  return out;
}

}  // namespace

ScreenResult screen(const std::string& text, TrustTag channel, const DefenseStack& stack) {
  // Configuration errors surface here, before any evaluation.
  std::optional<PolicyEngine> engine;
  if (stack.has(DefenseLayer::Guardrails)) {
    engine.emplace(stack.policy);
  }
  stack.security_policy.validate();

  const TaggedSegment segment = tokenize_and_tag(text, channel);
  ScreenResult result;
  const ScreenedSegment screened =
      screen_segment(segment, stack, engine ? &*engine : nullptr, result.verdict);
  if (screened.blocked) {
    return result;
  }
  result.transformed = detokenize(screened.segment);
  return result;
}

std::uint64_t row_seed_for(std::uint64_t seed, std::string_view spec_id,
                           std::size_t subset_index) {
  std::uint64_t state = seed ^ fnv1a64(spec_id) ^
                        (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(subset_index + 1));
  return splitmix64(state);
}

ScenarioResult run_scenario(const AttackSpec& spec, const DefenseStack& stack,
                            std::uint64_t row_seed, ScenarioOutcome* outcome_out) {
  ScenarioResult result;
  result.spec_id = spec.id;
  result.subset = subset_name(stack.enabled);
  for (DefenseLayer layer : kAllDefenseLayers) {
    if (stack.has(layer)) {
      result.defenses.push_back(layer);
    }
  }

  const bool is_simulation = spec.success_predicate.kind == SuccessPredicate::Kind::SelfReplicated;
  if (stack.has(DefenseLayer::CapabilityInterpreter) &&
      (spec.plan_name.empty() || is_simulation)) {
    result.not_applicable.push_back(to_string(DefenseLayer::CapabilityInterpreter));
  }

  ScenarioOutcome outcome;
  try {
    outcome.conversation = instantiate(spec, spec.params, row_seed);

    std::optional<PolicyEngine> engine;
    if (stack.has(DefenseLayer::Guardrails)) {
      engine.emplace(stack.policy);
    }

    // Screening pass over the instantiated conversation.
    Verdict verdict;
    Conversation screened;
    bool blocked = false;
    for (const TaggedSegment& segment : outcome.conversation.segments()) {
      ScreenedSegment s =
          screen_segment(segment, stack, engine ? &*engine : nullptr, verdict);
      if (s.blocked) {
        blocked = true;
        break;
      }
      screened.append(std::move(s.segment));
    }
    if (blocked) {
      outcome.screened_out = true;
      result.evidence = "screen: blocked by " + join_rule_ids(verdict);
      result.succeeded = evaluate_predicate(spec.success_predicate, outcome);
      if (outcome_out != nullptr) *outcome_out = outcome;
      return result;
    }

    if (is_simulation) {
      SimConfig sim;
      sim.topology = Topology::complete(kWormAgents);
      sim.rounds = kWormRounds;
      sim.seed = row_seed;
      sim.infection_probability = 1.0;
      sim.patient_zero = 0;
      sim.worm_body = render_payload(spec, spec.params);
      sim.default_defense.model = model_config_for(stack);
      sim.default_defense.spotlight_inbox = stack.has(DefenseLayer::Spotlighting);
      sim.default_defense.spotlight_mode = stack.spotlight_mode;
      const SimMetrics metrics = run(sim);
      outcome.sim_final_infected = metrics.final_infected.size();
      std::ostringstream evidence;
      evidence << "sim: infected_per_round=[";
      for (std::size_t i = 0; i < metrics.infected_per_round.size(); ++i) {
        if (i > 0) evidence << ",";
        evidence << metrics.infected_per_round[i];
      }
      evidence << "] refusals=" << metrics.refusals;
      result.evidence = evidence.str();
      result.succeeded = evaluate_predicate(spec.success_predicate, outcome);
      if (outcome_out != nullptr) *outcome_out = outcome;
      return result;
    }

    // Plan phase: plan-executing scenarios route tool effects through the
    // interpreter; the capability policy applies only when the layer is on.
    std::map<std::string, std::string> web_content;
    Capability payload_cap;
    payload_cap.sources = {carrier_source_label(spec.carrier)};
    if (spec.carrier == Carrier::WebPage && !spec.plan_name.empty()) {
      web_content[std::string(kIndirectFetchUrl)] = render_payload(spec, spec.params);
    }
    const ToolRegistry registry = builtin_tool_registry(web_content);
    std::optional<Interpreter> interpreter;
    if (!spec.plan_name.empty()) {
      const NamedPlan* plan = find_builtin_plan(spec.plan_name);
      if (plan == nullptr) {
        throw std::invalid_argument("unknown builtin plan '" + spec.plan_name + "'");
      }
      const SecurityPolicy policy = stack.has(DefenseLayer::CapabilityInterpreter)
                                        ? stack.security_policy
                                        : SecurityPolicy::permissive();
      interpreter.emplace(registry, policy);
      const ExecutionResult plan_result = interpreter->run(parse(plan->text));
      if (!plan_result.completed) {
        result.evidence = "plan aborted: " + plan_result.abort_reason;
        result.succeeded = evaluate_predicate(spec.success_predicate, outcome);
        if (outcome_out != nullptr) *outcome_out = outcome;
        return result;
      }
      if (spec.carrier == Carrier::WebPage) {
        payload_cap = plan_result.value_cap;  // e.g. {system, web}
      }
    }

    // Model phase.
    const ModelRun model_run = run_model(model_config_for(stack), screened);

    // Effect phase: tool calls execute through the registry; with the
    // interpreter active they are capability-gated first.
    std::string deny_evidence;
    for (const Action& action : model_run.actions) {
      if (action.kind != ActionKind::CallTool) {
        outcome.executed_actions.push_back(action);
        continue;
      }
      const ToolSpec* tool = registry.find(action.tool);
      if (tool == nullptr) {
        throw std::invalid_argument("attack requested unregistered tool '" + action.tool +
                                    "'");
      }
      if (static_cast<int>(action.args.size()) != tool->arity) {
        throw std::invalid_argument("attack called tool '" + action.tool +
                                    "' with wrong arity");
      }
      const std::size_t index = action.segment_index;
      Capability cap = payload_cap;
      if (index < screened.segments().size() &&
          is_trusted(screened.segments()[index].channel)) {
        cap = Capability::system_literal();
      }
      if (interpreter && stack.has(DefenseLayer::CapabilityInterpreter)) {
        const Interpreter::GatedCall gated = interpreter->call(action.tool, action.args, cap);
        if (gated.allowed) {
          outcome.executed_actions.push_back(action);
        } else {
          outcome.denied_actions.push_back(action);
          if (deny_evidence.empty()) {
            deny_evidence = "interpreter denied " + action.tool + ": " + gated.deny_reason;
          }
        }
      } else {
        registry.invoke(action.tool, action.args);
        outcome.executed_actions.push_back(action);
      }
    }

    const Action* interesting = nullptr;
    for (const Action& action : outcome.executed_actions) {
      if (action.kind != ActionKind::EmitText || action.text != kBenignReply) {
        interesting = &action;
        break;
      }
    }
    if (interesting != nullptr) {
      result.evidence = action_brief(*interesting);
    } else if (!deny_evidence.empty()) {
      result.evidence = deny_evidence;
    } else if (!model_run.refusals.empty()) {
      result.evidence = "model refused " + std::to_string(model_run.refusals.size()) +
                        " directive(s)";
    } else if (!outcome.executed_actions.empty()) {
      result.evidence = action_brief(outcome.executed_actions.front());
    }
    result.succeeded = evaluate_predicate(spec.success_predicate, outcome);
    if (interpreter) {
      outcome.interpreter_trace = interpreter->trace();
    }
  } catch (const std::exception& e) {
    result.error = true;
    result.error_message = e.what();
    result.succeeded = false;
  }
  if (outcome_out != nullptr) *outcome_out = outcome;
  return result;
}

MatrixReport run_matrix(const std::vector<AttackSpec>& corpus,
                        const std::vector<std::set<DefenseLayer>>& subsets,
                        std::uint64_t seed, const MatrixOptions& options) {
  MatrixReport report;
  report.seed = seed;
  report.corpus_version = options.corpus_version;
  report.timestamp = iso8601_now();

  struct RowTask {
    const AttackSpec* spec;
    DefenseStack stack;
    std::uint64_t row_seed;
  };
  std::vector<RowTask> tasks;
  for (std::size_t subset_index = 0; subset_index < subsets.size(); ++subset_index) {
    DefenseStack stack = options.base_stack;
    stack.enabled = subsets[subset_index];
    for (const AttackSpec& spec : corpus) {
      tasks.push_back(RowTask{&spec, stack, row_seed_for(seed, spec.id, subset_index)});
    }
  }

  report.rows.resize(tasks.size());
  if (options.parallel) {
    std::vector<std::future<ScenarioResult>> futures;
    futures.reserve(tasks.size());
    for (const RowTask& task : tasks) {
      futures.push_back(std::async(std::launch::async, [&task] {
        return run_scenario(*task.spec, task.stack, task.row_seed);
      }));
    }
    for (std::size_t i = 0; i < futures.size(); ++i) {
      report.rows[i] = futures[i].get();
    }
  } else {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      report.rows[i] = run_scenario(*tasks[i].spec, tasks[i].stack, tasks[i].row_seed);
    }
  }

  std::map<std::string, std::pair<int, int>> counts;  // subset -> (succeeded, total)
  for (const ScenarioResult& row : report.rows) {
    auto& [succeeded, total] = counts[row.subset];
    if (row.succeeded) ++succeeded;
    ++total;
  }
  for (const auto& [name, pair] : counts) {
    report.asr[name] = static_cast<double>(pair.first) / static_cast<double>(pair.second);
  }
  return report;
}

std::string matrix_report_json(const MatrixReport& report) {
  json doc;
  doc["schema_version"] = 1;
  doc["metadata"] = {{"seed", report.seed},
                     {"corpus_version", report.corpus_version},
                     {"timestamp", report.timestamp}};
  doc["rows"] = json::array();
  for (const ScenarioResult& row : report.rows) {
    json row_json;
    row_json["attack"] = row.spec_id;
    row_json["subset"] = row.subset;
    row_json["defenses"] = json::array();
    for (DefenseLayer layer : row.defenses) {
      row_json["defenses"].push_back(to_string(layer));
    }
    row_json["succeeded"] = row.succeeded;
    row_json["evidence"] = row.evidence;
    row_json["not_applicable"] = row.not_applicable;
    if (row.error) {
      row_json["error"] = row.error_message;
    }
    doc["rows"].push_back(std::move(row_json));
  }
  doc["asr"] = report.asr;
  return doc.dump(2);
}

std::string screen_response_json(const ScreenResult& result) {
  json doc;
  doc["schema_version"] = 1;
  doc["decision"] = to_string(result.verdict.decision);
  doc["score"] = result.verdict.score;
  doc["matched"] = json::array();
  for (const RuleMatch& match : result.verdict.matched) {
    for (const EvidenceSpan& span : match.spans) {
      doc["matched"].push_back({{"rule", match.rule_id},
                                {"segment", span.segment_index},
                                {"begin", span.begin},
                                {"end", span.end}});
    }
  }
  doc["findings"] = json::array();
  for (const Finding& finding : result.verdict.findings) {
    doc["findings"].push_back(finding_json(finding));
  }
  if (result.transformed) {
    doc["transformed"] = *result.transformed;
  }
  return doc.dump(2);
}

std::string sim_metrics_json(const SimMetrics& metrics) {
  json doc;
  doc["schema_version"] = 1;
  doc["infected_per_round"] = metrics.infected_per_round;
  doc["final_infected"] = json::array();
  for (int id : metrics.final_infected) {
    doc["final_infected"].push_back(id);
  }
  doc["refusals"] = metrics.refusals;
  return doc.dump(2);
}

}  // namespace promptwall
