#include "promptwall/config.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace promptwall {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& object, std::initializer_list<std::string_view> known,
                         const std::string& where) {
  for (const auto& [key, value] : object.items()) {
    bool ok = false;
    for (std::string_view candidate : known) {
      if (key == candidate) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw PolicyError("unknown key '" + key + "' in " + where);
    }
  }
}

RuleAction action_from_string(const std::string& name, const std::string& where) {
  if (name == "block") return RuleAction::Block;
  if (name == "transform") return RuleAction::Transform;
  if (name == "flag") return RuleAction::Flag;
  throw PolicyError("bad action '" + name + "' in " + where);
}

FindingKind finding_kind_from_string(const std::string& name, const std::string& where) {
  if (name == "override_phrase") return FindingKind::OverridePhrase;
  if (name == "encoded_payload") return FindingKind::EncodedPayload;
  if (name == "marker_spoof") return FindingKind::MarkerSpoof;
  if (name == "sink_phrase") return FindingKind::SinkPhrase;
  throw PolicyError("bad finding kind '" + name + "' in " + where);
}

Policy policy_from_json(const json& section) {
  reject_unknown_keys(section, {"conflict_strategy", "priorities", "scan_encoded", "rules"},
                      "policy");
  Policy policy = PolicyEngine::default_policy();
  if (section.contains("rules")) {
    policy.rules.clear();
    for (const json& rule_json : section.at("rules")) {
      reject_unknown_keys(rule_json,
                          {"id", "kind", "action", "finding", "patterns", "weights",
                           "threshold", "template"},
                          "policy rule");
      Rule rule;
      rule.id = rule_json.at("id").get<std::string>();
      const std::string kind = rule_json.at("kind").get<std::string>();
      if (kind == "pattern") {
        rule.kind = RuleKind::Pattern;
        for (const json& pattern : rule_json.at("patterns")) {
          rule.patterns.push_back(pattern.get<std::string>());
        }
      } else if (kind == "heuristic") {
        rule.kind = RuleKind::HeuristicClassifier;
        if (rule_json.contains("weights")) {
          const json& weights = rule_json.at("weights");
          reject_unknown_keys(weights,
                              {"override_phrases", "role_reassignment", "encoded_run",
                               "imperative_density"},
                              "heuristic weights");
          rule.weights.override_phrases =
              weights.value("override_phrases", rule.weights.override_phrases);
          rule.weights.role_reassignment =
              weights.value("role_reassignment", rule.weights.role_reassignment);
          rule.weights.encoded_run = weights.value("encoded_run", rule.weights.encoded_run);
          rule.weights.imperative_density =
              weights.value("imperative_density", rule.weights.imperative_density);
        }
        rule.threshold = rule_json.value("threshold", 0.5);
      } else if (kind == "model_check") {
        rule.kind = RuleKind::ModelCheck;
        rule.template_text = rule_json.at("template").get<std::string>();
      } else {
        throw PolicyError("bad rule kind '" + kind + "' for rule '" + rule.id + "'");
      }
      rule.action = action_from_string(rule_json.at("action").get<std::string>(),
                                       "rule '" + rule.id + "'");
      if (rule_json.contains("finding")) {
        rule.finding_kind = finding_kind_from_string(
            rule_json.at("finding").get<std::string>(), "rule '" + rule.id + "'");
      }
      policy.rules.push_back(std::move(rule));
    }
  }
  if (section.contains("conflict_strategy")) {
    const std::string strategy = section.at("conflict_strategy").get<std::string>();
    if (strategy == "most_restrictive") {
      policy.conflict_strategy = ConflictStrategy::MostRestrictive;
    } else if (strategy == "first_match") {
      policy.conflict_strategy = ConflictStrategy::FirstMatch;
    } else if (strategy == "priority") {
      policy.conflict_strategy = ConflictStrategy::Priority;
    } else {
      throw PolicyError("bad conflict_strategy '" + strategy + "'");
    }
  }
  if (section.contains("priorities")) {
    for (const auto& [rule_id, value] : section.at("priorities").items()) {
      policy.priorities[rule_id] = value.get<int>();
    }
  }
  if (section.contains("scan_encoded")) {
    const json& scan = section.at("scan_encoded");
    reject_unknown_keys(scan, {"enabled", "min_len", "max_depth", "action"},
                        "policy.scan_encoded");
    policy.scan_encoded.enabled = scan.value("enabled", true);
    policy.scan_encoded.min_len = scan.value("min_len", std::size_t{16});
    policy.scan_encoded.max_depth = scan.value("max_depth", 2);
    if (scan.contains("action")) {
      policy.scan_encoded.action =
          action_from_string(scan.at("action").get<std::string>(), "scan_encoded");
    }
  }
  return policy;
}

SecurityPolicy security_policy_from_json(const json& section) {
  reject_unknown_keys(section, {"default", "forbidden_flows"}, "security_policy");
  SecurityPolicy policy;
  if (section.contains("default")) {
    const std::string name = section.at("default").get<std::string>();
    if (name == "allow") {
      policy.default_decision = PolicyDefault::Allow;
    } else if (name == "deny") {
      policy.default_decision = PolicyDefault::Deny;
    } else {
      throw PolicyError("bad security_policy default '" + name + "'");
    }
  }
  if (section.contains("forbidden_flows")) {
    // Flows with the same sink merge into one rule.
    std::map<std::string, FlowRule> by_sink;
    for (const json& flow : section.at("forbidden_flows")) {
      reject_unknown_keys(flow, {"source", "sink"}, "forbidden_flows entry");
      const std::string source = flow.at("source").get<std::string>();
      const std::string sink = flow.at("sink").get<std::string>();
      FlowRule& rule = by_sink[sink];
      if (auto sink_class = sink_class_from_string(sink)) {
        rule.sink_class = *sink_class;
        rule.tool.reset();
      } else {
        rule.tool = sink;
        rule.sink_class.reset();
      }
      rule.forbidden_sources.insert(source);
    }
    for (auto& [sink, rule] : by_sink) {
      policy.rules.push_back(std::move(rule));
    }
  } else {
    policy = default_security_policy();
    if (section.contains("default")) {
      policy.default_decision = section.at("default").get<std::string>() == "deny"
                                    ? PolicyDefault::Deny
                                    : PolicyDefault::Allow;
    }
  }
  policy.validate();
  return policy;
}

AgentDefense agent_defense_from_json(const json& object, const AgentDefense& base) {
  reject_unknown_keys(
      object,
      {"obey_channels", "honor_ai_tag", "honor_spotlight", "spotlight_inbox", "spotlight_mode"},
      "defense entry");
  AgentDefense defense = base;
  if (object.contains("obey_channels")) {
    defense.model.obey_channels.clear();
    for (const json& name : object.at("obey_channels")) {
      const auto tag = trust_tag_from_string(name.get<std::string>());
      if (!tag) {
        throw PolicyError("bad channel '" + name.get<std::string>() + "' in obey_channels");
      }
      defense.model.obey_channels.insert(*tag);
    }
    defense.model.obey_channels.insert(TrustTag::TrustedSystem);
  }
  defense.model.honor_ai_tag = object.value("honor_ai_tag", defense.model.honor_ai_tag);
  defense.model.honor_spotlight =
      object.value("honor_spotlight", defense.model.honor_spotlight);
  defense.spotlight_inbox = object.value("spotlight_inbox", defense.spotlight_inbox);
  if (object.contains("spotlight_mode")) {
    const auto mode = spotlight_mode_from_string(object.at("spotlight_mode").get<std::string>());
    if (!mode) {
      throw PolicyError("bad spotlight_mode in defense entry");
    }
    defense.spotlight_mode = *mode;
  }
  return defense;
}

SimConfig sim_config_from_json(const json& section) {
  reject_unknown_keys(section,
                      {"topology", "rounds", "seed", "p", "patient_zero", "worm_body",
                       "defenses"},
                      "simulation");
  SimConfig config;
  const json& topology = section.at("topology");
  reject_unknown_keys(topology, {"kind", "n", "edges"}, "simulation.topology");
  const std::string kind = topology.at("kind").get<std::string>();
  if (kind == "ring") {
    config.topology = Topology::ring(topology.at("n").get<int>());
  } else if (kind == "complete") {
    config.topology = Topology::complete(topology.at("n").get<int>());
  } else if (kind == "custom") {
    std::set<int> nodes;
    std::set<std::pair<int, int>> edges;
    for (const json& edge : topology.at("edges")) {
      const int from = edge.at(0).get<int>();
      const int to = edge.at(1).get<int>();
      nodes.insert(from);
      nodes.insert(to);
      edges.insert({from, to});
    }
    if (topology.contains("n")) {
      for (int i = 0; i < topology.at("n").get<int>(); ++i) {
        nodes.insert(i);
      }
    }
    config.topology = Topology::custom(std::move(nodes), std::move(edges));
  } else {
    throw PolicyError("bad topology kind '" + kind + "'");
  }
  config.rounds = section.value("rounds", 0);
  config.seed = section.value("seed", std::uint64_t{0});
  config.infection_probability = section.value("p", 1.0);
  config.patient_zero = section.value("patient_zero", 0);
  if (section.contains("worm_body")) {
    config.worm_body = section.at("worm_body").get<std::string>();
  }
  if (section.contains("defenses")) {
    const json& defenses = section.at("defenses");
    reject_unknown_keys(defenses, {"default", "per_agent"}, "simulation.defenses");
    if (defenses.contains("default")) {
      config.default_defense =
          agent_defense_from_json(defenses.at("default"), AgentDefense{});
    }
    if (defenses.contains("per_agent")) {
      for (const auto& [agent_id, entry] : defenses.at("per_agent").items()) {
        config.per_agent[std::stoi(agent_id)] =
            agent_defense_from_json(entry, config.default_defense);
      }
    }
  }
  config.validate();
  return config;
}

}  // namespace

HarnessConfig load_config_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw PolicyError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown_keys(doc, {"preamble_text", "policy", "security_policy", "spotlight",
                            "simulation"},
                      "config");
  HarnessConfig config;
  if (doc.contains("preamble_text")) {
    config.stack.preamble_text = doc.at("preamble_text").get<std::string>();
  }
  if (doc.contains("policy")) {
    config.stack.policy = policy_from_json(doc.at("policy"));
  }
  if (doc.contains("security_policy")) {
    config.stack.security_policy = security_policy_from_json(doc.at("security_policy"));
  }
  if (doc.contains("spotlight")) {
    const json& spotlight = doc.at("spotlight");
    reject_unknown_keys(spotlight, {"mode", "seed", "apply_to"}, "spotlight");
    if (spotlight.contains("mode")) {
      const auto mode = spotlight_mode_from_string(spotlight.at("mode").get<std::string>());
      if (!mode) {
        throw PolicyError("bad spotlight mode");
      }
      config.stack.spotlight_mode = *mode;
    }
    config.stack.spotlight_seed = spotlight.value("seed", kDefaultSpotlightSeed);
    if (spotlight.contains("apply_to")) {
      config.stack.spotlight_channels.clear();
      for (const json& name : spotlight.at("apply_to")) {
        const auto tag = trust_tag_from_string(name.get<std::string>());
        if (!tag || is_trusted(*tag)) {
          throw PolicyError("bad spotlight.apply_to channel");
        }
        config.stack.spotlight_channels.insert(*tag);
      }
    }
  }
  if (doc.contains("simulation")) {
    config.simulation = sim_config_from_json(doc.at("simulation"));
  }
  // Configuration errors surface at load.
  PolicyEngine validate_engine(config.stack.policy);
  config.stack.security_policy.validate();
  return config;
}

HarnessConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw PolicyError("cannot open config file '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_config_json(buffer.str());
}

SimConfig sim_config_from_json_text(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw PolicyError(std::string("simulation config is not valid JSON: ") + e.what());
  }
  return sim_config_from_json(doc);
}

}  // namespace promptwall
