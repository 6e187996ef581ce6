#pragma once

// Deterministic random plan / policy / registry generator for the capability
// fuzz suites. mt19937_64 raw outputs only, so sequences are identical on
// every platform.

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "promptwall/plan.hpp"

namespace planfuzz {

struct Generated {
  std::string plan_text;
  promptwall::SecurityPolicy policy;
};

inline const std::vector<promptwall::ToolSpec>& fuzz_tool_specs() {
  using promptwall::SinkClass;
  using promptwall::ToolSpec;
  static const std::vector<ToolSpec> kSpecs = {
      {"t_fetch", 1, SinkClass::Pure, "web"},
      {"t_read", 1, SinkClass::Pure, "document"},
      {"t_join", 2, SinkClass::Pure, "tool:t_join"},
      {"t_note", 1, SinkClass::StateChanging, "tool:t_note"},
      {"t_wire", 2, SinkClass::StateChanging, "tool:t_wire"},
      {"t_mail", 2, SinkClass::Exfiltration, "tool:t_mail"},
      {"t_drop", 1, SinkClass::Exfiltration, "tool:t_drop"},
  };
  return kSpecs;
}

inline promptwall::ToolRegistry fuzz_registry() {
  promptwall::ToolRegistry registry;
  for (const promptwall::ToolSpec& spec : fuzz_tool_specs()) {
    registry.add(spec, [](const std::vector<std::string>& args) {
      std::string out = "out";
      for (const std::string& arg : args) {
        out += ":" + arg.substr(0, 8);
      }
      return out;
    });
  }
  return registry;
}

inline std::uint64_t pick(std::mt19937_64& rng, std::uint64_t bound) {
  return rng() % bound;  // bias is irrelevant here
}

inline Generated generate(std::mt19937_64& rng) {
  using namespace promptwall;
  const auto& specs = fuzz_tool_specs();

  Generated out;
  std::vector<std::string> vars;
  const int statements = 1 + static_cast<int>(pick(rng, 6));
  for (int i = 0; i < statements; ++i) {
    const ToolSpec& spec = specs[pick(rng, specs.size())];
    std::string expr = spec.name + "(";
    for (int arg = 0; arg < spec.arity; ++arg) {
      if (arg > 0) expr += ", ";
      if (!vars.empty() && pick(rng, 2) == 0) {
        expr += vars[pick(rng, vars.size())];
      } else {
        expr += "\"lit" + std::to_string(pick(rng, 100)) + "\"";
      }
    }
    expr += ")";
    const std::string name = "v" + std::to_string(i);
    out.plan_text += name + " = " + expr + "\n";
    vars.push_back(name);
  }
  out.plan_text += "return " + vars.back() + "\n";

  // Random forbid rules over sink classes and tool names.
  const std::vector<std::string> sources = {"system",      "user",        "web",
                                            "document",    "tool:t_join", "tool:t_fetch"};
  const int rule_count = static_cast<int>(pick(rng, 3));
  std::set<std::string> used_tools;
  std::set<SinkClass> used_classes;
  for (int i = 0; i < rule_count; ++i) {
    FlowRule rule;
    if (pick(rng, 2) == 0) {
      const SinkClass sink = static_cast<SinkClass>(pick(rng, 3));
      if (!used_classes.insert(sink).second) continue;
      rule.sink_class = sink;
    } else {
      const std::string tool = specs[pick(rng, specs.size())].name;
      if (!used_tools.insert(tool).second) continue;
      rule.tool = tool;
    }
    const int source_count = 1 + static_cast<int>(pick(rng, 2));
    for (int s = 0; s < source_count; ++s) {
      rule.forbidden_sources.insert(sources[pick(rng, sources.size())]);
    }
    out.policy.rules.push_back(std::move(rule));
  }
  out.policy.default_decision = pick(rng, 8) == 0 ? PolicyDefault::Deny : PolicyDefault::Allow;
  return out;
}

}  // namespace planfuzz
