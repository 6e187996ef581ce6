#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace promptwall {

enum class SinkClass { Pure, StateChanging, Exfiltration };

const char* to_string(SinkClass sink);
std::optional<SinkClass> sink_class_from_string(std::string_view name);

struct ToolSpec {
  std::string name;
  int arity = 0;
  SinkClass sink_class = SinkClass::Pure;
  std::string output_source_label;  // e.g. "web" or "tool:<name>"
};

using ToolImpl = std::function<std::string(const std::vector<std::string>&)>;

class ToolRegistry {
 public:
  void add(ToolSpec spec, ToolImpl impl);
  const ToolSpec* find(const std::string& name) const;
  std::string invoke(const std::string& name, const std::vector<std::string>& args) const;
  std::vector<std::string> names() const;

 private:
  struct Entry {
    ToolSpec spec;
    ToolImpl impl;
  };
  std::map<std::string, Entry> tools_;
};

// Value readers: public, or restricted to a named set of sinks.
struct Readers {
  bool is_public = true;
  std::set<std::string> sinks;
};

// Provenance metadata attached to every runtime value.
struct Capability {
  std::set<std::string> sources;  // {system, user, web, document, tool:<name>}
  Readers readers;

  static Capability system_literal() { return Capability{{"system"}, Readers{}}; }
};

std::string to_string(const Capability& capability);

// Plan grammar: one statement per line, `#` comments, no branches or loops.
//   stmt := IDENT '=' expr | 'return' expr
//   expr := STRING | IDENT | IDENT '(' [expr {',' expr}] ')'
struct Expr {
  enum class Kind { Literal, Var, Call };
  Kind kind = Kind::Literal;
  std::string text;  // literal value or identifier
  std::vector<Expr> args;
  int line = 0;
  int column = 0;
};

struct Statement {
  enum class Kind { Assign, Return };
  Kind kind = Kind::Assign;
  std::string name;  // assignment target
  Expr expr;
  int line = 0;
};

struct PlanAst {
  std::vector<Statement> statements;
};

class PlanError : public std::runtime_error {
 public:
  PlanError(const std::string& message, int line, int column = 0)
      : std::runtime_error(message + " (line " + std::to_string(line) +
                           (column > 0 ? ", column " + std::to_string(column) : "") + ")"),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

PlanAst parse(std::string_view plan_text);

// Use-before-assign, unknown tools, and arity mismatches. Reported here, not
// at parse.
void analyze(const PlanAst& ast, const ToolRegistry& registry);

struct CallCaps {
  std::string tool;
  std::vector<Capability> arg_caps;
  Capability output_cap;
  int line = 0;
};

struct DataflowGraph {
  std::map<std::string, Capability> vars;
  std::vector<CallCaps> calls;  // evaluation order
  std::optional<Capability> result;
};

// Capability propagation without side effects: literals get {system}, a
// call's output is the union of its argument sources plus the tool's label.
DataflowGraph propagate(const PlanAst& ast, const ToolRegistry& registry);

struct FlowRule {
  std::optional<SinkClass> sink_class;  // exactly one of sink_class / tool is set
  std::optional<std::string> tool;
  std::set<std::string> forbidden_sources;
  std::optional<std::set<std::string>> required_readers;
};

enum class PolicyDefault { Allow, Deny };

struct SecurityPolicy {
  std::vector<FlowRule> rules;
  PolicyDefault default_decision = PolicyDefault::Allow;

  static SecurityPolicy permissive() { return SecurityPolicy{}; }

  // Throws PlanError on duplicate (tool, sink_class) keys.
  void validate() const;
};

struct EnforcementDecision {
  bool allow = true;
  std::string reason;
};

// Deny when any matching rule sees an argument with a forbidden source or
// readers that do not cover the sink; deny overrides, the default applies
// when no rule matches.
EnforcementDecision enforce(const SecurityPolicy& policy, const ToolSpec& tool,
                            const std::vector<Capability>& arg_caps);

struct TraceEvent {
  std::string tool;
  std::vector<Capability> arg_caps;
  bool allowed = false;
  std::string deny_reason;
  std::optional<Capability> output_cap;  // set on successful invocation
  bool error = false;
  std::string error_message;
};

struct ExecutionTrace {
  std::vector<TraceEvent> events;
};

struct ExecutionResult {
  bool completed = false;  // ran to completion (or an explicit return)
  std::string value;
  Capability value_cap;
  ExecutionTrace trace;
  std::string abort_reason;  // set when !completed
};

// One interpreter executes one plan; registries and policies are immutable.
class Interpreter {
 public:
  Interpreter(const ToolRegistry& registry, SecurityPolicy policy);

  ExecutionResult run(const PlanAst& ast);

  struct GatedCall {
    bool allowed = false;
    std::string deny_reason;
    std::string output;
  };

  // A single call initiated outside any plan (e.g. requested by a model),
  // gated by the same policy and recorded in the same trace. Throws
  // PlanError for unknown tools or arity mismatches.
  GatedCall call(const std::string& tool, const std::vector<std::string>& args,
                 const Capability& arg_cap);

  const ExecutionTrace& trace() const { return trace_; }

 private:
  const ToolRegistry& registry_;
  SecurityPolicy policy_;
  ExecutionTrace trace_;
};

// parse + analyze + run in one step.
ExecutionResult execute(const PlanAst& ast, const ToolRegistry& registry,
                        const SecurityPolicy& policy);

}  // namespace promptwall
