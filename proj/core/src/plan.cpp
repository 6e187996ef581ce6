#include "promptwall/plan.hpp"

#include <algorithm>
#include <sstream>

namespace promptwall {

namespace {

bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

struct Token {
  enum class Kind { Ident, String, LParen, RParen, Comma, Equals, End };
  Kind kind = Kind::End;
  std::string text;
  int column = 0;
};

class LineLexer {
 public:
  LineLexer(std::string_view line, int line_no) : line_(line), line_no_(line_no) {}

  Token next() {
    skip_space();
    if (pos_ >= line_.size() || line_[pos_] == '#') {
      return Token{Token::Kind::End, "", column()};
    }
    const char c = line_[pos_];
    const int col = column();
    if (c == '(') {
      ++pos_;
      return Token{Token::Kind::LParen, "(", col};
    }
    if (c == ')') {
      ++pos_;
      return Token{Token::Kind::RParen, ")", col};
    }
    if (c == ',') {
      ++pos_;
      return Token{Token::Kind::Comma, ",", col};
    }
    if (c == '=') {
      ++pos_;
      return Token{Token::Kind::Equals, "=", col};
    }
    if (c == '"') {
      return lex_string(col);
    }
    if (is_ident_start(c)) {
      std::size_t end = pos_;
      while (end < line_.size() && is_ident_char(line_[end])) ++end;
      Token token{Token::Kind::Ident, std::string(line_.substr(pos_, end - pos_)), col};
      pos_ = end;
      return token;
    }
    throw PlanError(std::string("unexpected character '") + c + "'", line_no_, col);
  }

 private:
  void skip_space() {
    while (pos_ < line_.size() && (line_[pos_] == ' ' || line_[pos_] == '\t')) ++pos_;
  }

  int column() const { return static_cast<int>(pos_) + 1; }

  Token lex_string(int col) {
    std::string value;
    ++pos_;  // opening quote
    while (pos_ < line_.size()) {
      const char c = line_[pos_];
      if (c == '\\' && pos_ + 1 < line_.size()) {
        const char e = line_[pos_ + 1];
        if (e == 'n') value.push_back('\n');
        else if (e == 't') value.push_back('\t');
        else value.push_back(e);
        pos_ += 2;
        continue;
      }
      if (c == '"') {
        ++pos_;
        return Token{Token::Kind::String, std::move(value), col};
      }
      value.push_back(c);
      ++pos_;
    }
    throw PlanError("unterminated string literal", line_no_, col);
  }

  std::string_view line_;
  int line_no_;
  std::size_t pos_ = 0;
};

class LineParser {
 public:
  LineParser(std::string_view line, int line_no) : lexer_(line, line_no), line_no_(line_no) {
    advance();
  }

  std::optional<Statement> parse_statement() {
    if (current_.kind == Token::Kind::End) {
      return std::nullopt;  // blank or comment-only line
    }
    Statement stmt;
    stmt.line = line_no_;
    if (current_.kind == Token::Kind::Ident && current_.text == "return") {
      advance();
      stmt.kind = Statement::Kind::Return;
      stmt.expr = parse_expr();
    } else if (current_.kind == Token::Kind::Ident) {
      stmt.kind = Statement::Kind::Assign;
      stmt.name = current_.text;
      advance();
      expect(Token::Kind::Equals, "'='");
      stmt.expr = parse_expr();
    } else {
      throw PlanError("expected identifier or 'return'", line_no_, current_.column);
    }
    if (current_.kind != Token::Kind::End) {
      throw PlanError("trailing input after statement", line_no_, current_.column);
    }
    return stmt;
  }

 private:
  Expr parse_expr() {
    Expr expr;
    expr.line = line_no_;
    expr.column = current_.column;
    if (current_.kind == Token::Kind::String) {
      expr.kind = Expr::Kind::Literal;
      expr.text = current_.text;
      advance();
      return expr;
    }
    if (current_.kind == Token::Kind::Ident) {
      if (current_.text == "return") {
        throw PlanError("'return' is reserved", line_no_, current_.column);
      }
      expr.text = current_.text;
      advance();
      if (current_.kind == Token::Kind::LParen) {
        expr.kind = Expr::Kind::Call;
        advance();
        if (current_.kind != Token::Kind::RParen) {
          expr.args.push_back(parse_expr());
          while (current_.kind == Token::Kind::Comma) {
            advance();
            expr.args.push_back(parse_expr());
          }
        }
        expect(Token::Kind::RParen, "')'");
        return expr;
      }
      expr.kind = Expr::Kind::Var;
      return expr;
    }
    throw PlanError("expected expression", line_no_, current_.column);
  }

  void expect(Token::Kind kind, const char* what) {
    if (current_.kind != kind) {
      throw PlanError(std::string("expected ") + what, line_no_, current_.column);
    }
    advance();
  }

  void advance() { current_ = lexer_.next(); }

  LineLexer lexer_;
  int line_no_;
  Token current_;
};

void analyze_expr(const Expr& expr, const std::set<std::string>& defined,
                  const ToolRegistry& registry) {
  switch (expr.kind) {
    case Expr::Kind::Literal:
      return;
    case Expr::Kind::Var:
      if (defined.find(expr.text) == defined.end()) {
        throw PlanError("use of unassigned variable '" + expr.text + "'", expr.line,
                        expr.column);
      }
      return;
    case Expr::Kind::Call: {
      const ToolSpec* spec = registry.find(expr.text);
      if (spec == nullptr) {
        throw PlanError("unknown tool '" + expr.text + "'", expr.line, expr.column);
      }
      if (static_cast<int>(expr.args.size()) != spec->arity) {
        throw PlanError("tool '" + expr.text + "' expects " + std::to_string(spec->arity) +
                            " argument(s), got " + std::to_string(expr.args.size()),
                        expr.line, expr.column);
      }
      for (const Expr& arg : expr.args) {
        analyze_expr(arg, defined, registry);
      }
      return;
    }
  }
}

Readers intersect_readers(const Readers& a, const Readers& b) {
  if (a.is_public) return b;
  if (b.is_public) return a;
  Readers out;
  out.is_public = false;
  std::set_intersection(a.sinks.begin(), a.sinks.end(), b.sinks.begin(), b.sinks.end(),
                        std::inserter(out.sinks, out.sinks.begin()));
  return out;
}

Capability call_output_cap(const ToolSpec& spec, const std::vector<Capability>& arg_caps) {
  Capability out;
  out.sources.insert(spec.output_source_label);
  for (const Capability& cap : arg_caps) {
    out.sources.insert(cap.sources.begin(), cap.sources.end());
    out.readers = intersect_readers(out.readers, cap.readers);
  }
  return out;
}

Capability propagate_expr(const Expr& expr, const std::map<std::string, Capability>& vars,
                          const ToolRegistry& registry, std::vector<CallCaps>* calls) {
  switch (expr.kind) {
    case Expr::Kind::Literal:
      return Capability::system_literal();
    case Expr::Kind::Var:
      return vars.at(expr.text);
    case Expr::Kind::Call: {
      std::vector<Capability> arg_caps;
      arg_caps.reserve(expr.args.size());
      for (const Expr& arg : expr.args) {
        arg_caps.push_back(propagate_expr(arg, vars, registry, calls));
      }
      const ToolSpec* spec = registry.find(expr.text);
      Capability out = call_output_cap(*spec, arg_caps);
      if (calls != nullptr) {
        calls->push_back(CallCaps{expr.text, std::move(arg_caps), out, expr.line});
      }
      return out;
    }
  }
  return Capability{};
}

bool rule_matches(const FlowRule& rule, const ToolSpec& tool) {
  if (rule.tool.has_value()) {
    return *rule.tool == tool.name;
  }
  if (rule.sink_class.has_value()) {
    return *rule.sink_class == tool.sink_class;
  }
  return false;
}

}  // namespace

const char* to_string(SinkClass sink) {
  switch (sink) {
    case SinkClass::Pure:
      return "pure";
    case SinkClass::StateChanging:
      return "state_changing";
    case SinkClass::Exfiltration:
      return "exfiltration";
  }
  return "?";
}

std::optional<SinkClass> sink_class_from_string(std::string_view name) {
  if (name == "pure") return SinkClass::Pure;
  if (name == "state_changing") return SinkClass::StateChanging;
  if (name == "exfiltration") return SinkClass::Exfiltration;
  return std::nullopt;
}

std::string to_string(const Capability& capability) {
  std::ostringstream out;
  out << "{";
  bool first = true;
  for (const std::string& source : capability.sources) {
    if (!first) out << ",";
    out << source;
    first = false;
  }
  out << "}";
  if (!capability.readers.is_public) {
    out << " readers:{";
    first = true;
    for (const std::string& sink : capability.readers.sinks) {
      if (!first) out << ",";
      out << sink;
      first = false;
    }
    out << "}";
  }
  return out.str();
}

void ToolRegistry::add(ToolSpec spec, ToolImpl impl) {
  const std::string name = spec.name;
  if (tools_.find(name) != tools_.end()) {
    throw std::invalid_argument("tool '" + name + "' already registered");
  }
  tools_.emplace(name, Entry{std::move(spec), std::move(impl)});
}

const ToolSpec* ToolRegistry::find(const std::string& name) const {
  const auto it = tools_.find(name);
  return it == tools_.end() ? nullptr : &it->second.spec;
}

std::string ToolRegistry::invoke(const std::string& name,
                                 const std::vector<std::string>& args) const {
  const auto it = tools_.find(name);
  if (it == tools_.end()) {
    throw std::invalid_argument("tool '" + name + "' not registered");
  }
  return it->second.impl(args);
}

std::vector<std::string> ToolRegistry::names() const {
  std::vector<std::string> out;
  out.reserve(tools_.size());
  for (const auto& [name, entry] : tools_) {
    out.push_back(name);
  }
  return out;
}

PlanAst parse(std::string_view plan_text) {
  PlanAst ast;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= plan_text.size()) {
    ++line_no;
    std::size_t end = plan_text.find('\n', start);
    std::string_view line = (end == std::string_view::npos)
                                ? plan_text.substr(start)
                                : plan_text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
    LineParser parser(line, line_no);
    if (auto stmt = parser.parse_statement()) {
      ast.statements.push_back(std::move(*stmt));
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return ast;
}

void analyze(const PlanAst& ast, const ToolRegistry& registry) {
  std::set<std::string> defined;
  for (const Statement& stmt : ast.statements) {
    analyze_expr(stmt.expr, defined, registry);
    if (stmt.kind == Statement::Kind::Assign) {
      defined.insert(stmt.name);
    }
  }
}

DataflowGraph propagate(const PlanAst& ast, const ToolRegistry& registry) {
  analyze(ast, registry);
  DataflowGraph graph;
  for (const Statement& stmt : ast.statements) {
    Capability cap = propagate_expr(stmt.expr, graph.vars, registry, &graph.calls);
    if (stmt.kind == Statement::Kind::Assign) {
      graph.vars[stmt.name] = std::move(cap);
    } else {
      graph.result = std::move(cap);
    }
  }
  return graph;
}

void SecurityPolicy::validate() const {
  std::set<std::string> tool_keys;
  std::set<SinkClass> class_keys;
  for (const FlowRule& rule : rules) {
    if (rule.tool.has_value() == rule.sink_class.has_value()) {
      throw PlanError("flow rule must name exactly one of tool or sink class", 0);
    }
    if (rule.tool && !tool_keys.insert(*rule.tool).second) {
      throw PlanError("duplicate flow rule for tool '" + *rule.tool + "'", 0);
    }
    if (rule.sink_class && !class_keys.insert(*rule.sink_class).second) {
      throw PlanError(std::string("duplicate flow rule for sink class '") +
                          to_string(*rule.sink_class) + "'",
                      0);
    }
  }
}

EnforcementDecision enforce(const SecurityPolicy& policy, const ToolSpec& tool,
                            const std::vector<Capability>& arg_caps) {
  // Rules only deny; the default decides everything they let through.
  for (const FlowRule& rule : policy.rules) {
    if (!rule_matches(rule, tool)) {
      continue;
    }
    for (std::size_t i = 0; i < arg_caps.size(); ++i) {
      for (const std::string& source : arg_caps[i].sources) {
        if (rule.forbidden_sources.count(source) > 0) {
          return EnforcementDecision{
              false, "argument " + std::to_string(i) + " carries forbidden source '" +
                         source + "' into sink '" + tool.name + "' (" +
                         to_string(tool.sink_class) + ")"};
        }
      }
      if (rule.required_readers && !arg_caps[i].readers.is_public) {
        for (const std::string& reader : *rule.required_readers) {
          if (arg_caps[i].readers.sinks.count(reader) == 0) {
            return EnforcementDecision{
                false, "argument " + std::to_string(i) + " readers do not cover '" +
                           reader + "' for sink '" + tool.name + "'"};
          }
        }
      }
    }
  }
  if (policy.default_decision == PolicyDefault::Deny) {
    return EnforcementDecision{false, "policy default is deny"};
  }
  return EnforcementDecision{true, ""};
}

Interpreter::Interpreter(const ToolRegistry& registry, SecurityPolicy policy)
    : registry_(registry), policy_(std::move(policy)) {
  policy_.validate();
}

ExecutionResult Interpreter::run(const PlanAst& ast) {
  analyze(ast, registry_);

  ExecutionResult result;
  struct Value {
    std::string text;
    Capability cap;
  };
  std::map<std::string, Value> env;

  // Evaluation aborts by throwing; the trace survives in trace_.
  struct Abort {
    std::string reason;
  };

  std::function<Value(const Expr&)> eval = [&](const Expr& expr) -> Value {
    switch (expr.kind) {
      case Expr::Kind::Literal:
        return Value{expr.text, Capability::system_literal()};
      case Expr::Kind::Var:
        return env.at(expr.text);
      case Expr::Kind::Call: {
        std::vector<Value> args;
        args.reserve(expr.args.size());
        for (const Expr& arg : expr.args) {
          args.push_back(eval(arg));
        }
        const ToolSpec* spec = registry_.find(expr.text);
        std::vector<Capability> arg_caps;
        std::vector<std::string> arg_texts;
        for (Value& value : args) {
          arg_caps.push_back(value.cap);
          arg_texts.push_back(std::move(value.text));
        }
        const EnforcementDecision decision = enforce(policy_, *spec, arg_caps);
        TraceEvent event;
        event.tool = expr.text;
        event.arg_caps = arg_caps;
        event.allowed = decision.allow;
        event.deny_reason = decision.reason;
        if (!decision.allow) {
          trace_.events.push_back(std::move(event));
          throw Abort{"denied call to '" + expr.text + "': " + decision.reason};
        }
        std::string output;
        try {
          output = registry_.invoke(expr.text, arg_texts);
        } catch (const std::exception& e) {
          event.error = true;
          event.error_message = e.what();
          trace_.events.push_back(std::move(event));
          throw Abort{"tool '" + expr.text + "' failed: " + std::string(e.what())};
        }
        Capability out_cap = call_output_cap(*spec, arg_caps);
        event.output_cap = out_cap;
        trace_.events.push_back(std::move(event));
        return Value{std::move(output), std::move(out_cap)};
      }
    }
    return Value{};
  };

  try {
    for (const Statement& stmt : ast.statements) {
      Value value = eval(stmt.expr);
      if (stmt.kind == Statement::Kind::Assign) {
        env[stmt.name] = std::move(value);
      } else {
        result.value = std::move(value.text);
        result.value_cap = std::move(value.cap);
        break;
      }
    }
    result.completed = true;
  } catch (const Abort& abort) {
    result.completed = false;
    result.abort_reason = abort.reason;
  }
  result.trace = trace_;
  return result;
}

Interpreter::GatedCall Interpreter::call(const std::string& tool,
                                         const std::vector<std::string>& args,
                                         const Capability& arg_cap) {
  const ToolSpec* spec = registry_.find(tool);
  if (spec == nullptr) {
    throw PlanError("unknown tool '" + tool + "'", 0);
  }
  if (static_cast<int>(args.size()) != spec->arity) {
    throw PlanError("tool '" + tool + "' expects " + std::to_string(spec->arity) +
                        " argument(s), got " + std::to_string(args.size()),
                    0);
  }
  std::vector<Capability> arg_caps(args.size(), arg_cap);
  const EnforcementDecision decision = enforce(policy_, *spec, arg_caps);
  TraceEvent event;
  event.tool = tool;
  event.arg_caps = arg_caps;
  event.allowed = decision.allow;
  event.deny_reason = decision.reason;
  GatedCall out;
  out.allowed = decision.allow;
  out.deny_reason = decision.reason;
  if (decision.allow) {
    out.output = registry_.invoke(tool, args);
    event.output_cap = call_output_cap(*spec, arg_caps);
  }
  trace_.events.push_back(std::move(event));
  return out;
}

ExecutionResult execute(const PlanAst& ast, const ToolRegistry& registry,
                        const SecurityPolicy& policy) {
  Interpreter interpreter(registry, policy);
  return interpreter.run(ast);
}

}  // namespace promptwall
