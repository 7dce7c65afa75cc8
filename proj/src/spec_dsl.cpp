#include "safespec/spec_dsl.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>

#include "safespec/util.hpp"

namespace safespec {

Expr Expr::constant(double v) {
  Expr e;
  e.op = Op::Constant;
  e.value = v;
  return e;
}

Expr Expr::variable(int index, std::string name) {
  Expr e;
  e.op = Op::Var;
  e.var = index;
  e.var_name = std::move(name);
  return e;
}

Expr Expr::unary(Op op, Expr a) {
  Expr e;
  e.op = op;
  e.args.push_back(std::move(a));
  return e;
}

Expr Expr::binary(Op op, Expr a, Expr b) {
  Expr e;
  e.op = op;
  e.args.push_back(std::move(a));
  e.args.push_back(std::move(b));
  return e;
}

bool Expr::operator==(const Expr& other) const {
  if (op != other.op) return false;
  switch (op) {
    case Op::Constant:
      return value == other.value;
    case Op::Var:
      return var == other.var && var_name == other.var_name;
    default:
      break;
  }
  if (args.size() != other.args.size()) return false;
  for (size_t i = 0; i < args.size(); ++i)
    if (!(args[i] == other.args[i])) return false;
  return true;
}

RequirementClass requirement_class(RequirementKind kind) {
  switch (kind) {
    case RequirementKind::Ensure:
      return RequirementClass::Safety;
    case RequirementKind::Encourage:
      return RequirementClass::Comfort;
    case RequirementKind::Achieve:
    case RequirementKind::Conquer:
      return RequirementClass::Target;
  }
  return RequirementClass::Safety;
}

const char* kind_name(RequirementKind kind) {
  switch (kind) {
    case RequirementKind::Achieve:
      return "achieve";
    case RequirementKind::Conquer:
      return "conquer";
    case RequirementKind::Ensure:
      return "ensure";
    case RequirementKind::Encourage:
      return "encourage";
  }
  return "?";
}

std::vector<int> TaskSpec::safety_indices() const {
  std::vector<int> out;
  for (size_t i = 0; i < requirements.size(); ++i)
    if (requirements[i].cls() == RequirementClass::Safety) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> TaskSpec::comfort_indices() const {
  std::vector<int> out;
  for (size_t i = 0; i < requirements.size(); ++i)
    if (requirements[i].cls() == RequirementClass::Comfort) out.push_back(static_cast<int>(i));
  return out;
}

int TaskSpec::target_index() const {
  for (size_t i = 0; i < requirements.size(); ++i)
    if (requirements[i].cls() == RequirementClass::Target) return static_cast<int>(i);
  return -1;
}

int TaskSpec::var_index(const std::string& name) const {
  for (size_t i = 0; i < state_vars.size(); ++i)
    if (state_vars[i] == name) return static_cast<int>(i);
  return -1;
}

bool precedes(const Requirement& a, const Requirement& b) {
  const RequirementClass ca = a.cls();
  const RequirementClass cb = b.cls();
  if (ca == RequirementClass::Safety && cb != RequirementClass::Safety) return true;
  if (ca == RequirementClass::Target && cb == RequirementClass::Comfort) return true;
  return false;
}

double evaluate_expr(const Expr& e, std::span<const double> state) {
  switch (e.op) {
    case Expr::Op::Constant:
      return e.value;
    case Expr::Op::Var:
      if (e.var < 0 || static_cast<size_t>(e.var) >= state.size())
        throw EvalError("unbound state variable: " + e.var_name);
      return state[e.var];
    case Expr::Op::Add:
      return evaluate_expr(e.args[0], state) + evaluate_expr(e.args[1], state);
    case Expr::Op::Sub:
      return evaluate_expr(e.args[0], state) - evaluate_expr(e.args[1], state);
    case Expr::Op::Mul:
      return evaluate_expr(e.args[0], state) * evaluate_expr(e.args[1], state);
    case Expr::Op::Div:
      return evaluate_expr(e.args[0], state) / evaluate_expr(e.args[1], state);
    case Expr::Op::Neg:
      return -evaluate_expr(e.args[0], state);
    case Expr::Op::Abs:
      return std::fabs(evaluate_expr(e.args[0], state));
    case Expr::Op::Min:
      return std::min(evaluate_expr(e.args[0], state), evaluate_expr(e.args[1], state));
    case Expr::Op::Max:
      return std::max(evaluate_expr(e.args[0], state), evaluate_expr(e.args[1], state));
  }
  throw EvalError("malformed expression node");
}

double evaluate_margin(const Predicate& p, std::span<const double> state) {
  const double f = evaluate_expr(p.margin, state);
  if (!std::isfinite(f)) throw EvalError("non-finite margin for predicate " + p.name);
  return f;
}

namespace {

// ---------------------------------------------------------------------------
// Line-oriented parser. Requirement expressions use a recursive-descent
// parser over a small token stream.

struct Token {
  enum class Type { Ident, Number, Symbol, End };
  Type type = Type::End;
  std::string text;
  double number = 0.0;
  int col = 0;
};

class Lexer {
 public:
  Lexer(const std::string& s, int line) : s_(s), line_(line) { advance(); }

  const Token& peek() const { return tok_; }

  Token next() {
    Token t = tok_;
    advance();
    return t;
  }

  [[noreturn]] void fail(const std::string& msg, int col) const {
    throw SpecError("syntax error: " + msg, line_, col);
  }

 private:
  void advance() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    tok_ = Token{};
    tok_.col = static_cast<int>(pos_) + 1;
    if (pos_ >= s_.size() || s_[pos_] == '#') {
      tok_.type = Token::Type::End;
      return;
    }
    const char c = s_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
        ++pos_;
      tok_.type = Token::Type::Ident;
      tok_.text = s_.substr(start, pos_ - start);
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && pos_ + 1 < s_.size() &&
         std::isdigit(static_cast<unsigned char>(s_[pos_ + 1])))) {
      char* end = nullptr;
      tok_.number = std::strtod(s_.c_str() + pos_, &end);
      tok_.type = Token::Type::Number;
      tok_.text = s_.substr(pos_, end - (s_.c_str() + pos_));
      pos_ = end - s_.c_str();
      return;
    }
    // multi-char comparison symbols
    if ((c == '<' || c == '>') && pos_ + 1 < s_.size() && s_[pos_ + 1] == '=') {
      tok_.type = Token::Type::Symbol;
      tok_.text = s_.substr(pos_, 2);
      pos_ += 2;
      return;
    }
    tok_.type = Token::Type::Symbol;
    tok_.text = std::string(1, c);
    ++pos_;
  }

  const std::string& s_;
  int line_;
  size_t pos_ = 0;
  Token tok_;
};

class ExprParser {
 public:
  ExprParser(Lexer& lex, const std::vector<std::string>& vars,
             const std::map<std::string, double>& consts, int line)
      : lex_(lex), vars_(vars), consts_(consts), line_(line) {}

  Expr parse() { return parse_additive(); }

 private:
  Expr parse_additive() {
    Expr lhs = parse_term();
    while (lex_.peek().type == Token::Type::Symbol &&
           (lex_.peek().text == "+" || lex_.peek().text == "-")) {
      const std::string op = lex_.next().text;
      Expr rhs = parse_term();
      lhs = Expr::binary(op == "+" ? Expr::Op::Add : Expr::Op::Sub, std::move(lhs),
                         std::move(rhs));
    }
    return lhs;
  }

  Expr parse_term() {
    Expr lhs = parse_unary();
    while (lex_.peek().type == Token::Type::Symbol &&
           (lex_.peek().text == "*" || lex_.peek().text == "/")) {
      const std::string op = lex_.next().text;
      Expr rhs = parse_unary();
      lhs = Expr::binary(op == "*" ? Expr::Op::Mul : Expr::Op::Div, std::move(lhs),
                         std::move(rhs));
    }
    return lhs;
  }

  Expr parse_unary() {
    if (lex_.peek().type == Token::Type::Symbol && lex_.peek().text == "-") {
      lex_.next();
      Expr inner = parse_unary();
      // fold negated literals so the representation has one form per value
      if (inner.op == Expr::Op::Constant) return Expr::constant(-inner.value);
      return Expr::unary(Expr::Op::Neg, std::move(inner));
    }
    return parse_primary();
  }

  Expr parse_primary() {
    Token t = lex_.next();
    if (t.type == Token::Type::Number) return Expr::constant(t.number);
    if (t.type == Token::Type::Ident) {
      if (t.text == "abs" || t.text == "min" || t.text == "max") return parse_call(t);
      for (size_t i = 0; i < vars_.size(); ++i)
        if (vars_[i] == t.text) return Expr::variable(static_cast<int>(i), t.text);
      auto it = consts_.find(t.text);
      if (it != consts_.end()) return Expr::constant(it->second);
      throw SpecError("undeclared state variable or constant '" + t.text + "'", line_, t.col);
    }
    if (t.type == Token::Type::Symbol && t.text == "(") {
      Expr inner = parse_additive();
      expect_symbol(")");
      return inner;
    }
    lex_.fail("expected expression, got '" + (t.type == Token::Type::End ? "end of line" : t.text) +
                  "'",
              t.col);
  }

  Expr parse_call(const Token& name) {
    expect_symbol("(");
    Expr first = parse_additive();
    if (name.text == "abs") {
      expect_symbol(")");
      return Expr::unary(Expr::Op::Abs, std::move(first));
    }
    expect_symbol(",");
    Expr second = parse_additive();
    expect_symbol(")");
    return Expr::binary(name.text == "min" ? Expr::Op::Min : Expr::Op::Max, std::move(first),
                        std::move(second));
  }

  void expect_symbol(const std::string& sym) {
    const Token t = lex_.next();
    if (t.type != Token::Type::Symbol || t.text != sym)
      lex_.fail("expected '" + sym + "'", t.col);
  }

  Lexer& lex_;
  const std::vector<std::string>& vars_;
  const std::map<std::string, double>& consts_;
  int line_;
};

bool is_identifier(const std::string& s) {
  if (s.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return true;
}

int precedence_of(const Expr& e) {
  switch (e.op) {
    case Expr::Op::Add:
    case Expr::Op::Sub:
      return 1;
    case Expr::Op::Mul:
    case Expr::Op::Div:
      return 2;
    case Expr::Op::Neg:
      return 3;
    default:
      return 4;
  }
}

void print_expr_rec(const Expr& e, std::string& out) {
  auto child = [&](const Expr& c, bool needs_paren) {
    if (needs_paren) out += '(';
    print_expr_rec(c, out);
    if (needs_paren) out += ')';
  };
  switch (e.op) {
    case Expr::Op::Constant: {
      if (e.value < 0) {
        // keep the canonical form parseable as Neg(Constant)
        out += "-";
        out += format_double(-e.value);
      } else {
        out += format_double(e.value);
      }
      return;
    }
    case Expr::Op::Var:
      out += e.var_name;
      return;
    case Expr::Op::Add:
    case Expr::Op::Sub: {
      child(e.args[0], precedence_of(e.args[0]) < 1);
      out += e.op == Expr::Op::Add ? " + " : " - ";
      child(e.args[1], precedence_of(e.args[1]) <= 1);
      return;
    }
    case Expr::Op::Mul:
    case Expr::Op::Div: {
      child(e.args[0], precedence_of(e.args[0]) < 2);
      out += e.op == Expr::Op::Mul ? " * " : " / ";
      child(e.args[1], precedence_of(e.args[1]) <= 2);
      return;
    }
    case Expr::Op::Neg:
      out += '-';
      child(e.args[0], precedence_of(e.args[0]) < 3);
      return;
    case Expr::Op::Abs:
      out += "abs(";
      print_expr_rec(e.args[0], out);
      out += ')';
      return;
    case Expr::Op::Min:
    case Expr::Op::Max:
      out += e.op == Expr::Op::Min ? "min(" : "max(";
      print_expr_rec(e.args[0], out);
      out += ", ";
      print_expr_rec(e.args[1], out);
      out += ')';
      return;
  }
}

}  // namespace

std::string print_expr(const Expr& e) {
  std::string out;
  print_expr_rec(e, out);
  return out;
}

TaskSpec parse_task(const std::string& text) {
  TaskSpec spec;
  std::map<std::string, double> consts;
  bool saw_task = false;
  int line_no = 0;

  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    Lexer lex(raw, line_no);
    if (lex.peek().type == Token::Type::End) continue;
    Token head = lex.next();
    if (head.type != Token::Type::Ident)
      throw SpecError("expected a keyword at start of line", line_no, head.col);

    if (head.text == "task") {
      Token name = lex.next();
      if (name.type != Token::Type::Ident)
        throw SpecError("expected task name", line_no, name.col);
      spec.name = name.text;
      saw_task = true;
    } else if (head.text == "state") {
      while (lex.peek().type == Token::Type::Ident) {
        const Token v = lex.next();
        if (spec.var_index(v.text) >= 0)
          throw SpecError("duplicate state variable '" + v.text + "'", line_no, v.col);
        spec.state_vars.push_back(v.text);
      }
      if (spec.state_vars.empty())
        throw SpecError("state line declares no variables", line_no, head.col);
    } else if (head.text == "const") {
      Token name = lex.next();
      if (name.type != Token::Type::Ident)
        throw SpecError("expected constant name", line_no, name.col);
      Token eq = lex.next();
      if (eq.type != Token::Type::Symbol || eq.text != "=")
        throw SpecError("expected '=' in const declaration", line_no, eq.col);
      bool negative = false;
      Token num = lex.next();
      if (num.type == Token::Type::Symbol && num.text == "-") {
        negative = true;
        num = lex.next();
      }
      if (num.type != Token::Type::Number)
        throw SpecError("expected numeric constant value", line_no, num.col);
      consts[name.text] = negative ? -num.number : num.number;
    } else if (head.text == "ensure" || head.text == "achieve" || head.text == "conquer" ||
               head.text == "encourage") {
      Requirement req;
      req.kind = head.text == "ensure"      ? RequirementKind::Ensure
                 : head.text == "achieve"   ? RequirementKind::Achieve
                 : head.text == "conquer"   ? RequirementKind::Conquer
                                            : RequirementKind::Encourage;

      ExprParser parser(lex, spec.state_vars, consts, line_no);
      Expr lhs = parser.parse();

      Token cmp = lex.next();
      const bool is_cmp = cmp.type == Token::Type::Symbol &&
                          (cmp.text == "<=" || cmp.text == ">=" || cmp.text == "<" ||
                           cmp.text == ">");
      if (!is_cmp)
        throw SpecError("expected comparison operator (<=, >=, <, >)", line_no, cmp.col);

      Expr rhs = parser.parse();

      // Normalize to margin form f(s) >= 0. A literal-zero side is dropped so
      // the canonical form "f >= 0" parses back to f itself.
      const bool geq = cmp.text == ">=" || cmp.text == ">";
      Expr margin;
      auto is_zero = [](const Expr& e) {
        return e.op == Expr::Op::Constant && e.value == 0.0;
      };
      if (geq) {
        margin = is_zero(rhs) ? std::move(lhs) : Expr::binary(Expr::Op::Sub, std::move(lhs),
                                                              std::move(rhs));
      } else {
        margin = is_zero(lhs) ? Expr::unary(Expr::Op::Neg, std::move(rhs))
                              : Expr::binary(Expr::Op::Sub, std::move(rhs), std::move(lhs));
      }

      Token bounds = lex.next();
      if (bounds.type != Token::Type::Ident || bounds.text != "bounds")
        throw SpecError("expected 'bounds [m, M]' after requirement", line_no, bounds.col);
      Token open = lex.next();
      if (open.type != Token::Type::Symbol || open.text != "[")
        throw SpecError("expected '[' after 'bounds'", line_no, open.col);
      auto read_signed = [&]() {
        bool neg = false;
        Token t = lex.next();
        if (t.type == Token::Type::Symbol && t.text == "-") {
          neg = true;
          t = lex.next();
        }
        if (t.type != Token::Type::Number)
          throw SpecError("expected numeric bound", line_no, t.col);
        return neg ? -t.number : t.number;
      };
      req.predicate.lower_bound = read_signed();
      Token comma = lex.next();
      if (comma.type != Token::Type::Symbol || comma.text != ",")
        throw SpecError("expected ',' between bounds", line_no, comma.col);
      req.predicate.upper_bound = read_signed();
      Token close = lex.next();
      if (close.type != Token::Type::Symbol || close.text != "]")
        throw SpecError("expected ']' after bounds", line_no, close.col);

      req.predicate.margin = std::move(margin);
      req.predicate.name = "phi" + std::to_string(spec.requirements.size() + 1);
      spec.requirements.push_back(std::move(req));
    } else {
      throw SpecError("unknown keyword '" + head.text + "'", line_no, head.col);
    }

    const Token rest = lex.next();
    if (rest.type != Token::Type::End)
      throw SpecError("unexpected trailing input '" + rest.text + "'", line_no, rest.col);
  }

  // validation
  if (!saw_task || !is_identifier(spec.name))
    throw SpecError("validation error: missing task declaration", 0, 0);
  if (spec.state_vars.empty())
    throw SpecError("validation error: no state variables declared", 0, 0);
  int targets = 0;
  for (const auto& r : spec.requirements) {
    if (r.cls() == RequirementClass::Target) ++targets;
    if (r.predicate.lower_bound > 0.0)
      throw SpecError("validation error: predicate " + r.predicate.name +
                          " has lower bound m > 0",
                      0, 0);
    if (r.predicate.upper_bound < 0.0)
      throw SpecError("validation error: predicate " + r.predicate.name +
                          " has upper bound M < 0",
                      0, 0);
  }
  if (targets == 0) throw SpecError("validation error: missing target requirement", 0, 0);
  if (targets > 1)
    throw SpecError("validation error: multiple target requirements (exactly one of "
                    "achieve/conquer is allowed)",
                    0, 0);
  return spec;
}

std::string print_task(const TaskSpec& spec) {
  std::string out;
  out += "task " + spec.name + "\n";
  out += "state";
  for (const auto& v : spec.state_vars) out += " " + v;
  out += "\n";
  for (const auto& r : spec.requirements) {
    out += kind_name(r.kind);
    out += " ";
    out += print_expr(r.predicate.margin);
    out += " >= 0 bounds [";
    out += format_double(r.predicate.lower_bound);
    out += ", ";
    out += format_double(r.predicate.upper_bound);
    out += "]\n";
  }
  return out;
}

}  // namespace safespec
