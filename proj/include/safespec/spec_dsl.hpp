#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace safespec {

// Arithmetic expression over named state variables. Value-semantic tree;
// variable references are resolved to indices into the owning task's
// state-variable list at parse time.
struct Expr {
  enum class Op { Constant, Var, Add, Sub, Mul, Div, Neg, Abs, Min, Max };

  Op op = Op::Constant;
  double value = 0.0;           // Constant
  int var = -1;                 // Var: index into TaskSpec::state_vars
  std::string var_name;         // Var: name, kept for printing
  std::vector<Expr> args;

  static Expr constant(double v);
  static Expr variable(int index, std::string name);
  static Expr unary(Op op, Expr a);
  static Expr binary(Op op, Expr a, Expr b);

  bool operator==(const Expr& other) const;
};

// Atomic predicate p = f(s) >= 0 with declared bounds f(s) in [m, M].
// m = 0 declares the predicate never violated.
struct Predicate {
  std::string name;
  Expr margin;
  double lower_bound = 0.0;  // m <= 0
  double upper_bound = 0.0;  // M >= 0

  bool operator==(const Predicate& other) const = default;
};

enum class RequirementKind { Achieve, Conquer, Ensure, Encourage };

enum class RequirementClass { Safety, Target, Comfort };

RequirementClass requirement_class(RequirementKind kind);
const char* kind_name(RequirementKind kind);

struct Requirement {
  RequirementKind kind = RequirementKind::Ensure;
  Predicate predicate;

  RequirementClass cls() const { return requirement_class(kind); }
  bool operator==(const Requirement& other) const = default;
};

// Validated requirement set Phi = Phi_S + Phi_T + Phi_C with exactly one
// target requirement. Requirements keep their source order.
struct TaskSpec {
  std::string name;
  std::vector<std::string> state_vars;
  std::vector<Requirement> requirements;

  std::vector<int> safety_indices() const;
  std::vector<int> comfort_indices() const;
  int target_index() const;
  const Requirement& target() const { return requirements[target_index()]; }
  int num_constraints() const { return static_cast<int>(safety_indices().size()); }
  int var_index(const std::string& name) const;

  bool operator==(const TaskSpec& other) const = default;
};

struct SpecError : std::runtime_error {
  SpecError(std::string msg, int line, int col)
      : std::runtime_error(std::move(msg)), line(line), col(col) {}
  int line;
  int col;
};

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parses and validates the task specification language. See README for the
// grammar; one requirement per line, '#' starts a comment.
TaskSpec parse_task(const std::string& text);

// Canonical text form; parse_task(print_task(spec)) == spec.
std::string print_task(const TaskSpec& spec);

std::string print_expr(const Expr& e);

// Margin f(s); satisfaction of the predicate at s is f(s) >= 0.
double evaluate_margin(const Predicate& p, std::span<const double> state);

double evaluate_expr(const Expr& e, std::span<const double> state);

// Strict partial order on requirements: safety precedes everything outside
// safety, and the target precedes comfort.
bool precedes(const Requirement& a, const Requirement& b);

}  // namespace safespec
