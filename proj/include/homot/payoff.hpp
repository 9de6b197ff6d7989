#pragma once

#include <Eigen/Core>

#include <memory>
#include <stdexcept>
#include <string>

namespace homot {

// Payoff text failed to parse; `offset` is the byte position of the error.
struct parse_error : std::runtime_error {
  parse_error(const std::string& msg, std::size_t offset_)
      : std::runtime_error(msg), offset(offset_) {}
  std::size_t offset;
};

// Division by zero during payoff evaluation.
struct eval_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Arithmetic expression over path coordinates S1..SN.
//
// Grammar (usual precedence, unary minus binds tighter than * and /):
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := '-' factor | primary
//   primary:= number | 'S'k | func '(' expr (',' expr)* ')' | '(' expr ')'
//   func   := 'pos' | 'max' | 'min' | 'abs'
// pos(x) = max(x, 0).
class PayoffExpr {
 public:
  PayoffExpr() = default;

  double eval(const Eigen::VectorXd& path) const;
  double eval(const double* path, int n) const;
  std::string print() const;
  // Largest coordinate index referenced (0 for constant payoffs).
  int max_coordinate() const;
  bool valid() const { return root_ != nullptr; }

  struct Node;

 private:
  friend PayoffExpr parse_payoff(const std::string&);
  std::shared_ptr<const Node> root_;
};

PayoffExpr parse_payoff(const std::string& text);

}  // namespace homot
