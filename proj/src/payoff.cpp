#include "homot/payoff.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <vector>

namespace homot {

enum class NodeKind { constant, coord, add, sub, mul, divide, neg, pos, vmax, vmin, vabs };

struct PayoffExpr::Node {
  NodeKind kind;
  double value = 0.0;  // constant
  int coord = 0;       // 1-based coordinate index
  std::shared_ptr<const Node> lhs, rhs;
};

namespace {

using Node = PayoffExpr::Node;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make_node(NodeKind k, NodePtr l = nullptr, NodePtr r = nullptr) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->lhs = std::move(l);
  n->rhs = std::move(r);
  return n;
}

double eval_node(const Node& n, const double* path, int len) {
  switch (n.kind) {
    case NodeKind::constant: return n.value;
    case NodeKind::coord:
      if (n.coord > len) throw eval_error("coordinate S" + std::to_string(n.coord) +
                                          " beyond path length " + std::to_string(len));
      return path[n.coord - 1];
    case NodeKind::add: return eval_node(*n.lhs, path, len) + eval_node(*n.rhs, path, len);
    case NodeKind::sub: return eval_node(*n.lhs, path, len) - eval_node(*n.rhs, path, len);
    case NodeKind::mul: return eval_node(*n.lhs, path, len) * eval_node(*n.rhs, path, len);
    case NodeKind::divide: {
      double d = eval_node(*n.rhs, path, len);
      if (d == 0.0) throw eval_error("division by zero in payoff");
      return eval_node(*n.lhs, path, len) / d;
    }
    case NodeKind::neg: return -eval_node(*n.lhs, path, len);
    case NodeKind::pos: return std::max(eval_node(*n.lhs, path, len), 0.0);
    case NodeKind::vmax:
      return std::max(eval_node(*n.lhs, path, len), eval_node(*n.rhs, path, len));
    case NodeKind::vmin:
      return std::min(eval_node(*n.lhs, path, len), eval_node(*n.rhs, path, len));
    case NodeKind::vabs: return std::abs(eval_node(*n.lhs, path, len));
  }
  throw eval_error("corrupt payoff node");
}

void print_node(const Node& n, std::string& out) {
  switch (n.kind) {
    case NodeKind::constant: {
      char buf[32];
      auto r = std::to_chars(buf, buf + sizeof buf, n.value);
      out.append(buf, r.ptr);
      return;
    }
    case NodeKind::coord:
      out += "S" + std::to_string(n.coord);
      return;
    case NodeKind::add:
    case NodeKind::sub:
    case NodeKind::mul:
    case NodeKind::divide: {
      const char* op = n.kind == NodeKind::add   ? " + "
                       : n.kind == NodeKind::sub ? " - "
                       : n.kind == NodeKind::mul ? " * "
                                                 : " / ";
      out += '(';
      print_node(*n.lhs, out);
      out += op;
      print_node(*n.rhs, out);
      out += ')';
      return;
    }
    case NodeKind::neg:
      out += "(-";
      print_node(*n.lhs, out);
      out += ')';
      return;
    case NodeKind::pos:
    case NodeKind::vabs:
      out += n.kind == NodeKind::pos ? "pos(" : "abs(";
      print_node(*n.lhs, out);
      out += ')';
      return;
    case NodeKind::vmax:
    case NodeKind::vmin:
      out += n.kind == NodeKind::vmax ? "max(" : "min(";
      print_node(*n.lhs, out);
      out += ", ";
      print_node(*n.rhs, out);
      out += ')';
      return;
  }
}

int max_coord_node(const Node& n) {
  int m = n.kind == NodeKind::coord ? n.coord : 0;
  if (n.lhs) m = std::max(m, max_coord_node(*n.lhs));
  if (n.rhs) m = std::max(m, max_coord_node(*n.rhs));
  return m;
}

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw parse_error(msg + " at offset " + std::to_string(pos_), pos_);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (eat('+')) {
        lhs = make_node(NodeKind::add, lhs, term());
      } else if (eat('-')) {
        lhs = make_node(NodeKind::sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    NodePtr lhs = factor();
    for (;;) {
      if (eat('*')) {
        lhs = make_node(NodeKind::mul, lhs, factor());
      } else if (eat('/')) {
        lhs = make_node(NodeKind::divide, lhs, factor());
      } else {
        return lhs;
      }
    }
  }

  NodePtr factor() {
    if (eat('-')) return make_node(NodeKind::neg, factor());
    return primary();
  }

  NodePtr primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = expr();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (c == 'S' && pos_ + 1 < text_.size() &&
        std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))
      return coordinate();
    if (std::isalpha(static_cast<unsigned char>(c))) return call();
    fail(std::string("unexpected character '") + c + "'");
  }

  NodePtr number() {
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
            text_[pos_] == 'e' || text_[pos_] == 'E' ||
            ((text_[pos_] == '+' || text_[pos_] == '-') && pos_ > start &&
             (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E'))))
      ++pos_;
    double v = 0.0;
    auto res = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != text_.data() + pos_) {
      pos_ = start;
      fail("malformed number");
    }
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::constant;
    n->value = v;
    return n;
  }

  NodePtr coordinate() {
    ++pos_;  // 'S'
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    int k = 0;
    std::from_chars(text_.data() + start, text_.data() + pos_, k);
    if (k < 1) fail("coordinate index must be >= 1");
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::coord;
    n->coord = k;
    return n;
  }

  NodePtr call() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    std::string name = text_.substr(start, pos_ - start);
    NodeKind kind;
    int arity;
    if (name == "pos") {
      kind = NodeKind::pos;
      arity = 1;
    } else if (name == "abs") {
      kind = NodeKind::vabs;
      arity = 1;
    } else if (name == "max") {
      kind = NodeKind::vmax;
      arity = 2;
    } else if (name == "min") {
      kind = NodeKind::vmin;
      arity = 2;
    } else {
      pos_ = start;
      fail("unknown function '" + name + "'");
    }
    if (!eat('(')) fail("expected '(' after '" + name + "'");
    NodePtr a = expr();
    NodePtr b;
    if (arity == 2) {
      if (!eat(',')) fail("expected ',' in '" + name + "'");
      b = expr();
    }
    if (!eat(')')) fail("expected ')'");
    return make_node(kind, a, b);
  }

  const std::string& text_;
  std::size_t pos_ = 0;
};

}  // namespace

double PayoffExpr::eval(const Eigen::VectorXd& path) const {
  return eval(path.data(), static_cast<int>(path.size()));
}

double PayoffExpr::eval(const double* path, int n) const {
  if (!root_) throw eval_error("empty payoff expression");
  return eval_node(*root_, path, n);
}

std::string PayoffExpr::print() const {
  std::string out;
  if (root_) print_node(*root_, out);
  return out;
}

int PayoffExpr::max_coordinate() const { return root_ ? max_coord_node(*root_) : 0; }

PayoffExpr parse_payoff(const std::string& text) {
  PayoffExpr e;
  e.root_ = Parser(text).parse();
  return e;
}

}  // namespace homot
