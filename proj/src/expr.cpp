#include "fibrod/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace fibrod {

namespace {

bool ident_start(char c) { return std::isalpha((unsigned char)c) || c == '_'; }
bool ident_char(char c) { return std::isalnum((unsigned char)c) || c == '_'; }

}  // namespace

class ExprParser {
 public:
  ExprParser(const std::string& text, Expression::Scope scope)
      : text_(text), scope_(scope) {}

  Expression run() {
    skip_ws();
    int root = parse_sum();
    skip_ws();
    if (pos_ != text_.size())
      fail(pos_, "unexpected trailing input");
    (void)root;
    return std::move(out_);
  }

 private:
  const std::string& text_;
  Expression::Scope scope_;
  size_t pos_ = 0;
  Expression out_;

  [[noreturn]] void fail(size_t at, const std::string& what) {
    char buf[32];
    std::snprintf(buf, sizeof buf, " at offset %zu", at);
    throw ParseError(what + buf, at);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace((unsigned char)text_[pos_]))
      ++pos_;
  }

  bool consume(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  int add(Expression::Op op, double value = 0, int a = -1, int b = -1) {
    out_.nodes_.push_back({op, value, a, b});
    return (int)out_.nodes_.size() - 1;
  }

  int parse_sum() {
    int lhs = parse_product();
    for (;;) {
      if (consume('+'))
        lhs = add(Expression::Op::Add, 0, lhs, parse_product());
      else if (consume('-'))
        lhs = add(Expression::Op::Sub, 0, lhs, parse_product());
      else
        return lhs;
    }
  }

  int parse_product() {
    int lhs = parse_unary();
    for (;;) {
      if (consume('*'))
        lhs = add(Expression::Op::Mul, 0, lhs, parse_unary());
      else if (consume('/'))
        lhs = add(Expression::Op::Div, 0, lhs, parse_unary());
      else
        return lhs;
    }
  }

  int parse_unary() {
    if (consume('-')) return add(Expression::Op::Neg, 0, parse_unary());
    return parse_power();
  }

  int parse_power() {
    int base = parse_atom();
    if (consume('^'))
      return add(Expression::Op::Pow, 0, base, parse_unary());
    return base;
  }

  int parse_atom() {
    skip_ws();
    if (pos_ >= text_.size()) fail(pos_, "expected a value");
    char c = text_[pos_];

    if (c == '(') {
      ++pos_;
      int inner = parse_sum();
      if (!consume(')')) fail(pos_, "expected ')'");
      return inner;
    }

    if (std::isdigit((unsigned char)c) || c == '.') {
      double v = 0;
      auto res = std::from_chars(text_.data() + pos_,
                                 text_.data() + text_.size(), v);
      if (res.ec != std::errc()) fail(pos_, "bad number");
      pos_ = res.ptr - text_.data();
      return add(Expression::Op::Const, v);
    }

    if (ident_start(c)) {
      size_t start = pos_;
      while (pos_ < text_.size() && ident_char(text_[pos_])) ++pos_;
      std::string name = text_.substr(start, pos_ - start);

      if (name == "sin" || name == "cos" || name == "exp" || name == "abs") {
        if (!consume('(')) fail(pos_, "expected '(' after '" + name + "'");
        int arg = parse_sum();
        if (!consume(')')) fail(pos_, "expected ')'");
        Expression::Op op = name == "sin"   ? Expression::Op::Sin
                            : name == "cos" ? Expression::Op::Cos
                            : name == "exp" ? Expression::Op::Exp
                                            : Expression::Op::Abs;
        return add(op, 0, arg);
      }
      if (name == "chiF" || name == "chiM") {
        out_.uses_region_ = true;
        return add(name == "chiF" ? Expression::Op::ChiF
                                  : Expression::Op::ChiM);
      }

      int var = name == "x1"   ? 0
                : name == "x2" ? 1
                : name == "x3" ? 2
                : name == "y1" ? 3
                : name == "y2" ? 4
                               : -1;
      if (var < 0) fail(start, "unknown identifier '" + name + "'");
      if (var >= 3 && scope_ == Expression::Scope::Rod)
        fail(start, "cell variable '" + name + "' needs a cell context");
      out_.vars_ |= 1u << var;
      return add(Expression::Op::Var, var);
    }

    fail(pos_, std::string("unexpected character '") + c + "'");
  }
};

Expression Expression::parse(const std::string& text, Scope scope) {
  return ExprParser(text, scope).run();
}

double Expression::eval(const Eigen::Vector3d& x, const Eigen::Vector2d& y,
                        Region region) const {
  double stack_buf[128];
  std::vector<double> heap;
  double* v = stack_buf;
  if (nodes_.size() > 128) {
    heap.resize(nodes_.size());
    v = heap.data();
  }
  const double vars[5] = {x.x(), x.y(), x.z(), y.x(), y.y()};
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    switch (n.op) {
      case Op::Const: v[i] = n.value; break;
      case Op::Var: v[i] = vars[(int)n.value]; break;
      case Op::Add: v[i] = v[n.a] + v[n.b]; break;
      case Op::Sub: v[i] = v[n.a] - v[n.b]; break;
      case Op::Mul: v[i] = v[n.a] * v[n.b]; break;
      case Op::Div: v[i] = v[n.a] / v[n.b]; break;
      case Op::Pow: v[i] = std::pow(v[n.a], v[n.b]); break;
      case Op::Neg: v[i] = -v[n.a]; break;
      case Op::Sin: v[i] = std::sin(v[n.a]); break;
      case Op::Cos: v[i] = std::cos(v[n.a]); break;
      case Op::Exp: v[i] = std::exp(v[n.a]); break;
      case Op::Abs: v[i] = std::abs(v[n.a]); break;
      case Op::ChiF: v[i] = region == Region::Fiber ? 1.0 : 0.0; break;
      case Op::ChiM: v[i] = region == Region::Matrix ? 1.0 : 0.0; break;
    }
  }
  return v[nodes_.size() - 1];
}

// add/sub = 1, mul/div = 2, unary minus = 3, pow = 4, atoms = 5.
int Expression::node_prec(Op op) {
  switch (op) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    default: return 5;
  }
}

void Expression::print_node(int id, std::string& out, int parent_prec,
                            bool right) const {
  const Node& n = nodes_[id];
  int prec = node_prec(n.op);
  // Left-associative levels keep a right child of equal precedence in
  // parentheses; '^' keeps its left child in parentheses instead.
  bool parens = prec < parent_prec ||
                (prec == parent_prec && parent_prec <= 2 && right) ||
                (parent_prec == 4 && !right && prec <= 4);
  if (parens) out += '(';
  const char* names[5] = {"x1", "x2", "x3", "y1", "y2"};
  char buf[32];
  switch (n.op) {
    case Op::Const:
      std::snprintf(buf, sizeof buf, "%.17g", n.value);
      out += buf;
      break;
    case Op::Var: out += names[(int)n.value]; break;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
    case Op::Pow: {
      const char sym = n.op == Op::Add   ? '+'
                       : n.op == Op::Sub ? '-'
                       : n.op == Op::Mul ? '*'
                       : n.op == Op::Div ? '/'
                                         : '^';
      print_node(n.a, out, prec, false);
      out += sym;
      print_node(n.b, out, prec, true);
      break;
    }
    case Op::Neg:
      out += '-';
      print_node(n.a, out, prec, true);
      break;
    case Op::Sin:
    case Op::Cos:
    case Op::Exp:
    case Op::Abs:
      out += n.op == Op::Sin   ? "sin"
             : n.op == Op::Cos ? "cos"
             : n.op == Op::Exp ? "exp"
                               : "abs";
      out += '(';
      print_node(n.a, out, 0, false);
      out += ')';
      break;
    case Op::ChiF: out += "chiF"; break;
    case Op::ChiM: out += "chiM"; break;
  }
  if (parens) out += ')';
}

std::string Expression::print() const {
  std::string out;
  print_node((int)nodes_.size() - 1, out, 0, false);
  return out;
}

bool Expression::same_tree(const Expression& other) const {
  if (nodes_.size() != other.nodes_.size()) return false;
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const Node &a = nodes_[i], &b = other.nodes_[i];
    if (a.op != b.op || a.value != b.value || a.a != b.a || a.b != b.b)
      return false;
  }
  return true;
}

}  // namespace fibrod
