#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "fibrod/tensors.hpp"

// Arithmetic expressions for load and coefficient fields.
//
// Grammar: reals, variables x1 x2 x3 (plus y1 y2 in cell scope), binary
// + - * / ^, unary -, parentheses, functions sin cos exp abs, and the region
// indicators chiF / chiM.  '^' binds tighter than unary minus and associates
// to the right; * / and + - associate to the left.

namespace fibrod {

struct ParseError : std::runtime_error {
  ParseError(const std::string& what, size_t byte_offset)
      : std::runtime_error(what), offset(byte_offset) {}
  size_t offset;
};

class Expression {
 public:
  // Scope controls which variables the text may use.
  enum class Scope { Rod, Cell };

  static Expression parse(const std::string& text, Scope scope);

  double eval(const Eigen::Vector3d& x, const Eigen::Vector2d& y,
              Region region) const;

  // Variable usage, bit i set for {x1, x2, x3, y1, y2}[i].
  unsigned vars_mask() const { return vars_; }
  bool uses_x12() const { return (vars_ & 0b00011) != 0; }
  bool uses_x3() const { return (vars_ & 0b00100) != 0; }
  bool uses_y() const { return (vars_ & 0b11000) != 0; }
  bool uses_region() const { return uses_region_; }

  // Canonical text form; reparsing it yields an identical tree.
  std::string print() const;

  bool same_tree(const Expression& other) const;

 private:
  enum class Op {
    Const, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Abs, ChiF, ChiM
  };
  struct Node {
    Op op;
    double value = 0;  // Const payload or Var index
    int a = -1, b = -1;
  };

  std::vector<Node> nodes_;  // children precede parents; root is the back
  unsigned vars_ = 0;
  bool uses_region_ = false;

  friend class ExprParser;
  static int node_prec(Op op);
  void print_node(int id, std::string& out, int parent_prec, bool right) const;
};

}  // namespace fibrod
