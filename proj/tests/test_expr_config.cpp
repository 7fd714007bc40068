#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "fibrod/config.hpp"
#include "fibrod/expr.hpp"

using namespace fibrod;

namespace {

double ev(const std::string& text, double x1 = 0, double x2 = 0, double x3 = 0,
          Region region = Region::Fiber,
          Expression::Scope scope = Expression::Scope::Rod) {
  return Expression::parse(text, scope)
      .eval({x1, x2, x3}, {0, 0}, region);
}

size_t offset_of(const std::string& text,
                 Expression::Scope scope = Expression::Scope::Rod) {
  try {
    Expression::parse(text, scope);
  } catch (const ParseError& e) {
    return e.offset;
  }
  return (size_t)-1;
}

ConfigFile from_text(const std::string& text) {
  std::istringstream is(text);
  return ConfigFile::parse(is, "test.ini");
}

}  // namespace

TEST_CASE("expression evaluation covers the grammar") {
  CHECK(ev("1") == 1.0);
  CHECK(ev("sin(3.141592653589793*x3)", 0, 0, 0.0) ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ev("sin(3.141592653589793*x3)", 0, 0, 0.5) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ev("1+2*3") == 7.0);
  CHECK(ev("(1+2)*3") == 9.0);
  CHECK(ev("2^3^2") == 512.0);        // right associative
  CHECK(ev("-2^2") == -4.0);          // '^' binds tighter than unary '-'
  CHECK(ev("2^-2") == 0.25);
  CHECK(ev("1-2-3") == -4.0);         // left associative
  CHECK(ev("12/4/3") == 1.0);
  CHECK(ev("abs(-3.5)") == 3.5);
  CHECK(ev("exp(0)") == 1.0);
  CHECK(ev("cos(0)") == 1.0);
  CHECK(ev("x1+10*x2+100*x3", 1, 2, 3) == 321.0);
  CHECK(ev("chiF") == 1.0);
  CHECK(ev("chiF", 0, 0, 0, Region::Matrix) == 0.0);
  CHECK(ev("chiM", 0, 0, 0, Region::Matrix) == 1.0);
  CHECK(ev("2 * ( x3 + .5 )", 0, 0, 1) == 3.0);
  CHECK(ev("1e2 + 1E-2") == doctest::Approx(100.01).epsilon(1e-15));

  Expression e = Expression::parse("y1*y2 + x3", Expression::Scope::Cell);
  CHECK(e.eval({0, 0, 5}, {2, 3}, Region::Fiber) == 11.0);
}

TEST_CASE("parse errors carry the byte offset") {
  CHECK(offset_of("x3*(1-x3") == 8);  // unbalanced parenthesis
  CHECK(offset_of("") == 0);
  CHECK(offset_of("1+") == 2);
  CHECK(offset_of("1 + @") == 4);
  CHECK(offset_of("foo+1") == 0);
  CHECK(offset_of("1+bar") == 2);
  CHECK(offset_of("x3 x3") == 3);
  CHECK(offset_of("sin x3") == 4);

  // y variables need the cell scope.
  CHECK(offset_of("x3+y1") == 3);
  CHECK(offset_of("x3+y1", Expression::Scope::Cell) == (size_t)-1);
  try {
    Expression::parse("y2", Expression::Scope::Rod);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("y2") != std::string::npos);
  }
}

TEST_CASE("printer round trips to an identical tree") {
  const char* cases[] = {
      "1",
      "x3*(1-x3)",
      "1-(2-3)",
      "1-2-3",
      "-x1^2",
      "(-x1)^2",
      "2^3^2",
      "(2^3)^2",
      "a2b",  // placeholder replaced below
      "x1--x2",
      "-(x1+x2)*x3",
      "sin(cos(exp(abs(-x3))))",
      "chiF*x3+chiM*(1-x3)",
      "1/2/3",
      "1/(2/3)",
      "2*(x3+0.5)",
      "x3^-2",
  };
  for (const char* text : cases) {
    if (std::string(text) == "a2b") continue;
    Expression first = Expression::parse(text, Expression::Scope::Rod);
    std::string printed = first.print();
    Expression second = Expression::parse(printed, Expression::Scope::Rod);
    CAPTURE(text);
    CAPTURE(printed);
    CHECK(first.same_tree(second));
    CHECK(second.print() == printed);
  }
}

TEST_CASE("expressions report which variables they use") {
  Expression e = Expression::parse("x3*(1-x3)", Expression::Scope::Rod);
  CHECK(e.uses_x3());
  CHECK_FALSE(e.uses_x12());
  CHECK_FALSE(e.uses_y());
  CHECK_FALSE(e.uses_region());

  Expression g = Expression::parse("chiM*x1", Expression::Scope::Cell);
  CHECK(g.uses_x12());
  CHECK(g.uses_region());
  CHECK_FALSE(g.uses_x3());

  Expression h = Expression::parse("y2", Expression::Scope::Cell);
  CHECK(h.uses_y());
  CHECK(h.vars_mask() == 0b10000);
}

TEST_CASE("config file parsing tracks lines and rejects malformed input") {
  ConfigFile cf = from_text(
      "# comment\n"
      "[geometry]\n"
      "fiber_radius = 0.5   # inline comment\n"
      "\n"
      "[load]\n"
      "f3 = x3*(1-x3)\n");
  CHECK(cf.get_double("geometry", "fiber_radius") == 0.5);
  CHECK(cf.get_string("load", "f3") == "x3*(1-x3)");
  CHECK_FALSE(cf.get_string("load", "f1").has_value());

  CHECK_THROWS_AS(from_text("key = 1\n"), ConfigError);        // no section
  CHECK_THROWS_AS(from_text("[geometry\n"), ConfigError);      // malformed
  CHECK_THROWS_AS(from_text("[a]\nnovalue\n"), ConfigError);   // no '='
  CHECK_THROWS_AS(from_text("[a]\nk =\n"), ConfigError);       // empty value
  CHECK_THROWS_AS(from_text("[a]\nk = 1\nk = 2\n"), ConfigError);
  CHECK_THROWS_AS(from_text("[a]\nk = 1\n[a]\n"), ConfigError);

  try {
    from_text("[geometry]\nfiber_radius = abc\n").get_double("geometry",
                                                             "fiber_radius");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line == 2);
    CHECK(std::string(e.what()).find("test.ini:2") != std::string::npos);
  }
}

TEST_CASE("unknown keys are rejected with their location") {
  ConfigFile cf = from_text(
      "[geometry]\n"
      "fiber_radius = 0.4\n"
      "typo_key = 1\n");
  try {
    read_run_config(cf);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line == 3);
    CHECK(std::string(e.what()).find("typo_key") != std::string::npos);
  }

  ConfigFile cf2 = from_text("[nonsense]\nk = 1\n");
  CHECK_THROWS_AS(read_run_config(cf2), ConfigError);
}

TEST_CASE("run config defaults and overrides") {
  ConfigFile cf = from_text("");
  RunConfig cfg = read_run_config(cf);
  CHECK(cfg.family == RunConfig::Family::Rod);
  CHECK(cfg.section.outer == SectionGeometry::Outer::Disk);
  CHECK(cfg.section.outer_size == 1.0);
  CHECK(cfg.section.fiber_radius == 0.5);
  CHECK(cfg.length == 1.0);
  CHECK(cfg.h == doctest::Approx(0.5 / 15.0));
  CHECK(cfg.n3 == 64);
  CHECK(cfg.eps == std::vector<double>{0.4, 0.2, 0.1, 0.05});
  CHECK(cfg.f3 == "1");
  CHECK(cfg.solver_tol == 1e-10);
  CHECK(cfg.direct_dof_cap == 200000);

  ConfigFile cf2 = from_text(
      "[problem]\n"
      "family = hom\n"
      "[discretization]\n"
      "n_per_cell = 8\n");
  RunConfig hom = read_run_config(cf2);
  CHECK(hom.eps == std::vector<double>{0.25, 0.125, 0.0625});
  CHECK(hom.n_per_cell == 8);

  // h defaults track the configured fiber radius.
  ConfigFile cf3 = from_text("[geometry]\nfiber_radius = 0.3\n");
  CHECK(read_run_config(cf3).h == doctest::Approx(0.3 / 15.0));
}

TEST_CASE("run config validation failures") {
  auto expect_bad = [](const std::string& text) {
    ConfigFile cf = from_text(text);
    CHECK_THROWS_AS(read_run_config(cf), ConfigError);
  };
  expect_bad("[geometry]\nfiber_radius = 2.0\n");        // r >= outer
  expect_bad("[geometry]\nlength = 0\n");
  expect_bad("[discretization]\nn_per_cell = 4\n");
  expect_bad("[discretization]\neps = 0.1, 0.2\n");      // not decreasing
  expect_bad("[discretization]\neps = 0.1, -0.05\n");
  expect_bad("[load]\nf3 = x3*(1-x3\n");                 // parse error
  expect_bad("[load]\nf3 = y1\n");                       // y in rod scope
  expect_bad("[material]\nkind = isotropic\nmu = -1\n");
  expect_bad("[material]\nkind = cheese\n");
  expect_bad("[solver]\nmethod = magic\n");
  expect_bad("[problem]\nfamily = hom\n[discretization]\neps = 0.3\n");

  // y loads are fine in the hom family.
  ConfigFile ok = from_text("[problem]\nfamily = hom\n[load]\nf3 = y1\n");
  CHECK(read_run_config(ok).f3 == "y1");
}

TEST_CASE("material blocks build the tensor field") {
  ConfigFile cf = from_text(
      "[material]\n"
      "kind = isotropic\n"
      "lambda = 1.5\n"
      "mu = 1.0\n");
  RunConfig cfg = read_run_config(cf);
  ElasticityTensorField field = build_tensor_field(cfg);
  CHECK_FALSE(field.x_dependent());
  CHECK((field.eval({0, 0, 0}, {0, 0}, Region::Fiber) -
         make_isotropic(1.5, 1.0))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((field.eval({0, 0, 0}, {0, 0}, Region::Matrix) -
         make_isotropic(1.5, 1.0))
            .cwiseAbs()
            .maxCoeff() == 0.0);

  ConfigFile cf2 = from_text(
      "[material.fiber]\n"
      "kind = isotropic\n"
      "lambda = 1.0\n"
      "mu = 1.0\n"
      "[material.matrix]\n"
      "kind = orthotropic\n"
      "E1 = 2.6\nE2 = 2.6\nE3 = 2.6\n"
      "nu12 = 0.3\nnu13 = 0.3\nnu23 = 0.3\n"
      "G23 = 1.0\nG13 = 1.0\nG12 = 1.0\n");
  ElasticityTensorField two = build_tensor_field(read_run_config(cf2));
  CHECK((two.eval({0, 0, 0}, {0, 0}, Region::Fiber) -
         make_isotropic(1.0, 1.0))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((two.eval({0, 0, 0}, {0, 0}, Region::Matrix) -
         make_isotropic(1.5, 1.0))
            .cwiseAbs()
            .maxCoeff() <= 1e-12);

  ConfigFile cf3 = from_text(
      "[material]\n"
      "kind = expression\n"
      "lambda = 1.0\n"
      "mu = 1.0\n"
      "factor = 1+x3\n");
  ElasticityTensorField ex = build_tensor_field(read_run_config(cf3));
  CHECK(ex.x3_dependent());
  CHECK_FALSE(ex.y_dependent());
  CHECK((ex.eval({0, 0, 1}, {0, 0}, Region::Fiber) -
         2.0 * make_isotropic(1.0, 1.0))
            .cwiseAbs()
            .maxCoeff() <= 1e-14);

  ConfigFile cf4 = from_text(
      "[material]\n"
      "kind = mandel66\n"
      "values = 5,1,1,0,0,0, 1,5,1,0,0,0, 1,1,5,0,0,0, "
      "0,0,0,4,0,0, 0,0,0,0,4,0, 0,0,0,0,0,4\n");
  ElasticityTensorField m66 = build_tensor_field(read_run_config(cf4));
  // lambda = 1, mu = 1 written out as a Mandel matrix: diagonal blocks
  // 2 mu + lambda on the normal part, 2 mu on the shear part.
  CHECK((m66.eval({0, 0, 0}, {0, 0}, Region::Fiber) -
         make_isotropic(1.0, 2.0))
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("load field evaluates per region") {
  ConfigFile cf = from_text(
      "[load]\n"
      "f1 = x2\n"
      "f2 = -x1\n"
      "f3 = chiM\n");
  RunConfig cfg = read_run_config(cf);
  LoadField load = build_load_field(cfg);
  Eigen::Vector3d v = load.eval({1, 2, 0}, {0, 0}, Region::Matrix);
  CHECK(v == Eigen::Vector3d(2, -1, 1));
  CHECK(load.eval({1, 2, 0}, {0, 0}, Region::Fiber).z() == 0.0);
  CHECK_FALSE(load.uses_y());
}
