#include <catch2/catch_amalgamated.hpp>

#include <veripc/expr.hpp>

#include <random>

#include "oracles.hpp"

using namespace veripc;
using namespace veripc::expr;

namespace {

SymbolTable table_2x1u() { return SymbolTable{2, 1, {}}; }

// Random expression strings over x1, x2, u1; safe everywhere on [-2,2]^3.
std::string random_expr(std::mt19937& rng, int depth) {
  std::uniform_int_distribution<int> leaf(0, 3), op(0, 7);
  std::uniform_real_distribution<double> cval(-2.0, 2.0);
  if (depth == 0) {
    switch (leaf(rng)) {
      case 0: return "x1";
      case 1: return "x2";
      case 2: return "u1";
      default: return std::to_string(cval(rng));
    }
  }
  const std::string a = random_expr(rng, depth - 1);
  const std::string b = random_expr(rng, depth - 1);
  switch (op(rng)) {
    case 0: return "(" + a + ") + (" + b + ")";
    case 1: return "(" + a + ") - (" + b + ")";
    case 2: return "(" + a + ")*(" + b + ")";
    case 3: return "sin(" + a + ")";
    case 4: return "cos(" + a + ")";
    case 5: return "-(" + a + ")";
    case 6: return "(" + a + ")^2";
    default: return "exp(sin(" + a + "))";
  }
}

std::map<std::string, double> random_env(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  return {{"x1", u(rng)}, {"x2", u(rng)}, {"u1", u(rng)}};
}

}  // namespace

TEST_CASE("single variable parses to itself") {
  auto e = parse("x2", table_2x1u());
  CHECK(to_string(e) == "x2");
  CHECK(evaluate(e, {{"x2", 3.5}}) == 3.5);
}

TEST_CASE("precedence shapes the tree as expected") {
  auto e = parse("-x1 + 0.5*sin(x2) * u1", table_2x1u());
  std::map<std::string, double> env{{"x1", 0.7}, {"x2", 1.2}, {"u1", -2.0}};
  const double expected = -0.7 + 0.5 * std::sin(1.2) * -2.0;
  CHECK(evaluate(e, env) == Catch::Approx(expected).epsilon(1e-14));
  // unary minus binds tighter than multiplication
  CHECK(evaluate(parse("-x1^2", table_2x1u()), {{"x1", 3.0}}) ==
        Catch::Approx(-9.0));
  CHECK(evaluate(parse("2*-x1", table_2x1u()), {{"x1", 3.0}}) ==
        Catch::Approx(-6.0));
}

TEST_CASE("non-constant exponent is a syntax error") {
  CHECK_THROWS_AS(parse("x1 ^ x2", table_2x1u()), SyntaxError);
  CHECK_NOTHROW(parse("x1 ^ 2", table_2x1u()));
  CHECK_NOTHROW(parse("x1 ^ (-2)", table_2x1u()));
  CHECK_NOTHROW(parse("x1 ^ -2", table_2x1u()));
}

TEST_CASE("parse failures carry positions") {
  try {
    parse("x1 + ", table_2x1u());
    FAIL("expected SyntaxError");
  } catch (const SyntaxError& e) {
    CHECK(e.position == 5);
  }
  CHECK_THROWS_AS(parse("", table_2x1u()), SyntaxError);
  CHECK_THROWS_AS(parse("x1 x2", table_2x1u()), SyntaxError);
  CHECK_THROWS_AS(parse("foo(x1)", table_2x1u()), SyntaxError);
  CHECK_THROWS_AS(parse("x3", table_2x1u()), UnknownSymbol);
  CHECK_THROWS_AS(parse("y1", table_2x1u()), UnknownSymbol);
}

TEST_CASE("evaluation basics and domain errors") {
  CHECK(evaluate(parse("x1+1", table_2x1u()), {{"x1", 2.0}}) == 3.0);
  CHECK(evaluate(parse("sin(0)", table_2x1u()), {}) == 0.0);
  CHECK_THROWS_AS(evaluate(parse("log(x1)", table_2x1u()), {{"x1", -1.0}}), EvalError);
  CHECK_THROWS_AS(evaluate(parse("sqrt(x1)", table_2x1u()), {{"x1", -4.0}}), EvalError);
  CHECK_THROWS_AS(evaluate(parse("x1/x2", table_2x1u()), {{"x1", 1.0}, {"x2", 0.0}}),
                  EvalError);
  CHECK_THROWS_AS(evaluate(parse("x1+x2", table_2x1u()), {{"x1", 1.0}}), EvalError);
}

TEST_CASE("declared parameters resolve and substitute") {
  SymbolTable t{2, 1, {"gamma"}};
  auto e = parse("gamma * x1", t);
  CHECK(evaluate(e, {{"gamma", 2.5}, {"x1", 2.0}}) == 5.0);
  auto s = substitute_params(e, {{"gamma", 2.5}});
  CHECK(evaluate(s, {{"x1", 2.0}}) == 5.0);
}

TEST_CASE("printer round-trips through the parser") {
  std::mt19937 rng(123);
  for (int trial = 0; trial < 100; ++trial) {
    auto e = parse(random_expr(rng, 3), table_2x1u());
    auto r = parse(to_string(e), table_2x1u());
    for (int i = 0; i < 5; ++i) {
      auto env = random_env(rng);
      CHECK(evaluate(e, env) == Catch::Approx(evaluate(r, env)).margin(1e-12));
    }
  }
}

TEST_CASE("derivative structure on simple cases") {
  CHECK(to_string(differentiate(parse("x1*x2", table_2x1u()), "x1")) == "x2");
  CHECK(to_string(differentiate(parse("sin(x1)", table_2x1u()), "x1")) == "cos(x1)");
  CHECK(to_string(differentiate(parse("x1", table_2x1u()), "x2")) == "0");
  CHECK_THROWS_AS(differentiate(parse("abs(x1)", table_2x1u()), "x1"), UnsupportedOp);
}

TEST_CASE("derivatives match central differences") {
  std::mt19937 rng(456);
  int points = 0;
  for (int trial = 0; trial < 25; ++trial) {
    auto e = parse(random_expr(rng, 3), table_2x1u());
    Expression d;
    try {
      d = differentiate(e, "x1");
    } catch (const UnsupportedOp&) {
      continue;
    }
    for (int i = 0; i < 4; ++i) {
      auto env = random_env(rng);
      const double sym = evaluate(d, env);
      const double fd = oracle::central_diff(
          [&](double v) {
            auto shifted = env;
            shifted["x1"] = v;
            return evaluate(e, shifted);
          },
          env["x1"]);
      CHECK(std::abs(sym - fd) <= 1e-5 * std::max(1.0, std::abs(sym)));
      ++points;
    }
  }
  CHECK(points >= 100);

  // targeted cases with restricted domains
  SymbolTable t = table_2x1u();
  const struct {
    const char* f;
    double at;
  } cases[] = {{"log(x1)", 2.0}, {"sqrt(x1)", 3.0}, {"tan(x1)", 0.4},
               {"x1^3", 1.2},    {"1/x1", 2.0},     {"x2/(1 + x1^2)", 0.8}};
  for (const auto& c : cases) {
    auto e = parse(c.f, t);
    auto d = differentiate(e, "x1");
    std::map<std::string, double> env{{"x1", c.at}, {"x2", 1.3}};
    const double sym = evaluate(d, env);
    const double fd = oracle::central_diff(
        [&](double v) {
          auto shifted = env;
          shifted["x1"] = v;
          return evaluate(e, shifted);
        },
        c.at);
    CHECK(sym == Catch::Approx(fd).margin(1e-5 * std::max(1.0, std::abs(sym))));
  }
}

TEST_CASE("differentiation is linear") {
  std::mt19937 rng(789);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = coef(rng);
    const std::string s1 = random_expr(rng, 2), s2 = random_expr(rng, 2);
    auto combo = parse("(" + std::to_string(a) + ")*(" + s1 + ") + (" + s2 + ")",
                       table_2x1u());
    auto e1 = parse(s1, table_2x1u()), e2 = parse(s2, table_2x1u());
    Expression dc, d1, d2;
    try {
      dc = differentiate(combo, "x2");
      d1 = differentiate(e1, "x2");
      d2 = differentiate(e2, "x2");
    } catch (const UnsupportedOp&) {
      continue;
    }
    for (int i = 0; i < 5; ++i) {
      auto env = random_env(rng);
      CHECK(evaluate(dc, env) ==
            Catch::Approx(a * evaluate(d1, env) + evaluate(d2, env)).margin(1e-9));
    }
  }
}

TEST_CASE("double integrator jacobian") {
  SymbolTable t{2, 1, {}};
  VectorField f({parse("x2", t), parse("u1", t)}, 2, 1);
  Eigen::VectorXd x(2), u(1);
  x << 0.3, -0.7;
  u << 0.2;
  Eigen::MatrixXd Jx = f.jac_x_at(x, u);
  Eigen::MatrixXd Ju = f.jac_u_at(x, u);
  Eigen::MatrixXd Jx_ref(2, 2);
  Jx_ref << 0, 1, 0, 0;
  Eigen::MatrixXd Ju_ref(2, 1);
  Ju_ref << 0, 1;
  CHECK(Jx.isApprox(Jx_ref, 1e-12));
  CHECK(Ju.isApprox(Ju_ref, 1e-12));
}

TEST_CASE("linear field jacobian is its coefficient matrices") {
  std::mt19937 rng(1001);
  std::uniform_int_distribution<int> coef(-4, 4);
  SymbolTable t{3, 2, {}};
  Eigen::MatrixXd Ac(3, 3), Bc(3, 2);
  std::vector<Expression> comps;
  for (int i = 0; i < 3; ++i) {
    std::string s = "0";
    for (int j = 0; j < 3; ++j) {
      Ac(i, j) = coef(rng);
      s += " + (" + std::to_string(Ac(i, j)) + ")*x" + std::to_string(j + 1);
    }
    for (int j = 0; j < 2; ++j) {
      Bc(i, j) = coef(rng);
      s += " + (" + std::to_string(Bc(i, j)) + ")*u" + std::to_string(j + 1);
    }
    comps.push_back(parse(s, t));
  }
  VectorField f(std::move(comps), 3, 2);
  std::uniform_real_distribution<double> pt(-2.0, 2.0);
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd x(3), u(2);
    x << pt(rng), pt(rng), pt(rng);
    u << pt(rng), pt(rng);
    CHECK(f.jac_x_at(x, u).isApprox(Ac, 1e-12));
    CHECK(f.jac_u_at(x, u).isApprox(Bc, 1e-12));
    CHECK(f.eval(x, u).isApprox(Ac * x + Bc * u, 1e-12));
  }
}

TEST_CASE("closed-loop jacobian agrees with finite differences") {
  SymbolTable t{2, 1, {}};
  VectorField f({parse("x2 + 0.1*sin(x1)", t), parse("u1 - 0.2*x2^2", t)}, 2, 1);
  std::mt19937 rng(2025);
  std::uniform_real_distribution<double> pt(-1.0, 1.0);
  Eigen::RowVectorXd F(2);
  F << -0.5, -1.1;
  const double G = 0.3;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd x(2);
    x << pt(rng), pt(rng);
    Eigen::VectorXd u(1);
    u << F * x + Eigen::VectorXd::Constant(1, G);
    Eigen::MatrixXd Jcl = f.jac_x_at(x, u) + f.jac_u_at(x, u) * F;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const double fd = oracle::central_diff(
            [&](double v) {
              Eigen::VectorXd xs = x;
              xs[j] = v;
              Eigen::VectorXd us(1);
              us << F * xs + Eigen::VectorXd::Constant(1, G);
              return f.eval(xs, us)[i];
            },
            x[j]);
        CHECK(Jcl(i, j) == Catch::Approx(fd).margin(1e-5));
      }
  }
}

TEST_CASE("jacobian of a sum field is the sum of jacobians") {
  SymbolTable t{2, 1, {}};
  VectorField f1({parse("sin(x1)*x2", t), parse("u1*x1", t)}, 2, 1);
  VectorField f2({parse("x1^2", t), parse("cos(x2)", t)}, 2, 1);
  VectorField fsum({parse("sin(x1)*x2 + x1^2", t), parse("u1*x1 + cos(x2)", t)}, 2, 1);
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> pt(-1.5, 1.5);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd x(2), u(1);
    x << pt(rng), pt(rng);
    u << pt(rng);
    CHECK(fsum.jac_x_at(x, u).isApprox(f1.jac_x_at(x, u) + f2.jac_x_at(x, u), 1e-10));
    CHECK(fsum.jac_u_at(x, u).isApprox(f1.jac_u_at(x, u) + f2.jac_u_at(x, u), 1e-10));
  }
}

TEST_CASE("compiled evaluation matches the tree walker") {
  std::mt19937 rng(64);
  SymbolTable t = table_2x1u();
  for (int trial = 0; trial < 30; ++trial) {
    auto e1 = parse(random_expr(rng, 3), t);
    auto e2 = parse(random_expr(rng, 3), t);
    VectorField f({e1, e2}, 2, 1);
    for (int i = 0; i < 5; ++i) {
      auto env = random_env(rng);
      Eigen::VectorXd x(2), u(1);
      x << env["x1"], env["x2"];
      u << env["u1"];
      Eigen::VectorXd v = f.eval(x, u);
      CHECK(v[0] == Catch::Approx(evaluate(e1, env)).margin(1e-13));
      CHECK(v[1] == Catch::Approx(evaluate(e2, env)).margin(1e-13));
    }
  }
}

TEST_CASE("vector field validates dimensions") {
  SymbolTable t{2, 1, {}};
  CHECK_THROWS_AS(VectorField({parse("x1", t)}, 2, 1), DimensionMismatch);
  VectorField f({parse("x2", t), parse("u1", t)}, 2, 1);
  CHECK_THROWS_AS(f.eval(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(1)),
                  DimensionMismatch);
}
