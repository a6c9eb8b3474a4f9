#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>
#include <vector>

#include "ccmnet/polynomial.hpp"
#include "doctest.h"

using namespace ccmnet;

namespace {

Variable X(int node, int comp) { return {node, Variable::Kind::State, comp}; }
Variable U(int node, int comp) { return {node, Variable::Kind::Input, comp}; }

double eval_at(const Polynomial& p, const std::map<Variable, double>& pt) {
    return p.eval([&](const Variable& v) -> const double* {
        auto it = pt.find(v);
        return it == pt.end() ? nullptr : &it->second;
    });
}

}  // namespace

TEST_CASE("poly_eval basics") {
    auto x = Polynomial::variable(X(1, 1));
    auto p = x * x + 2.0 * x + Polynomial(1.0);
    CHECK(eval_at(p, {{X(1, 1), 3.0}}) == doctest::Approx(16.0));
    CHECK(eval_at(Polynomial(5.0), {}) == 5.0);
    auto q = Polynomial::variable(X(1, 1)) * Polynomial::variable(X(2, 2));
    CHECK(eval_at(q, {{X(1, 1), 2.0}, {X(2, 2), -3.0}}) == doctest::Approx(-6.0));
}

TEST_CASE("poly_eval reports unbound variables") {
    auto p = Polynomial::variable(X(1, 1)) + Polynomial::variable(X(2, 1));
    CHECK_THROWS_AS(eval_at(p, {{X(1, 1), 1.0}}), std::invalid_argument);
}

TEST_CASE("poly_diff") {
    auto x = Polynomial::variable(X(1, 1));
    auto y = Polynomial::variable(X(1, 2));
    CHECK((x.pow(3)).diff(X(1, 1)) == 3.0 * x * x);
    CHECK((y * y).diff(X(1, 1)).isZero());
    CHECK((x * y + x).diff(X(1, 1)) == y + Polynomial(1.0));
}

TEST_CASE("derivative matches central finite differences on random points") {
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    auto x = Polynomial::variable(X(1, 1));
    auto y = Polynomial::variable(X(2, 1));
    auto p = x.pow(3) * y - 2.0 * x * y * y + 0.5 * y + Polynomial(3.0);
    auto dp = p.diff(X(1, 1));
    for (int trial = 0; trial < 50; ++trial) {
        double xv = dist(rng), yv = dist(rng);
        const double h = 1e-5;
        double plus = eval_at(p, {{X(1, 1), xv + h}, {X(2, 1), yv}});
        double minus = eval_at(p, {{X(1, 1), xv - h}, {X(2, 1), yv}});
        double fd = (plus - minus) / (2 * h);
        double exact = eval_at(dp, {{X(1, 1), xv}, {X(2, 1), yv}});
        CHECK(std::fabs(fd - exact) <= 1e-6 * std::max(1.0, std::fabs(exact)));
    }
}

TEST_CASE("arithmetic is exact on integer fixtures") {
    auto x = Polynomial::variable(X(1, 1));
    auto y = Polynomial::variable(X(2, 1));
    auto a = 3.0 * x * x - 2.0 * y + Polynomial(7.0);
    auto b = x * y + 4.0 * x;
    CHECK((a + b) - b == a);
    CHECK(a * b == b * a);
    CHECK((a * b).diff(X(1, 1)) == a.diff(X(1, 1)) * b + a * b.diff(X(1, 1)));
    CHECK((a - a).isZero());
}

TEST_CASE("jacobian") {
    // F = (-x - x^3 + y^2; 0)
    auto x = Polynomial::variable(X(1, 1));
    auto y = Polynomial::variable(X(1, 2));
    PolyMatrix F(2, 1);
    F.at(0, 0) = -x - x.pow(3) + y * y;
    F.at(1, 0) = Polynomial();
    auto J = jacobian(F, {X(1, 1), X(1, 2)});
    CHECK(J.at(0, 0) == Polynomial(-1.0) - 3.0 * x * x);
    CHECK(J.at(0, 1) == 2.0 * y);
    CHECK(J.at(1, 0).isZero());
    CHECK(J.at(1, 1).isZero());

    // linear F = Mx -> constant matrix
    PolyMatrix L(2, 1);
    L.at(0, 0) = 2.0 * x - y;
    L.at(1, 0) = 3.0 * y;
    auto JL = jacobian(L, {X(1, 1), X(1, 2)});
    CHECK(JL.at(0, 0) == Polynomial(2.0));
    CHECK(JL.at(0, 1) == Polynomial(-1.0));
    CHECK(JL.at(1, 0).isZero());
    CHECK(JL.at(1, 1) == Polynomial(3.0));

    // F = (x1 x2; x2^2)
    auto x1 = Polynomial::variable(X(1, 1));
    auto x2 = Polynomial::variable(X(2, 1));
    PolyMatrix G(2, 1);
    G.at(0, 0) = x1 * x2;
    G.at(1, 0) = x2 * x2;
    auto JG = jacobian(G, {X(1, 1), X(2, 1)});
    CHECK(JG.at(0, 0) == x2);
    CHECK(JG.at(0, 1) == x1);
    CHECK(JG.at(1, 0).isZero());
    CHECK(JG.at(1, 1) == 2.0 * x2);
}

TEST_CASE("jacobian chain rule on composed affine maps") {
    std::mt19937 rng(3);
    std::uniform_int_distribution<int> coef(-3, 3);
    std::vector<Variable> vars{X(1, 1), X(2, 1)};
    for (int trial = 0; trial < 20; ++trial) {
        double a = coef(rng), b = coef(rng), c = coef(rng), d = coef(rng);
        double e = coef(rng), f = coef(rng), g = coef(rng), h = coef(rng);
        auto x1 = Polynomial::variable(vars[0]);
        auto x2 = Polynomial::variable(vars[1]);
        // inner affine map y = M1 x, outer y -> M2 y; composition jacobian = M2*M1
        PolyMatrix inner(2, 1);
        inner.at(0, 0) = a * x1 + b * x2;
        inner.at(1, 0) = c * x1 + d * x2;
        PolyMatrix composed(2, 1);
        composed.at(0, 0) = e * inner.at(0, 0) + f * inner.at(1, 0);
        composed.at(1, 0) = g * inner.at(0, 0) + h * inner.at(1, 0);
        auto J = jacobian(composed, vars);
        CHECK(eval_at(J.at(0, 0), {}) == doctest::Approx(e * a + f * c));
        CHECK(eval_at(J.at(0, 1), {}) == doctest::Approx(e * b + f * d));
        CHECK(eval_at(J.at(1, 0), {}) == doctest::Approx(g * a + h * c));
        CHECK(eval_at(J.at(1, 1), {}) == doctest::Approx(g * b + h * d));
    }
}

TEST_CASE("directional_matrix_derivative") {
    auto x = Polynomial::variable(X(1, 1));

    // constant W -> zero
    PolyMatrix Wc(2, 2);
    Wc.at(0, 0) = Polynomial(2.0);
    Wc.at(1, 1) = Polynomial(3.0);
    PolyMatrix f2(2, 1);
    f2.at(0, 0) = x;
    f2.at(1, 0) = Polynomial(1.0);
    auto Z = directional_matrix_derivative(Wc, f2, {X(1, 1), X(1, 2)});
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) CHECK(Z.at(r, c).isZero());

    // W=[x^2], f=(1) -> [2x]
    PolyMatrix W1(1, 1);
    W1.at(0, 0) = x * x;
    PolyMatrix f1(1, 1);
    f1.at(0, 0) = Polynomial(1.0);
    auto D1 = directional_matrix_derivative(W1, f1, {X(1, 1)});
    CHECK(D1.at(0, 0) == 2.0 * x);

    // W=diag(x1^2, x2^2), f=(x2; x1) -> diag(2 x1 x2, 2 x2 x1)
    auto x1 = Polynomial::variable(X(1, 1));
    auto x2 = Polynomial::variable(X(2, 1));
    PolyMatrix W2(2, 2);
    W2.at(0, 0) = x1 * x1;
    W2.at(1, 1) = x2 * x2;
    PolyMatrix fc(2, 1);
    fc.at(0, 0) = x2;
    fc.at(1, 0) = x1;
    auto D2 = directional_matrix_derivative(W2, fc, {X(1, 1), X(2, 1)});
    CHECK(D2.at(0, 0) == 2.0 * x1 * x2);
    CHECK(D2.at(1, 1) == 2.0 * x1 * x2);
    CHECK(D2.at(0, 1).isZero());

    CHECK_THROWS(directional_matrix_derivative(W2, f1, {X(1, 1), X(2, 1)}));
}

TEST_CASE("parser round trip") {
    auto p = parse_polynomial("-x[1][1] - x[1][1]^3 + x[1][2]^2");
    auto x = Polynomial::variable(X(1, 1));
    auto y = Polynomial::variable(X(1, 2));
    CHECK(p == -x - x.pow(3) + y * y);

    auto q = parse_polynomial("0.01*(x[1][1]^3 - 2*x[2][1]^3 + x[3][1]^3)");
    CHECK(eval_at(q, {{X(1, 1), 1.0}, {X(2, 1), 1.0}, {X(3, 1), 2.0}}) ==
          doctest::Approx(0.01 * (1 - 2 + 8)));

    auto r = parse_polynomial("2.5e-3 * u[2][1]");
    CHECK(r == 0.0025 * Polynomial::variable(U(2, 1)));

    CHECK_THROWS(parse_polynomial("x[1]"));
    CHECK_THROWS(parse_polynomial("x[1][1] +"));
    CHECK_THROWS(parse_polynomial("y[1][1]"));
}

TEST_CASE("canonical term ordering is graded") {
    auto x = Polynomial::variable(X(1, 1));
    auto y = Polynomial::variable(X(1, 2));
    auto p = x.pow(2) + y + Polynomial(1.0) + x * y * y;
    std::vector<int> degrees;
    for (const auto& [m, c] : p.terms()) {
        int d = 0;
        for (const auto& [v, e] : m) d += e;
        degrees.push_back(d);
    }
    CHECK(std::is_sorted(degrees.begin(), degrees.end()));
}
