#include <spraymetric/jets.hpp>

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

using namespace spraymetric;
using Catch::Approx;

namespace {

// Monomial representation of a polynomial in `dim` variables, used as an
// exact oracle for jet arithmetic.
struct Term {
    double coeff;
    std::vector<int> powers;
};

double eval_poly_derivative(const std::vector<Term>& poly, const std::vector<double>& z, const std::vector<int>& wrt) {
    double total = 0.0;
    for (const auto& t : poly) {
        std::vector<int> p = t.powers;
        double c = t.coeff;
        for (int a : wrt) {
            c *= p[a];
            p[a] -= 1;
            if (c == 0.0) break;
        }
        if (c == 0.0) continue;
        for (std::size_t a = 0; a < z.size(); ++a) c *= std::pow(z[a], p[a]);
        total += c;
    }
    return total;
}

Jet eval_poly_jet(const std::vector<Term>& poly, const std::vector<Jet>& vars) {
    Jet sum = Jet::constant(0.0, vars[0].dim(), vars[0].order(), vars[0].directions());
    for (const auto& t : poly) {
        Jet m = Jet::constant(t.coeff, vars[0].dim(), vars[0].order(), vars[0].directions());
        for (std::size_t a = 0; a < vars.size(); ++a)
            for (int k = 0; k < t.powers[a]; ++k) m = m * vars[a];
        sum += m;
    }
    return sum;
}

}  // namespace

TEST_CASE("product rule on seeded first-order jets", "[jets]") {
    Jet a = Jet::variable(2.0, 0, 2, 1);
    Jet b = Jet::variable(3.0, 1, 2, 1);
    Jet c = jet_arith(a, b, ArithOp::mul);
    CHECK(c.value() == 6.0);
    CHECK(c.d(0) == 3.0);
    CHECK(c.d(1) == 2.0);
}

TEST_CASE("x / x is the constant one", "[jets]") {
    Jet x = Jet::variable(5.0, 0, 1, 2);
    Jet q = jet_arith(x, x, ArithOp::div);
    CHECK(q.value() == Approx(1.0).margin(1e-15));
    CHECK(q.d(0) == Approx(0.0).margin(1e-15));
    CHECK(q.d2(0, 0) == Approx(0.0).margin(1e-15));
}

TEST_CASE("x^2 y at (1,2)", "[jets]") {
    Jet x = Jet::variable(1.0, 0, 2, 2);
    Jet y = Jet::variable(2.0, 1, 2, 2);
    Jet f = x * x * y;
    CHECK(f.value() == 2.0);
    CHECK(f.d(0) == 4.0);
    CHECK(f.d(1) == 1.0);
    CHECK(f.d2(0, 0) == 4.0);
    CHECK(f.d2(0, 1) == 2.0);
    CHECK(f.d2(1, 0) == 2.0);
    CHECK(f.d2(1, 1) == 0.0);
}

TEST_CASE("sqrt of u^2 + v^2 at (3,4)", "[jets]") {
    Jet u = Jet::variable(3.0, 0, 2, 2);
    Jet v = Jet::variable(4.0, 1, 2, 2);
    Jet r = sqrt(u * u + v * v);
    CHECK(r.value() == Approx(5.0));
    CHECK(r.d(0) == Approx(0.6));
    CHECK(r.d(1) == Approx(0.8));
    // (delta - l l)/r
    CHECK(r.d2(0, 0) == Approx((1.0 - 0.36) / 5.0));
    CHECK(r.d2(0, 1) == Approx(-0.48 / 5.0));
}

TEST_CASE("sin at zero", "[jets]") {
    Jet x = Jet::variable(0.0, 0, 1, 2);
    Jet s = sin(x);
    CHECK(s.value() == 0.0);
    CHECK(s.d(0) == 1.0);
    CHECK(s.d2(0, 0) == 0.0);
}

TEST_CASE("sqrt(x^2) equals x for x = 2", "[jets]") {
    Jet x = Jet::variable(2.0, 0, 1, 3);
    Jet s = sqrt(x * x);
    CHECK(std::abs(s.value() - 2.0) < 1e-14);
    CHECK(std::abs(s.d(0) - 1.0) < 1e-14);
    CHECK(std::abs(s.d2(0, 0)) < 1e-14);
    CHECK(std::abs(s.d3(0, 0, 0)) < 1e-14);
}

TEST_CASE("jet errors", "[jets]") {
    Jet x = Jet::variable(0.0, 0, 2, 1);
    Jet y = Jet::variable(1.0, 1, 2, 1);
    CHECK_THROWS_AS(y / x, DivisionByZero);
    CHECK_THROWS_AS(x + Jet::variable(1.0, 0, 3, 1), DimensionMismatch);
    CHECK_THROWS_AS(x * Jet::variable(1.0, 0, 2, 2), DimensionMismatch);
    CHECK_THROWS_AS(sqrt(Jet::constant(1e-13, 2, 1)), DomainError);
    CHECK_THROWS_AS(log(Jet::constant(-1.0, 2, 1)), DomainError);
    CHECK_THROWS_AS(atan2(x, x), DomainError);
}

TEST_CASE("third-order block only along declared directions", "[jets]") {
    auto dirs = DirectionSet::fibre(2);  // variables 2, 3
    std::vector<Jet> z;
    for (int a = 0; a < 4; ++a) z.push_back(Jet::variable(0.5 + a, a, 4, 3, dirs));
    Jet f = z[0] * z[2] * z[3] * z[3];
    CHECK(f.d3(2, 3, 3) == Approx(2.0 * z[0].value()));
    CHECK(f.tracks_third(3));
    CHECK_FALSE(f.tracks_third(0));
    CHECK_THROWS_AS(f.d3(0, 2, 3), DomainError);
}

TEST_CASE("elementary functions match their closed-form derivatives", "[jets]") {
    const double t = 0.7;
    Jet x = Jet::variable(t, 0, 1, 3);
    struct Case {
        Jet j;
        double f0, f1, f2, f3;
    };
    const double e = std::exp(t);
    std::vector<Case> cases{
        {exp(x), e, e, e, e},
        {log(x), std::log(t), 1 / t, -1 / (t * t), 2 / (t * t * t)},
        {cos(x), std::cos(t), -std::sin(t), -std::cos(t), std::sin(t)},
        {pow(x, 3.0), t * t * t, 3 * t * t, 6 * t, 6},
        {pow(x, -1.0), 1 / t, -1 / (t * t), 2 / (t * t * t), -6 / (t * t * t * t)},
        {atan2(x, Jet::constant(1.0, 1, 3)), std::atan(t), 1 / (1 + t * t), -2 * t / std::pow(1 + t * t, 2),
         (6 * t * t - 2) / std::pow(1 + t * t, 3)},
    };
    for (const auto& c : cases) {
        CHECK(c.j.value() == Approx(c.f0).epsilon(1e-13));
        CHECK(c.j.d(0) == Approx(c.f1).epsilon(1e-13));
        CHECK(c.j.d2(0, 0) == Approx(c.f2).epsilon(1e-13));
        CHECK(c.j.d3(0, 0, 0) == Approx(c.f3).epsilon(1e-13));
    }
}

TEST_CASE("atan2 branch away from the x axis", "[jets]") {
    // angle of (x, y) = (-0.2, 1.5); d/dx = -y/r^2, d/dy = x/r^2
    Jet x = Jet::variable(-0.2, 0, 2, 2);
    Jet y = Jet::variable(1.5, 1, 2, 2);
    Jet a = atan2(y, x);
    const double r2 = 0.04 + 2.25;
    CHECK(a.value() == Approx(std::atan2(1.5, -0.2)));
    CHECK(a.d(0) == Approx(-1.5 / r2));
    CHECK(a.d(1) == Approx(-0.2 / r2));
    CHECK(a.d2(0, 0) == Approx(2 * (-0.2) * 1.5 / (r2 * r2)));
}

TEST_CASE("integer powers of zero", "[jets]") {
    Jet x = Jet::variable(0.0, 0, 1, 3);
    Jet p = pow(x, 2.0);
    CHECK(p.value() == 0.0);
    CHECK(p.d2(0, 0) == 2.0);
    CHECK(p.d3(0, 0, 0) == 0.0);
    CHECK_THROWS_AS(pow(x, -1.0), DomainError);
    CHECK_THROWS_AS(pow(Jet::constant(-1.0, 1, 1), 0.5), DomainError);
}

TEST_CASE("partial lowers the order", "[jets]") {
    std::vector<Jet> z;
    for (int a = 0; a < 2; ++a) z.push_back(Jet::variable(1.0 + a, a, 2, 3, DirectionSet::all(2)));
    Jet f = z[0] * z[0] * z[0] * z[1];  // x^3 y at (1,2)
    Jet fx = f.partial(0);               // 3 x^2 y
    CHECK(fx.order() == 2);
    CHECK(fx.value() == Approx(6.0));
    CHECK(fx.d(0) == Approx(12.0));
    CHECK(fx.d(1) == Approx(3.0));
    CHECK(fx.d2(0, 0) == Approx(12.0));
    CHECK(fx.d2(0, 1) == Approx(6.0));
}

TEST_CASE("jets are exact on random cubic polynomials", "[jets][property]") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    std::uniform_int_distribution<int> pw(0, 3);
    const int dim = 4;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Term> poly;
        for (int t = 0; t < 6; ++t) {
            Term term{coef(rng), std::vector<int>(dim, 0)};
            int budget = 3;
            for (int a = 0; a < dim && budget > 0; ++a) {
                const int k = std::min(budget, pw(rng));
                term.powers[a] = k;
                budget -= k;
            }
            poly.push_back(term);
        }
        std::vector<double> z(dim);
        for (auto& v : z) v = coef(rng);
        std::vector<Jet> vars;
        for (int a = 0; a < dim; ++a) vars.push_back(Jet::variable(z[a], a, dim, 3, DirectionSet::all(dim)));
        const Jet j = eval_poly_jet(poly, vars);
        CHECK(std::abs(j.value() - eval_poly_derivative(poly, z, {})) < 1e-12);
        for (int a = 0; a < dim; ++a) {
            CHECK(std::abs(j.d(a) - eval_poly_derivative(poly, z, {a})) < 1e-12);
            for (int b = 0; b < dim; ++b) {
                CHECK(std::abs(j.d2(a, b) - eval_poly_derivative(poly, z, {a, b})) < 1e-12);
                for (int c = 0; c < dim; ++c)
                    CHECK(std::abs(j.d3(a, b, c) - eval_poly_derivative(poly, z, {a, b, c})) < 1e-12);
            }
        }
    }
}

TEST_CASE("Hessian contracted with a direction matches the 1-D restriction", "[jets][property]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto f = [](const std::vector<Jet>& v) { return sqrt(v[0] * v[0] + v[1] * v[1] + 0.5) * sin(v[2]) + exp(v[0] * v[1]); };
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> p(3), d(3);
        for (int a = 0; a < 3; ++a) {
            p[a] = u(rng);
            d[a] = u(rng);
        }
        std::vector<Jet> full;
        for (int a = 0; a < 3; ++a) full.push_back(Jet::variable(p[a], a, 3, 2));
        const Jet J = f(full);
        double contracted = 0.0;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) contracted += J.d2(a, b) * d[a] * d[b];
        const Jet t = Jet::variable(0.0, 0, 1, 2);
        std::vector<Jet> line;
        for (int a = 0; a < 3; ++a) line.push_back(t * d[a] + p[a]);
        CHECK(std::abs(f(line).d2(0, 0) - contracted) < 1e-10);
    }
}

TEST_CASE("finite-difference partials of analytic functions", "[jets][fd]") {
    auto f = [](std::span<const double> z) { return std::sin(z[0]) * std::exp(z[1]); };
    const std::vector<double> z{0.3, -0.4};
    const std::vector<int> i0{0}, i01{0, 1}, i001{0, 0, 1};
    CHECK(fd_partial(f, z, i0) == Approx(std::cos(0.3) * std::exp(-0.4)).epsilon(1e-8));
    CHECK(fd_partial(f, z, i01) == Approx(std::cos(0.3) * std::exp(-0.4)).epsilon(1e-7));
    CHECK(fd_partial(f, z, i001) == Approx(-std::sin(0.3) * std::exp(-0.4)).epsilon(1e-5));
    auto constant = [](std::span<const double>) { return 4.0; };
    CHECK(fd_partial(constant, z, i001) == 0.0);
    const std::vector<int> too_many{0, 0, 0, 0};
    CHECK_THROWS_AS(fd_partial(f, z, too_many), DomainError);
}
