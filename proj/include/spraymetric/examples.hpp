#pragma once

// Built-in sprays and certificates: the spiral spray on R^3 and the circle
// spray on R^2 with their local Finsler functions, flat and Riemannian
// baselines, the spiral path-space chart (xi, eta, nu, vartheta) with its
// symplectic form, and identity checks relating these objects.

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "metrizability.hpp"

namespace spraymetric {

// Sprays ------------------------------------------------------------------------

inline FieldDef spiral_spray() {
    return parse_field("G1 = v*sqrt(u^2+v^2+w^2)/2; G2 = -u*sqrt(u^2+v^2+w^2)/2; G3 = 0", FieldKind::spray, 3);
}

inline FieldDef circle_spray() {
    return parse_field("G1 = v*sqrt(u^2+v^2)/2; G2 = -u*sqrt(u^2+v^2)/2", FieldKind::spray, 2);
}

inline FieldDef flat_spray(int n) {
    return FieldDef(FieldKind::spray, n, {}, std::vector<ExprPtr>(static_cast<std::size_t>(n), expr::num(0.0)));
}

namespace detail {

/// Solves g X = c for jet-valued g, c by Gauss-Jordan elimination with
/// partial pivoting on the values.
inline std::vector<Jet> jet_solve(std::vector<std::vector<Jet>> g, std::vector<Jet> c) {
    const std::size_t n = c.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(g[r][col].value()) > std::abs(g[piv][col].value())) piv = r;
        if (std::abs(g[piv][col].value()) < 1e-14) throw MetricError("metric is singular");
        std::swap(g[piv], g[col]);
        std::swap(c[piv], c[col]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const Jet f = g[r][col] / g[col][col];
            for (std::size_t k = col; k < n; ++k) g[r][k] -= f * g[col][k];
            c[r] -= f * c[col];
        }
    }
    for (std::size_t r = 0; r < n; ++r) c[r] = c[r] / g[r][r];
    return c;
}

}  // namespace detail

/// Geodesic spray of the Riemannian metric g_ij(x):
/// Gamma^i = 1/2 g^il [lj,k] y^j y^k, with Christoffel symbols from
/// symbolic derivatives of g and the inverse metric solved on jets.
inline FieldDef riemannian_spray(const FieldDef& g) {
    require_kind(g, FieldKind::sym2tensor, "metric");
    const int n = g.n();
    detail::check_metric_probes(g, true);
    using namespace expr;
    // c_l = (d_j g_lk - 1/2 d_l g_jk) y^j y^k
    std::vector<ExprPtr> c(n, num(0.0));
    for (int l = 0; l < n; ++l)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const ExprPtr t = sub(differentiate(g.expr(sym_slot(l, k, n)), j),
                                      mul(num(0.5), differentiate(g.expr(sym_slot(j, k, n)), l)));
                c[l] = add(c[l], mul(t, mul(var(n + j), var(n + k))));
            }
    std::vector<ExprPtr> gij;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) gij.push_back(g.expr(sym_slot(i, j, n)));
    std::vector<ExprPtr> comps;
    for (int i = 0; i < n; ++i) {
        comps.push_back(native([gij, c, n, i](std::span<const Jet> vars) {
            std::vector<std::vector<Jet>> gm(n);
            std::vector<Jet> rhs;
            for (int r = 0; r < n; ++r) {
                for (int s = 0; s < n; ++s) gm[r].push_back(evaluate(gij[r * n + s], vars));
                rhs.push_back(evaluate(c[r], vars));
            }
            return detail::jet_solve(std::move(gm), std::move(rhs))[i] * 0.5;
        }, "riemannian_G" + std::to_string(i + 1)));
    }
    return FieldDef(FieldKind::spray, n, {}, std::move(comps));
}

/// Built-in spray by name: spiral (n = 3), circle (n = 2) or flat.
inline FieldDef builtin_spray(const std::string& name, int n = 0) {
    if (name == "spiral") {
        if (n != 0 && n != 3) throw DimensionMismatch("the spiral spray lives on R^3");
        return spiral_spray();
    }
    if (name == "circle") {
        if (n != 0 && n != 2) throw DimensionMismatch("the circle spray lives on R^2");
        return circle_spray();
    }
    if (name == "flat") return flat_spray(n == 0 ? 3 : n);
    throw ConfigError("unknown built-in spray '" + name + "'");
}

inline bool is_builtin_spray(const std::string& name) { return name == "spiral" || name == "circle" || name == "flat"; }

// Certificates ------------------------------------------------------------------

/// lambda + ((y - y0) u - (x - x0) v) / 2 on R^3.  The centre only changes F
/// by a closed basic 1-form contracted with y.
inline FieldDef spiral_finsler(double x0 = 0.0, double y0 = 0.0) {
    using namespace expr;
    const ExprPtr lam = call(Func::sqrt, {add(add(pow(var(3), 2), pow(var(4), 2)), pow(var(5), 2))});
    const ExprPtr lin = mul(num(0.5), sub(mul(sub(var(1), num(y0)), var(3)), mul(sub(var(0), num(x0)), var(4))));
    return FieldDef(FieldKind::scalar, 3, {"F"}, {add(lam, lin)});
}

inline FieldDef circle_finsler() { return parse_field("F = sqrt(u^2+v^2) + (y*u - x*v)/2", FieldKind::scalar, 2); }

/// Hilbert 1-form dF/dy^i as a covector field (symbolic).
inline FieldDef hilbert_covector(const FieldDef& F) {
    require_kind(F, FieldKind::scalar, "Finsler function");
    std::vector<ExprPtr> comps;
    for (int i = 0; i < F.n(); ++i) comps.push_back(differentiate(F.expr(0), F.n() + i));
    return FieldDef(FieldKind::covector, F.n(), {}, std::move(comps));
}

/// Fibre Hessian of a scalar as a sym2tensor field (symbolic).
inline FieldDef hessian_field(const FieldDef& F) {
    require_kind(F, FieldKind::scalar, "Finsler function");
    const int n = F.n();
    std::vector<ExprPtr> comps;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) comps.push_back(differentiate(differentiate(F.expr(0), n + i), n + j));
    return FieldDef(FieldKind::sym2tensor, n, {}, std::move(comps));
}

/// omega = dx^dy + dx^d(u/lambda) + dy^d(v/lambda) + dz^d(w/lambda) on T R^3.
inline FieldDef spiral_omega() {
    using namespace expr;
    const int n = 3;
    const ExprPtr lam = call(Func::sqrt, {add(add(pow(var(3), 2), pow(var(4), 2)), pow(var(5), 2))});
    std::vector<ExprPtr> comps;
    comps.push_back(num(1.0));  // a12
    comps.push_back(num(0.0));  // a13
    comps.push_back(num(0.0));  // a23
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) comps.push_back(differentiate(div(var(n + i), lam), n + j));
    for (int k = 0; k < 3; ++k) comps.push_back(num(0.0));
    return FieldDef(FieldKind::twoform, n, {}, std::move(comps));
}

// Spiral path space -------------------------------------------------------------

struct PathCoords {
    double xi = 0.0, eta = 0.0, nu = 0.0, vartheta = 0.0;

    Vec vec() const { return (Vec(4) << xi, eta, nu, vartheta).finished(); }
};

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline double reduce_angle(double a) {
    const double r = a - kTwoPi * std::floor(a / kTwoPi);
    return r >= kTwoPi ? 0.0 : r;
}
inline Jet reduce_angle(const Jet& a) { return a.with_value(reduce_angle(a.value())); }

/// Distance between angles on the circle.
inline double angle_distance(double a, double b) {
    const double d = std::abs(reduce_angle(a - b));
    return std::min(d, kTwoPi - d);
}

namespace detail {

inline void require_genuine_spiral(const Vec& y) {
    const double lam = y.norm();
    if (std::hypot(y[0], y[1]) <= 1e-12 * lam) throw DegenerateRay("vertical ray: the path is a line parallel to the z-axis");
    if (std::abs(y[2]) <= 1e-12 * lam) throw DegenerateRay("horizontal ray: the path is a circle (w = 0)");
}

}  // namespace detail

/// (xi, eta, nu, vartheta) of the spiral through z = (x, y, z, u, v, w).
template <class T>
std::array<T, 4> spiral_path_coords(std::span<const T> z) {
    using std::atan2;
    using std::sqrt;
    const T& x = z[0];
    const T& y = z[1];
    const T& zz = z[2];
    const T& u = z[3];
    const T& v = z[4];
    const T& w = z[5];
    const T lam = sqrt(u * u + v * v + w * w);
    const T nu = w / lam;
    return {x - v / lam, y + u / lam, nu, reduce_angle(atan2(-1.0 * u, v) - zz / nu)};
}

inline PathCoords to_path_coords_spiral(const Point& p) {
    if (p.n() != 3) throw DimensionMismatch("spiral path coordinates need n = 3");
    p.require_slit();
    detail::require_genuine_spiral(p.y);
    const Vec z = p.z();
    const auto c = spiral_path_coords<double>(std::span<const double>(z.data(), 6));
    return {c[0], c[1], c[2], c[3]};
}

/// Omega = d xi ^ d eta + nu d nu ^ d vartheta on two tangent vectors.
inline double omega_path_spiral(const PathCoords& pc, const Vec& t1, const Vec& t2) {
    return t1[0] * t2[1] - t1[1] * t2[0] + pc.nu * (t1[2] * t2[3] - t1[3] * t2[2]);
}

namespace detail {

inline Mat wedge(const Vec& a, const Vec& b) { return a * b.transpose() - b * a.transpose(); }

/// Jets of the path coordinates at p.
inline std::array<Jet, 4> path_coord_jets(const Point& p, int order) {
    require_genuine_spiral(p.y);
    const auto vars = seed_jets(p, order);
    return spiral_path_coords<Jet>(std::span<const Jet>(vars));
}

inline Vec jet_grad(const Jet& j) { return to_vec(j.grad()); }

inline Mat jet_hess(const Jet& j) {
    const int m = j.dim();
    Mat h(m, m);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) h(a, b) = j.d2(a, b);
    return h;
}

}  // namespace detail

/// Pullback of Omega to T R^3 through the path coordinates, as a 2-form field.
inline TwoFormField spiral_pullback_field() {
    return TwoFormField(3, [](const Point& p) {
        const auto c = detail::path_coord_jets(p, 2);
        const Vec Jxi = detail::jet_grad(c[0]), Jeta = detail::jet_grad(c[1]), Jnu = detail::jet_grad(c[2]),
                  Jth = detail::jet_grad(c[3]);
        const Mat Hxi = detail::jet_hess(c[0]), Heta = detail::jet_hess(c[1]), Hnu = detail::jet_hess(c[2]),
                  Hth = detail::jet_hess(c[3]);
        const double nu = c[2].value();
        TwoFormJet out{detail::wedge(Jxi, Jeta) + nu * detail::wedge(Jnu, Jth), {}};
        for (int e = 0; e < 6; ++e) {
            Mat d = detail::wedge(Hxi.col(e), Jeta) + detail::wedge(Jxi, Heta.col(e)) + Jnu[e] * detail::wedge(Jnu, Jth) +
                    nu * (detail::wedge(Hnu.col(e), Jth) + detail::wedge(Jnu, Hth.col(e)));
            out.dW.push_back(std::move(d));
        }
        return out;
    }, "pullback(Omega)");
}

/// Three-way comparison at a genuine-spiral point: pullback of Omega, the
/// closed-form omega, and the Hilbert 2-form of the spiral F up to sign.
inline ConditionReport pullback_check_spiral(const Point& p, double tol = 1e-9) {
    if (p.n() != 3) throw DimensionMismatch("spiral checks need n = 3");
    const Mat pull = spiral_pullback_field().jet(p).W;
    const Mat closed = TwoFormField::from_field(spiral_omega()).jet(p).W;
    const Mat hil = dtheta_matrix(Covector::from_scalar(spiral_finsler()).jet(p, 1));
    const double plus = detail::max_abs(hil - closed), minus = detail::max_abs(-hil - closed);
    const double sign = minus < plus ? -1.0 : 1.0;
    ConditionReport r;
    r.point = p;
    const double scale = detail::max_abs(closed);
    r.add("pullback_vs_closed_form", detail::max_abs(pull - closed), scale, tol);
    r.add("hilbert_vs_closed_form", std::min(plus, minus), scale, tol, sign);
    r.add("pullback_vs_hilbert", detail::max_abs(pull - sign * hil), scale, tol);
    if (sign < 0) r.flags.push_back("hilbert_sign_flipped");
    return r;
}

/// Circle example on T R^2: d theta of its F against the closed
/// form and against -d xi ^ d eta, with xi = x - v/mu, eta = y + u/mu.
inline ConditionReport circle_identity_check(const Point& p, double tol = 1e-10) {
    if (p.n() != 2) throw DimensionMismatch("circle checks need n = 2");
    p.require_slit();
    const Mat dth = dtheta_matrix(Covector::from_scalar(circle_finsler()).jet(p, 1));
    const double u = p.y[0], v = p.y[1], mu = p.y.norm();
    const Vec dx = Vec::Unit(4, 0), dy = Vec::Unit(4, 1), du = Vec::Unit(4, 2), dv = Vec::Unit(4, 3);
    const Mat closed = -detail::wedge(dx, dy) + detail::wedge(v * du - u * dv, v * dx - u * dy) / (mu * mu * mu);
    const auto vars = seed_jets(p, 1);
    using std::sqrt;
    const Jet m = sqrt(vars[2] * vars[2] + vars[3] * vars[3]);
    const Jet xi = vars[0] - vars[3] / m, eta = vars[1] + vars[2] / m;
    const Mat minus_dxi_deta = -detail::wedge(detail::jet_grad(xi), detail::jet_grad(eta));
    ConditionReport r;
    r.point = p;
    r.add("dtheta_vs_closed_form", detail::max_abs(dth - closed), detail::max_abs(closed), tol);
    r.add("dtheta_vs_minus_dxi_deta", detail::max_abs(dth - minus_dxi_deta), detail::max_abs(closed), tol);
    return r;
}

/// For fixed base point the spirals through it form a Lagrangian 2-manifold:
/// d xi ^ d eta = -nu d nu ^ d vartheta on vertical tangent pairs.
inline ConditionReport lagrangian_fibre_check(const Point& p, double tol = 1e-9) {
    if (p.n() != 3) throw DimensionMismatch("spiral checks need n = 3");
    const auto c = detail::path_coord_jets(p, 1);
    const Vec Jxi = detail::jet_grad(c[0]), Jeta = detail::jet_grad(c[1]), Jnu = detail::jet_grad(c[2]),
              Jth = detail::jet_grad(c[3]);
    const Mat a = detail::wedge(Jxi, Jeta).bottomRightCorner(3, 3);
    const Mat b = (c[2].value() * detail::wedge(Jnu, Jth)).bottomRightCorner(3, 3);
    ConditionReport r;
    r.point = p;
    r.add("lagrangian_fibre", detail::max_abs(a + b), detail::max_abs(a), tol, detail::max_abs(a));
    return r;
}

/// Minimum of F over unit fibre vectors at base point x (deterministic grid).
inline double fibre_minimum(const FieldDef& F, const Vec& x, int resolution = 72) {
    require_kind(F, FieldKind::scalar, "Finsler function");
    const int n = F.n();
    double best = std::numeric_limits<double>::infinity();
    auto visit = [&](const Vec& y) { best = std::min(best, eval_field(F, Point(x, y))[0]); };
    if (n == 1) {
        visit(Vec::Constant(1, 1.0));
        visit(Vec::Constant(1, -1.0));
    } else if (n == 2) {
        for (int k = 0; k < resolution; ++k) {
            const double a = kTwoPi * k / resolution;
            visit((Vec(2) << std::cos(a), std::sin(a)).finished());
        }
    } else if (n == 3) {
        const int polar = resolution / 2;
        for (int j = 0; j <= polar; ++j) {
            const double t = std::numbers::pi * j / polar;
            for (int k = 0; k < resolution; ++k) {
                const double a = kTwoPi * k / resolution;
                visit((Vec(3) << std::sin(t) * std::cos(a), std::sin(t) * std::sin(a), std::cos(t)).finished());
            }
        }
    } else {
        std::mt19937_64 rng(0xf1b5ULL);
        std::normal_distribution<double> g;
        for (int k = 0; k < resolution * resolution; ++k) {
            Vec y(n);
            for (int i = 0; i < n; ++i) y[i] = g(rng);
            visit(y.normalized());
        }
    }
    return best;
}

}  // namespace spraymetric
