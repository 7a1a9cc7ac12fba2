#pragma once

// Shared generators for the test suites.

#include <cmath>
#include <random>

#include <spraymetric/point.hpp>
#include <spraymetric/fieldspec.hpp>

namespace spraymetric::testing {

/// Random point with x uniform in [-box, box]^n and |y| log-uniform in [rmin, rmax].
inline Point random_point(std::mt19937_64& rng, int n, double box = 1.0, double rmin = 0.5, double rmax = 2.0) {
    std::uniform_real_distribution<double> ux(-box, box), ur(std::log(rmin), std::log(rmax));
    std::normal_distribution<double> g;
    Vec x(n), y(n);
    for (int i = 0; i < n; ++i) {
        x[i] = ux(rng);
        y[i] = g(rng);
    }
    while (y.norm() < 1e-3) y[0] += 1.0;
    return Point(x, y.normalized() * std::exp(ur(rng)));
}

inline constexpr const char* kSpiralSpray = "G1 = v*sqrt(u^2+v^2+w^2)/2; G2 = -u*sqrt(u^2+v^2+w^2)/2; G3 = 0";
inline constexpr const char* kSpiralF = "F = sqrt(u^2+v^2+w^2) + (y*u - x*v)/2";
inline constexpr const char* kCircleSpray = "G1 = v*sqrt(u^2+v^2)/2; G2 = -u*sqrt(u^2+v^2)/2";
inline constexpr const char* kCircleF = "F = sqrt(u^2+v^2) + (y*u - x*v)/2";

inline double max_abs_diff(const Mat& a, const Mat& b) { return (a - b).cwiseAbs().maxCoeff(); }

inline FieldDef zero_spray(int n) {
    std::string s;
    for (int i = 1; i <= n; ++i) s += "G" + std::to_string(i) + " = 0;";
    return parse_field(s, FieldKind::spray, n);
}

/// Symbolic fibre gradient of a scalar as a covector field.
inline FieldDef gradient_covector(const FieldDef& F) {
    std::vector<ExprPtr> comps;
    for (int i = 0; i < F.n(); ++i) comps.push_back(differentiate(F.expr(0), F.n() + i));
    return FieldDef(FieldKind::covector, F.n(), {}, std::move(comps));
}

inline Vec vec(std::initializer_list<double> v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

}  // namespace spraymetric::testing
