#pragma once

// Almost Grassmann data on the volume-weighted bundle, evaluated in the chart
// with the weight coordinate frozen to 1 (so u = y numerically): trace
// connection, adapted coframe, the 2-form varpi = h_ij dx^i ^ theta_2^j and
// checks on the generators of the Segre cone.

#include <cfloat>
#include <limits>
#include <numbers>
#include <random>

#include "metrizability.hpp"

namespace spraymetric {

struct GrassmannFrame {
    Mat theta1;      ///< n x 2n, rows dx^i
    Mat theta2;      ///< n x 2n, rows du^i + M_ij dx^j
    Mat K;           ///< 2n x n, columns d/dx^j - M_ij d/du^i
    Mat M;           ///< Gamma^i_j - u^i Gamma_j / (n + 1)
    Vec trace_conn;  ///< Gamma_i = dGamma^k_k / du^i
};

inline GrassmannFrame grassmann_frame(const SprayData& s, const Vec& u) {
    const int n = static_cast<int>(u.size());
    GrassmannFrame f;
    f.trace_conn = Vec::Zero(n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) f.trace_conn[i] += s.gamma_jk(k, k, i);
    f.M = s.gamma_j - u * f.trace_conn.transpose() / (n + 1.0);
    f.theta1 = Mat::Zero(n, 2 * n);
    f.theta1.leftCols(n) = Mat::Identity(n, n);
    f.theta2.resize(n, 2 * n);
    f.theta2 << f.M, Mat::Identity(n, n);
    f.K.resize(2 * n, n);
    f.K << Mat::Identity(n, n), -f.M;
    return f;
}

inline GrassmannFrame grassmann_frame(const FieldDef& spray, const Point& p) {
    require_kind(spray, FieldKind::spray, "spray");
    return grassmann_frame(spray_data(spray, p), p.y);
}

/// Matrix of varpi = h_ij dx^i ^ theta_2^j on the (x, u) chart.
inline Mat varpi_matrix(const GrassmannFrame& f, const Mat& h) {
    const auto n = h.rows();
    Mat T = Mat::Identity(2 * n, 2 * n);
    T.bottomLeftCorner(n, n) = f.M;
    Mat W = Mat::Zero(2 * n, 2 * n);
    W.topRightCorner(n, n) = h;
    W.bottomLeftCorner(n, n) = -h.transpose();
    return T.transpose() * W * T;
}

namespace detail {

/// Unit vectors of the complement of span(u) on which two-plane values are sampled.
inline std::vector<Vec> complement_grid(const Vec& u) {
    const Mat Q = orthogonal_complement(u);
    const auto m = Q.cols();
    std::vector<Vec> out;
    if (m == 0) return out;
    if (m == 1) {
        out.push_back(Q.col(0));
    } else if (m == 2) {
        for (int k = 0; k < 64; ++k) {
            const double a = std::numbers::pi * k / 64.0;
            out.push_back(std::cos(a) * Q.col(0) + std::sin(a) * Q.col(1));
        }
    } else {
        std::mt19937_64 rng(0x9e3779b9ULL);
        std::normal_distribution<double> g;
        for (int k = 0; k < 256; ++k) {
            Vec c(m);
            for (Eigen::Index i = 0; i < m; ++i) c[i] = g(rng);
            out.push_back(Q * c.normalized());
        }
        for (Eigen::Index i = 0; i < m; ++i) out.push_back(Q.col(i));
    }
    return out;
}

}  // namespace detail

inline ConditionReport segre_checks(const FieldDef& spray, const Mat& h, const Point& p, const Tolerances& tol = {}) {
    require_kind(spray, FieldKind::spray, "spray");
    const int n = spray.n();
    if (h.rows() != n || h.cols() != n) throw DimensionMismatch("multiplier dimension does not match spray");
    if ((h * p.y).norm() > kAnnihilationTol) throw AnnihilationError("multiplier does not annihilate u");
    const SprayData s = spray_data(spray, p);
    const GrassmannFrame f = grassmann_frame(s, p.y);
    const Mat W = varpi_matrix(f, h);
    const double wmax = detail::max_abs(W);

    ConditionReport r;
    r.point = p;
    r.add("horiz_isotropy", detail::max_abs(f.K.transpose() * W * f.K), wmax, tol.get("horiz_isotropy"));
    r.add("vert_isotropy", detail::max_abs(W.bottomRightCorner(n, n)), wmax, tol.get("vert_isotropy"));
    const Vec S = spray_vector(s, p.y), D = vertical_lift(p.y);
    const double cd = std::max((S.transpose() * W).cwiseAbs().maxCoeff(), (D.transpose() * W).cwiseAbs().maxCoeff());
    r.add("char_D", cd, wmax * std::max(S.cwiseAbs().maxCoeff(), 1.0), tol.get("char_D"));

    // varpi(v^h, v^v) on the complement of u; the sign must not change
    double min_abs = std::numeric_limits<double>::infinity(), max_pos = 0.0, max_neg = 0.0;
    for (const Vec& v : detail::complement_grid(p.y)) {
        const Vec vh = f.K * v, vv = vertical_lift(v);
        const double q = vh.dot(W * vv);
        min_abs = std::min(min_abs, std::abs(q));
        if (q > kDefinitenessThreshold) max_pos = std::max(max_pos, q);
        if (q < -kDefinitenessThreshold) max_neg = std::max(max_neg, -q);
    }
    if (!std::isfinite(min_abs)) min_abs = 0.0;
    const bool degenerate = min_abs <= kDefinitenessThreshold;
    const bool mixed = max_pos > 0.0 && max_neg > 0.0;
    r.classification = definiteness_name(mixed        ? Definiteness::indefinite
                                         : degenerate ? Definiteness::degenerate
                                         : max_pos > 0 ? Definiteness::positive_quasi_definite
                                                       : Definiteness::negative_quasi_definite);
    // shortfall: how far the sampled values are from a single strict sign
    double shortfall = mixed ? std::min(max_pos, max_neg) : 0.0;
    if (degenerate) shortfall = std::max(shortfall, std::max(kDefinitenessThreshold - min_abs, DBL_MIN));
    r.add("two_plane_definiteness", shortfall, std::max(max_pos, max_neg), 0.0, max_neg > max_pos ? -min_abs : min_abs);
    if (degenerate && max_pos == 0.0 && max_neg == 0.0) r.flags.push_back("degenerate");
    return r;
}

inline ConditionReport segre_checks(const FieldDef& spray, const Multiplier& h, const Point& p, const Tolerances& tol = {}) {
    return segre_checks(spray, h.value(p), p, tol);
}

}  // namespace spraymetric
