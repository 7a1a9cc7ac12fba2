#pragma once

// Geodesics and Jacobi fields of a spray, conserved pairings of Jacobi fields
// under an invariant 2-form, and totally-geodesic tests for affine subspaces.

#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <vector>

#include "metrizability.hpp"
#include "spray_core.hpp"

namespace spraymetric {

// Embedded Runge-Kutta 5(4) pair of Dormand and Prince -------------------------

struct DenseSegment;

struct OdeOptions {
    double rtol = 1e-10;
    double atol = 1e-10;
    double h0 = 0.0;  ///< initial step; 0 picks one
    long max_steps = 1000000;
    std::function<void(const DenseSegment&)> on_step;  ///< called for every accepted step
};

struct OdeStats {
    long accepted = 0;
    long rejected = 0;
    long evaluations = 0;
    double max_error = 0.0;  ///< largest normalized local error estimate of an accepted step
};

/// One accepted step with its continuous extension.
struct DenseSegment {
    double t0 = 0.0, t1 = 0.0;
    Vec r1, r2, r3, r4, r5;

    Vec at(double t) const {
        const double h = t1 - t0;
        const double s = h == 0.0 ? 0.0 : (t - t0) / h, s1 = 1.0 - s;
        return r1 + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)));
    }
};

struct OdeSolution {
    std::vector<DenseSegment> segments;
    Vec y_end;
    OdeStats stats;

    /// State at t by dense output (t inside the integrated interval).
    Vec at(double t) const {
        if (segments.empty()) return y_end;
        const bool forward = segments.front().t1 >= segments.front().t0;
        auto before = [&](double a, double b) { return forward ? a < b : a > b; };
        std::size_t lo = 0, hi = segments.size();
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            if (before(t, segments[mid].t0)) hi = mid;
            else lo = mid;
        }
        return segments[lo].at(t);
    }
};

using OdeRhs = std::function<Vec(double, const Vec&)>;

inline OdeSolution dopri5(const OdeRhs& f, double t0, const Vec& y0, double t1, const OdeOptions& opt = {}) {
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                     e6 = 22.0 / 525, e7 = -1.0 / 40;
    constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                     d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                     d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

    OdeSolution sol;
    const double span = t1 - t0;
    const double dir = span >= 0.0 ? 1.0 : -1.0;
    Vec y = y0;
    double t = t0;
    if (span == 0.0) {
        sol.y_end = y;
        return sol;
    }
    auto norm = [&](const Vec& e, const Vec& a, const Vec& b) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < e.size(); ++i) {
            const double sc = opt.atol + opt.rtol * std::max(std::abs(a[i]), std::abs(b[i]));
            acc += (e[i] / sc) * (e[i] / sc);
        }
        return std::sqrt(acc / static_cast<double>(e.size()));
    };

    Vec k1 = f(t, y);
    ++sol.stats.evaluations;
    double h = opt.h0;
    if (h <= 0.0) {
        // standard starting-step heuristic
        const double d0 = norm(y, y, y), dd1 = norm(k1, y, y);
        double h0 = (d0 < 1e-5 || dd1 < 1e-5) ? 1e-6 : 0.01 * d0 / dd1;
        h0 = std::min(h0, std::abs(span));
        const Vec y1 = y + dir * h0 * k1;
        const Vec f1 = f(t + dir * h0, y1);
        ++sol.stats.evaluations;
        const double d2 = norm(f1 - k1, y, y) / h0;
        const double h1 = std::max(dd1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                     : std::pow(0.01 / std::max(dd1, d2), 1.0 / 5.0);
        h = std::min({100 * h0, h1, std::abs(span)});
    }

    while (dir * (t1 - t) > 0.0) {
        if (sol.stats.accepted + sol.stats.rejected >= opt.max_steps) throw StepFailure("step budget exhausted");
        if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t)))
            throw StepFailure("step size underflow");
        bool last = false;
        if (h >= std::abs(t1 - t)) {
            h = std::abs(t1 - t);
            last = true;
        }
        const double hs = dir * h;
        const Vec k2 = f(t + c2 * hs, y + hs * a21 * k1);
        const Vec k3 = f(t + c3 * hs, y + hs * (a31 * k1 + a32 * k2));
        const Vec k4 = f(t + c4 * hs, y + hs * (a41 * k1 + a42 * k2 + a43 * k3));
        const Vec k5 = f(t + c5 * hs, y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const Vec k6 = f(t + hs, y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        const Vec ynew = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        const Vec k7 = f(t + hs, ynew);
        sol.stats.evaluations += 6;
        const Vec err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double en = norm(err, y, ynew);
        const double fac = std::clamp(0.9 * std::pow(std::max(en, 1e-10), -0.2), 0.2, 10.0);
        if (en <= 1.0) {
            DenseSegment seg;
            seg.t0 = t;
            seg.t1 = last ? t1 : t + hs;
            seg.r1 = y;
            seg.r2 = ynew - y;
            seg.r3 = hs * k1 - seg.r2;
            seg.r4 = seg.r2 - hs * k7 - seg.r3;
            seg.r5 = hs * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
            if (opt.on_step) opt.on_step(seg);
            sol.segments.push_back(std::move(seg));
            sol.stats.max_error = std::max(sol.stats.max_error, en);
            ++sol.stats.accepted;
            t = last ? t1 : t + hs;
            y = ynew;
            k1 = k7;
            h *= fac;
        } else {
            ++sol.stats.rejected;
            h *= std::min(1.0, fac);
        }
    }
    sol.y_end = y;
    return sol;
}

// Geodesics ---------------------------------------------------------------------

struct Trajectory {
    int n = 0;
    std::vector<double> times;
    std::vector<Point> states;
    OdeStats stats;
    double tol = 1e-10;
    OdeSolution dense;  ///< continuous extension over the whole interval

    Point state_at(double t) const { return Point::from_z(dense.at(t)); }
};

struct JacobiChannel {
    std::vector<Vec> zeta;
    std::vector<Vec> nabla_zeta;
    double geodesic_drift = 0.0;  ///< max deviation of the co-integrated geodesic from the trajectory
    OdeStats stats;
};

inline void check_tolerance(double tol) {
    if (!(tol >= 1e-12 && tol <= 1e-3)) throw DomainError("integrator tolerance must lie in [1e-12, 1e-3]");
}

namespace detail {

inline void require_fibre(const Vec& y) {
    if (y.norm() < kFibreEps) throw StepFailure("fibre vector fell below the slit threshold");
}

/// Rejects steps whose fibre part passes through the zero section between
/// stage evaluations: the chord between the end points and a few dense
/// samples must stay away from y = 0.
inline void guard_fibre_segment(const DenseSegment& seg, int n, int offset = 0) {
    const Vec a = seg.r1.segment(offset + n, n), b = (seg.r1 + seg.r2).segment(offset + n, n);
    const Vec d = b - a;
    const double s = d.squaredNorm() > 0.0 ? std::clamp(-a.dot(d) / d.squaredNorm(), 0.0, 1.0) : 0.0;
    if ((a + s * d).norm() < kFibreEps) throw StepFailure("fibre vector crossed the zero section");
    for (int k = 1; k < 8; ++k)
        require_fibre(seg.at(seg.t0 + (seg.t1 - seg.t0) * k / 8.0).segment(offset + n, n));
}

}  // namespace detail

/// count + 1 equally spaced times from 0 to t_end.
inline std::vector<double> uniform_times(double t_end, int count) {
    std::vector<double> ts(count + 1);
    for (int i = 0; i <= count; ++i) ts[i] = t_end * i / count;
    ts.back() = t_end;
    return ts;
}

/// Right-hand side (x, y)' = (y, -2 Gamma(x, y)).
inline OdeRhs geodesic_rhs(const FieldDef& spray) {
    require_kind(spray, FieldKind::spray, "spray");
    const int n = spray.n();
    return [spray, n](double, const Vec& z) {
        const Point p = Point::from_z(z);
        detail::require_fibre(p.y);
        Vec out(2 * n);
        out << p.y, -2.0 * eval_field(spray, p);
        return out;
    };
}

/// Integrates the geodesic from p0 to t_end.  Output is sampled at
/// `sample_times` (dense output) or, when empty, at every accepted step.
inline Trajectory integrate_geodesic(const FieldDef& spray, const Point& p0, double t_end, double tol,
                                     std::vector<double> sample_times = {}) {
    check_tolerance(tol);
    require_kind(spray, FieldKind::spray, "spray");
    if (p0.n() != spray.n()) throw DimensionMismatch("initial point dimension does not match spray");
    detail::require_fibre(p0.y);
    Trajectory tr;
    tr.n = spray.n();
    tr.tol = tol;
    OdeOptions opt;
    opt.rtol = opt.atol = tol;
    opt.on_step = [n = tr.n](const DenseSegment& seg) { detail::guard_fibre_segment(seg, n); };
    tr.dense = dopri5(geodesic_rhs(spray), 0.0, p0.z(), t_end, opt);
    tr.stats = tr.dense.stats;
    if (sample_times.empty()) {
        sample_times.push_back(0.0);
        for (const auto& s : tr.dense.segments) sample_times.push_back(s.t1);
    }
    for (double t : sample_times) {
        tr.times.push_back(t);
        tr.states.push_back(tr.state_at(t));
    }
    return tr;
}

/// Solves nabla^2 zeta + R(zeta) = 0 along the geodesic of traj, as the first
/// order system in (zeta, nabla zeta) co-integrated with the geodesic:
///   zeta'  = eta - Gamma^i_j zeta^j
///   eta'   = -Gamma^i_j eta^j - R^i_j zeta^j
inline JacobiChannel integrate_jacobi(const FieldDef& spray, const Trajectory& traj, const Vec& zeta0,
                                      const Vec& nabla_zeta0) {
    require_kind(spray, FieldKind::spray, "spray");
    const int n = spray.n();
    if (traj.n != n || zeta0.size() != n || nabla_zeta0.size() != n)
        throw DimensionMismatch("Jacobi data dimension does not match spray");
    if (traj.times.empty()) throw DomainError("empty trajectory");
    const OdeRhs rhs = [&spray, n](double, const Vec& s) {
        const Vec x = s.head(n), y = s.segment(n, n), zeta = s.segment(2 * n, n), eta = s.tail(n);
        detail::require_fibre(y);
        const SprayData d = spray_data(spray, Point(x, y));
        const CurvatureData c = curvature(d, y);
        Vec out(4 * n);
        out << y, -2.0 * d.gamma, eta - d.gamma_j * zeta, -d.gamma_j * eta - c.R2 * zeta;
        return out;
    };
    Vec s0(4 * n);
    s0 << traj.states.front().z(), zeta0, nabla_zeta0;
    OdeOptions opt;
    opt.rtol = opt.atol = traj.tol;
    opt.on_step = [n](const DenseSegment& seg) { detail::guard_fibre_segment(seg, n); };
    const double t_end = traj.dense.segments.empty() ? traj.times.back() : traj.dense.segments.back().t1;
    const OdeSolution sol = dopri5(rhs, 0.0, s0, t_end, opt);
    JacobiChannel ch;
    ch.stats = sol.stats;
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        const Vec s = sol.at(traj.times[k]);
        ch.zeta.push_back(s.segment(2 * n, n));
        ch.nabla_zeta.push_back(s.tail(n));
        ch.geodesic_drift = std::max(ch.geodesic_drift, (s.head(2 * n) - traj.states[k].z()).cwiseAbs().maxCoeff());
    }
    return ch;
}

/// Z = hlift(zeta) + vlift(nabla zeta) at sample k.
inline Vec jacobi_lift(const SprayData& s, const Vec& zeta, const Vec& nabla_zeta) {
    return horizontal_lift(s, zeta) + vertical_lift(nabla_zeta);
}

/// Values omega(Z1, Z2) along the trajectory.
inline std::vector<double> pairing_series(const FieldDef& spray, const TwoFormField& omega, const Trajectory& traj,
                                          const JacobiChannel& a, const JacobiChannel& b) {
    if (a.zeta.size() != traj.times.size() || b.zeta.size() != traj.times.size())
        throw DimensionMismatch("Jacobi channel length does not match trajectory");
    std::vector<double> out;
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        const Point& p = traj.states[k];
        const SprayData s = spray_data(spray, p);
        const Mat W = omega.jet(p).W;
        out.push_back(jacobi_lift(s, a.zeta[k], a.nabla_zeta[k]).dot(W * jacobi_lift(s, b.zeta[k], b.nabla_zeta[k])));
    }
    return out;
}

/// max_t |omega(Z1, Z2)(t) - omega(Z1, Z2)(0)|.
inline double pairing_constancy(const FieldDef& spray, const TwoFormField& omega, const Trajectory& traj,
                                const JacobiChannel& a, const JacobiChannel& b) {
    const auto series = pairing_series(spray, omega, traj, a, b);
    double worst = 0.0;
    for (double v : series) worst = std::max(worst, std::abs(v - series.front()));
    return worst;
}

// Totally geodesic affine subspaces -------------------------------------------

struct AffineSubspace {
    Vec origin;
    Mat basis;  ///< n x k, columns span the tangent directions

    int dim() const { return static_cast<int>(basis.cols()); }
};

/// Norm of the component of -2 Gamma(x, y) normal to the subspace.
inline double totally_geodesic_probe(const FieldDef& spray, const AffineSubspace& sub, const Point& p) {
    const auto n = sub.basis.rows();
    const Eigen::HouseholderQR<Mat> qr(sub.basis);
    const Mat Q = (qr.householderQ() * Mat::Identity(n, n)).leftCols(sub.dim());
    const Vec acc = -2.0 * eval_field(spray, p);
    return (acc - Q * (Q.transpose() * acc)).norm();
}

/// Max probe residual over points x in the subspace (coefficients uniform in
/// [-1, 1]) and tangent fibre vectors of norm in [0.5, 2].
inline double totally_geodesic_residual(const FieldDef& spray, const AffineSubspace& sub, int samples,
                                        std::uint64_t seed = 1) {
    require_kind(spray, FieldKind::spray, "spray");
    const int n = spray.n();
    if (sub.dim() < 1) throw DomainError("subspace must have dimension at least 1");
    if (sub.origin.size() != n || sub.basis.rows() != n) throw DimensionMismatch("subspace dimension does not match spray");
    if (numerical_rank(sub.basis) != sub.dim()) throw DomainError("subspace basis is rank deficient");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0), radius(0.5, 2.0);
    std::normal_distribution<double> gauss;
    double worst = 0.0;
    for (int k = 0; k < samples; ++k) {
        Vec c(sub.dim()), d(sub.dim());
        for (int i = 0; i < sub.dim(); ++i) {
            c[i] = unit(rng);
            d[i] = gauss(rng);
        }
        Vec y = sub.basis * d;
        if (y.norm() < 1e-3) y = sub.basis.col(0);
        y = y.normalized() * radius(rng);
        worst = std::max(worst, totally_geodesic_probe(spray, sub, Point(sub.origin + sub.basis * c, y)));
    }
    return worst;
}

// Export ------------------------------------------------------------------------

/// CSV with columns t, x1..xn, y1..yn, then zeta and nabla_zeta per channel.
inline void write_csv(std::ostream& os, const Trajectory& tr, const std::vector<JacobiChannel>& channels = {}) {
    const int n = tr.n;
    os << "t";
    for (int i = 1; i <= n; ++i) os << ",x" << i;
    for (int i = 1; i <= n; ++i) os << ",y" << i;
    for (std::size_t c = 0; c < channels.size(); ++c) {
        const std::string suffix = channels.size() > 1 ? "_" + std::to_string(c + 1) : "";
        for (int i = 1; i <= n; ++i) os << ",zeta" << i << suffix;
        for (int i = 1; i <= n; ++i) os << ",nabla_zeta" << i << suffix;
    }
    os << '\n';
    const auto old = os.precision(17);
    for (std::size_t k = 0; k < tr.times.size(); ++k) {
        os << tr.times[k];
        for (int i = 0; i < n; ++i) os << ',' << tr.states[k].x[i];
        for (int i = 0; i < n; ++i) os << ',' << tr.states[k].y[i];
        for (const auto& ch : channels) {
            for (int i = 0; i < n; ++i) os << ',' << ch.zeta[k][i];
            for (int i = 0; i < n; ++i) os << ',' << ch.nabla_zeta[k][i];
        }
        os << '\n';
    }
    os.precision(old);
}

}  // namespace spraymetric
