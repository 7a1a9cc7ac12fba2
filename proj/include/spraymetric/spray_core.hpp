#pragma once

// Geometry derived from a spray  y^i d/dx^i - 2 Gamma^i d/dy^i :
// connection coefficients, horizontal frame, curvature, Jacobi endomorphism,
// dynamical covariant derivative, projective changes and homogeneity probes.

#include <cmath>
#include <random>
#include <vector>

#include "fieldspec.hpp"
#include "point.hpp"

namespace spraymetric {

/// Dense n x n x n array, element (i, j, k) at ((i * n) + j) * n + k.
class Tensor3 {
public:
    Tensor3() = default;
    explicit Tensor3(int n) : n_(n), data_(static_cast<std::size_t>(n) * n * n, 0.0) {}

    int n() const noexcept { return n_; }
    double& operator()(int i, int j, int k) { return data_[(static_cast<std::size_t>(i) * n_ + j) * n_ + k]; }
    double operator()(int i, int j, int k) const { return data_[(static_cast<std::size_t>(i) * n_ + j) * n_ + k]; }
    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

private:
    int n_ = 0;
    std::vector<double> data_;
};

/// Value and first partial derivatives (d[a] = d/dz^a, z = (x, y)) of a matrix field.
struct MatrixJet {
    Mat value;
    std::vector<Mat> d;
};

/// Connection data of a spray at one point.
struct SprayData {
    Vec gamma;          ///< Gamma^i
    Mat gamma_j;        ///< (i, j): Gamma^i_j = dGamma^i/dy^j
    Tensor3 gamma_jk;   ///< (k, i, j): Gamma^k_ij = d2Gamma^k/dy^i dy^j
    Mat dGamma_dx;      ///< (i, j): dGamma^i/dx^j
    Tensor3 dGammaj_dx; ///< (i, j, k): dGamma^i_j/dx^k
};

struct CurvatureData {
    Tensor3 R3;  ///< (l, i, j): R^l_ij, with [H_i, H_j] = -R^l_ij V_l
    Mat R2;      ///< (k, j): R^k_j = R^k_jl y^l
};

inline void require_kind(const FieldDef& f, FieldKind k, const char* what) {
    if (f.kind() != k) throw DimensionMismatch(std::string(what) + " must be a " + kind_name(k) + " field");
}

inline SprayData spray_data(const FieldDef& spray, const Point& p) {
    require_kind(spray, FieldKind::spray, "spray");
    const int n = spray.n();
    const auto jets = eval_field_jet(spray, p, 2);
    SprayData s{Vec(n), Mat(n, n), Tensor3(n), Mat(n, n), Tensor3(n)};
    for (int i = 0; i < n; ++i) {
        const Jet& g = jets[i];
        s.gamma[i] = g.value();
        for (int j = 0; j < n; ++j) {
            s.gamma_j(i, j) = g.d(n + j);
            s.dGamma_dx(i, j) = g.d(j);
            for (int k = 0; k < n; ++k) {
                s.gamma_jk(i, j, k) = g.d2(n + j, n + k);
                s.dGammaj_dx(i, j, k) = g.d2(n + j, k);
            }
        }
    }
    return s;
}

/// The spray as a vector on the 2n-dimensional chart: (y, -2 Gamma).
inline Vec spray_vector(const SprayData& s, const Vec& y) {
    Vec v(2 * y.size());
    v << y, -2.0 * s.gamma;
    return v;
}

/// Coordinate components of the horizontal lift of v: (v, -Gamma^l_j v^j).
inline Vec horizontal_lift(const SprayData& s, const Vec& v) {
    Vec out(2 * v.size());
    out << v, -s.gamma_j * v;
    return out;
}

inline Vec vertical_lift(const Vec& v) {
    Vec out = Vec::Zero(2 * v.size());
    out.tail(v.size()) = v;
    return out;
}

inline CurvatureData curvature(const SprayData& s, const Vec& y) {
    const int n = static_cast<int>(y.size());
    // H_i(Gamma^l_j) = dGamma^l_j/dx^i - Gamma^m_i Gamma^l_jm
    auto h_of = [&](int i, int l, int j) {
        double v = s.dGammaj_dx(l, j, i);
        for (int m = 0; m < n; ++m) v -= s.gamma_j(m, i) * s.gamma_jk(l, j, m);
        return v;
    };
    CurvatureData c{Tensor3(n), Mat::Zero(n, n)};
    for (int l = 0; l < n; ++l)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) c.R3(l, i, j) = h_of(i, l, j) - h_of(j, l, i);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l) c.R2(k, j) += c.R3(k, j, l) * y[l];
    return c;
}

inline CurvatureData curvature(const FieldDef& spray, const Point& p) { return curvature(spray_data(spray, p), p.y); }

/// Derivative of a function along the spray: y^k d/dx^k - 2 Gamma^k d/dy^k,
/// given its gradient over z = (x, y).
inline double along_spray(const SprayData& s, const Vec& y, const Vec& grad) {
    const int n = static_cast<int>(y.size());
    return y.dot(grad.head(n)) - 2.0 * s.gamma.dot(grad.tail(n));
}

/// (nabla h)_ij = Gamma(h_ij) - Gamma^k_i h_kj - Gamma^k_j h_ik.
inline Mat dyn_cov_deriv(const SprayData& s, const Vec& y, const MatrixJet& h) {
    const int n = static_cast<int>(y.size());
    Mat gamma_h = Mat::Zero(n, n);
    for (int k = 0; k < n; ++k) gamma_h += y[k] * h.d[k] - 2.0 * s.gamma[k] * h.d[n + k];
    return gamma_h - s.gamma_j.transpose() * h.value - h.value * s.gamma_j;
}

/// Value and first derivatives of a sym2tensor field at p.
inline MatrixJet sym2tensor_jet(const FieldDef& h, const Point& p) {
    require_kind(h, FieldKind::sym2tensor, "multiplier");
    const int n = h.n();
    const auto jets = eval_field_jet(h, p, 1);
    MatrixJet out{Mat(n, n), std::vector<Mat>(2 * n, Mat(n, n))};
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const Jet& c = jets[sym_slot(i, j, n)];
            out.value(i, j) = c.value();
            for (int a = 0; a < 2 * n; ++a) out.d[a](i, j) = c.d(a);
        }
    return out;
}

inline Mat dyn_cov_deriv(const FieldDef& spray, const FieldDef& h, const Point& p) {
    return dyn_cov_deriv(spray_data(spray, p), p.y, sym2tensor_jet(h, p));
}

/// max over scales s and components of |f(x, s y) - s^degree f(x, y)|.
inline double homogeneity_residual(const FieldDef& f, double degree, const Point& p, const std::vector<double>& scales) {
    const Vec base = eval_field(f, p);
    double worst = 0.0;
    for (double s : scales) {
        if (!(s > 0.0)) throw DomainError("homogeneity scales must be positive");
        const Vec scaled = eval_field(f, Point(p.x, s * p.y));
        worst = std::max(worst, (scaled - std::pow(s, degree) * base).cwiseAbs().maxCoeff());
    }
    return worst;
}

namespace detail {

/// Deterministic probe points used to validate homogeneity or metric hypotheses.
inline std::vector<Point> probe_points(int n, int count = 6) {
    std::mt19937_64 rng(0x5eed5eedULL);
    std::uniform_real_distribution<double> box(-0.8, 0.8);
    std::normal_distribution<double> gauss;
    std::vector<Point> pts;
    for (int k = 0; k < count; ++k) {
        Vec x(n), y(n);
        for (int i = 0; i < n; ++i) {
            x[i] = k == 0 ? 0.0 : box(rng);
            y[i] = gauss(rng);
        }
        if (y.norm() < 0.1) y[0] += 1.0;
        pts.emplace_back(x, y.normalized() * (0.5 + 0.25 * k));
    }
    return pts;
}

}  // namespace detail

namespace detail {

/// Positive definiteness of g at the probe points where it is defined.  With
/// x_only, components depending on the fibre variables are rejected too.
inline void check_metric_probes(const FieldDef& g, bool x_only = false) {
    const int n = g.n();
    for (const Point& q : probe_points(n)) {
        std::vector<Jet> jets;
        try {
            jets = eval_field_jet(g, q, 1);
        } catch (const DomainError&) {
            continue;
        } catch (const DivisionByZero&) {
            continue;
        }
        Mat gm(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const Jet& c = jets[sym_slot(i, j, n)];
                gm(i, j) = c.value();
                if (x_only)
                    for (int k = 0; k < n; ++k)
                        if (c.d(n + k) != 0.0) throw MetricError("metric components must depend on x only");
            }
        if (Eigen::LLT<Mat>(gm).info() != Eigen::Success) throw MetricError("metric is not positive definite at a probe point");
    }
}

}  // namespace detail

/// Spray Gamma - 2 P Delta, i.e. coefficients Gamma^i + P y^i.
inline FieldDef projective_transform(const FieldDef& spray, const FieldDef& P) {
    require_kind(spray, FieldKind::spray, "spray");
    require_kind(P, FieldKind::scalar, "projective factor");
    const int n = spray.n();
    if (P.n() != n) throw DimensionMismatch("projective factor dimension mismatch");
    for (const Point& q : detail::probe_points(n)) {
        double scale = 1.0, res = 0.0;
        try {
            scale = std::max(1.0, std::abs(eval_field(P, q)[0]));
            res = homogeneity_residual(P, 1.0, q, {0.5, 2.0});
        } catch (const DomainError&) {
            continue;
        }
        if (res > 1e-9 * scale) throw HomogeneityError("projective factor is not positively homogeneous of degree 1");
    }
    std::vector<ExprPtr> exprs;
    for (int i = 0; i < n; ++i) exprs.push_back(expr::add(spray.expr(i), expr::mul(P.expr(0), expr::var(n + i))));
    return FieldDef(FieldKind::spray, n, spray.names(), std::move(exprs));
}

/// Turns a second-order field z into the unique spray z + f Delta of its
/// class with Gamma(G) = 0, where G = sqrt(g_ij(x) y^i y^j) and f = -z(G)/G.
inline FieldDef normalize_semispray(const FieldDef& z, const FieldDef& g) {
    require_kind(z, FieldKind::spray, "semispray");
    require_kind(g, FieldKind::sym2tensor, "metric");
    const int n = z.n();
    if (g.n() != n) throw DimensionMismatch("metric dimension mismatch");
    detail::check_metric_probes(g);
    using namespace expr;
    ExprPtr quad = num(0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            quad = add(quad, mul(g.expr(sym_slot(i, j, n)), mul(var(n + i), var(n + j))));
    const ExprPtr G = call(Func::sqrt, {quad});
    ExprPtr zG = num(0.0);
    for (int i = 0; i < n; ++i) {
        zG = add(zG, mul(var(n + i), differentiate(G, i)));
        zG = sub(zG, mul(mul(num(2.0), z.expr(i)), differentiate(G, n + i)));
    }
    // Gamma^i = z^i - f y^i / 2 with f = -z(G)/G
    const ExprPtr half_ratio = div(zG, mul(num(2.0), G));
    std::vector<ExprPtr> exprs;
    for (int i = 0; i < n; ++i) exprs.push_back(add(z.expr(i), mul(half_ratio, var(n + i))));
    return FieldDef(FieldKind::spray, n, z.names(), std::move(exprs));
}

struct IsotropyFit {
    double lambda = 0.0;
    Vec mu;
    double residual = 0.0;
};

/// Least-squares fit R^i_j ~ lambda delta^i_j + mu_j y^i (ridge 1e-12).
inline IsotropyFit isotropy_fit(const Mat& R2, const Vec& y) {
    const int n = static_cast<int>(y.size());
    Mat A = Mat::Zero(n * n, n + 1);
    Vec b(n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const int row = i * n + j;
            b[row] = R2(i, j);
            A(row, 0) = i == j ? 1.0 : 0.0;
            A(row, 1 + j) = y[i];
        }
    const Mat normal = A.transpose() * A + 1e-12 * Mat::Identity(n + 1, n + 1);
    const Vec sol = normal.ldlt().solve(A.transpose() * b);
    IsotropyFit fit;
    fit.lambda = sol[0];
    fit.mu = sol.tail(n);
    fit.residual = (A * sol - b).norm();
    return fit;
}

inline IsotropyFit isotropy_residual(const FieldDef& spray, const Point& p) {
    return isotropy_fit(curvature(spray, p).R2, p.y);
}

}  // namespace spraymetric
