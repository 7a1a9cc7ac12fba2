#pragma once

// Metrizability criteria: Helmholtz conditions on a multiplier, conditions on
// a semi-basic 1-form, conditions on a 2-form on the slit tangent bundle,
// Kahler lifts, the quadratic form q and quasi-definiteness.

#include <cfloat>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spray_core.hpp"

namespace spraymetric {

// Reports ---------------------------------------------------------------------

struct ConditionEntry {
    std::string name;
    double residual = 0.0;  ///< absolute, >= 0
    double relative = 0.0;  ///< residual divided by the magnitude of the terms entering it
    double tolerance = 0.0;
    bool pass = true;
    double value = 0.0;     ///< optional reported quantity (rank, F, eigenvalue)
};

/// Per-condition tolerances; anything not listed uses `fallback`.
struct Tolerances {
    double fallback = 1e-8;
    std::map<std::string, double> overrides;

    double get(const std::string& name) const {
        const auto it = overrides.find(name);
        return it == overrides.end() ? fallback : it->second;
    }
};

struct ConditionReport {
    Point point;
    std::vector<ConditionEntry> entries;
    std::vector<std::string> flags;
    std::string classification;

    void add(const std::string& name, double residual, double scale, double tolerance, double value = 0.0) {
        ConditionEntry e;
        e.name = name;
        e.residual = residual;
        e.relative = scale > 0.0 ? residual / scale : residual;
        e.tolerance = tolerance;
        e.pass = residual <= tolerance;
        e.value = value;
        entries.push_back(std::move(e));
    }

    const ConditionEntry& at(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return e;
        throw std::out_of_range("no entry named '" + name + "'");
    }

    bool has_flag(const std::string& f) const { return std::find(flags.begin(), flags.end(), f) != flags.end(); }

    /// Worst-case residual over all entries.
    double aggregate() const {
        double m = 0.0;
        for (const auto& e : entries) m = std::max(m, e.residual);
        return m;
    }

    bool all_pass() const {
        return std::all_of(entries.begin(), entries.end(), [](const ConditionEntry& e) { return e.pass; });
    }
};

namespace detail {

inline double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

/// Residual for conditions of the form `value > 0`.
inline double positivity_shortfall(double v) { return v > 0.0 ? 0.0 : std::max(-v, DBL_MIN); }

}  // namespace detail

/// Number of singular values above rel * sigma_max.
inline int numerical_rank(const Mat& m, double rel = 1e-8) {
    if (m.size() == 0) return 0;
    const Vec s = Eigen::JacobiSVD<Mat>(m).singularValues();
    if (s.size() == 0 || s[0] == 0.0) return 0;
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s[i] > rel * s[0]) ++r;
    return r;
}

// Multipliers -----------------------------------------------------------------

/// A (0,2) tensor h_ij(x, y) along the projection, with first derivatives.
/// Not assumed symmetric: the symmetry condition is one of the checks.
class Multiplier {
public:
    using Eval = std::function<MatrixJet(const Point&)>;

    Multiplier(int n, Eval eval, std::string label) : n_(n), eval_(std::move(eval)), label_(std::move(label)) {}

    /// Components of a sym2tensor field.
    static Multiplier from_field(const FieldDef& h) {
        require_kind(h, FieldKind::sym2tensor, "multiplier");
        return Multiplier(h.n(), [h](const Point& p) { return sym2tensor_jet(h, p); }, "field");
    }

    /// Fibre Hessian of a scalar: h_ij = d2F/dy^i dy^j.
    static Multiplier from_hessian(const FieldDef& F) {
        require_kind(F, FieldKind::scalar, "Finsler function");
        const int n = F.n();
        return Multiplier(n, [F, n](const Point& p) {
            const Jet f = eval_field_jet(F, p, 3, DirectionSet::all(2 * n))[0];
            MatrixJet out{Mat(n, n), std::vector<Mat>(2 * n, Mat(n, n))};
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    out.value(i, j) = f.d2(n + i, n + j);
                    for (int a = 0; a < 2 * n; ++a) out.d[a](i, j) = f.d3(a, n + i, n + j);
                }
            return out;
        }, "hessian");
    }

    /// h_ij = V_i(theta_j) = d theta_j / dy^i.
    static Multiplier from_covector(const FieldDef& theta) {
        require_kind(theta, FieldKind::covector, "1-form");
        const int n = theta.n();
        return Multiplier(n, [theta, n](const Point& p) {
            const auto jets = eval_field_jet(theta, p, 2);
            MatrixJet out{Mat(n, n), std::vector<Mat>(2 * n, Mat(n, n))};
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    out.value(i, j) = jets[j].d(n + i);
                    for (int a = 0; a < 2 * n; ++a) out.d[a](i, j) = jets[j].d2(a, n + i);
                }
            return out;
        }, "covector-derivative");
    }

    /// c * h.
    Multiplier scaled(double c) const {
        Eval inner = eval_;
        return Multiplier(n_, [inner, c](const Point& p) {
            MatrixJet m = inner(p);
            m.value *= c;
            for (auto& d : m.d) d *= c;
            return m;
        }, label_);
    }

    int n() const noexcept { return n_; }
    const std::string& label() const noexcept { return label_; }
    MatrixJet jet(const Point& p) const {
        if (p.n() != n_) throw DimensionMismatch("point dimension does not match multiplier");
        return eval_(p);
    }
    Mat value(const Point& p) const { return jet(p).value; }

private:
    int n_;
    Eval eval_;
    std::string label_;
};

inline Mat hessian_of_scalar(const FieldDef& F, const Point& p) {
    require_kind(F, FieldKind::scalar, "Finsler function");
    const int n = F.n();
    const Jet f = eval_field_jet(F, p, 2)[0];
    Mat h(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) h(i, j) = f.d2(n + i, n + j);
    return h;
}

/// theta_i = dF/dy^i.
inline Vec hilbert_oneform(const FieldDef& F, const Point& p) {
    require_kind(F, FieldKind::scalar, "Finsler function");
    const int n = F.n();
    const Jet f = eval_field_jet(F, p, 1)[0];
    Vec t(n);
    for (int i = 0; i < n; ++i) t[i] = f.d(n + i);
    return t;
}

// Helmholtz conditions ----------------------------------------------------------

inline ConditionReport helmholtz_residuals(const FieldDef& spray, const Multiplier& mult, const Point& p,
                                           const Tolerances& tol = {}) {
    require_kind(spray, FieldKind::spray, "spray");
    const int n = spray.n();
    if (mult.n() != n) throw DimensionMismatch("multiplier dimension does not match spray");
    const SprayData s = spray_data(spray, p);
    const CurvatureData c = curvature(s, p.y);
    const MatrixJet h = mult.jet(p);
    const Mat& H = h.value;

    ConditionReport r;
    r.point = p;
    const double hmax = detail::max_abs(H);
    r.add("sym", detail::max_abs(H - H.transpose()), hmax, tol.get("sym"));
    r.add("annihilates_y", (H * p.y).norm(), hmax * p.y.norm(), tol.get("annihilates_y"));

    double fs = 0.0, dscale = 0.0;
    for (int k = 0; k < n; ++k) {
        dscale = std::max(dscale, detail::max_abs(h.d[n + k]));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) fs = std::max(fs, std::abs(h.d[n + k](i, j) - h.d[n + j](i, k)));
    }
    r.add("fibre_symmetry", fs, dscale, tol.get("fibre_symmetry"));

    const Mat nab = dyn_cov_deriv(s, p.y, h);
    const Mat conn = s.gamma_j.transpose() * H;
    r.add("nabla", detail::max_abs(nab), std::max({detail::max_abs(nab + conn + conn.transpose()), detail::max_abs(conn)}),
          tol.get("nabla"));

    const Mat hr = H * c.R2;
    r.add("curvature_sym", detail::max_abs(hr - hr.transpose()), detail::max_abs(hr), tol.get("curvature_sym"));

    // cyclic sum over (i, j, k) of R^l_jk h_il
    double cyc = 0.0, cscale = 0.0;
    auto term = [&](int i, int j, int k) {
        double t = 0.0;
        for (int l = 0; l < n; ++l) t += c.R3(l, j, k) * H(i, l);
        return t;
    };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const double a = term(i, j, k), b = term(j, k, i), d = term(k, i, j);
                cyc = std::max(cyc, std::abs(a + b + d));
                cscale = std::max({cscale, std::abs(a), std::abs(b), std::abs(d)});
            }
    r.add("cyclic_curvature", cyc, cscale, tol.get("cyclic_curvature"));
    return r;
}

// Semi-basic 1-forms ------------------------------------------------------------

/// theta_i with first (and optionally second) derivatives over z = (x, y).
struct CovectorJet {
    Vec value;
    Mat d;               ///< (i, a): d theta_i / dz^a
    std::vector<Mat> dd; ///< dd[i](a, b): d2 theta_i / dz^a dz^b; empty unless requested
};

class Covector {
public:
    using Eval = std::function<CovectorJet(const Point&, int order)>;

    Covector(int n, Eval eval, std::string label) : n_(n), eval_(std::move(eval)), label_(std::move(label)) {}

    static Covector from_field(const FieldDef& theta) {
        require_kind(theta, FieldKind::covector, "1-form");
        const int n = theta.n();
        return Covector(n, [theta, n](const Point& p, int order) {
            const auto jets = eval_field_jet(theta, p, order);
            CovectorJet out{Vec(n), Mat(n, 2 * n), {}};
            if (order >= 2) out.dd.assign(n, Mat(2 * n, 2 * n));
            for (int i = 0; i < n; ++i) {
                out.value[i] = jets[i].value();
                for (int a = 0; a < 2 * n; ++a) {
                    out.d(i, a) = jets[i].d(a);
                    if (order >= 2)
                        for (int b = 0; b < 2 * n; ++b) out.dd[i](a, b) = jets[i].d2(a, b);
                }
            }
            return out;
        }, "field");
    }

    /// Hilbert 1-form theta_i = dF/dy^i of a scalar.
    static Covector from_scalar(const FieldDef& F) {
        require_kind(F, FieldKind::scalar, "Finsler function");
        const int n = F.n();
        return Covector(n, [F, n](const Point& p, int order) {
            const Jet f = eval_field_jet(F, p, order + 1, order + 1 == 3 ? DirectionSet::all(2 * n) : nullptr)[0];
            CovectorJet out{Vec(n), Mat(n, 2 * n), {}};
            if (order >= 2) out.dd.assign(n, Mat(2 * n, 2 * n));
            for (int i = 0; i < n; ++i) {
                out.value[i] = f.d(n + i);
                for (int a = 0; a < 2 * n; ++a) {
                    out.d(i, a) = f.d2(a, n + i);
                    if (order >= 2)
                        for (int b = 0; b < 2 * n; ++b) out.dd[i](a, b) = f.d3(a, b, n + i);
                }
            }
            return out;
        }, "hilbert");
    }

    int n() const noexcept { return n_; }
    const std::string& label() const noexcept { return label_; }
    CovectorJet jet(const Point& p, int order = 1) const {
        if (p.n() != n_) throw DimensionMismatch("point dimension does not match 1-form");
        if (order < 1 || order > 2) throw DomainError("covector jet order must be 1 or 2");
        return eval_(p, order);
    }

private:
    int n_;
    Eval eval_;
    std::string label_;
};

/// Matrix of d(theta_i dx^i) on the 2n-dimensional chart.
inline Mat dtheta_matrix(const CovectorJet& t) {
    const int n = static_cast<int>(t.value.size());
    Mat W = Mat::Zero(2 * n, 2 * n);
    for (int a = 0; a < 2 * n; ++a)
        for (int i = 0; i < n; ++i) {
            W(a, i) += t.d(i, a);
            W(i, a) -= t.d(i, a);
        }
    return W;
}

inline double f_from_theta(const FieldDef& theta, const Point& p) {
    require_kind(theta, FieldKind::covector, "1-form");
    return eval_field(theta, p).dot(p.y);
}

inline ConditionReport bm_residuals(const FieldDef& spray, const Covector& theta, const Point& p,
                                    const Tolerances& tol = {}) {
    require_kind(spray, FieldKind::spray, "spray");
    const int n = spray.n();
    if (theta.n() != n) throw DimensionMismatch("1-form dimension does not match spray");
    const SprayData s = spray_data(spray, p);
    const CovectorJet t = theta.jet(p, 1);
    const Mat Dx = t.d.leftCols(n), Dy = t.d.rightCols(n);  // (i, k): d theta_i / dx^k, d theta_i / dy^k

    ConditionReport r;
    r.point = p;
    const Vec delta = Dy * p.y;
    r.add("lie_delta", delta.cwiseAbs().maxCoeff(), detail::max_abs(Dy) * p.y.norm(), tol.get("lie_delta"));
    // V_i(theta_j) = Dy(j, i)
    r.add("dJ", detail::max_abs(Dy - Dy.transpose()), detail::max_abs(Dy), tol.get("dJ"));
    // H_i(theta_j) = d theta_j/dx^i - Gamma^k_i d theta_j/dy^k
    const Mat Hth = Dx.transpose() - s.gamma_j.transpose() * Dy.transpose();  // (i, j)
    r.add("dH", detail::max_abs(Hth - Hth.transpose()),
          std::max(detail::max_abs(Dx), detail::max_abs(s.gamma_j.transpose() * Dy.transpose())), tol.get("dH"));

    const int rank = numerical_rank(dtheta_matrix(t));
    r.add("rank_dtheta", std::abs(rank - (2 * n - 2)), 0.0, 0.0, rank);
    if (rank < 2 * n - 2) r.flags.push_back("degenerate");

    const double F = t.value.dot(p.y);
    r.add("positivity", detail::positivity_shortfall(F), std::abs(F), 0.0, F);
    return r;
}

// 2-forms -----------------------------------------------------------------------

/// A 2-form at a point as blocks of its matrix W = [[A, B], [-B^T, C]], where
/// omega(X, Y) = X^T W Y.  In the coordinate-adapted form the coframe is
/// (dx, dy); in the frame-adapted form it is (dx, phi), phi^j = dy^j + Gamma^j_k dx^k.
struct TwoFormValue {
    Mat A, B, C;
    bool frame_adapted = false;

    static TwoFormValue from_matrix(const Mat& W, bool frame_adapted = false) {
        const auto n = W.rows() / 2;
        return {W.topLeftCorner(n, n), W.topRightCorner(n, n), W.bottomRightCorner(n, n), frame_adapted};
    }

    int n() const { return static_cast<int>(A.rows()); }

    Mat matrix() const {
        const int k = n();
        Mat W(2 * k, 2 * k);
        W << A, B, -B.transpose(), C;
        return W;
    }

    /// Coordinate-adapted equivalent, given Gamma^j_k at the point.
    TwoFormValue to_coordinate(const Mat& gamma_j) const {
        if (!frame_adapted) return *this;
        const int k = n();
        Mat T = Mat::Identity(2 * k, 2 * k);
        T.bottomLeftCorner(k, k) = gamma_j;
        return from_matrix(T.transpose() * matrix() * T, false);
    }

    double eval(const Vec& X, const Vec& Y) const { return X.dot(matrix() * Y); }
};

struct KahlerLift {
    TwoFormValue frame;
    TwoFormValue coordinate;
};

inline constexpr double kAnnihilationTol = 1e-8;

/// h_ij dx^i ^ phi^j from a multiplier value.
inline KahlerLift kahler_lift(const SprayData& s, const Mat& h, const Vec& y) {
    if ((h * y).norm() > kAnnihilationTol) throw AnnihilationError("multiplier does not annihilate y");
    const auto n = h.rows();
    KahlerLift k;
    k.frame = {Mat::Zero(n, n), h, Mat::Zero(n, n), true};
    k.coordinate = k.frame.to_coordinate(s.gamma_j);
    return k;
}

inline KahlerLift kahler_lift(const FieldDef& spray, const Multiplier& h, const Point& p) {
    return kahler_lift(spray_data(spray, p), h.value(p), p.y);
}

/// Coordinate matrix W of a 2-form with its first derivatives dW[a] = dW/dz^a.
struct TwoFormJet {
    Mat W;
    std::vector<Mat> dW;
};

/// A 2-form field on the 2n-dimensional chart.
class TwoFormField {
public:
    using Eval = std::function<TwoFormJet(const Point&)>;

    TwoFormField(int n, Eval eval, std::string label) : n_(n), eval_(std::move(eval)), label_(std::move(label)) {}

    /// Field of kind twoform (components a_ij, b_ij, c_ij).
    static TwoFormField from_field(const FieldDef& w) {
        require_kind(w, FieldKind::twoform, "2-form");
        const int n = w.n();
        return TwoFormField(n, [w, n](const Point& p) {
            const auto jets = eval_field_jet(w, p, 1);
            TwoFormJet out{Mat::Zero(2 * n, 2 * n), std::vector<Mat>(2 * n, Mat::Zero(2 * n, 2 * n))};
            const int strict = n * (n - 1) / 2;
            auto put = [&](int r, int c, const Jet& j) {
                out.W(r, c) = j.value();
                out.W(c, r) = -j.value();
                for (int a = 0; a < 2 * n; ++a) {
                    out.dW[a](r, c) = j.d(a);
                    out.dW[a](c, r) = -j.d(a);
                }
            };
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    if (i < j) {
                        put(i, j, jets[strict_slot(i, j, n)]);
                        put(n + i, n + j, jets[strict + n * n + strict_slot(i, j, n)]);
                    }
                    put(i, n + j, jets[strict + i * n + j]);
                }
            return out;
        }, "field");
    }

    /// Kahler lift of a multiplier through the spray's coframe.  The
    /// annihilation hypothesis is checked at every evaluation.
    static TwoFormField kahler(const FieldDef& spray, const Multiplier& mult) {
        require_kind(spray, FieldKind::spray, "spray");
        const int n = spray.n();
        return TwoFormField(n, [spray, mult, n](const Point& p) {
            const SprayData s = spray_data(spray, p);
            const MatrixJet h = mult.jet(p);
            if ((h.value * p.y).norm() > kAnnihilationTol) throw AnnihilationError("multiplier does not annihilate y");
            auto assemble = [n](const Mat& H, const Mat& G) {
                Mat W = Mat::Zero(2 * n, 2 * n);
                const Mat hg = H * G;
                W.topLeftCorner(n, n) = hg - hg.transpose();
                W.topRightCorner(n, n) = H;
                W.bottomLeftCorner(n, n) = -H.transpose();
                return W;
            };
            TwoFormJet out{assemble(h.value, s.gamma_j), {}};
            for (int a = 0; a < 2 * n; ++a) {
                Mat dG(n, n);
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k) dG(j, k) = a < n ? s.dGammaj_dx(j, k, a) : s.gamma_jk(j, k, a - n);
                // product rule on the bilinear assembly
                Mat dW = assemble(h.d[a], s.gamma_j);
                const Mat hdg = h.value * dG;
                dW.topLeftCorner(n, n) += hdg - hdg.transpose();
                out.dW.push_back(std::move(dW));
            }
            return out;
        }, "kahler(" + mult.label() + ")");
    }

    /// Exterior derivative of a semi-basic 1-form.
    static TwoFormField dtheta(const Covector& theta) {
        const int n = theta.n();
        return TwoFormField(n, [theta, n](const Point& p) {
            const CovectorJet t = theta.jet(p, 2);
            TwoFormJet out{dtheta_matrix(t), {}};
            for (int c = 0; c < 2 * n; ++c) {
                CovectorJet dc{Vec::Zero(n), Mat(n, 2 * n), {}};
                for (int i = 0; i < n; ++i)
                    for (int a = 0; a < 2 * n; ++a) dc.d(i, a) = t.dd[i](c, a);
                out.dW.push_back(dtheta_matrix(dc));
            }
            return out;
        }, "d(" + theta.label() + ")");
    }

    /// c * omega.
    TwoFormField scaled(double c) const {
        Eval inner = eval_;
        return TwoFormField(n_, [inner, c](const Point& p) {
            TwoFormJet j = inner(p);
            j.W *= c;
            for (auto& d : j.dW) d *= c;
            return j;
        }, label_);
    }

    int n() const noexcept { return n_; }
    const std::string& label() const noexcept { return label_; }
    TwoFormJet jet(const Point& p) const {
        if (p.n() != n_) throw DimensionMismatch("point dimension does not match 2-form");
        return eval_(p);
    }
    TwoFormValue value(const Point& p) const { return TwoFormValue::from_matrix(jet(p).W); }

private:
    int n_;
    Eval eval_;
    std::string label_;
};

/// Components (d omega)_abc = d_a W_bc + d_b W_ca + d_c W_ab, as dW_out[a](b, c).
inline std::vector<Mat> exterior_derivative(const TwoFormJet& w) {
    const auto m = w.W.rows();
    std::vector<Mat> out(m, Mat(m, m));
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b)
            for (Eigen::Index c = 0; c < m; ++c) out[a](b, c) = w.dW[a](b, c) + w.dW[b](c, a) + w.dW[c](a, b);
    return out;
}

/// Lie derivative of omega along the spray, L = i d + d i.
inline Mat lie_derivative_spray(const SprayData& s, const Vec& y, const TwoFormJet& w) {
    const int n = static_cast<int>(y.size()), m = 2 * n;
    const Vec S = spray_vector(s, y);
    // dS(c, a) = d S^c / dz^a
    Mat dS = Mat::Zero(m, m);
    for (int c = 0; c < n; ++c) {
        dS(c, n + c) = 1.0;
        for (int a = 0; a < n; ++a) {
            dS(n + c, a) = -2.0 * s.dGamma_dx(c, a);
            dS(n + c, n + a) = -2.0 * s.gamma_j(c, a);
        }
    }
    const auto dw = exterior_derivative(w);
    Mat i_dw = Mat::Zero(m, m);
    for (int c = 0; c < m; ++c) i_dw += S[c] * dw[c];
    // alpha_b = S^c W_cb ; d_a alpha_b = dS^c/dz^a W_cb + S^c d_a W_cb
    Mat dalpha(m, m);  // (a, b): d_a alpha_b
    for (int a = 0; a < m; ++a) dalpha.row(a) = (dS.col(a).transpose() * w.W) + (S.transpose() * w.dW[a]);
    return i_dw + dalpha - dalpha.transpose();
}

inline ConditionReport twoform_residuals(const FieldDef& spray, const TwoFormField& omega, const Point& p,
                                         const Tolerances& tol = {}) {
    require_kind(spray, FieldKind::spray, "spray");
    const int n = spray.n();
    if (omega.n() != n) throw DimensionMismatch("2-form dimension does not match spray");
    const SprayData s = spray_data(spray, p);
    const TwoFormJet w = omega.jet(p);
    const Vec S = spray_vector(s, p.y);
    const Vec D = vertical_lift(p.y);
    const double wmax = detail::max_abs(w.W);

    ConditionReport r;
    r.point = p;
    r.add("char_gamma", (S.transpose() * w.W).cwiseAbs().maxCoeff(), wmax * S.cwiseAbs().maxCoeff(), tol.get("char_gamma"));
    r.add("char_delta", (D.transpose() * w.W).cwiseAbs().maxCoeff(), wmax * p.y.cwiseAbs().maxCoeff(), tol.get("char_delta"));

    const Mat lie = lie_derivative_spray(s, p.y, w);
    double dscale = 0.0;
    for (const auto& d : w.dW) dscale = std::max(dscale, detail::max_abs(d));
    r.add("lie_gamma", detail::max_abs(lie), std::max(wmax, dscale) * std::max(1.0, S.cwiseAbs().maxCoeff()), tol.get("lie_gamma"));

    r.add("vert_isotropy", detail::max_abs(w.W.bottomRightCorner(n, n)), wmax, tol.get("vert_isotropy"));

    const auto dw = exterior_derivative(w);
    double dh = 0.0, closed = 0.0;
    for (int i = 0; i < n; ++i) {
        const Vec Hi = horizontal_lift(s, Vec::Unit(n, i));
        Mat contracted = Mat::Zero(2 * n, 2 * n);
        for (int a = 0; a < 2 * n; ++a) contracted += Hi[a] * dw[a];
        dh = std::max(dh, detail::max_abs(contracted.bottomRightCorner(n, n)));
    }
    for (const auto& m : dw) closed = std::max(closed, detail::max_abs(m));
    r.add("dH_vert", dh, dscale, tol.get("dH_vert"));
    r.add("closed", closed, dscale, tol.get("closed"));

    const int rank = numerical_rank(w.W);
    r.add("rank", std::abs(rank - (2 * n - 2)), 0.0, 0.0, rank);
    if (rank < 2 * n - 2) r.flags.push_back("degenerate");
    return r;
}

/// q(v) = omega(v^h, v^v).
inline double quadratic_form(const SprayData& s, const Mat& W, const Vec& v) {
    return horizontal_lift(s, v).dot(W * vertical_lift(v));
}

inline double quadratic_form(const FieldDef& spray, const TwoFormField& omega, const Point& p, const Vec& v) {
    const SprayData s = spray_data(spray, p);
    const TwoFormJet w = omega.jet(p);
    if (detail::max_abs(w.W.bottomRightCorner(p.n(), p.n())) > kAnnihilationTol * std::max(1.0, detail::max_abs(w.W)))
        throw DomainError("quadratic form needs a vertically isotropic 2-form");
    return quadratic_form(s, w.W, v);
}

// Quasi-definiteness ------------------------------------------------------------

enum class Definiteness { positive_quasi_definite, negative_quasi_definite, indefinite, degenerate };

inline const char* definiteness_name(Definiteness d) {
    switch (d) {
        case Definiteness::positive_quasi_definite: return "positive_quasi_definite";
        case Definiteness::negative_quasi_definite: return "negative_quasi_definite";
        case Definiteness::indefinite: return "indefinite";
        case Definiteness::degenerate: return "degenerate";
    }
    return "?";
}

struct QuasiDefiniteness {
    double min_eig = 0.0;
    double max_eig = 0.0;
    Vec eigenvalues;
    Definiteness classification = Definiteness::degenerate;
};

inline constexpr double kDefinitenessThreshold = 1e-10;

/// Sign pattern of the signature of h restricted to the orthogonal complement of y.
inline Definiteness classify_eigenvalues(const Vec& ev, double threshold = kDefinitenessThreshold) {
    bool pos = false, neg = false, zero = ev.size() == 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] > threshold) pos = true;
        else if (ev[i] < -threshold) neg = true;
        else zero = true;
    }
    if (pos && neg) return Definiteness::indefinite;
    if (zero) return Definiteness::degenerate;
    return pos ? Definiteness::positive_quasi_definite : Definiteness::negative_quasi_definite;
}

/// Orthonormal basis (as columns) of the complement of span(y).
inline Mat orthogonal_complement(const Vec& y) {
    const auto n = y.size();
    const Mat ym = y;
    Eigen::HouseholderQR<Mat> qr(ym);
    const Mat Q = qr.householderQ() * Mat::Identity(n, n);
    return Q.rightCols(n - 1);
}

inline QuasiDefiniteness quasi_definiteness(const Mat& h, const Vec& y) {
    if (h.rows() != y.size() || h.cols() != y.size()) throw DimensionMismatch("multiplier and y sizes differ");
    if (y.norm() < kFibreEps) throw DomainError("fibre vector below the slit threshold");
    if ((h * y).norm() > 1e-8 * h.norm())
        throw AnnihilationError("multiplier does not annihilate y");
    const Mat Q = orthogonal_complement(y);
    const Mat hs = 0.5 * (h + h.transpose());
    const Mat restricted = Q.transpose() * hs * Q;
    QuasiDefiniteness q;
    q.eigenvalues = Eigen::SelfAdjointEigenSolver<Mat>(restricted, Eigen::EigenvaluesOnly).eigenvalues();
    if (q.eigenvalues.size() > 0) {
        q.min_eig = q.eigenvalues.minCoeff();
        q.max_eig = q.eigenvalues.maxCoeff();
    }
    q.classification = classify_eigenvalues(q.eigenvalues);
    return q;
}

}  // namespace spraymetric
