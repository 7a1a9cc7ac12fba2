// Acceptance gate: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <spraymetric/run.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <string>

using namespace spraymetric;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (detail.size() < 400) detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

Vec v3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

std::vector<Point> shell_points(int count, int n, std::uint64_t seed) {
    RunConfig c;
    c.count = count;
    c.seed = seed;
    c.xbox = {{-1.0, 1.0}};
    c.rmin = 0.5;
    c.rmax = 2.0;
    return sample_points(c, n);
}

double max_diff(const Mat& a, const Mat& b) { return (a - b).cwiseAbs().maxCoeff(); }

// 1 -------------------------------------------------------------------------------
Outcome spiral_certification() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const FieldDef spray = spiral_spray();
    const Multiplier h = Multiplier::from_hessian(spiral_finsler());
    double worst = 0.0, min_eig = 1e300;
    for (const Point& p : shell_points(1000, 3, 101)) {
        const ConditionReport r = helmholtz_residuals(spray, h, p);
        for (const auto& e : r.entries) {
            worst = std::max(worst, e.residual);
            o.require(e.residual <= 1e-8, e.name + " residual " + sci(e.residual));
        }
        const QuasiDefiniteness q = quasi_definiteness(h.value(p), p.y);
        o.require(q.classification == Definiteness::positive_quasi_definite, "not positive quasi-definite");
        min_eig = std::min(min_eig, q.min_eig);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(min_eig >= 0.25, "min_eig " + sci(min_eig));
    o.require(secs <= 10.0, "runtime " + sci(secs) + " s");
    o.detail += (o.detail.empty() ? "" : "; ") + std::string("max residual ") + sci(worst) + ", min_eig " +
                sci(min_eig) + ", " + sci(secs) + " s";
    return o;
}

// 2 -------------------------------------------------------------------------------
Outcome bm_conditions() {
    Outcome o;
    const FieldDef spray = spiral_spray();
    const Covector theta = Covector::from_scalar(spiral_finsler());
    double worst = 0.0, min_f = 1e300;
    for (const Point& p : shell_points(1000, 3, 102)) {
        const ConditionReport r = bm_residuals(spray, theta, p);
        for (const char* name : {"lie_delta", "dJ", "dH"}) {
            worst = std::max(worst, r.at(name).residual);
            o.require(r.at(name).residual <= 1e-8, std::string(name) + " " + sci(r.at(name).residual));
        }
        o.require(r.at("rank_dtheta").value == 4.0, "rank " + sci(r.at("rank_dtheta").value));
        min_f = std::min(min_f, r.at("positivity").value);
    }
    o.require(min_f > 0.0, "F reaches " + sci(min_f));
    o.detail += (o.detail.empty() ? "" : "; ") + std::string("max residual ") + sci(worst) + ", min F " + sci(min_f);
    return o;
}

// 3 -------------------------------------------------------------------------------
Outcome three_way_identity() {
    Outcome o;
    const FieldDef spray = spiral_spray();
    const Multiplier h = Multiplier::from_hessian(spiral_finsler());
    const Covector theta = Covector::from_scalar(spiral_finsler());
    const TwoFormField closed = TwoFormField::from_field(spiral_omega());
    double worst = 0.0;
    for (const Point& p : shell_points(200, 3, 103)) {
        const Mat k = kahler_lift(spray, h, p).coordinate.matrix();
        const Mat d = dtheta_matrix(theta.jet(p, 1));
        const Mat w = closed.jet(p).W;
        const double e = std::max({max_diff(k, w), std::min(max_diff(d, w), max_diff(-d, w)),
                                   std::min(max_diff(d, k), max_diff(-d, k))});
        worst = std::max(worst, e);
    }
    o.require(worst <= 1e-9, "deviation " + sci(worst));
    o.detail += (o.detail.empty() ? "" : "; ") + std::string("max deviation ") + sci(worst);
    return o;
}

// 4 -------------------------------------------------------------------------------
Outcome concomitance() {
    Outcome o;
    const FieldDef spray = spiral_spray();
    const Multiplier h = Multiplier::from_hessian(spiral_finsler());
    const std::vector<FieldDef> factors{parse_field("F = sqrt(u^2+v^2+w^2)", FieldKind::scalar, 3),
                                        parse_field("F = u^2/sqrt(u^2+v^2+w^2)", FieldKind::scalar, 3)};
    std::mt19937_64 rng(104);
    std::normal_distribution<double> g;
    double wk = 0.0, wq = 0.0;
    for (std::size_t f = 0; f < factors.size(); ++f) {
        const FieldDef moved = projective_transform(spray, factors[f]);
        const TwoFormField k0 = TwoFormField::kahler(spray, h), k1 = TwoFormField::kahler(moved, h);
        for (const Point& p : shell_points(50, 3, 200 + f)) {
            wk = std::max(wk, max_diff(k0.jet(p).W, k1.jet(p).W));
            const Vec v = v3(g(rng), g(rng), g(rng));
            wq = std::max(wq, std::abs(quadratic_form(spray, k0, p, v) - quadratic_form(moved, k1, p, v)));
        }
    }
    o.require(wk <= 1e-10, "Kahler lift moved by " + sci(wk));
    o.require(wq <= 1e-10, "q moved by " + sci(wq));
    o.detail += (o.detail.empty() ? "" : "; ") + std::string("Kahler ") + sci(wk) + ", q " + sci(wq);
    return o;
}

// 5 -------------------------------------------------------------------------------
Outcome geodesic_accuracy() {
    Outcome o;
    const FieldDef spray = spiral_spray();
    const double T = std::numbers::pi / 2;
    const Trajectory a = integrate_geodesic(spray, Point(v3(0, 0, 0), v3(1, 0, 0)), T, 1e-10, {T});
    const Vec target = (Vec(6) << 1, 1, 0, 0, 1, 0).finished();
    const double end = (a.states.back().z() - target).cwiseAbs().maxCoeff();
    o.require(end <= 1e-6, "endpoint error " + sci(end));

    double drift = 0.0;
    for (const Point& p0 : shell_points(10, 3, 105)) {
        const Trajectory tr = integrate_geodesic(spray, p0, 10.0, 1e-11, uniform_times(10.0, 200));
        const double mu0 = std::hypot(p0.y[0], p0.y[1]), w0 = p0.y[2];
        for (const Point& q : tr.states)
            drift = std::max({drift, std::abs(std::hypot(q.y[0], q.y[1]) - mu0), std::abs(q.y[2] - w0)});
    }
    o.require(drift <= 1e-8, "first integral drift " + sci(drift));
    o.detail += (o.detail.empty() ? "" : "; ") + std::string("endpoint ") + sci(end) + ", drift " + sci(drift);
    return o;
}

// 6 -------------------------------------------------------------------------------
Outcome jacobi_suite() {
    Outcome o;
    const FieldDef spray = spiral_spray();
    const TwoFormField omega = TwoFormField::kahler(spray, Multiplier::from_hessian(spiral_finsler()));
    std::mt19937_64 rng(106);
    std::normal_distribution<double> g;
    auto draw = [&] { return v3(g(rng), g(rng), g(rng)); };
    double trivial = 0.0, affine = 0.0, pairing = 0.0, lagrangian = 0.0;
    for (const Point& p0 : shell_points(10, 3, 107)) {
        const Trajectory tr = integrate_geodesic(spray, p0, 5.0, 1e-10, uniform_times(5.0, 50));
        const Vec zero = Vec::Zero(3);
        const JacobiChannel c1 = integrate_jacobi(spray, tr, p0.y, zero);
        const JacobiChannel c2 = integrate_jacobi(spray, tr, zero, p0.y);
        for (std::size_t k = 0; k < tr.times.size(); ++k) {
            const Vec& yk = tr.states[k].y;
            trivial = std::max({trivial, (c1.zeta[k] - yk).cwiseAbs().maxCoeff(),
                                (c2.zeta[k] - tr.times[k] * yk).cwiseAbs().maxCoeff()});
        }
        const JacobiChannel a = integrate_jacobi(spray, tr, draw(), draw());
        const JacobiChannel b = integrate_jacobi(spray, tr, draw(), draw());
        pairing = std::max(pairing, pairing_constancy(spray, omega, tr, a, b));
        const JacobiChannel l1 = integrate_jacobi(spray, tr, zero, draw());
        const JacobiChannel l2 = integrate_jacobi(spray, tr, zero, draw());
        for (double v : pairing_series(spray, omega, tr, l1, l2)) lagrangian = std::max(lagrangian, std::abs(v));

        const FieldDef flat = flat_spray(3);
        const Trajectory ft = integrate_geodesic(flat, p0, 5.0, 1e-10, uniform_times(5.0, 50));
        const Vec z0 = draw(), n0 = draw();
        const JacobiChannel fc = integrate_jacobi(flat, ft, z0, n0);
        for (std::size_t k = 0; k < ft.times.size(); ++k)
            affine = std::max(affine, (fc.zeta[k] - (z0 + ft.times[k] * n0)).cwiseAbs().maxCoeff());
    }
    o.require(trivial <= 1e-6, "trivial fields off by " + sci(trivial));
    o.require(affine <= 1e-9, "flat fields off by " + sci(affine));
    o.require(pairing <= 1e-6, "pairing drift " + sci(pairing));
    o.require(lagrangian <= 1e-7, "Lagrangian pairing " + sci(lagrangian));
    o.detail += (o.detail.empty() ? "" : "; ") + std::string("trivial ") + sci(trivial) + ", affine " + sci(affine) +
                ", pairing " + sci(pairing) + ", lagrangian " + sci(lagrangian);
    return o;
}

// 7 -------------------------------------------------------------------------------
Outcome path_space_chart() {
    Outcome o;
    const FieldDef spray = spiral_spray();
    double flow = 0.0, pull = 0.0, circle = 0.0;
    for (Point p0 : shell_points(20, 3, 108)) {
        if (std::abs(p0.y[2]) < 0.2 * p0.y.norm()) p0.y[2] = 0.5 * p0.y.norm();
        const PathCoords c0 = to_path_coords_spiral(p0);
        const Trajectory tr = integrate_geodesic(spray, p0, 10.0, 1e-11, uniform_times(10.0, 100));
        for (const Point& q : tr.states) {
            const PathCoords c = to_path_coords_spiral(q);
            flow = std::max({flow, std::abs(c.xi - c0.xi), std::abs(c.eta - c0.eta), std::abs(c.nu - c0.nu),
                             angle_distance(c.vartheta, c0.vartheta)});
        }
    }
    for (const Point& p : shell_points(200, 3, 109))
        pull = std::max(pull, pullback_check_spiral(p).at("pullback_vs_closed_form").residual);
    for (const Point& p : shell_points(200, 2, 110))
        circle = std::max(circle, circle_identity_check(p).at("dtheta_vs_minus_dxi_deta").residual);
    circle = std::max(circle, circle_identity_check(Point(Vec::Zero(2), Vec::Unit(2, 0))).aggregate());
    o.require(flow <= 1e-6, "path coordinates drift " + sci(flow));
    o.require(pull <= 1e-9, "pullback deviation " + sci(pull));
    o.require(circle <= 1e-10, "circle identity deviation " + sci(circle));
    o.detail += (o.detail.empty() ? "" : "; ") + std::string("flow ") + sci(flow) + ", pullback " + sci(pull) +
                ", circle " + sci(circle);
    return o;
}

// 8 -------------------------------------------------------------------------------
Outcome totally_geodesic() {
    Outcome o;
    const FieldDef spray = spiral_spray();
    Mat xy = Mat::Zero(3, 2);
    xy(0, 0) = xy(1, 1) = 1.0;
    double planes = 0.0;
    for (double z : {-2.0, 0.0, 0.5, 3.0}) planes = std::max(planes, totally_geodesic_residual(spray, {v3(0, 0, z), xy}, 500));
    Mat xz = Mat::Zero(3, 2);
    xz(0, 0) = xz(2, 1) = 1.0;
    const AffineSubspace y0{v3(0, 0, 0), xz};
    const double probe = totally_geodesic_probe(spray, y0, Point(v3(0, 0, 0), v3(1, 0, 0)));
    double restrict = 0.0;
    for (const Point& q : shell_points(200, 2, 111)) {
        const Vec g = eval_field(spray, Point(v3(q.x[0], q.x[1], 0.0), v3(q.y[0], q.y[1], 0.0)));
        restrict = std::max({restrict, (g.head(2) - eval_field(circle_spray(), q)).cwiseAbs().maxCoeff(), std::abs(g[2])});
    }
    o.require(planes <= 1e-12, "z = const residual " + sci(planes));
    o.require(probe >= 0.5, "y = 0 probe " + sci(probe));
    o.require(restrict == 0.0, "restriction differs by " + sci(restrict));
    o.detail += (o.detail.empty() ? "" : "; ") + std::string("planes ") + sci(planes) + ", y=0 probe " + sci(probe) +
                ", restriction " + sci(restrict);
    return o;
}

// 9 -------------------------------------------------------------------------------
Outcome positivity_window() {
    Outcome o;
    const FieldDef F = spiral_finsler();
    std::mt19937_64 rng(112);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double inside = 1e300, outside = -1e300;
    for (int k = 0; k < 120; ++k) {
        const double a = 2 * std::numbers::pi * unit(rng), z = 4 * unit(rng) - 2;
        const double rin = k < 40 ? std::sqrt(3.9) : std::sqrt(3.9 * unit(rng));
        const double rout = k < 40 ? std::sqrt(4.1) : std::sqrt(4.1 + 5 * unit(rng));
        inside = std::min(inside, fibre_minimum(F, v3(rin * std::cos(a), rin * std::sin(a), z)));
        outside = std::max(outside, fibre_minimum(F, v3(rout * std::cos(a), rout * std::sin(a), z)));
    }
    o.require(inside > 0.0, "F reaches " + sci(inside) + " inside");
    o.require(outside <= 0.0, "some outer fibre has min F " + sci(outside));
    o.detail += (o.detail.empty() ? "" : "; ") + std::string("min F inside ") + sci(inside) +
                ", worst fibre minimum outside " + sci(outside);
    return o;
}

// 10 ------------------------------------------------------------------------------

/// Central difference of order |mi| with step h, refined by two Richardson
/// levels (h, h/2, h/4) to remove the h^2 and h^4 error terms.
double fd_richardson(const ExprPtr& e, const Vec& z, const std::vector<int>& mi, double h) {
    auto central = [&](double step) {
        Vec w = z;
        std::function<double(std::size_t)> rec = [&](std::size_t level) -> double {
            if (level == mi.size()) return evaluate(e, std::span<const double>(w.data(), w.size()));
            const int a = mi[level];
            const double saved = w[a];
            w[a] = saved + step;
            const double up = rec(level + 1);
            w[a] = saved - step;
            const double down = rec(level + 1);
            w[a] = saved;
            return (up - down) / (2 * step);
        };
        return rec(0);
    };
    const double d1 = central(h), d2 = central(h / 2), d4 = central(h / 4);
    const double r1 = (4 * d2 - d1) / 3, r2 = (4 * d4 - d2) / 3;
    return (16 * r2 - r1) / 15;
}

Outcome kernel_validation() {
    Outcome o;
    const FieldDef g = parse_field("h11 = 1 + x^2; h12 = x*y; h22 = 1 + y^2", FieldKind::sym2tensor, 2);
    const std::vector<std::pair<std::string, FieldDef>> fields{
        {"spiral", spiral_spray()},
        {"circle", circle_spray()},
        {"flat", flat_spray(3)},
        {"riemannian", riemannian_spray(g)},
        {"spiral F", spiral_finsler()},
        {"circle F", circle_finsler()},
        {"spiral theta", hilbert_covector(spiral_finsler())},
        {"spiral hessian", hessian_field(spiral_finsler())},
        {"spiral omega", spiral_omega()},
    };
    constexpr std::array<double, 4> steps{0.0, 2e-3, 5e-3, 1.5e-2};
    double worst = 0.0;
    std::string where;
    long compared = 0;
    for (std::size_t fi = 0; fi < fields.size(); ++fi) {
        const FieldDef& f = fields[fi].second;
        const int dim = 2 * f.n();
        const auto dirs = DirectionSet::all(dim);
        for (const Point& p : shell_points(100, f.n(), 300 + fi)) {
            const auto jets = eval_field_jet(f, p, 3, dirs);
            const Vec z = p.z();
            for (int c = 0; c < f.size(); ++c) {
                std::vector<int> mi;
                std::function<void(int)> walk = [&](int from) {
                    if (!mi.empty()) {
                        const Jet& j = jets[c];
                        const double exact = mi.size() == 1   ? j.d(mi[0])
                                             : mi.size() == 2 ? j.d2(mi[0], mi[1])
                                                              : j.d3(mi[0], mi[1], mi[2]);
                        const double fd = fd_richardson(f.expr(c), z, mi, steps[mi.size()] * std::min(1.0, p.y.norm()));
                        const double rel = std::abs(exact - fd) / std::max(1.0, std::abs(exact));
                        ++compared;
                        if (rel > worst) {
                            worst = rel;
                            where = fields[fi].first + " order " + std::to_string(mi.size());
                        }
                    }
                    if (mi.size() == 3) return;
                    for (int a = from; a < dim; ++a) {
                        mi.push_back(a);
                        walk(a);
                        mi.pop_back();
                    }
                };
                walk(0);
            }
        }
    }
    o.require(worst <= 1e-6, "jet vs FD " + sci(worst) + " (" + where + ")");

    RunConfig neg;
    neg.spray = "flat";
    neg.dim = 3;
    neg.multiplier = "h11 = 1; h12 = 0; h13 = 0; h22 = 1; h23 = 0; h33 = 1";
    neg.suites = {"helmholtz"};
    neg.count = 50;
    const RunResult r = run(neg);
    bool every = true;
    for (const auto& pr : r.results) every = every && !pr.report.at("annihilates_y").pass;
    o.require(r.exit_status == 1, "negative control exit status " + std::to_string(r.exit_status));
    o.require(every, "negative control passed annihilation somewhere");
    o.detail += (o.detail.empty() ? "" : "; ") + std::to_string(compared) + " derivatives, worst relative " + sci(worst) +
                " (" + where + "), negative control exit " + std::to_string(r.exit_status);
    return o;
}

// 11 ------------------------------------------------------------------------------
Outcome grassmann_suite() {
    Outcome o;
    const FieldDef spray = spiral_spray();
    const Multiplier h = Multiplier::from_hessian(spiral_finsler());
    double iso = 0.0, trace = 0.0, min_q = 1e300;
    for (const Point& p : shell_points(300, 3, 113)) {
        const ConditionReport r = segre_checks(spray, h, p);
        iso = std::max({iso, r.at("horiz_isotropy").residual, r.at("vert_isotropy").residual});
        o.require(r.classification == "positive_quasi_definite", "two-plane values not positive");
        min_q = std::min(min_q, r.at("two_plane_definiteness").value);
        trace = std::max(trace, grassmann_frame(spray, p).trace_conn.cwiseAbs().maxCoeff());
    }
    o.require(iso <= 1e-10, "isotropy " + sci(iso));
    o.require(min_q > 0.0, "two-plane minimum " + sci(min_q));
    o.require(trace <= 1e-12, "trace connection " + sci(trace));
    o.detail += (o.detail.empty() ? "" : "; ") + std::string("isotropy ") + sci(iso) + ", min two-plane value " +
                sci(min_q) + ", trace " + sci(trace);
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"spiral certification", spiral_certification},
        {"semi-basic 1-form conditions", bm_conditions},
        {"three-way 2-form identity", three_way_identity},
        {"concomitance under projective change", concomitance},
        {"geodesic accuracy", geodesic_accuracy},
        {"Jacobi suite", jacobi_suite},
        {"path-space chart", path_space_chart},
        {"totally geodesic planes", totally_geodesic},
        {"positivity window", positivity_window},
        {"kernel validation", kernel_validation},
        {"Grassmann suite", grassmann_suite},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failures += !o.pass;
        std::printf("AC%-2zu %s  %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
