// spraycheck: command line driver for the spraymetric library.
//
//   spraycheck check --spray spiral --finsler builtin --suite helmholtz,bm --points 1000 --out report.json
//   spraycheck geodesic --spray spiral --from "0,0,0;1,0,0" --t-end 1.5708 --out traj.csv
//   spraycheck jacobi --spray spiral --from "0,0,0;1,0,1" --zeta0 1,0,0 --nabla-zeta0 0,0,0
//   spraycheck example spiral --verify
//
// Exit status: 0 all checks pass, 1 some check failed, 2 invalid input.

#include <spraymetric/run.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>

using namespace spraymetric;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + path + "'");
    f << text;
}

struct SprayArgs {
    std::string spray = "spiral";
    int dim = 0;

    void attach(CLI::App* app) {
        app->add_option("--spray", spray, "built-in name (spiral, circle, flat) or spray file")->capture_default_str();
        app->add_option("--dim", dim, "base dimension (spray files and flat)");
    }

    FieldDef load() const {
        RunConfig c;
        c.spray = spray;
        c.dim = dim;
        return load_spray(c);
    }
};

int cmd_check(const RunConfig& base, const std::map<std::string, CLI::Option*>& given, const RunConfig& flags,
              const std::string& config_path, const std::vector<std::string>& overrides, const std::string& suites,
              const std::string& box, const std::string& shell) {
    RunConfig c = base;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot open config '" + config_path + "'");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        c = config_from_json(j);
    }
    auto set = [&](const char* name) { return given.at(name)->count() > 0; };
    if (set("--spray")) c.spray = flags.spray;
    if (set("--dim")) c.dim = flags.dim;
    if (set("--finsler")) c.finsler = flags.finsler;
    if (set("--theta")) c.theta = flags.theta;
    if (set("--multiplier")) c.multiplier = flags.multiplier;
    if (set("--twoform")) c.twoform = flags.twoform;
    if (set("--points")) c.count = flags.count;
    if (set("--seed")) c.seed = flags.seed;
    if (set("--xdisk")) c.xdisk = flags.xdisk;
    if (set("--tol")) c.tol = flags.tol;
    if (set("--t-end")) c.t_end = flags.t_end;
    if (set("--threads")) c.threads = flags.threads;
    if (set("--skip-domain-errors")) c.skip_domain_errors = flags.skip_domain_errors;
    if (set("--out")) c.out = flags.out;
    if (set("--suite")) c.suites = split(suites, ',');
    if (set("--xbox")) c.xbox = parse_box(box);
    if (set("--fibre-shell")) {
        const Vec r = parse_vector(shell);
        if (r.size() != 2) throw ConfigError("fibre shell needs the form rmin,rmax");
        c.rmin = r[0];
        c.rmax = r[1];
    }
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("tolerance override '" + o + "' needs the form key=value");
        try {
            c.tol_overrides[o.substr(0, eq)] = std::stod(o.substr(eq + 1));
        } catch (const std::logic_error&) {
            throw ConfigError("tolerance override '" + o + "' is not numeric");
        }
    }

    const RunResult res = run(c);
    write_output(c.out, report_string(res));
    long failed = 0, errors = 0;
    for (const auto& r : res.results) {
        if (!r.error.empty() && !r.skipped) ++errors;
        else if (r.error.empty() && !r.report.all_pass()) ++failed;
    }
    std::cerr << "spraycheck: " << res.points.size() << " points, " << c.suites.size() << " suites, " << failed
              << " failing reports, " << errors << " evaluation errors -> " << (res.exit_status == 0 ? "PASS" : "FAIL")
              << '\n';
    return res.exit_status;
}

std::vector<JacobiChannel> jacobi_channels(const FieldDef& spray, const Trajectory& tr,
                                           const std::vector<std::string>& zeta0,
                                           const std::vector<std::string>& nabla0) {
    if (zeta0.size() != nabla0.size()) throw ConfigError("give one --nabla-zeta0 for every --zeta0");
    std::vector<JacobiChannel> out;
    for (std::size_t k = 0; k < zeta0.size(); ++k)
        out.push_back(integrate_jacobi(spray, tr, parse_vector(zeta0[k]), parse_vector(nabla0[k])));
    return out;
}

struct Check {
    std::string label;
    bool pass;
    std::string detail;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

std::vector<Check> verify_spiral() {
    std::vector<Check> out;
    const FieldDef spray = spiral_spray(), F = spiral_finsler();
    const Point ref(Vec((Vec(3) << 0, 0, 0).finished()), Vec((Vec(3) << 1, 0, 1).finished()));

    const Vec g = eval_field(spray, ref);
    const double lam = std::sqrt(2.0);
    const double dg = (g - (Vec(3) << 0.0, -lam / 2, 0.0).finished()).cwiseAbs().maxCoeff();
    out.push_back({"spray coefficients (v lambda/2, -u lambda/2, 0)", dg <= 1e-15, fmt(dg)});

    const PathCoords pc = to_path_coords_spiral(ref);
    const double dpc = std::max({std::abs(pc.xi), std::abs(pc.eta - 1 / lam), std::abs(pc.nu - 1 / lam),
                                 angle_distance(pc.vartheta, 1.5 * std::numbers::pi)});
    out.push_back({"path coordinates (0, 1/sqrt2, 1/sqrt2, 3pi/2)", dpc <= 1e-14, fmt(dpc)});

    const ConditionReport pb = pullback_check_spiral(ref);
    out.push_back({"pullback of Omega, closed form and Hilbert 2-form agree", pb.all_pass(), fmt(pb.aggregate())});
    const ConditionReport lf = lagrangian_fibre_check(ref);
    out.push_back({"spirals through a point form a Lagrangian surface", lf.all_pass(), fmt(lf.aggregate())});

    const Multiplier h = Multiplier::from_hessian(F);
    const ConditionReport hz = helmholtz_residuals(spray, h, ref);
    out.push_back({"Helmholtz conditions for the fibre Hessian", hz.all_pass(), fmt(hz.aggregate())});
    const QuasiDefiniteness q = quasi_definiteness(h.value(ref), ref.y);
    out.push_back({"fibre Hessian is positive quasi-definite",
                   q.classification == Definiteness::positive_quasi_definite, "min_eig " + fmt(q.min_eig)});
    const ConditionReport bm = bm_residuals(spray, Covector::from_scalar(F), ref);
    out.push_back({"1-form conditions for the Hilbert form", bm.all_pass(), fmt(bm.aggregate())});
    const ConditionReport tf = twoform_residuals(spray, TwoFormField::kahler(spray, h), ref);
    out.push_back({"2-form conditions for the Kahler lift", tf.all_pass(), fmt(tf.aggregate())});

    const Point start(Vec((Vec(3) << 0, 0, 0).finished()), Vec((Vec(3) << 1, 0, 0).finished()));
    const Trajectory tr = integrate_geodesic(spray, start, std::numbers::pi / 2, 1e-10, {std::numbers::pi / 2});
    const Vec target = (Vec(6) << 1, 1, 0, 0, 1, 0).finished();
    const double dend = (tr.states.back().z() - target).cwiseAbs().maxCoeff();
    out.push_back({"geodesic from (0,0,0;1,0,0) reaches (1,1,0;0,1,0) at pi/2", dend <= 1e-6, fmt(dend)});

    const double inside = fibre_minimum(F, Vec((Vec(3) << std::sqrt(3.9), 0, 0).finished()));
    const double outside = fibre_minimum(F, Vec((Vec(3) << std::sqrt(4.1), 0, 0).finished()));
    out.push_back({"F > 0 on the fibre at x^2 + y^2 = 3.9", inside > 0.0, "min " + fmt(inside)});
    out.push_back({"F <= 0 somewhere on the fibre at x^2 + y^2 = 4.1", outside <= 0.0, "min " + fmt(outside)});
    return out;
}

std::vector<Check> verify_circle() {
    std::vector<Check> out;
    const FieldDef spray = circle_spray(), F = circle_finsler();
    const Point ref(Vec((Vec(2) << 0, 0).finished()), Vec((Vec(2) << 1, 0).finished()));
    const ConditionReport ci = circle_identity_check(ref);
    out.push_back({"d theta = -dxi ^ deta and its closed form", ci.all_pass(), fmt(ci.aggregate())});
    const ConditionReport bm = bm_residuals(spray, Covector::from_scalar(F), ref);
    out.push_back({"1-form conditions for the Hilbert form", bm.all_pass(), fmt(bm.aggregate())});
    const ConditionReport hz = helmholtz_residuals(spray, Multiplier::from_hessian(F), ref);
    out.push_back({"Helmholtz conditions for the fibre Hessian", hz.all_pass(), fmt(hz.aggregate())});
    return out;
}

int cmd_example(const std::string& name, bool verify) {
    if (!verify) {
        if (name == "spiral") std::cout << spiral_spray().print() << '\n' << spiral_finsler().print() << '\n';
        else if (name == "circle") std::cout << circle_spray().print() << '\n' << circle_finsler().print() << '\n';
        else throw ConfigError("unknown example '" + name + "'");
        return 0;
    }
    std::vector<Check> checks;
    if (name == "spiral") checks = verify_spiral();
    else if (name == "circle") checks = verify_circle();
    else throw ConfigError("unknown example '" + name + "'");
    bool ok = true;
    for (const auto& c : checks) {
        std::cout << (c.pass ? "PASS  " : "FAIL  ") << c.label << "  [" << c.detail << "]\n";
        ok = ok && c.pass;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical checks of projective Finsler metrizability for sprays"};
    app.require_subcommand(1);

    // check
    auto* check = app.add_subcommand("check", "sample points and run condition suites");
    RunConfig flags;
    std::string config_path, suites = "helmholtz", box, shell;
    std::vector<std::string> overrides;
    std::map<std::string, CLI::Option*> given;
    given["--spray"] = check->add_option("--spray", flags.spray, "built-in name or spray file");
    given["--dim"] = check->add_option("--dim", flags.dim, "base dimension");
    given["--finsler"] = check->add_option("--finsler", flags.finsler, "scalar F: file, inline definition or 'builtin'");
    given["--theta"] = check->add_option("--theta", flags.theta, "semi-basic 1-form: file or inline definition");
    given["--multiplier"] = check->add_option("--multiplier", flags.multiplier, "multiplier h: file or inline definition");
    given["--twoform"] = check->add_option("--twoform", flags.twoform, "2-form: file or inline definition");
    given["--suite"] = check->add_option("--suite", suites, "comma separated: helmholtz,bm,twoform,grassmann,dynamics,example");
    given["--points"] = check->add_option("--points", flags.count, "number of sample points");
    given["--seed"] = check->add_option("--seed", flags.seed, "sampling seed");
    given["--xbox"] = check->add_option("--xbox", box, "base box 'lo,hi' or 'lo,hi;lo,hi;...'");
    given["--xdisk"] = check->add_option("--xdisk", flags.xdisk, "restrict (x1)^2 + (x2)^2 <= R^2");
    given["--fibre-shell"] = check->add_option("--fibre-shell", shell, "fibre radii 'rmin,rmax'");
    given["--tol"] = check->add_option("--tol", flags.tol, "default tolerance");
    check->add_option("--tol-override", overrides, "key=value with key a suite, condition or suite.condition");
    given["--skip-domain-errors"] = check->add_flag("--skip-domain-errors", flags.skip_domain_errors,
                                                    "exclude points that leave the domain from pass rates");
    given["--t-end"] = check->add_option("--t-end", flags.t_end, "trajectory length for the dynamics suite");
    given["--threads"] = check->add_option("--threads", flags.threads, "worker threads (0 = all cores)");
    given["--out"] = check->add_option("--out", flags.out, "report path (default stdout)");
    check->add_option("--config", config_path, "JSON config; explicit flags take precedence");

    // geodesic
    auto* geo = app.add_subcommand("geodesic", "integrate a geodesic and write CSV");
    SprayArgs geo_spray;
    geo_spray.attach(geo);
    std::string from, geo_out;
    double t_end = 1.0, tol = 1e-8;
    int samples = 0;
    geo->add_option("--from", from, "initial point 'x1,..,xn;y1,..,yn'")->required();
    geo->add_option("--t-end", t_end, "final time")->capture_default_str();
    geo->add_option("--tol", tol, "integrator tolerance")->capture_default_str();
    geo->add_option("--samples", samples, "uniform output samples (0 = every accepted step)");
    geo->add_option("--out", geo_out, "CSV path (default stdout)");

    // jacobi
    auto* jac = app.add_subcommand("jacobi", "integrate Jacobi fields along a geodesic and write CSV");
    SprayArgs jac_spray;
    jac_spray.attach(jac);
    std::string jfrom, jac_out;
    double jt_end = 1.0, jtol = 1e-8;
    int jsamples = 0;
    std::vector<std::string> zeta0, nabla0;
    jac->add_option("--from", jfrom, "initial point 'x1,..,xn;y1,..,yn'")->required();
    jac->add_option("--t-end", jt_end, "final time")->capture_default_str();
    jac->add_option("--tol", jtol, "integrator tolerance")->capture_default_str();
    jac->add_option("--samples", jsamples, "uniform output samples (0 = every accepted step)");
    jac->add_option("--zeta0", zeta0, "initial zeta, repeatable")->required();
    jac->add_option("--nabla-zeta0", nabla0, "initial nabla zeta, repeatable")->required();
    jac->add_option("--out", jac_out, "CSV path (default stdout)");

    // example
    auto* ex = app.add_subcommand("example", "print or verify a built-in example");
    std::string ex_name;
    bool verify = false;
    ex->add_option("name", ex_name, "spiral or circle")->required();
    ex->add_flag("--verify", verify, "run the reference checks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*check) return cmd_check(RunConfig{}, given, flags, config_path, overrides, suites, box, shell);
        if (*geo) {
            const FieldDef spray = geo_spray.load();
            const Trajectory tr = integrate_geodesic(spray, parse_point(from), t_end, tol,
                                                     samples > 0 ? uniform_times(t_end, samples) : std::vector<double>{});
            std::ostringstream os;
            write_csv(os, tr);
            write_output(geo_out, os.str());
            return 0;
        }
        if (*jac) {
            const FieldDef spray = jac_spray.load();
            const Trajectory tr = integrate_geodesic(spray, parse_point(jfrom), jt_end, jtol,
                                                     jsamples > 0 ? uniform_times(jt_end, jsamples) : std::vector<double>{});
            std::ostringstream os;
            write_csv(os, tr, jacobi_channels(spray, tr, zeta0, nabla0));
            write_output(jac_out, os.str());
            return 0;
        }
        if (*ex) return cmd_example(ex_name, verify);
    } catch (const ParseError& e) {
        std::cerr << "spraycheck: parse error at " << e.line() << ":" << e.column() << ": " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "spraycheck: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
