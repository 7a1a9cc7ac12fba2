#pragma once

// Batch driver: sample points, run condition suites in parallel, merge the
// per-point reports in index order and summarize them as JSON.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dynamics.hpp"
#include "examples.hpp"
#include "grassmann.hpp"
#include "metrizability.hpp"

namespace spraymetric {

inline constexpr const char* kReportSchema = "spraymetric.report/1";
inline const std::vector<std::string> kSuites{"helmholtz", "bm", "twoform", "grassmann", "dynamics", "example"};

struct RunConfig {
    std::string spray = "spiral";  ///< built-in name or field file
    int dim = 0;                   ///< base dimension; 0 = that of the built-in
    std::string finsler, theta, multiplier, twoform;  ///< files, inline definitions or "builtin"
    std::vector<std::pair<double, double>> xbox{{-1.0, 1.0}};  ///< one pair per coordinate, or one for all
    double xdisk = 0.0;  ///< when > 0, base points also satisfy (x^1)^2 + (x^2)^2 <= xdisk^2
    double rmin = 0.5, rmax = 2.0;
    int count = 100;
    std::uint64_t seed = 1;
    std::vector<std::string> suites{"helmholtz"};
    double tol = 1e-8;
    std::map<std::string, double> tol_overrides;  ///< keys: suite, condition or suite.condition
    bool skip_domain_errors = false;
    double t_end = 1.0;  ///< trajectory length for the dynamics suite
    int threads = 0;     ///< 0 = hardware concurrency
    std::string out;
};

struct PointResult {
    std::size_t index = 0;
    std::string suite;
    ConditionReport report;
    std::string error;  ///< non-empty when evaluation failed
    bool skipped = false;
};

struct RunResult {
    RunConfig config;
    std::vector<Point> points;
    std::vector<PointResult> results;  ///< ordered by (point index, suite order)
    int exit_status = 0;
};

// Config ------------------------------------------------------------------------

inline nlohmann::ordered_json config_to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["spray"] = c.spray;
    j["dim"] = c.dim;
    j["finsler"] = c.finsler;
    j["theta"] = c.theta;
    j["multiplier"] = c.multiplier;
    j["twoform"] = c.twoform;
    j["xbox"] = nlohmann::ordered_json::array();
    for (const auto& [lo, hi] : c.xbox) j["xbox"].push_back({lo, hi});
    j["xdisk"] = c.xdisk;
    j["fibre_shell"] = {c.rmin, c.rmax};
    j["count"] = c.count;
    j["seed"] = c.seed;
    j["suites"] = c.suites;
    j["tol"] = c.tol;
    j["tol_overrides"] = c.tol_overrides;
    j["skip_domain_errors"] = c.skip_domain_errors;
    j["t_end"] = c.t_end;
    return j;
}

/// Reads a config object; unknown keys are ignored.
inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        c.spray = j.value("spray", c.spray);
        c.dim = j.value("dim", c.dim);
        c.finsler = j.value("finsler", c.finsler);
        c.theta = j.value("theta", c.theta);
        c.multiplier = j.value("multiplier", c.multiplier);
        c.twoform = j.value("twoform", c.twoform);
        if (j.contains("xbox")) {
            c.xbox.clear();
            for (const auto& p : j["xbox"]) c.xbox.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
        }
        c.xdisk = j.value("xdisk", c.xdisk);
        if (j.contains("fibre_shell")) {
            c.rmin = j["fibre_shell"].at(0).get<double>();
            c.rmax = j["fibre_shell"].at(1).get<double>();
        }
        c.count = j.value("count", c.count);
        c.seed = j.value("seed", c.seed);
        c.suites = j.value("suites", c.suites);
        c.tol = j.value("tol", c.tol);
        c.tol_overrides = j.value("tol_overrides", c.tol_overrides);
        c.skip_domain_errors = j.value("skip_domain_errors", c.skip_domain_errors);
        c.t_end = j.value("t_end", c.t_end);
        c.threads = j.value("threads", c.threads);
        c.out = j.value("out", c.out);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    return c;
}

inline void validate(const RunConfig& c) {
    if (c.count < 1) throw ConfigError("count must be at least 1");
    if (c.suites.empty()) throw ConfigError("select at least one suite");
    for (const auto& s : c.suites)
        if (std::find(kSuites.begin(), kSuites.end(), s) == kSuites.end()) throw ConfigError("unknown suite '" + s + "'");
    if (!(c.rmin >= kFibreEps) || !(c.rmax >= c.rmin)) throw ConfigError("fibre shell must satisfy eps <= rmin <= rmax");
    for (const auto& [lo, hi] : c.xbox)
        if (!(lo <= hi)) throw ConfigError("box bounds must satisfy lo <= hi");
    if (c.xbox.empty()) throw ConfigError("empty box");
    if (c.xdisk < 0.0) throw ConfigError("disk radius must be non-negative");
    if (!(c.tol > 0.0)) throw ConfigError("tolerance must be positive");
}

/// Parses "a,b;c,d;..." into box bounds.
inline std::vector<std::pair<double, double>> parse_box(const std::string& s) {
    std::vector<std::pair<double, double>> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ';')) {
        const auto comma = item.find(',');
        if (comma == std::string::npos) throw ConfigError("box entry '" + item + "' needs the form lo,hi");
        try {
            out.emplace_back(std::stod(item.substr(0, comma)), std::stod(item.substr(comma + 1)));
        } catch (const std::logic_error&) {
            throw ConfigError("box entry '" + item + "' is not numeric");
        }
    }
    return out;
}

/// Parses a comma separated list of reals.
inline Vec parse_vector(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            v.push_back(std::stod(item));
        } catch (const std::logic_error&) {
            throw ConfigError("'" + item + "' is not a number");
        }
    }
    return to_vec(v);
}

/// Parses "x1,..,xn;y1,..,yn".
inline Point parse_point(const std::string& s) {
    const auto semi = s.find(';');
    if (semi == std::string::npos) throw ConfigError("point needs the form x1,..,xn;y1,..,yn");
    const Vec x = parse_vector(s.substr(0, semi)), y = parse_vector(s.substr(semi + 1));
    if (x.size() != y.size()) throw DimensionMismatch("base and fibre parts of the point differ in length");
    return Point(x, y);
}

// Sources -----------------------------------------------------------------------

/// A field given as a file path or, when no such file exists, as inline text.
inline FieldDef load_field_source(const std::string& src, FieldKind kind, int n) {
    if (std::filesystem::exists(src)) return load_field(src, kind, n);
    if (src.find('=') != std::string::npos) return parse_field(src, kind, n);
    throw ConfigError("field source '" + src + "' is neither a file nor a definition");
}

inline FieldDef load_spray(const RunConfig& c) {
    if (is_builtin_spray(c.spray)) return builtin_spray(c.spray, c.dim);
    if (c.dim < 1) throw ConfigError("a spray file needs an explicit dimension");
    return load_field_source(c.spray, FieldKind::spray, c.dim);
}

struct Certificates {
    std::optional<FieldDef> F;
    std::optional<Covector> theta;
    std::optional<Multiplier> h;
    std::optional<TwoFormField> omega;
};

inline Certificates load_certificates(const RunConfig& c, const FieldDef& spray) {
    const int n = spray.n();
    Certificates out;
    if (!c.finsler.empty()) {
        if (c.finsler == "builtin") {
            if (c.spray == "spiral") out.F = spiral_finsler();
            else if (c.spray == "circle") out.F = circle_finsler();
            else throw ConfigError("no built-in Finsler function for spray '" + c.spray + "'");
        } else {
            out.F = load_field_source(c.finsler, FieldKind::scalar, n);
        }
    }
    if (!c.theta.empty()) out.theta = Covector::from_field(load_field_source(c.theta, FieldKind::covector, n));
    else if (out.F) out.theta = Covector::from_scalar(*out.F);
    if (!c.multiplier.empty()) out.h = Multiplier::from_field(load_field_source(c.multiplier, FieldKind::sym2tensor, n));
    else if (out.F) out.h = Multiplier::from_hessian(*out.F);
    else if (!c.theta.empty()) out.h = Multiplier::from_covector(load_field_source(c.theta, FieldKind::covector, n));
    if (!c.twoform.empty()) out.omega = TwoFormField::from_field(load_field_source(c.twoform, FieldKind::twoform, n));
    else if (out.h) out.omega = TwoFormField::kahler(spray, *out.h);
    else if (out.theta) out.omega = TwoFormField::dtheta(*out.theta);
    return out;
}

// Sampling ----------------------------------------------------------------------

/// Base points uniform in the box (and disk), fibre directions uniform on the
/// sphere, radii log-uniform in the shell.
inline std::vector<Point> sample_points(const RunConfig& c, int n) {
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss;
    auto bounds = [&](int i) { return c.xbox.size() == 1 ? c.xbox[0] : c.xbox.at(static_cast<std::size_t>(i)); };
    if (c.xbox.size() != 1 && static_cast<int>(c.xbox.size()) != n)
        throw ConfigError("box needs one pair or one pair per coordinate");
    std::vector<Point> pts;
    pts.reserve(static_cast<std::size_t>(c.count));
    const double lr = std::log(c.rmax / c.rmin);
    while (static_cast<int>(pts.size()) < c.count) {
        Vec x(n), y(n);
        for (int i = 0; i < n; ++i) {
            const auto [lo, hi] = bounds(i);
            x[i] = lo + (hi - lo) * unit(rng);
        }
        double norm = 0.0;
        do {
            for (int i = 0; i < n; ++i) y[i] = gauss(rng);
            norm = y.norm();
        } while (norm < 1e-12);
        y *= c.rmin * std::exp(lr * unit(rng)) / norm;
        if (c.xdisk > 0.0 && n >= 2 && x[0] * x[0] + x[1] * x[1] > c.xdisk * c.xdisk) continue;
        pts.emplace_back(x, y);
    }
    return pts;
}

// Suites ------------------------------------------------------------------------

namespace detail {

inline const std::map<std::string, double>& builtin_tolerances() {
    static const std::map<std::string, double> t{
        {"pairing_constancy", 1e-6},     {"geodesic_drift", 1e-8},
        {"pullback_vs_closed_form", 1e-9}, {"hilbert_vs_closed_form", 1e-9},
        {"pullback_vs_hilbert", 1e-9},   {"lagrangian_fibre", 1e-9},
        {"dtheta_vs_closed_form", 1e-10},      {"dtheta_vs_minus_dxi_deta", 1e-10},
    };
    return t;
}

/// Tolerances for one suite: suite.condition, then condition, then suite,
/// then the built-in default for the condition, then the global value.
inline Tolerances suite_tolerances(const RunConfig& c, const std::string& suite) {
    Tolerances t;
    const auto s = c.tol_overrides.find(suite);
    const bool suite_set = s != c.tol_overrides.end();
    t.fallback = suite_set ? s->second : c.tol;
    if (!suite_set)
        for (const auto& [k, v] : builtin_tolerances()) t.overrides[k] = v;
    for (const auto& [k, v] : c.tol_overrides)
        if (k.find('.') == std::string::npos && std::find(kSuites.begin(), kSuites.end(), k) == kSuites.end())
            t.overrides[k] = v;
    const std::string prefix = suite + ".";
    for (const auto& [k, v] : c.tol_overrides)
        if (k.rfind(prefix, 0) == 0) t.overrides[k.substr(prefix.size())] = v;
    return t;
}

template <class T>
const T& need(const std::optional<T>& v, const char* what, const std::string& suite) {
    if (!v) throw ConfigError("suite '" + suite + "' needs " + what);
    return *v;
}

inline void merge_into(ConditionReport& dst, const ConditionReport& src) {
    dst.entries.insert(dst.entries.end(), src.entries.begin(), src.entries.end());
    dst.flags.insert(dst.flags.end(), src.flags.begin(), src.flags.end());
    if (!src.classification.empty()) dst.classification = src.classification;
}

inline ConditionReport run_suite(const std::string& suite, const FieldDef& spray, const Certificates& cert,
                                 const RunConfig& c, const Point& p, std::size_t index) {
    const Tolerances tol = suite_tolerances(c, suite);
    if (suite == "helmholtz") {
        const Multiplier& h = need(cert.h, "a multiplier or Finsler function", suite);
        ConditionReport r = helmholtz_residuals(spray, h, p, tol);
        if (r.at("annihilates_y").pass) {
            const QuasiDefiniteness q = quasi_definiteness(h.value(p), p.y);
            r.add("quasi_definiteness", positivity_shortfall(q.min_eig - kDefinitenessThreshold), 1.0, 0.0, q.min_eig);
            r.classification = definiteness_name(q.classification);
        }
        return r;
    }
    if (suite == "bm") return bm_residuals(spray, need(cert.theta, "a 1-form or Finsler function", suite), p, tol);
    if (suite == "twoform") return twoform_residuals(spray, need(cert.omega, "a 2-form or certificate", suite), p, tol);
    if (suite == "grassmann") return segre_checks(spray, need(cert.h, "a multiplier or Finsler function", suite), p, tol);
    if (suite == "dynamics") {
        const int n = spray.n();
        std::mt19937_64 rng(c.seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
        std::normal_distribution<double> g;
        auto draw = [&] {
            Vec v(n);
            for (int i = 0; i < n; ++i) v[i] = g(rng);
            return v;
        };
        const Trajectory tr = integrate_geodesic(spray, p, c.t_end, 1e-10, uniform_times(c.t_end, 20));
        const JacobiChannel a = integrate_jacobi(spray, tr, draw(), draw());
        const JacobiChannel b = integrate_jacobi(spray, tr, draw(), draw());
        ConditionReport r;
        r.point = p;
        r.add("geodesic_drift", std::max(a.geodesic_drift, b.geodesic_drift), 1.0, tol.get("geodesic_drift"));
        if (cert.omega) {
            const auto series = pairing_series(spray, *cert.omega, tr, a, b);
            double worst = 0.0, scale = 0.0;
            for (double v : series) {
                worst = std::max(worst, std::abs(v - series.front()));
                scale = std::max(scale, std::abs(v));
            }
            r.add("pairing_constancy", worst, scale, tol.get("pairing_constancy"), series.front());
        }
        return r;
    }
    if (suite == "example") {
        if (c.spray == "spiral") {
            ConditionReport r = pullback_check_spiral(p, tol.get("pullback_vs_closed_form"));
            merge_into(r, lagrangian_fibre_check(p, tol.get("lagrangian_fibre")));
            return r;
        }
        if (c.spray == "circle") return circle_identity_check(p, tol.get("dtheta_vs_closed_form"));
        throw ConfigError("suite 'example' needs the spiral or circle spray");
    }
    throw ConfigError("unknown suite '" + suite + "'");
}

/// Errors that describe the sample point rather than the configuration.
inline bool is_domain_failure(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const DomainError&) {
        return true;
    } catch (const DivisionByZero&) {
        return true;
    } catch (const DegenerateRay&) {
        return true;
    } catch (const StepFailure&) {
        return true;
    } catch (...) {
        return false;
    }
}

/// Runs task(i) for i in [0, count) on a pool pulling indices from a shared counter.
template <class Task>
void parallel_for(std::size_t count, int threads, Task&& task) {
    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, count);
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    auto body = [&](std::size_t w) {
        try {
            for (std::size_t i = next++; i < count; i = next++) task(i);
        } catch (...) {
            errors[w] = std::current_exception();
            next = count;
        }
    };
    if (workers <= 1) {
        body(0);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body, w);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace detail

inline RunResult run(const RunConfig& config) {
    validate(config);
    const FieldDef spray = load_spray(config);
    const Certificates cert = load_certificates(config, spray);
    RunResult out;
    out.config = config;
    out.points = sample_points(config, spray.n());
    const std::size_t ns = config.suites.size();
    out.results.resize(out.points.size() * ns);
    detail::parallel_for(out.points.size(), config.threads, [&](std::size_t i) {
        for (std::size_t s = 0; s < ns; ++s) {
            PointResult& r = out.results[i * ns + s];
            r.index = i;
            r.suite = config.suites[s];
            r.report.point = out.points[i];
            try {
                r.report = detail::run_suite(r.suite, spray, cert, config, out.points[i], i);
                r.report.point = out.points[i];
            } catch (const ConfigError&) {
                throw;
            } catch (const ParseError&) {
                throw;
            } catch (const DimensionMismatch&) {
                throw;
            } catch (const Error& e) {
                r.error = e.what();
                r.skipped = config.skip_domain_errors && detail::is_domain_failure(std::current_exception());
            }
        }
    });
    bool ok = true;
    for (const auto& r : out.results)
        if (!r.skipped && (!r.error.empty() || !r.report.all_pass())) ok = false;
    out.exit_status = ok ? 0 : 1;
    return out;
}

// Report ------------------------------------------------------------------------

namespace detail {

inline nlohmann::ordered_json vec_json(const Vec& v) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

/// JSON has no infinities or NaN; those are written as strings.
inline nlohmann::ordered_json num_json(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

}  // namespace detail

inline nlohmann::ordered_json report_json(const RunResult& res) {
    using json = nlohmann::ordered_json;
    json j;
    j["schema"] = kReportSchema;
    j["config"] = config_to_json(res.config);
    json per = json::array();
    struct Agg {
        double max_residual = 0.0, max_relative = 0.0;
        long failures = 0, evaluated = 0;
    };
    std::map<std::string, std::vector<std::pair<std::string, Agg>>> agg;
    std::map<std::string, std::array<long, 4>> counts;  // points, failed points, errors, skipped
    for (const auto& r : res.results) {
        json e;
        e["index"] = r.index;
        e["point"] = {{"x", detail::vec_json(r.report.point.x)}, {"y", detail::vec_json(r.report.point.y)}};
        e["suite"] = r.suite;
        auto& cnt = counts[r.suite];
        ++cnt[0];
        if (!r.error.empty()) {
            e["error"] = r.error;
            e["skipped"] = r.skipped;
            ++cnt[2];
            if (r.skipped) ++cnt[3];
            else ++cnt[1];
            per.push_back(std::move(e));
            continue;
        }
        json entries = json::array();
        auto& rows = agg[r.suite];
        for (const auto& c : r.report.entries) {
            entries.push_back({{"name", c.name},
                               {"residual", detail::num_json(c.residual)},
                               {"relative", detail::num_json(c.relative)},
                               {"tolerance", c.tolerance},
                               {"pass", c.pass},
                               {"value", detail::num_json(c.value)}});
            auto it = std::find_if(rows.begin(), rows.end(), [&](const auto& p) { return p.first == c.name; });
            if (it == rows.end()) {
                rows.emplace_back(c.name, Agg{});
                it = rows.end() - 1;
            }
            it->second.max_residual = std::max(it->second.max_residual, c.residual);
            it->second.max_relative = std::max(it->second.max_relative, c.relative);
            ++it->second.evaluated;
            if (!c.pass) ++it->second.failures;
        }
        e["entries"] = std::move(entries);
        if (!r.report.flags.empty()) e["flags"] = r.report.flags;
        if (!r.report.classification.empty()) e["classification"] = r.report.classification;
        if (!r.report.all_pass()) ++cnt[1];
        per.push_back(std::move(e));
    }
    j["per_point"] = std::move(per);
    json summary;
    json suites = json::object();
    for (const auto& s : res.config.suites) {
        json sj;
        const auto& cnt = counts[s];
        sj["points"] = cnt[0];
        sj["failed_points"] = cnt[1];
        sj["errors"] = cnt[2];
        sj["skipped"] = cnt[3];
        json conds = json::object();
        for (const auto& [name, a] : agg[s]) {
            const long denom = res.config.skip_domain_errors ? a.evaluated : a.evaluated + (cnt[2] - cnt[3]);
            conds[name] = {{"max_residual", detail::num_json(a.max_residual)},
                           {"max_relative", detail::num_json(a.max_relative)},
                           {"failures", a.failures},
                           {"evaluated", a.evaluated},
                           {"pass_rate", denom > 0 ? static_cast<double>(a.evaluated - a.failures) / denom : 1.0}};
        }
        sj["conditions"] = std::move(conds);
        suites[s] = std::move(sj);
    }
    summary["suites"] = std::move(suites);
    summary["all_pass"] = res.exit_status == 0;
    summary["exit_status"] = res.exit_status;
    j["summary"] = std::move(summary);
    return j;
}

inline std::string report_string(const RunResult& res) { return report_json(res).dump(2) + "\n"; }

struct ReportSummary {
    std::string schema;
    bool all_pass = false;
    int exit_status = 1;
    std::map<std::string, std::map<std::string, double>> max_residual;  ///< suite -> condition -> value
    std::size_t per_point = 0;
};

/// Reads the parts of a report this version understands; other keys are ignored.
inline ReportSummary read_report(std::istream& in) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("report is not valid JSON: ") + e.what());
    }
    ReportSummary s;
    s.schema = j.value("schema", "");
    if (s.schema.rfind("spraymetric.report/", 0) != 0) throw ConfigError("not a spraymetric report");
    if (j.contains("per_point")) s.per_point = j["per_point"].size();
    if (j.contains("summary")) {
        const auto& sm = j["summary"];
        s.all_pass = sm.value("all_pass", false);
        s.exit_status = sm.value("exit_status", 1);
        if (sm.contains("suites"))
            for (const auto& [suite, sj] : sm["suites"].items())
                if (sj.contains("conditions"))
                    for (const auto& [cond, cj] : sj["conditions"].items())
                        if (cj.contains("max_residual") && cj["max_residual"].is_number())
                            s.max_residual[suite][cond] = cj["max_residual"].get<double>();
    }
    return s;
}

}  // namespace spraymetric
