#pragma once

// Field definitions: named groups of component expressions describing a spray,
// a scalar function, a covector, a symmetric 2-tensor or a 2-form.

#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "expr.hpp"
#include "jets.hpp"
#include "point.hpp"

namespace spraymetric {

enum class FieldKind { spray, scalar, covector, sym2tensor, twoform };

inline const char* kind_name(FieldKind k) {
    switch (k) {
        case FieldKind::spray: return "spray";
        case FieldKind::scalar: return "scalar";
        case FieldKind::covector: return "covector";
        case FieldKind::sym2tensor: return "sym2tensor";
        case FieldKind::twoform: return "twoform";
    }
    return "?";
}

/// Number of stored component expressions for a kind over an n-manifold.
inline int component_count(FieldKind k, int n) {
    switch (k) {
        case FieldKind::spray: return n;
        case FieldKind::scalar: return 1;
        case FieldKind::covector: return n;
        case FieldKind::sym2tensor: return n * (n + 1) / 2;
        case FieldKind::twoform: return n * (n - 1) + n * n;
    }
    return 0;
}

/// Storage slot of h_{ij} (upper triangle, row-major).
inline int sym_slot(int i, int j, int n) {
    if (i > j) std::swap(i, j);
    return i * n - i * (i - 1) / 2 + (j - i);
}

/// Storage slot of the strict-upper-triangle pair i < j (row-major).
inline int strict_slot(int i, int j, int n) { return i * n - i * (i + 1) / 2 + (j - i - 1); }

namespace detail {

inline std::vector<std::string> default_names(FieldKind kind, int n) {
    std::vector<std::string> names;
    auto s = [](int i) { return std::to_string(i + 1); };
    switch (kind) {
        case FieldKind::spray: for (int i = 0; i < n; ++i) names.push_back("G" + s(i)); break;
        case FieldKind::scalar: names.push_back("F"); break;
        case FieldKind::covector: for (int i = 0; i < n; ++i) names.push_back("T" + s(i)); break;
        case FieldKind::sym2tensor:
            for (int i = 0; i < n; ++i)
                for (int j = i; j < n; ++j) names.push_back("h" + s(i) + s(j));
            break;
        case FieldKind::twoform:
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) names.push_back("a" + s(i) + s(j));
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) names.push_back("b" + s(i) + s(j));
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) names.push_back("c" + s(i) + s(j));
            break;
    }
    return names;
}

}  // namespace detail

/// Immutable parsed field.  Components are stored as follows:
///   spray       Gamma^1..Gamma^n
///   scalar      one expression
///   covector    theta_1..theta_n
///   sym2tensor  h_ij, i <= j, row-major
///   twoform     a_ij (i<j), then b_ij (all i,j), then c_ij (i<j), for
///               sum a_ij dx^i^dx^j + b_ij dx^i^dy^j + c_ij dy^i^dy^j
class FieldDef {
public:
    FieldDef() = default;
    FieldDef(FieldKind kind, int n, std::vector<std::string> names, std::vector<ExprPtr> exprs)
        : kind_(kind), n_(n), names_(std::move(names)), exprs_(std::move(exprs)) {
        if (n_ < 1 || n_ > 6) throw DimensionMismatch("base dimension must be in 1..6");
        if (static_cast<int>(exprs_.size()) != component_count(kind_, n_))
            throw ArityError(std::string(kind_name(kind_)) + " over n=" + std::to_string(n_) + " needs " +
                             std::to_string(component_count(kind_, n_)) + " components, got " +
                             std::to_string(exprs_.size()));
        if (names_.size() != exprs_.size()) names_ = detail::default_names(kind_, n_);
    }

    FieldKind kind() const noexcept { return kind_; }
    int n() const noexcept { return n_; }
    int size() const noexcept { return static_cast<int>(exprs_.size()); }
    const ExprPtr& expr(int i) const { return exprs_.at(i); }
    const std::vector<ExprPtr>& exprs() const noexcept { return exprs_; }
    const std::vector<std::string>& names() const noexcept { return names_; }

    /// Re-parseable text form, one `name = expr;` per line.
    std::string print() const {
        std::ostringstream os;
        for (int i = 0; i < size(); ++i) os << names_[i] << " = " << to_string(exprs_[i], n_) << ";\n";
        return os.str();
    }

private:
    FieldKind kind_ = FieldKind::scalar;
    int n_ = 0;
    std::vector<std::string> names_;
    std::vector<ExprPtr> exprs_;
};

namespace detail {

/// Slot addressed by an indexed component name for `kind`, or -1.
inline int indexed_slot(FieldKind kind, int n, const std::string& name) {
    std::smatch m;
    auto idx = [&](const std::ssub_match& s) { return std::stoi(s.str()) - 1; };
    switch (kind) {
        case FieldKind::spray: {
            static const std::regex re("G([1-9])");
            if (std::regex_match(name, m, re) && idx(m[1]) < n) return idx(m[1]);
            return -1;
        }
        case FieldKind::covector: {
            static const std::regex re("(?:T|theta)([1-9])");
            if (std::regex_match(name, m, re) && idx(m[1]) < n) return idx(m[1]);
            return -1;
        }
        case FieldKind::sym2tensor: {
            static const std::regex re("h([1-9])([1-9])");
            if (std::regex_match(name, m, re) && idx(m[1]) < n && idx(m[2]) < n) return sym_slot(idx(m[1]), idx(m[2]), n);
            return -1;
        }
        case FieldKind::twoform: {
            static const std::regex re("([abc])([1-9])([1-9])");
            if (!std::regex_match(name, m, re)) return -1;
            const int i = idx(m[2]), j = idx(m[3]);
            if (i >= n || j >= n) return -1;
            const char block = m[1].str()[0];
            const int strict = n * (n - 1) / 2;
            if (block == 'b') return strict + i * n + j;
            if (i >= j) return -1;
            return block == 'a' ? strict_slot(i, j, n) : strict + n * n + strict_slot(i, j, n);
        }
        case FieldKind::scalar: return -1;
    }
    return -1;
}

}  // namespace detail

/// Parses a field definition.  Components are matched positionally unless
/// every name is an indexed component name for the kind (G2, T1, h13, b21,
/// ...), in which case they are placed by index; a twoform in indexed form may
/// omit zero components.
inline FieldDef parse_field(std::string_view source, FieldKind kind, int n) {
    if (n < 1 || n > 6) throw DimensionMismatch("base dimension must be in 1..6");
    auto assignments = parse_assignments(source, n);
    const int count = component_count(kind, n);

    bool indexed = kind != FieldKind::scalar;
    for (const auto& [name, _] : assignments)
        if (detail::indexed_slot(kind, n, name) < 0) indexed = false;

    if (!indexed) {
        if (static_cast<int>(assignments.size()) != count)
            throw ArityError(std::string(kind_name(kind)) + " over n=" + std::to_string(n) + " needs " +
                             std::to_string(count) + " components, got " + std::to_string(assignments.size()));
        std::vector<std::string> names;
        std::vector<ExprPtr> exprs;
        for (auto& [name, e] : assignments) {
            names.push_back(name);
            exprs.push_back(std::move(e));
        }
        return FieldDef(kind, n, std::move(names), std::move(exprs));
    }

    std::vector<ExprPtr> exprs(count);
    for (auto& [name, e] : assignments) {
        const int slot = detail::indexed_slot(kind, n, name);
        if (exprs[slot]) throw ArityError("component '" + name + "' given twice");
        exprs[slot] = std::move(e);
    }
    for (int i = 0; i < count; ++i) {
        if (exprs[i]) continue;
        if (kind != FieldKind::twoform)
            throw ArityError(std::string(kind_name(kind)) + " over n=" + std::to_string(n) + " is missing component " +
                             detail::default_names(kind, n)[i]);
        exprs[i] = expr::num(0.0);
    }
    return FieldDef(kind, n, detail::default_names(kind, n), std::move(exprs));
}

inline FieldDef load_field(const std::string& path, FieldKind kind, int n) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open field file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_field(ss.str(), kind, n);
}

/// Seeds the 2n coordinate jets at p.
inline std::vector<Jet> seed_jets(const Point& p, int order, const DirectionsPtr& dirs = nullptr) {
    const int dim = 2 * p.n();
    const Vec z = p.z();
    std::vector<Jet> vars;
    vars.reserve(dim);
    for (int a = 0; a < dim; ++a) vars.push_back(Jet::variable(z[a], a, dim, order, dirs));
    return vars;
}

/// Jets of every component of `f` at `p`.  Third-order jets track the fibre
/// directions unless `dirs` says otherwise.
inline std::vector<Jet> eval_field_jet(const FieldDef& f, const Point& p, int order, DirectionsPtr dirs = nullptr) {
    if (p.n() != f.n()) throw DimensionMismatch("point dimension does not match field");
    if (order < 0 || order > 3) throw DomainError("jet order must be in 0..3");
    p.require_slit();
    if (order == 3 && !dirs) dirs = DirectionSet::fibre(f.n());
    const auto vars = seed_jets(p, order, dirs);
    std::vector<Jet> out;
    out.reserve(f.size());
    for (const auto& e : f.exprs()) out.push_back(evaluate(e, std::span<const Jet>(vars)));
    return out;
}

/// Plain values of every component at p.
inline Vec eval_field(const FieldDef& f, const Point& p) {
    if (p.n() != f.n()) throw DimensionMismatch("point dimension does not match field");
    const Vec z = p.z();
    Vec out(f.size());
    for (int i = 0; i < f.size(); ++i) out[i] = evaluate(f.expr(i), std::span<const double>(z.data(), z.size()));
    return out;
}

/// Finite-difference oracle for component `component` of `f`.
inline double fd_oracle(const FieldDef& f, int component, const Point& p, std::span<const int> multi_index) {
    const ExprPtr& e = f.expr(component);
    const Vec z = p.z();
    return fd_partial([&](std::span<const double> w) { return evaluate(e, w); },
                      std::span<const double>(z.data(), z.size()), multi_index);
}

/// Symmetric matrix from sym2tensor component values.
template <class T>
std::vector<std::vector<T>> sym_matrix(const std::vector<T>& comps, int n) {
    std::vector<std::vector<T>> m(n, std::vector<T>(n, comps[0]));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m[i][j] = comps[sym_slot(i, j, n)];
    return m;
}

}  // namespace spraymetric
