#pragma once

// Expression trees for closed-form fields on the tangent bundle: parsing,
// printing, symbolic differentiation and evaluation over doubles or jets.

#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "jets.hpp"

namespace spraymetric {

enum class ExprKind { number, variable, neg, add, sub, mul, div, pow, func, native };
enum class Func { sqrt, sin, cos, exp, log, atan2 };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Opaque jet-valued function of the point variables (for fields that are
/// assembled numerically, e.g. from Christoffel symbols of a metric).
using NativeFn = std::function<Jet(std::span<const Jet>)>;

struct Expr {
    ExprKind kind = ExprKind::number;
    double number = 0.0;
    int var = -1;
    int exponent = 0;
    Func func = Func::sqrt;
    std::vector<ExprPtr> args;
    std::shared_ptr<const NativeFn> native;
    std::string label;
};

// Construction with light constant folding -----------------------------------

namespace expr {

inline bool is_number(const ExprPtr& e, double v) { return e->kind == ExprKind::number && e->number == v; }

inline ExprPtr num(double v) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::number;
    e->number = v;
    return e;
}

inline ExprPtr var(int index) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::variable;
    e->var = index;
    return e;
}

inline ExprPtr node(ExprKind kind, std::vector<ExprPtr> args) {
    auto e = std::make_shared<Expr>();
    e->kind = kind;
    e->args = std::move(args);
    return e;
}

inline ExprPtr neg(ExprPtr a) {
    if (a->kind == ExprKind::number) return num(-a->number);
    if (a->kind == ExprKind::neg) return a->args[0];
    return node(ExprKind::neg, {std::move(a)});
}

inline ExprPtr add(ExprPtr a, ExprPtr b) {
    if (is_number(a, 0.0)) return b;
    if (is_number(b, 0.0)) return a;
    if (a->kind == ExprKind::number && b->kind == ExprKind::number) return num(a->number + b->number);
    return node(ExprKind::add, {std::move(a), std::move(b)});
}

inline ExprPtr sub(ExprPtr a, ExprPtr b) {
    if (is_number(b, 0.0)) return a;
    if (is_number(a, 0.0)) return neg(std::move(b));
    if (a->kind == ExprKind::number && b->kind == ExprKind::number) return num(a->number - b->number);
    return node(ExprKind::sub, {std::move(a), std::move(b)});
}

inline ExprPtr mul(ExprPtr a, ExprPtr b) {
    if (is_number(a, 0.0) || is_number(b, 0.0)) return num(0.0);
    if (is_number(a, 1.0)) return b;
    if (is_number(b, 1.0)) return a;
    if (a->kind == ExprKind::number && b->kind == ExprKind::number) return num(a->number * b->number);
    return node(ExprKind::mul, {std::move(a), std::move(b)});
}

inline ExprPtr div(ExprPtr a, ExprPtr b) {
    if (is_number(a, 0.0)) return num(0.0);
    if (is_number(b, 1.0)) return a;
    return node(ExprKind::div, {std::move(a), std::move(b)});
}

inline ExprPtr pow(ExprPtr a, int k) {
    if (k == 0) return num(1.0);
    if (k == 1) return a;
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::pow;
    e->exponent = k;
    e->args = {std::move(a)};
    return e;
}

inline ExprPtr call(Func f, std::vector<ExprPtr> args) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::func;
    e->func = f;
    e->args = std::move(args);
    return e;
}

inline ExprPtr native(NativeFn fn, std::string label) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::native;
    e->native = std::make_shared<const NativeFn>(std::move(fn));
    e->label = std::move(label);
    return e;
}

}  // namespace expr

inline const char* func_name(Func f) {
    switch (f) {
        case Func::sqrt: return "sqrt";
        case Func::sin: return "sin";
        case Func::cos: return "cos";
        case Func::exp: return "exp";
        case Func::log: return "log";
        case Func::atan2: return "atan2";
    }
    return "?";
}

inline int func_arity(Func f) { return f == Func::atan2 ? 2 : 1; }

// Variable naming --------------------------------------------------------------

/// Canonical name of variable `index` in a 2n-variable chart: x1..xn, y1..yn.
inline std::string variable_name(int index, int n) {
    return index < n ? "x" + std::to_string(index + 1) : "y" + std::to_string(index - n + 1);
}

/// Resolves an identifier to a variable index.  For n <= 3 the letters
/// x, y, z (base) and u, v, w (fibre) are accepted as well.
inline std::optional<int> resolve_variable(std::string_view name, int n) {
    if (n <= 3 && name.size() == 1) {
        static constexpr std::string_view base = "xyz", fibre = "uvw";
        const auto b = base.find(name[0]);
        if (b != std::string_view::npos && static_cast<int>(b) < n) return static_cast<int>(b);
        const auto f = fibre.find(name[0]);
        if (f != std::string_view::npos && static_cast<int>(f) < n) return n + static_cast<int>(f);
        return std::nullopt;
    }
    if (name.size() >= 2 && (name[0] == 'x' || name[0] == 'y')) {
        int k = 0;
        auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), k);
        if (ec == std::errc() && ptr == name.data() + name.size() && name[1] != '0' && k >= 1 && k <= n)
            return name[0] == 'x' ? k - 1 : n + k - 1;
    }
    return std::nullopt;
}

// Printing ---------------------------------------------------------------------

inline void print_expr(std::ostream& os, const Expr& e, int n) {
    switch (e.kind) {
        case ExprKind::number: {
            char buf[32];
            auto [p, ec] = std::to_chars(buf, buf + sizeof buf, e.number);
            os << std::string_view(buf, static_cast<std::size_t>(p - buf));
            return;
        }
        case ExprKind::variable: os << variable_name(e.var, n); return;
        case ExprKind::neg: os << "(-"; print_expr(os, *e.args[0], n); os << ")"; return;
        case ExprKind::add:
        case ExprKind::sub:
        case ExprKind::mul:
        case ExprKind::div: {
            const char op = e.kind == ExprKind::add ? '+' : e.kind == ExprKind::sub ? '-' : e.kind == ExprKind::mul ? '*' : '/';
            os << "(";
            print_expr(os, *e.args[0], n);
            os << " " << op << " ";
            print_expr(os, *e.args[1], n);
            os << ")";
            return;
        }
        case ExprKind::pow:
            os << "(";
            print_expr(os, *e.args[0], n);
            os << ")^" << e.exponent;
            return;
        case ExprKind::func:
            os << func_name(e.func) << "(";
            for (std::size_t i = 0; i < e.args.size(); ++i) {
                if (i) os << ", ";
                print_expr(os, *e.args[i], n);
            }
            os << ")";
            return;
        case ExprKind::native: os << "<" << e.label << ">"; return;
    }
}

inline std::string to_string(const ExprPtr& e, int n) {
    std::ostringstream os;
    print_expr(os, *e, n);
    return os.str();
}

/// Structural equality (numbers compared exactly; natives by identity).
inline bool same_structure(const Expr& a, const Expr& b) {
    if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
    switch (a.kind) {
        case ExprKind::number: if (a.number != b.number) return false; break;
        case ExprKind::variable: if (a.var != b.var) return false; break;
        case ExprKind::pow: if (a.exponent != b.exponent) return false; break;
        case ExprKind::func: if (a.func != b.func) return false; break;
        case ExprKind::native: return a.native == b.native;
        default: break;
    }
    for (std::size_t i = 0; i < a.args.size(); ++i)
        if (!same_structure(*a.args[i], *b.args[i])) return false;
    return true;
}

// Parsing ----------------------------------------------------------------------

namespace detail {

enum class Tok { number, ident, op, end };

struct Token {
    Tok kind = Tok::end;
    std::string text;
    double number = 0.0;
    std::size_t line = 1;
    std::size_t column = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (true) {
            skip_space();
            Token t;
            t.line = line_;
            t.column = col_;
            if (pos_ >= src_.size()) {
                out.push_back(t);
                return out;
            }
            const char c = src_[pos_];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                t.kind = Tok::number;
                const std::size_t start = pos_;
                while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) advance();
                if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
                    std::size_t look = pos_ + 1;
                    if (look < src_.size() && (src_[look] == '+' || src_[look] == '-')) ++look;
                    if (look < src_.size() && std::isdigit(static_cast<unsigned char>(src_[look]))) {
                        while (pos_ < look) advance();
                        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
                    }
                }
                t.text = std::string(src_.substr(start, pos_ - start));
                auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
                if (ec != std::errc() || p != t.text.data() + t.text.size())
                    throw ParseError("malformed number '" + t.text + "'", t.line, t.column);
            } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                t.kind = Tok::ident;
                const std::size_t start = pos_;
                while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) advance();
                t.text = std::string(src_.substr(start, pos_ - start));
            } else if (std::string_view("+-*/^(),=;").find(c) != std::string_view::npos) {
                t.kind = Tok::op;
                t.text = std::string(1, c);
                advance();
            } else {
                throw ParseError(std::string("unexpected character '") + c + "'", line_, col_);
            }
            out.push_back(std::move(t));
        }
    }

private:
    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_space() {
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
};

class Parser {
public:
    Parser(std::vector<Token> toks, int n) : toks_(std::move(toks)), n_(n) {}

    std::vector<std::pair<std::string, ExprPtr>> field() {
        std::vector<std::pair<std::string, ExprPtr>> out;
        while (peek().kind != Tok::end) {
            const Token& name = peek();
            if (name.kind != Tok::ident) fail("expected component name");
            ++pos_;
            expect("=");
            ExprPtr e = expression();
            for (const auto& [prev, _] : out)
                if (prev == name.text) throw ParseError("duplicate component '" + name.text + "'", name.line, name.column);
            out.emplace_back(name.text, std::move(e));
            if (is_op(";")) {
                ++pos_;
            } else if (peek().kind != Tok::end) {
                fail("expected ';'");
            }
        }
        if (out.empty()) fail("empty field definition");
        return out;
    }

    ExprPtr single() {
        ExprPtr e = expression();
        if (peek().kind != Tok::end) fail("trailing input");
        return e;
    }

private:
    const Token& peek() const { return toks_[pos_]; }
    bool is_op(std::string_view s) const { return peek().kind == Tok::op && peek().text == s; }

    [[noreturn]] void fail(const std::string& msg) const {
        const Token& t = peek();
        const std::string near = t.kind == Tok::end ? "end of input" : "'" + t.text + "'";
        throw ParseError(msg + " near " + near, t.line, t.column);
    }

    void expect(std::string_view s) {
        if (!is_op(s)) fail("expected '" + std::string(s) + "'");
        ++pos_;
    }

    ExprPtr expression() {
        ExprPtr lhs = term();
        while (is_op("+") || is_op("-")) {
            const bool plus = peek().text == "+";
            ++pos_;
            ExprPtr rhs = term();
            lhs = expr::node(plus ? ExprKind::add : ExprKind::sub, {lhs, rhs});
        }
        return lhs;
    }

    ExprPtr term() {
        ExprPtr lhs = factor();
        while (is_op("*") || is_op("/")) {
            const bool times = peek().text == "*";
            ++pos_;
            ExprPtr rhs = factor();
            lhs = expr::node(times ? ExprKind::mul : ExprKind::div, {lhs, rhs});
        }
        return lhs;
    }

    ExprPtr factor() {
        if (is_op("-")) {
            ++pos_;
            return expr::node(ExprKind::neg, {factor()});
        }
        if (is_op("+")) {
            ++pos_;
            return factor();
        }
        ExprPtr b = base();
        if (is_op("^")) {
            ++pos_;
            int sign = 1;
            if (is_op("-")) {
                sign = -1;
                ++pos_;
            }
            const Token& t = peek();
            if (t.kind != Tok::number || t.text.find_first_not_of("0123456789") != std::string::npos)
                fail("exponent must be an integer");
            ++pos_;
            auto e = std::make_shared<Expr>();
            e->kind = ExprKind::pow;
            e->exponent = sign * std::stoi(t.text);
            e->args = {b};
            return e;
        }
        return b;
    }

    ExprPtr base() {
        const Token t = peek();
        if (t.kind == Tok::number) {
            ++pos_;
            return expr::num(t.number);
        }
        if (is_op("(")) {
            ++pos_;
            ExprPtr e = expression();
            expect(")");
            return e;
        }
        if (t.kind == Tok::ident) {
            ++pos_;
            static const std::map<std::string, Func, std::less<>> funcs{
                {"sqrt", Func::sqrt}, {"sin", Func::sin}, {"cos", Func::cos},
                {"exp", Func::exp},   {"log", Func::log}, {"atan2", Func::atan2}};
            if (auto it = funcs.find(t.text); it != funcs.end()) {
                expect("(");
                std::vector<ExprPtr> args{expression()};
                if (is_op(",")) {
                    ++pos_;
                    args.push_back(expression());
                }
                expect(")");
                if (static_cast<int>(args.size()) != func_arity(it->second))
                    throw ParseError("wrong number of arguments to " + t.text, t.line, t.column);
                return expr::call(it->second, std::move(args));
            }
            if (t.text == "pi") return expr::num(std::numbers::pi);
            if (auto v = resolve_variable(t.text, n_)) return expr::var(*v);
            throw ParseError("unknown identifier '" + t.text + "'", t.line, t.column);
        }
        fail("expected an operand");
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    int n_;
};

}  // namespace detail

/// Parses a single expression over the 2n point variables.
inline ExprPtr parse_expression(std::string_view src, int n) {
    return detail::Parser(detail::Lexer(src).run(), n).single();
}

/// Parses `name = expr; ...` into named component expressions.
inline std::vector<std::pair<std::string, ExprPtr>> parse_assignments(std::string_view src, int n) {
    return detail::Parser(detail::Lexer(src).run(), n).field();
}

// Symbolic differentiation -----------------------------------------------------

inline ExprPtr differentiate(const ExprPtr& e, int v) {
    using namespace expr;
    const auto& a = e->args;
    switch (e->kind) {
        case ExprKind::number: return num(0.0);
        case ExprKind::variable: return num(e->var == v ? 1.0 : 0.0);
        case ExprKind::neg: return neg(differentiate(a[0], v));
        case ExprKind::add: return add(differentiate(a[0], v), differentiate(a[1], v));
        case ExprKind::sub: return sub(differentiate(a[0], v), differentiate(a[1], v));
        case ExprKind::mul:
            return add(mul(differentiate(a[0], v), a[1]), mul(a[0], differentiate(a[1], v)));
        case ExprKind::div: {
            auto da = differentiate(a[0], v), db = differentiate(a[1], v);
            return sub(div(da, a[1]), div(mul(a[0], db), pow(a[1], 2)));
        }
        case ExprKind::pow:
            return mul(mul(num(e->exponent), pow(a[0], e->exponent - 1)), differentiate(a[0], v));
        case ExprKind::func: {
            auto da = differentiate(a[0], v);
            switch (e->func) {
                case Func::sqrt: return div(da, mul(num(2.0), e));
                case Func::sin: return mul(call(Func::cos, {a[0]}), da);
                case Func::cos: return neg(mul(call(Func::sin, {a[0]}), da));
                case Func::exp: return mul(e, da);
                case Func::log: return div(da, a[0]);
                case Func::atan2: {
                    // atan2(p, q): (q dp - p dq) / (p^2 + q^2)
                    auto dq = differentiate(a[1], v);
                    return div(sub(mul(a[1], da), mul(a[0], dq)), add(pow(a[0], 2), pow(a[1], 2)));
                }
            }
            break;
        }
        case ExprKind::native: throw DomainError("cannot differentiate native node <" + e->label + "> symbolically");
    }
    throw DomainError("unknown expression node");
}

// Evaluation -------------------------------------------------------------------

namespace detail {

inline double checked_sqrt(double t) {
    if (!(t >= kDomainEps)) throw DomainError("sqrt argument below domain threshold");
    return std::sqrt(t);
}
inline double checked_log(double t) {
    if (!(t >= kDomainEps)) throw DomainError("log argument below domain threshold");
    return std::log(t);
}

inline double eval_impl(const Expr& e, std::span<const double> vars) {
    const auto& a = e.args;
    switch (e.kind) {
        case ExprKind::number: return e.number;
        case ExprKind::variable: return vars[e.var];
        case ExprKind::neg: return -eval_impl(*a[0], vars);
        case ExprKind::add: return eval_impl(*a[0], vars) + eval_impl(*a[1], vars);
        case ExprKind::sub: return eval_impl(*a[0], vars) - eval_impl(*a[1], vars);
        case ExprKind::mul: return eval_impl(*a[0], vars) * eval_impl(*a[1], vars);
        case ExprKind::div: {
            const double d = eval_impl(*a[1], vars);
            if (std::abs(d) < kDivisionGuard) throw DivisionByZero("division by zero in expression");
            return eval_impl(*a[0], vars) / d;
        }
        case ExprKind::pow: {
            const double b = eval_impl(*a[0], vars);
            if (b == 0.0 && e.exponent < 0) throw DomainError("negative power of zero");
            return std::pow(b, e.exponent);
        }
        case ExprKind::func: {
            const double x = eval_impl(*a[0], vars);
            switch (e.func) {
                case Func::sqrt: return checked_sqrt(x);
                case Func::sin: return std::sin(x);
                case Func::cos: return std::cos(x);
                case Func::exp: return std::exp(x);
                case Func::log: return checked_log(x);
                case Func::atan2: {
                    const double q = eval_impl(*a[1], vars);
                    if (x == 0.0 && q == 0.0) throw DomainError("atan2 at the origin");
                    return std::atan2(x, q);
                }
            }
            break;
        }
        case ExprKind::native: {
            std::vector<Jet> jv;
            jv.reserve(vars.size());
            for (double v : vars) jv.push_back(Jet::constant(v, static_cast<int>(vars.size()), 0));
            return (*e.native)(jv).value();
        }
    }
    throw DomainError("unknown expression node");
}

inline Jet eval_impl(const Expr& e, std::span<const Jet> vars) {
    const auto& a = e.args;
    const Jet& proto = vars[0];
    switch (e.kind) {
        case ExprKind::number: return Jet::constant(e.number, proto.dim(), proto.order(), proto.directions());
        case ExprKind::variable: return vars[e.var];
        case ExprKind::neg: return -eval_impl(*a[0], vars);
        case ExprKind::add: return eval_impl(*a[0], vars) + eval_impl(*a[1], vars);
        case ExprKind::sub: return eval_impl(*a[0], vars) - eval_impl(*a[1], vars);
        case ExprKind::mul: {
            // constant factors skip the full product rule
            if (a[0]->kind == ExprKind::number) return eval_impl(*a[1], vars) * a[0]->number;
            if (a[1]->kind == ExprKind::number) return eval_impl(*a[0], vars) * a[1]->number;
            return eval_impl(*a[0], vars) * eval_impl(*a[1], vars);
        }
        case ExprKind::div: {
            if (a[1]->kind == ExprKind::number) return eval_impl(*a[0], vars) / a[1]->number;
            return eval_impl(*a[0], vars) / eval_impl(*a[1], vars);
        }
        case ExprKind::pow: return pow(eval_impl(*a[0], vars), static_cast<double>(e.exponent));
        case ExprKind::func: {
            const Jet x = eval_impl(*a[0], vars);
            switch (e.func) {
                case Func::sqrt: return sqrt(x);
                case Func::sin: return sin(x);
                case Func::cos: return cos(x);
                case Func::exp: return exp(x);
                case Func::log: return log(x);
                case Func::atan2: return atan2(x, eval_impl(*a[1], vars));
            }
            break;
        }
        case ExprKind::native: return (*e.native)(vars);
    }
    throw DomainError("unknown expression node");
}

}  // namespace detail

inline double evaluate(const ExprPtr& e, std::span<const double> vars) { return detail::eval_impl(*e, vars); }
inline Jet evaluate(const ExprPtr& e, std::span<const Jet> vars) { return detail::eval_impl(*e, vars); }

}  // namespace spraymetric
