#pragma once

// Truncated multivariate Taylor jets (orders 0-3).
//
// A Jet carries the value of a function together with its partial
// derivatives with respect to `dim` variables.  Gradient and Hessian are
// dense; the third-order block is restricted to a declared subset of the
// variables (the "third-order directions") so that callers only pay for
// the derivatives they consume.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "errors.hpp"

namespace spraymetric {

/// Smallest admissible argument of sqrt/log.
inline constexpr double kDomainEps = 1e-12;
/// |b| below this aborts a division.
inline constexpr double kDivisionGuard = 1e-300;

/// Set of variable indices on which third derivatives are tracked.
class DirectionSet {
public:
    DirectionSet(int dim, std::vector<int> dirs) : dim_(dim), dirs_(std::move(dirs)), slot_(dim, -1) {
        std::sort(dirs_.begin(), dirs_.end());
        dirs_.erase(std::unique(dirs_.begin(), dirs_.end()), dirs_.end());
        for (std::size_t s = 0; s < dirs_.size(); ++s) {
            if (dirs_[s] < 0 || dirs_[s] >= dim) throw DimensionMismatch("third-order direction out of range");
            slot_[dirs_[s]] = static_cast<int>(s);
        }
    }

    static std::shared_ptr<const DirectionSet> all(int dim) {
        std::vector<int> d(dim);
        for (int i = 0; i < dim; ++i) d[i] = i;
        return std::make_shared<const DirectionSet>(dim, std::move(d));
    }

    /// Fibre block of a 2n-variable point: indices n..2n-1.
    static std::shared_ptr<const DirectionSet> fibre(int n) {
        std::vector<int> d(n);
        for (int i = 0; i < n; ++i) d[i] = n + i;
        return std::make_shared<const DirectionSet>(2 * n, std::move(d));
    }

    int dim() const noexcept { return dim_; }
    int size() const noexcept { return static_cast<int>(dirs_.size()); }
    int index(int slot) const { return dirs_[slot]; }
    /// Slot of variable `a`, or -1 if third derivatives along `a` are not tracked.
    int slot(int a) const { return slot_[a]; }
    const std::vector<int>& directions() const noexcept { return dirs_; }

    bool operator==(const DirectionSet& o) const { return dim_ == o.dim_ && dirs_ == o.dirs_; }

private:
    int dim_;
    std::vector<int> dirs_;
    std::vector<int> slot_;
};

using DirectionsPtr = std::shared_ptr<const DirectionSet>;

class Jet {
public:
    Jet() = default;

    static Jet constant(double value, int dim, int order, DirectionsPtr dirs = nullptr) {
        Jet j(dim, order, std::move(dirs));
        j.value_ = value;
        return j;
    }

    static Jet variable(double value, int index, int dim, int order, DirectionsPtr dirs = nullptr) {
        if (index < 0 || index >= dim) throw DimensionMismatch("variable index out of range");
        Jet j(dim, order, std::move(dirs));
        j.value_ = value;
        if (order >= 1) j.grad_[index] = 1.0;
        return j;
    }

    int order() const noexcept { return order_; }
    int dim() const noexcept { return dim_; }
    double value() const noexcept { return value_; }
    const DirectionsPtr& directions() const noexcept { return dirs_; }

    double d(int a) const { return order_ >= 1 ? grad_[a] : 0.0; }
    double d2(int a, int b) const { return order_ >= 2 ? hess_[a * dim_ + b] : 0.0; }
    double d3(int a, int b, int c) const {
        if (order_ < 3) return 0.0;
        const int sa = dirs_->slot(a), sb = dirs_->slot(b), sc = dirs_->slot(c);
        if (sa < 0 || sb < 0 || sc < 0) throw DomainError("third derivative requested outside the declared directions");
        return third_[t3(sa, sb, sc)];
    }
    bool tracks_third(int a) const { return order_ >= 3 && dirs_->slot(a) >= 0; }

    std::span<const double> grad() const noexcept { return grad_; }

    /// Partial derivative along variable `a` as a jet one order lower.  The
    /// third-order block must track `a` and every direction of the result.
    Jet partial(int a) const {
        if (order_ == 0) throw DomainError("partial of an order-0 jet");
        Jet r(dim_, order_ - 1, dirs_);
        r.value_ = grad_[a];
        if (r.order_ >= 1)
            for (int b = 0; b < dim_; ++b) r.grad_[b] = hess_[a * dim_ + b];
        if (r.order_ >= 2) {
            if (dirs_->size() != dim_) throw DomainError("partial to order 2 needs full third-order storage");
            for (int b = 0; b < dim_; ++b)
                for (int c = 0; c < dim_; ++c) r.hess_[b * dim_ + c] = d3(a, b, c);
        }
        return r;
    }

    Jet operator-() const {
        Jet r = *this;
        r.value_ = -r.value_;
        for (auto& g : r.grad_) g = -g;
        for (auto& h : r.hess_) h = -h;
        for (auto& t : r.third_) t = -t;
        return r;
    }

    Jet& operator+=(const Jet& o) { return axpy(1.0, o); }
    Jet& operator-=(const Jet& o) { return axpy(-1.0, o); }
    Jet& operator+=(double c) { value_ += c; return *this; }
    Jet& operator-=(double c) { value_ -= c; return *this; }
    Jet& operator*=(double c) {
        value_ *= c;
        for (auto& g : grad_) g *= c;
        for (auto& h : hess_) h *= c;
        for (auto& t : third_) t *= c;
        return *this;
    }

    friend Jet operator+(Jet a, const Jet& b) { return a += b; }
    friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
    friend Jet operator+(Jet a, double c) { return a += c; }
    friend Jet operator+(double c, Jet a) { return a += c; }
    friend Jet operator-(Jet a, double c) { return a -= c; }
    friend Jet operator-(double c, const Jet& a) { return (-a) += c; }
    friend Jet operator*(Jet a, double c) { return a *= c; }
    friend Jet operator*(double c, Jet a) { return a *= c; }
    friend Jet operator/(Jet a, double c) {
        if (std::abs(c) < kDivisionGuard) throw DivisionByZero("jet divided by zero constant");
        return a *= 1.0 / c;
    }

    friend Jet operator*(const Jet& f, const Jet& g) {
        f.check_compatible(g);
        Jet r(f.dim_, f.order_, f.dirs_);
        const int n = f.dim_;
        r.value_ = f.value_ * g.value_;
        if (r.order_ >= 1)
            for (int a = 0; a < n; ++a) r.grad_[a] = f.value_ * g.grad_[a] + g.value_ * f.grad_[a];
        if (r.order_ >= 2)
            for (int a = 0; a < n; ++a)
                for (int b = a; b < n; ++b) {
                    const double v = f.value_ * g.hess_[a * n + b] + g.value_ * f.hess_[a * n + b] +
                                     f.grad_[a] * g.grad_[b] + f.grad_[b] * g.grad_[a];
                    r.hess_[a * n + b] = v;
                    r.hess_[b * n + a] = v;
                }
        if (r.order_ >= 3) {
            const int m = r.dirs_->size();
            for (int sa = 0; sa < m; ++sa)
                for (int sb = sa; sb < m; ++sb)
                    for (int sc = sb; sc < m; ++sc) {
                        const int a = r.dirs_->index(sa), b = r.dirs_->index(sb), c = r.dirs_->index(sc);
                        const double v =
                            f.value_ * g.third_[r.t3(sa, sb, sc)] + g.value_ * f.third_[r.t3(sa, sb, sc)] +
                            f.grad_[a] * g.hess_[b * n + c] + f.grad_[b] * g.hess_[a * n + c] +
                            f.grad_[c] * g.hess_[a * n + b] + g.grad_[a] * f.hess_[b * n + c] +
                            g.grad_[b] * f.hess_[a * n + c] + g.grad_[c] * f.hess_[a * n + b];
                        r.set_third(sa, sb, sc, v);
                    }
        }
        return r;
    }

    friend Jet operator/(const Jet& f, const Jet& g) {
        f.check_compatible(g);
        if (std::abs(g.value_) < kDivisionGuard) throw DivisionByZero("jet division by zero");
        const double t = g.value_;
        return f * g.compose({1.0 / t, -1.0 / (t * t), 2.0 / (t * t * t), -6.0 / (t * t * t * t)});
    }
    friend Jet operator/(double c, const Jet& g) {
        if (std::abs(g.value_) < kDivisionGuard) throw DivisionByZero("jet division by zero");
        const double t = g.value_;
        return g.compose({c / t, -c / (t * t), 2.0 * c / (t * t * t), -6.0 * c / (t * t * t * t)});
    }

    /// Chain rule with the outer function's derivatives phi[0..3] at value().
    Jet compose(const std::array<double, 4>& phi) const {
        Jet r(dim_, order_, dirs_);
        const int n = dim_;
        r.value_ = phi[0];
        if (order_ >= 1)
            for (int a = 0; a < n; ++a) r.grad_[a] = phi[1] * grad_[a];
        if (order_ >= 2)
            for (int a = 0; a < n; ++a)
                for (int b = a; b < n; ++b) {
                    const double v = phi[1] * hess_[a * n + b] + phi[2] * grad_[a] * grad_[b];
                    r.hess_[a * n + b] = v;
                    r.hess_[b * n + a] = v;
                }
        if (order_ >= 3) {
            const int m = dirs_->size();
            for (int sa = 0; sa < m; ++sa)
                for (int sb = sa; sb < m; ++sb)
                    for (int sc = sb; sc < m; ++sc) {
                        const int a = dirs_->index(sa), b = dirs_->index(sb), c = dirs_->index(sc);
                        const double v = phi[1] * third_[t3(sa, sb, sc)] +
                                         phi[2] * (grad_[a] * hess_[b * n + c] + grad_[b] * hess_[a * n + c] +
                                                   grad_[c] * hess_[a * n + b]) +
                                         phi[3] * grad_[a] * grad_[b] * grad_[c];
                        r.set_third(sa, sb, sc, v);
                    }
        }
        return r;
    }

    /// Overwrites the value while keeping all derivatives (branch shifts of atan2 and phases).
    Jet with_value(double v) const {
        Jet r = *this;
        r.value_ = v;
        return r;
    }

private:
    Jet(int dim, int order, DirectionsPtr dirs) : order_(order), dim_(dim), dirs_(std::move(dirs)) {
        if (order < 0 || order > 3) throw DomainError("jet order must be in 0..3");
        if (order >= 1) grad_.assign(dim, 0.0);
        if (order >= 2) hess_.assign(static_cast<std::size_t>(dim) * dim, 0.0);
        if (order >= 3) {
            if (!dirs_) dirs_ = DirectionSet::all(dim);
            if (dirs_->dim() != dim) throw DimensionMismatch("direction set dimension mismatch");
            const auto m = static_cast<std::size_t>(dirs_->size());
            third_.assign(m * m * m, 0.0);
        } else {
            dirs_.reset();
        }
    }

    std::size_t t3(int a, int b, int c) const {
        const auto m = static_cast<std::size_t>(dirs_->size());
        return (static_cast<std::size_t>(a) * m + b) * m + c;
    }

    void set_third(int a, int b, int c, double v) {
        third_[t3(a, b, c)] = v;
        third_[t3(a, c, b)] = v;
        third_[t3(b, a, c)] = v;
        third_[t3(b, c, a)] = v;
        third_[t3(c, a, b)] = v;
        third_[t3(c, b, a)] = v;
    }

    void check_compatible(const Jet& o) const {
        if (dim_ != o.dim_) throw DimensionMismatch("jet dimensions differ");
        if (order_ != o.order_) throw DimensionMismatch("jet orders differ");
        if (order_ >= 3 && dirs_ != o.dirs_ && !(*dirs_ == *o.dirs_))
            throw DimensionMismatch("jet third-order directions differ");
    }

    Jet& axpy(double s, const Jet& o) {
        check_compatible(o);
        value_ += s * o.value_;
        for (std::size_t i = 0; i < grad_.size(); ++i) grad_[i] += s * o.grad_[i];
        for (std::size_t i = 0; i < hess_.size(); ++i) hess_[i] += s * o.hess_[i];
        for (std::size_t i = 0; i < third_.size(); ++i) third_[i] += s * o.third_[i];
        return *this;
    }

    int order_ = 0;
    int dim_ = 0;
    double value_ = 0.0;
    std::vector<double> grad_;
    std::vector<double> hess_;
    std::vector<double> third_;
    DirectionsPtr dirs_;
};

// Elementary functions --------------------------------------------------------

inline Jet sqrt(const Jet& a) {
    const double t = a.value();
    if (!(t >= kDomainEps)) throw DomainError("sqrt argument below domain threshold");
    const double s = std::sqrt(t);
    return a.compose({s, 0.5 / s, -0.25 / (s * t), 0.375 / (s * t * t)});
}

inline Jet sin(const Jet& a) {
    const double s = std::sin(a.value()), c = std::cos(a.value());
    return a.compose({s, c, -s, -c});
}

inline Jet cos(const Jet& a) {
    const double s = std::sin(a.value()), c = std::cos(a.value());
    return a.compose({c, -s, -c, s});
}

inline Jet exp(const Jet& a) {
    const double e = std::exp(a.value());
    return a.compose({e, e, e, e});
}

inline Jet log(const Jet& a) {
    const double t = a.value();
    if (!(t >= kDomainEps)) throw DomainError("log argument below domain threshold");
    return a.compose({std::log(t), 1.0 / t, -1.0 / (t * t), 2.0 / (t * t * t)});
}

inline Jet atan(const Jet& a) {
    const double t = a.value();
    const double q = 1.0 / (1.0 + t * t);
    return a.compose({std::atan(t), q, -2.0 * t * q * q, (6.0 * t * t - 2.0) * q * q * q});
}

/// Angle of (x, y); derivatives are those of the smooth local branch.
inline Jet atan2(const Jet& y, const Jet& x) {
    const double yv = y.value(), xv = x.value();
    if (yv == 0.0 && xv == 0.0) throw DomainError("atan2 at the origin");
    const double angle = std::atan2(yv, xv);
    if (std::abs(xv) >= std::abs(yv)) return atan(y / x).with_value(angle);
    return (-atan(x / y)).with_value(angle);
}

/// a^p for a constant exponent.  Integer exponents accept any base.
inline Jet pow(const Jet& a, double p) {
    const double t = a.value();
    const bool integral = std::floor(p) == p;
    if (!integral && !(t > 0.0)) throw DomainError("non-integer power of a non-positive value");
    if (p == 0.0) return Jet::constant(1.0, a.dim(), a.order(), a.directions());
    std::array<double, 4> phi{};
    double falling = 1.0;
    for (int k = 0; k < 4; ++k) {
        // falling = p (p-1) ... (p-k+1)
        if (k > 0) falling *= (p - (k - 1));
        if (falling == 0.0) {
            phi[k] = 0.0;
        } else {
            if (t == 0.0 && p - k < 0.0) throw DomainError("negative power of zero");
            phi[k] = falling * std::pow(t, p - k);
        }
    }
    return a.compose(phi);
}

enum class ArithOp { add, sub, mul, div };

inline Jet jet_arith(const Jet& a, const Jet& b, ArithOp op) {
    switch (op) {
        case ArithOp::add: return a + b;
        case ArithOp::sub: return a - b;
        case ArithOp::mul: return a * b;
        case ArithOp::div: return a / b;
    }
    throw DomainError("unknown arithmetic operation");
}

// Finite-difference oracle ----------------------------------------------------

/// Base steps of the central stencils, indexed by derivative order.
inline constexpr std::array<double, 4> kFdSteps{0.0, 1e-6, 1e-4, 1e-3};

/// Central finite-difference estimate of the mixed partial derivative of `f`
/// at `z` along `multi_index` (|multi_index| <= 3).  The stencil is the tensor
/// product of one-dimensional central differences with step
/// kFdSteps[order] * max(1, |z|).
inline double fd_partial(const std::function<double(std::span<const double>)>& f, std::span<const double> z,
                         std::span<const int> multi_index) {
    const std::size_t order = multi_index.size();
    if (order > 3) throw DomainError("finite differences support orders up to 3");
    double norm = 0.0;
    for (double v : z) norm += v * v;
    const double h = kFdSteps[order] * std::max(1.0, std::sqrt(norm));
    std::vector<double> work(z.begin(), z.end());

    std::function<double(std::size_t)> rec = [&](std::size_t level) -> double {
        if (level == order) return f(work);
        const int a = multi_index[level];
        if (a < 0 || static_cast<std::size_t>(a) >= work.size()) throw DimensionMismatch("multi-index out of range");
        const double saved = work[a];
        work[a] = saved + h;
        const double up = rec(level + 1);
        work[a] = saved - h;
        const double down = rec(level + 1);
        work[a] = saved;
        return (up - down) / (2.0 * h);
    };
    return rec(0);
}

}  // namespace spraymetric
