#pragma once

#include <span>

#include <Eigen/Dense>

#include "errors.hpp"

namespace spraymetric {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline Vec to_vec(std::span<const double> s) {
    return Eigen::Map<const Vec>(s.data(), static_cast<Eigen::Index>(s.size()));
}

/// Minimum fibre norm accepted on the slit tangent bundle.
inline constexpr double kFibreEps = 1e-6;

/// A point (x, y) of the slit tangent bundle in a single chart.
struct Point {
    Vec x;
    Vec y;

    Point() = default;
    Point(Vec base, Vec fibre) : x(std::move(base)), y(std::move(fibre)) {
        if (x.size() != y.size()) throw DimensionMismatch("base and fibre dimensions differ");
    }

    int n() const noexcept { return static_cast<int>(x.size()); }

    /// Concatenated coordinates (x1..xn, y1..yn).
    Vec z() const {
        Vec out(2 * n());
        out << x, y;
        return out;
    }

    static Point from_z(const Vec& z) {
        const auto n = z.size() / 2;
        return Point(z.head(n), z.tail(n));
    }

    void require_slit() const {
        if (y.norm() < kFibreEps) throw DomainError("fibre vector below the slit threshold");
    }
};

}  // namespace spraymetric
