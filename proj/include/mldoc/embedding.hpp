#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>

#include "mldoc/errors.hpp"

namespace mldoc {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Embeddings are stored and persisted as binary32.
using Embedding = Vector<float>;

inline constexpr double kUnitNormTolerance = 1e-6;

/// Inner product accumulated in double. Both operands are widened before the
/// reduction so the result is independent of argument order.
template <typename DerivedA, typename DerivedB>
double inner(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    if (a.size() != b.size()) {
        throw InputError("embedding dimension mismatch: " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    }
    return a.template cast<double>().dot(b.template cast<double>());
}

/// Offset similarity between two unit vectors: <a,b> + epsilon.
/// For epsilon = 1 the result lies in [0, 2].
template <typename DerivedA, typename DerivedB>
double sim(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
           double epsilon) {
    return inner(a, b) + epsilon;
}

/// Returns `v / ||v||`. A zero vector cannot be normalized.
template <typename Derived>
Vector<typename Derived::Scalar> normalized(const Eigen::MatrixBase<Derived>& v) {
    using Scalar = typename Derived::Scalar;
    const double norm = std::sqrt(v.template cast<double>().squaredNorm());
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw ProtocolError("cannot normalize a zero or non-finite embedding");
    }
    Vector<Scalar> out = (v.template cast<double>() / norm).template cast<Scalar>();
    return out;
}

template <typename Derived>
bool is_unit(const Eigen::MatrixBase<Derived>& v, double tol = kUnitNormTolerance) {
    return std::abs(std::sqrt(v.template cast<double>().squaredNorm()) - 1.0) <= tol;
}

}  // namespace mldoc
