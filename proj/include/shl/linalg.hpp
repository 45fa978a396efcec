#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "shl/errors.hpp"

namespace shl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// |a - b| <= max(abs_floor, rel * max(1, |a|, |b|)).
inline bool close(double a, double b, double rel = 1e-9, double abs_floor = 1e-12) {
    const double scale = std::max({1.0, std::abs(a), std::abs(b)});
    return std::abs(a - b) <= std::max(abs_floor, rel * scale);
}

/// Discrepancy normalised by an explicit magnitude (usually the sum of the
/// absolute values of the terms on both sides).
inline double rel_discrepancy(double lhs, double rhs, double magnitude) {
    return std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs), magnitude});
}

struct SymmetricEigen {
    Vector values;  // descending
    Matrix vectors; // columns, orthonormal
    int sweeps = 0;
};

/// Cyclic Jacobi rotations for small dense symmetric matrices.
///
/// Stops once the off-diagonal Frobenius norm falls under `rel_threshold`
/// times the Frobenius norm of the input. Throws DegenerateEigenbasis after
/// `max_sweeps` unsuccessful sweeps.
inline SymmetricEigen jacobi_eigen(const Matrix& input, double rel_threshold = 1e-12,
                                   int max_sweeps = 50) {
    const Eigen::Index n = input.rows();
    if (n != input.cols()) fail(ErrorKind::InvalidInput, "jacobi_eigen: matrix is not square");
    if (!input.allFinite()) fail(ErrorKind::InvalidInput, "jacobi_eigen: non-finite entry");

    Matrix a = 0.5 * (input + input.transpose());
    Matrix v = Matrix::Identity(n, n);
    const double fro = a.norm();
    const double target = rel_threshold * fro;

    auto off_norm = [&] {
        double s = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) s += 2.0 * a(p, q) * a(p, q);
        return std::sqrt(s);
    };

    int sweep = 0;
    while (off_norm() > target) {
        if (sweep == max_sweeps)
            fail(ErrorKind::DegenerateEigenbasis, "jacobi_eigen: no convergence");
        ++sweep;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Eigen::Index r = 0; r < n; ++r) {
                    const double arp = a(r, p), arq = a(r, q);
                    a(r, p) = c * arp - s * arq;
                    a(r, q) = s * arp + c * arq;
                }
                for (Eigen::Index r = 0; r < n; ++r) {
                    const double apr = a(p, r), aqr = a(q, r);
                    a(p, r) = c * apr - s * aqr;
                    a(q, r) = s * apr + c * aqr;
                }
                for (Eigen::Index r = 0; r < n; ++r) {
                    const double vrp = v(r, p), vrq = v(r, q);
                    v(r, p) = c * vrp - s * vrq;
                    v(r, q) = s * vrp + c * vrq;
                }
            }
        }
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

    SymmetricEigen out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    out.sweeps = sweep;
    for (Eigen::Index i = 0; i < n; ++i) {
        out.values(i) = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
        out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
    }
    return out;
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

} // namespace shl
