#pragma once

// The sum-of-Hessians operator F(lambda) = sigma_k(lambda) + sum_r a_r sigma_{k-r}(lambda),
// evaluated through the lift F(lambda) = sigma_k(lambda, y) where y are the real
// roots of P(t) = t^m + sum_r (-1)^r a_r t^{m-r}.

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "shl/cone.hpp"
#include "shl/errors.hpp"
#include "shl/linalg.hpp"
#include "shl/symfun.hpp"

namespace shl {

/// (e_1(y), ..., e_m(y)).
inline std::vector<double> coeffs_from_roots(std::span<const double> y) {
    const auto table = sigma_table(y);
    return {table.begin() + 1, table.end()};
}

/// P(t) = t^m + sum_r (-1)^r a_r t^{m-r}, by Horner.
inline double coeff_poly(std::span<const double> a, double t) {
    double p = 1.0;
    for (std::size_t r = 0; r < a.size(); ++r) p = p * t + ((r % 2 == 0) ? -a[r] : a[r]);
    return p;
}

inline double inf_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s = std::max(s, std::abs(x));
    return s;
}

/// Real roots of P in descending order, from the companion-matrix eigenvalues.
///
/// A computed eigenvalue counts as real when its imaginary part is at most
/// tol * (1 + |a|_inf), or when P vanishes at its real part to the same
/// relative accuracy (clusters from repeated roots split into conjugate pairs
/// of size ~eps^{1/multiplicity}). Throws NoRealRoots otherwise.
inline std::vector<double> roots_from_coeffs(std::span<const double> a, double tol = 1e-8) {
    const auto m = static_cast<Eigen::Index>(a.size());
    if (m < 1) fail(ErrorKind::InvalidInput, "roots_from_coeffs: need m >= 1");
    for (double v : a)
        if (!std::isfinite(v)) fail(ErrorKind::InvalidInput, "roots_from_coeffs: non-finite coefficient");

    // Companion of t^m + c_1 t^{m-1} + ... + c_m with c_r = (-1)^r a_r.
    Matrix comp = Matrix::Zero(m, m);
    for (Eigen::Index r = 0; r < m; ++r) {
        const double c = (r % 2 == 0) ? -a[static_cast<std::size_t>(r)] : a[static_cast<std::size_t>(r)];
        comp(0, r) = -c;
    }
    for (Eigen::Index r = 1; r < m; ++r) comp(r, r - 1) = 1.0;

    Eigen::EigenSolver<Matrix> es(comp, false);
    if (es.info() != Eigen::Success) fail(ErrorKind::DegenerateEigenbasis, "roots_from_coeffs: eigensolver failed");
    const Eigen::VectorXcd z = es.eigenvalues();

    const double scale = 1.0 + inf_norm(a);
    const double imag_tol = tol * scale;
    std::vector<double> roots;
    roots.reserve(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) {
        const double re = z(i).real(), im = z(i).imag();
        bool real = std::abs(im) <= imag_tol;
        if (!real) {
            const double mag = std::pow(std::max(1.0, std::abs(re)), static_cast<double>(m));
            real = std::abs(coeff_poly(a, re)) <= tol * scale * mag;
        }
        if (!real)
            fail(ErrorKind::NoRealRoots, "roots_from_coeffs: root " + std::to_string(re) + (im < 0 ? " - " : " + ") +
                                             std::to_string(std::abs(im)) + "i is not real");
        roots.push_back(re);
    }
    std::sort(roots.begin(), roots.end(), std::greater<>{});

    // Repeated roots: replace a tight cluster by its mean when that does not
    // worsen the coefficient residual.
    auto vieta_error = [&](const std::vector<double>& r) {
        const auto e = coeffs_from_roots(r);
        double err = 0.0;
        for (std::size_t i = 0; i < e.size(); ++i) err = std::max(err, std::abs(e[i] - a[i]));
        return err;
    };
    for (std::size_t b = 0; b < roots.size();) {
        std::size_t e = b + 1;
        while (e < roots.size() && roots[e - 1] - roots[e] <= 1e-3 * scale) ++e;
        if (e - b > 1) {
            double mean = 0.0;
            for (std::size_t i = b; i < e; ++i) mean += roots[i];
            mean /= static_cast<double>(e - b);
            auto merged = roots;
            std::fill(merged.begin() + static_cast<std::ptrdiff_t>(b), merged.begin() + static_cast<std::ptrdiff_t>(e), mean);
            if (vieta_error(merged) <= vieta_error(roots)) roots = std::move(merged);
        }
        b = e;
    }
    return roots;
}

/// (n, k, m, a, y) with y the real roots of P. Immutable once built.
class OperatorSpec {
public:
    static OperatorSpec from_coeffs(int n, int k, std::vector<double> a, double tol = 1e-8) {
        auto y = a.empty() ? std::vector<double>{} : roots_from_coeffs(a, tol);
        return OperatorSpec(n, k, std::move(a), std::move(y));
    }

    static OperatorSpec from_roots(int n, int k, std::vector<double> y) {
        std::sort(y.begin(), y.end(), std::greater<>{});
        auto a = coeffs_from_roots(y);
        return OperatorSpec(n, k, std::move(a), std::move(y));
    }

    /// Both given: checked for Vieta consistency.
    static OperatorSpec from_both(int n, int k, std::vector<double> a, std::vector<double> y) {
        std::sort(y.begin(), y.end(), std::greater<>{});
        return OperatorSpec(n, k, std::move(a), std::move(y));
    }

    /// Plain sigma_k (m = 0).
    static OperatorSpec sigma_k(int n, int k) { return OperatorSpec(n, k, {}, {}); }

    int n() const noexcept { return n_; }
    int k() const noexcept { return k_; }
    int m() const noexcept { return static_cast<int>(a_.size()); }
    const std::vector<double>& a() const noexcept { return a_; }
    const std::vector<double>& y() const noexcept { return y_; }

    /// (lambda, y) as one (n+m)-vector.
    std::vector<double> lift(std::span<const double> lambda) const {
        check_dim(lambda);
        return concat(lambda, y_);
    }

    void check_dim(std::span<const double> lambda) const {
        if (static_cast<int>(lambda.size()) != n_)
            fail(ErrorKind::InvalidInput, "OperatorSpec: expected " + std::to_string(n_) + " eigenvalues, got " +
                                              std::to_string(lambda.size()));
    }

private:
    OperatorSpec(int n, int k, std::vector<double> a, std::vector<double> y)
        : n_(n), k_(k), a_(std::move(a)), y_(std::move(y)) {
        if (n_ < 1) fail(ErrorKind::InvalidInput, "OperatorSpec: need n >= 1");
        if (k_ < 1 || k_ > n_) fail(ErrorKind::InvalidInput, "OperatorSpec: need 1 <= k <= n");
        if (m() >= k_) fail(ErrorKind::InvalidInput, "OperatorSpec: need m < k");
        if (a_.size() != y_.size()) fail(ErrorKind::InconsistentSpec, "OperatorSpec: |a| != |y|");
        for (double v : a_)
            if (!std::isfinite(v)) fail(ErrorKind::InvalidInput, "OperatorSpec: non-finite coefficient");
        for (double v : y_)
            if (!std::isfinite(v)) fail(ErrorKind::InvalidInput, "OperatorSpec: non-finite root");
        const auto e = coeffs_from_roots(y_);
        for (std::size_t r = 0; r < a_.size(); ++r)
            if (!close(e[r], a_[r], 1e-9, 1e-12))
                fail(ErrorKind::InconsistentSpec, "OperatorSpec: e_" + std::to_string(r + 1) + "(y) != a_" +
                                                      std::to_string(r + 1));
        const double ymag = std::pow(std::max(1.0, inf_norm(y_)), static_cast<double>(m()));
        for (double yi : y_)
            if (std::abs(coeff_poly(a_, yi)) > 1e-8 * ymag)
                fail(ErrorKind::InconsistentSpec, "OperatorSpec: P(y_i) != 0");
    }

    int n_ = 0;
    int k_ = 0;
    std::vector<double> a_;
    std::vector<double> y_;
};

/// F through the lift: sigma_k of (lambda, y).
inline double eval_F(const OperatorSpec& spec, std::span<const double> lambda) {
    return sigma(spec.k(), spec.lift(lambda));
}

/// F through the coefficients: sigma_k(lambda) + sum_r a_r sigma_{k-r}(lambda).
inline double eval_F_expanded(const OperatorSpec& spec, std::span<const double> lambda) {
    spec.check_dim(lambda);
    const auto table = sigma_table(lambda);
    auto s = [&](int j) { return (j < 0 || j >= static_cast<int>(table.size())) ? 0.0 : table[static_cast<std::size_t>(j)]; };
    double f = s(spec.k());
    for (int r = 1; r <= spec.m(); ++r) f += spec.a()[static_cast<std::size_t>(r - 1)] * s(spec.k() - r);
    return f;
}

/// F_i = sigma_{k-1;i} of the lifted vector, i = 0..n-1.
inline std::vector<double> grad_F(const OperatorSpec& spec, std::span<const double> lambda) {
    const auto hat = spec.lift(lambda);
    std::vector<double> g(static_cast<std::size_t>(spec.n()));
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = sigma_deleted(spec.k() - 1, hat, i);
    return g;
}

/// sigma_{k-1;y_j} of the lifted vector for each root slot.
inline std::vector<double> root_slot_grad(const OperatorSpec& spec, std::span<const double> lambda) {
    const auto hat = spec.lift(lambda);
    std::vector<double> g(static_cast<std::size_t>(spec.m()));
    for (std::size_t j = 0; j < g.size(); ++j)
        g[j] = sigma_deleted(spec.k() - 1, hat, static_cast<std::size_t>(spec.n()) + j);
    return g;
}

/// F_ij = sigma_{k-2;ij} of the lifted vector off the diagonal, zero on it.
inline Matrix hess_F(const OperatorSpec& spec, std::span<const double> lambda) {
    const auto hat = spec.lift(lambda);
    const Eigen::Index n = spec.n();
    Matrix h = Matrix::Zero(n, n);
    for (Eigen::Index p = 0; p < n; ++p)
        for (Eigen::Index q = p + 1; q < n; ++q)
            h(p, q) = h(q, p) =
                sigma_deleted(spec.k() - 2, hat, static_cast<std::size_t>(p), static_cast<std::size_t>(q));
    return h;
}

/// Symmetric matrix with its spectral decomposition S = V diag(lambda) V^T.
struct MatrixPoint {
    Matrix S;
    Spectrum eigvals; // descending
    Matrix eigvecs;

    static MatrixPoint from_matrix(const Matrix& s) {
        auto eig = jacobi_eigen(s);
        MatrixPoint pt;
        pt.S = 0.5 * (s + s.transpose());
        pt.eigvals = Spectrum(to_std(eig.values), true);
        pt.eigvecs = std::move(eig.vectors);
        return pt;
    }
};

struct MatrixDerivatives {
    double value = 0.0;
    Matrix dF;          // dF/dS = sum_p F_p v_p v_p^T
    Matrix pair_coeffs; // (F_p - F_q)/(lambda_p - lambda_q), confluent limit near ties
};

inline MatrixDerivatives matrix_F_derivatives(const OperatorSpec& spec, const MatrixPoint& pt,
                                              double confluent_rel = 1e-7) {
    const auto& lam = pt.eigvals.values();
    const auto g = grad_F(spec, lam);
    const Matrix h = hess_F(spec, lam);
    const Eigen::Index n = spec.n();

    MatrixDerivatives out;
    out.value = eval_F(spec, lam);
    Vector gv(n);
    for (Eigen::Index p = 0; p < n; ++p) gv(p) = g[static_cast<std::size_t>(p)];
    out.dF = pt.eigvecs * gv.asDiagonal() * pt.eigvecs.transpose();

    const double switch_gap = confluent_rel * (1.0 + inf_norm(lam));
    out.pair_coeffs = Matrix::Zero(n, n);
    for (Eigen::Index p = 0; p < n; ++p) {
        for (Eigen::Index q = 0; q < n; ++q) {
            if (p == q) continue; // F_pp = 0: F is affine in each eigenvalue
            const double gap = lam[static_cast<std::size_t>(p)] - lam[static_cast<std::size_t>(q)];
            out.pair_coeffs(p, q) = std::abs(gap) < switch_gap ? -h(p, q) : (gv(p) - gv(q)) / gap;
        }
    }
    return out;
}

/// d^2/dt^2 F(S + tT) at t = 0, assembled in the eigenbasis of S:
/// sum_{p,q} F_pq T_pp T_qq + sum_{p != q} pair_coeffs(p,q) T_pq^2.
inline double matrix_second_derivative(const OperatorSpec& spec, const MatrixPoint& pt, const Matrix& T) {
    const auto d = matrix_F_derivatives(spec, pt);
    const Matrix h = hess_F(spec, pt.eigvals.values());
    const Matrix t = pt.eigvecs.transpose() * (0.5 * (T + T.transpose())) * pt.eigvecs;
    double s = 0.0;
    const Eigen::Index n = spec.n();
    for (Eigen::Index p = 0; p < n; ++p)
        for (Eigen::Index q = 0; q < n; ++q)
            s += (p == q) ? 0.0 : h(p, q) * t(p, p) * t(q, q) + d.pair_coeffs(p, q) * t(p, q) * t(p, q);
    return s;
}

/// F evaluated on a symmetric matrix through its eigenvalues.
inline double eval_F_matrix(const OperatorSpec& spec, const Matrix& s) {
    return eval_F(spec, to_std(jacobi_eigen(s).values));
}

/// Smallest t > 0 with F(t I) = target, by bisection on [0, hi]. F(tI) is
/// increasing for t > max(0, -min y) since every derivative is a positive
/// lifted sigma there.
inline double solve_isotropic_level(const OperatorSpec& spec, double target) {
    const int n = spec.n();
    auto f = [&](double t) { return eval_F(spec, std::vector<double>(static_cast<std::size_t>(n), t)) - target; };
    double lo = 0.0;
    for (double yi : spec.y()) lo = std::max(lo, -yi);
    // below lo the lifted point may leave the cone; search from there upward
    double hi = std::max(1.0, 2.0 * lo);
    int guard = 0;
    while (f(hi) < 0.0) {
        hi *= 2.0;
        if (++guard > 200) fail(ErrorKind::NoAdmissibleStart, "solve_isotropic_level: F(tI) never reaches target");
    }
    if (f(lo) >= 0.0) {
        // F already exceeds the target at the cone entry point; walk down is not admissible
        return lo > 0.0 ? lo : hi;
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
        if (hi - lo <= 1e-15 * std::max(1.0, hi)) break;
    }
    return hi;
}

} // namespace shl
