#pragma once

// Elementary symmetric functions and their deletions, derivatives and
// quotients. Indices are 0-based throughout the C++ API.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "shl/errors.hpp"
#include "shl/hyperdual.hpp"
#include "shl/linalg.hpp"

namespace shl {

/// Eigenvalue vector, optionally known to be in decreasing order.
class Spectrum {
public:
    Spectrum() = default;

    explicit Spectrum(std::vector<double> values, bool sorted_desc = false)
        : values_(std::move(values)), sorted_desc_(sorted_desc) {
        if (values_.empty()) fail(ErrorKind::InvalidInput, "Spectrum: empty");
        for (double v : values_)
            if (!std::isfinite(v)) fail(ErrorKind::InvalidInput, "Spectrum: non-finite entry");
        if (sorted_desc_ && !std::is_sorted(values_.begin(), values_.end(), std::greater<>{}))
            fail(ErrorKind::InvalidInput, "Spectrum: flagged sorted but not in decreasing order");
    }

    /// Stable descending rearrangement.
    static Spectrum descending(std::vector<double> values) {
        std::stable_sort(values.begin(), values.end(), std::greater<>{});
        return Spectrum(std::move(values), true);
    }

    std::size_t size() const noexcept { return values_.size(); }
    bool sorted_desc() const noexcept { return sorted_desc_; }
    double operator[](std::size_t i) const { return values_[i]; }
    const std::vector<double>& values() const noexcept { return values_; }
    std::span<const double> span() const noexcept { return values_; }
    operator std::span<const double>() const noexcept { return values_; } // NOLINT

private:
    std::vector<double> values_;
    bool sorted_desc_ = false;
};

/// sigma_k by the product recurrence: each entry updates degrees k..1 once.
template <class T>
T sigma_generic(int k, std::span<const T> x) {
    if (k < 0 || k > static_cast<int>(x.size())) return T(0.0);
    std::vector<T> e(static_cast<std::size_t>(k) + 1, T(0.0));
    e[0] = T(1.0);
    int filled = 0;
    for (const T& xi : x) {
        filled = std::min(filled + 1, k);
        for (int j = filled; j >= 1; --j) e[static_cast<std::size_t>(j)] += xi * e[static_cast<std::size_t>(j - 1)];
    }
    return e[static_cast<std::size_t>(k)];
}

inline double sigma(int k, std::span<const double> x) { return sigma_generic<double>(k, x); }

/// All of sigma_0 .. sigma_n in one pass.
inline std::vector<double> sigma_table(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<double> e(n + 1, 0.0);
    e[0] = 1.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j >= 1; --j) e[j] += x[i] * e[j - 1];
    return e;
}

inline std::vector<double> drop_entries(std::span<const double> x, std::span<const std::size_t> drop) {
    for (std::size_t d : drop)
        if (d >= x.size()) fail(ErrorKind::IndexOutOfRange, "sigma_deleted: index " + std::to_string(d));
    std::vector<double> out;
    out.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        if (std::find(drop.begin(), drop.end(), i) == drop.end()) out.push_back(x[i]);
    return out;
}

/// sigma_k with the listed entries removed (equivalently set to zero).
inline double sigma_deleted(int k, std::span<const double> x, std::span<const std::size_t> drop) {
    if (drop.empty() || drop.size() > 2)
        fail(ErrorKind::InvalidInput, "sigma_deleted: expects one or two indices");
    if (drop.size() == 2 && drop[0] == drop[1])
        fail(ErrorKind::InvalidInput, "sigma_deleted: repeated index");
    const auto shortened = drop_entries(x, drop);
    return sigma(k, shortened);
}

inline double sigma_deleted(int k, std::span<const double> x, std::size_t i) {
    const std::size_t d[] = {i};
    return sigma_deleted(k, x, d);
}

inline double sigma_deleted(int k, std::span<const double> x, std::size_t i, std::size_t j) {
    const std::size_t d[] = {i, j};
    return sigma_deleted(k, x, d);
}

/// d sigma_k / d x_i = sigma_{k-1;i}.
inline std::vector<double> sigma_grad(int k, std::span<const double> x) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = sigma_deleted(k - 1, x, i);
    return g;
}

/// Off-diagonal entries sigma_{k-2;pq}; the diagonal vanishes since sigma_k is
/// affine in each entry.
inline Matrix sigma_hess(int k, std::span<const double> x) {
    const auto n = static_cast<Eigen::Index>(x.size());
    Matrix h = Matrix::Zero(n, n);
    for (Eigen::Index p = 0; p < n; ++p)
        for (Eigen::Index q = p + 1; q < n; ++q)
            h(p, q) = h(q, p) =
                sigma_deleted(k - 2, x, static_cast<std::size_t>(p), static_cast<std::size_t>(q));
    return h;
}

/// q_k = sigma_k / sigma_{k-1}.
inline double quotient_q(int k, std::span<const double> x, double zero_tol = 1e-14) {
    const double den = sigma(k - 1, x);
    if (std::abs(den) <= zero_tol)
        fail(ErrorKind::DivisionByZero, "quotient_q: sigma_{k-1} vanishes");
    return sigma(k, x) / den;
}

/// Exact d^2 q_k / dx_p dx_q through hyper-dual arithmetic.
inline double quotient_q_second(int k, std::span<const double> x, std::size_t p, std::size_t q) {
    std::vector<HyperDual> hx(x.begin(), x.end());
    hx[p].b = 1.0;
    hx[q].c = 1.0;
    const std::span<const HyperDual> s(hx);
    return (sigma_generic<HyperDual>(k, s) / sigma_generic<HyperDual>(k - 1, s)).d;
}

struct IdentityCheck {
    std::string name;
    double max_discrepancy = 0.0;
    int evaluated = 0;
    int skipped = 0;
};

struct IdentityReport {
    std::vector<IdentityCheck> checks;
    double max_discrepancy = 0.0;
    double tol = 0.0;
    bool passed = true;
};

/// Both sides of the deletion identities
///   (1) s_k = s_{k;i} + x_i s_{k-1;i}
///   (2) sum_i s_{k;i} = (n-k) s_k,   sum_i s_{k-1;i} x_i = k s_k
///   (3) sum_i s_{k-1;i} x_i^2 = s_1 s_k - (k+1) s_{k+1}
/// and the second-derivative identity for q_k, each discrepancy normalised by
/// the total magnitude of the terms involved.
inline IdentityReport identity_suite(std::span<const double> x, int k, double tol = 1e-9,
                                     double denominator_floor = 1e-8) {
    const int n = static_cast<int>(x.size());
    if (k < 1 || k > n) fail(ErrorKind::InvalidInput, "identity_suite: need 1 <= k <= n");

    const double sk = sigma(k, x);
    const double sk1 = sigma(k - 1, x);
    const double skp1 = sigma(k + 1, x);
    const double s1 = sigma(1, x);

    IdentityReport rep;
    rep.tol = tol;
    auto record = [&](IdentityCheck& c, double lhs, double rhs, double mag) {
        c.max_discrepancy = std::max(c.max_discrepancy, rel_discrepancy(lhs, rhs, mag));
        ++c.evaluated;
    };

    IdentityCheck c1{"deletion_split"};
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double ski = sigma_deleted(k, x, i), sk1i = sigma_deleted(k - 1, x, i);
        record(c1, sk, ski + x[i] * sk1i, std::abs(ski) + std::abs(x[i] * sk1i));
    }
    rep.checks.push_back(c1);

    IdentityCheck c2a{"deletion_sum"};
    IdentityCheck c2b{"euler_sum"};
    {
        double sum_del = 0.0, mag_del = 0.0, sum_eu = 0.0, mag_eu = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double ski = sigma_deleted(k, x, i);
            const double t = sigma_deleted(k - 1, x, i) * x[i];
            sum_del += ski;
            mag_del += std::abs(ski);
            sum_eu += t;
            mag_eu += std::abs(t);
        }
        record(c2a, sum_del, (n - k) * sk, mag_del);
        record(c2b, sum_eu, k * sk, mag_eu);
    }
    rep.checks.push_back(c2a);
    rep.checks.push_back(c2b);

    IdentityCheck c3{"weighted_square_sum"};
    {
        double lhs = 0.0, mag = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double t = sigma_deleted(k - 1, x, i) * x[i] * x[i];
            lhs += t;
            mag += std::abs(t);
        }
        const double rhs = s1 * sk - (k + 1) * skp1;
        record(c3, lhs, rhs, mag + std::abs(s1 * sk) + std::abs((k + 1) * skp1));
    }
    rep.checks.push_back(c3);

    IdentityCheck c4{"quotient_second_derivative"};
    if (std::abs(sk) > denominator_floor && std::abs(sk1) > denominator_floor) {
        const auto gk = sigma_grad(k, x);
        const auto gk1 = sigma_grad(k - 1, x);
        const Matrix hk = sigma_hess(k, x);
        const Matrix hk1 = sigma_hess(k - 1, x);
        const double qk = sk / sk1;
        for (std::size_t p = 0; p < x.size(); ++p) {
            for (std::size_t q = p; q < x.size(); ++q) {
                const auto ip = static_cast<Eigen::Index>(p), iq = static_cast<Eigen::Index>(q);
                const double lhs = quotient_q_second(k, x, p, q) / qk;
                const double terms[] = {hk(ip, iq) / sk, -gk[p] / sk * gk1[q] / sk1,
                                        -gk[q] / sk * gk1[p] / sk1, -hk1(ip, iq) / sk1,
                                        2.0 * gk1[p] * gk1[q] / (sk1 * sk1)};
                double rhs = 0.0, mag = 0.0;
                for (double t : terms) {
                    rhs += t;
                    mag += std::abs(t);
                }
                record(c4, lhs, rhs, mag);
            }
        }
    } else {
        ++c4.skipped;
    }
    rep.checks.push_back(c4);

    for (const auto& c : rep.checks) rep.max_discrepancy = std::max(rep.max_discrepancy, c.max_discrepancy);
    rep.passed = rep.max_discrepancy <= tol;
    return rep;
}

/// sigma_1..sigma_k all strictly positive.
inline bool in_gamma_k_plain(std::span<const double> x, int k) {
    const auto table = sigma_table(x);
    for (int j = 1; j <= k; ++j)
        if (!(j < static_cast<int>(table.size()) && table[static_cast<std::size_t>(j)] > 0.0)) return false;
    return true;
}

struct XkBound {
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
};

/// x_k against sigma_k^{1/k} + |x_n| for the decreasing rearrangement of x.
inline XkBound xk_bound_check(std::span<const double> x, int k) {
    const int n = static_cast<int>(x.size());
    if (k < 1 || k > n) fail(ErrorKind::InvalidInput, "xk_bound_check: need 1 <= k <= n");
    std::vector<double> s(x.begin(), x.end());
    std::stable_sort(s.begin(), s.end(), std::greater<>{});
    if (!in_gamma_k_plain(s, k)) fail(ErrorKind::NotInCone, "xk_bound_check: x not in Gamma_k");
    XkBound b;
    b.lhs = s[static_cast<std::size_t>(k - 1)];
    b.rhs = std::pow(sigma(k, s), 1.0 / k) + std::abs(s.back());
    b.ratio = b.lhs / b.rhs;
    return b;
}

/// Pointwise cone inequalities for a sorted point of Gamma_k:
/// x_1 s_{k-1;1} >= (k/n) s_k, monotonicity of s_{k-1;i} in x_i,
/// s_{k-1} >= x_1 ... x_{k-1}, and the ratio s_{k-1;k} / s_{k-1}.
struct ConeInequalities {
    double top_weight_slack = 0.0;   // x_1 s_{k-1;1} - (k/n) s_k
    double monotone_violation = 0.0; // max over x_i >= x_j of s_{k-1;i} - s_{k-1;j}
    double product_slack = 0.0;      // s_{k-1} - x_1...x_{k-1}
    double kth_deletion_ratio = 0.0; // s_{k-1;k} / s_{k-1}
};

inline ConeInequalities cone_inequalities(const Spectrum& x, int k) {
    if (!x.sorted_desc()) fail(ErrorKind::InvalidInput, "cone_inequalities: spectrum must be sorted");
    const int n = static_cast<int>(x.size());
    if (k < 1 || k > n) fail(ErrorKind::InvalidInput, "cone_inequalities: need 1 <= k <= n");
    if (!in_gamma_k_plain(x, k)) fail(ErrorKind::NotInCone, "cone_inequalities: x not in Gamma_k");
    ConeInequalities out;
    const auto g = sigma_grad(k, x);
    out.top_weight_slack = x[0] * g[0] - static_cast<double>(k) / n * sigma(k, x);
    double worst = -INFINITY;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j)
            if (i != j && x[i] >= x[j]) worst = std::max(worst, g[i] - g[j]);
    out.monotone_violation = x.size() > 1 ? worst : 0.0;
    double prod = 1.0;
    for (int i = 0; i < k - 1; ++i) prod *= x[static_cast<std::size_t>(i)];
    const double sk1 = sigma(k - 1, x);
    out.product_slack = sk1 - prod;
    out.kth_deletion_ratio = sigma_deleted(k - 1, x, static_cast<std::size_t>(k - 1)) / sk1;
    return out;
}

} // namespace shl
