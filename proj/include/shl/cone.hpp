#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "shl/errors.hpp"
#include "shl/symfun.hpp"

namespace shl {

struct ConeVerdict {
    bool member = false;
    std::optional<int> first_failing_degree; // 1-based degree j
    std::vector<double> margins;             // sigma_1 .. sigma_k
};

/// Membership in Gamma_k: sigma_j > eps * max(1, |x|_inf^j) for j = 1..k.
/// With eps = 0 this is the plain strict definition.
inline ConeVerdict in_gamma_k(std::span<const double> x, int k, double eps_cone = 0.0) {
    const int n = static_cast<int>(x.size());
    if (k < 1 || k > n) fail(ErrorKind::InvalidInput, "in_gamma_k: need 1 <= k <= n");
    double inf_norm = 0.0;
    for (double v : x) inf_norm = std::max(inf_norm, std::abs(v));
    const auto table = sigma_table(x);
    ConeVerdict out;
    out.margins.assign(table.begin() + 1, table.begin() + 1 + k);
    for (int j = 1; j <= k; ++j) {
        const double floor = eps_cone * std::max(1.0, std::pow(inf_norm, j));
        if (!(out.margins[static_cast<std::size_t>(j - 1)] > floor)) {
            out.first_failing_degree = j;
            break;
        }
    }
    out.member = !out.first_failing_degree.has_value();
    return out;
}

inline std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out(a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

/// Membership of lambda in the lifted set: (lambda, y) in Gamma_k^{n+m}.
inline ConeVerdict in_lifted_cone(std::span<const double> lambda, std::span<const double> y, int k,
                                  double eps_cone = 0.0) {
    if (k < 1 || k > static_cast<int>(lambda.size()))
        fail(ErrorKind::InvalidInput, "in_lifted_cone: need 1 <= k <= n");
    return in_gamma_k(concat(lambda, y), k, eps_cone);
}

enum class Condition { One = 1, Two = 2 };

/// Condition 1: lambda in the lifted cone and every root y_i >= 0.
/// Condition 2: lambda in Gamma_{k-1}^n and every coefficient a_i >= 0.
inline bool check_condition(std::span<const double> lambda, std::span<const double> y,
                            std::span<const double> a, int k, Condition which) {
    if (which == Condition::One) {
        const bool nonneg = std::all_of(y.begin(), y.end(), [](double v) { return v >= 0.0; });
        return nonneg && in_lifted_cone(lambda, y, k).member;
    }
    if (k < 2) fail(ErrorKind::InvalidInput, "check_condition: Condition 2 needs k >= 2");
    const bool nonneg = std::all_of(a.begin(), a.end(), [](double v) { return v >= 0.0; });
    return nonneg && in_gamma_k(lambda, k - 1).member;
}

/// max(0, -lambda_min / sigma_1). (D^2u)_min >= -delta Laplace(u) iff this is <= delta.
inline double semiconvexity_ratio(std::span<const double> lambda) {
    const double s1 = sigma(1, lambda);
    if (!(s1 > 0.0)) fail(ErrorKind::InvalidInput, "semiconvexity_ratio: sigma_1 <= 0");
    const double lmin = *std::min_element(lambda.begin(), lambda.end());
    return std::max(0.0, -lmin / s1);
}

struct PinchCheck {
    double lhs = 0.0;   // lambda_n
    double bound = 0.0; // -lambda_1 / (n - 1)
    double excess() const { return bound - lhs; }
};

/// For (lambda, y) in Gamma_{n-1}^{n+m}: lambda_n against -lambda_1/(n-1).
/// The additive constant is only ever estimated as an envelope of excess().
inline PinchCheck pinch_check(const Spectrum& lambda, std::span<const double> y) {
    if (!lambda.sorted_desc()) fail(ErrorKind::InvalidInput, "pinch_check: spectrum must be sorted");
    const int n = static_cast<int>(lambda.size());
    if (n < 2) fail(ErrorKind::InvalidInput, "pinch_check: need n >= 2");
    if (!in_lifted_cone(lambda, y, n - 1).member)
        fail(ErrorKind::NotInCone, "pinch_check: (lambda, y) not in Gamma_{n-1}^{n+m}");
    return {lambda[lambda.size() - 1], -lambda[0] / (n - 1)};
}

} // namespace shl
