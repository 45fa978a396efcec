#pragma once

// Seeded samplers for cone points. Every sampler takes the generator by
// reference; per-index generators come from derive_seed so that parallel
// sweeps reproduce sequential ones exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "shl/cone.hpp"
#include "shl/symfun.hpp"

namespace shl {

using Rng = std::mt19937_64;

/// splitmix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return mix64(mix64(seed ^ mix64(stream)) ^ index);
}

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// Random point x with member(x) true, for a predicate describing a cone
/// that contains the positive orthant. A positive base is pushed toward the
/// boundary along a random direction with negative entries; the step is a
/// uniform fraction of the distance to the boundary, so samples reach close
/// to it.
template <class Member>
std::vector<double> sample_in_cone(Rng& rng, int n, Member&& member, double spread = 1.5) {
    std::normal_distribution<double> normal(0.0, spread);
    std::vector<double> base(static_cast<std::size_t>(n)), dir(static_cast<std::size_t>(n));
    for (auto& v : base) v = std::exp(normal(rng));
    for (auto& v : dir) v = uniform(rng, 0.0, 1.0) < 0.5 ? 0.0 : -std::exp(normal(rng));
    auto at = [&](double s) {
        std::vector<double> x(base);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += s * dir[i];
        return x;
    };
    double lo = 0.0, hi = 1.0;
    while (member(at(hi)) && hi < 1e6) hi *= 2.0;
    if (member(at(hi))) return at(uniform(rng, 0.0, hi));
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (member(at(mid)) ? lo : hi) = mid;
    }
    auto x = at(uniform(rng, 0.0, 0.999) * lo);
    if (!member(x)) x = base;
    return x;
}

/// Random point of Gamma_k^n (not sorted).
inline std::vector<double> sample_cone_point(Rng& rng, int n, int k, double spread = 1.5) {
    return sample_in_cone(rng, n, [k](const std::vector<double>& x) { return in_gamma_k_plain(x, k); }, spread);
}

/// Random lambda with (lambda, y) in Gamma_k^{n+m} (not sorted).
inline std::vector<double> sample_lifted_point(Rng& rng, int n, std::span<const double> y, int k,
                                               double spread = 1.5) {
    return sample_in_cone(
        rng, n, [&](const std::vector<double>& x) { return in_gamma_k_plain(concat(x, y), k); }, spread);
}

struct Condition1Witness {
    std::vector<double> lambda; // sorted descending
    std::vector<double> y;
    int k = 0;
};

/// Searches for (lambda, y) with y >= 0 and (lambda, y) in Gamma_k^{n+m}
/// while lambda itself is outside Gamma_{k-1}^n.
inline std::optional<Condition1Witness> find_condition1_witness(Rng& rng, int n, int k, int m, int tries = 100000) {
    if (k < 2 || k > n || m < 1) return std::nullopt;
    for (int t = 0; t < tries; ++t) {
        std::vector<double> y(static_cast<std::size_t>(m));
        for (auto& v : y) v = std::exp(uniform(rng, 0.0, 3.0));
        std::vector<double> lam(static_cast<std::size_t>(n));
        for (auto& v : lam) v = uniform(rng, -2.0, 2.0);
        if (!in_gamma_k_plain(concat(lam, y), k) || in_gamma_k_plain(lam, k - 1)) continue;
        std::sort(lam.begin(), lam.end(), std::greater<>{});
        return Condition1Witness{lam, y, k};
    }
    return std::nullopt;
}

} // namespace shl
