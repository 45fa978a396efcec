#pragma once

namespace shl {

/// Hyper-dual number a + b e1 + c e2 + d e1 e2 with e1^2 = e2^2 = 0.
///
/// Propagating (x_p + e1, x_q + e2) through a rational expression yields the
/// exact mixed second partial in the e1 e2 coefficient; no step size involved.
struct HyperDual {
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;

    constexpr HyperDual() = default;
    constexpr HyperDual(double value) : a(value) {} // NOLINT: implicit lift of constants
    constexpr HyperDual(double a_, double b_, double c_, double d_) : a(a_), b(b_), c(c_), d(d_) {}

    friend constexpr HyperDual operator+(HyperDual x, HyperDual y) {
        return {x.a + y.a, x.b + y.b, x.c + y.c, x.d + y.d};
    }
    friend constexpr HyperDual operator-(HyperDual x, HyperDual y) {
        return {x.a - y.a, x.b - y.b, x.c - y.c, x.d - y.d};
    }
    friend constexpr HyperDual operator*(HyperDual x, HyperDual y) {
        return {x.a * y.a, x.a * y.b + x.b * y.a, x.a * y.c + x.c * y.a,
                x.a * y.d + x.b * y.c + x.c * y.b + x.d * y.a};
    }
    friend constexpr HyperDual operator/(HyperDual x, HyperDual y) {
        const double inv = 1.0 / y.a;
        const HyperDual recip{inv, -y.b * inv * inv, -y.c * inv * inv,
                              2.0 * y.b * y.c * inv * inv * inv - y.d * inv * inv};
        return x * recip;
    }
    constexpr HyperDual& operator+=(HyperDual y) { return *this = *this + y; }
    constexpr HyperDual& operator*=(HyperDual y) { return *this = *this * y; }
};

} // namespace shl
