#include <gtest/gtest.h>

#include <Eigen/QR>

#include "oracles.hpp"
#include "shl/operator.hpp"
#include "shl/sampling.hpp"

using namespace shl;

namespace {

Matrix random_symmetric(Rng& rng, int n, double scale = 2.0) {
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = uniform(rng, -scale, scale);
    return 0.5 * (a + a.transpose());
}

Matrix random_orthogonal(Rng& rng, int n) {
    Matrix a(n, n);
    std::normal_distribution<double> g;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = g(rng);
    Eigen::HouseholderQR<Matrix> qr(a);
    return qr.householderQ();
}

OperatorSpec random_spec(Rng& rng, int n, int k, int m) {
    std::vector<double> y(static_cast<std::size_t>(m));
    for (auto& v : y) v = uniform(rng, -1.0, 2.0);
    return OperatorSpec::from_roots(n, k, y);
}

} // namespace

TEST(Roots, Examples) {
    EXPECT_EQ(roots_from_coeffs(std::vector<double>{2}), (std::vector<double>{2}));
    const auto r = roots_from_coeffs(std::vector<double>{2, 1});
    ASSERT_EQ(r.size(), 2u);
    EXPECT_NEAR(r[0], 1.0, 1e-12);
    EXPECT_NEAR(r[1], 1.0, 1e-12);
    try {
        roots_from_coeffs(std::vector<double>{0, 1});
        FAIL() << "expected NoRealRoots";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NoRealRoots);
    }
}

TEST(Roots, CoefficientExamples) {
    EXPECT_EQ(coeffs_from_roots(std::vector<double>{1, 1}), (std::vector<double>{2, 1}));
    EXPECT_EQ(coeffs_from_roots(std::vector<double>{2}), (std::vector<double>{2}));
    EXPECT_EQ(coeffs_from_roots(std::vector<double>{1, 2, 3}), (std::vector<double>{6, 11, 6}));
}

TEST(Roots, VietaRoundTrip) {
    Rng rng(41);
    for (int s = 0; s < 2000; ++s) {
        const int m = uniform_int(rng, 1, 3);
        std::vector<double> y(static_cast<std::size_t>(m));
        for (auto& v : y) v = uniform(rng, -3, 3);
        if (s % 5 == 0 && m > 1) y[1] = y[0];
        const auto a = coeffs_from_roots(y);
        const auto ref = oracle::vieta(y);
        for (std::size_t r = 0; r < a.size(); ++r) EXPECT_NEAR(a[r], ref[r], 1e-12 * std::max(1.0, std::abs(ref[r])));
        const auto back = roots_from_coeffs(a);
        auto sorted = y;
        std::sort(sorted.begin(), sorted.end(), std::greater<>{});
        ASSERT_EQ(back.size(), sorted.size());
        for (std::size_t i = 0; i < back.size(); ++i) EXPECT_NEAR(back[i], sorted[i], 1e-5 * (1 + std::abs(sorted[i])));
        const auto a2 = coeffs_from_roots(back);
        for (std::size_t r = 0; r < a.size(); ++r) EXPECT_NEAR(a2[r], a[r], 1e-8 * std::max(1.0, std::abs(a[r])));
    }
}

TEST(Spec, Validation) {
    EXPECT_THROW(OperatorSpec::from_roots(2, 2, {1, 2}), Error);
    EXPECT_THROW(OperatorSpec::sigma_k(2, 3), Error);
    try {
        OperatorSpec::from_both(3, 3, {3}, {1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InconsistentSpec);
    }
    const auto s = OperatorSpec::from_coeffs(3, 3, {3, 2});
    EXPECT_NEAR(s.y()[0], 2.0, 1e-12);
    EXPECT_NEAR(s.y()[1], 1.0, 1e-12);
}

TEST(EvalF, Examples) {
    const auto s = OperatorSpec::from_coeffs(2, 2, {1});
    EXPECT_DOUBLE_EQ(eval_F(s, std::vector<double>{2, 3}), 11.0);
    EXPECT_DOUBLE_EQ(eval_F_expanded(s, std::vector<double>{2, 3}), 11.0);
    EXPECT_DOUBLE_EQ(eval_F(OperatorSpec::sigma_k(3, 2), std::vector<double>{1, 1, 1}), 3.0);
    EXPECT_DOUBLE_EQ(eval_F(OperatorSpec::from_coeffs(2, 2, {0}), std::vector<double>{1, 1}), 1.0);
    EXPECT_THROW(eval_F(s, std::vector<double>{1, 2, 3}), Error);
}

TEST(GradF, Examples) {
    const auto s = OperatorSpec::from_roots(2, 2, {1});
    EXPECT_EQ(grad_F(s, std::vector<double>{2, 3}), (std::vector<double>{4, 3}));
    EXPECT_EQ(grad_F(OperatorSpec::sigma_k(3, 2), std::vector<double>{2, 1, 0}), (std::vector<double>{1, 2, 3}));
    const Matrix h = hess_F(s, std::vector<double>{-7, 0.25});
    EXPECT_DOUBLE_EQ(h(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(h(0, 0), 0.0);
}

TEST(Lifting, IdentityForEveryDegree) {
    Rng rng(42);
    for (int s = 0; s < 10000; ++s) {
        const int n = uniform_int(rng, 1, 8);
        const int m = uniform_int(rng, 0, 3);
        std::vector<double> lam(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(m));
        for (auto& v : lam) v = uniform(rng, -5, 5);
        for (auto& v : y) v = uniform(rng, -5, 5);
        const auto a = coeffs_from_roots(y);
        const auto hat = oracle::join(lam, y);
        for (int k = 0; k <= n + m; ++k) {
            double mag = 0.0;
            oracle::sigma(k, hat, &mag);
            const double lifted = sigma(k, hat);
            double expanded = sigma(k, lam);
            for (int r = 1; r <= m; ++r) expanded += a[static_cast<std::size_t>(r - 1)] * sigma(k - r, lam);
            EXPECT_LE(std::abs(lifted - expanded), 1e-10 * std::max(1.0, mag)) << "n=" << n << " m=" << m << " k=" << k;
        }
    }
}

TEST(Derivatives, GradAndHessMatchFiniteDifferences) {
    Rng rng(43);
    for (int s = 0; s < 1000; ++s) {
        const int n = uniform_int(rng, 2, 6);
        const int k = uniform_int(rng, 2, n);
        const int m = uniform_int(rng, 0, k - 1);
        const auto spec = random_spec(rng, n, k, m);
        std::vector<double> lam(static_cast<std::size_t>(n));
        for (auto& v : lam) v = uniform(rng, -2, 2);
        const auto a = spec.a();
        auto f = [&](const std::vector<double>& l) { return oracle::expanded_F(k, l, a); };
        const auto g = grad_F(spec, lam);
        const auto fd = oracle::fd_gradient(f, lam, 1e-5);
        const Matrix H = hess_F(spec, lam);
        for (std::size_t i = 0; i < lam.size(); ++i) {
            EXPECT_NEAR(g[i], fd[i], 1e-5 * std::max(1.0, std::abs(g[i])));
            auto gi = [&](const std::vector<double>& l) { return grad_F(spec, l)[i]; };
            const auto row = oracle::fd_gradient(gi, lam, 1e-5);
            for (std::size_t j = 0; j < lam.size(); ++j) {
                const double hij = H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                EXPECT_NEAR(hij, row[j], 1e-5 * std::max(1.0, std::abs(hij)));
            }
        }
    }
}

TEST(Derivatives, EulerIdentityWithRootSlots) {
    Rng rng(44);
    for (int s = 0; s < 2000; ++s) {
        const int n = uniform_int(rng, 2, 7);
        const int k = uniform_int(rng, 2, n);
        const int m = uniform_int(rng, 0, k - 1);
        const auto spec = random_spec(rng, n, k, m);
        std::vector<double> lam(static_cast<std::size_t>(n));
        for (auto& v : lam) v = uniform(rng, -3, 3);
        const auto g = grad_F(spec, lam);
        const auto gy = root_slot_grad(spec, lam);
        double lhs = 0.0, mag = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            lhs += g[i] * lam[i];
            mag += std::abs(g[i] * lam[i]);
        }
        for (std::size_t j = 0; j < gy.size(); ++j) {
            lhs += gy[j] * spec.y()[j];
            mag += std::abs(gy[j] * spec.y()[j]);
        }
        EXPECT_LE(std::abs(lhs - k * eval_F(spec, lam)), 1e-10 * std::max(1.0, mag));
    }
}

TEST(Derivatives, EllipticInsideLiftedCone) {
    Rng rng(45);
    for (int s = 0; s < 2000; ++s) {
        const int n = uniform_int(rng, 2, 7);
        const int k = uniform_int(rng, 2, n);
        const int m = uniform_int(rng, 0, k - 1);
        const auto spec = random_spec(rng, n, k, m);
        const auto lam = sample_lifted_point(rng, n, spec.y(), k);
        if (!in_lifted_cone(lam, spec.y(), k).member) continue;
        for (double gi : grad_F(spec, lam)) EXPECT_GT(gi, 0.0);
    }
}

TEST(MatrixDerivatives, DiagonalExample) {
    const auto spec = OperatorSpec::from_roots(2, 2, {1});
    Matrix S(2, 2);
    S << 2, 0, 0, 3;
    const auto d = matrix_F_derivatives(spec, MatrixPoint::from_matrix(S));
    EXPECT_NEAR(d.value, 11.0, 1e-12);
    EXPECT_NEAR(d.dF(0, 0), 4.0, 1e-12);
    EXPECT_NEAR(d.dF(1, 1), 3.0, 1e-12);
    EXPECT_NEAR(d.dF(0, 1), 0.0, 1e-12);
}

TEST(MatrixDerivatives, ConfluentLimitAtIdentity) {
    // (F_p - F_q)/(l_p - l_q) tends to -sigma_{k-2;pq}
    const auto spec = OperatorSpec::sigma_k(3, 2);
    const auto d = matrix_F_derivatives(spec, MatrixPoint::from_matrix(Matrix::Identity(3, 3)));
    for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) {
            ASSERT_TRUE(std::isfinite(d.pair_coeffs(p, q)));
            if (p != q) EXPECT_DOUBLE_EQ(std::abs(d.pair_coeffs(p, q)), 1.0);
        }
    EXPECT_DOUBLE_EQ(d.pair_coeffs(0, 1), -1.0);
    // matches the divided difference just off the tie
    Matrix S = Matrix::Identity(3, 3);
    S(0, 0) += 1e-3;
    const auto d2 = matrix_F_derivatives(spec, MatrixPoint::from_matrix(S));
    EXPECT_NEAR(d2.pair_coeffs(0, 1), -1.0, 1e-9);
}

TEST(MatrixDerivatives, SecondDerivativeMatchesMatrixDifferences) {
    Rng rng(46);
    for (int s = 0; s < 200; ++s) {
        const int n = uniform_int(rng, 2, 5);
        const int k = uniform_int(rng, 2, n);
        const int m = uniform_int(rng, 0, k - 1);
        const auto spec = random_spec(rng, n, k, m);
        const Matrix S = random_symmetric(rng, n);
        const Matrix T = random_symmetric(rng, n, 1.0);
        const double h = 1e-4;
        const double fd =
            (eval_F_matrix(spec, S + h * T) - 2 * eval_F_matrix(spec, S) + eval_F_matrix(spec, S - h * T)) / (h * h);
        const double an = matrix_second_derivative(spec, MatrixPoint::from_matrix(S), T);
        EXPECT_NEAR(an, fd, 1e-4 * std::max(1.0, std::abs(an))) << "sample " << s;

        // first derivative: <dF, T>
        const auto d = matrix_F_derivatives(spec, MatrixPoint::from_matrix(S));
        const double fd1 = (eval_F_matrix(spec, S + h * T) - eval_F_matrix(spec, S - h * T)) / (2 * h);
        EXPECT_NEAR((d.dF.array() * T.array()).sum(), fd1, 1e-5 * std::max(1.0, std::abs(fd1)));
    }
}

TEST(MatrixDerivatives, BasisInvariance) {
    Rng rng(47);
    for (int s = 0; s < 200; ++s) {
        const int n = uniform_int(rng, 2, 5);
        const int k = uniform_int(rng, 2, n);
        const auto spec = random_spec(rng, n, k, uniform_int(rng, 0, k - 1));
        const Matrix S = random_symmetric(rng, n);
        const Matrix Q = random_orthogonal(rng, n);
        const auto d = matrix_F_derivatives(spec, MatrixPoint::from_matrix(S));
        const auto dq = matrix_F_derivatives(spec, MatrixPoint::from_matrix(Q * S * Q.transpose()));
        const double scale = std::max(1.0, d.dF.norm());
        EXPECT_NEAR(d.value, dq.value, 1e-8 * std::max(1.0, std::abs(d.value)));
        EXPECT_LE((Q * d.dF * Q.transpose() - dq.dF).norm(), 1e-8 * scale);
    }
}

TEST(MatrixPoint, Reconstruction) {
    Rng rng(48);
    for (int s = 0; s < 200; ++s) {
        const int n = uniform_int(rng, 1, 6);
        const Matrix S = random_symmetric(rng, n);
        const auto pt = MatrixPoint::from_matrix(S);
        Vector l(n);
        for (int i = 0; i < n; ++i) l(i) = pt.eigvals[static_cast<std::size_t>(i)];
        EXPECT_LE((pt.eigvecs * l.asDiagonal() * pt.eigvecs.transpose() - S).norm(), 1e-9 * std::max(1.0, S.norm()));
        EXPECT_LE((pt.eigvecs.transpose() * pt.eigvecs - Matrix::Identity(n, n)).norm(), 1e-10);
    }
}

TEST(IsotropicLevel, SolvesScalarEquation) {
    // c^2 + 2c = 3 at n = 2, k = 2, a = (1)
    EXPECT_NEAR(solve_isotropic_level(OperatorSpec::from_coeffs(2, 2, {1}), 3.0), 1.0, 1e-12);
    EXPECT_NEAR(solve_isotropic_level(OperatorSpec::from_coeffs(2, 2, {1}), 1.0), std::sqrt(2.0) - 1.0, 1e-12);
    EXPECT_NEAR(solve_isotropic_level(OperatorSpec::sigma_k(2, 2), 1.0), 1.0, 1e-12);
}
