#pragma once

// Concavity quadratic forms for sigma_k and for the lifted sum operator F,
// their pointwise PSD verification, region sweeps, the Andrews-type second
// derivative inequality and the trace bounds used by the interior estimates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "shl/cone.hpp"
#include "shl/errors.hpp"
#include "shl/hyperdual.hpp"
#include "shl/linalg.hpp"
#include "shl/operator.hpp"
#include "shl/sampling.hpp"
#include "shl/symfun.hpp"

namespace shl {

enum class FormVariant { SigmaK, SumF, NMinusOne };

inline const char* to_string(FormVariant v) {
    switch (v) {
    case FormVariant::SigmaK: return "sigma-k";
    case FormVariant::SumF: return "sum-f";
    case FormVariant::NMinusOne: return "n-minus-one";
    }
    return "?";
}

inline FormVariant parse_variant(const std::string& s) {
    if (s == "sigma-k") return FormVariant::SigmaK;
    if (s == "sum-f") return FormVariant::SumF;
    if (s == "n-minus-one") return FormVariant::NMinusOne;
    fail(ErrorKind::InvalidInput, "unknown form variant '" + s + "'");
}

/// Which gradient weight multiplies xi_1^2 on the right-hand side of the
/// (n-1) form: F_1 (first slot) or the trace sum_i F_i.
enum class RhsWeight { FirstSlot, Trace };

struct QuadFormSpec {
    FormVariant variant = FormVariant::SigmaK;
    OperatorSpec op = OperatorSpec::sigma_k(2, 2);
    double delta = 0.0;
    double gamma = 0.0;
    double denominator_shift = 1.0;     // the "+1" in lambda_1 - lambda_i + 1
    bool literal_lambda1_factor = false; // n-1 form: extra lambda_1 in the denominator
    RhsWeight rhs_weight = RhsWeight::FirstSlot;

    static double default_gamma(int k) { return 1.0 / (1.0 + 16.0 * k); }

    static QuadFormSpec sigma_k(int n, int k, double delta) {
        return make(FormVariant::SigmaK, OperatorSpec::sigma_k(n, k), delta, default_gamma(k));
    }
    static QuadFormSpec sum_f(OperatorSpec op, double delta) {
        const double g = default_gamma(op.k());
        return make(FormVariant::SumF, std::move(op), delta, g);
    }
    static QuadFormSpec n_minus_one(OperatorSpec op) {
        const double g = 1.0 / (2.0 * op.n());
        return make(FormVariant::NMinusOne, std::move(op), 0.0, g);
    }

    /// Same form with a different root vector (used when sweeping normalised y).
    QuadFormSpec with_roots(std::vector<double> y) const {
        QuadFormSpec s = *this;
        s.op = OperatorSpec::from_roots(op.n(), op.k(), std::move(y));
        return s;
    }

    void validate() const {
        if (!(delta >= 0.0 && delta < 1.0)) fail(ErrorKind::InvalidInput, "QuadFormSpec: delta must lie in [0, 1)");
        if (!(gamma >= 0.0)) fail(ErrorKind::InvalidInput, "QuadFormSpec: gamma must be >= 0");
        if (variant == FormVariant::SigmaK && op.m() != 0)
            fail(ErrorKind::InvalidInput, "QuadFormSpec: sigma-k variant takes no lower-order terms");
        if (variant == FormVariant::NMinusOne && op.k() != op.n() - 1)
            fail(ErrorKind::InvalidInput, "QuadFormSpec: n-minus-one variant needs k = n - 1");
    }

private:
    static QuadFormSpec make(FormVariant v, OperatorSpec op, double delta, double gamma) {
        QuadFormSpec s;
        s.variant = v;
        s.op = std::move(op);
        s.delta = delta;
        s.gamma = gamma;
        s.validate();
        return s;
    }
};

namespace detail {

struct FormIngredients {
    std::vector<double> g;
    Matrix h;
    double phi = 0.0;
};

inline FormIngredients form_ingredients(const QuadFormSpec& spec, const Spectrum& lambda) {
    spec.validate();
    if (!lambda.sorted_desc()) fail(ErrorKind::InvalidInput, "assemble_form: lambda must be sorted descending");
    const auto& op = spec.op;
    op.check_dim(lambda);
    const int cone_degree = op.k();
    if (!in_lifted_cone(lambda, op.y(), cone_degree).member)
        fail(ErrorKind::NotInCone, std::string("assemble_form: point outside the cone of the ") + to_string(spec.variant) +
                                       " form");
    FormIngredients f;
    f.phi = eval_F(op, lambda);
    if (!(f.phi > 0.0)) fail(ErrorKind::NonpositiveOperatorValue, "assemble_form: operator value <= 0");
    if (!(lambda[0] > 0.0)) fail(ErrorKind::NotInCone, "assemble_form: lambda_1 <= 0");
    f.g = grad_F(op, lambda);
    f.h = hess_F(op, lambda);
    return f;
}

} // namespace detail

/// Symmetric M with xi^T M xi = LHS(xi) - RHS(xi) of the chosen inequality.
///
/// Off-diagonal: -H_pq / F + c g_p g_q / F^2 (c = 2, or 1 for the n-1 form).
/// Diagonal: c g_i^2 / F^2 + [i > 1] 2 g_i / (d_i F) - [i = 1] (1 + gamma) w / (lambda_1 F)
/// with d_i = (1 + 2 delta) lambda_1, or lambda_1 - lambda_i + shift for the
/// n-1 form (times lambda_1 when literal_lambda1_factor is set), and w = g_1 (or sum_i g_i under RhsWeight::Trace).
inline Matrix assemble_form(const QuadFormSpec& spec, const Spectrum& lambda) {
    const auto f = detail::form_ingredients(spec, lambda);
    const Eigen::Index n = spec.op.n();
    const double c = spec.variant == FormVariant::NMinusOne ? 1.0 : 2.0;
    const double l1 = lambda[0];
    const double phi = f.phi;

    Matrix m(n, n);
    for (Eigen::Index p = 0; p < n; ++p)
        for (Eigen::Index q = 0; q < n; ++q)
            m(p, q) = (p == q ? 0.0 : -f.h(p, q) / phi) +
                      c * f.g[static_cast<std::size_t>(p)] * f.g[static_cast<std::size_t>(q)] / (phi * phi);

    for (Eigen::Index i = 1; i < n; ++i) {
        const double li = lambda[static_cast<std::size_t>(i)];
        double d = (1.0 + 2.0 * spec.delta) * l1;
        if (spec.variant == FormVariant::NMinusOne)
            d = (l1 - li + spec.denominator_shift) * (spec.literal_lambda1_factor ? l1 : 1.0);
        m(i, i) += 2.0 * f.g[static_cast<std::size_t>(i)] / (d * phi);
    }
    double w = f.g[0];
    if (spec.variant == FormVariant::NMinusOne && spec.rhs_weight == RhsWeight::Trace) {
        w = 0.0;
        for (double gi : f.g) w += gi;
    }
    m(0, 0) -= (1.0 + spec.gamma) * w / (l1 * phi);
    return 0.5 * (m + m.transpose());
}

struct QuadFormReport {
    Matrix matrix;
    double min_eigenvalue = 0.0;
    Vector worst_direction;
    double margin = 0.0; // min_eigenvalue / max(1, |M|_F)
    bool passed = false;
};

inline QuadFormReport verify_pointwise(const QuadFormSpec& spec, const Spectrum& lambda, double tol_psd = 1e-8) {
    QuadFormReport r;
    r.matrix = assemble_form(spec, lambda);
    const auto eig = jacobi_eigen(r.matrix);
    const Eigen::Index last = eig.values.size() - 1;
    r.min_eigenvalue = eig.values(last);
    r.worst_direction = eig.vectors.col(last);
    r.margin = r.min_eigenvalue / std::max(1.0, r.matrix.norm());
    r.passed = r.margin >= -tol_psd;
    return r;
}

// ---------------------------------------------------------------------------
// Sweeps

/// One region cell: the sampled lambda has lambda_1 = 1 (level-normalised
/// forms) or lambda_1 = raw_lambda1 (n-1 form, raw coordinates); the level
/// sigma_k(lambda/lambda_1, y/lambda_1) is drawn log-uniformly from
/// [level * level_span, level].
struct SweepCell {
    double delta = 0.0;
    double level = 1e-4;
    double raw_lambda1 = 0.0; // n-1 form only
};

struct SweepConfig {
    QuadFormSpec form;
    std::vector<SweepCell> cells;
    int samples = 10000;
    std::uint64_t seed = 0;
    double level_span = 1e-3;
    double y_lo = 0.0, y_hi = 2.0; // raw roots for the lifted forms
    double lambda1_lo = 1e2, lambda1_hi = 1e4; // raw lambda_1 range mapping y into normalised coordinates
    int max_attempts = 4000;
    double tol_psd = 1e-8;
    unsigned threads = 1;
};

struct SweepWitness {
    std::vector<double> lambda;
    std::vector<double> y;
    double margin = 0.0;
    double level = 0.0;
    std::uint64_t sample_index = 0;
};

struct SweepCellResult {
    SweepCell cell;
    int requested = 0;
    int accepted = 0;
    int passed = 0;
    long long attempts = 0;
    double pass_fraction = 0.0;
    double min_margin = std::numeric_limits<double>::infinity();
    std::optional<SweepWitness> witness; // most negative failing sample
    SweepWitness worst;                  // smallest margin overall
    bool empty() const { return accepted == 0; }
};

struct SweepFrontier {
    FormVariant variant = FormVariant::SigmaK;
    int n = 0, k = 0, m = 0;
    double gamma = 0.0;
    std::uint64_t seed = 0;
    std::vector<SweepCellResult> cells;
    bool all_passed() const {
        for (const auto& c : cells)
            if (c.empty() || c.passed != c.accepted) return false;
        return true;
    }
};

struct SampledPoint {
    std::vector<double> lambda; // sorted descending, evaluation coordinates
    std::vector<double> y;      // evaluation coordinates
    double level = 0.0;
    long long attempts = 0;
};

/// Draws one admissible point for a cell. Tail entries lambda_2..lambda_{n-1}
/// mix a uniform proposal on [-delta, 1] with log-uniform magnitudes; the
/// last entry is then solved from the target level (sigma_k is affine in it)
/// and the point is accepted on ordering, the lambda_n >= -delta bound (level
/// forms only) and cone membership.
inline std::optional<SampledPoint> sample_form_point(const QuadFormSpec& form, const SweepConfig& cfg,
                                                     const SweepCell& cell, Rng& rng) {
    const int n = form.op.n(), k = form.op.k(), m = form.op.m();
    const bool raw = form.variant == FormVariant::NMinusOne;
    const double neg_cap = raw ? 0.5 : cell.delta;
    SampledPoint out;
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        ++out.attempts;
        const double l1 = raw ? cell.raw_lambda1
                              : std::pow(10.0, uniform(rng, std::log10(cfg.lambda1_lo), std::log10(cfg.lambda1_hi)));
        std::vector<double> ytilde(static_cast<std::size_t>(m));
        for (auto& v : ytilde) v = uniform(rng, cfg.y_lo, cfg.y_hi) / l1;
        // raw cells give the level as an operator value, scaled here by lambda_1^k
        double level = cell.level * std::pow(10.0, uniform(rng, std::log10(cfg.level_span), 0.0));
        if (raw) level /= std::pow(l1, k);

        std::vector<double> lt(static_cast<std::size_t>(n));
        lt[0] = 1.0;
        for (int i = 1; i < n - 1; ++i) {
            double v;
            if (uniform(rng, 0.0, 1.0) < 0.5) {
                v = uniform(rng, -neg_cap, 1.0);
            } else {
                v = std::pow(10.0, uniform(rng, -6.0, 0.0));
                if (uniform(rng, 0.0, 1.0) < 0.25) v = -std::min(v, neg_cap);
            }
            lt[static_cast<std::size_t>(i)] = v;
        }
        std::sort(lt.begin() + 1, lt.end() - 1, std::greater<>{});
        if (n < 2) return std::nullopt;

        // sigma_k(lt, ytilde) = A + lt_n * B
        std::vector<double> rest(lt.begin(), lt.end() - 1);
        rest.insert(rest.end(), ytilde.begin(), ytilde.end());
        const double A = sigma(k, rest), B = sigma(k - 1, rest);
        if (!(B > 0.0)) continue;
        const double ln = (level - A) / B;
        if (n >= 2 && ln > lt[static_cast<std::size_t>(n - 2)]) continue;
        if (!raw && ln < -cell.delta) continue;
        lt.back() = ln;
        if (!in_lifted_cone(lt, ytilde, k).member) continue;

        out.level = sigma(k, concat(lt, ytilde));
        if (raw) {
            for (auto& v : lt) v *= l1;
            for (auto& v : ytilde) v *= l1;
        }
        out.lambda = std::move(lt);
        out.y = std::move(ytilde);
        return out;
    }
    return std::nullopt;
}

inline SweepCellResult sweep_cell(const SweepConfig& cfg, std::size_t cell_index) {
    const auto& cell = cfg.cells[cell_index];
    QuadFormSpec form = cfg.form;
    if (form.variant != FormVariant::NMinusOne) form.delta = cell.delta;

    struct Outcome {
        bool accepted = false;
        bool passed = false;
        long long attempts = 0;
        SweepWitness w;
    };
    std::vector<Outcome> outcomes(static_cast<std::size_t>(cfg.samples));

    auto run_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Rng rng(derive_seed(cfg.seed, cell_index, i));
            auto pt = sample_form_point(form, cfg, cell, rng);
            auto& o = outcomes[i];
            if (!pt) {
                o.attempts = cfg.max_attempts;
                continue;
            }
            o.attempts = pt->attempts;
            const QuadFormSpec local = form.op.m() > 0 ? form.with_roots(pt->y) : form;
            const auto rep = verify_pointwise(local, Spectrum(pt->lambda, true), cfg.tol_psd);
            o.accepted = true;
            o.passed = rep.passed;
            o.w = {pt->lambda, pt->y, rep.margin, pt->level, i};
        }
    };

    const unsigned threads = std::max(1u, cfg.threads);
    if (threads == 1) {
        run_range(0, outcomes.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (outcomes.size() + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::size_t b = std::min(outcomes.size(), t * chunk), e = std::min(outcomes.size(), b + chunk);
            pool.emplace_back(run_range, b, e);
        }
        for (auto& th : pool) th.join();
    }

    SweepCellResult res;
    res.cell = cell;
    res.requested = cfg.samples;
    for (const auto& o : outcomes) {
        res.attempts += o.attempts;
        if (!o.accepted) continue;
        ++res.accepted;
        if (o.passed) ++res.passed;
        if (o.w.margin < res.min_margin) {
            res.min_margin = o.w.margin;
            res.worst = o.w;
        }
        if (!o.passed && (!res.witness || o.w.margin < res.witness->margin)) res.witness = o.w;
    }
    res.pass_fraction = res.accepted ? static_cast<double>(res.passed) / res.accepted : 0.0;
    return res;
}

inline SweepFrontier sweep(const SweepConfig& cfg) {
    cfg.form.validate();
    SweepFrontier fr;
    fr.variant = cfg.form.variant;
    fr.n = cfg.form.op.n();
    fr.k = cfg.form.op.k();
    fr.m = cfg.form.op.m();
    fr.gamma = cfg.form.gamma;
    fr.seed = cfg.seed;
    for (std::size_t c = 0; c < cfg.cells.size(); ++c) fr.cells.push_back(sweep_cell(cfg, c));
    return fr;
}

// ---------------------------------------------------------------------------
// Andrews-type inequality

enum class SecondDerivativeMode { Analytic, CentralDifference, RichardsonDifference };

/// d^2/dt^2 F(S + tT) by central differences; the Richardson variant combines
/// steps h and h/2 and is exact up to rounding for polynomials of degree <= 5.
inline double matrix_second_difference(const OperatorSpec& spec, const Matrix& S, const Matrix& T, double h,
                                       bool richardson) {
    auto central = [&](double step) {
        return (eval_F_matrix(spec, S + step * T) - 2.0 * eval_F_matrix(spec, S) + eval_F_matrix(spec, S - step * T)) /
               (step * step);
    };
    if (!richardson) return central(h);
    return (4.0 * central(0.5 * h) - central(h)) / 3.0;
}

struct AndrewsGap {
    double lhs = 0.0;
    double rhs = 0.0;
    double gap = 0.0;
    double scale = 0.0; // sum of magnitudes of the terms
};

/// lhs = -d^2/dt^2 F(S + tT);
/// rhs = -sum_{p != q} F_pq T_pp T_qq + 2 sum_{p > 1} (F_p - F_1)/(lambda_1 - lambda_p) T_1p^2
/// with T in the eigenbasis of S.
inline AndrewsGap andrews_gap(const OperatorSpec& spec, const MatrixPoint& pt, const Matrix& T,
                              SecondDerivativeMode mode = SecondDerivativeMode::Analytic, double h = 1e-4,
                              double min_gap = 1e-6) {
    const auto& lam = pt.eigvals.values();
    for (std::size_t p = 0; p + 1 < lam.size(); ++p)
        if (lam[p] - lam[p + 1] < min_gap)
            fail(ErrorKind::DegenerateSpectrum, "andrews_gap: eigenvalues closer than " + std::to_string(min_gap));
    const Matrix Tsym = 0.5 * (T + T.transpose());
    const Matrix t = pt.eigvecs.transpose() * Tsym * pt.eigvecs;
    const auto g = grad_F(spec, lam);
    const Matrix H = hess_F(spec, lam);
    const Eigen::Index n = spec.n();

    AndrewsGap out;
    double first = 0.0, second = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
        for (Eigen::Index q = 0; q < n; ++q)
            if (p != q) {
                const double term = H(p, q) * t(p, p) * t(q, q);
                first -= term;
                out.scale += std::abs(term);
            }
    for (Eigen::Index p = 1; p < n; ++p) {
        const double c = (g[static_cast<std::size_t>(p)] - g[0]) / (lam[0] - lam[static_cast<std::size_t>(p)]);
        const double term = 2.0 * c * t(0, p) * t(0, p);
        second += term;
        out.scale += std::abs(term);
    }
    out.rhs = first + second;
    switch (mode) {
    case SecondDerivativeMode::Analytic: out.lhs = -matrix_second_derivative(spec, pt, Tsym); break;
    case SecondDerivativeMode::CentralDifference:
        out.lhs = -matrix_second_difference(spec, pt.S, Tsym, h, false);
        break;
    case SecondDerivativeMode::RichardsonDifference:
        out.lhs = -matrix_second_difference(spec, pt.S, Tsym, h, true);
        break;
    }
    out.scale = std::max({1.0, out.scale, std::abs(out.lhs)});
    out.gap = out.lhs - out.rhs;
    return out;
}

struct AndrewsCase {
    MatrixPoint pt;
    Matrix T;
};

/// Random S = V diag(lambda) V^T with (lambda, y) in the lifted cone, adjacent
/// eigenvalue gaps at least min_gap, and a Gaussian symmetric direction T.
inline std::optional<AndrewsCase> sample_andrews_case(Rng& rng, const OperatorSpec& spec, double min_gap,
                                                      int max_tries = 1000) {
    const int n = spec.n();
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int t = 0; t < max_tries; ++t) {
        auto lam = sample_lifted_point(rng, n, spec.y(), spec.k());
        std::sort(lam.begin(), lam.end(), std::greater<>{});
        bool spaced = true;
        for (std::size_t p = 0; p + 1 < lam.size(); ++p) spaced = spaced && lam[p] - lam[p + 1] >= min_gap;
        if (!spaced) continue;
        Matrix G(n, n), T(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                G(i, j) = normal(rng);
                T(i, j) = normal(rng);
            }
        const Matrix V = Eigen::HouseholderQR<Matrix>(G).householderQ();
        const Vector d = Vector::Map(lam.data(), n);
        Matrix S = V * d.asDiagonal() * V.transpose();
        S = 0.5 * (S + S.transpose());
        auto pt = MatrixPoint::from_matrix(S);
        bool ok = true;
        for (std::size_t p = 0; p + 1 < lam.size(); ++p)
            ok = ok && pt.eigvals[p] - pt.eigvals[p + 1] >= 0.5 * min_gap;
        if (!ok) continue;
        return AndrewsCase{std::move(pt), 0.5 * (T + T.transpose())};
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Trace bounds

struct TraceBounds {
    double sum_Fi_lambda_i = 0.0;
    double kF = 0.0;
    double slack = 0.0;                // kF - sum F_i lambda_i
    double root_slot_term = 0.0;       // sum_j y_j sigma_{k-1;y_j}
    double euler_discrepancy = 0.0;    // sum F_i lambda_i + root_slot_term vs kF
    double coefficient_form = 0.0;     // k sigma_k + sum_i (k - i) a_i sigma_{k-i}
    double coefficient_discrepancy = 0.0;
    double sum_Fi = 0.0;
    double sum_Fi_formula = 0.0;       // (n-k+1) sigma_{k-1} + sum_i (n-k+i+1) a_i sigma_{k-i-1}
    double lambda1_power = 0.0;        // lambda_1^{1/(k-1)}
    double ratio = 0.0;                // sum_Fi / lambda1_power
};

inline TraceBounds trace_bounds(const OperatorSpec& spec, std::span<const double> lambda, Condition which) {
    if (!check_condition(lambda, spec.y(), spec.a(), spec.k(), which))
        fail(ErrorKind::ConditionViolated, std::string("trace_bounds: condition ") +
                                               (which == Condition::One ? "1" : "2") + " does not hold");
    const int n = spec.n(), k = spec.k();
    TraceBounds tb;
    const double F = eval_F(spec, lambda);
    const auto g = grad_F(spec, lambda);
    const auto gy = root_slot_grad(spec, lambda);
    double mag = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        tb.sum_Fi_lambda_i += g[i] * lambda[i];
        mag += std::abs(g[i] * lambda[i]);
        tb.sum_Fi += g[i];
    }
    for (std::size_t j = 0; j < gy.size(); ++j) {
        tb.root_slot_term += spec.y()[j] * gy[j];
        mag += std::abs(spec.y()[j] * gy[j]);
    }
    tb.kF = k * F;
    tb.slack = tb.kF - tb.sum_Fi_lambda_i;
    tb.euler_discrepancy = rel_discrepancy(tb.sum_Fi_lambda_i + tb.root_slot_term, tb.kF, mag);

    const auto table = sigma_table(lambda);
    auto s = [&](int j) { return (j < 0 || j > n) ? 0.0 : table[static_cast<std::size_t>(j)]; };
    double cmag = std::abs(k * s(k));
    tb.coefficient_form = k * s(k);
    tb.sum_Fi_formula = (n - k + 1) * s(k - 1);
    for (int i = 1; i <= spec.m(); ++i) {
        const double ai = spec.a()[static_cast<std::size_t>(i - 1)];
        tb.coefficient_form += (k - i) * ai * s(k - i);
        cmag += std::abs((k - i) * ai * s(k - i));
        tb.sum_Fi_formula += (n - k + i + 1) * ai * s(k - i - 1);
    }
    tb.coefficient_discrepancy = rel_discrepancy(tb.coefficient_form, tb.sum_Fi_lambda_i, cmag + mag);

    const double l1 = *std::max_element(lambda.begin(), lambda.end());
    tb.lambda1_power = k > 1 ? std::pow(l1, 1.0 / (k - 1)) : 1.0;
    tb.ratio = tb.sum_Fi / tb.lambda1_power;
    return tb;
}

// ---------------------------------------------------------------------------
// Quotient-function lower bounds (existence-of-constant checks)

/// xi^T D^2 f xi for f = sigma_k / sigma_{k-1}, exact via hyper-duals.
inline double quotient_directional_second(int k, std::span<const double> x, std::span<const double> xi) {
    std::vector<HyperDual> hx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) hx[i] = HyperDual(x[i], xi[i], xi[i], 0.0);
    const std::span<const HyperDual> s(hx);
    return (sigma_generic<HyperDual>(k, s) / sigma_generic<HyperDual>(k - 1, s)).d;
}

struct LowerBoundSample {
    double lhs = 0.0;
    double rhs = 0.0;
};

/// For lambda in Gamma_k and an index set I of size k-2:
/// lhs = -D^2_xi q_2(lambda with I removed), rhs = |[xi]_I^perp|^2 / sigma_1(lambda | I),
/// where perp is taken against the reduced lambda.
inline LowerBoundSample q2_reduced_bound(std::span<const double> lambda, std::span<const double> xi,
                                         std::span<const std::size_t> removed) {
    std::vector<double> lr, xr;
    for (std::size_t i = 0; i < lambda.size(); ++i)
        if (std::find(removed.begin(), removed.end(), i) == removed.end()) {
            lr.push_back(lambda[i]);
            xr.push_back(xi[i]);
        }
    LowerBoundSample s;
    s.lhs = -quotient_directional_second(2, lr, xr);
    double ll = 0.0, lx = 0.0;
    for (std::size_t i = 0; i < lr.size(); ++i) {
        ll += lr[i] * lr[i];
        lx += lr[i] * xr[i];
    }
    double perp = 0.0;
    for (std::size_t i = 0; i < lr.size(); ++i) {
        const double v = xr[i] - lx / ll * lr[i];
        perp += v * v;
    }
    s.rhs = perp / sigma(1, lr);
    return s;
}

/// For sorted lambda in Gamma_k and gamma with gamma_1 = 0 and
/// (gamma_k..gamma_n) orthogonal to (lambda_k..lambda_n):
/// lhs = -sigma_{k-1} D^2_gamma q_k and the bound expression with constant 1,
/// sum_{j<k} lambda_1...lambda_{k-1} lambda_k^2 gamma_j^2 / lambda_j^3
///   + lambda_1...lambda_{k-2} sum_{p>=k} gamma_p^2.
inline LowerBoundSample quotient_decomposition_bound(const Spectrum& lambda, std::span<const double> gamma, int k) {
    if (!lambda.sorted_desc()) fail(ErrorKind::InvalidInput, "quotient_decomposition_bound: lambda must be sorted");
    LowerBoundSample s;
    s.lhs = -sigma(k - 1, lambda) * quotient_directional_second(k, lambda, gamma);
    const std::size_t kk = static_cast<std::size_t>(k);
    double p_k1 = 1.0, p_k2 = 1.0;
    for (std::size_t i = 0; i + 1 < kk; ++i) p_k1 *= lambda[i];
    for (std::size_t i = 0; i + 2 < kk; ++i) p_k2 *= lambda[i];
    const double lk = lambda[kk - 1];
    for (std::size_t j = 0; j + 1 < kk; ++j)
        s.rhs += p_k1 * lk * lk * gamma[j] * gamma[j] / (lambda[j] * lambda[j] * lambda[j]);
    double tail = 0.0;
    for (std::size_t p = kk - 1; p < lambda.size(); ++p) tail += gamma[p] * gamma[p];
    s.rhs += p_k2 * tail;
    return s;
}

/// Random sorted lambda satisfying the condition with F(lambda) = target:
/// lambda_1 log-uniform in [l1_lo, l1_hi], middle entries a fraction of
/// lambda_1 in [-1/2, 1], and lambda_n solved from the affine dependence of F.
inline std::optional<std::vector<double>> sample_trace_point(Rng& rng, const OperatorSpec& spec, Condition which,
                                                             double l1_lo, double l1_hi, double target = 1.0,
                                                             int max_tries = 10000) {
    const int n = spec.n(), k = spec.k();
    if (n < 2) fail(ErrorKind::InvalidInput, "sample_trace_point: need n >= 2");
    for (int t = 0; t < max_tries; ++t) {
        std::vector<double> lam(static_cast<std::size_t>(n));
        lam[0] = std::pow(10.0, uniform(rng, std::log10(l1_lo), std::log10(l1_hi)));
        for (int i = 1; i < n - 1; ++i) {
            const double u = uniform(rng, 0.0, 1.0) < 0.5 ? uniform(rng, -0.5, 1.0) : std::pow(10.0, uniform(rng, -4.0, 0.0));
            lam[static_cast<std::size_t>(i)] = u * lam[0];
        }
        std::sort(lam.begin() + 1, lam.end() - 1, std::greater<>{});
        std::vector<double> rest(lam.begin(), lam.end() - 1);
        rest.insert(rest.end(), spec.y().begin(), spec.y().end());
        const double A = sigma(k, rest), B = sigma(k - 1, rest);
        if (!(B > 0.0)) continue;
        const double ln = (target - A) / B;
        if (ln > lam[static_cast<std::size_t>(n - 2)]) continue;
        lam.back() = ln;
        if (!check_condition(lam, spec.y(), spec.a(), k, which)) continue;
        if (!(eval_F(spec, lam) > 0.0)) continue;
        return lam;
    }
    return std::nullopt;
}

} // namespace shl
