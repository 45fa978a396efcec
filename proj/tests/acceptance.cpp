// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Failing concavity cells leave replayable witnesses in ./acceptance-witnesses.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "shl/concavity.hpp"
#include "shl/io.hpp"
#include "shl/solver.hpp"

using namespace shl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double rel(double a, double b, double mag) { return std::abs(a - b) / std::max(1.0, mag); }

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(3);
    s << v;
    return s.str();
}

Matrix random_symmetric(Rng& rng, int n, double scale) {
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = uniform(rng, -scale, scale);
    return 0.5 * (a + a.transpose());
}

std::vector<double> uniform_roots(Rng& rng, int m, double lo, double hi) {
    std::vector<double> y(static_cast<std::size_t>(m));
    for (auto& v : y) v = uniform(rng, lo, hi);
    return y;
}

fs::path witness_dir() {
    const auto d = fs::current_path() / "acceptance-witnesses";
    fs::create_directories(d);
    return d;
}

// symmetric functions against subset enumeration, and the deletion identities
Outcome criterion1() {
    const auto t0 = Clock::now();
    Rng rng(101);
    double worst_sigma = 0.0, worst_ident = 0.0;
    for (int s = 0; s < 10000; ++s) {
        const int n = uniform_int(rng, 1, 8);
        std::vector<double> x(static_cast<std::size_t>(n));
        for (auto& v : x) v = uniform(rng, -5, 5);
        for (int k = 0; k <= n; ++k) {
            double mag = 0.0;
            const double ref = oracle::sigma(k, x, &mag);
            worst_sigma = std::max(worst_sigma, rel(sigma(k, x), ref, mag));
        }
        for (int k = 1; k <= n; ++k) {
            const auto rep = identity_suite(x, k);
            for (const auto& c : rep.checks)
                if (c.name != "quotient_second_derivative") worst_ident = std::max(worst_ident, c.max_discrepancy);
        }
    }
    const double secs = seconds_since(t0);
    return {worst_sigma <= 1e-10 && worst_ident <= 1e-11 && secs <= 10.0,
            "sigma " + fmt(worst_sigma) + ", identities " + fmt(worst_ident) + ", " + fmt(secs) + " s"};
}

// lifted sigma_k equals the coefficient expansion for every degree
Outcome criterion2() {
    const auto t0 = Clock::now();
    Rng rng(102);
    double worst = 0.0;
    for (int s = 0; s < 10000; ++s) {
        const int n = uniform_int(rng, 1, 8);
        const int m = uniform_int(rng, 0, 3);
        std::vector<double> lam(static_cast<std::size_t>(n));
        for (auto& v : lam) v = uniform(rng, -5, 5);
        const auto y = uniform_roots(rng, m, -5, 5);
        const auto a = coeffs_from_roots(y);
        const auto hat = oracle::join(lam, y);
        for (int k = 0; k <= n + m; ++k) {
            double mag = 0.0;
            oracle::sigma(k, hat, &mag);
            double expanded = sigma(k, lam);
            for (int r = 1; r <= m; ++r) expanded += a[static_cast<std::size_t>(r - 1)] * sigma(k - r, lam);
            worst = std::max(worst, rel(sigma(k, hat), expanded, mag));
        }
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-10 && secs <= 10.0, "max discrepancy " + fmt(worst) + ", " + fmt(secs) + " s"};
}

// eigenvalue derivatives against finite differences, then matrix derivatives
Outcome criterion3() {
    Rng rng(103);
    double worst_g = 0.0, worst_h = 0.0;
    for (int s = 0; s < 1000; ++s) {
        const int n = uniform_int(rng, 2, 8);
        const int k = uniform_int(rng, 2, n);
        const int m = uniform_int(rng, 0, std::min(3, k - 1));
        const auto spec = OperatorSpec::from_roots(n, k, uniform_roots(rng, m, -1.0, 2.0));
        std::vector<double> lam(static_cast<std::size_t>(n));
        for (auto& v : lam) v = uniform(rng, -2, 2);
        const auto a = spec.a();
        auto f = [&](const std::vector<double>& l) { return oracle::expanded_F(k, l, a); };
        const auto g = grad_F(spec, lam);
        const auto fd = oracle::fd_gradient(f, lam, 1e-5);
        const Matrix H = hess_F(spec, lam);
        for (std::size_t i = 0; i < lam.size(); ++i) {
            worst_g = std::max(worst_g, rel(g[i], fd[i], std::abs(g[i])));
            auto gi = [&](const std::vector<double>& l) { return grad_F(spec, l)[i]; };
            const auto row = oracle::fd_gradient(gi, lam, 1e-5);
            for (std::size_t j = 0; j < lam.size(); ++j) {
                const double hij = H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                worst_h = std::max(worst_h, rel(hij, row[j], std::abs(hij)));
            }
        }
    }
    double worst_m1 = 0.0, worst_m2 = 0.0;
    for (int s = 0; s < 200; ++s) {
        const int n = uniform_int(rng, 2, 5);
        const int k = uniform_int(rng, 2, n);
        const int m = uniform_int(rng, 0, k - 1);
        const auto spec = OperatorSpec::from_roots(n, k, uniform_roots(rng, m, -1.0, 2.0));
        const Matrix S = random_symmetric(rng, n, 2.0);
        const Matrix T = random_symmetric(rng, n, 1.0);
        const double h = 1e-4;
        const double fp = eval_F_matrix(spec, S + h * T), f0 = eval_F_matrix(spec, S), fm = eval_F_matrix(spec, S - h * T);
        const auto pt = MatrixPoint::from_matrix(S);
        const auto d = matrix_F_derivatives(spec, pt);
        const double d1 = (d.dF.array() * T.array()).sum();
        worst_m1 = std::max(worst_m1, rel(d1, (fp - fm) / (2 * h), std::abs(d1)));
        const double d2 = matrix_second_derivative(spec, pt, T);
        worst_m2 = std::max(worst_m2, rel(d2, (fp - 2 * f0 + fm) / (h * h), std::abs(d2)));
    }
    const bool ok = worst_g <= 1e-5 && worst_h <= 1e-5 && worst_m1 <= 1e-4 && worst_m2 <= 1e-4;
    return {ok, "grad " + fmt(worst_g) + ", hess " + fmt(worst_h) + ", matrix dF " + fmt(worst_m1) + ", matrix d2F " +
                    fmt(worst_m2)};
}

struct CellSummary {
    bool pass = true;
    std::string text;
};

// runs one sweep; failing cells get a replayable witness file
CellSummary run_sweep(const QuadFormSpec& form, std::vector<SweepCell> cells, const std::string& tag,
                      std::uint64_t seed) {
    SweepConfig cfg;
    cfg.form = form;
    cfg.cells = std::move(cells);
    cfg.samples = 10000;
    cfg.seed = seed;
    cfg.tol_psd = 1e-8;
    const auto fr = sweep(cfg);
    CellSummary out;
    std::ostringstream s;
    for (std::size_t c = 0; c < fr.cells.size(); ++c) {
        const auto& cr = fr.cells[c];
        const bool ok = cr.accepted == cfg.samples && cr.passed == cr.accepted;
        out.pass = out.pass && ok;
        s << " " << tag;
        if (cr.cell.raw_lambda1 > 0.0) s << "@" << cr.cell.raw_lambda1;
        s << "=" << cr.passed << "/" << cr.accepted;
        if (cr.witness) {
            QuadFormSpec local = form;
            if (form.variant != FormVariant::NMinusOne) local.delta = cr.cell.delta;
            const auto name = "witness-" + tag + "-" + std::to_string(c) + ".json";
            std::ofstream(witness_dir() / name) << witness_config(local, *cr.witness, cfg.tol_psd).dump(2) << "\n";
        }
    }
    out.text = s.str();
    return out;
}

const std::vector<std::pair<int, int>> kCells{{4, 2}, {5, 2}, {5, 3}, {6, 4}};

// sigma_k concavity form on the level region
Outcome criterion4() {
    bool pass = true;
    std::string text;
    for (auto [n, k] : kCells) {
        const auto r = run_sweep(QuadFormSpec::sigma_k(n, k, 0.005), {SweepCell{0.005, 1e-4, 0.0}},
                                 "s" + std::to_string(n) + std::to_string(k), 400 + 10 * n + k);
        pass = pass && r.pass;
        text += r.text;
    }
    return {pass, "passed/accepted:" + text};
}

// lifted forms: sum-f with one or two roots, and the (n-1) form in raw coordinates
Outcome criterion5() {
    bool pass = true;
    std::string text;
    for (auto [n, k] : kCells)
        for (int m : {1, 2}) {
            if (m >= k) continue;
            const auto form = QuadFormSpec::sum_f(OperatorSpec::from_roots(n, k, std::vector<double>(m, 1.0)), 0.005);
            const auto r = run_sweep(form, {SweepCell{0.005, 1e-4, 0.0}},
                                     "f" + std::to_string(n) + std::to_string(k) + "m" + std::to_string(m),
                                     500 + 10 * n + k + 100 * m);
            pass = pass && r.pass;
            text += r.text;
        }
    for (int n : {4, 5}) {
        const auto form = QuadFormSpec::n_minus_one(OperatorSpec::from_roots(n, n - 1, {1.0}));
        const auto r = run_sweep(form, {SweepCell{0.0, 1.0, 100.0}, SweepCell{0.0, 1.0, 1000.0}},
                                 "n" + std::to_string(n), 600 + n);
        pass = pass && r.pass;
        text += r.text;
    }
    return {pass, "passed/accepted:" + text};
}

// matrix second derivative against the eigenvalue form
Outcome criterion6() {
    Rng rng(106);
    double worst = INFINITY;
    int evaluated = 0;
    for (int s = 0; s < 1000; ++s) {
        const int n = uniform_int(rng, 2, 5);
        const int k = uniform_int(rng, 2, n);
        const int m = uniform_int(rng, 0, k - 1);
        const auto spec = OperatorSpec::from_roots(n, k, uniform_roots(rng, m, 0.0, 2.0));
        const auto c = sample_andrews_case(rng, spec, 1e-3);
        if (!c) continue;
        const auto g = andrews_gap(spec, c->pt, c->T, SecondDerivativeMode::RichardsonDifference, 1e-2, 1e-4);
        worst = std::min(worst, g.gap / g.scale);
        ++evaluated;
    }
    return {evaluated >= 900 && worst >= -1e-8,
            std::to_string(evaluated) + " samples, min gap/scale " + fmt(worst)};
}

// trace identities and bounds
Outcome criterion7() {
    Rng rng(107);
    double euler = 0.0, coeff = 0.0, slack = INFINITY, cslack = INFINITY, ratio = INFINITY;
    int points[2] = {0, 0};
    for (int s = 0; s < 2000; ++s) {
        const Condition cond = s % 2 == 0 ? Condition::One : Condition::Two;
        const int n = uniform_int(rng, 3, 6);
        const int k = uniform_int(rng, 2, n);
        const int m = uniform_int(rng, 1, k - 1);
        const auto spec = OperatorSpec::from_roots(n, k, uniform_roots(rng, m, 0.0, 2.0));
        const auto lam = sample_trace_point(rng, spec, cond, 10.0, 1e4);
        if (!lam) continue;
        const auto tb = trace_bounds(spec, *lam, cond);
        const double scale = std::max(1.0, std::abs(tb.kF));
        euler = std::max(euler, tb.euler_discrepancy);
        coeff = std::max(coeff, tb.coefficient_discrepancy);
        if (cond == Condition::One) {
            slack = std::min(slack, tb.slack / scale);
            ++points[0];
        } else {
            cslack = std::min(cslack, (tb.kF - tb.coefficient_form) / scale);
            ratio = std::min(ratio, tb.ratio);
            ++points[1];
        }
    }
    const bool ok = points[0] > 500 && points[1] > 500 && euler <= 1e-10 && coeff <= 1e-10 && slack >= -1e-10 &&
                    cslack >= -1e-10 && ratio > 0.0;
    return {ok, std::to_string(points[0]) + "+" + std::to_string(points[1]) + " points, euler " + fmt(euler) +
                    ", coefficients " + fmt(coeff) + ", min slack " + fmt(slack) + ", min coefficient slack " +
                    fmt(cslack) + ", min ratio " + fmt(ratio)};
}

double r2(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
}

double max_error(const SolveReport& rep, const ScalarField& exact) {
    double e = 0.0;
    for (std::size_t i = 0; i < rep.u.size(); ++i)
        e = std::max(e, std::abs(rep.u[i] - exact(rep.disc->node_position(i))));
    return e;
}

DirichletProblem constant_problem(OperatorSpec op, Domain d, double h, double psi, ScalarField g) {
    DirichletProblem p;
    p.op = std::move(op);
    p.domain = std::move(d);
    p.h = h;
    p.psi = [psi](std::span<const double>) { return psi; };
    p.boundary = std::move(g);
    return p;
}

// Newton solver on the disk, exact recovery on boxes, consistency order
Outcome criterion8() {
    const auto t0 = Clock::now();
    const ScalarField half = [](std::span<const double> x) { return 0.5 * r2(x); };
    const ScalarField shifted = [](std::span<const double> x) { return 0.5 * (r2(x) - 1.0); };

    const auto disk = newton_solve(
        constant_problem(OperatorSpec::from_coeffs(2, 2, {1}), Ball{{0.0, 0.0}, 1.0}, 1.0 / 64, 3.0, {}));
    const double disk_err = max_error(disk, shifted);
    // the constant case starts from the exact solution; a varying psi makes Newton work
    auto varied = constant_problem(OperatorSpec::from_coeffs(2, 2, {1}), Ball{{0.0, 0.0}, 1.0}, 1.0 / 64, 3.0, {});
    varied.psi = [](std::span<const double> x) { return 3.0 + x[0] * x[0] + 0.5 * x[1]; };
    const auto moving = newton_solve(varied);

    // lambda = (1, 1) with y = 1: sigma_2 = 3; lambda = (1, 1, 1) with y = 0.5: sigma_2 = 4.5
    const auto box2 = newton_solve(constant_problem(OperatorSpec::from_coeffs(2, 2, {1}),
                                                    Box{{-1.0, -1.0}, {1.0, 1.0}}, 1.0 / 16, 3.0, half));
    const auto box3 = newton_solve(constant_problem(OperatorSpec::from_roots(3, 2, {0.5}),
                                                    Box{{-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0}}, 0.2, 4.5, half));
    const double box_err = std::max(max_error(box2, half), max_error(box3, half));

    const auto op = OperatorSpec::from_roots(2, 2, {1});
    const ScalarField quartic = [](std::span<const double> x) { return 0.5 * r2(x) + 0.01 * r2(x) * r2(x); };
    const auto hess = [](std::span<const double> x) {
        Matrix h = (1.0 + 0.04 * r2(x)) * Matrix::Identity(2, 2);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) h(i, j) += 0.08 * x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(j)];
        return h;
    };
    const Domain box = Box{{-1.0, -1.0}, {1.0, 1.0}};
    std::vector<double> hs{1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64}, errs;
    for (double h : hs) errs.push_back(manufactured_residual(op, quartic, hess, box, h).residual_inf);
    const double slope = loglog_slope(hs, errs);
    const double secs = seconds_since(t0);

    const bool ok = disk.newton_iters <= 8 && disk.residual_inf <= 1e-8 && disk_err <= 1e-6 &&
                    moving.newton_iters <= 8 && moving.residual_inf <= 1e-8 && box_err <= 1e-6 && slope >= 1.9 &&
                    secs <= 30.0;
    return {ok, "disk " + std::to_string(disk.newton_iters) + " iterations, residual " + fmt(disk.residual_inf) +
                    ", varying psi " + std::to_string(moving.newton_iters) + " iterations, residual " +
                    fmt(moving.residual_inf) +
                    ", disk error " + fmt(disk_err) + ", box error " + fmt(box_err) + ", slope " + fmt(slope) + ", " +
                    fmt(secs) + " s"};
}

// Pogorelov functional: mesh stability and the closed form
Outcome criterion9() {
    const auto op = OperatorSpec::from_coeffs(2, 2, {1});
    const auto coarse = newton_solve(constant_problem(op, Ball{{0.0, 0.0}, 1.0}, 1.0 / 32, 1.0, {}));
    const auto fine = newton_solve(constant_problem(op, Ball{{0.0, 0.0}, 1.0}, 1.0 / 64, 1.0, {}));
    double drift = 0.0;
    for (const auto& [alpha, v] : coarse.pogorelov) {
        const double w = fine.pogorelov.at(alpha).value;
        drift = std::max(drift, std::abs(v.value - w) / std::max(std::abs(w), 1e-300));
    }
    const double c = std::sqrt(2.0) - 1.0;
    const double at1 = fine.pogorelov.at(1.0).value;
    const double closed = std::abs(at1 - c * c) / (c * c);
    return {drift <= 0.05 && closed <= 1e-6,
            "max relative drift " + fmt(drift) + ", alpha=1 value " + fmt(at1) + " vs " + fmt(c * c)};
}

// expanding-ball rigidity
Outcome criterion10() {
    const auto op = OperatorSpec::from_coeffs(2, 2, {1});
    const std::vector<double> radii{2.0, 4.0, 8.0};
    const auto flat = rigidity_experiment(op, radii, Perturbation{0.0, 3}, 1.0 / 8);
    const auto bent = rigidity_experiment(op, radii, Perturbation{0.1, 3}, 1.0 / 8);
    double flat_dev = 0.0;
    for (const auto& r : flat.rows) flat_dev = std::max(flat_dev, r.deviation);
    std::string devs;
    for (const auto& r : bent.rows) devs += (devs.empty() ? "" : ", ") + fmt(r.deviation);
    return {flat_dev <= 1e-6 && bent.monotone_non_increasing(),
            "unperturbed " + fmt(flat_dev) + ", perturbed deviations " + devs};
}

} // namespace

int main() {
    const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                         criterion6, criterion7, criterion8, criterion9, criterion10};
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("criterion %zu: %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
