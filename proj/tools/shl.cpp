// shl: command-line front end for the sum-Hessian toolkit.
//
// Every run writes <command>.json (deterministic for a fixed config and
// seed) plus <command>.meta.json holding the timestamp. Exit codes:
// 0 all checks passed, 1 a check failed, 2 invalid input, 3 numerical failure.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shl/concavity.hpp"
#include "shl/cone.hpp"
#include "shl/io.hpp"
#include "shl/operator.hpp"
#include "shl/sampling.hpp"
#include "shl/solver.hpp"
#include "shl/symfun.hpp"

namespace fs = std::filesystem;
using namespace shl;

namespace {

constexpr const char* kVersion = "1.0.0";

template <class T>
struct is_vector : std::false_type {};
template <class T>
struct is_vector<std::vector<T>> : std::true_type {};

std::string key_of(const std::string& flag) {
    std::string k = flag;
    for (auto& c : k)
        if (c == '-') c = '_';
    return k;
}

/// Options bound both to command-line flags and to config-file keys.
class Options {
public:
    explicit Options(CLI::App* app) : app_(app) {
        app_->set_help_flag("--help", "print this help and exit");
        app_->add_option("--config", config_path_, "JSON config; its keys override flags");
        app_->add_option("--out", out_dir_, "output directory (default: $SHL_OUT_DIR or .)");
        info("command");
    }

    template <class T>
    CLI::Option* opt(const std::string& flag, T& var, const std::string& desc) {
        auto* o = app_->add_option("--" + flag, var, desc);
        if constexpr (is_vector<T>::value) o->delimiter(',');
        const auto key = key_of(flag);
        setters_[key] = [&var, key](const Json& j) {
            try {
                var = j.get<T>();
            } catch (const nlohmann::json::exception& e) {
                fail(ErrorKind::InvalidInput, "config: bad value for '" + key + "': " + e.what());
            }
        };
        getters_[key] = [&var] { return Json(var); };
        return o;
    }

    CLI::Option* flag(const std::string& flag, bool& var, const std::string& desc) {
        auto* o = app_->add_flag("--" + flag, var, desc);
        const auto key = key_of(flag);
        setters_[key] = [&var, key](const Json& j) {
            if (!j.is_boolean()) fail(ErrorKind::InvalidInput, "config: '" + key + "' must be a boolean");
            var = j.get<bool>();
        };
        getters_[key] = [&var] { return Json(var); };
        return o;
    }

    /// Keys accepted in config files but not acted on (witness annotations).
    void info(const std::string& key) {
        setters_[key] = [](const Json&) {};
    }

    void apply_config() {
        if (config_path_.empty()) return;
        const Json cfg = load_json_file(config_path_);
        if (!cfg.is_object()) fail(ErrorKind::InvalidInput, "config: expected an object");
        for (auto it = cfg.begin(); it != cfg.end(); ++it) {
            if (it.key() == "out") {
                out_dir_ = it.value().get<std::string>();
                continue;
            }
            auto s = setters_.find(it.key());
            if (s == setters_.end()) fail(ErrorKind::InvalidInput, "config: unknown key '" + it.key() + "'");
            s->second(it.value());
        }
    }

    Json echo() const {
        Json j = Json::object();
        for (const auto& [k, g] : getters_) j[k] = g();
        return j;
    }

    fs::path out_dir() const {
        if (!out_dir_.empty()) return out_dir_;
        if (const char* env = std::getenv("SHL_OUT_DIR"); env && *env) return env;
        return ".";
    }

private:
    CLI::App* app_;
    std::string config_path_;
    std::string out_dir_;
    std::map<std::string, std::function<void(const Json&)>> setters_;
    std::map<std::string, std::function<Json()>> getters_;
};

/// Report under construction for one run.
struct Report {
    std::string slug;
    Options* options = nullptr;
    std::optional<std::uint64_t> seed;
    Json checks = Json::array();
    Json results = Json::object();
    bool all_passed = true;

    void check(const std::string& name, bool passed, const std::string& provenance, Json detail = Json::object()) {
        detail["name"] = name;
        detail["passed"] = passed;
        detail["provenance"] = provenance;
        checks.push_back(std::move(detail));
        all_passed = all_passed && passed;
    }

    fs::path dir() const {
        fs::path d = options->out_dir();
        fs::create_directories(d);
        return d;
    }

    void write_text(const std::string& name, const std::string& text) const {
        std::ofstream f(dir() / name, std::ios::binary);
        f << text;
    }

    int finish(int code, const std::string& summary, const Json& error = nullptr) const {
        Json j;
        j["tool"] = "shl";
        j["version"] = kVersion;
        j["command"] = slug;
        j["config"] = options->echo();
        j["seed"] = seed ? Json(*seed) : Json(nullptr);
        j["checks"] = checks;
        j["results"] = results;
        j["exit_code"] = code;
        j["status"] = code == 0 ? "passed" : code == 1 ? "failed" : code == 2 ? "invalid-input" : "numerical-failure";
        if (!error.is_null()) j["error"] = error;
        write_text(slug + ".json", j.dump(2) + "\n");

        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::ostringstream ts;
        ts << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
        write_text(slug + ".meta.json", Json{{"generated_at", ts.str()}, {"report", slug + ".json"}}.dump(2) + "\n");

        std::cout << slug << ": " << summary << "\n";
        return code;
    }
};

std::string join(const std::vector<double>& v, int precision = 12) {
    std::ostringstream os;
    os << std::setprecision(precision);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
    return os.str();
}

Json matrix_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
        rows.push_back(r);
    }
    return rows;
}

Matrix matrix_from_flat(const std::vector<double>& flat, int n, const std::string& what) {
    if (static_cast<int>(flat.size()) != n * n)
        fail(ErrorKind::InvalidInput, what + ": expected " + std::to_string(n * n) + " entries");
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = flat[static_cast<std::size_t>(i * n + j)];
    return m;
}

/// Shared operator flags.
struct OperatorFlags {
    int n = 2;
    int k = 2;
    std::vector<double> a;
    std::vector<double> y;

    void bind(Options& o) {
        o.opt("n", n, "dimension");
        o.opt("k", k, "degree");
        o.opt("a", a, "coefficients a_1..a_m of the lower-order terms");
        o.opt("y", y, "roots y_1..y_m (alternative to --a)");
    }
    OperatorSpec build() const {
        if (!a.empty() && !y.empty()) return OperatorSpec::from_both(n, k, a, y);
        if (!y.empty()) return OperatorSpec::from_roots(n, k, y);
        return OperatorSpec::from_coeffs(n, k, a);
    }
};

Condition parse_condition(int c) {
    if (c != 1 && c != 2) fail(ErrorKind::InvalidInput, "condition must be 1 or 2");
    return c == 1 ? Condition::One : Condition::Two;
}

SecondDerivativeMode parse_mode(const std::string& s) {
    if (s == "analytic") return SecondDerivativeMode::Analytic;
    if (s == "central") return SecondDerivativeMode::CentralDifference;
    if (s == "richardson") return SecondDerivativeMode::RichardsonDifference;
    fail(ErrorKind::InvalidInput, "unknown mode '" + s + "' (analytic, central, richardson)");
}

// ---------------------------------------------------------------------------
// Commands

struct Symcheck {
    std::vector<double> x;
    int k = 0;
    int n = 6;
    int samples = 0;
    std::uint64_t seed = 1;
    double tol = 1e-9;

    void bind(Options& o) {
        o.opt("x", x, "vector to check");
        o.opt("k", k, "degree (0 = every k)");
        o.opt("n", n, "length of random vectors");
        o.opt("samples", samples, "number of random vectors in [-5, 5]^n");
        o.opt("seed", seed, "seed");
        o.opt("tol", tol, "relative tolerance");
    }

    int run(Report& r) const {
        std::vector<std::vector<double>> xs;
        if (!x.empty()) xs.push_back(x);
        if (samples > 0) {
            r.seed = seed;
            if (n < 1 || n > 20) fail(ErrorKind::InvalidInput, "symcheck: n must be in 1..20");
            for (int s = 0; s < samples; ++s) {
                Rng rng(derive_seed(seed, 0, static_cast<std::uint64_t>(s)));
                std::vector<double> v(static_cast<std::size_t>(n));
                for (auto& e : v) e = uniform(rng, -5.0, 5.0);
                xs.push_back(std::move(v));
            }
        }
        if (xs.empty()) fail(ErrorKind::InvalidInput, "symcheck: give --x or --samples");

        std::map<std::string, double> worst;
        double brute_worst = 0.0;
        std::optional<std::vector<double>> witness;
        for (const auto& v : xs) {
            const int len = static_cast<int>(v.size());
            // brute force over subsets
            if (len <= 20) {
                std::vector<double> brute(static_cast<std::size_t>(len) + 1, 0.0), mag(brute.size(), 0.0);
                for (std::uint32_t mask = 0; mask < (1u << len); ++mask) {
                    double p = 1.0;
                    for (int i = 0; i < len; ++i)
                        if (mask >> i & 1u) p *= v[static_cast<std::size_t>(i)];
                    const auto c = static_cast<std::size_t>(__builtin_popcount(mask));
                    brute[c] += p;
                    mag[c] += std::abs(p);
                }
                const auto table = sigma_table(v);
                for (std::size_t j = 0; j < brute.size(); ++j)
                    brute_worst = std::max(brute_worst, rel_discrepancy(table[j], brute[j], mag[j]));
            }
            const int k_lo = k > 0 ? k : 1, k_hi = k > 0 ? k : len;
            for (int kk = k_lo; kk <= k_hi; ++kk) {
                const auto rep = identity_suite(v, kk, tol);
                for (const auto& c : rep.checks) worst[c.name] = std::max(worst[c.name], c.max_discrepancy);
                if (!rep.passed && !witness) witness = v;
            }
        }
        r.check("subset_enumeration", brute_worst <= tol, "sigma_k as a sum over k-subsets",
                Json{{"max_discrepancy", brute_worst}});
        const std::map<std::string, std::string> prov{
            {"deletion_split", "sigma_k = sigma_{k;i} + x_i sigma_{k-1;i}"},
            {"deletion_sum", "sum_i sigma_{k;i} = (n-k) sigma_k"},
            {"euler_sum", "sum_i x_i sigma_{k-1;i} = k sigma_k"},
            {"weighted_square_sum", "sum_i x_i^2 sigma_{k-1;i} = sigma_1 sigma_k - (k+1) sigma_{k+1}"},
            {"quotient_second_derivative", "second derivatives of sigma_k / sigma_{k-1}"}};
        for (const auto& [name, w] : worst)
            r.check(name, w <= tol, prov.count(name) ? prov.at(name) : name, Json{{"max_discrepancy", w}});
        r.results["vectors"] = xs.size();
        if (witness) {
            r.write_text("symcheck.witness.json", Json{{"command", "symcheck"}, {"x", *witness}, {"k", k}, {"tol", tol}}.dump(2) + "\n");
        }
        const int code = r.all_passed ? 0 : 1;
        std::ostringstream s;
        s << xs.size() << " vector(s), subset max discrepancy " << brute_worst << (code ? ", FAILED" : ", ok");
        return r.finish(code, s.str());
    }
};

struct ConeCmd {
    std::vector<double> lambda;
    OperatorFlags op;
    int condition = 0;
    double eps = 0.0;

    void bind(Options& o) {
        o.opt("lambda", lambda, "eigenvalue vector");
        op.n = 0; // taken from --lambda unless given
        op.bind(o);
        o.opt("condition", condition, "also check condition 1 or 2 (0 = none)");
        o.opt("eps", eps, "cone margin factor");
    }

    int run(Report& r) const {
        if (lambda.empty()) fail(ErrorKind::InvalidInput, "cone: --lambda required");
        OperatorFlags f = op;
        if (f.n != 0 && f.n != static_cast<int>(lambda.size()))
            fail(ErrorKind::InvalidInput, "cone: --n is " + std::to_string(f.n) + " but --lambda has " +
                                              std::to_string(lambda.size()) + " entries");
        f.n = static_cast<int>(lambda.size());
        const auto spec = f.build();
        const auto v = in_lifted_cone(lambda, spec.y(), spec.k(), eps);
        Json d{{"margins", v.margins}};
        if (v.first_failing_degree) d["first_failing_degree"] = *v.first_failing_degree;
        r.check("lifted_cone_membership", v.member, "(lambda, y) in the Garding cone Gamma_k^{n+m}", d);
        if (condition != 0) {
            const bool ok = check_condition(lambda, spec.y(), spec.a(), spec.k(), parse_condition(condition));
            r.check("condition_" + std::to_string(condition), ok, "admissibility condition", Json::object());
        }
        if (sigma(1, lambda) > 0.0) r.results["semiconvexity_ratio"] = semiconvexity_ratio(lambda);
        r.results["y"] = spec.y();
        const int code = r.all_passed ? 0 : 1;
        return r.finish(code, std::string(v.member ? "in cone" : "not in cone") +
                                  (condition ? (code ? ", condition fails" : ", condition holds") : ""));
    }
};

struct RrCmd {
    std::vector<double> a;
    double tol = 1e-8;

    void bind(Options& o) {
        o.opt("a", a, "coefficients a_1..a_m of t^m + sum (-1)^r a_r t^{m-r}");
        o.opt("tol", tol, "reality tolerance");
    }

    int run(Report& r) const {
        if (a.empty()) fail(ErrorKind::InvalidInput, "rr: --a required");
        try {
            const auto roots = roots_from_coeffs(a, tol);
            r.results["roots"] = roots;
            r.check("real_roots", true, "all roots of the coefficient polynomial are real",
                    Json{{"roots", roots}});
            std::cout << join(roots) << "\n";
            return r.finish(0, "roots " + join(roots));
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NoRealRoots) throw;
            r.check("real_roots", false, "all roots of the coefficient polynomial are real",
                    Json{{"error", to_string(e.kind())}, {"message", e.what()}});
            r.results["error"] = to_string(e.kind());
            return r.finish(1, e.what());
        }
    }
};

struct OperatorCheck {
    OperatorFlags op;
    std::vector<double> lambda;
    int samples = 0;
    std::uint64_t seed = 1;
    double fd_step = 1e-5;
    double tol = 1e-5;

    void bind(Options& o) {
        op.bind(o);
        o.opt("lambda", lambda, "evaluation point");
        o.opt("samples", samples, "random cone points");
        o.opt("seed", seed, "seed");
        o.opt("fd-step", fd_step, "finite-difference step");
        o.opt("tol", tol, "relative tolerance for derivative checks");
    }

    int run(Report& r) const {
        const auto spec = op.build();
        std::vector<std::vector<double>> pts;
        if (!lambda.empty()) pts.push_back(lambda);
        if (samples > 0) {
            r.seed = seed;
            for (int s = 0; s < samples; ++s) {
                Rng rng(derive_seed(seed, 1, static_cast<std::uint64_t>(s)));
                pts.push_back(sample_lifted_point(rng, spec.n(), spec.y(), spec.k()));
            }
        }
        if (pts.empty()) fail(ErrorKind::InvalidInput, "operator-check: give --lambda or --samples");
        double lift = 0.0, grad = 0.0, hess = 0.0;
        std::optional<std::vector<double>> witness;
        for (const auto& l : pts) {
            const double f1 = eval_F(spec, l), f2 = eval_F_expanded(spec, l);
            const double dl = rel_discrepancy(f1, f2, std::max(std::abs(f1), std::abs(f2)));
            const auto g = grad_F(spec, l);
            const Matrix H = hess_F(spec, l);
            double dg = 0.0, dh = 0.0;
            for (std::size_t i = 0; i < l.size(); ++i) {
                auto lp = l, lm = l;
                lp[i] += fd_step;
                lm[i] -= fd_step;
                const double fd = (eval_F(spec, lp) - eval_F(spec, lm)) / (2 * fd_step);
                dg = std::max(dg, std::abs(fd - g[i]) / std::max(1.0, std::abs(g[i])));
                const auto gp = grad_F(spec, lp), gm = grad_F(spec, lm);
                for (std::size_t j = 0; j < l.size(); ++j) {
                    const double fdh = (gp[j] - gm[j]) / (2 * fd_step);
                    const double h = H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
                    dh = std::max(dh, std::abs(fdh - h) / std::max(1.0, std::abs(h)));
                }
            }
            if ((dl > 1e-10 || dg > tol || dh > tol) && !witness) witness = l;
            lift = std::max(lift, dl);
            grad = std::max(grad, dg);
            hess = std::max(hess, dh);
        }
        if (pts.size() == 1) r.results["F"] = eval_F(spec, pts[0]);
        r.results["points"] = pts.size();
        r.check("lifting_identity", lift <= 1e-10, "sigma_k(lambda, y) = sum_r a_r sigma_{k-r}(lambda)",
                Json{{"max_discrepancy", lift}});
        r.check("gradient", grad <= tol, "F_i = sigma_{k-1;i}(lambda, y)", Json{{"max_discrepancy", grad}});
        r.check("hessian", hess <= tol, "F_ij = sigma_{k-2;ij}(lambda, y)", Json{{"max_discrepancy", hess}});
        if (witness) {
            Json w{{"command", "operator-check"}, {"n", spec.n()}, {"k", spec.k()}, {"lambda", *witness}};
            if (spec.m()) w["a"] = spec.a();
            r.write_text("operator-check.witness.json", w.dump(2) + "\n");
        }
        const int code = r.all_passed ? 0 : 1;
        std::ostringstream s;
        s << pts.size() << " point(s), lift " << lift << ", grad " << grad << ", hess " << hess;
        return r.finish(code, s.str());
    }
};

struct FormFlags {
    std::string variant = "sigma-k";
    OperatorFlags op;
    int m = 0;
    double delta = 0.005;
    double gamma = -1.0; // negative: variant default
    double shift = 1.0;
    bool literal_lambda1 = false;
    std::string rhs_weight = "first";

    void bind(Options& o, bool with_m) {
        o.opt("variant", variant, "sigma-k, sum-f or n-minus-one");
        op.bind(o);
        if (with_m) o.opt("m", m, "number of lower-order roots sampled in [y-lo, y-hi]");
        o.opt("delta", delta, "semi-convexity parameter");
        o.opt("gamma", gamma, "gamma (default: 1/(1+16k), or 1/(2n) for n-minus-one)");
        o.opt("shift", shift, "additive shift in lambda_1 - lambda_i + shift (n-minus-one)");
        o.flag("literal-lambda1", literal_lambda1, "n-minus-one: extra lambda_1 factor in the denominators");
        o.opt("rhs-weight", rhs_weight, "n-minus-one right-hand side weight: first or trace");
    }

    QuadFormSpec build() const {
        const auto v = parse_variant(variant);
        OperatorFlags f = op;
        if (m > 0 && f.a.empty() && f.y.empty()) f.y.assign(static_cast<std::size_t>(m), 1.0);
        auto opspec = f.build();
        QuadFormSpec s = v == FormVariant::SigmaK    ? QuadFormSpec::sigma_k(opspec.n(), opspec.k(), delta)
                         : v == FormVariant::SumF    ? QuadFormSpec::sum_f(opspec, delta)
                                                     : QuadFormSpec::n_minus_one(opspec);
        if (v == FormVariant::SigmaK && opspec.m() != 0)
            fail(ErrorKind::InvalidInput, "sigma-k variant takes no --a/--y");
        if (gamma >= 0.0) s.gamma = gamma;
        s.denominator_shift = shift;
        s.literal_lambda1_factor = literal_lambda1;
        if (rhs_weight == "trace") s.rhs_weight = RhsWeight::Trace;
        else if (rhs_weight != "first") fail(ErrorKind::InvalidInput, "rhs-weight must be first or trace");
        s.validate();
        return s;
    }
};

struct ConcavityVerify {
    FormFlags form;
    std::vector<double> lambda;
    double tol_psd = 1e-8;

    void bind(Options& o) {
        form.bind(o, false);
        o.opt("lambda", lambda, "sorted eigenvalues");
        o.opt("tol-psd", tol_psd, "PSD tolerance relative to |M|_F");
        o.info("margin");
        o.info("sample_index");
        o.info("operator");
    }

    int run(Report& r) const {
        if (lambda.empty()) fail(ErrorKind::InvalidInput, "concavity verify: --lambda required");
        FormFlags f = form;
        f.op.n = static_cast<int>(lambda.size());
        const auto spec = f.build();
        const auto rep = verify_pointwise(spec, Spectrum(lambda, true), tol_psd);
        r.results["matrix"] = matrix_json(rep.matrix);
        r.results["min_eigenvalue"] = rep.min_eigenvalue;
        r.results["worst_direction"] = to_std(rep.worst_direction);
        r.results["margin"] = rep.margin;
        r.results["gamma"] = spec.gamma;
        r.check("psd", rep.passed, std::string("concavity inequality, ") + to_string(spec.variant) + " form",
                Json{{"margin", rep.margin}});
        std::ostringstream s;
        s << "margin " << rep.margin << (rep.passed ? ", PSD" : ", NOT PSD");
        return r.finish(rep.passed ? 0 : 1, s.str());
    }
};

/// Config files for `concavity verify` carry the operator as an object.
void load_verify_operator(const Json& cfg, ConcavityVerify& v) {
    if (!cfg.contains("operator")) return;
    const auto op = operator_from_json(cfg.at("operator"));
    v.form.op.n = op.n();
    v.form.op.k = op.k();
    v.form.op.a.clear();
    v.form.op.y = op.y();
}

struct ConcavitySweep {
    FormFlags form;
    std::vector<double> deltas;
    std::vector<double> levels;
    std::vector<double> lambda1;
    int samples = 10000;
    std::uint64_t seed = 7;
    unsigned threads = 1;
    double level_span = 1e-3;
    double y_lo = 0.0, y_hi = 2.0;
    double tol_psd = 1e-8;

    void bind(Options& o) {
        form.bind(o, true);
        o.opt("deltas", deltas, "delta values (default: --delta)");
        o.opt("level", levels, "level values: sigma_k of the normalised point, or F for n-minus-one");
        o.opt("lambda1", lambda1, "raw lambda_1 values (n-minus-one)");
        o.opt("samples", samples, "samples per cell");
        o.opt("seed", seed, "seed");
        o.opt("threads", threads, "worker threads");
        o.opt("level-span", level_span, "levels drawn log-uniformly in [level * span, level]");
        o.opt("y-lo", y_lo, "lower bound for sampled roots");
        o.opt("y-hi", y_hi, "upper bound for sampled roots");
        o.opt("tol-psd", tol_psd, "PSD tolerance relative to |M|_F");
    }

    int run(Report& r) const {
        r.seed = seed;
        SweepConfig cfg;
        cfg.form = form.build();
        cfg.samples = samples;
        cfg.seed = seed;
        cfg.threads = threads;
        cfg.level_span = level_span;
        cfg.y_lo = y_lo;
        cfg.y_hi = y_hi;
        cfg.tol_psd = tol_psd;
        if (samples < 1) fail(ErrorKind::InvalidInput, "concavity sweep: samples must be positive");
        const bool raw = cfg.form.variant == FormVariant::NMinusOne;
        const std::vector<double> ds = deltas.empty() ? std::vector<double>{form.delta} : deltas;
        const std::vector<double> ls = levels.empty() ? std::vector<double>{raw ? 1.0 : 1e-4} : levels;
        const std::vector<double> l1s = lambda1.empty() ? std::vector<double>{100.0, 1000.0} : lambda1;
        for (double lv : ls) {
            if (!(lv > 0.0)) fail(ErrorKind::InvalidInput, "concavity sweep: levels must be positive");
            if (raw) {
                for (double l1 : l1s) cfg.cells.push_back({0.0, lv, l1});
            } else {
                for (double d : ds) cfg.cells.push_back({d, lv, 0.0});
            }
        }
        const auto fr = sweep(cfg);
        std::ostringstream csv;
        write_sweep_csv(csv, fr);
        r.write_text("concavity-sweep.csv", csv.str());

        Json cells = Json::array();
        int failing = 0;
        for (std::size_t c = 0; c < fr.cells.size(); ++c) {
            const auto& cr = fr.cells[c];
            Json cj{{"delta", cr.cell.delta},   {"level", cr.cell.level},       {"raw_lambda1", cr.cell.raw_lambda1},
                    {"requested", cr.requested}, {"accepted", cr.accepted},     {"passed", cr.passed},
                    {"pass_fraction", cr.pass_fraction}, {"min_margin", cr.min_margin}, {"attempts", cr.attempts}};
            if (cr.witness) {
                QuadFormSpec local = cfg.form;
                if (!raw) local.delta = cr.cell.delta;
                const std::string name = "concavity-sweep.witness-" + std::to_string(c) + ".json";
                r.write_text(name, witness_config(local, *cr.witness, tol_psd).dump(2) + "\n");
                cj["witness"] = name;
                ++failing;
            }
            cells.push_back(cj);
            r.check("cell_" + std::to_string(c), cr.accepted > 0 && cr.passed == cr.accepted,
                    std::string("PSD sweep of the ") + to_string(cfg.form.variant) + " concavity form", cj);
        }
        r.results["cells"] = cells;
        r.results["gamma"] = fr.gamma;
        r.results["csv"] = "concavity-sweep.csv";
        const int code = r.all_passed ? 0 : 1;
        std::ostringstream s;
        s << fr.cells.size() << " cell(s), " << failing << " with failures";
        return r.finish(code, s.str());
    }
};

struct AndrewsCmd {
    OperatorFlags op;
    int samples = 1000;
    std::uint64_t seed = 1;
    std::string mode = "richardson";
    double h = 1e-2;
    double min_gap = 1e-3;
    double tol = 1e-8;
    std::vector<double> S, T;

    void bind(Options& o) {
        op.bind(o);
        o.opt("samples", samples, "random admissible samples");
        o.opt("seed", seed, "seed");
        o.opt("mode", mode, "left-hand side: analytic, central or richardson");
        o.opt("h", h, "finite-difference step");
        o.opt("min-gap", min_gap, "minimum eigenvalue gap");
        o.opt("tol", tol, "tolerance relative to the term scale");
        o.opt("S", S, "single case: S row-major");
        o.opt("T", T, "single case: T row-major");
    }

    int run(Report& r) const {
        const auto spec = op.build();
        const auto m = parse_mode(mode);
        double worst = std::numeric_limits<double>::infinity();
        std::optional<AndrewsCase> witness;
        int evaluated = 0;
        auto consider = [&](const AndrewsCase& c) {
            const auto g = andrews_gap(spec, c.pt, c.T, m, h, min_gap);
            ++evaluated;
            const double rel = g.gap / g.scale;
            if (rel < worst) {
                worst = rel;
                if (rel < -tol) witness = c;
            }
        };
        if (!S.empty() || !T.empty()) {
            consider(AndrewsCase{MatrixPoint::from_matrix(matrix_from_flat(S, spec.n(), "S")),
                                 matrix_from_flat(T, spec.n(), "T")});
        } else {
            r.seed = seed;
            for (int s = 0; s < samples; ++s) {
                Rng rng(derive_seed(seed, 2, static_cast<std::uint64_t>(s)));
                const auto c = sample_andrews_case(rng, spec, min_gap);
                if (c) consider(*c);
            }
        }
        if (evaluated == 0) fail(ErrorKind::InvalidInput, "andrews: no admissible samples");
        const bool ok = worst >= -tol;
        r.check("andrews_inequality", ok, "second derivative of F along a matrix direction vs the eigenvalue form",
                Json{{"min_relative_gap", worst}, {"evaluated", evaluated}});
        if (witness) {
            std::vector<double> sf, tf;
            for (Eigen::Index i = 0; i < spec.n(); ++i)
                for (Eigen::Index j = 0; j < spec.n(); ++j) {
                    sf.push_back(witness->pt.S(i, j));
                    tf.push_back(witness->T(i, j));
                }
            Json w{{"command", "andrews"}, {"n", spec.n()}, {"k", spec.k()}, {"S", sf}, {"T", tf}, {"mode", mode}, {"h", h}};
            if (spec.m()) w["a"] = spec.a();
            r.write_text("andrews.witness.json", w.dump(2) + "\n");
        }
        std::ostringstream s;
        s << evaluated << " sample(s), min gap/scale " << worst;
        return r.finish(ok ? 0 : 1, s.str());
    }
};

struct TraceCmd {
    OperatorFlags op;
    std::vector<double> lambda;
    int condition = 1;
    int samples = 0;
    std::uint64_t seed = 1;
    double l1_lo = 10.0, l1_hi = 1e4;
    double tol = 1e-10;

    void bind(Options& o) {
        op.bind(o);
        o.opt("lambda", lambda, "evaluation point");
        o.opt("condition", condition, "1 or 2");
        o.opt("samples", samples, "random points with F = 1");
        o.opt("seed", seed, "seed");
        o.opt("l1-lo", l1_lo, "lower bound for sampled lambda_1");
        o.opt("l1-hi", l1_hi, "upper bound for sampled lambda_1");
        o.opt("tol", tol, "relative tolerance for the identities");
    }

    int run(Report& r) const {
        OperatorFlags f = op;
        if (!lambda.empty()) f.n = static_cast<int>(lambda.size());
        const auto spec = f.build();
        const auto cond = parse_condition(condition);
        std::vector<std::vector<double>> pts;
        if (!lambda.empty()) pts.push_back(lambda);
        if (samples > 0) {
            r.seed = seed;
            for (int s = 0; s < samples; ++s) {
                Rng rng(derive_seed(seed, 3, static_cast<std::uint64_t>(s)));
                if (auto p = sample_trace_point(rng, spec, cond, l1_lo, l1_hi)) pts.push_back(*p);
            }
        }
        if (pts.empty()) fail(ErrorKind::InvalidInput, "trace-bounds: give --lambda or --samples");
        double euler = 0.0, coeff = 0.0, min_slack = std::numeric_limits<double>::infinity();
        double min_ratio = std::numeric_limits<double>::infinity(), sumfi = 0.0;
        double min_coeff_slack = std::numeric_limits<double>::infinity();
        for (const auto& l : pts) {
            const auto tb = trace_bounds(spec, l, cond);
            euler = std::max(euler, tb.euler_discrepancy);
            coeff = std::max(coeff, tb.coefficient_discrepancy);
            min_slack = std::min(min_slack, tb.slack / std::max(1.0, std::abs(tb.kF)));
            min_ratio = std::min(min_ratio, tb.ratio);
            min_coeff_slack = std::min(min_coeff_slack, (tb.kF - tb.coefficient_form) / std::max(1.0, std::abs(tb.kF)));
            sumfi = std::max(sumfi, rel_discrepancy(tb.sum_Fi, tb.sum_Fi_formula, std::abs(tb.sum_Fi)));
            if (pts.size() == 1) {
                r.results["sum_Fi_lambda_i"] = tb.sum_Fi_lambda_i;
                r.results["kF"] = tb.kF;
                r.results["slack"] = tb.slack;
                r.results["sum_Fi"] = tb.sum_Fi;
                r.results["lambda1_power"] = tb.lambda1_power;
                r.results["ratio"] = tb.ratio;
            }
        }
        r.results["points"] = pts.size();
        r.results["min_ratio"] = min_ratio;
        r.check("trace_identity", euler <= tol && coeff <= tol,
                "F^{ij}u_ij = k F - sum_j y_j sigma_{k-1;y_j}", Json{{"euler", euler}, {"coefficients", coeff}});
        r.check("sum_Fi_formula", sumfi <= tol, "sum_i F_i in terms of sigma_{k-1-r}", Json{{"max_discrepancy", sumfi}});
        if (cond == Condition::One)
            r.check("slack_nonnegative", min_slack >= -tol, "sum_i F_i lambda_i <= k F", Json{{"min_relative_slack", min_slack}});
        else {
            r.check("coefficient_bound", min_coeff_slack >= -tol, "k sigma_k + sum_i (k-i) a_i sigma_{k-i} <= k F",
                    Json{{"min_relative_slack", min_coeff_slack}});
            r.check("trace_lower_bound", min_ratio > 0.0, "sum_i F_i >= C lambda_1^{1/(k-1)}", Json{{"min_ratio", min_ratio}});
        }
        std::ostringstream s;
        s << pts.size() << " point(s), min ratio " << min_ratio;
        return r.finish(r.all_passed ? 0 : 1, s.str());
    }
};

struct SolveCmd {
    std::string problem;
    OperatorFlags op;
    double radius = 1.0;
    double h = 1.0 / 32.0;
    double psi = 1.0;
    int condition = 1;
    std::vector<double> alphas{0.5, 1.0, 2.0, 4.0};
    int max_iters = 30;
    double tol_res = 1e-10;
    bool binary = true;

    void bind(Options& o) {
        o.opt("problem", problem, "problem file (JSON)");
        op.bind(o);
        o.opt("radius", radius, "disk radius when no problem file is given");
        o.opt("h", h, "grid spacing");
        o.opt("psi", psi, "constant right-hand side");
        o.opt("condition", condition, "1 or 2");
        o.opt("alphas", alphas, "exponents for (-u)^alpha Laplace u");
        o.opt("max-iters", max_iters, "Newton iteration cap");
        o.opt("tol-res", tol_res, "residual tolerance");
        o.opt("binary", binary, "also write the SHLB1 binary");
    }

    int run(Report& r) const {
        DirichletProblem p;
        if (!problem.empty()) {
            p = problem_from_json(load_json_file(problem));
        } else {
            p.op = op.build();
            p.domain = Ball{std::vector<double>(static_cast<std::size_t>(p.op.n()), 0.0), radius};
            p.h = h;
            const double c = psi;
            p.psi = [c](std::span<const double>) { return c; };
            p.condition = parse_condition(condition);
        }
        SolveOptions opts;
        opts.max_iters = max_iters;
        opts.tol_res = tol_res;
        opts.alphas = alphas;
        const auto rep = newton_solve(p, opts);

        std::ostringstream csv;
        write_solution_csv(csv, p, rep);
        r.write_text("solve.csv", csv.str());
        if (binary) {
            std::ostringstream bin(std::ios::binary);
            write_solution_binary(bin, rep);
            r.write_text("solve.shlb", bin.str());
        }
        Json pog = Json::array();
        for (const auto& [a, v] : rep.pogorelov)
            pog.push_back(Json{{"alpha", a}, {"value", v.value}, {"node", v.node}, {"position", v.position}});
        r.results["residual_inf"] = rep.residual_inf;
        r.results["newton_iters"] = rep.newton_iters;
        r.results["admissible_everywhere"] = rep.admissible_everywhere;
        r.results["min_cone_margin"] = rep.min_cone_margin;
        r.results["pogorelov"] = pog;
        r.results["residual_history"] = rep.residual_history;
        r.results["start"] = rep.start;
        r.results["unknowns"] = rep.u.size();
        r.results["operator"] = operator_to_json(p.op);
        r.results["domain"] = domain_to_json(p.domain);
        r.check("converged", rep.residual_inf <= tol_res, "damped Newton on F(D_h^2 u) = psi",
                Json{{"residual_inf", rep.residual_inf}});
        r.check("admissible", rep.admissible_everywhere, "discrete Hessian eigenvalues in the admissible set",
                Json{{"min_cone_margin", rep.min_cone_margin}});
        std::ostringstream s;
        s << rep.newton_iters << " Newton step(s), residual " << rep.residual_inf;
        return r.finish(r.all_passed ? 0 : 1, s.str());
    }
};

struct RigidityCmd {
    OperatorFlags op;
    std::vector<double> radii{2.0, 4.0, 8.0};
    double amplitude = 0.1;
    int mode = 3;
    double h = 1.0 / 8.0;
    double inner_radius = 1.0;
    double exact_tol = 1e-8;

    void bind(Options& o) {
        op.bind(o);
        o.opt("radii", radii, "increasing ball radii");
        o.opt("amplitude", amplitude, "boundary perturbation amplitude");
        o.opt("mode", mode, "angular mode of the perturbation");
        o.opt("h", h, "grid spacing");
        o.opt("inner-radius", inner_radius, "radius of the fitting ball");
        o.opt("exact-tol", exact_tol, "deviation bound for the unperturbed case");
    }

    int run(Report& r) const {
        const auto spec = op.build();
        const auto rep = rigidity_experiment(spec, radii, Perturbation{amplitude, mode}, h, inner_radius);
        std::ostringstream csv;
        csv << "radius,deviation,residual_inf,newton_iters,inner_nodes\n";
        Json rows = Json::array();
        for (const auto& row : rep.rows) {
            csv << fmt_double(row.radius) << "," << fmt_double(row.deviation) << "," << fmt_double(row.residual_inf)
                << "," << row.newton_iters << "," << row.inner_nodes << "\n";
            rows.push_back(Json{{"radius", row.radius}, {"deviation", row.deviation}, {"residual_inf", row.residual_inf},
                                {"newton_iters", row.newton_iters}, {"inner_nodes", row.inner_nodes}});
        }
        r.write_text("rigidity.csv", csv.str());
        r.results["c_star"] = rep.c_star;
        r.results["rows"] = rows;
        if (amplitude == 0.0) {
            double worst = 0.0;
            for (const auto& row : rep.rows) worst = std::max(worst, row.deviation);
            r.check("exact_quadratic", worst <= exact_tol, "quadratic entire solutions are recovered",
                    Json{{"max_deviation", worst}});
        } else {
            r.check("deviation_non_increasing", rep.monotone_non_increasing(),
                    "inner deviation from a quadratic shrinks as the ball grows", Json::object());
        }
        std::ostringstream s;
        s << "c* = " << std::setprecision(10) << rep.c_star << ", deviations";
        for (const auto& row : rep.rows) s << " " << std::setprecision(4) << row.deviation;
        return r.finish(r.all_passed ? 0 : 1, s.str());
    }
};

int exit_code_for(ErrorKind k) { return is_numerical_failure(k) || k == ErrorKind::NoAdmissibleStart ? 3 : 2; }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sum-Hessian operator toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    struct Entry {
        std::string slug;
        CLI::App* app;
        std::unique_ptr<Options> options;
        std::function<int(Report&)> run;
        std::function<void()> preload = [] {};
    };
    std::vector<Entry> entries;

    Symcheck symcheck;
    ConeCmd cone;
    RrCmd rr;
    OperatorCheck opcheck;
    ConcavityVerify verify;
    ConcavitySweep csweep;
    AndrewsCmd andrews;
    TraceCmd trace;
    SolveCmd solve;
    RigidityCmd rigidity;

    auto add = [&](CLI::App* sub, const std::string& slug, auto& cmd) {
        auto opts = std::make_unique<Options>(sub);
        cmd.bind(*opts);
        entries.push_back({slug, sub, std::move(opts), [&cmd](Report& r) { return cmd.run(r); }});
    };
    add(app.add_subcommand("symcheck", "symmetric-function identities and brute-force comparison"), "symcheck", symcheck);
    add(app.add_subcommand("cone", "Garding-cone membership and admissibility conditions"), "cone", cone);
    add(app.add_subcommand("rr", "real roots of the coefficient polynomial"), "rr", rr);
    add(app.add_subcommand("operator-check", "lifting identity and derivative checks"), "operator-check", opcheck);
    auto* conc = app.add_subcommand("concavity", "concavity quadratic forms");
    conc->require_subcommand(1);
    add(conc->add_subcommand("verify", "PSD check at one point"), "concavity-verify", verify);
    add(conc->add_subcommand("sweep", "seeded PSD sweep over a region"), "concavity-sweep", csweep);
    add(app.add_subcommand("andrews", "matrix second-derivative inequality"), "andrews", andrews);
    add(app.add_subcommand("trace-bounds", "trace identity and lower bounds"), "trace-bounds", trace);
    add(app.add_subcommand("solve", "Dirichlet problem by damped Newton"), "solve", solve);
    add(app.add_subcommand("rigidity", "expanding-ball rigidity experiment"), "rigidity", rigidity);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    for (auto& e : entries) {
        if (!e.app->parsed()) continue;
        Report report;
        report.slug = e.slug;
        report.options = e.options.get();
        try {
            e.options->apply_config();
            if (e.slug == "concavity-verify") {
                // the witness format nests the operator
                std::string path;
                for (int i = 1; i + 1 < argc; ++i)
                    if (std::string(argv[i]) == "--config") path = argv[i + 1];
                if (!path.empty()) load_verify_operator(load_json_file(path), verify);
            }
            return e.run(report);
        } catch (const Error& err) {
            report.checks = Json::array();
            const int code = exit_code_for(err.kind());
            try {
                return report.finish(code, err.what(),
                                     Json{{"kind", to_string(err.kind())}, {"message", err.what()}});
            } catch (const std::exception&) {
                std::cerr << err.what() << "\n";
                return code;
            }
        } catch (const std::exception& err) {
            std::cerr << e.slug << ": " << err.what() << "\n";
            return 2;
        }
    }
    return 2;
}
