#pragma once

// JSON and CSV plumbing: operator specs, problem files, solution export
// (CSV and the SHLB1 binary layout), sweep tables and replayable witnesses.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "shl/concavity.hpp"
#include "shl/errors.hpp"
#include "shl/operator.hpp"
#include "shl/solver.hpp"

namespace shl {

using Json = nlohmann::json;

/// Rejects keys outside the allowed set.
inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& what) {
    if (!j.is_object()) fail(ErrorKind::InvalidInput, what + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) fail(ErrorKind::InvalidInput, what + ": unknown key '" + it.key() + "'");
    }
}

template <class T>
T get_as(const Json& j, const char* key, const std::string& what) {
    if (!j.contains(key)) fail(ErrorKind::InvalidInput, what + ": missing '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::InvalidInput, what + ": bad '" + key + "': " + e.what());
    }
}

inline Json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::InvalidInput, "cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::InvalidInput, path + ": " + e.what());
    }
}

inline std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

// ---------------------------------------------------------------------------
// Operators

/// {"n", "k", "a": [...]} or {"n", "k", "y": [...]}, both allowed when consistent.
inline OperatorSpec operator_from_json(const Json& j) {
    check_keys(j, {"n", "k", "a", "y"}, "operator");
    const int n = get_as<int>(j, "n", "operator"), k = get_as<int>(j, "k", "operator");
    const bool has_a = j.contains("a"), has_y = j.contains("y");
    if (has_a && has_y)
        return OperatorSpec::from_both(n, k, get_as<std::vector<double>>(j, "a", "operator"),
                                       get_as<std::vector<double>>(j, "y", "operator"));
    if (has_y) return OperatorSpec::from_roots(n, k, get_as<std::vector<double>>(j, "y", "operator"));
    return OperatorSpec::from_coeffs(n, k, has_a ? get_as<std::vector<double>>(j, "a", "operator") : std::vector<double>{});
}

inline Json operator_to_json(const OperatorSpec& op) {
    return Json{{"n", op.n()}, {"k", op.k()}, {"a", op.a()}, {"y", op.y()}};
}

// ---------------------------------------------------------------------------
// Domains and fields

inline Domain domain_from_json(const Json& j) {
    const auto type = get_as<std::string>(j, "type", "domain");
    if (type == "disk" || type == "ball") {
        check_keys(j, {"type", "center", "radius"}, "domain");
        return Ball{get_as<std::vector<double>>(j, "center", "domain"), get_as<double>(j, "radius", "domain")};
    }
    if (type == "box") {
        check_keys(j, {"type", "lo", "hi"}, "domain");
        return Box{get_as<std::vector<double>>(j, "lo", "domain"), get_as<std::vector<double>>(j, "hi", "domain")};
    }
    fail(ErrorKind::InvalidInput, "domain: unknown type '" + type + "'");
}

inline Json domain_to_json(const Domain& d) {
    if (const auto* b = std::get_if<Ball>(&d)) return Json{{"type", "disk"}, {"center", b->center}, {"radius", b->radius}};
    const auto& bx = std::get<Box>(d);
    return Json{{"type", "box"}, {"lo", bx.lo}, {"hi", bx.hi}};
}

struct Monomial {
    double coef = 0.0;
    std::vector<int> powers;
};

/// Scalar fields: a number, {"poly": [{"coef": c, "powers": [p1, ...]}, ...]},
/// or {"harmonic": {"quadratic": c, "radius": R, "amplitude": A, "mode": k}}
/// meaning c |x|^2 / 2 + A (r/R)^k sin(k theta).
inline ScalarField field_from_json(const Json& j, int dim) {
    if (j.is_number()) {
        const double c = j.get<double>();
        return [c](std::span<const double>) { return c; };
    }
    if (j.is_object() && j.contains("poly")) {
        check_keys(j, {"poly"}, "field");
        std::vector<Monomial> terms;
        for (const auto& t : j.at("poly")) {
            check_keys(t, {"coef", "powers"}, "field.poly");
            Monomial m{get_as<double>(t, "coef", "field.poly"), get_as<std::vector<int>>(t, "powers", "field.poly")};
            if (static_cast<int>(m.powers.size()) != dim)
                fail(ErrorKind::InvalidInput, "field.poly: powers length differs from dimension");
            for (int p : m.powers)
                if (p < 0) fail(ErrorKind::InvalidInput, "field.poly: negative power");
            terms.push_back(std::move(m));
        }
        return [terms](std::span<const double> x) {
            double s = 0.0;
            for (const auto& t : terms) {
                double v = t.coef;
                for (std::size_t i = 0; i < t.powers.size(); ++i) v *= std::pow(x[i], t.powers[i]);
                s += v;
            }
            return s;
        };
    }
    if (j.is_object() && j.contains("harmonic")) {
        check_keys(j, {"harmonic"}, "field");
        const auto& h = j.at("harmonic");
        check_keys(h, {"quadratic", "radius", "amplitude", "mode"}, "field.harmonic");
        if (dim < 2) fail(ErrorKind::InvalidInput, "field.harmonic: needs dimension >= 2");
        return rigidity_boundary(get_as<double>(h, "quadratic", "field.harmonic"), get_as<double>(h, "radius", "field.harmonic"),
                                 Perturbation{h.value("amplitude", 0.0), h.value("mode", 3)});
    }
    fail(ErrorKind::InvalidInput, "field: expected a number, 'poly' or 'harmonic'");
}

/// Problem file: {operator, domain, h, psi, boundary, condition}.
inline DirichletProblem problem_from_json(const Json& j) {
    check_keys(j, {"operator", "domain", "h", "psi", "boundary", "condition"}, "problem");
    DirichletProblem p;
    p.op = operator_from_json(j.at("operator"));
    p.domain = domain_from_json(j.at("domain"));
    p.h = get_as<double>(j, "h", "problem");
    p.psi = field_from_json(j.contains("psi") ? j.at("psi") : Json(1.0), p.op.n());
    if (j.contains("boundary")) {
        const auto& b = j.at("boundary");
        if (!(b.is_number() && b.get<double>() == 0.0)) p.boundary = field_from_json(b, p.op.n());
    }
    const int c = j.value("condition", 1);
    if (c != 1 && c != 2) fail(ErrorKind::InvalidInput, "problem: condition must be 1 or 2");
    p.condition = c == 1 ? Condition::One : Condition::Two;
    return p;
}

// ---------------------------------------------------------------------------
// Solution export

/// One row per interior node: coordinates, u, eigenvalues (descending), cone margin.
inline void write_solution_csv(std::ostream& os, const DirichletProblem& p, const SolveReport& rep) {
    const int n = rep.disc->dim();
    for (int i = 0; i < n; ++i) os << "x" << i + 1 << ",";
    os << "u";
    for (int i = 0; i < n; ++i) os << ",lambda" << i + 1;
    os << ",cone_margin\n";
    const auto states = node_states(p, rep);
    for (std::size_t u = 0; u < rep.u.size(); ++u) {
        for (double c : rep.disc->node_position(u)) os << fmt_double(c) << ",";
        os << fmt_double(rep.u[u]);
        for (double l : states[u].lambda.values()) os << "," << fmt_double(l);
        os << "," << fmt_double(states[u].margin) << "\n";
    }
}

inline constexpr char kBinaryMagic[5] = {'S', 'H', 'L', 'B', '1'};

namespace detail {
template <class T>
void put_le(std::ostream& os, T v) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}
template <class T>
T get_le(std::istream& is) {
    unsigned char bytes[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) fail(ErrorKind::InvalidInput, "SHLB1: truncated file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T v;
    std::memcpy(&v, bytes, sizeof(T));
    return v;
}
} // namespace detail

/// "SHLB1", uint32 ndim, uint32 size per axis, double h, then the full grid
/// in row-major order (last axis fastest) with NaN off the interior.
inline void write_solution_binary(std::ostream& os, const SolveReport& rep) {
    os.write(kBinaryMagic, 5);
    const auto& sizes = rep.disc->sizes();
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(sizes.size()));
    for (auto s : sizes) detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s));
    detail::put_le<double>(os, rep.disc->h());
    for (long long g = 0; g < rep.disc->grid_size(); ++g) {
        const long long u = rep.disc->unknown_of(g);
        detail::put_le<double>(os, u >= 0 ? rep.u[static_cast<std::size_t>(u)] : std::numeric_limits<double>::quiet_NaN());
    }
}

struct GridFile {
    std::vector<std::uint32_t> sizes;
    double h = 0.0;
    std::vector<double> values;
};

inline GridFile read_solution_binary(std::istream& is) {
    char magic[5];
    if (!is.read(magic, 5) || std::memcmp(magic, kBinaryMagic, 5) != 0)
        fail(ErrorKind::InvalidInput, "SHLB1: bad magic");
    GridFile f;
    const auto nd = detail::get_le<std::uint32_t>(is);
    if (nd == 0 || nd > 3) fail(ErrorKind::InvalidInput, "SHLB1: bad dimension");
    std::size_t total = 1;
    for (std::uint32_t i = 0; i < nd; ++i) {
        f.sizes.push_back(detail::get_le<std::uint32_t>(is));
        total *= f.sizes.back();
    }
    f.h = detail::get_le<double>(is);
    f.values.resize(total);
    for (auto& v : f.values) v = detail::get_le<double>(is);
    return f;
}

// ---------------------------------------------------------------------------
// Sweeps

inline void write_sweep_csv(std::ostream& os, const SweepFrontier& fr) {
    os << "variant,n,k,m,gamma,seed,delta,level,raw_lambda1,requested,accepted,passed,pass_fraction,min_margin,attempts\n";
    for (const auto& c : fr.cells) {
        os << to_string(fr.variant) << "," << fr.n << "," << fr.k << "," << fr.m << "," << fmt_double(fr.gamma) << ","
           << fr.seed << "," << fmt_double(c.cell.delta) << "," << fmt_double(c.cell.level) << ","
           << fmt_double(c.cell.raw_lambda1) << "," << c.requested << "," << c.accepted << "," << c.passed << ","
           << fmt_double(c.pass_fraction) << "," << fmt_double(c.min_margin) << "," << c.attempts << "\n";
    }
}

/// Standalone config for `concavity verify` reproducing one sampled point.
inline Json witness_config(const QuadFormSpec& form, const SweepWitness& w, double tol_psd) {
    Json op{{"n", form.op.n()}, {"k", form.op.k()}};
    if (!w.y.empty()) op["y"] = w.y;
    return Json{{"command", "concavity verify"},
                {"variant", to_string(form.variant)},
                {"operator", op},
                {"delta", form.delta},
                {"gamma", form.gamma},
                {"lambda", w.lambda},
                {"tol_psd", tol_psd},
                {"sample_index", w.sample_index},
                {"margin", w.margin}};
}

} // namespace shl
