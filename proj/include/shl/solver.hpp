#pragma once

// Finite-difference damped Newton solver for F(D^2 u) = psi(x) in a disk/ball
// or box, with Dirichlet data g. Second derivatives along every axis and
// every diagonal e_i +- e_j use three-point formulas that shorten to the
// boundary crossing near a curved boundary, so the scheme is exact for
// quadratics everywhere and second order in the interior.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/OrderingMethods>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "shl/cone.hpp"
#include "shl/errors.hpp"
#include "shl/linalg.hpp"
#include "shl/operator.hpp"

namespace shl {

using Point = std::vector<double>;
using ScalarField = std::function<double(std::span<const double>)>;

struct Ball {
    Point center;
    double radius = 0.0;
};

struct Box {
    Point lo, hi;
};

using Domain = std::variant<Ball, Box>;

inline int domain_dim(const Domain& d) {
    return std::visit([](const auto& s) -> int {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, Ball>) return static_cast<int>(s.center.size());
        else return static_cast<int>(s.lo.size());
    }, d);
}

inline void validate_domain(const Domain& d) {
    std::visit([](const auto& s) {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, Ball>) {
            if (!(s.radius > 0.0)) fail(ErrorKind::InvalidInput, "domain: radius must be positive");
            if (s.center.empty()) fail(ErrorKind::InvalidInput, "domain: empty center");
        } else {
            if (s.lo.size() != s.hi.size() || s.lo.empty()) fail(ErrorKind::InvalidInput, "domain: bad box corners");
            for (std::size_t i = 0; i < s.lo.size(); ++i)
                if (!(s.hi[i] > s.lo[i])) fail(ErrorKind::InvalidInput, "domain: box has zero extent");
        }
    }, d);
}

/// Center and radius of a ball containing the domain with the boundary on it
/// (the box uses its half-diagonal).
inline std::pair<Point, double> enclosing_ball(const Domain& d) {
    if (const auto* b = std::get_if<Ball>(&d)) return {b->center, b->radius};
    const auto& bx = std::get<Box>(d);
    Point c(bx.lo.size());
    double r2 = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        c[i] = 0.5 * (bx.lo[i] + bx.hi[i]);
        r2 += 0.25 * (bx.hi[i] - bx.lo[i]) * (bx.hi[i] - bx.lo[i]);
    }
    return {c, std::sqrt(r2)};
}

/// Signed closeness tolerance for inside tests, in units of the grid step.
inline constexpr double kBoundarySnap = 1e-10;

inline bool strictly_inside(const Domain& d, std::span<const double> x, double h) {
    const double tol = kBoundarySnap * h;
    if (const auto* b = std::get_if<Ball>(&d)) {
        double r2 = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - b->center[i]) * (x[i] - b->center[i]);
        return std::sqrt(r2) < b->radius - tol;
    }
    const auto& bx = std::get<Box>(d);
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!(x[i] > bx.lo[i] + tol && x[i] < bx.hi[i] - tol)) return false;
    return true;
}

/// Fraction t in (0, 1] at which x + t*step first reaches the boundary,
/// or 1 when x + step is still strictly inside.
inline double boundary_crossing(const Domain& d, std::span<const double> x, std::span<const double> step, double h) {
    Point end(x.begin(), x.end());
    for (std::size_t i = 0; i < end.size(); ++i) end[i] += step[i];
    if (strictly_inside(d, end, h)) return 1.0;
    double t = 1.0;
    if (const auto* b = std::get_if<Ball>(&d)) {
        double aa = 0.0, bb = 0.0, cc = -b->radius * b->radius;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double off = x[i] - b->center[i];
            aa += step[i] * step[i];
            bb += 2.0 * off * step[i];
            cc += off * off;
        }
        const double disc = std::max(0.0, bb * bb - 4.0 * aa * cc);
        t = (-bb + std::sqrt(disc)) / (2.0 * aa);
    } else {
        const auto& bx = std::get<Box>(d);
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (step[i] > 0.0) t = std::min(t, (bx.hi[i] - x[i]) / step[i]);
            if (step[i] < 0.0) t = std::min(t, (bx.lo[i] - x[i]) / step[i]);
        }
    }
    if (t > 1.0 - 1e-12) t = 1.0;
    return std::clamp(t, 1e-12, 1.0);
}

/// Three-point second difference along a grid direction:
/// L u = w_plus u_plus + w_center u_0 + w_minus u_minus approximates v^T D^2u v.
struct LineStencil {
    double w_plus = 0.0, w_center = 0.0, w_minus = 0.0;
    long long plus = -1, minus = -1; // unknown index, or -1 for a boundary value
    double b_plus = 0.0, b_minus = 0.0;
    double t_plus = 1.0, t_minus = 1.0;
};

/// Grid over the bounding box of the domain with the stencil geometry of
/// every interior node. Boundary values are sampled from g at crossings.
class Discretization {
public:
    Discretization(Domain domain, double h, const ScalarField& boundary) : domain_(std::move(domain)), h_(h) {
        validate_domain(domain_);
        if (!(h_ > 0.0)) fail(ErrorKind::InvalidInput, "discretization: h must be positive");
        dim_ = domain_dim(domain_);
        if (dim_ < 1 || dim_ > 3) fail(ErrorKind::InvalidInput, "discretization: dimension must be 1..3");
        Point lo, hi;
        if (const auto* b = std::get_if<Ball>(&domain_)) {
            for (int i = 0; i < dim_; ++i) {
                lo.push_back(b->center[static_cast<std::size_t>(i)] - b->radius);
                hi.push_back(b->center[static_cast<std::size_t>(i)] + b->radius);
            }
        } else {
            lo = std::get<Box>(domain_).lo;
            hi = std::get<Box>(domain_).hi;
        }
        origin_ = lo;
        sizes_.resize(static_cast<std::size_t>(dim_));
        total_ = 1;
        for (int i = 0; i < dim_; ++i) {
            const double extent = hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)];
            sizes_[static_cast<std::size_t>(i)] = static_cast<long long>(std::ceil(extent / h_ - 1e-9)) + 1;
            total_ *= sizes_[static_cast<std::size_t>(i)];
        }
        if (total_ > 50'000'000) fail(ErrorKind::InvalidInput, "discretization: grid too large");

        unknown_of_.assign(static_cast<std::size_t>(total_), -1);
        for (long long g = 0; g < total_; ++g) {
            const auto x = position(g);
            if (strictly_inside(domain_, x, h_)) {
                unknown_of_[static_cast<std::size_t>(g)] = static_cast<long long>(interior_.size());
                interior_.push_back(g);
            }
        }
        if (interior_.empty()) fail(ErrorKind::InvalidInput, "discretization: no interior nodes");

        // directions: axes, then (e_i + e_j, e_i - e_j) for i < j
        for (int i = 0; i < dim_; ++i) {
            std::vector<int> v(static_cast<std::size_t>(dim_), 0);
            v[static_cast<std::size_t>(i)] = 1;
            directions_.push_back(v);
        }
        for (int i = 0; i < dim_; ++i)
            for (int j = i + 1; j < dim_; ++j) {
                std::vector<int> p(static_cast<std::size_t>(dim_), 0), m(static_cast<std::size_t>(dim_), 0);
                p[static_cast<std::size_t>(i)] = 1;
                p[static_cast<std::size_t>(j)] = 1;
                m[static_cast<std::size_t>(i)] = 1;
                m[static_cast<std::size_t>(j)] = -1;
                directions_.push_back(p);
                directions_.push_back(m);
            }

        stencils_.resize(interior_.size() * directions_.size());
        for (std::size_t u = 0; u < interior_.size(); ++u)
            for (std::size_t d = 0; d < directions_.size(); ++d)
                stencils_[u * directions_.size() + d] = build_stencil(interior_[u], directions_[d], boundary);
    }

    int dim() const noexcept { return dim_; }
    double h() const noexcept { return h_; }
    const Domain& domain() const noexcept { return domain_; }
    const std::vector<long long>& sizes() const noexcept { return sizes_; }
    long long grid_size() const noexcept { return total_; }
    std::size_t unknowns() const noexcept { return interior_.size(); }
    long long grid_index(std::size_t unknown) const { return interior_[unknown]; }
    long long unknown_of(long long grid) const { return unknown_of_[static_cast<std::size_t>(grid)]; }

    Point position(long long g) const {
        Point x(static_cast<std::size_t>(dim_));
        for (int i = dim_ - 1; i >= 0; --i) {
            const auto s = sizes_[static_cast<std::size_t>(i)];
            x[static_cast<std::size_t>(i)] = origin_[static_cast<std::size_t>(i)] + static_cast<double>(g % s) * h_;
            g /= s;
        }
        return x;
    }

    Point node_position(std::size_t unknown) const { return position(interior_[unknown]); }

    /// Minimum grid count of interior nodes along any axis line through the
    /// domain's bounding box.
    long long interior_extent_nodes() const {
        long long best = std::numeric_limits<long long>::max();
        for (int a = 0; a < dim_; ++a) {
            std::vector<long long> lo_i(static_cast<std::size_t>(dim_), std::numeric_limits<long long>::max()),
                hi_i(static_cast<std::size_t>(dim_), std::numeric_limits<long long>::min());
            long long lo = std::numeric_limits<long long>::max(), hi = std::numeric_limits<long long>::min();
            for (long long g : interior_) {
                auto idx = multi_index(g);
                lo = std::min(lo, idx[static_cast<std::size_t>(a)]);
                hi = std::max(hi, idx[static_cast<std::size_t>(a)]);
            }
            best = std::min(best, hi - lo + 1);
        }
        return best;
    }

    std::vector<long long> multi_index(long long g) const {
        std::vector<long long> idx(static_cast<std::size_t>(dim_));
        for (int i = dim_ - 1; i >= 0; --i) {
            const auto s = sizes_[static_cast<std::size_t>(i)];
            idx[static_cast<std::size_t>(i)] = g % s;
            g /= s;
        }
        return idx;
    }

    const LineStencil& stencil(std::size_t unknown, std::size_t direction) const {
        return stencils_[unknown * directions_.size() + direction];
    }
    std::size_t direction_count() const noexcept { return directions_.size(); }

    /// v^T D_h^2 u v for the direction's stencil.
    double line_second(std::span<const double> u, std::size_t unknown, std::size_t direction) const {
        const auto& s = stencil(unknown, direction);
        const double up = s.plus >= 0 ? u[static_cast<std::size_t>(s.plus)] : s.b_plus;
        const double um = s.minus >= 0 ? u[static_cast<std::size_t>(s.minus)] : s.b_minus;
        return s.w_plus * up + s.w_center * u[unknown] + s.w_minus * um;
    }

    /// Discrete Hessian at an interior node.
    Matrix hessian(std::span<const double> u, std::size_t unknown) const {
        if (unknown >= interior_.size()) fail(ErrorKind::StencilOutOfDomain, "hessian: node is not interior");
        Matrix H(dim_, dim_);
        for (int i = 0; i < dim_; ++i) H(i, i) = line_second(u, unknown, static_cast<std::size_t>(i));
        std::size_t d = static_cast<std::size_t>(dim_);
        for (int i = 0; i < dim_; ++i)
            for (int j = i + 1; j < dim_; ++j) {
                const double plus = line_second(u, unknown, d), minus = line_second(u, unknown, d + 1);
                H(i, j) = H(j, i) = 0.25 * (plus - minus);
                d += 2;
            }
        return H;
    }

    /// Samples a field at every interior node.
    std::vector<double> sample(const ScalarField& f) const {
        std::vector<double> out(interior_.size());
        for (std::size_t u = 0; u < interior_.size(); ++u) out[u] = f(node_position(u));
        return out;
    }

private:
    LineStencil build_stencil(long long g, const std::vector<int>& v, const ScalarField& boundary) const {
        const auto idx = multi_index(g);
        const auto x = position(g);
        LineStencil s;
        for (int sign : {+1, -1}) {
            Point step(static_cast<std::size_t>(dim_));
            for (int i = 0; i < dim_; ++i) step[static_cast<std::size_t>(i)] = sign * v[static_cast<std::size_t>(i)] * h_;
            const double t = boundary_crossing(domain_, x, step, h_);
            long long neighbour = -1;
            if (t == 1.0) {
                // neighbour grid node; interior or a boundary node
                long long gi = 0;
                bool in_grid = true;
                for (int i = 0; i < dim_; ++i) {
                    const long long c = idx[static_cast<std::size_t>(i)] + sign * v[static_cast<std::size_t>(i)];
                    if (c < 0 || c >= sizes_[static_cast<std::size_t>(i)]) in_grid = false;
                    gi = gi * sizes_[static_cast<std::size_t>(i)] + c;
                }
                if (in_grid) neighbour = unknown_of_[static_cast<std::size_t>(gi)];
            }
            double bval = 0.0;
            if (neighbour < 0) {
                Point xb(x);
                for (std::size_t i = 0; i < xb.size(); ++i) xb[i] += t * step[i];
                bval = boundary ? boundary(xb) : 0.0;
            }
            if (sign > 0) {
                s.t_plus = t;
                s.plus = neighbour;
                s.b_plus = bval;
            } else {
                s.t_minus = t;
                s.minus = neighbour;
                s.b_minus = bval;
            }
        }
        const double tp = s.t_plus, tm = s.t_minus, h2 = h_ * h_;
        const double denom = h2 * tp * tm * (tp + tm);
        s.w_plus = 2.0 * tm / denom;
        s.w_minus = 2.0 * tp / denom;
        s.w_center = -2.0 * (tp + tm) / denom;
        return s;
    }

    Domain domain_;
    double h_ = 0.0;
    int dim_ = 0;
    Point origin_;
    std::vector<long long> sizes_;
    long long total_ = 0;
    std::vector<long long> unknown_of_;
    std::vector<long long> interior_;
    std::vector<std::vector<int>> directions_;
    std::vector<LineStencil> stencils_;
};

struct DirichletProblem {
    OperatorSpec op = OperatorSpec::sigma_k(2, 2);
    Domain domain = Ball{{0.0, 0.0}, 1.0};
    double h = 1.0 / 32.0;
    ScalarField psi = [](std::span<const double>) { return 1.0; };
    ScalarField boundary; // empty means g = 0
    Condition condition = Condition::One;

    void validate() const {
        validate_domain(domain);
        if (domain_dim(domain) != op.n())
            fail(ErrorKind::InvalidInput, "problem: domain dimension differs from operator n");
        if (op.n() < 2 || op.n() > 3) fail(ErrorKind::InvalidInput, "problem: dimension must be 2 or 3");
        if (!(h > 0.0)) fail(ErrorKind::InvalidInput, "problem: h must be positive");
        if (!psi) fail(ErrorKind::InvalidInput, "problem: psi missing");
        if (condition == Condition::One) {
            for (double v : op.y())
                if (v < 0.0) fail(ErrorKind::ConditionViolated, "problem: condition 1 needs nonnegative roots");
        } else {
            for (double v : op.a())
                if (v < 0.0) fail(ErrorKind::ConditionViolated, "problem: condition 2 needs nonnegative coefficients");
        }
    }
};

struct PogorelovValue {
    double value = 0.0;
    long long node = -1; // unknown index of the maximiser
    Point position;
};

struct SolveOptions {
    int max_iters = 30;
    double tol_res = 1e-10;
    int max_halvings = 30;
    double eps_cone = 1e-10;
    std::vector<double> alphas{0.5, 1.0, 2.0, 4.0};
};

struct NodeState {
    Spectrum lambda;
    double value = 0.0;
    Matrix dF;
    double margin = 0.0; // smallest sigma_j over the checked cones
    bool admissible = false;
};

struct SolveReport {
    std::shared_ptr<const Discretization> disc;
    std::vector<double> u;   // interior values
    std::vector<double> psi; // interior values
    double residual_inf = 0.0;
    int newton_iters = 0;
    bool admissible_everywhere = false;
    double min_cone_margin = 0.0;
    std::map<double, PogorelovValue> pogorelov;
    std::vector<double> residual_history;
    std::string start; // how the initial iterate was built
    double start_scale = 0.0;
};

/// Node evaluation: eigen-decomposition of the discrete Hessian, operator
/// value, matrix derivative and the admissibility test for the condition.
inline NodeState evaluate_node(const OperatorSpec& op, Condition cond, const Matrix& H, double eps_cone) {
    const auto eig = jacobi_eigen(H);
    NodeState st;
    st.lambda = Spectrum(to_std(eig.values), true);
    const auto& lam = st.lambda.values();
    const auto hat = op.lift(lam);
    const auto table = sigma_table(hat);
    double inf = 0.0;
    for (double v : hat) inf = std::max(inf, std::abs(v));
    st.admissible = true;
    st.margin = std::numeric_limits<double>::infinity();
    for (int j = 1; j <= op.k(); ++j) {
        const double s = table[static_cast<std::size_t>(j)];
        st.margin = std::min(st.margin, s);
        if (!(s > eps_cone * (1.0 + std::pow(inf, j)))) st.admissible = false;
    }
    if (cond == Condition::Two && op.k() >= 2) {
        const auto lt = sigma_table(lam);
        double linf = 0.0;
        for (double v : lam) linf = std::max(linf, std::abs(v));
        for (int j = 1; j <= op.k() - 1; ++j) {
            const double s = lt[static_cast<std::size_t>(j)];
            st.margin = std::min(st.margin, s);
            if (!(s > eps_cone * (1.0 + std::pow(linf, j)))) st.admissible = false;
        }
    }
    st.value = table[static_cast<std::size_t>(op.k())];
    const auto g = grad_F(op, lam);
    Vector gv(op.n());
    for (int i = 0; i < op.n(); ++i) gv(i) = g[static_cast<std::size_t>(i)];
    st.dF = eig.vectors * gv.asDiagonal() * eig.vectors.transpose();
    return st;
}

/// max over interior nodes of (-u)^alpha Laplace_h u; nodes with u >= 0 count as 0.
inline PogorelovValue pogorelov_functional(const Discretization& disc, std::span<const double> u, double alpha) {
    PogorelovValue best;
    for (std::size_t i = 0; i < disc.unknowns(); ++i) {
        double v = 0.0;
        if (u[i] < 0.0) {
            double lap = 0.0;
            for (int d = 0; d < disc.dim(); ++d) lap += disc.line_second(u, i, static_cast<std::size_t>(d));
            v = std::pow(-u[i], alpha) * lap;
        }
        if (best.node < 0 || v > best.value) {
            best.value = v;
            best.node = static_cast<long long>(i);
        }
    }
    if (best.node >= 0) best.position = disc.node_position(static_cast<std::size_t>(best.node));
    return best;
}

namespace detail {

struct SweepState {
    std::vector<NodeState> nodes;
    std::vector<double> residual;
    double residual_inf = 0.0;
    bool admissible = true;
    double min_margin = std::numeric_limits<double>::infinity();
};

inline SweepState evaluate_all(const DirichletProblem& p, const Discretization& disc, std::span<const double> u,
                               std::span<const double> psi, double eps_cone, bool stop_on_inadmissible) {
    SweepState s;
    s.nodes.resize(disc.unknowns());
    s.residual.resize(disc.unknowns());
    for (std::size_t i = 0; i < disc.unknowns(); ++i) {
        s.nodes[i] = evaluate_node(p.op, p.condition, disc.hessian(u, i), eps_cone);
        s.admissible = s.admissible && s.nodes[i].admissible;
        s.min_margin = std::min(s.min_margin, s.nodes[i].margin);
        if (!s.admissible && stop_on_inadmissible) return s;
        s.residual[i] = s.nodes[i].value - psi[i];
        s.residual_inf = std::max(s.residual_inf, std::abs(s.residual[i]));
    }
    return s;
}

inline Eigen::SparseMatrix<double> assemble_jacobian(const Discretization& disc, const SweepState& st) {
    using Triplet = Eigen::Triplet<double>;
    std::vector<Triplet> trips;
    const int n = disc.dim();
    trips.reserve(disc.unknowns() * (1 + 2 * disc.direction_count()));
    for (std::size_t i = 0; i < disc.unknowns(); ++i) {
        const Matrix& dF = st.nodes[i].dF;
        auto add = [&](std::size_t dir, double coeff) {
            if (coeff == 0.0) return;
            const auto& s = disc.stencil(i, dir);
            trips.emplace_back(static_cast<int>(i), static_cast<int>(i), coeff * s.w_center);
            if (s.plus >= 0) trips.emplace_back(static_cast<int>(i), static_cast<int>(s.plus), coeff * s.w_plus);
            if (s.minus >= 0) trips.emplace_back(static_cast<int>(i), static_cast<int>(s.minus), coeff * s.w_minus);
        };
        for (int a = 0; a < n; ++a) add(static_cast<std::size_t>(a), dF(a, a));
        std::size_t d = static_cast<std::size_t>(n);
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b) {
                // D_ab = D_ba = (L_plus - L_minus)/4, counted twice in F^{ij} dD_ij
                add(d, 0.5 * dF(a, b));
                add(d + 1, -0.5 * dF(a, b));
                d += 2;
            }
    }
    Eigen::SparseMatrix<double> J(static_cast<int>(disc.unknowns()), static_cast<int>(disc.unknowns()));
    J.setFromTriplets(trips.begin(), trips.end());
    J.makeCompressed();
    return J;
}

} // namespace detail

/// Damped Newton iteration on the nodal system F(D_h^2 u) = psi.
///
/// Start: g itself when it is admissible at every node, otherwise
/// g + A (|x - c|^2 - R^2)/2 with F(A I) = max psi, doubling A until
/// admissible. Each step halves until every node stays admissible and the
/// max-norm residual decreases.
inline SolveReport newton_solve(const DirichletProblem& problem, const SolveOptions& opts = {}) {
    problem.validate();
    auto disc = std::make_shared<Discretization>(problem.domain, problem.h, problem.boundary);
    if (disc->interior_extent_nodes() < 8)
        fail(ErrorKind::InvalidInput, "problem: fewer than 8 interior nodes across the domain");

    SolveReport rep;
    rep.disc = disc;
    rep.psi = disc->sample(problem.psi);
    double psi_max = 0.0;
    for (double v : rep.psi) {
        if (!(v > 0.0)) fail(ErrorKind::InvalidInput, "problem: psi must be positive at every interior node");
        psi_max = std::max(psi_max, v);
    }

    std::vector<double> g = problem.boundary ? disc->sample(problem.boundary) : std::vector<double>(disc->unknowns(), 0.0);
    const auto [center, radius] = enclosing_ball(problem.domain);
    std::vector<double> bubble(disc->unknowns());
    for (std::size_t i = 0; i < bubble.size(); ++i) {
        const auto x = disc->node_position(i);
        double r2 = 0.0;
        for (std::size_t d = 0; d < x.size(); ++d) r2 += (x[d] - center[d]) * (x[d] - center[d]);
        bubble[i] = 0.5 * (r2 - radius * radius);
    }

    std::vector<double> u = g;
    detail::SweepState st;
    bool started = false;
    if (problem.boundary) {
        st = detail::evaluate_all(problem, *disc, u, rep.psi, opts.eps_cone, true);
        if (st.admissible) {
            started = true;
            rep.start = "boundary-extension";
        }
    }
    if (!started) {
        double A = solve_isotropic_level(problem.op, psi_max);
        for (int attempt = 0; attempt < 40 && !started; ++attempt, A *= 2.0) {
            for (std::size_t i = 0; i < u.size(); ++i) u[i] = g[i] + A * bubble[i];
            st = detail::evaluate_all(problem, *disc, u, rep.psi, opts.eps_cone, true);
            if (st.admissible) {
                started = true;
                rep.start = "isotropic-bubble";
                rep.start_scale = A;
            }
        }
        if (!started) fail(ErrorKind::NoAdmissibleStart, "newton_solve: no admissible initial iterate");
    }
    rep.residual_history.push_back(st.residual_inf);

    int iter = 0;
    while (st.residual_inf > opts.tol_res && iter < opts.max_iters) {
        const auto J = detail::assemble_jacobian(*disc, st);
        Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
        lu.compute(J);
        if (lu.info() != Eigen::Success) fail(ErrorKind::LinearSolveFailure, "newton_solve: factorisation failed");
        Vector rhs(static_cast<Eigen::Index>(u.size()));
        for (std::size_t i = 0; i < u.size(); ++i) rhs(static_cast<Eigen::Index>(i)) = -st.residual[i];
        const Vector du = lu.solve(rhs);
        if (lu.info() != Eigen::Success || !du.allFinite())
            fail(ErrorKind::LinearSolveFailure, "newton_solve: linear solve failed");

        double step = 1.0;
        bool accepted = false;
        std::vector<double> trial(u.size());
        for (int halving = 0; halving <= opts.max_halvings; ++halving, step *= 0.5) {
            for (std::size_t i = 0; i < u.size(); ++i) trial[i] = u[i] + step * du(static_cast<Eigen::Index>(i));
            auto ts = detail::evaluate_all(problem, *disc, trial, rep.psi, opts.eps_cone, true);
            if (ts.admissible && ts.residual_inf < st.residual_inf) {
                u.swap(trial);
                st = std::move(ts);
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            std::ostringstream msg;
            msg << "newton_solve: line search stalled at residual " << std::setprecision(3) << st.residual_inf;
            fail(ErrorKind::StalledLineSearch, msg.str());
        }
        ++iter;
        rep.residual_history.push_back(st.residual_inf);
    }

    rep.u = std::move(u);
    rep.residual_inf = st.residual_inf;
    rep.newton_iters = iter;
    rep.admissible_everywhere = st.admissible;
    rep.min_cone_margin = st.min_margin;
    for (double a : opts.alphas) rep.pogorelov[a] = pogorelov_functional(*disc, rep.u, a);
    return rep;
}

/// Per-node eigenvalues and cone margin of a converged solution.
inline std::vector<NodeState> node_states(const DirichletProblem& p, const SolveReport& rep, double eps_cone = 0.0) {
    std::vector<NodeState> out(rep.disc->unknowns());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = evaluate_node(p.op, p.condition, rep.disc->hessian(rep.u, i), eps_cone);
    return out;
}

// ---------------------------------------------------------------------------
// Manufactured solutions

struct ManufacturedResidual {
    double residual_inf = 0.0;
    double residual_l2 = 0.0; // root mean square over nodes
    std::size_t nodes = 0;
};

/// |F(D_h^2 u_exact) - F(D^2 u_exact)|_inf over interior nodes, with the
/// exact Hessian supplied in closed form. Throws InadmissibleExact when the
/// exact Hessian leaves the lifted cone anywhere.
inline ManufacturedResidual manufactured_residual(const OperatorSpec& op, const ScalarField& u_exact,
                                                  const std::function<Matrix(std::span<const double>)>& hess_exact,
                                                  const Domain& domain, double h) {
    const Discretization disc(domain, h, u_exact);
    if (domain_dim(domain) != op.n()) fail(ErrorKind::InvalidInput, "manufactured_residual: dimension mismatch");
    const auto u = disc.sample(u_exact);
    ManufacturedResidual r;
    r.nodes = disc.unknowns();
    double sq = 0.0;
    for (std::size_t i = 0; i < disc.unknowns(); ++i) {
        const auto x = disc.node_position(i);
        const auto lam = to_std(jacobi_eigen(hess_exact(x)).values);
        if (!in_lifted_cone(lam, op.y(), op.k()).member)
            fail(ErrorKind::InadmissibleExact, "manufactured_residual: exact Hessian outside the cone");
        const double psi = eval_F(op, lam);
        const double discrete = eval_F_matrix(op, disc.hessian(u, i));
        const double e = std::abs(discrete - psi);
        r.residual_inf = std::max(r.residual_inf, e);
        sq += e * e;
    }
    r.residual_l2 = std::sqrt(sq / static_cast<double>(r.nodes));
    return r;
}

/// Least-squares slope of log(err) against log(h).
inline double loglog_slope(std::span<const double> hs, std::span<const double> errs) {
    const std::size_t n = hs.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::log(hs[i]), y = std::log(errs[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---------------------------------------------------------------------------
// Expanding-ball rigidity experiment

struct Perturbation {
    double amplitude = 0.0;
    int mode = 3;
};

struct RigidityRow {
    double radius = 0.0;
    double deviation = 0.0; // max |u - best quadratic| on the inner ball
    double residual_inf = 0.0;
    int newton_iters = 0;
    std::size_t inner_nodes = 0;
};

struct RigidityReport {
    double c_star = 0.0;
    std::vector<RigidityRow> rows;
    bool monotone_non_increasing() const {
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (rows[i].deviation > rows[i - 1].deviation) return false;
        return true;
    }
};

/// max |u - q| over nodes within the inner radius, q the least-squares quadratic.
inline std::pair<double, std::size_t> quadratic_fit_deviation(const Discretization& disc, std::span<const double> u,
                                                              double inner_radius) {
    const int n = disc.dim();
    std::vector<std::size_t> nodes;
    for (std::size_t i = 0; i < disc.unknowns(); ++i) {
        const auto x = disc.node_position(i);
        double r2 = 0.0;
        for (double v : x) r2 += v * v;
        if (r2 <= inner_radius * inner_radius) nodes.push_back(i);
    }
    const int cols = 1 + n + n * (n + 1) / 2;
    if (static_cast<int>(nodes.size()) < 2 * cols)
        fail(ErrorKind::InvalidInput, "quadratic_fit_deviation: too few nodes in the inner ball");
    Matrix A(static_cast<Eigen::Index>(nodes.size()), cols);
    Vector b(static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t r = 0; r < nodes.size(); ++r) {
        const auto x = disc.node_position(nodes[r]);
        int c = 0;
        const auto row = static_cast<Eigen::Index>(r);
        A(row, c++) = 1.0;
        for (int i = 0; i < n; ++i) A(row, c++) = x[static_cast<std::size_t>(i)];
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) A(row, c++) = x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(j)];
        b(row) = u[nodes[r]];
    }
    const Vector coef = A.colPivHouseholderQr().solve(b);
    const Vector resid = A * coef - b;
    return {resid.cwiseAbs().maxCoeff(), nodes.size()};
}

/// Boundary data c* |x|^2 / 2 + amplitude (r/R)^mode sin(mode theta), with
/// (r, theta) polar coordinates in the x1-x2 plane: a harmonic extension of
/// amplitude * sin(mode theta) on the circle of radius R.
inline ScalarField rigidity_boundary(double c_star, double radius, Perturbation pert) {
    return [=](std::span<const double> x) {
        double r2 = 0.0;
        for (double v : x) r2 += v * v;
        double g = 0.5 * c_star * r2;
        if (pert.amplitude != 0.0) {
            const double rr = std::hypot(x[0], x[1]);
            const double th = std::atan2(x[1], x[0]);
            g += pert.amplitude * std::pow(rr / radius, pert.mode) * std::sin(pert.mode * th);
        }
        return g;
    };
}

inline RigidityReport rigidity_experiment(const OperatorSpec& op, std::span<const double> radii, Perturbation pert,
                                          double h, double inner_radius = 1.0, const SolveOptions& opts = {}) {
    for (std::size_t i = 1; i < radii.size(); ++i)
        if (!(radii[i] > radii[i - 1])) fail(ErrorKind::InvalidInput, "rigidity_experiment: radii must increase");
    RigidityReport rep;
    rep.c_star = solve_isotropic_level(op, 1.0);
    for (double R : radii) {
        DirichletProblem p;
        p.op = op;
        p.domain = Ball{Point(static_cast<std::size_t>(op.n()), 0.0), R};
        p.h = h;
        p.psi = [](std::span<const double>) { return 1.0; };
        p.boundary = rigidity_boundary(rep.c_star, R, pert);
        p.condition = Condition::One;
        SolveOptions o = opts;
        o.alphas.clear();
        const auto sol = newton_solve(p, o);
        RigidityRow row;
        row.radius = R;
        row.residual_inf = sol.residual_inf;
        row.newton_iters = sol.newton_iters;
        std::tie(row.deviation, row.inner_nodes) = quadratic_fit_deviation(*sol.disc, sol.u, inner_radius);
        rep.rows.push_back(row);
    }
    return rep;
}

} // namespace shl
