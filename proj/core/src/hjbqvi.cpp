#include "qvi/hjbqvi.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace qvi {

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Sparse row of -L^w at one node: diagonal coefficient plus up to two
// neighbors per axis. Boundary rules: the second difference vanishes at the
// axis ends; one-sided first differences vanish there too unless the side is
// marked upwind_inward and the drift points into the domain.
struct OpRow {
    double diag = 0.0;
    int count = 0;
    std::array<std::pair<int, double>, 6> nb{}; // 2 axes x (2 diffusion + 1 drift)

    void add(int node, double v) { nb[static_cast<size_t>(count++)] = {node, v}; }
    double apply(std::span<const double> u, int self) const {
        double acc = diag * u[static_cast<size_t>(self)];
        for (int k = 0; k < count; ++k) {
            const auto& [node, coef] = nb[static_cast<size_t>(k)];
            acc += coef * u[static_cast<size_t>(node)];
        }
        return acc;
    }
};

OpRow continuation_row(const ImpulseProblem& prob, const TensorGrid& grid, int node, double t,
                       double w) {
    OpRow row;
    const auto idx = grid.unflatten(node);
    const State x = grid.coords(node);
    for (int axis = 0; axis < grid.dim(); ++axis) {
        const SpaceGrid& g = grid.axis(axis);
        const int ia = idx[static_cast<size_t>(axis)];
        const int m = g.cells();
        const int stride = (grid.dim() == 2 && axis == 0) ? grid.axis(1).nodes() : 1;
        const bool lower = ia == 0, upper = ia == m;

        const double b = prob.diffusion ? prob.diffusion(axis, t, x, w) : 0.0;
        const double a = prob.drift ? prob.drift(axis, t, x, w) : 0.0;

        if (!lower && !upper && b != 0.0) {
            const double ha = g[ia] - g[ia - 1];
            const double hb = g[ia + 1] - g[ia];
            const double cl = 2.0 / (ha * (ha + hb));
            const double cr = 2.0 / (hb * (ha + hb));
            const double half_bb = 0.5 * b * b;
            row.diag += half_bb * (cl + cr);
            row.add(node - stride, -half_bb * cl);
            row.add(node + stride, -half_bb * cr);
        }
        if (a != 0.0) {
            // one-sided differences vanish at the axis ends; upwind_inward
            // keeps the difference that stays in-domain
            const bool forward = a > 0.0;
            bool allowed = !lower && !upper;
            if (!allowed) {
                const BoundaryStencil bs = prob.boundary[static_cast<size_t>(axis)][lower ? 0 : 1];
                if (bs == BoundaryStencil::upwind_inward) allowed = forward ? !upper : !lower;
            }
            if (allowed) {
                if (forward) {
                    const double hb = g[ia + 1] - g[ia];
                    row.diag += a / hb;
                    row.add(node + stride, -a / hb);
                } else {
                    const double ha = g[ia] - g[ia - 1];
                    row.diag += -a / ha;
                    row.add(node - stride, a / ha);
                }
            }
        }
    }
    if (prob.zeroth_order) row.diag += -prob.zeroth_order(t, grid.coords(node), w);
    return row;
}

struct InterpRow {
    int count = 0;
    std::array<std::pair<int, double>, 4> w{};
    void add(int node, double v) { w[static_cast<size_t>(count++)] = {node, v}; }
    double apply(std::span<const double> u) const {
        double acc = 0.0;
        for (int k = 0; k < count; ++k) acc += w[static_cast<size_t>(k)].second * u[static_cast<size_t>(w[static_cast<size_t>(k)].first)];
        return acc;
    }
};

InterpRow interp_row(const TensorGrid& grid, const State& x) {
    InterpRow out;
    if (grid.dim() == 1) {
        const auto w0 = interp_weights(grid.axis(0), x[0]);
        out.add(w0.k, 1.0 - w0.alpha);
        out.add(w0.k + 1, w0.alpha);
        return out;
    }
    const auto w0 = interp_weights(grid.axis(0), x[0]);
    const auto w1 = interp_weights(grid.axis(1), x[1]);
    const int n1 = grid.axis(1).nodes();
    out.add(w0.k * n1 + w1.k, (1 - w0.alpha) * (1 - w1.alpha));
    out.add(w0.k * n1 + w1.k + 1, (1 - w0.alpha) * w1.alpha);
    out.add((w0.k + 1) * n1 + w1.k, w0.alpha * (1 - w1.alpha));
    out.add((w0.k + 1) * n1 + w1.k + 1, w0.alpha * w1.alpha);
    return out;
}

} // namespace

InterventionValue apply_intervention(const ImpulseProblem& prob, const TensorGrid& grid,
                                     std::span<const double> u, double t, int node) {
    const State x = grid.coords(node);
    const auto zs = prob.impulse_controls(t, x);
    if (zs.empty()) throw std::invalid_argument("apply_intervention: empty impulse control set");
    double best = -std::numeric_limits<double>::infinity();
    double best_z = zs.front();
    for (double z : zs) {
        const State dest = prob.transition(t, x, z);
        const double v = interpolate(u, grid, dest) + prob.impulse_reward(t, x, z);
        if (v > best) {
            best = v;
            best_z = z;
        }
    }
    return {best, best_z};
}

Vec terminal_layer(const ImpulseProblem& prob, const TensorGrid& grid,
                   std::vector<std::string>* warnings) {
    const int n = grid.nodes();
    Vec g(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) g[static_cast<size_t>(i)] = prob.terminal(grid.coords(i));
    // the explicit terminal condition V(T,.) = g requires M g <= g
    int violations = 0;
    double worst = 0.0;
    for (int i = 0; prob.impulse_controls && i < n; ++i) {
        const auto zs = prob.impulse_controls(prob.horizon, grid.coords(i));
        if (zs.empty()) continue;
        const auto mv = apply_intervention(prob, grid, g, prob.horizon, i);
        const double excess = mv.value - g[static_cast<size_t>(i)];
        if (excess > 1e-9) {
            ++violations;
            worst = std::max(worst, excess);
        }
    }
    if (violations > 0 && warnings) {
        warnings->push_back("terminal condition: M g <= g violated at " +
                            std::to_string(violations) + " nodes (worst excess " +
                            std::to_string(worst) + ")");
    }
    return g;
}

// ---------------------------------------------------------------------------
// SchemeBellman

struct SchemeBellman::WTemplate {
    OpRow op;
    double f = 0.0;
};

struct SchemeBellman::ZTemplate {
    InterpRow w;
    double reward = 0.0;
    double z = 0.0;
};

struct SchemeBellman::Impl {
    const ImpulseProblem& prob;
    const TensorGrid& grid;
    Scheme kind;
    bool infinite;
    double time_coef;
    ControlFilter filter;
    double impulse_scale;

    bool geometry_built = false;
    std::vector<int> w_off, z_off;      // row -> offset
    std::vector<int> w_idx;             // kept stochastic-control indices
    std::vector<WTemplate> wt;
    std::vector<ZTemplate> zt;

    double tau = 0.0;
    double eps_inv = 0.0;
    const Vec* v_prev = nullptr;

    Impl(const ImpulseProblem& p, const TensorGrid& g, Scheme k, bool inf_h, double tc,
         ControlFilter f, double scale)
        : prob(p), grid(g), kind(k), infinite(inf_h), time_coef(tc), filter(std::move(f)),
          impulse_scale(scale) {}

    int rows() const { return grid.nodes(); }
    int w_count(int row) const { return w_off[static_cast<size_t>(row) + 1] - w_off[static_cast<size_t>(row)]; }
    int z_count(int row) const { return z_off[static_cast<size_t>(row) + 1] - z_off[static_cast<size_t>(row)]; }

    double y0(int row) const {
        return infinite ? 0.0 : time_coef * (*v_prev)[static_cast<size_t>(row)];
    }

    void build_geometry() {
        const int n = rows();
        const double nan = std::numeric_limits<double>::quiet_NaN();
        w_off.assign(1, 0);
        z_off.assign(1, 0);
        w_idx.clear();
        wt.clear();
        zt.clear();
        const auto& ws = prob.stochastic_controls;
        for (int i = 0; i < n; ++i) {
            const State x = grid.coords(i);
            for (int k = 0; k < static_cast<int>(ws.size()); ++k) {
                if (filter && !filter(i, 0, ws[static_cast<size_t>(k)], nan)) continue;
                w_idx.push_back(k);
                WTemplate t;
                t.op = continuation_row(prob, grid, i, tau, ws[static_cast<size_t>(k)]);
                wt.push_back(t);
            }
            w_off.push_back(static_cast<int>(w_idx.size()));
            if (w_count(i) == 0)
                throw std::invalid_argument("SchemeBellman: row " + std::to_string(i) +
                                            " has no admissible continuation controls");

            const auto zs = prob.impulse_controls ? prob.impulse_controls(tau, x)
                                                  : DiscreteControlSet{};
            for (double z : zs) {
                if (filter && !filter(i, 1, nan, z)) continue;
                ZTemplate t;
                t.w = interp_row(grid, prob.transition(tau, x, z));
                t.z = z;
                zt.push_back(t);
            }
            z_off.push_back(static_cast<int>(zt.size()));
        }
        geometry_built = true;
    }

    void refresh_values() {
        const auto& ws = prob.stochastic_controls;
        for (int i = 0; i < rows(); ++i) {
            const State x = grid.coords(i);
            for (int p = w_off[static_cast<size_t>(i)]; p < w_off[static_cast<size_t>(i) + 1]; ++p)
                wt[static_cast<size_t>(p)].f =
                    prob.reward(tau, x, ws[static_cast<size_t>(w_idx[static_cast<size_t>(p)])]);
            for (int p = z_off[static_cast<size_t>(i)]; p < z_off[static_cast<size_t>(i) + 1]; ++p)
                zt[static_cast<size_t>(p)].reward =
                    prob.impulse_reward(tau, x, zt[static_cast<size_t>(p)].z) -
                    prob.intervention_relaxation;
        }
    }
};

SchemeBellman::SchemeBellman(const ImpulseProblem& prob, const TensorGrid& grid, Scheme kind,
                             bool infinite_horizon, double time_coefficient,
                             const ControlFilter& filter, double impulse_row_scale)
    : impl_(std::make_shared<Impl>(prob, grid, kind, infinite_horizon, time_coefficient, filter,
                                   impulse_row_scale)) {
    if (kind == Scheme::explicit_impulse)
        throw std::invalid_argument("SchemeBellman: explicit-impulse is not a Bellman scheme");
    if (prob.stochastic_controls.empty())
        throw std::invalid_argument("SchemeBellman: empty stochastic control set");
}

void SchemeBellman::set_step(double tau, const Vec* v_prev, double eps) {
    auto& im = *impl_;
    if (!im.infinite && !v_prev)
        throw std::invalid_argument("SchemeBellman: finite-horizon step needs the previous layer");
    im.tau = tau;
    im.v_prev = v_prev;
    if (im.kind == Scheme::penalty) {
        if (!(eps > 0)) throw std::invalid_argument("SchemeBellman: penalty parameter must be positive");
        im.eps_inv = 1.0 / eps;
    }
    if (!im.geometry_built || !im.prob.time_independent) im.build_geometry();
    im.refresh_values();
}

int SchemeBellman::size() const { return impl_->rows(); }

int SchemeBellman::control_count(int row) const {
    const auto& im = *impl_;
    const int nw = im.w_count(row);
    const int nz = im.z_count(row);
    return im.kind == Scheme::direct_control ? nw + nz : nw + nw * nz;
}

void SchemeBellman::evaluate(int row, int control, BellmanRow& out) const {
    const auto& im = *impl_;
    const int nw = im.w_count(row);
    const int nz = im.z_count(row);
    out.clear();
    if (control < nw) {
        const auto& t = im.wt[static_cast<size_t>(im.w_off[static_cast<size_t>(row)] + control)];
        out.add(row, im.time_coef + t.op.diag);
        for (int k = 0; k < t.op.count; ++k)
            out.add(t.op.nb[static_cast<size_t>(k)].first, t.op.nb[static_cast<size_t>(k)].second);
        out.rhs = im.y0(row) + t.f;
        return;
    }
    const int rest = control - nw;
    if (im.kind == Scheme::direct_control) {
        if (rest >= nz) throw std::out_of_range("SchemeBellman: control index out of range");
        const auto& t = im.zt[static_cast<size_t>(im.z_off[static_cast<size_t>(row)] + rest)];
        const double s = im.impulse_scale;
        out.add(row, s);
        for (int k = 0; k < t.w.count; ++k)
            out.add(t.w.w[static_cast<size_t>(k)].first, -s * t.w.w[static_cast<size_t>(k)].second);
        out.rhs = s * t.reward;
        return;
    }
    // penalty: (w, z) pairs in w-major order
    if (rest >= nw * nz) throw std::out_of_range("SchemeBellman: control index out of range");
    const auto& t = im.wt[static_cast<size_t>(im.w_off[static_cast<size_t>(row)] + rest / nz)];
    const auto& zt = im.zt[static_cast<size_t>(im.z_off[static_cast<size_t>(row)] + rest % nz)];
    out.add(row, im.time_coef + t.op.diag + im.eps_inv);
    for (int k = 0; k < t.op.count; ++k)
        out.add(t.op.nb[static_cast<size_t>(k)].first, t.op.nb[static_cast<size_t>(k)].second);
    for (int k = 0; k < zt.w.count; ++k)
        out.add(zt.w.w[static_cast<size_t>(k)].first, -im.eps_inv * zt.w.w[static_cast<size_t>(k)].second);
    out.rhs = im.y0(row) + t.f + im.eps_inv * zt.reward;
}

int SchemeBellman::best_control(int row, std::span<const double> u, double* value,
                                BellmanRow& /*scratch*/) const {
    const auto& im = *impl_;
    const int nw = im.w_count(row);
    const int nz = im.z_count(row);
    const double ui = u[static_cast<size_t>(row)];

    // best continuation control
    int best_w = 0;
    double best_cont = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < nw; ++k) {
        const auto& t = im.wt[static_cast<size_t>(im.w_off[static_cast<size_t>(row)] + k)];
        double neighbors = 0.0;
        for (int j = 0; j < t.op.count; ++j) {
            const auto& [node, coef] = t.op.nb[static_cast<size_t>(j)];
            neighbors += coef * u[static_cast<size_t>(node)];
        }
        const double v = im.y0(row) + t.f - (im.time_coef + t.op.diag) * ui - neighbors;
        if (v > best_cont) {
            best_cont = v;
            best_w = k;
        }
    }
    if (nz == 0) {
        if (value) *value = best_cont;
        return best_w;
    }

    // best intervention: max_z { K + interp(u, Gamma) - u_i }
    int best_z = 0;
    double best_m = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < nz; ++k) {
        const auto& t = im.zt[static_cast<size_t>(im.z_off[static_cast<size_t>(row)] + k)];
        const double v = t.reward + t.w.apply(u) - ui;
        if (v > best_m) {
            best_m = v;
            best_z = k;
        }
    }

    if (im.kind == Scheme::direct_control) {
        const double v1 = im.impulse_scale * best_m;
        if (v1 > best_cont) {
            if (value) *value = v1;
            return nw + best_z;
        }
        if (value) *value = best_cont;
        return best_w;
    }
    const double v1 = best_cont + im.eps_inv * best_m;
    if (v1 > best_cont) {
        if (value) *value = v1;
        return nw + best_w * nz + best_z;
    }
    if (value) *value = best_cont;
    return best_w;
}

NodeControl SchemeBellman::decode(int row, int control) const {
    const auto& im = *impl_;
    const int nw = im.w_count(row);
    const int nz = im.z_count(row);
    NodeControl out;
    const auto& ws = im.prob.stochastic_controls;
    if (control < nw) {
        out.d = 0;
        out.w = ws[static_cast<size_t>(
            im.w_idx[static_cast<size_t>(im.w_off[static_cast<size_t>(row)] + control)])];
        return out;
    }
    const int rest = control - nw;
    out.d = 1;
    if (im.kind == Scheme::direct_control) {
        out.z = im.zt[static_cast<size_t>(im.z_off[static_cast<size_t>(row)] + rest)].z;
    } else {
        out.w = ws[static_cast<size_t>(
            im.w_idx[static_cast<size_t>(im.w_off[static_cast<size_t>(row)] + rest / nz)])];
        out.z = im.zt[static_cast<size_t>(im.z_off[static_cast<size_t>(row)] + rest % nz)].z;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Explicit-impulse scheme

namespace {

struct ExplicitCache {
    SparseMatrix a;
    IterativeSolver solver;
    bool built = false;
    bool tridiagonal = false;
};

// characteristic foot x + a dt, with the displacement suppressed on
// artificial-Neumann boundary sides
State semi_lagrangian_foot(const ImpulseProblem& prob, const TensorGrid& grid,
                           const std::array<int, 2>& idx, const State& x, double tau, double dt,
                           double w) {
    State foot = x;
    for (int axis = 0; axis < grid.dim(); ++axis) {
        const SpaceGrid& g = grid.axis(axis);
        const int ia = idx[static_cast<size_t>(axis)];
        const bool lower = ia == 0, upper = ia == g.cells();
        if ((lower &&
             prob.boundary[static_cast<size_t>(axis)][0] == BoundaryStencil::neumann_zero) ||
            (upper && prob.boundary[static_cast<size_t>(axis)][1] == BoundaryStencil::neumann_zero))
            continue;
        foot[static_cast<size_t>(axis)] += (prob.drift ? prob.drift(axis, tau, x, w) : 0.0) * dt;
    }
    return foot;
}

void build_explicit_matrix(const ImpulseProblem& prob, const TensorGrid& grid, double tau,
                           double dt, ExplicitCache& cache) {
    const int n = grid.nodes();
    const double w0 = prob.stochastic_controls.front();
    std::vector<Triplet> ts;
    ts.reserve(static_cast<size_t>(3 * n));
    for (int i = 0; i < n; ++i) {
        ts.push_back({i, i, 1.0});
        const auto idx = grid.unflatten(i);
        const State x = grid.coords(i);
        for (int axis = 0; axis < grid.dim(); ++axis) {
            const SpaceGrid& g = grid.axis(axis);
            const int ia = idx[static_cast<size_t>(axis)];
            if (ia == 0 || ia == g.cells()) continue;
            const double b = prob.diffusion ? prob.diffusion(axis, tau, x, w0) : 0.0;
            if (b == 0.0) continue;
            const int stride = (grid.dim() == 2 && axis == 0) ? grid.axis(1).nodes() : 1;
            const double ha = g[ia] - g[ia - 1];
            const double hb = g[ia + 1] - g[ia];
            const double cl = 2.0 / (ha * (ha + hb));
            const double cr = 2.0 / (hb * (ha + hb));
            const double coef = 0.5 * dt * b * b;
            ts.push_back({i, i, coef * (cl + cr)});
            ts.push_back({i, i - stride, -coef * cl});
            ts.push_back({i, i + stride, -coef * cr});
        }
    }
    cache.a = SparseMatrix::from_triplets(n, ts);
    cache.tridiagonal = is_tridiagonal(cache.a);
    if (!cache.tridiagonal) cache.solver.set_matrix(cache.a);
    cache.built = true;
}

Vec explicit_rhs(const ImpulseProblem& prob, const TensorGrid& grid, double tau, double dt,
                 const Vec& v_prev) {
    const int n = grid.nodes();
    Vec y(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto idx = grid.unflatten(i);
        const State x = grid.coords(i);
        double best = -std::numeric_limits<double>::infinity();
        for (double w : prob.stochastic_controls) {
            const State foot = semi_lagrangian_foot(prob, grid, idx, x, tau, dt, w);
            double v = interpolate(v_prev, grid, foot) + prob.reward(tau, x, w) * dt;
            if (prob.zeroth_order)
                v += prob.zeroth_order(tau, x, w) * v_prev[static_cast<size_t>(i)] * dt;
            best = std::max(best, v);
        }
        if (prob.impulse_controls) {
            const auto zs = prob.impulse_controls(tau, x);
            if (!zs.empty())
                best = std::max(best, apply_intervention(prob, grid, v_prev, tau, i).value -
                                          prob.intervention_relaxation);
        }
        y[static_cast<size_t>(i)] = best;
    }
    return y;
}

} // namespace

Solution solve_finite_horizon(const ImpulseProblem& prob, const TensorGrid& grid,
                              const TimeGrid& tg, const SchemeConfig& scfg,
                              const IterationConfig& icfg) {
    Solution sol;
    sol.layers.reserve(static_cast<size_t>(tg.steps) + 1);
    sol.layers.push_back(terminal_layer(prob, grid, &sol.warnings));
    const double dt = tg.dt();

    if (scfg.scheme == Scheme::explicit_impulse) {
        if (prob.diffusion_control_dependent)
            throw std::invalid_argument(
                "explicit-impulse scheme requires a control-independent diffusion");
        ExplicitCache cache;
        for (int n = 1; n <= tg.steps; ++n) {
            const double t0 = now_seconds();
            const double tau = tg.tau(n);
            if (!cache.built || !prob.time_independent) {
                build_explicit_matrix(prob, grid, tau, dt, cache);
                if (icfg.debug_check_m_matrix && !diagnose(cache.a).is_sdd)
                    throw SolverError("explicit-impulse: system matrix is not s.d.d.");
            }
            Vec y = explicit_rhs(prob, grid, tau, dt, sol.layers.back());
            StepStats st;
            if (cache.tridiagonal) {
                sol.layers.push_back(solve_tridiagonal(cache.a, y));
            } else {
                auto res = cache.solver.solve(y, sol.layers.back(), icfg.linear_rtol);
                st.linear_iterations = res.iterations;
                sol.layers.push_back(std::move(res.x));
            }
            st.seconds = now_seconds() - t0;
            sol.steps.push_back(st);
        }
    } else {
        const double time_coef = 1.0 / dt;
        const bool direct = scfg.scheme == Scheme::direct_control;
        const double impulse_scale =
            direct && scfg.scale_direct_rows ? 1.0 / (scfg.direct_scaling_delta * dt) : 1.0;
        SchemeBellman bell(prob, grid, scfg.scheme, false, time_coef,
                           direct ? scfg.direct_restriction : ControlFilter{}, impulse_scale);
        for (int n = 1; n <= tg.steps; ++n) {
            const double t0 = now_seconds();
            bell.set_step(tg.tau(n), &sol.layers.back(), scfg.penalty_scale * dt);
            SolveStats stats;
            Vec u = policy_iteration(bell, sol.layers.back(), icfg, &stats);
            sol.layers.push_back(std::move(u));
            sol.steps.push_back(
                {stats.policy_iterations, stats.linear_iterations, now_seconds() - t0});
        }
    }

    const double bound = prob.stability_bound_override
                             ? *prob.stability_bound_override
                             : stability_bound(prob, grid, tg);
    for (int n = 0; n <= tg.steps; ++n) {
        const double norm = inf_norm(sol.layers[static_cast<size_t>(n)]);
        if (norm > bound + 1e-8) {
            sol.warnings.push_back("stability bound violated at layer " + std::to_string(n) +
                                   ": " + std::to_string(norm) + " > " + std::to_string(bound));
        }
    }
    return sol;
}

std::pair<Vec, SolveStats> solve_infinite_horizon(const ImpulseProblem& prob,
                                                  const TensorGrid& grid,
                                                  const SchemeConfig& scfg,
                                                  const IterationConfig& icfg,
                                                  std::vector<std::string>* warnings) {
    if (!(prob.discount > 0))
        throw std::invalid_argument("solve_infinite_horizon: discount must be positive");
    if (scfg.scheme == Scheme::explicit_impulse)
        throw std::invalid_argument("solve_infinite_horizon: explicit-impulse is not applicable");
    const bool direct = scfg.scheme == Scheme::direct_control;
    const double impulse_scale =
        direct && scfg.scale_direct_rows ? prob.discount / scfg.direct_scaling_delta : 1.0;
    SchemeBellman bell(prob, grid, scfg.scheme, true, prob.discount,
                       direct ? scfg.direct_restriction : ControlFilter{}, impulse_scale);
    bell.set_step(0.0, nullptr, scfg.penalty_eps_infinite);
    SolveStats stats;
    Vec u = policy_iteration(bell, Vec(static_cast<size_t>(grid.nodes()), 0.0), icfg, &stats);
    const double bound = prob.stability_bound_override
                             ? *prob.stability_bound_override
                             : stability_bound_infinite(prob, grid);
    if (warnings && inf_norm(u) > bound + 1e-8)
        warnings->push_back("stability bound violated: " + std::to_string(inf_norm(u)) + " > " +
                            std::to_string(bound));
    return {std::move(u), stats};
}

std::vector<NodeControl> recover_controls(const ImpulseProblem& prob, const TensorGrid& grid,
                                          const TimeGrid& tg, const Solution& sol, int n,
                                          const SchemeConfig& scfg) {
    if (n < 1 || n >= static_cast<int>(sol.layers.size()))
        throw std::invalid_argument("recover_controls: no solved layer at this index");
    const double tau = tg.tau(n);
    const Vec& v_prev = sol.layers[static_cast<size_t>(n) - 1];
    const Vec& v = sol.layers[static_cast<size_t>(n)];
    std::vector<NodeControl> out(static_cast<size_t>(grid.nodes()));

    if (scfg.scheme == Scheme::explicit_impulse) {
        const double dt = tg.dt();
        for (int i = 0; i < grid.nodes(); ++i) {
            const auto idx = grid.unflatten(i);
            const State x = grid.coords(i);
            NodeControl c;
            double best = -std::numeric_limits<double>::infinity();
            for (double w : prob.stochastic_controls) {
                const State foot = semi_lagrangian_foot(prob, grid, idx, x, tau, dt, w);
                double val = interpolate(v_prev, grid, foot) + prob.reward(tau, x, w) * dt;
                if (prob.zeroth_order)
                    val += prob.zeroth_order(tau, x, w) * v_prev[static_cast<size_t>(i)] * dt;
                if (val > best) {
                    best = val;
                    c = NodeControl{w, 0, std::numeric_limits<double>::quiet_NaN()};
                }
            }
            if (prob.impulse_controls) {
                const auto zs = prob.impulse_controls(tau, x);
                if (!zs.empty()) {
                    const auto iv = apply_intervention(prob, grid, v_prev, tau, i);
                    if (iv.value > best) c = NodeControl{std::numeric_limits<double>::quiet_NaN(), 1, iv.z};
                }
            }
            out[static_cast<size_t>(i)] = c;
        }
        return out;
    }

    SchemeBellman bell(prob, grid, scfg.scheme, false, 1.0 / tg.dt(), ControlFilter{}, 1.0);
    bell.set_step(tau, &v_prev, scfg.penalty_scale * tg.dt());
    BellmanRow scratch;
    for (int i = 0; i < grid.nodes(); ++i)
        out[static_cast<size_t>(i)] = bell.decode(i, bell.best_control(i, v, nullptr, scratch));
    return out;
}

double stability_bound(const ImpulseProblem& prob, const TensorGrid& grid, const TimeGrid& tg) {
    double f_norm = 0.0, g_norm = 0.0;
    for (int i = 0; i < grid.nodes(); ++i) {
        const State x = grid.coords(i);
        g_norm = std::max(g_norm, std::abs(prob.terminal(x)));
        for (int n = 0; n <= tg.steps; ++n)
            for (double w : prob.stochastic_controls)
                f_norm = std::max(f_norm, std::abs(prob.reward(tg.tau(n), x, w)));
    }
    return f_norm * tg.horizon + g_norm;
}

double stability_bound_infinite(const ImpulseProblem& prob, const TensorGrid& grid) {
    double f_norm = 0.0;
    for (int i = 0; i < grid.nodes(); ++i)
        for (double w : prob.stochastic_controls)
            f_norm = std::max(f_norm, std::abs(prob.reward(0.0, grid.coords(i), w)));
    return f_norm / prob.discount;
}

double scheme_residual_probe(const ImpulseProblem& prob, const TensorGrid& grid,
                             const TimeGrid& tg, Scheme kind, int n, int node, const Vec& v_n,
                             const Vec& v_prev, double ell, double eps) {
    if (n == 0) return v_n[static_cast<size_t>(node)] - prob.terminal(grid.coords(node));
    const double dt = tg.dt();
    const double tau = tg.tau(n);
    const State x = grid.coords(node);
    const double vi = v_n[static_cast<size_t>(node)];
    double sup = -std::numeric_limits<double>::infinity();

    for (double w : prob.stochastic_controls) {
        const OpRow op = continuation_row(prob, grid, node, tau, w);
        const double gamma = (v_prev[static_cast<size_t>(node)] - vi) / dt - op.apply(v_n, node) +
                             prob.reward(tau, x, w);
        switch (kind) {
        case Scheme::direct_control:
            sup = std::max({sup, gamma, ell - vi});
            break;
        case Scheme::penalty:
            sup = std::max({sup, gamma, ell - vi + eps * gamma});
            break;
        case Scheme::explicit_impulse: {
            const auto idx = grid.unflatten(node);
            State foot = x;
            double diffusion_term = 0.0;
            for (int axis = 0; axis < grid.dim(); ++axis) {
                const SpaceGrid& g = grid.axis(axis);
                const int ia = idx[static_cast<size_t>(axis)];
                const bool lower = ia == 0, upper = ia == g.cells();
                const bool skip =
                    (lower && prob.boundary[static_cast<size_t>(axis)][0] ==
                                  BoundaryStencil::neumann_zero) ||
                    (upper && prob.boundary[static_cast<size_t>(axis)][1] ==
                                  BoundaryStencil::neumann_zero);
                if (!skip) foot[static_cast<size_t>(axis)] += prob.drift(axis, tau, x, w) * dt;
                if (!lower && !upper) {
                    const double b = prob.diffusion(axis, tau, x, w);
                    const double ha = g[ia] - g[ia - 1];
                    const double hb = g[ia + 1] - g[ia];
                    const int stride = (grid.dim() == 2 && axis == 0) ? grid.axis(1).nodes() : 1;
                    const double cl = 2.0 / (ha * (ha + hb));
                    const double cr = 2.0 / (hb * (ha + hb));
                    diffusion_term += 0.5 * b * b *
                                      (cl * v_n[static_cast<size_t>(node - stride)] -
                                       (cl + cr) * vi + cr * v_n[static_cast<size_t>(node + stride)]);
                }
            }
            const double cont = (interpolate(v_prev, grid, foot) - vi) / dt + diffusion_term +
                                prob.reward(tau, x, w);
            sup = std::max({sup, cont, ell - vi + diffusion_term * dt});
            break;
        }
        }
    }
    return -sup;
}

std::vector<int> validate_impulse_targets(const ImpulseProblem& prob, const TensorGrid& grid,
                                          std::span<const double> times) {
    std::vector<int> bad;
    if (!prob.impulse_controls) return bad;
    for (int i = 0; i < grid.nodes(); ++i) {
        const State x = grid.coords(i);
        bool ok = true;
        for (double t : times) {
            for (double z : prob.impulse_controls(t, x)) {
                const State dest = prob.transition(t, x, z);
                for (int axis = 0; axis < grid.dim(); ++axis) {
                    const SpaceGrid& g = grid.axis(axis);
                    const double lo = g.left(), hi = g.right();
                    const double tol = 1e-9 * std::max(1.0, std::abs(hi - lo));
                    if (dest[static_cast<size_t>(axis)] < lo - tol ||
                        dest[static_cast<size_t>(axis)] > hi + tol)
                        ok = false;
                }
            }
        }
        if (!ok) bad.push_back(i);
    }
    return bad;
}

} // namespace qvi
