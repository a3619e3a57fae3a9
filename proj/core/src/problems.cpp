#include "qvi/problems.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qvi {

namespace {

int scaled_count(int base, double h) {
    const double v = base / h;
    const int n = static_cast<int>(std::lround(v));
    if (n < 1 || std::abs(v - n) > 1e-9)
        throw std::invalid_argument("benchmark level must refine the base counts integrally");
    return n;
}

} // namespace

Benchmark build_fex(const FexParams& p, double h) {
    if (!(p.fixed_cost > 0)) throw std::invalid_argument("build_fex: fixed cost must be positive");
    const double R = p.radius;
    const int cells = scaled_count(p.base_cells, h);
    const int steps = scaled_count(p.base_timesteps, h);
    const int nw = scaled_count(p.base_w, h);
    const int nz = scaled_count(p.base_z, h);

    TensorGrid grid(build_uniform_grid(R, cells));
    TimeGrid time(p.horizon, steps);

    // impulse destinations: their own partition of [-R, R] (z = dest - x
    // spans the truncated control set [-R - x, R - x]); optionally the
    // spatial nodes themselves
    // impulse destinations: the spatial nodes themselves (z = x_j - x_i spans
    // the truncated control set [-R - x, R - x]); optionally an independent
    // uniform partition of [-R, R] with the tabulated count
    Vec dests = p.partition_destinations ? discretize_interval(-R, R, nz)
                                         : Vec(grid.axis(0).points().begin(),
                                               grid.axis(0).points().end());

    ImpulseProblem prob;
    prob.dim = 1;
    prob.horizon = p.horizon;
    prob.drift = [mu = p.mu](int, double, const State&, double w) { return -mu * w; };
    prob.diffusion = [sigma = p.sigma](int, double, const State&, double) { return sigma; };
    prob.reward = [p](double t, const State& x, double w) {
        const double dx = x[0] - p.target;
        return -std::exp(-p.beta * t) * (dx * dx + p.gamma * w * w);
    };
    prob.terminal = [](const State&) { return 0.0; };
    prob.transition = [](double, const State& x, double z) { return State{x[0] + z, 0.0}; };
    prob.impulse_reward = [p](double t, const State&, double z) {
        return -std::exp(-p.beta * t) * (p.kappa * std::abs(z) + p.fixed_cost);
    };
    prob.stochastic_controls = discretize_interval(-p.w_max, p.w_max, nw);
    prob.impulse_controls = [dests](double, const State& x) {
        Vec zs(dests.size());
        for (size_t j = 0; j < dests.size(); ++j) zs[j] = dests[j] - x[0];
        return zs;
    };
    prob.time_independent = true;
    prob.strict_negative_costs = true;

    Benchmark b{std::move(prob), std::move(grid), time, SchemeConfig{}, State{p.target, 0.0}};

    // Direct-control restriction: impulses point toward the target without
    // overshooting it and the target node itself never jumps, which makes
    // every restricted policy matrix w.c.d.d.
    Vec coords(b.grid.axis(0).points().begin(), b.grid.axis(0).points().end());
    const double m = p.target;
    const double tol = 1e-12 * std::max(1.0, R);
    b.scheme.direct_restriction = [coords, m, tol](int node, int d, double, double z) {
        if (d == 0) return true;
        const double x = coords[static_cast<size_t>(node)];
        if (std::abs(x - m) <= tol) return false;
        if (x < m) return z > tol && x + z <= m + tol;
        return z < -tol && x + z >= m - tol;
    };
    return b;
}

namespace {

// Feasible impulse range for the consumption problem at (s, q): the single
// interval whose ends come from the domain box; interior points can still
// violate the q' >= 0 constraint when q < c, so candidates are filtered.
struct ConsumptionImpulses {
    double kappa, fixed_cost, rs, rq;
    int count;

    Vec operator()(double, const State& x) const {
        const double s = x[0], q = x[1];
        const double lo = std::max(-s, (q - fixed_cost - rq) / (1.0 - kappa));
        const double hi = std::min(rs - s, (q - fixed_cost) / (1.0 + kappa));
        if (lo > hi) return {};
        Vec out;
        const double tol = 1e-12 * std::max(1.0, rq);
        for (double z : discretize_interval(lo, hi, count)) {
            const double q_new = q - z - kappa * std::abs(z) - fixed_cost;
            const double s_new = s + z;
            if (q_new < -tol || q_new > rq + tol) continue;
            if (s_new < -tol || s_new > rs + tol) continue;
            if (!out.empty() && z == out.back()) continue;
            out.push_back(z);
        }
        return out;
    }
};

ImpulseProblem consumption_problem(const ConsumptionParams& p, int nw, int nz, bool infinite) {
    ImpulseProblem prob;
    prob.dim = 2;
    prob.horizon = p.horizon;
    prob.discount = infinite ? p.beta : 0.0;
    prob.drift = [p](int axis, double, const State& x, double w) {
        if (axis == 0) return p.mu * x[0];
        return p.r * x[1] - (x[1] > 0 ? w : 0.0);
    };
    prob.diffusion = [p](int axis, double, const State& x, double) {
        return axis == 0 ? p.sigma * x[0] : 0.0;
    };
    if (infinite) {
        prob.reward = [p](double, const State& x, double w) {
            return x[1] > 0 ? std::pow(w, p.gamma) / p.gamma : 0.0;
        };
    } else {
        prob.reward = [p](double t, const State& x, double w) {
            return x[1] > 0 ? std::exp(-p.beta * t) * std::pow(w, p.gamma) / p.gamma : 0.0;
        };
    }
    prob.terminal = [p](const State& x) {
        const double net = x[1] + (1.0 - p.kappa) * x[0] - p.fixed_cost;
        return std::exp(-p.beta * p.horizon) * std::pow(std::max(net, 0.0), p.gamma) / p.gamma;
    };
    prob.transition = [p](double, const State& x, double z) {
        const double s_new = std::clamp(x[0] + z, 0.0, p.radius_s);
        const double q_new =
            std::clamp(x[1] - z - p.kappa * std::abs(z) - p.fixed_cost, 0.0, p.radius_q);
        return State{s_new, q_new};
    };
    prob.impulse_reward = [](double, const State&, double) { return 0.0; };
    prob.stochastic_controls = discretize_interval(0.0, p.w_max, nw);
    prob.impulse_controls =
        ConsumptionImpulses{p.kappa, p.fixed_cost, p.radius_s, p.radius_q, nz};
    // consumption keeps draining the account at q = R_q: the backward
    // difference stays active there, only the inflow stencil is suppressed
    prob.boundary[1][1] = BoundaryStencil::upwind_inward;
    prob.time_independent = true;
    prob.strict_negative_costs = false; // K = 0 (weak form; costs sit in the transition)
    return prob;
}

} // namespace

Benchmark build_consumption(const ConsumptionParams& p, double h) {
    const int ns = scaled_count(p.base_s, h);
    const int nq = scaled_count(p.base_q, h);
    const int nw = scaled_count(p.base_w, h);
    const int nz = scaled_count(p.base_z, h);
    const int steps = scaled_count(p.base_timesteps, h);

    TensorGrid grid(build_interval_grid(0.0, p.radius_s, ns + 1),
                    build_interval_grid(0.0, p.radius_q, nq + 1));
    TimeGrid time(p.horizon, steps);
    ImpulseProblem prob = consumption_problem(p, nw, nz, false);
    return Benchmark{std::move(prob), std::move(grid), time, SchemeConfig{}, State{p.s0, p.q0}};
}

Benchmark build_infinite_consumption(const ConsumptionParams& p, double h) {
    if (!(p.beta > 0)) throw std::invalid_argument("build_infinite_consumption: beta must be positive");
    const int ns = scaled_count(p.base_s, h);
    const int nq = scaled_count(p.base_q, h);
    const int nw = scaled_count(p.base_w, h);
    const int nz = scaled_count(p.base_z, h);

    TensorGrid grid(build_interval_grid(0.0, p.radius_s, ns + 1),
                    build_interval_grid(0.0, p.radius_q, nq + 1));
    ImpulseProblem prob = consumption_problem(p, nw, nz, true);
    Benchmark b{std::move(prob), std::move(grid), TimeGrid{}, SchemeConfig{}, State{p.s0, p.q0}};
    b.scheme.penalty_eps_infinite = 1e-2 * h; // eps -> 0 with the mesh
    return b;
}

namespace {

// 65-node investment axis used by the GMWB benchmark at the base level
// (for radius_s = 1000); concentrated around the initial payment s = 100.
Vec gmwb_base_axis(double radius_s) {
    Vec axis = {0.0,   5.0,   10.0,  15.0,  20.0,  25.0,  30.0,  35.0,  40.0,  45.0,  50.0,
                55.0,  60.0,  65.0,  70.0,  72.5,  75.0,  77.5,  80.0,  82.0,  84.0,  86.0,
                88.0,  90.0,  91.0,  92.0,  93.0,  94.0,  95.0,  96.0,  97.0,  98.0,  99.0,
                100.0, 101.0, 102.0, 103.0, 104.0, 105.0, 106.0, 107.0, 108.0, 109.0, 110.0,
                112.0, 114.0, 116.0, 118.0, 120.0, 123.0, 126.0, 130.0, 135.0, 140.0, 145.0,
                150.0, 160.0, 175.0, 200.0, 225.0, 250.0, 300.0, 500.0, 750.0, 1000.0};
    for (double& x : axis) x *= radius_s / 1000.0;
    return axis;
}

Vec refine_midpoints(Vec pts, int times) {
    for (int t = 0; t < times; ++t) {
        Vec out;
        out.reserve(2 * pts.size());
        for (size_t i = 0; i + 1 < pts.size(); ++i) {
            out.push_back(pts[i]);
            out.push_back(0.5 * (pts[i] + pts[i + 1]));
        }
        out.push_back(pts.back());
        pts = std::move(out);
    }
    return pts;
}

} // namespace

Benchmark build_gmwb(const GmwbParams& p, double h) {
    const int ns = scaled_count(p.base_s, h);
    const int nq = scaled_count(p.base_q, h);
    const int nz = scaled_count(p.base_z, h);
    const int steps = scaled_count(p.base_timesteps, h);
    const int levels = static_cast<int>(std::lround(std::log2(1.0 / h)));

    SpaceGrid s_axis = p.uniform_s
                           ? build_interval_grid(0.0, p.radius_s, ns + 1)
                           : SpaceGrid(refine_midpoints(gmwb_base_axis(p.radius_s), levels));
    TensorGrid grid(std::move(s_axis), build_interval_grid(0.0, p.radius_q, nq + 1));
    TimeGrid time(p.horizon, steps);

    const double rs = p.radius_s;
    ImpulseProblem prob;
    prob.dim = 2;
    prob.horizon = p.horizon;
    prob.drift = [p](int axis, double, const State& x, double w) {
        if (axis == 0) return (p.r - p.eta) * x[0] - (x[0] > 0 && x[1] > 0 ? w : 0.0);
        return x[1] > 0 ? -w : 0.0;
    };
    prob.diffusion = [p](int axis, double, const State& x, double) {
        return axis == 0 ? p.sigma * x[0] : 0.0;
    };
    // asymptotically linear in s: at s = R_s the operator degrades to
    // ((r - eta) s - w 1{s,q>0}) V / s
    prob.zeroth_order = [p, rs](double, const State& x, double w) {
        if (x[0] < rs * (1.0 - 1e-12)) return 0.0;
        return ((p.r - p.eta) * x[0] - (x[1] > 0 ? w : 0.0)) / x[0];
    };
    prob.reward = [p](double t, const State& x, double w) {
        return x[1] > 0 ? std::exp(-p.r * t) * w : 0.0;
    };
    prob.terminal = [p](const State& x) {
        return std::exp(-p.r * p.horizon) *
               std::max(x[0], (1.0 - p.kappa) * x[1] - p.fixed_cost);
    };
    prob.transition = [](double, const State& x, double z) {
        return State{std::max(x[0] - z, 0.0), x[1] - z};
    };
    prob.impulse_reward = [p](double t, const State&, double z) {
        return std::exp(-p.r * t) * ((1.0 - p.kappa) * z - p.fixed_cost);
    };
    prob.stochastic_controls = {0.0, p.w_max};
    prob.impulse_controls = [nz](double, const State& x) {
        if (x[1] <= 0.0) return Vec{0.0};
        Vec zs = discretize_interval(0.0, x[1], nz);
        zs.erase(std::unique(zs.begin(), zs.end()), zs.end());
        return zs;
    };
    // no artificial condition at q = R_q: the q-characteristics are outgoing
    prob.boundary[1][1] = BoundaryStencil::upwind_inward;
    prob.time_independent = true;
    prob.strict_negative_costs = false; // withdrawals carry positive cashflows
    // undiscounted worst case: the asymptotic-linear row at s = R_s grows
    // back to R_s by t = 0, plus the maximum withdrawals and guarantee
    const double g_norm = std::max(p.radius_s, (1.0 - p.kappa) * p.radius_q - p.fixed_cost);
    prob.stability_bound_override = g_norm + p.w_max * p.horizon + p.radius_q;

    return Benchmark{std::move(prob), std::move(grid), time, SchemeConfig{}, State{100.0, 100.0}};
}

// ---------------------------------------------------------------------------
// MDP bridge

MdpBellman::MdpBellman(MdpSpec spec) : spec_(std::move(spec)) {
    const int n = spec_.size();
    if (n == 0) throw std::invalid_argument("MdpBellman: empty state space");
    for (int i = 0; i < n; ++i) {
        const auto& controls = spec_.states[static_cast<size_t>(i)];
        if (controls.empty()) throw std::invalid_argument("MdpBellman: state without controls");
        for (const auto& c : controls) {
            if (static_cast<int>(c.transition.size()) != n)
                throw std::invalid_argument("MdpBellman: transition row size mismatch");
            double sum = 0.0;
            for (double t : c.transition) {
                if (t < 0) throw std::invalid_argument("MdpBellman: negative transition probability");
                sum += t;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw std::invalid_argument("MdpBellman: transition row must sum to one");
            if (c.discount < 0 || c.discount > 1)
                throw std::invalid_argument("MdpBellman: discount must lie in [0, 1]");
        }
    }
}

int MdpBellman::control_count(int row) const {
    return static_cast<int>(spec_.states[static_cast<size_t>(row)].size());
}

void MdpBellman::evaluate(int row, int control, BellmanRow& out) const {
    const auto& c = spec_.states[static_cast<size_t>(row)][static_cast<size_t>(control)];
    out.clear();
    out.add(row, 1.0 - c.transition[static_cast<size_t>(row)] * c.discount);
    for (int j = 0; j < size(); ++j) {
        if (j == row) continue;
        const double t = c.transition[static_cast<size_t>(j)];
        if (t != 0.0) out.add(j, -t * c.discount);
    }
    out.rhs = c.reward;
}

MdpBellman build_mdp(MdpSpec spec) { return MdpBellman(std::move(spec)); }

MdpSpec random_discounted_mdp(int states, int max_controls, double max_discount,
                              std::mt19937& rng) {
    std::uniform_int_distribution<int> control_count(1, max_controls);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    MdpSpec spec;
    spec.states.resize(static_cast<size_t>(states));
    for (auto& controls : spec.states) {
        const int nc = control_count(rng);
        for (int k = 0; k < nc; ++k) {
            MdpControlSpec c;
            c.transition.resize(static_cast<size_t>(states));
            double sum = 0.0;
            for (auto& t : c.transition) {
                t = -std::log(1.0 - uniform(rng) + 1e-12);
                sum += t;
            }
            for (auto& t : c.transition) t /= sum;
            // renormalize exactly so validation at 1e-12 passes
            double check = 0.0;
            for (size_t j = 0; j + 1 < c.transition.size(); ++j) check += c.transition[j];
            c.transition.back() = 1.0 - check;
            c.reward = 2.0 * uniform(rng) - 1.0;
            c.discount = max_discount * (0.2 + 0.8 * uniform(rng));
            controls.push_back(std::move(c));
        }
    }
    return spec;
}

} // namespace qvi
