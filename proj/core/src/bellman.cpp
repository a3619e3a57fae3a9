#include "qvi/bellman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace qvi {

int BellmanProblem::best_control(int row, std::span<const double> u, double* value,
                                 BellmanRow& scratch) const {
    const int count = control_count(row);
    if (count < 1) throw std::invalid_argument("BellmanProblem: empty control set");
    int best = 0;
    double best_value = control_value(row, 0, u, scratch);
    for (int k = 1; k < count; ++k) {
        const double v = control_value(row, k, u, scratch);
        if (v > best_value) {
            best_value = v;
            best = k;
        }
    }
    if (value) *value = best_value;
    return best;
}

Policy improve_policy(const BellmanProblem& prob, std::span<const double> u) {
    const int n = prob.size();
    if (static_cast<int>(u.size()) != n) throw std::invalid_argument("improve_policy: size mismatch");
    Policy p(static_cast<size_t>(n));
    BellmanRow scratch;
    for (int i = 0; i < n; ++i) p[static_cast<size_t>(i)] = prob.best_control(i, u, nullptr, scratch);
    return p;
}

Vec residual(const BellmanProblem& prob, std::span<const double> u) {
    const int n = prob.size();
    Vec r(static_cast<size_t>(n));
    BellmanRow scratch;
    for (int i = 0; i < n; ++i) {
        double v = 0.0;
        prob.best_control(i, u, &v, scratch);
        r[static_cast<size_t>(i)] = v;
    }
    return r;
}

void assemble(const BellmanProblem& prob, const Policy& p, SparseMatrix& a, Vec& y) {
    const int n = prob.size();
    if (static_cast<int>(p.size()) != n) throw std::invalid_argument("assemble: policy size mismatch");
    std::vector<Triplet> ts;
    y.assign(static_cast<size_t>(n), 0.0);
    BellmanRow row;
    for (int i = 0; i < n; ++i) {
        prob.evaluate(i, p[static_cast<size_t>(i)], row);
        for (const auto& [c, v] : row.coeffs) ts.push_back({i, c, v});
        y[static_cast<size_t>(i)] = row.rhs;
    }
    a = SparseMatrix::from_triplets(n, ts);
}

double EpsSchedule::at(int k) const { return scale / std::pow(static_cast<double>(k), exponent); }

void EpsSchedule::validate() const {
    if (!(scale > 0)) throw std::invalid_argument("EpsSchedule: scale must be positive");
    if (!(exponent > 1))
        throw std::invalid_argument("EpsSchedule: exponent must exceed 1 (summability)");
}

bool check_convergence(std::span<const double> u_new, std::span<const double> u_old,
                       const IterationConfig& cfg) {
    if (u_new.size() != u_old.size()) throw std::invalid_argument("check_convergence: size mismatch");
    double worst = 0.0;
    for (size_t i = 0; i < u_new.size(); ++i) {
        const double denom = std::max(std::abs(u_new[i]), cfg.scale);
        worst = std::max(worst, std::abs(u_new[i] - u_old[i]) / denom);
    }
    return worst < cfg.tolerance;
}

namespace {

double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Shared driver: exact policy iteration uses the problem's argmax; the
// epsilon variant delegates the policy choice to a picker.
Vec run_policy_iteration(const BellmanProblem& prob, Vec u, const IterationConfig& cfg,
                         const PolicyPicker* picker, SolveStats* stats) {
    const int n = prob.size();
    if (static_cast<int>(u.size()) != n)
        throw std::invalid_argument("policy_iteration: initial guess size mismatch");
    if (picker) cfg.eps.validate();

    SolveStats local;
    SolveStats& st = stats ? *stats : local;
    st = SolveStats{};

    SparseMatrix a;
    Vec y;
    Policy prev_policy;
    IterativeSolver solver;

    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
        Policy p = picker ? (*picker)(prob, u, iter, cfg.eps.at(iter)) : improve_policy(prob, u);

        // exact improvement cannot beat the previous policy's own system
        if (!picker && !prev_policy.empty() && p == prev_policy) break;

        assemble(prob, p, a, y);

        if (cfg.debug_check_m_matrix) {
            const auto d = diagnose(a);
            if (!d.is_m_matrix())
                throw SingularPolicyError("policy_iteration: A(P) is not an M-matrix",
                                          d.unreachable_rows, u);
        }

        Vec u_next;
        int linear_its = 0;
        try {
            solver.set_matrix(a);
            auto res = solver.solve(y, u, cfg.linear_rtol);
            u_next = std::move(res.x);
            linear_its = res.iterations;
        } catch (const SolverError& e) {
            const auto d = diagnose(a);
            throw SingularPolicyError(std::string("policy_iteration: linear solve failed (") +
                                          e.what() + ")",
                                      d.unreachable_rows, u);
        }

        st.policy_iterations += 1;
        st.linear_iterations += linear_its;
        st.per_iteration_linear.push_back(linear_its);

        const bool converged = iter > 1 && check_convergence(u_next, u, cfg);
        if (cfg.iteration_log) {
            Vec diff(u_next.size());
            for (size_t i = 0; i < diff.size(); ++i) diff[i] = u_next[i] - u[i];
            (*cfg.iteration_log) << "{\"iter\":" << iter << ",\"residual_inf\":" << inf_norm(diff)
                                 << ",\"linear_iters\":" << linear_its << "}\n";
        }
        u = std::move(u_next);
        prev_policy = std::move(p);
        if (converged) break;
        if (iter == cfg.max_iterations)
            throw NonconvergenceError("policy_iteration: max iterations reached", u);
    }

    st.final_residual = inf_norm(residual(prob, u));
    return u;
}

} // namespace

Vec policy_iteration(const BellmanProblem& prob, Vec u0, const IterationConfig& cfg,
                     SolveStats* stats) {
    return run_policy_iteration(prob, std::move(u0), cfg, nullptr, stats);
}

Vec eps_policy_iteration(const BellmanProblem& prob, Vec u0, const IterationConfig& cfg,
                         const PolicyPicker& picker, SolveStats* stats) {
    static const PolicyPicker exact = [](const BellmanProblem& p, std::span<const double> u, int,
                                         double) { return improve_policy(p, u); };
    const PolicyPicker& use = picker ? picker : exact;
    return run_policy_iteration(prob, std::move(u0), cfg, &use, stats);
}

ScaledProblem::ScaledProblem(const BellmanProblem& base, Weight weight)
    : base_(base), weight_(std::move(weight)) {
    if (!weight_) throw std::invalid_argument("ScaledProblem: missing weight function");
}

void ScaledProblem::evaluate(int row, int control, BellmanRow& out) const {
    base_.evaluate(row, control, out);
    const double s = weight_(row, control);
    if (!(s > 0)) throw std::invalid_argument("ScaledProblem: weights must be positive");
    for (auto& [c, v] : out.coeffs) v *= s;
    out.rhs *= s;
}

int ScaledProblem::best_control(int row, std::span<const double> u, double* value,
                                BellmanRow& scratch) const {
    // scaling is per (row, control), so the base argmax cannot be reused;
    // scan the scaled values directly
    return BellmanProblem::best_control(row, u, value, scratch);
}

RestrictedProblem::RestrictedProblem(const BellmanProblem& base, const Keep& keep) : base_(base) {
    if (!keep) throw std::invalid_argument("RestrictedProblem: missing predicate");
    kept_.resize(static_cast<size_t>(base.size()));
    for (int i = 0; i < base.size(); ++i) {
        auto& row = kept_[static_cast<size_t>(i)];
        for (int k = 0; k < base.control_count(i); ++k)
            if (keep(i, k)) row.push_back(k);
        if (row.empty())
            throw std::invalid_argument("RestrictedProblem: row " + std::to_string(i) +
                                        " has no admissible controls");
    }
}

int RestrictedProblem::control_count(int row) const {
    return static_cast<int>(kept_[static_cast<size_t>(row)].size());
}

int RestrictedProblem::base_control(int row, int control) const {
    return kept_[static_cast<size_t>(row)][static_cast<size_t>(control)];
}

void RestrictedProblem::evaluate(int row, int control, BellmanRow& out) const {
    base_.evaluate(row, base_control(row, control), out);
}

} // namespace qvi
