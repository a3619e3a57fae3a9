// Row-decoupled Bellman problems sup_P { -A(P) U + y(P) } = 0 and their
// solvers: policy iteration, epsilon-policy iteration, row scaling, and
// restriction to control subsets.
#ifndef QVI_BELLMAN_HPP
#define QVI_BELLMAN_HPP

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "qvi/linear_solve.hpp"
#include "qvi/sparse.hpp"

namespace qvi {

// One sparse row of A(P) together with the matching entry of y(P).
struct BellmanRow {
    std::vector<std::pair<int, double>> coeffs;
    double rhs = 0.0;

    void clear() {
        coeffs.clear();
        rhs = 0.0;
    }
    void add(int col, double v) { coeffs.emplace_back(col, v); }
    double apply(std::span<const double> u) const {
        double acc = 0.0;
        for (const auto& [c, v] : coeffs) acc += v * u[static_cast<size_t>(c)];
        return acc;
    }
};

// Row i of A(P) and y(P) depend only on the i-th control; controls per row
// are indexed 0 .. control_count(i)-1 and enumeration order is the
// tie-breaking order everywhere.
class BellmanProblem {
public:
    virtual ~BellmanProblem() = default;

    virtual int size() const = 0;
    virtual int control_count(int row) const = 0;
    virtual void evaluate(int row, int control, BellmanRow& out) const = 0;

    // rhs - A_i . u for one candidate control
    double control_value(int row, int control, std::span<const double> u, BellmanRow& scratch) const {
        evaluate(row, control, scratch);
        return scratch.rhs - scratch.apply(u);
    }

    // argmax over the row's controls; first maximizer wins. Subclasses may
    // override with an equivalent but cheaper computation.
    virtual int best_control(int row, std::span<const double> u, double* value,
                             BellmanRow& scratch) const;
};

using Policy = std::vector<int>;

Policy improve_policy(const BellmanProblem& prob, std::span<const double> u);
Vec residual(const BellmanProblem& prob, std::span<const double> u);
void assemble(const BellmanProblem& prob, const Policy& p, SparseMatrix& a, Vec& y);

// eps^k = scale / k^exponent; summability requires exponent > 1.
struct EpsSchedule {
    double scale = 1.0;
    double exponent = 2.0;
    double at(int k) const;
    void validate() const;
};

struct IterationConfig {
    double tolerance = 1e-6; // relative stopping criterion between iterates
    double scale = 1.0;      // floor in the relative criterion denominator
    int max_iterations = 1000;
    EpsSchedule eps{};
    double linear_rtol = 1e-10;
    bool debug_check_m_matrix = false;
    std::ostream* iteration_log = nullptr; // JSON lines {iter, residual_inf, linear_iters}
};

struct SolveStats {
    int policy_iterations = 0;    // number of linear solves
    long linear_iterations = 0;   // cumulative inner-solver iterations
    std::vector<int> per_iteration_linear;
    double final_residual = 0.0;  // ||sup_P{-A U + y}||_inf at the returned iterate
};

struct SingularPolicyError : SolverError {
    SingularPolicyError(const std::string& what, std::vector<int> rows, Vec best)
        : SolverError(what, std::move(best)), suspect_rows(std::move(rows)) {}
    std::vector<int> suspect_rows;
};

struct NonconvergenceError : SolverError {
    using SolverError::SolverError;
};

// max_i |u_i - v_i| / max(|u_i|, scale) < tolerance
bool check_convergence(std::span<const double> u_new, std::span<const double> u_old,
                       const IterationConfig& cfg);

Vec policy_iteration(const BellmanProblem& prob, Vec u0, const IterationConfig& cfg,
                     SolveStats* stats = nullptr);

// Approximate policy improvement: must return, for every row, a control whose
// value is within eps of the row supremum at u.
using PolicyPicker =
    std::function<Policy(const BellmanProblem&, std::span<const double> u, int iter, double eps)>;

Vec eps_policy_iteration(const BellmanProblem& prob, Vec u0, const IterationConfig& cfg,
                         const PolicyPicker& picker = {}, SolveStats* stats = nullptr);

// Multiplies row i of A and y by s(i, control) > 0; the solution set is
// unchanged when the weights are bounded away from 0 and infinity.
class ScaledProblem : public BellmanProblem {
public:
    using Weight = std::function<double(int row, int control)>;
    ScaledProblem(const BellmanProblem& base, Weight weight);

    int size() const override { return base_.size(); }
    int control_count(int row) const override { return base_.control_count(row); }
    void evaluate(int row, int control, BellmanRow& out) const override;
    int best_control(int row, std::span<const double> u, double* value,
                     BellmanRow& scratch) const override;

private:
    const BellmanProblem& base_;
    Weight weight_;
};

// Keeps only controls satisfying the predicate; every row must stay nonempty.
class RestrictedProblem : public BellmanProblem {
public:
    using Keep = std::function<bool(int row, int control)>;
    RestrictedProblem(const BellmanProblem& base, const Keep& keep);

    int size() const override { return base_.size(); }
    int control_count(int row) const override;
    void evaluate(int row, int control, BellmanRow& out) const override;
    int base_control(int row, int control) const;

private:
    const BellmanProblem& base_;
    std::vector<std::vector<int>> kept_;
};

} // namespace qvi

#endif
