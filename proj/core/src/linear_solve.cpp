#include "qvi/linear_solve.hpp"

#include <cmath>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

namespace qvi {

bool is_tridiagonal(const SparseMatrix& a) {
    for (int i = 0; i < a.size(); ++i)
        for (int c : a.row_cols(i))
            if (std::abs(c - i) > 1) return false;
    return true;
}

Vec solve_tridiagonal(const SparseMatrix& a, std::span<const double> b) {
    const int n = a.size();
    if (static_cast<int>(b.size()) != n) throw std::invalid_argument("solve_tridiagonal: size mismatch");
    if (!is_tridiagonal(a)) throw SolverError("solve_tridiagonal: matrix is not tridiagonal");

    Vec sub(static_cast<size_t>(n), 0.0), diag(static_cast<size_t>(n), 0.0), sup(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        const auto cols = a.row_cols(i);
        const auto vals = a.row_values(i);
        for (size_t k = 0; k < cols.size(); ++k) {
            if (cols[k] == i - 1) sub[static_cast<size_t>(i)] = vals[k];
            else if (cols[k] == i) diag[static_cast<size_t>(i)] = vals[k];
            else sup[static_cast<size_t>(i)] = vals[k];
        }
    }

    double scale = 0.0;
    for (int i = 0; i < n; ++i)
        scale = std::max(scale, std::abs(sub[static_cast<size_t>(i)]) +
                                    std::abs(diag[static_cast<size_t>(i)]) +
                                    std::abs(sup[static_cast<size_t>(i)]));

    Vec c(static_cast<size_t>(n)), d(static_cast<size_t>(n));
    double pivot = diag[0];
    if (std::abs(pivot) <= 1e-14 * scale) throw SolverError("solve_tridiagonal: zero pivot");
    c[0] = sup[0] / pivot;
    d[0] = b[0] / pivot;
    for (int i = 1; i < n; ++i) {
        const size_t k = static_cast<size_t>(i);
        pivot = diag[k] - sub[k] * c[k - 1];
        if (std::abs(pivot) <= 1e-14 * scale) throw SolverError("solve_tridiagonal: zero pivot");
        c[k] = sup[k] / pivot;
        d[k] = (b[k] - sub[k] * d[k - 1]) / pivot;
    }
    Vec x(static_cast<size_t>(n));
    x[static_cast<size_t>(n) - 1] = d[static_cast<size_t>(n) - 1];
    for (int i = n - 2; i >= 0; --i) {
        const size_t k = static_cast<size_t>(i);
        x[k] = d[k] - c[k] * x[k + 1];
    }
    return x;
}

struct IterativeSolver::Impl {
    Eigen::SparseMatrix<double> a;
    Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> solver;
    bool ready = false;
};

IterativeSolver::IterativeSolver() : impl_(std::make_unique<Impl>()) {
    impl_->solver.preconditioner().setDroptol(1e-4);
    impl_->solver.preconditioner().setFillfactor(10);
}

IterativeSolver::~IterativeSolver() = default;
IterativeSolver::IterativeSolver(IterativeSolver&&) noexcept = default;
IterativeSolver& IterativeSolver::operator=(IterativeSolver&&) noexcept = default;

void IterativeSolver::set_matrix(const SparseMatrix& a) {
    const int n = a.size();
    std::vector<Eigen::Triplet<double>> ts;
    ts.reserve(static_cast<size_t>(a.nnz()));
    for (int i = 0; i < n; ++i) {
        const auto cols = a.row_cols(i);
        const auto vals = a.row_values(i);
        for (size_t k = 0; k < cols.size(); ++k) ts.emplace_back(i, cols[k], vals[k]);
    }
    impl_->a.resize(n, n);
    impl_->a.setFromTriplets(ts.begin(), ts.end());
    impl_->solver.compute(impl_->a);
    if (impl_->solver.info() != Eigen::Success)
        throw SolverError("solve_iterative: preconditioner factorization failed");
    impl_->ready = true;
}

IterativeResult IterativeSolver::solve(std::span<const double> b, std::span<const double> x0,
                                       double rtol) const {
    if (!impl_->ready) throw SolverError("solve_iterative: no matrix set");
    const int n = static_cast<int>(impl_->a.rows());
    if (static_cast<int>(b.size()) != n || static_cast<int>(x0.size()) != n)
        throw std::invalid_argument("solve_iterative: size mismatch");
    Eigen::VectorXd be = Eigen::Map<const Eigen::VectorXd>(b.data(), n);
    Eigen::VectorXd guess = Eigen::Map<const Eigen::VectorXd>(x0.data(), n);
    auto& solver = impl_->solver;
    solver.setTolerance(rtol);
    solver.setMaxIterations(std::max(400, 4 * n));
    Eigen::VectorXd xe = solver.solveWithGuess(be, guess);

    IterativeResult out;
    out.iterations = static_cast<int>(solver.iterations());
    out.x.assign(xe.data(), xe.data() + n);
    if (solver.info() != Eigen::Success) {
        // surface the best iterate so callers can diagnose the policy
        throw SolverError("solve_iterative: BiCGSTAB did not converge", std::move(out.x));
    }
    return out;
}

IterativeResult solve_iterative(const SparseMatrix& a, std::span<const double> b,
                                std::span<const double> x0, double rtol) {
    IterativeSolver s;
    s.set_matrix(a);
    return s.solve(b, x0, rtol);
}

} // namespace qvi
