// Linear solvers behind the timestepping schemes: a direct tridiagonal
// (Thomas) solve and preconditioned BiCGSTAB for everything else.
#ifndef QVI_LINEAR_SOLVE_HPP
#define QVI_LINEAR_SOLVE_HPP

#include <memory>
#include <stdexcept>
#include <string>

#include "qvi/sparse.hpp"

namespace qvi {

struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& what, Vec best = {})
        : std::runtime_error(what), best_iterate(std::move(best)) {}
    Vec best_iterate;
};

// Thomas elimination; requires a tridiagonal matrix with nonzero pivots.
Vec solve_tridiagonal(const SparseMatrix& a, std::span<const double> b);

bool is_tridiagonal(const SparseMatrix& a);

struct IterativeResult {
    Vec x;
    int iterations = 0;
};

// BiCGSTAB with an incomplete-LU (dual threshold) preconditioner.
// Factorization parameters are fixed for reproducibility: drop tolerance
// 1e-4, fill factor 10.
class IterativeSolver {
public:
    IterativeSolver();
    ~IterativeSolver();
    IterativeSolver(IterativeSolver&&) noexcept;
    IterativeSolver& operator=(IterativeSolver&&) noexcept;

    // Analyzes and factors; throws SolverError when the factorization breaks
    // down (e.g. a structurally singular matrix).
    void set_matrix(const SparseMatrix& a);

    // ||Ax - b||_2 <= rtol * ||b||_2 on success.
    IterativeResult solve(std::span<const double> b, std::span<const double> x0, double rtol) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

IterativeResult solve_iterative(const SparseMatrix& a, std::span<const double> b,
                                std::span<const double> x0, double rtol);

} // namespace qvi

#endif
