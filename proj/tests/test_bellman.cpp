#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "qvi/bellman.hpp"
#include "support/dense_oracle.hpp"
#include "support/generators.hpp"

using namespace qvi;
using namespace qvi::testing;

namespace {

// one-state problem with scalar controls: A(p) = [a(p)], y(p) = [y(p)]
class ScalarBellman : public BellmanProblem {
public:
    ScalarBellman(Vec as, Vec ys) : as_(std::move(as)), ys_(std::move(ys)) {}
    int size() const override { return 1; }
    int control_count(int) const override { return static_cast<int>(as_.size()); }
    void evaluate(int, int k, BellmanRow& out) const override {
        out.clear();
        out.add(0, as_[static_cast<size_t>(k)]);
        out.rhs = ys_[static_cast<size_t>(k)];
    }

private:
    Vec as_, ys_;
};

Vec solve_exact(const BellmanProblem& prob, const IterationConfig& cfg = {}) {
    return policy_iteration(prob, Vec(static_cast<size_t>(prob.size()), 0.0), cfg);
}

} // namespace

TEST_CASE("improve_policy picks the row argmax with first-wins ties") {
    // 1x1, controls {1, 2}: -A(p)U + y(p) at U = 0 equals y = p; picks p = 2
    const ScalarBellman prob({1.0, 2.0}, {1.0, 2.0});
    const Policy p = improve_policy(prob, Vec{0.0});
    CHECK(p[0] == 1);

    // singleton control set
    const ScalarBellman single({2.0}, {4.0});
    CHECK(improve_policy(single, Vec{0.0})[0] == 0);

    // exact tie resolves to the first control
    const ScalarBellman tie({1.0, 1.0}, {3.0, 3.0});
    CHECK(improve_policy(tie, Vec{0.5})[0] == 0);
}

TEST_CASE("policy iteration on a singleton control set is one linear solve") {
    std::mt19937 rng(1);
    RandomMonotoneBellman prob(6, 1, rng);
    SolveStats st;
    const Vec u = policy_iteration(prob, Vec(6, 0.0), {}, &st);
    CHECK(st.policy_iterations == 1);

    // U = A^{-1} y per the dense oracle
    SparseMatrix a;
    Vec y;
    assemble(prob, improve_policy(prob, u), a, y);
    const auto want = dense_solve(to_dense(a), y);
    REQUIRE(want.has_value());
    for (int i = 0; i < 6; ++i)
        CHECK(u[static_cast<size_t>(i)] == doctest::Approx((*want)[static_cast<size_t>(i)]).epsilon(1e-9));
}

TEST_CASE("residual vanishes at the solution and is deterministic") {
    std::mt19937 rng(2);
    RandomMonotoneBellman prob(8, 3, rng);
    const Vec u = solve_exact(prob);
    const Vec r = residual(prob, u);
    for (double v : r) CHECK(std::abs(v) <= 1e-9);
    CHECK(residual(prob, u) == r); // bit-identical on recomputation
}

TEST_CASE("check_convergence") {
    IterationConfig cfg;
    cfg.tolerance = 1e-6;
    cfg.scale = 1.0;
    CHECK(check_convergence(Vec{1.0, 2.0}, Vec{1.0, 2.0}, cfg));
    CHECK(!check_convergence(Vec{1.001, 2.0}, Vec{1.0, 2.0}, cfg));
    // relative criterion dominates for large values
    const double big = 1e6;
    CHECK(check_convergence(Vec{big * (1 + 5e-7)}, Vec{big}, cfg));
    CHECK_THROWS_AS(check_convergence(Vec{1.0}, Vec{1.0, 2.0}, cfg), std::invalid_argument);
}

TEST_CASE("policy iteration properties on random monotone instances") {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> unif(-5.0, 5.0);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 29);
        RandomMonotoneBellman prob(n, 5, rng);
        IterationConfig cfg;
        cfg.tolerance = 1e-10;

        // independent initial guesses agree at the fixed point
        Vec ref;
        for (int guess = 0; guess < 3; ++guess) {
            Vec u0(static_cast<size_t>(n));
            for (auto& v : u0) v = unif(rng);
            SolveStats st;
            const Vec u = policy_iteration(prob, u0, cfg, &st);
            CHECK(st.policy_iterations <= prob.policy_space_size());
            if (guess == 0) {
                ref = u;
            } else {
                for (int i = 0; i < n; ++i)
                    CHECK(std::abs(u[static_cast<size_t>(i)] - ref[static_cast<size_t>(i)]) <= 1e-8);
            }
        }

        // iterates are nondecreasing after the first step (convergence from below)
        SparseMatrix a;
        Vec y;
        Vec u(static_cast<size_t>(n));
        for (auto& v : u) v = unif(rng);
        Vec prev;
        for (int iter = 0; iter < 50; ++iter) {
            assemble(prob, improve_policy(prob, u), a, y);
            const auto next = dense_solve(to_dense(a), y);
            REQUIRE(next.has_value());
            if (iter >= 1)
                for (int i = 0; i < n; ++i)
                    CHECK((*next)[static_cast<size_t>(i)] >= u[static_cast<size_t>(i)] - 1e-9);
            prev = u;
            u = *next;
            if (iter >= 1 && check_convergence(u, prev, cfg)) break;
        }
    }
}

TEST_CASE("finite control product converges within |P| iterations") {
    // 2 rows x 2 controls each: |P| = 4
    std::mt19937 rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        RandomMonotoneBellman prob(2, 2, rng);
        SolveStats st;
        policy_iteration(prob, Vec(2, 0.0), {}, &st);
        CHECK(st.policy_iterations <= 4);
    }
}

TEST_CASE("eps policy iteration") {
    std::mt19937 rng(7);
    RandomMonotoneBellman prob(10, 4, rng);
    IterationConfig cfg;
    cfg.tolerance = 1e-10;

    const Vec exact = policy_iteration(prob, Vec(10, 0.0), cfg);

    SUBCASE("exact picker reproduces the fixed point") {
        const Vec u = eps_policy_iteration(prob, Vec(10, 0.0), cfg);
        for (int i = 0; i < 10; ++i)
            CHECK(u[static_cast<size_t>(i)] == doctest::Approx(exact[static_cast<size_t>(i)]).epsilon(1e-8));
    }

    SUBCASE("subsampled picker with summable slack converges") {
        // evaluate only a subset of each row's controls, grown with the
        // iteration count so the slack is eventually 0 <= eps^k
        PolicyPicker picker = [](const BellmanProblem& p, std::span<const double> u, int iter,
                                 double) {
            Policy out(static_cast<size_t>(p.size()));
            BellmanRow scratch;
            for (int i = 0; i < p.size(); ++i) {
                const int nc = p.control_count(i);
                const int stride = std::max(1, nc / std::min(iter, nc));
                int best = 0;
                double best_v = -std::numeric_limits<double>::infinity();
                for (int k = 0; k < nc; k += stride) {
                    const double v = p.control_value(i, k, u, scratch);
                    if (v > best_v) {
                        best_v = v;
                        best = k;
                    }
                }
                out[static_cast<size_t>(i)] = best;
            }
            return out;
        };
        const Vec u = eps_policy_iteration(prob, Vec(10, 0.0), cfg, picker);
        for (int i = 0; i < 10; ++i)
            CHECK(std::abs(u[static_cast<size_t>(i)] - exact[static_cast<size_t>(i)]) <= 1e-6);
    }

    SUBCASE("non-summable slack sequences are rejected") {
        IterationConfig bad = cfg;
        bad.eps.exponent = 1.0; // sum 1/k diverges
        CHECK_THROWS_AS(eps_policy_iteration(prob, Vec(10, 0.0), bad), std::invalid_argument);
    }
}

TEST_CASE("scaling leaves the solution set unchanged") {
    std::mt19937 rng(123);
    std::uniform_real_distribution<double> wdist(0.1, 10.0);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 10);
        RandomMonotoneBellman prob(n, 4, rng);
        IterationConfig cfg;
        cfg.tolerance = 1e-10;
        const Vec base = solve_exact(prob, cfg);

        // s == 1 is the identity
        ScaledProblem unit(prob, [](int, int) { return 1.0; });
        const Vec same = solve_exact(unit, cfg);
        for (int i = 0; i < n; ++i)
            CHECK(same[static_cast<size_t>(i)] == doctest::Approx(base[static_cast<size_t>(i)]).epsilon(1e-9));

        // random positive weights per (row, control)
        std::vector<Vec> weights(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < prob.control_count(i); ++k)
                weights[static_cast<size_t>(i)].push_back(wdist(rng));
        ScaledProblem scaled(prob, [&](int row, int control) {
            return weights[static_cast<size_t>(row)][static_cast<size_t>(control)];
        });
        const Vec u = solve_exact(scaled, cfg);
        for (int i = 0; i < n; ++i)
            CHECK(std::abs(u[static_cast<size_t>(i)] - base[static_cast<size_t>(i)]) <= 1e-6);
    }

    ScalarBellman one({2.0}, {4.0});
    ScaledProblem doubled(one, [](int, int) { return 2.0; });
    CHECK(solve_exact(doubled)[0] == doctest::Approx(2.0));
    ScaledProblem negative(one, [](int, int) { return -1.0; });
    BellmanRow row;
    CHECK_THROWS_AS(negative.evaluate(0, 0, row), std::invalid_argument);
}

TEST_CASE("restriction to control subsets") {
    std::mt19937 rng(55);
    RandomMonotoneBellman prob(6, 4, rng);
    IterationConfig cfg;
    cfg.tolerance = 1e-10;

    // keep everything: same problem
    RestrictedProblem all(prob, [](int, int) { return true; });
    const Vec base = solve_exact(prob, cfg);
    const Vec same = solve_exact(all, cfg);
    for (int i = 0; i < 6; ++i)
        CHECK(same[static_cast<size_t>(i)] == doctest::Approx(base[static_cast<size_t>(i)]).epsilon(1e-9));

    // restriction that keeps only the first control per row still solves its
    // own problem; the full-set residual quantifies the (possible) gap
    RestrictedProblem first(prob, [](int, int k) { return k == 0; });
    const Vec u = solve_exact(first, cfg);
    const Vec r = residual(first, u);
    for (double v : r) CHECK(std::abs(v) <= 1e-8);

    CHECK_THROWS_AS(RestrictedProblem(prob, [](int, int) { return false; }),
                    std::invalid_argument);
}

TEST_CASE("solver failure modes") {
    // singular policy matrix: row of zeros
    class Singular : public BellmanProblem {
    public:
        int size() const override { return 2; }
        int control_count(int) const override { return 1; }
        void evaluate(int row, int, BellmanRow& out) const override {
            out.clear();
            out.add(row, row == 0 ? 0.0 : 1.0);
            out.rhs = 1.0;
        }
    };
    CHECK_THROWS_AS(policy_iteration(Singular{}, Vec(2, 0.0), {}), SingularPolicyError);

    // the debug check names the offending rows before the solve
    IterationConfig dbg;
    dbg.debug_check_m_matrix = true;
    try {
        policy_iteration(Singular{}, Vec(2, 0.0), dbg);
        FAIL("expected SingularPolicyError");
    } catch (const SingularPolicyError& e) {
        CHECK(!e.suspect_rows.empty());
    }

    // max_iterations exhausts: the error carries the last iterate
    std::mt19937 rng(31);
    RandomMonotoneBellman prob(12, 4, rng);
    IterationConfig tight;
    tight.tolerance = 1e-14;
    tight.max_iterations = 1;
    CHECK_THROWS_AS(policy_iteration(prob, Vec(12, 0.0), tight), NonconvergenceError);
}

TEST_CASE("iteration log emits json lines") {
    std::mt19937 rng(8);
    RandomMonotoneBellman prob(5, 3, rng);
    std::stringstream log;
    IterationConfig cfg;
    cfg.iteration_log = &log;
    policy_iteration(prob, Vec(5, 0.0), cfg);
    std::string line;
    int lines = 0;
    while (std::getline(log, line)) {
        CHECK(line.find("\"iter\":") != std::string::npos);
        CHECK(line.find("\"residual_inf\":") != std::string::npos);
        CHECK(line.find("\"linear_iters\":") != std::string::npos);
        ++lines;
    }
    CHECK(lines >= 1);
}
