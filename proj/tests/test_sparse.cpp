#include <doctest.h>

#include <random>
#include <sstream>

#include "qvi/linear_solve.hpp"
#include "qvi/sparse.hpp"
#include "support/dense_oracle.hpp"
#include "support/generators.hpp"

using namespace qvi;
using namespace qvi::testing;

namespace {

SparseMatrix identity(int n) {
    std::vector<Triplet> ts;
    for (int i = 0; i < n; ++i) ts.push_back({i, i, 1.0});
    return SparseMatrix::from_triplets(n, ts);
}

// lower bidiagonal with +1 diagonal and -1 subdiagonal; only row 0 is
// s.d.d. and every other row chains down to it
SparseMatrix chain_matrix(int n) {
    std::vector<Triplet> ts;
    for (int i = 0; i < n; ++i) {
        ts.push_back({i, i, 1.0});
        if (i > 0) ts.push_back({i, i - 1, -1.0});
    }
    return SparseMatrix::from_triplets(n, ts);
}

// every row sum zero, cyclic structure: singular
SparseMatrix cyclic_zero_sum(int n) {
    std::vector<Triplet> ts;
    for (int i = 0; i < n; ++i) {
        ts.push_back({i, i, 1.0});
        ts.push_back({i, (i + 1) % n, -1.0});
    }
    return SparseMatrix::from_triplets(n, ts);
}

} // namespace

TEST_CASE("row classification") {
    const auto id = classify_rows(identity(3));
    for (auto c : id) CHECK(c == RowClass::sdd);

    const auto wdd = classify_rows(
        SparseMatrix::from_triplets(2, std::vector<Triplet>{{0, 0, 1.0}, {0, 1, -1.0}, {1, 1, 1.0}}));
    CHECK(wdd[0] == RowClass::wdd_not_sdd);
    CHECK(wdd[1] == RowClass::sdd);

    const auto bad = classify_rows(
        SparseMatrix::from_triplets(2, std::vector<Triplet>{{0, 0, 1.0}, {0, 1, -2.0}, {1, 1, 1.0}}));
    CHECK(bad[0] == RowClass::not_wdd);

    // duplicate triplets are summed; explicit zeros are ignored
    const auto merged = SparseMatrix::from_triplets(
        2, std::vector<Triplet>{{0, 0, 0.5}, {0, 0, 0.5}, {0, 1, 0.0}, {1, 1, 1.0}});
    CHECK(merged.diagonal(0) == doctest::Approx(1.0));
    CHECK(classify_rows(merged)[0] == RowClass::sdd);
}

TEST_CASE("wcdd classification") {
    const auto chain = diagnose(chain_matrix(6));
    CHECK(chain.is_wcdd);
    CHECK(chain.sdd_rows == std::vector<int>{0});
    CHECK(chain.unreachable_rows.empty());
    CHECK(chain.is_m_matrix());

    const auto cyc = diagnose(cyclic_zero_sum(5));
    CHECK(cyc.is_wdd);
    CHECK(!cyc.is_wcdd);
    CHECK(cyc.unreachable_rows.size() == 5);
    CHECK(!cyc.is_m_matrix());
    CHECK(!is_nonsingular_m_matrix(cyclic_zero_sum(5)));

    CHECK(diagnose(identity(4)).is_wcdd);
    CHECK(is_nonsingular_m_matrix(identity(4)));
    CHECK(is_nonsingular_m_matrix(chain_matrix(8)));

    // a positive off-diagonal breaks the Z property, not the w.c.d.d. one
    const auto not_z = diagnose(SparseMatrix::from_triplets(
        2, std::vector<Triplet>{{0, 0, 2.0}, {0, 1, 1.0}, {1, 1, 1.0}}));
    CHECK(not_z.is_wcdd);
    CHECK(!not_z.is_z);
    CHECK(!not_z.is_m_matrix());
}

TEST_CASE("wcdd equivalence on random wdd Z-matrices") {
    // w.c.d.d. <=> nonsingular <=> inverse entrywise nonnegative
    std::mt19937 rng(2024);
    int singular_seen = 0, nonsingular_seen = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 7);
        const SparseMatrix a = random_wdd_z_matrix(n, rng);
        const auto diag = diagnose(a);
        REQUIRE(diag.is_wdd);
        REQUIRE(diag.is_z);
        REQUIRE(diag.nonneg_diag);
        const bool nonsingular = dense_rank(to_dense(a)) == n;
        CHECK(diag.is_wcdd == nonsingular);
        if (nonsingular) {
            ++nonsingular_seen;
            const auto inv = dense_inverse(to_dense(a));
            REQUIRE(inv.has_value());
            for (const auto& row : *inv)
                for (double v : row) CHECK(v >= -1e-9);
        } else {
            ++singular_seen;
        }
    }
    // the generator must exercise both branches
    CHECK(singular_seen > 20);
    CHECK(nonsingular_seen > 20);
}

TEST_CASE("tridiagonal solve") {
    const auto id = identity(4);
    const Vec b{1.0, -2.0, 0.5, 3.0};
    CHECK(solve_tridiagonal(id, b) == b);

    // diag 2, off-diagonals -1, b = (1,0,1) -> x = (1,1,1); dense oracle agrees
    const auto a = SparseMatrix::from_triplets(
        3, std::vector<Triplet>{{0, 0, 2.0}, {0, 1, -1.0}, {1, 0, -1.0}, {1, 1, 2.0},
                                {1, 2, -1.0}, {2, 1, -1.0}, {2, 2, 2.0}});
    const Vec rhs{1.0, 0.0, 1.0};
    const Vec x = solve_tridiagonal(a, rhs);
    const auto oracle = dense_solve(to_dense(a), rhs);
    REQUIRE(oracle.has_value());
    for (int i = 0; i < 3; ++i) {
        CHECK(x[static_cast<size_t>(i)] == doctest::Approx(1.0));
        CHECK(x[static_cast<size_t>(i)] == doctest::Approx((*oracle)[static_cast<size_t>(i)]));
    }

    // residual bound
    const Vec r = a.multiply(x);
    for (int i = 0; i < 3; ++i)
        CHECK(std::abs(r[static_cast<size_t>(i)] - rhs[static_cast<size_t>(i)]) < 1e-10);

    CHECK_THROWS_AS(solve_tridiagonal(cyclic_zero_sum(4), Vec(4, 1.0)), SolverError);

    const auto wide = SparseMatrix::from_triplets(
        3, std::vector<Triplet>{{0, 0, 1.0}, {0, 2, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}});
    CHECK_THROWS_AS(solve_tridiagonal(wide, Vec(3, 0.0)), SolverError);
}

TEST_CASE("iterative solve matches the dense oracle") {
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    // identity converges immediately
    auto res = solve_iterative(identity(5), Vec(5, 2.0), Vec(5, 0.0), 1e-12);
    CHECK(res.iterations <= 1);
    for (double v : res.x) CHECK(v == doctest::Approx(2.0));

    for (int trial = 0; trial < 10; ++trial) {
        const int n = 20 + static_cast<int>(rng() % 80);
        std::vector<Triplet> ts;
        for (int i = 0; i < n; ++i) {
            double off = 0.0;
            for (int j = 0; j < n; ++j) {
                if (j == i || unif(rng) > 4.0 / n) continue;
                const double v = 2.0 * unif(rng) - 1.0;
                ts.push_back({i, j, v});
                off += std::abs(v);
            }
            ts.push_back({i, i, off + 0.5 + unif(rng)});
        }
        const auto a = SparseMatrix::from_triplets(n, ts);
        Vec b(static_cast<size_t>(n));
        for (auto& v : b) v = 2.0 * unif(rng) - 1.0;

        const auto got = solve_iterative(a, b, Vec(static_cast<size_t>(n), 0.0), 1e-12);
        const auto want = dense_solve(to_dense(a), b);
        REQUIRE(want.has_value());
        double scale = 0.0, err = 0.0;
        for (int i = 0; i < n; ++i) {
            scale = std::max(scale, std::abs((*want)[static_cast<size_t>(i)]));
            err = std::max(err, std::abs(got.x[static_cast<size_t>(i)] -
                                         (*want)[static_cast<size_t>(i)]));
        }
        CHECK(err <= 1e-8 * std::max(scale, 1.0));
    }

    // singular input surfaces as a solver error
    std::vector<Triplet> zrow{{0, 0, 1.0}, {0, 1, -1.0}, {1, 1, 0.0}};
    CHECK_THROWS_AS(solve_iterative(SparseMatrix::from_triplets(2, zrow), Vec(2, 1.0),
                                    Vec(2, 0.0), 1e-12),
                    SolverError);
}

TEST_CASE("sdd implies wcdd implies nonsingular on generated matrices") {
    std::mt19937 rng(5150);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 7);
        const SparseMatrix a = random_wdd_z_matrix(n, rng);
        const auto d = diagnose(a);
        if (d.is_sdd) CHECK(d.is_wcdd);
        if (d.is_wcdd) CHECK(dense_rank(to_dense(a)) == n);
    }
}

TEST_CASE("coordinate text round trip") {
    std::mt19937 rng(3);
    const SparseMatrix a = random_wdd_z_matrix(6, rng);
    std::stringstream ss;
    a.write_coordinate(ss);
    const SparseMatrix b = SparseMatrix::read_coordinate(ss);
    REQUIRE(b.size() == a.size());
    REQUIRE(b.nnz() == a.nnz());
    const Vec probe(6, 1.0);
    CHECK(a.multiply(probe) == b.multiply(probe));
}
