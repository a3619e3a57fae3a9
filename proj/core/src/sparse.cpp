#include "qvi/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace qvi {

SparseMatrix SparseMatrix::from_triplets(int n, std::span<const Triplet> entries) {
    if (n < 0) throw std::invalid_argument("SparseMatrix: negative dimension");
    SparseMatrix m;
    m.n_ = n;
    std::vector<Triplet> sorted(entries.begin(), entries.end());
    for (const auto& t : sorted) {
        if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n)
            throw std::invalid_argument("SparseMatrix: triplet index out of range");
    }
    std::sort(sorted.begin(), sorted.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    m.offsets_.assign(static_cast<size_t>(n) + 1, 0);
    m.cols_.reserve(sorted.size());
    m.vals_.reserve(sorted.size());
    size_t i = 0;
    for (int r = 0; r < n; ++r) {
        while (i < sorted.size() && sorted[i].row == r) {
            const int c = sorted[i].col;
            double v = 0.0;
            while (i < sorted.size() && sorted[i].row == r && sorted[i].col == c) {
                v += sorted[i].value;
                ++i;
            }
            m.cols_.push_back(c);
            m.vals_.push_back(v);
        }
        m.offsets_[static_cast<size_t>(r) + 1] = static_cast<int>(m.cols_.size());
    }
    return m;
}

std::span<const int> SparseMatrix::row_cols(int i) const {
    const size_t lo = static_cast<size_t>(offsets_[static_cast<size_t>(i)]);
    const size_t hi = static_cast<size_t>(offsets_[static_cast<size_t>(i) + 1]);
    return {cols_.data() + lo, hi - lo};
}

std::span<const double> SparseMatrix::row_values(int i) const {
    const size_t lo = static_cast<size_t>(offsets_[static_cast<size_t>(i)]);
    const size_t hi = static_cast<size_t>(offsets_[static_cast<size_t>(i) + 1]);
    return {vals_.data() + lo, hi - lo};
}

double SparseMatrix::diagonal(int i) const {
    const auto cols = row_cols(i);
    const auto vals = row_values(i);
    const auto it = std::lower_bound(cols.begin(), cols.end(), i);
    if (it != cols.end() && *it == i) return vals[static_cast<size_t>(it - cols.begin())];
    return 0.0;
}

Vec SparseMatrix::multiply(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != n_) throw std::invalid_argument("multiply: size mismatch");
    Vec y(static_cast<size_t>(n_), 0.0);
    for (int i = 0; i < n_; ++i) {
        const auto cols = row_cols(i);
        const auto vals = row_values(i);
        double acc = 0.0;
        for (size_t k = 0; k < cols.size(); ++k) acc += vals[k] * x[static_cast<size_t>(cols[k])];
        y[static_cast<size_t>(i)] = acc;
    }
    return y;
}

void SparseMatrix::write_coordinate(std::ostream& os) const {
    os << n_ << ' ' << nnz() << '\n';
    os.precision(17);
    for (int i = 0; i < n_; ++i) {
        const auto cols = row_cols(i);
        const auto vals = row_values(i);
        for (size_t k = 0; k < cols.size(); ++k)
            os << i << ' ' << cols[k] << ' ' << vals[k] << '\n';
    }
}

SparseMatrix SparseMatrix::read_coordinate(std::istream& is) {
    int n = 0, nnz = 0;
    if (!(is >> n >> nnz)) throw std::invalid_argument("read_coordinate: bad header");
    std::vector<Triplet> ts;
    ts.reserve(static_cast<size_t>(nnz));
    for (int k = 0; k < nnz; ++k) {
        Triplet t{};
        if (!(is >> t.row >> t.col >> t.value))
            throw std::invalid_argument("read_coordinate: truncated input");
        ts.push_back(t);
    }
    return from_triplets(n, ts);
}

std::vector<RowClass> classify_rows(const SparseMatrix& a) {
    const int n = a.size();
    std::vector<RowClass> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto cols = a.row_cols(i);
        const auto vals = a.row_values(i);
        double diag = 0.0, off = 0.0;
        for (size_t k = 0; k < cols.size(); ++k) {
            if (cols[k] == i)
                diag = std::abs(vals[k]);
            else
                off += std::abs(vals[k]);
        }
        out[static_cast<size_t>(i)] =
            diag > off ? RowClass::sdd : (diag >= off ? RowClass::wdd_not_sdd : RowClass::not_wdd);
    }
    return out;
}

MatrixDiagnosis diagnose(const SparseMatrix& a) {
    const int n = a.size();
    MatrixDiagnosis d;
    d.is_z = true;
    d.nonneg_diag = true;
    d.is_wdd = true;
    d.is_sdd = n > 0;

    const auto classes = classify_rows(a);
    std::vector<char> good(static_cast<size_t>(n), 0); // walks to an s.d.d. row
    for (int i = 0; i < n; ++i) {
        const auto cols = a.row_cols(i);
        const auto vals = a.row_values(i);
        for (size_t k = 0; k < cols.size(); ++k) {
            if (cols[k] == i) {
                if (vals[k] < 0) d.nonneg_diag = false;
            } else if (vals[k] > 0) {
                d.is_z = false;
            }
        }
        switch (classes[static_cast<size_t>(i)]) {
        case RowClass::sdd:
            d.sdd_rows.push_back(i);
            good[static_cast<size_t>(i)] = 1;
            break;
        case RowClass::wdd_not_sdd:
            d.is_sdd = false;
            break;
        case RowClass::not_wdd:
            d.is_sdd = false;
            d.is_wdd = false;
            break;
        }
    }

    // Reverse breadth-first search from the s.d.d. rows: row i is good when
    // some edge i -> j (a_ij != 0) leads to a good row j. One linear pass
    // over the transpose reachability via a worklist.
    std::vector<std::vector<int>> in_edges(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto cols = a.row_cols(i);
        const auto vals = a.row_values(i);
        for (size_t k = 0; k < cols.size(); ++k) {
            if (cols[k] != i && vals[k] != 0.0)
                in_edges[static_cast<size_t>(cols[k])].push_back(i);
        }
    }
    std::vector<int> work(d.sdd_rows);
    while (!work.empty()) {
        const int j = work.back();
        work.pop_back();
        for (int i : in_edges[static_cast<size_t>(j)]) {
            if (!good[static_cast<size_t>(i)]) {
                good[static_cast<size_t>(i)] = 1;
                work.push_back(i);
            }
        }
    }
    for (int i = 0; i < n; ++i)
        if (!good[static_cast<size_t>(i)]) d.unreachable_rows.push_back(i);
    d.is_wcdd = d.is_wdd && d.unreachable_rows.empty();
    return d;
}

bool is_nonsingular_m_matrix(const SparseMatrix& a) { return diagnose(a).is_m_matrix(); }

} // namespace qvi
