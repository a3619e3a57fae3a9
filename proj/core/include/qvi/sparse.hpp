// Sparse square matrices in compressed-row form with row-wise
// diagonal-dominance classification (s.d.d. / w.d.d. / w.c.d.d. and the
// M-matrix characterization for w.d.d. Z-matrices).
#ifndef QVI_SPARSE_HPP
#define QVI_SPARSE_HPP

#include <iosfwd>
#include <span>
#include <vector>

#include "qvi/grid.hpp" // Vec

namespace qvi {

struct Triplet {
    int row;
    int col;
    double value;
};

class SparseMatrix {
public:
    SparseMatrix() = default;

    // Duplicate (row, col) entries are summed; columns end up sorted.
    static SparseMatrix from_triplets(int n, std::span<const Triplet> entries);

    int size() const { return n_; }
    int nnz() const { return static_cast<int>(cols_.size()); }

    std::span<const int> row_cols(int i) const;
    std::span<const double> row_values(int i) const;
    double diagonal(int i) const; // 0 when the entry is absent

    Vec multiply(std::span<const double> x) const;

    std::span<const int> row_offsets() const { return offsets_; }
    std::span<const int> cols() const { return cols_; }
    std::span<const double> values() const { return vals_; }

    // Coordinate-format text (0-based "row col value" lines after an
    // "n nnz" header); used for test fixtures.
    void write_coordinate(std::ostream& os) const;
    static SparseMatrix read_coordinate(std::istream& is);

private:
    int n_ = 0;
    std::vector<int> offsets_{0};
    std::vector<int> cols_;
    std::vector<double> vals_;
};

enum class RowClass { sdd, wdd_not_sdd, not_wdd };

// Row i is s.d.d. iff |a_ii| > sum_{j != i} |a_ij|, w.d.d. iff >=.
// Explicitly stored zeros do not affect classification.
std::vector<RowClass> classify_rows(const SparseMatrix& a);

struct MatrixDiagnosis {
    bool is_z = false;          // off-diagonals nonpositive
    bool nonneg_diag = false;
    bool is_wdd = false;
    bool is_sdd = false;
    bool is_wcdd = false;       // w.d.d. and every non-s.d.d. row walks to an s.d.d. row
    std::vector<int> sdd_rows;
    std::vector<int> unreachable_rows; // non-s.d.d. rows with no walk to an s.d.d. row

    // The characterization applies to w.d.d. Z-matrices with nonnegative
    // diagonals: such a matrix is a nonsingular M-matrix iff it is w.c.d.d.
    bool is_m_matrix() const { return is_z && nonneg_diag && is_wdd && is_wcdd; }
};

MatrixDiagnosis diagnose(const SparseMatrix& a);
bool is_nonsingular_m_matrix(const SparseMatrix& a);

} // namespace qvi

#endif
