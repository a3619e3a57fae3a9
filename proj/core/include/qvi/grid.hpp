// Spatial/temporal grids, monotone linear interpolation, finite-difference
// stencils, and control-set discretization.
#ifndef QVI_GRID_HPP
#define QVI_GRID_HPP

#include <array>
#include <span>
#include <vector>

namespace qvi {

using Vec = std::vector<double>;

// One spatial axis: strictly increasing coordinates x_0 < ... < x_M.
class SpaceGrid {
public:
    explicit SpaceGrid(Vec points);

    int nodes() const { return static_cast<int>(points_.size()); }
    int cells() const { return nodes() - 1; }
    double operator[](int i) const { return points_[static_cast<size_t>(i)]; }
    double left() const { return points_.front(); }
    double right() const { return points_.back(); }
    std::span<const double> points() const { return points_; }

    bool uniform() const { return uniform_; }
    double spacing() const { return spacing_; } // meaningful when uniform()

    // Largest k with x_k <= x, clamped to [0, M-1]; ties resolve to the
    // right cell (x == x_{k+1} maps to cell k+1 with zero offset).
    int cell(double x) const;

private:
    Vec points_;
    bool uniform_;
    double spacing_;
};

// x_i = (i - M/2) * (2R/M); requires M even so that x_{M/2} = 0.
SpaceGrid build_uniform_grid(double radius, int cell_count);

// Uniform interior with first/last gaps shrunk to boundary_gap; used by the
// explicit-impulse scheme near truncation boundaries.
SpaceGrid build_boundary_refined_grid(double radius, int cell_count, double boundary_gap);

// Uniform partition of [lo, hi] with `nodes` points (not symmetric around 0
// in general).
SpaceGrid build_interval_grid(double lo, double hi, int nodes);

// Backward-in-time levels tau^n = T - n*dt, n = 0..N.
struct TimeGrid {
    double horizon = 0.0;
    int steps = 1;

    TimeGrid() = default;
    TimeGrid(double T, int N);
    double dt() const { return horizon / steps; }
    double tau(int n) const { return horizon - n * dt(); }
};

// Nonuniform three-point second difference; exact for quadratics on
// uniform grids, zero at the boundary nodes.
double second_difference(std::span<const double> u, const SpaceGrid& g, int i);

// coeff * (D+ u)_i when coeff > 0, coeff * (D- u)_i otherwise; one-sided
// differences vanish at the boundary nodes.
double first_difference_upwind(std::span<const double> u, const SpaceGrid& g, int i, double coeff);

// Weights of the monotone linear interpolant: value = (1-alpha)*u_k + alpha*u_{k+1}.
struct InterpWeights {
    int k;
    double alpha;
};
InterpWeights interp_weights(const SpaceGrid& g, double x);

// No extrapolation: clamps to u_0 / u_M outside the grid.
double interpolate(std::span<const double> u, const SpaceGrid& g, double x);

// Finite control sets are plain coordinate lists.
using DiscreteControlSet = Vec;

// n equally spaced points including endpoints; the midpoint when n == 1.
DiscreteControlSet discretize_interval(double lo, double hi, int n);

double hausdorff_distance(std::span<const double> a, std::span<const double> b);
double hausdorff_distance_to_interval(std::span<const double> a, double lo, double hi);

// Tensor product of 1 or 2 axes with row-major flattening (axis 0 outer).
class TensorGrid {
public:
    explicit TensorGrid(SpaceGrid axis0);
    TensorGrid(SpaceGrid axis0, SpaceGrid axis1);

    int dim() const { return dim_; }
    const SpaceGrid& axis(int k) const { return axes_[static_cast<size_t>(k)]; }
    int nodes() const;

    int flatten(std::array<int, 2> idx) const;
    std::array<int, 2> unflatten(int node) const;
    std::array<double, 2> coords(int node) const;

private:
    std::vector<SpaceGrid> axes_;
    int dim_;
};

using State = std::array<double, 2>;

// Multilinear interpolation on the tensor grid; clamped per axis.
double interpolate(std::span<const double> u, const TensorGrid& g, const State& x);

} // namespace qvi

#endif
