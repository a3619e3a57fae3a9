#include "qvi/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qvi {

namespace {

bool detect_uniform(const Vec& pts, double& spacing) {
    const int m = static_cast<int>(pts.size()) - 1;
    spacing = (pts.back() - pts.front()) / m;
    for (int i = 0; i < m; ++i) {
        if (std::abs(pts[i + 1] - pts[i] - spacing) > 1e-12 * spacing) return false;
    }
    return true;
}

} // namespace

SpaceGrid::SpaceGrid(Vec points) : points_(std::move(points)) {
    if (points_.size() < 2) throw std::invalid_argument("SpaceGrid: need at least 2 points");
    for (size_t i = 0; i + 1 < points_.size(); ++i) {
        if (!(points_[i] < points_[i + 1]))
            throw std::invalid_argument("SpaceGrid: points must be strictly increasing");
    }
    uniform_ = detect_uniform(points_, spacing_);
}

int SpaceGrid::cell(double x) const {
    if (x <= points_.front()) return 0;
    if (x >= points_.back()) return cells() - 1;
    auto it = std::upper_bound(points_.begin(), points_.end(), x);
    int k = static_cast<int>(it - points_.begin()) - 1;
    return std::min(k, cells() - 1);
}

SpaceGrid build_uniform_grid(double radius, int cell_count) {
    if (radius <= 0) throw std::invalid_argument("build_uniform_grid: radius must be positive");
    if (cell_count < 2 || cell_count % 2 != 0)
        throw std::invalid_argument("build_uniform_grid: cell count must be even and >= 2");
    const double dx = 2.0 * radius / cell_count;
    Vec pts(static_cast<size_t>(cell_count) + 1);
    for (int i = 0; i <= cell_count; ++i) pts[static_cast<size_t>(i)] = (i - cell_count / 2) * dx;
    return SpaceGrid(std::move(pts));
}

SpaceGrid build_boundary_refined_grid(double radius, int cell_count, double boundary_gap) {
    if (radius <= 0) throw std::invalid_argument("build_boundary_refined_grid: radius must be positive");
    if (cell_count < 4) throw std::invalid_argument("build_boundary_refined_grid: need at least 4 cells");
    if (!(boundary_gap > 0) || boundary_gap >= radius)
        throw std::invalid_argument("build_boundary_refined_grid: infeasible boundary gap");
    // Interior cells share the remaining width equally.
    const int interior = cell_count - 2;
    const double width = 2.0 * radius - 2.0 * boundary_gap;
    const double dx = width / interior;
    if (!(dx > 0)) throw std::invalid_argument("build_boundary_refined_grid: infeasible boundary gap");
    Vec pts(static_cast<size_t>(cell_count) + 1);
    pts.front() = -radius;
    pts.back() = radius;
    for (int i = 1; i < cell_count; ++i)
        pts[static_cast<size_t>(i)] = -radius + boundary_gap + (i - 1) * dx;
    return SpaceGrid(std::move(pts));
}

SpaceGrid build_interval_grid(double lo, double hi, int nodes) {
    if (!(lo < hi)) throw std::invalid_argument("build_interval_grid: need lo < hi");
    if (nodes < 2) throw std::invalid_argument("build_interval_grid: need at least 2 nodes");
    Vec pts(static_cast<size_t>(nodes));
    for (int i = 0; i < nodes; ++i)
        pts[static_cast<size_t>(i)] = lo + (hi - lo) * i / (nodes - 1);
    pts.back() = hi;
    return SpaceGrid(std::move(pts));
}

TimeGrid::TimeGrid(double T, int N) : horizon(T), steps(N) {
    if (!(T >= 0)) throw std::invalid_argument("TimeGrid: horizon must be nonnegative");
    if (N < 1) throw std::invalid_argument("TimeGrid: need at least one step");
}

double second_difference(std::span<const double> u, const SpaceGrid& g, int i) {
    if (i < 0 || i >= g.nodes()) throw std::out_of_range("second_difference: index out of range");
    if (i == 0 || i == g.cells()) return 0.0;
    const size_t k = static_cast<size_t>(i);
    const double ha = g[i] - g[i - 1];
    const double hb = g[i + 1] - g[i];
    return 2.0 / (ha + hb) * ((u[k + 1] - u[k]) / hb - (u[k] - u[k - 1]) / ha);
}

double first_difference_upwind(std::span<const double> u, const SpaceGrid& g, int i, double coeff) {
    if (i < 0 || i >= g.nodes()) throw std::out_of_range("first_difference_upwind: index out of range");
    if (coeff == 0.0) return 0.0;
    if (i == 0 || i == g.cells()) return 0.0;
    const size_t k = static_cast<size_t>(i);
    if (coeff > 0) return coeff * (u[k + 1] - u[k]) / (g[i + 1] - g[i]);
    return coeff * (u[k] - u[k - 1]) / (g[i] - g[i - 1]);
}

InterpWeights interp_weights(const SpaceGrid& g, double x) {
    if (x <= g.left()) return {0, 0.0};
    if (x >= g.right()) return {g.cells() - 1, 1.0};
    const int k = g.cell(x);
    return {k, (x - g[k]) / (g[k + 1] - g[k])};
}

double interpolate(std::span<const double> u, const SpaceGrid& g, double x) {
    const auto [k, alpha] = interp_weights(g, x);
    const size_t i = static_cast<size_t>(k);
    return (1.0 - alpha) * u[i] + alpha * u[i + 1];
}

DiscreteControlSet discretize_interval(double lo, double hi, int n) {
    if (lo > hi) throw std::invalid_argument("discretize_interval: need lo <= hi");
    if (n < 1) throw std::invalid_argument("discretize_interval: need n >= 1");
    if (n == 1) return {0.5 * (lo + hi)};
    DiscreteControlSet out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    out.back() = hi;
    return out;
}

namespace {

double directed_distance(std::span<const double> from, std::span<const double> to) {
    double worst = 0.0;
    for (double x : from) {
        double best = std::numeric_limits<double>::infinity();
        for (double y : to) best = std::min(best, std::abs(x - y));
        worst = std::max(worst, best);
    }
    return worst;
}

} // namespace

double hausdorff_distance(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("hausdorff_distance: empty set");
    return std::max(directed_distance(a, b), directed_distance(b, a));
}

double hausdorff_distance_to_interval(std::span<const double> a, double lo, double hi) {
    if (a.empty() || lo > hi) throw std::invalid_argument("hausdorff_distance_to_interval: empty set");
    Vec sorted(a.begin(), a.end());
    std::sort(sorted.begin(), sorted.end());
    // sup over the set of the distance to the interval
    double d_set = 0.0;
    for (double x : sorted) d_set = std::max(d_set, std::max({lo - x, x - hi, 0.0}));
    // sup over the interval of the distance to the set: attained at the
    // interval ends or at midpoints of adjacent set points inside [lo, hi]
    auto dist_to_set = [&](double y) {
        double best = std::numeric_limits<double>::infinity();
        for (double x : sorted) best = std::min(best, std::abs(x - y));
        return best;
    };
    double d_int = std::max(dist_to_set(lo), dist_to_set(hi));
    for (size_t i = 0; i + 1 < sorted.size(); ++i) {
        const double mid = 0.5 * (sorted[i] + sorted[i + 1]);
        if (mid > lo && mid < hi) d_int = std::max(d_int, dist_to_set(mid));
    }
    return std::max(d_set, d_int);
}

TensorGrid::TensorGrid(SpaceGrid axis0) : dim_(1) { axes_.push_back(std::move(axis0)); }

TensorGrid::TensorGrid(SpaceGrid axis0, SpaceGrid axis1) : dim_(2) {
    axes_.push_back(std::move(axis0));
    axes_.push_back(std::move(axis1));
}

int TensorGrid::nodes() const {
    int n = axes_[0].nodes();
    if (dim_ == 2) n *= axes_[1].nodes();
    return n;
}

int TensorGrid::flatten(std::array<int, 2> idx) const {
    if (dim_ == 1) return idx[0];
    return idx[0] * axes_[1].nodes() + idx[1];
}

std::array<int, 2> TensorGrid::unflatten(int node) const {
    if (dim_ == 1) return {node, 0};
    const int n1 = axes_[1].nodes();
    return {node / n1, node % n1};
}

std::array<double, 2> TensorGrid::coords(int node) const {
    const auto idx = unflatten(node);
    if (dim_ == 1) return {axes_[0][idx[0]], 0.0};
    return {axes_[0][idx[0]], axes_[1][idx[1]]};
}

double interpolate(std::span<const double> u, const TensorGrid& g, const State& x) {
    if (g.dim() == 1) return interpolate(u, g.axis(0), x[0]);
    const auto w0 = interp_weights(g.axis(0), x[0]);
    const auto w1 = interp_weights(g.axis(1), x[1]);
    const int n1 = g.axis(1).nodes();
    const auto at = [&](int i0, int i1) { return u[static_cast<size_t>(i0 * n1 + i1)]; };
    return (1 - w0.alpha) * ((1 - w1.alpha) * at(w0.k, w1.k) + w1.alpha * at(w0.k, w1.k + 1)) +
           w0.alpha * ((1 - w1.alpha) * at(w0.k + 1, w1.k) + w1.alpha * at(w0.k + 1, w1.k + 1));
}

} // namespace qvi
