// Impulse-control HJBQVI problem definitions, the discretized intervention
// operator, and the three timestepping schemes (direct control, penalty,
// explicit impulse) plus their infinite-horizon variants.
#ifndef QVI_HJBQVI_HPP
#define QVI_HJBQVI_HPP

#include <array>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>

#include "qvi/bellman.hpp"
#include "qvi/grid.hpp"

namespace qvi {

enum class Scheme { direct_control, penalty, explicit_impulse };

// How the first-derivative stencil behaves at a truncation boundary:
// artificial Neumann (one-sided differences forced to zero)
// or the inward one-sided difference when the drift points into the domain
// (outgoing characteristics need no artificial condition).
enum class BoundaryStencil { neumann_zero, upwind_inward };

// Problem data on the truncated domain. Axis k of the spatial operator is
//   (1/2) b_k(t,x,w)^2 d^2/dx_k^2 + a_k(t,x,w) d/dx_k,
// optionally plus a zeroth-order coefficient r0(t,x,w) multiplying V (used
// for asymptotic-linear boundary operators). No cross derivatives.
struct ImpulseProblem {
    int dim = 1;
    double horizon = 0.0;  // T; ignored by the infinite-horizon solver
    double discount = 0.0; // beta; used only by the infinite-horizon solver

    std::function<double(int axis, double t, const State&, double w)> drift;
    std::function<double(int axis, double t, const State&, double w)> diffusion;
    std::function<double(double t, const State&, double w)> reward;         // f
    std::function<double(const State&)> terminal;                           // g
    std::function<State(double t, const State&, double z)> transition;      // Gamma
    std::function<double(double t, const State&, double z)> impulse_reward; // K
    std::function<double(double t, const State&, double w)> zeroth_order;   // r0, optional

    DiscreteControlSet stochastic_controls;                                    // W^h
    std::function<DiscreteControlSet(double t, const State&)> impulse_controls; // Z^h(t, x)

    // [axis][side], side 0 = lower, 1 = upper
    std::array<std::array<BoundaryStencil, 2>, 2> boundary{
        {{BoundaryStencil::neumann_zero, BoundaryStencil::neumann_zero},
         {BoundaryStencil::neumann_zero, BoundaryStencil::neumann_zero}}};

    // a, b, r0, Gamma and Z^h do not depend on t (f and K still may); enables
    // stencil/intervention caching and one-time factorization.
    bool time_independent = false;
    bool diffusion_control_dependent = false;
    // optional relaxation of the discretized intervention: the schemes use
    // M_n - nu instead of M_n, restoring stability when sup K = 0 (weak
    // costs); nu should vanish with the mesh. Off by default.
    double intervention_relaxation = 0.0;
    // sup K < 0 (H3); when false the usual sup-norm stability bound is not
    // guaranteed and stability_bound_override supplies the check threshold.
    bool strict_negative_costs = true;
    std::optional<double> stability_bound_override{};
};

// keep(node, d, w, z): admissible controls for the direct-control scheme's
// restricted policy iteration; w is NaN when d == 1, z is NaN when d == 0.
using ControlFilter = std::function<bool(int node, int d, double w, double z)>;

struct SchemeConfig {
    Scheme scheme = Scheme::penalty;
    double penalty_scale = 1e-2;        // eps = penalty_scale * dt (finite horizon)
    double penalty_eps_infinite = 1e-2; // eps for the infinite-horizon penalty solve
    double direct_scaling_delta = 1e-2; // impulse rows scaled by 1/(delta*dt)
    bool scale_direct_rows = true;
    ControlFilter direct_restriction;   // applied to the direct-control scheme only
};

struct StepStats {
    int policy_iterations = 0;
    long linear_iterations = 0;
    double seconds = 0.0;
};

struct Solution {
    std::vector<Vec> layers; // layers[n] approximates V(tau^n, .), n = 0..N
    std::vector<StepStats> steps;
    std::vector<std::string> warnings;
};

struct NodeControl {
    double w = std::numeric_limits<double>::quiet_NaN();
    int d = 0;
    double z = std::numeric_limits<double>::quiet_NaN();
};

// Discretized intervention operator at one node: maximizes
// interp(u, Gamma(t, x_i, z)) + K(t, x_i, z) over z in Z^h(t, x_i).
struct InterventionValue {
    double value;
    double z;
};
InterventionValue apply_intervention(const ImpulseProblem& prob, const TensorGrid& grid,
                                     std::span<const double> u, double t, int node);

// V^0_i = g(x_i); verifies M g <= g + 1e-9 pointwise and reports violations.
Vec terminal_layer(const ImpulseProblem& prob, const TensorGrid& grid,
                   std::vector<std::string>* warnings = nullptr);

// The Bellman form of the direct-control / penalty schemes at one timestep.
// Controls per row enumerate the d = 0 block (one control per w) followed by
// the d = 1 block (direct control: one per z; penalty: w-major (w, z) pairs).
class SchemeBellman : public BellmanProblem {
public:
    SchemeBellman(const ImpulseProblem& prob, const TensorGrid& grid, Scheme kind,
                  bool infinite_horizon, double time_coefficient,
                  const ControlFilter& filter = {}, double impulse_row_scale = 1.0);

    // per-step data: tau = current time level, v_prev = previous layer
    // (nullptr for the infinite-horizon solve), eps = penalty parameter
    void set_step(double tau, const Vec* v_prev, double eps);

    int size() const override;
    int control_count(int row) const override;
    void evaluate(int row, int control, BellmanRow& out) const override;
    int best_control(int row, std::span<const double> u, double* value,
                     BellmanRow& scratch) const override;

    NodeControl decode(int row, int control) const;

private:
    struct WTemplate; // stencil row of -L plus f
    struct ZTemplate; // interpolation weights of Gamma plus K
    struct Impl;
    std::shared_ptr<Impl> impl_;
};

Solution solve_finite_horizon(const ImpulseProblem& prob, const TensorGrid& grid,
                              const TimeGrid& tg, const SchemeConfig& scfg,
                              const IterationConfig& icfg = {});

std::pair<Vec, SolveStats> solve_infinite_horizon(const ImpulseProblem& prob,
                                                  const TensorGrid& grid,
                                                  const SchemeConfig& scfg,
                                                  const IterationConfig& icfg = {},
                                                  std::vector<std::string>* warnings = nullptr);

// Optimal controls at time level n, recomputed from the solved layers by the
// scheme's row argmax (unrestricted, unscaled; ties as in improve_policy).
std::vector<NodeControl> recover_controls(const ImpulseProblem& prob, const TensorGrid& grid,
                                          const TimeGrid& tg, const Solution& sol, int n,
                                          const SchemeConfig& scfg);

// ||f||_inf T + ||g||_inf (finite horizon) and ||f||_inf / beta (infinite),
// with the sups taken over grid nodes, time levels and W^h.
double stability_bound(const ImpulseProblem& prob, const TensorGrid& grid, const TimeGrid& tg);
double stability_bound_infinite(const ImpulseProblem& prob, const TensorGrid& grid);

// Scheme residual S(h, (tau^n, x_i), V, ell) with the nonlocal slot ell held
// fixed; exposes the monotonicity of the assembled schemes to property tests.
double scheme_residual_probe(const ImpulseProblem& prob, const TensorGrid& grid,
                             const TimeGrid& tg, Scheme kind, int n, int node,
                             const Vec& v_n, const Vec& v_prev, double ell, double eps);

// Checks that every discretized impulse lands inside the truncated domain
// (assumption H5); returns offending node indices.
std::vector<int> validate_impulse_targets(const ImpulseProblem& prob, const TensorGrid& grid,
                                          std::span<const double> times);

} // namespace qvi

#endif
