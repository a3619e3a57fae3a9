// Concrete benchmark constructors: exchange-rate control, optimal
// consumption (2D), GMWB (2D), infinite-horizon consumption, and the
// MDP-to-Bellman bridge. Parameter defaults reproduce the reference
// convergence tables; the meshing parameter h = 1, 1/2, 1/4, ... refines
// every count by 1/h.
#ifndef QVI_PROBLEMS_HPP
#define QVI_PROBLEMS_HPP

#include <random>

#include "qvi/hjbqvi.hpp"

namespace qvi {

struct FexParams {
    double w_max = 0.07;
    double mu = 0.25;
    double sigma = 0.3;
    double target = 0.0; // m
    double gamma = 3.0;
    double kappa = 1.0;
    double fixed_cost = 0.1; // c
    double beta = 0.02;
    double horizon = 10.0;
    double radius = 2.0;
    int base_timesteps = 16;
    int base_cells = 32;
    int base_w = 8;
    int base_z = 16;
    // impulse destinations default to the spatial nodes (Z^h = node
    // differences); set to true for an independent uniform destination
    // partition of [-R, R] with base_z points
    bool partition_destinations = false;
};

struct ConsumptionParams {
    double w_max = 100.0;
    double mu = 0.11;
    double sigma = 0.3;
    double r = 0.07;
    double kappa = 0.1;
    double fixed_cost = 0.05; // c
    double gamma = 0.3;
    double beta = 0.1;
    double horizon = 40.0;
    double s0 = 45.20;
    double q0 = 45.20;
    double radius_s = 200.0;
    double radius_q = 200.0;
    int base_timesteps = 32;
    int base_s = 20;
    int base_q = 20;
    int base_w = 15;
    int base_z = 15;
};

struct GmwbParams {
    double w_max = 10.0;
    double r = 0.05;
    double eta = 0.0;
    double sigma = 0.2;
    double kappa = 0.1;
    double fixed_cost = 1e-6; // c
    double horizon = 10.0;
    double radius_s = 1000.0;
    double radius_q = 100.0;
    int base_timesteps = 32;
    int base_q = 50;
    int base_z = 2;      // W^h is {0, w_max} at every level
    // the 64-interval investment axis is the hand-picked grid from the GMWB
    // pricing literature (dense around the initial payment, stretched toward
    // the truncation boundary); refinement inserts midpoints. Set uniform_s
    // to use 64/h equal cells instead.
    bool uniform_s = false;
    int base_s = 64;
};

// Everything a refinement study needs at one level.
struct Benchmark {
    ImpulseProblem problem;
    TensorGrid grid;
    TimeGrid time;
    SchemeConfig scheme; // per-problem defaults (restriction, eps rules)
    State probe{};
};

Benchmark build_fex(const FexParams& p = {}, double h = 1.0);
Benchmark build_consumption(const ConsumptionParams& p = {}, double h = 1.0);
Benchmark build_gmwb(const GmwbParams& p = {}, double h = 1.0);
Benchmark build_infinite_consumption(const ConsumptionParams& p = {}, double h = 1.0);

// ---------------------------------------------------------------------------
// Markov decision processes

struct MdpControlSpec {
    Vec transition; // row of T(i, ., p), sums to one
    double reward = 0.0;
    double discount = 0.0; // in [0, 1]
};

struct MdpSpec {
    std::vector<std::vector<MdpControlSpec>> states;
    int size() const { return static_cast<int>(states.size()); }
};

// Bellman problem with [A(P)]_ij = delta_ij - T(i,j,P_i) D(i,P_i) and
// [y(P)]_i = R(i,P_i); rows with D = 1 are w.d.d. but not s.d.d.
class MdpBellman : public BellmanProblem {
public:
    explicit MdpBellman(MdpSpec spec);

    int size() const override { return spec_.size(); }
    int control_count(int row) const override;
    void evaluate(int row, int control, BellmanRow& out) const override;
    const MdpSpec& spec() const { return spec_; }

private:
    MdpSpec spec_;
};

MdpBellman build_mdp(MdpSpec spec);

MdpSpec random_discounted_mdp(int states, int max_controls, double max_discount,
                              std::mt19937& rng);

} // namespace qvi

#endif
