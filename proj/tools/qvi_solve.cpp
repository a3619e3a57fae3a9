// qvi-solve: refinement studies and control-field exports for the impulse
// control benchmarks, plus randomly generated MDPs.
//
//   qvi-solve run --problem fex --scheme penalty --levels 5 --probe "0"
//                 --out report.csv --strict
//   qvi-solve mdp --states 8 --seed 1
//   qvi-solve export --problem fex --scheme penalty --level 2 --layer 16
//                 --out controls.csv

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qvi/study.hpp"

namespace {

qvi::State parse_probe(const std::string& text) {
    qvi::State out{0.0, 0.0};
    std::stringstream ss(text);
    std::string part;
    int k = 0;
    while (std::getline(ss, part, ',') && k < 2) out[static_cast<size_t>(k++)] = std::stod(part);
    return out;
}

void apply_config(qvi::StudySpec& spec, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
    nlohmann::json j;
    in >> j;
    auto get = [&](const char* key, double& out) {
        if (j.contains(key)) out = j.at(key).get<double>();
    };
    if (spec.problem == "fex") {
        auto& p = spec.fex;
        get("w_max", p.w_max);
        get("mu", p.mu);
        get("sigma", p.sigma);
        get("m", p.target);
        get("gamma", p.gamma);
        get("kappa", p.kappa);
        get("c", p.fixed_cost);
        get("beta", p.beta);
        get("T", p.horizon);
        get("R", p.radius);
    } else if (spec.problem == "consumption" || spec.problem == "consumption-infinite") {
        auto& p = spec.consumption;
        get("w_max", p.w_max);
        get("mu", p.mu);
        get("sigma", p.sigma);
        get("r", p.r);
        get("kappa", p.kappa);
        get("c", p.fixed_cost);
        get("gamma", p.gamma);
        get("beta", p.beta);
        get("T", p.horizon);
        get("s0", p.s0);
        get("q0", p.q0);
        get("R_s", p.radius_s);
        get("R_q", p.radius_q);
    } else if (spec.problem == "gmwb") {
        auto& p = spec.gmwb;
        get("w_max", p.w_max);
        get("r", p.r);
        get("eta", p.eta);
        get("sigma", p.sigma);
        get("kappa", p.kappa);
        get("c", p.fixed_cost);
        get("T", p.horizon);
        get("R_s", p.radius_s);
        get("R_q", p.radius_q);
    }
}

qvi::Benchmark build_benchmark(const qvi::StudySpec& spec, double h) {
    if (spec.problem == "fex") return qvi::build_fex(spec.fex, h);
    if (spec.problem == "consumption") return qvi::build_consumption(spec.consumption, h);
    if (spec.problem == "gmwb") return qvi::build_gmwb(spec.gmwb, h);
    if (spec.problem == "consumption-infinite")
        return qvi::build_infinite_consumption(spec.consumption, h);
    throw CLI::ValidationError("--problem", "unknown problem " + spec.problem);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"HJBQVI solver: impulse-control benchmarks and convergence studies"};
    app.require_subcommand(1);

    qvi::StudySpec spec;
    std::string scheme = "penalty";
    std::string probe_text, out_path, config_path, format = "pretty";

    auto* run = app.add_subcommand("run", "run a refinement study");
    run->add_option("--problem", spec.problem,
                    "fex | consumption | gmwb | consumption-infinite | mdp-random");
    run->add_option("--scheme", scheme, "direct | penalty | explicit");
    run->add_option("--levels", spec.levels, "number of refinement levels (h = 1, 1/2, ...)");
    run->add_option("--probe", probe_text, "probe point, e.g. \"0\" or \"45.2,45.2\"");
    run->add_option("--tolerance", spec.tolerance, "policy-iteration stopping tolerance");
    run->add_option("--rtol", spec.linear_rtol, "linear-solver relative tolerance");
    run->add_option("--seed", spec.seed, "seed for mdp-random");
    run->add_option("--states", spec.mdp_states, "state count for mdp-random");
    run->add_option("--out", out_path, "output file (default stdout)");
    run->add_option("--format", format, "csv | json | pretty");
    run->add_option("--config", config_path, "JSON file with problem parameters");
    run->add_flag("--strict", spec.strict, "enable M-matrix checks; fail on stability violations");

    int mdp_states = 8;
    unsigned mdp_seed = 1;
    auto* mdp = app.add_subcommand("mdp", "solve a random discounted MDP");
    mdp->add_option("--states", mdp_states, "number of states");
    mdp->add_option("--seed", mdp_seed, "generator seed");
    mdp->add_option("--out", out_path, "output file (default stdout)");

    int export_level = 0, export_layer = -1;
    auto* exp = app.add_subcommand("export", "export a solved layer's control field as CSV");
    exp->add_option("--problem", spec.problem, "benchmark name");
    exp->add_option("--scheme", scheme, "direct | penalty | explicit");
    exp->add_option("--level", export_level, "refinement level (0 -> h = 1)");
    exp->add_option("--layer", export_layer, "time layer n (default: the final layer)");
    exp->add_option("--out", out_path, "output file (default stdout)");
    exp->add_option("--config", config_path, "JSON file with problem parameters");

    CLI11_PARSE(app, argc, argv);

    try {
        spec.scheme = qvi::parse_scheme(scheme);
        if (!config_path.empty()) apply_config(spec, config_path);
        if (!probe_text.empty()) spec.probe = parse_probe(probe_text);

        std::ofstream file;
        std::ostream* os = &std::cout;
        if (!out_path.empty()) {
            file.open(out_path);
            if (!file) throw std::runtime_error("cannot open output file " + out_path);
            os = &file;
        }

        if (run->parsed()) {
            const auto report = qvi::run_study(spec);
            qvi::TableFormat fmt = qvi::TableFormat::pretty;
            if (format == "csv") fmt = qvi::TableFormat::csv;
            else if (format == "json") fmt = qvi::TableFormat::json;
            else if (format != "pretty")
                throw std::runtime_error("unknown format " + format);
            qvi::emit_table(report, fmt, *os);
            for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
            if (spec.strict && !report.warnings.empty()) return 1;
            return 0;
        }
        if (mdp->parsed()) {
            std::mt19937 rng(mdp_seed);
            const auto bellman =
                qvi::build_mdp(qvi::random_discounted_mdp(mdp_states, 4, 0.95, rng));
            qvi::SolveStats stats;
            const qvi::Vec v = qvi::policy_iteration(
                bellman, qvi::Vec(static_cast<size_t>(bellman.size()), 0.0), {}, &stats);
            (*os) << "state,value\n";
            for (int i = 0; i < bellman.size(); ++i) (*os) << i << ',' << v[static_cast<size_t>(i)] << '\n';
            std::cerr << "policy iterations: " << stats.policy_iterations
                      << ", residual: " << stats.final_residual << '\n';
            return 0;
        }
        if (exp->parsed()) {
            const double h = std::pow(0.5, export_level);
            auto b = build_benchmark(spec, h);
            b.scheme.scheme = spec.scheme;
            const auto sol = qvi::solve_finite_horizon(b.problem, b.grid, b.time, b.scheme, {});
            const int layer = export_layer < 0 ? b.time.steps : export_layer;
            qvi::export_control_field(b.problem, b.grid, b.time, sol, layer, b.scheme, *os);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
