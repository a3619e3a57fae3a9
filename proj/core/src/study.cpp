#include "qvi/study.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace qvi {

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::string exact(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string sig12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

} // namespace

std::optional<double> successive_ratio(double v0, double v1, double v2) {
    const double num = v1 - v0;
    const double den = v2 - v1;
    if (den == 0.0) return std::nullopt;
    return num / den;
}

const char* scheme_name(Scheme s) {
    switch (s) {
    case Scheme::direct_control: return "direct";
    case Scheme::penalty: return "penalty";
    case Scheme::explicit_impulse: return "explicit";
    }
    return "?";
}

Scheme parse_scheme(const std::string& name) {
    if (name == "direct" || name == "direct-control") return Scheme::direct_control;
    if (name == "penalty") return Scheme::penalty;
    if (name == "explicit" || name == "explicit-impulse") return Scheme::explicit_impulse;
    throw std::invalid_argument("unknown scheme: " + name);
}

ConvergenceReport run_study(const StudySpec& spec) {
    ConvergenceReport rep;
    rep.problem = spec.problem;
    rep.scheme = scheme_name(spec.scheme);
    if (spec.levels < 1) throw std::invalid_argument("run_study: need at least one level");

    IterationConfig icfg;
    icfg.tolerance = spec.tolerance;
    icfg.scale = spec.scale;
    icfg.linear_rtol = spec.linear_rtol;
    icfg.debug_check_m_matrix = spec.strict;

    for (int level = 0; level < spec.levels; ++level) {
        const double h = std::pow(0.5, level);
        LevelRecord row;
        row.h = h;
        const double t0 = now_seconds();

        if (spec.problem == "mdp-random") {
            std::mt19937 rng(spec.seed);
            const MdpBellman mdp = build_mdp(
                random_discounted_mdp(spec.mdp_states, spec.mdp_controls, 0.95, rng));
            SolveStats st;
            const Vec u = policy_iteration(mdp, Vec(static_cast<size_t>(mdp.size()), 0.0), icfg, &st);
            row.value = u.front();
            row.avg_policy_iterations = st.policy_iterations;
            row.avg_linear_iterations =
                st.policy_iterations > 0
                    ? static_cast<double>(st.linear_iterations) / st.policy_iterations
                    : 0.0;
        } else {
            const bool infinite = spec.problem == "consumption-infinite";
            Benchmark b = [&]() -> Benchmark {
                if (spec.problem == "fex") return build_fex(spec.fex, h);
                if (spec.problem == "consumption") return build_consumption(spec.consumption, h);
                if (spec.problem == "gmwb") return build_gmwb(spec.gmwb, h);
                if (infinite) return build_infinite_consumption(spec.consumption, h);
                throw std::invalid_argument("unknown problem: " + spec.problem);
            }();
            b.scheme.scheme = spec.scheme;
            const State probe = spec.probe.value_or(b.probe);

            if (infinite) {
                std::vector<std::string> warnings;
                auto [u, st] = solve_infinite_horizon(b.problem, b.grid, b.scheme, icfg, &warnings);
                row.value = interpolate(u, b.grid, probe);
                row.avg_policy_iterations = st.policy_iterations;
                row.avg_linear_iterations = static_cast<double>(st.linear_iterations);
                for (auto& w : warnings)
                    rep.warnings.push_back("level " + std::to_string(level) + ": " + w);
            } else {
                Solution sol = solve_finite_horizon(b.problem, b.grid, b.time, b.scheme, icfg);
                row.value = interpolate(sol.layers.back(), b.grid, probe);
                long policy = 0, linear = 0;
                for (const auto& st : sol.steps) {
                    policy += st.policy_iterations;
                    linear += st.linear_iterations;
                }
                row.avg_policy_iterations = static_cast<double>(policy) / b.time.steps;
                row.avg_linear_iterations = static_cast<double>(linear) / b.time.steps;
                for (auto& w : sol.warnings)
                    rep.warnings.push_back("level " + std::to_string(level) + ": " + w);
            }
        }

        row.seconds = now_seconds() - t0;
        rep.rows.push_back(row);
    }

    for (size_t i = 2; i < rep.rows.size(); ++i)
        rep.rows[i].ratio =
            successive_ratio(rep.rows[i - 2].value, rep.rows[i - 1].value, rep.rows[i].value);
    return rep;
}

void emit_table(const ConvergenceReport& report, TableFormat format, std::ostream& os) {
    if (report.rows.empty()) throw std::invalid_argument("emit_table: empty report");
    switch (format) {
    case TableFormat::csv: {
        os << "h,value,avg_policy_its,avg_linear_its,ratio,time_s\n";
        for (const auto& r : report.rows) {
            os << exact(r.h) << ',' << exact(r.value) << ',' << exact(r.avg_policy_iterations)
               << ',' << exact(r.avg_linear_iterations) << ','
               << (r.ratio ? exact(*r.ratio) : std::string()) << ',' << exact(r.seconds) << '\n';
        }
        break;
    }
    case TableFormat::json: {
        nlohmann::json j;
        j["problem"] = report.problem;
        j["scheme"] = report.scheme;
        j["rows"] = nlohmann::json::array();
        for (const auto& r : report.rows) {
            nlohmann::json jr;
            jr["h"] = r.h;
            jr["value"] = r.value;
            jr["avg_policy_its"] = r.avg_policy_iterations;
            jr["avg_linear_its"] = r.avg_linear_iterations;
            if (r.ratio) jr["ratio"] = *r.ratio;
            jr["time_s"] = r.seconds;
            j["rows"].push_back(jr);
        }
        os << j.dump(2) << '\n';
        break;
    }
    case TableFormat::pretty: {
        os << report.problem << " / " << report.scheme << '\n';
        char line[160];
        std::snprintf(line, sizeof(line), "%-10s %-18s %-10s %-10s %-9s %s\n", "h", "value",
                      "policy", "linear", "ratio", "time_s");
        os << line;
        for (const auto& r : report.rows) {
            std::string ratio = r.ratio ? [&] {
                char b[32];
                std::snprintf(b, sizeof(b), "%.2f", *r.ratio);
                return std::string(b);
            }() : std::string("-");
            std::snprintf(line, sizeof(line), "%-10.6g %-18s %-10.3g %-10.3g %-9s %.3e\n", r.h,
                          sig12(r.value).c_str(), r.avg_policy_iterations,
                          r.avg_linear_iterations, ratio.c_str(), r.seconds);
            os << line;
        }
        break;
    }
    }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

ConvergenceReport parse_table_csv(std::istream& is) {
    ConvergenceReport rep;
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("parse_table_csv: empty input");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 6) throw std::invalid_argument("parse_table_csv: bad row");
        LevelRecord r;
        r.h = std::stod(f[0]);
        r.value = std::stod(f[1]);
        r.avg_policy_iterations = std::stod(f[2]);
        r.avg_linear_iterations = std::stod(f[3]);
        if (!f[4].empty()) r.ratio = std::stod(f[4]);
        r.seconds = std::stod(f[5]);
        rep.rows.push_back(r);
    }
    return rep;
}

ConvergenceReport parse_table_json(std::istream& is) {
    nlohmann::json j;
    is >> j;
    ConvergenceReport rep;
    rep.problem = j.value("problem", "");
    rep.scheme = j.value("scheme", "");
    for (const auto& jr : j.at("rows")) {
        LevelRecord r;
        r.h = jr.at("h").get<double>();
        r.value = jr.at("value").get<double>();
        r.avg_policy_iterations = jr.at("avg_policy_its").get<double>();
        r.avg_linear_iterations = jr.at("avg_linear_its").get<double>();
        if (jr.contains("ratio")) r.ratio = jr.at("ratio").get<double>();
        r.seconds = jr.at("time_s").get<double>();
        rep.rows.push_back(r);
    }
    return rep;
}

void export_control_field(const ImpulseProblem& prob, const TensorGrid& grid, const TimeGrid& tg,
                          const Solution& sol, int layer, const SchemeConfig& scfg,
                          std::ostream& os) {
    if (sol.layers.empty()) throw std::invalid_argument("export_control_field: empty solution");
    if (layer < 1 || layer >= static_cast<int>(sol.layers.size()))
        throw std::invalid_argument("export_control_field: layer out of range");
    const auto controls = recover_controls(prob, grid, tg, sol, layer, scfg);
    const Vec& v = sol.layers[static_cast<size_t>(layer)];
    if (grid.dim() == 1)
        os << "x,value,w,d,z\n";
    else
        os << "x0,x1,value,w,d,z\n";
    for (int i = 0; i < grid.nodes(); ++i) {
        const State x = grid.coords(i);
        os << exact(x[0]) << ',';
        if (grid.dim() == 2) os << exact(x[1]) << ',';
        const auto& c = controls[static_cast<size_t>(i)];
        os << exact(v[static_cast<size_t>(i)]) << ',' << exact(c.w) << ',' << c.d << ','
           << exact(c.z) << '\n';
    }
}

} // namespace qvi
