// Refinement studies: run a benchmark x scheme across levels h = 1, 1/2, ...,
// compute probe values, successive-change ratios and iteration statistics,
// and emit tables.
#ifndef QVI_STUDY_HPP
#define QVI_STUDY_HPP

#include <iosfwd>
#include <optional>
#include <string>

#include "qvi/problems.hpp"

namespace qvi {

enum class TableFormat { csv, json, pretty };

struct StudySpec {
    std::string problem = "fex"; // fex | consumption | gmwb | consumption-infinite | mdp-random
    Scheme scheme = Scheme::penalty;
    int levels = 3;
    std::optional<State> probe{}; // defaults to the benchmark's probe point
    double tolerance = 1e-6;
    double scale = 1.0;
    double linear_rtol = 1e-10;
    bool strict = false; // M-matrix debug checks on; stability violations are fatal
    unsigned seed = 1;   // mdp-random
    int mdp_states = 8;
    int mdp_controls = 4;

    FexParams fex{};
    ConsumptionParams consumption{};
    GmwbParams gmwb{};
};

struct LevelRecord {
    double h = 1.0;
    double value = 0.0;
    double avg_policy_iterations = 0.0;
    double avg_linear_iterations = 0.0;
    std::optional<double> ratio{};
    double seconds = 0.0;
};

struct ConvergenceReport {
    std::string problem;
    std::string scheme;
    std::vector<LevelRecord> rows;
    std::vector<std::string> warnings;
};

// (v1 - v0) / (v2 - v1); empty on a zero denominator.
std::optional<double> successive_ratio(double v0, double v1, double v2);

ConvergenceReport run_study(const StudySpec& spec);

const char* scheme_name(Scheme s);
Scheme parse_scheme(const std::string& name);

// Deterministic column order: h, value, avg_policy_its, avg_linear_its,
// ratio, time_s. csv/json round-trip exactly; pretty prints values with 12
// significant digits.
void emit_table(const ConvergenceReport& report, TableFormat format, std::ostream& os);
ConvergenceReport parse_table_csv(std::istream& is);
ConvergenceReport parse_table_json(std::istream& is);

// CSV of (coordinates, value, w*, d*, z*) for one solved layer.
void export_control_field(const ImpulseProblem& prob, const TensorGrid& grid, const TimeGrid& tg,
                          const Solution& sol, int layer, const SchemeConfig& scfg,
                          std::ostream& os);

} // namespace qvi

#endif
