#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hartlab/constants.hpp"
#include "hartlab/corona.hpp"
#include "hartlab/dyadic.hpp"
#include "hartlab/operators.hpp"
#include "hartlab/space.hpp"

namespace hartlab {

// A full experiment description, parsed from a single JSON config.  Every
// field has a default, unknown keys are rejected, and schema errors carry the
// JSON pointer of the offending entry.
struct Scenario {
    // space
    std::string space_type = "grid1d";  // grid1d | grid2d | tree | points
    int points = 256;
    std::string base = "lebesgue";  // lebesgue | bessel (grid1d only)
    double bessel_lambda = 1.0;
    double lo = 0.0, hi = 1.0;
    double a0 = 1.0;
    std::vector<std::vector<double>> coords;  // "points" type
    std::vector<double> masses;

    // kernel; "custom" uses `entries` verbatim (zero diagonal required)
    std::string kernel_kind = "hilbert1d";  // zero | hilbert1d | riesz | power | custom
    Kernel kernel;
    std::vector<std::vector<double>> entries;

    // weight pair: power |x-a|^beta, log-normal, disjoint-support coin flip,
    // spike over a flat background, or explicit atom lists
    std::string family = "lognormal";
    double sigma = 0.6;
    double power_a = 0.5, power_beta = 0.5;
    double power_a_dual = 0.5, power_beta_dual = -0.5;
    int spike_atom = -1;  // -1: drawn from the "weight-spike" stream
    double spike_mass = 100.0;
    double background = 1e-3;
    std::vector<double> explicit_u, explicit_v;

    // two-weight and grid parameters
    TwoWeightParams params;
    double delta = 0.5;
    int r = 2;
    double eps = 0.5;
    int k_min = 0;
    int k_max = DyadicParams::kAutoDepth;

    // run controls
    std::uint64_t seed = 1;
    int grids = 4;

    // diagnostics
    bool lemmas = false;
    int lemma_samples = 200;
    std::vector<double> surgery_taus;
    int surgery_trials = 2000;
    int surgery_level = 3;
    int surgery_point = -1;  // -1: middle point
    bool emit_timestamp = false;

    static Scenario from_json_string(const std::string& text);
    static Scenario from_file(const std::string& path);
    void validate() const;
    std::string to_canonical_json() const;  // defaults materialized, sorted keys
};

Space make_space(const Scenario& sc);
OperatorMatrix make_operator(const Scenario& sc, const Space& space);
std::pair<Measure, Measure> make_weights(const Scenario& sc, const Space& space,
                                         std::uint64_t seed);
std::vector<DyadicSystem> make_grids(const Scenario& sc, const Space& space, std::uint64_t seed);

struct SurgeryRow {
    double tau = 0.0;
    double estimate = 0.0;
    double stderr_est = 0.0;
    double analytic = -1.0;  // 2*tau on shifted 1D grids, -1 when not available
};

struct CoronaDiagnostics {
    int stopping_cubes = 0;
    int max_generation = 0;
    double pivotal_used = 0.0;
    bool quarter_passed = true;
    double quarter_max = 0.0;
    double generation_excess = 0.0;
    double carleson_mass = 0.0;
    std::map<std::string, double> measured;  // paraproduct, alpha(+per-t), beta, gamma
};

struct RunReport {
    std::string scenario;  // canonical config echo
    std::uint64_t seed = 0;
    int points = 0;
    double resolution = 0.0;
    ConstantsReport constants;
    CoronaDiagnostics corona;
    std::vector<SurgeryRow> surgery;
    bool lemmas_run = false;
    MeasuredConstant lemma_offsupport, lemma_decay, lemma_wbp;
    bool common_atom = false;
    std::string timestamp;  // empty unless requested (kept out of the byte contract)

    bool passed() const { return corona.quarter_passed; }
    std::string to_json() const;
    std::string to_csv() const;  // one row per grid
};

// constants + corona hard checks + requested diagnostics over `grids` systems
RunReport run_scenario(const Scenario& sc);

// The boundary-layer table alone (one row per configured tau).
std::vector<SurgeryRow> surgery_table(const Scenario& sc, const Space& space);
std::vector<SurgeryRow> surgery_table(const Scenario& sc);
std::string surgery_csv(const std::vector<SurgeryRow>& rows);

// The corona diagnostics alone, restricted to the requested modes.
struct CoronaRunReport {
    CoronaDiagnostics diag;
    std::vector<CoronaVerification> results;

    bool passed() const;
    std::string to_json() const;
    std::string to_csv() const;  // one row per mode
};
CoronaRunReport run_corona(const Scenario& sc, const std::vector<CoronaMode>& modes);

struct TrialRow {
    int trial = 0;
    std::uint64_t seed = 0;
    double a2 = 0.0, testing = 0.0, pivotal = 0.0, norm = 0.0, ratio = 0.0;
    bool quarter_passed = true;
};

struct EnsembleSummary {
    int points = 0;
    int trials = 0;
    std::vector<TrialRow> rows;  // ordered by trial index
    double ratio_mean = 0.0;
    double ratio_min = 0.0, ratio_p25 = 0.0, ratio_median = 0.0, ratio_p75 = 0.0,
           ratio_p95 = 0.0, ratio_max = 0.0;
    bool all_finite = true;
    bool all_passed = true;

    std::string to_json() const;
    std::string to_csv() const;  // one row per trial
};

// Trial 0 reuses the master seed (trials=1 reduces to run_scenario);
// later trials draw their seed from the "trial" sub-stream.  Trials run on a
// thread pool; rows are reduced in trial order.
EnsembleSummary run_ensemble(const Scenario& sc, int trials);

struct EnsemblePair {
    EnsembleSummary base, doubled;
    double max_growth = 0.0;  // doubled max ratio / base max ratio

    std::string to_json() const;
};

// The same ensemble at `points` and `2*points`.
EnsemblePair run_ensemble_pair(const Scenario& sc, int trials);

}  // namespace hartlab
