// hartlab command-line front end.  All functionality comes through the C API
// in hartlab/hartlab.h; this translation unit never touches the C++ core.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "hartlab/hartlab.h"

namespace {

struct Common {
    std::string config;
    std::string out;
    bool csv = false;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "scenario JSON file")->required();
    cmd->add_option("--out", c.out, "write the report here instead of stdout");
    cmd->add_flag("--csv", c.csv, "emit CSV instead of JSON");
    cmd->add_option("--seed", c.seed, "override the scenario seed")
        ->each([&c](const std::string&) { c.seed_set = true; });
}

hl_scenario* load(const Common& c) {
    hl_scenario* sc = hl_scenario_from_file(c.config.c_str());
    if (sc != nullptr && c.seed_set) hl_scenario_set_seed(sc, c.seed);
    return sc;
}

int fail_from_status() {
    std::cerr << "error: " << hl_last_error() << "\n";
    return hl_last_status() == HL_CONFIG_ERROR ? 2 : 1;
}

bool wants_csv(const Common& c) {
    return c.csv || (c.out.size() >= 4 && c.out.ends_with(".csv"));
}

// Writes the report (respecting --out/--csv) and converts pass/fail to the
// exit code.  Consumes the report.
int emit(hl_report* rep, const Common& c, bool print_table = false) {
    if (rep == nullptr) return fail_from_status();
    if (print_table) std::cout << hl_report_table(rep);
    const char* text = wants_csv(c) ? hl_report_csv(rep) : hl_report_json(rep);
    int rc = hl_report_passed(rep) != 0 ? 0 : 1;
    if (!c.out.empty()) {
        std::ofstream file(c.out);
        if (!file) {
            std::cerr << "error: cannot write " << c.out << "\n";
            rc = 2;
        } else {
            file << text;
        }
    } else if (!print_table) {
        std::cout << text;
    }
    hl_report_free(rep);
    return rc;
}

bool parse_tau_grid(const std::string& text, double& lo, double& hi, int& count) {
    const std::size_t first = text.find(':');
    const std::size_t second = text.find(':', first + 1);
    if (first == std::string::npos || second == std::string::npos) return false;
    try {
        lo = std::stod(text.substr(0, first));
        hi = std::stod(text.substr(first + 1, second - first - 1));
        count = std::stoi(text.substr(second + 1));
    } catch (...) {
        return false;
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-weight inequality diagnostics"};
    app.set_version_flag("--version", hl_version());
    app.require_subcommand(1);

    Common c_constants, c_verify, c_surgery, c_corona, c_ensemble;

    CLI::App* constants =
        app.add_subcommand("constants", "compute every constant for one scenario");
    add_common(constants, c_constants);
    int grids = 0;
    constants->add_option("--grids", grids, "number of random dyadic systems");

    CLI::App* verify = app.add_subcommand("verify", "run a module's invariant suite");
    std::string module = "all";
    verify->add_option("module", module,
                       "space|dyadic|haar|operators|constants|corona|harness|all");
    add_common(verify, c_verify);

    CLI::App* surgery = app.add_subcommand("surgery", "boundary-layer probability table");
    add_common(surgery, c_surgery);
    std::string tau_grid;
    int trials_surgery = 0;
    surgery->add_option("--tau-grid", tau_grid, "lo:hi:count, e.g. 0.02:0.2:10");
    surgery->add_option("--trials", trials_surgery, "Monte Carlo trials per tau");

    CLI::App* corona = app.add_subcommand("corona", "stopping-cube and corona diagnostics");
    add_common(corona, c_corona);
    std::string modes;
    corona->add_option("--modes", modes,
                       "comma list: stopping_mass,paraproduct,alpha,beta,gamma");

    CLI::App* ensemble = app.add_subcommand("ensemble", "random-weight trial sweep");
    add_common(ensemble, c_ensemble);
    int trials_ensemble = 100;
    bool pair = false;
    ensemble->add_option("--trials", trials_ensemble, "number of trials");
    ensemble->add_flag("--pair", pair, "also run at twice the point count");

    CLI11_PARSE(app, argc, argv);

    if (constants->parsed()) {
        hl_scenario* sc = load(c_constants);
        if (sc == nullptr) return fail_from_status();
        if (grids > 0 && hl_scenario_set_grids(sc, grids) != HL_OK) {
            hl_scenario_free(sc);
            return fail_from_status();
        }
        hl_report* rep = hl_run_scenario(sc);
        hl_scenario_free(sc);
        return emit(rep, c_constants);
    }

    if (verify->parsed()) {
        hl_scenario* sc = load(c_verify);
        if (sc == nullptr) return fail_from_status();
        hl_report* rep = hl_run_verify(sc, module.c_str());
        hl_scenario_free(sc);
        return emit(rep, c_verify, /*print_table=*/true);
    }

    if (surgery->parsed()) {
        hl_scenario* sc = load(c_surgery);
        if (sc == nullptr) return fail_from_status();
        if (!tau_grid.empty()) {
            double lo = 0.0, hi = 0.0;
            int count = 0;
            if (!parse_tau_grid(tau_grid, lo, hi, count)) {
                std::cerr << "error: --tau-grid expects lo:hi:count\n";
                hl_scenario_free(sc);
                return 2;
            }
            if (hl_scenario_set_tau_grid(sc, lo, hi, count) != HL_OK) {
                hl_scenario_free(sc);
                return fail_from_status();
            }
        }
        if (trials_surgery > 0 && hl_scenario_set_surgery_trials(sc, trials_surgery) != HL_OK) {
            hl_scenario_free(sc);
            return fail_from_status();
        }
        hl_report* rep = hl_run_surgery(sc);
        hl_scenario_free(sc);
        return emit(rep, c_surgery);
    }

    if (corona->parsed()) {
        hl_scenario* sc = load(c_corona);
        if (sc == nullptr) return fail_from_status();
        hl_report* rep = hl_run_corona(sc, modes.c_str());
        hl_scenario_free(sc);
        return emit(rep, c_corona);
    }

    hl_scenario* sc = load(c_ensemble);
    if (sc == nullptr) return fail_from_status();
    hl_report* rep = hl_run_ensemble(sc, trials_ensemble, pair ? 1 : 0);
    hl_scenario_free(sc);
    return emit(rep, c_ensemble);
}
