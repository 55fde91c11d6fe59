#include "hartlab/hartlab.h"

#include <exception>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hartlab/errors.hpp"
#include "hartlab/harness.hpp"
#include "hartlab/verify.hpp"

struct hl_scenario {
    hartlab::Scenario sc;
    std::string canonical;  // cache for hl_scenario_canonical_json
};

struct hl_report {
    std::string json;
    std::string csv;
    std::string table;
    bool passed = true;
};

namespace {

thread_local std::string g_error;
thread_local hl_status g_status = HL_OK;

void set_error(hl_status status, const char* what) {
    g_status = status;
    g_error = what;
}

template <typename F>
auto guarded(F&& fn) -> decltype(fn()) {
    try {
        g_status = HL_OK;
        g_error.clear();
        return fn();
    } catch (const hartlab::ConfigError& e) {
        set_error(HL_CONFIG_ERROR, e.what());
    } catch (const std::exception& e) {
        set_error(HL_RUNTIME_ERROR, e.what());
    } catch (...) {
        set_error(HL_RUNTIME_ERROR, "unknown failure");
    }
    return nullptr;
}

template <typename F>
hl_status guarded_status(F&& fn) {
    try {
        g_status = HL_OK;
        g_error.clear();
        fn();
        return HL_OK;
    } catch (const hartlab::ConfigError& e) {
        set_error(HL_CONFIG_ERROR, e.what());
    } catch (const std::exception& e) {
        set_error(HL_RUNTIME_ERROR, e.what());
    } catch (...) {
        set_error(HL_RUNTIME_ERROR, "unknown failure");
    }
    return g_status;
}

}  // namespace

extern "C" {

const char* hl_version(void) { return "hartlab 1.0.0"; }

hl_scenario* hl_scenario_from_json(const char* text) {
    if (text == nullptr) {
        set_error(HL_CONFIG_ERROR, "null config text");
        return nullptr;
    }
    return guarded([&]() -> hl_scenario* {
        return new hl_scenario{hartlab::Scenario::from_json_string(text), {}};
    });
}

hl_scenario* hl_scenario_from_file(const char* path) {
    if (path == nullptr) {
        set_error(HL_CONFIG_ERROR, "null config path");
        return nullptr;
    }
    return guarded(
        [&]() -> hl_scenario* { return new hl_scenario{hartlab::Scenario::from_file(path), {}}; });
}

void hl_scenario_free(hl_scenario* sc) { delete sc; }

hl_status hl_scenario_set_seed(hl_scenario* sc, uint64_t seed) {
    if (sc == nullptr) {
        set_error(HL_CONFIG_ERROR, "null scenario");
        return HL_CONFIG_ERROR;
    }
    sc->sc.seed = seed;
    return HL_OK;
}

hl_status hl_scenario_set_grids(hl_scenario* sc, int grids) {
    if (sc == nullptr) {
        set_error(HL_CONFIG_ERROR, "null scenario");
        return HL_CONFIG_ERROR;
    }
    return guarded_status([&] {
        sc->sc.grids = grids;
        sc->sc.validate();
    });
}

hl_status hl_scenario_set_tau_grid(hl_scenario* sc, double lo, double hi, int count) {
    if (sc == nullptr) {
        set_error(HL_CONFIG_ERROR, "null scenario");
        return HL_CONFIG_ERROR;
    }
    return guarded_status([&] {
        if (count < 1) throw hartlab::ConfigError("tau grid needs at least one value");
        if (!(lo >= 0.0 && hi >= lo && hi <= 1.0))
            throw hartlab::ConfigError("tau grid must satisfy 0 <= lo <= hi <= 1");
        std::vector<double> taus;
        taus.reserve(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i)
            taus.push_back(count == 1 ? lo : lo + (hi - lo) * i / (count - 1));
        sc->sc.surgery_taus = std::move(taus);
        sc->sc.validate();
    });
}

hl_status hl_scenario_set_surgery_trials(hl_scenario* sc, int trials) {
    if (sc == nullptr) {
        set_error(HL_CONFIG_ERROR, "null scenario");
        return HL_CONFIG_ERROR;
    }
    return guarded_status([&] {
        sc->sc.surgery_trials = trials;
        sc->sc.validate();
    });
}

const char* hl_scenario_canonical_json(hl_scenario* sc) {
    if (sc == nullptr) {
        set_error(HL_CONFIG_ERROR, "null scenario");
        return nullptr;
    }
    return guarded([&]() -> const char* {
        sc->canonical = sc->sc.to_canonical_json();
        return sc->canonical.c_str();
    });
}

hl_report* hl_run_scenario(const hl_scenario* sc) {
    if (sc == nullptr) {
        set_error(HL_CONFIG_ERROR, "null scenario");
        return nullptr;
    }
    return guarded([&]() -> hl_report* {
        const hartlab::RunReport rep = hartlab::run_scenario(sc->sc);
        return new hl_report{rep.to_json(), rep.to_csv(), {}, rep.passed()};
    });
}

hl_report* hl_run_surgery(const hl_scenario* sc) {
    if (sc == nullptr) {
        set_error(HL_CONFIG_ERROR, "null scenario");
        return nullptr;
    }
    return guarded([&]() -> hl_report* {
        if (sc->sc.surgery_taus.empty())
            throw hartlab::ConfigError("surgery: no taus configured");
        const std::vector<hartlab::SurgeryRow> rows = hartlab::surgery_table(sc->sc);
        nlohmann::json table = nlohmann::json::array();
        for (const hartlab::SurgeryRow& row : rows) {
            nlohmann::json r{{"tau", row.tau},
                             {"estimate", row.estimate},
                             {"stderr", row.stderr_est}};
            if (row.analytic >= 0.0)
                r["analytic_1d"] = row.analytic;
            else
                r["analytic_1d"] = nullptr;
            table.push_back(std::move(r));
        }
        return new hl_report{table.dump(2) + "\n", hartlab::surgery_csv(rows), {}, true};
    });
}

hl_report* hl_run_corona(const hl_scenario* sc, const char* modes_csv) {
    if (sc == nullptr) {
        set_error(HL_CONFIG_ERROR, "null scenario");
        return nullptr;
    }
    return guarded([&]() -> hl_report* {
        std::vector<hartlab::CoronaMode> modes;
        if (modes_csv == nullptr || *modes_csv == '\0') {
            modes = {hartlab::CoronaMode::stopping_mass, hartlab::CoronaMode::paraproduct,
                     hartlab::CoronaMode::alpha, hartlab::CoronaMode::beta,
                     hartlab::CoronaMode::gamma};
        } else {
            std::istringstream in(modes_csv);
            std::string token;
            while (std::getline(in, token, ','))
                if (!token.empty()) modes.push_back(hartlab::corona_mode_from_string(token));
            if (modes.empty()) throw hartlab::ConfigError("corona: empty mode list");
        }
        const hartlab::CoronaRunReport rep = hartlab::run_corona(sc->sc, modes);
        return new hl_report{rep.to_json(), rep.to_csv(), {}, rep.passed()};
    });
}

hl_report* hl_run_ensemble(const hl_scenario* sc, int trials, int pair) {
    if (sc == nullptr) {
        set_error(HL_CONFIG_ERROR, "null scenario");
        return nullptr;
    }
    return guarded([&]() -> hl_report* {
        if (pair != 0) {
            const hartlab::EnsemblePair ep = hartlab::run_ensemble_pair(sc->sc, trials);
            const bool ok = ep.base.all_passed && ep.base.all_finite && ep.doubled.all_passed &&
                            ep.doubled.all_finite;
            return new hl_report{ep.to_json(), ep.base.to_csv() + ep.doubled.to_csv(), {}, ok};
        }
        const hartlab::EnsembleSummary ens = hartlab::run_ensemble(sc->sc, trials);
        return new hl_report{ens.to_json(), ens.to_csv(), {},
                             ens.all_passed && ens.all_finite};
    });
}

hl_report* hl_run_verify(const hl_scenario* sc, const char* module) {
    if (sc == nullptr) {
        set_error(HL_CONFIG_ERROR, "null scenario");
        return nullptr;
    }
    return guarded([&]() -> hl_report* {
        const hartlab::VerifyReport rep =
            hartlab::run_verify(sc->sc, module == nullptr ? "all" : module);
        std::string csv = "name,value,bound,hard,passed\n";
        for (const hartlab::CheckResult& c : rep.checks) {
            csv += c.name;
            csv += ',';
            csv += std::to_string(c.value);
            csv += ',';
            csv += std::to_string(c.bound);
            csv += ',';
            csv += c.hard ? '1' : '0';
            csv += ',';
            csv += c.passed ? '1' : '0';
            csv += '\n';
        }
        return new hl_report{rep.to_json(), std::move(csv), rep.table(), rep.passed()};
    });
}

void hl_report_free(hl_report* rep) { delete rep; }

const char* hl_report_json(const hl_report* rep) { return rep == nullptr ? "" : rep->json.c_str(); }

const char* hl_report_csv(const hl_report* rep) { return rep == nullptr ? "" : rep->csv.c_str(); }

const char* hl_report_table(const hl_report* rep) {
    return rep == nullptr ? "" : rep->table.c_str();
}

int hl_report_passed(const hl_report* rep) {
    return rep != nullptr && rep->passed ? 1 : 0;
}

const char* hl_last_error(void) { return g_error.c_str(); }

hl_status hl_last_status(void) { return g_status; }

}  // extern "C"
