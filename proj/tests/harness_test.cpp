#include <cmath>
#include <fstream>
#include <string>

#include "doctest.h"
#include "hartlab/errors.hpp"
#include "hartlab/harness.hpp"

using namespace hartlab;

namespace {

const char* kHandScenario = R"({
  "space": {"type": "points", "coords": [[0.25], [0.75]], "masses": [0.5, 0.5], "a0": 1.0},
  "kernel": {"kind": "custom", "entries": [[0.0, 2.0], [-2.0, 0.0]]},
  "weights": {"family": "explicit", "u": [1.0, 4.0], "v": [9.0, 1.0]},
  "grids": 1,
  "seed": 3
})";

Scenario small_lognormal(int points, std::uint64_t seed) {
    Scenario sc;
    sc.points = points;
    sc.kernel_kind = "hilbert1d";
    sc.family = "lognormal";
    sc.grids = 2;
    sc.seed = seed;
    return sc;
}

}  // namespace

TEST_CASE("zero kernel: testing and norm vanish, weight constants do not") {
    Scenario sc = Scenario::from_json_string(R"({
      "space": {"points": 32},
      "kernel": {"kind": "zero"},
      "weights": {"family": "lognormal", "sigma": 0.4},
      "grids": 2,
      "seed": 5
    })");
    const RunReport rep = run_scenario(sc);
    CHECK(rep.constants.norm == 0.0);
    CHECK(rep.constants.testing == 0.0);
    CHECK(rep.constants.testing_dual == 0.0);
    CHECK(rep.constants.a2 > 0.0);
    CHECK(rep.constants.pivotal > 0.0);
    CHECK(rep.constants.ratio == 0.0);
    CHECK(rep.corona.quarter_passed);
    CHECK(rep.points == 32);
}

TEST_CASE("two-point hand scenario reproduces the exact constants") {
    const Scenario sc = Scenario::from_json_string(kHandScenario);
    const RunReport rep = run_scenario(sc);
    CHECK(rep.constants.norm == doctest::Approx(12.0).epsilon(1e-12));
    CHECK(rep.constants.testing == doctest::Approx(std::sqrt(580.0 / 5.0)).epsilon(1e-12));
    CHECK(rep.constants.testing_dual == doctest::Approx(std::sqrt(130.0)).epsilon(1e-12));
    CHECK(rep.points == 2);
    CHECK(rep.constants.per_grid.size() == 1);
}

TEST_CASE("reports are byte-deterministic for a fixed seed") {
    const Scenario sc = small_lognormal(48, 11);
    const RunReport a = run_scenario(sc);
    const RunReport b = run_scenario(sc);
    CHECK(a.to_json() == b.to_json());
    CHECK(a.to_csv() == b.to_csv());
    CHECK(a.to_json().find("\"generated_at\"") == std::string::npos);

    Scenario stamped = sc;
    stamped.emit_timestamp = true;
    CHECK(run_scenario(stamped).to_json().find("\"generated_at\"") != std::string::npos);
}

TEST_CASE("a one-trial ensemble matches run_scenario") {
    const Scenario sc = small_lognormal(48, 21);
    const RunReport rep = run_scenario(sc);
    const EnsembleSummary ens = run_ensemble(sc, 1);
    REQUIRE(ens.rows.size() == 1);
    const TrialRow& row = ens.rows[0];
    CHECK(row.seed == sc.seed);
    CHECK(row.a2 == std::max(rep.constants.a2, rep.constants.a2_dual));
    CHECK(row.testing == std::max(rep.constants.testing, rep.constants.testing_dual));
    CHECK(row.pivotal == std::max(rep.constants.pivotal, rep.constants.pivotal_dual));
    CHECK(row.norm == rep.constants.norm);
    CHECK(row.ratio == rep.constants.ratio);
    CHECK(row.quarter_passed == rep.corona.quarter_passed);
    CHECK(ens.ratio_min == ens.ratio_max);
}

TEST_CASE("disjoint family yields pointwise-disjoint supports") {
    Scenario sc = small_lognormal(64, 7);
    sc.family = "disjoint";
    const Space space = make_space(sc);
    const auto [u, v] = make_weights(sc, space, sc.seed);
    REQUIRE(u.atoms.size() == 64);
    for (std::size_t i = 0; i < u.atoms.size(); ++i) CHECK(u.atoms[i] * v.atoms[i] == 0.0);
    CHECK(u.total() > 0.0);
    CHECK(v.total() > 0.0);
}

TEST_CASE("spike family honours the requested atom") {
    Scenario sc = small_lognormal(16, 9);
    sc.family = "spike";
    sc.spike_atom = 5;
    sc.spike_mass = 42.0;
    sc.background = 1e-3;
    const Space space = make_space(sc);
    const auto [u, v] = make_weights(sc, space, sc.seed);
    for (int i = 0; i < 16; ++i) {
        CHECK(u.atoms[static_cast<std::size_t>(i)] > 0.0);
        CHECK(v.atoms[static_cast<std::size_t>(i)] == (i == 5 ? 42.0 : 1e-3));
    }
}

TEST_CASE("schema violations carry the JSON pointer") {
    const auto message = [](const char* text) {
        try {
            (void)Scenario::from_json_string(text);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message(R"({"space": {"pionts": 32}})").find("config/space/pionts") !=
          std::string::npos);
    CHECK(message(R"({"space": {"points": "many"}})").find("config/space/points") !=
          std::string::npos);
    CHECK(message(R"({"kernel": {"kind": "custom"}})").find("config/kernel/entries") !=
          std::string::npos);
    CHECK(message(R"({"kernel": {"entries": [[0.0]]}})").find("config/kernel/entries") !=
          std::string::npos);
    CHECK(message(R"({"weights": {"family": "explicit"}})").find("config/weights/u") !=
          std::string::npos);
    CHECK(message(R"({"seed": -4})").find("config/seed") != std::string::npos);
    CHECK(message(R"({"grids": 0})").find("config/grids") != std::string::npos);
    CHECK(message(R"({"diagnostics": {"surgery_taus": [1.5]}})")
              .find("config/diagnostics/surgery_taus") != std::string::npos);
    CHECK(message(R"({"params": {"delta": 1.0}})").find("config/params/delta") !=
          std::string::npos);
    CHECK(message("{nope").find("invalid JSON") != std::string::npos);
}

TEST_CASE("config round-trips through a file") {
    const std::string path = "harness_test_config.json";
    {
        std::ofstream out(path);
        out << kHandScenario;
    }
    const Scenario a = Scenario::from_file(path);
    const Scenario b = Scenario::from_json_string(kHandScenario);
    CHECK(a.to_canonical_json() == b.to_canonical_json());
    // the canonical echo re-parses to the same scenario
    const Scenario c = Scenario::from_json_string(a.to_canonical_json());
    CHECK(c.to_canonical_json() == a.to_canonical_json());
    CHECK_THROWS_AS(Scenario::from_file("no_such_file.json"), ConfigError);
}

TEST_CASE("ensemble quantiles are ordered and stable across master seeds") {
    const EnsembleSummary a = run_ensemble(small_lognormal(64, 101), 12);
    CHECK(a.all_finite);
    CHECK(a.all_passed);
    CHECK(a.ratio_min <= a.ratio_p25);
    CHECK(a.ratio_p25 <= a.ratio_median);
    CHECK(a.ratio_median <= a.ratio_p75);
    CHECK(a.ratio_p75 <= a.ratio_p95);
    CHECK(a.ratio_p95 <= a.ratio_max);
    CHECK(a.ratio_mean > 0.0);
    for (std::size_t t = 0; t < a.rows.size(); ++t)
        CHECK(a.rows[t].trial == static_cast<int>(t));

    const EnsembleSummary b = run_ensemble(small_lognormal(64, 202), 12);
    const double hi = std::max(a.ratio_p95, b.ratio_p95);
    CHECK(std::abs(a.ratio_p95 - b.ratio_p95) <= 0.5 * hi);
}

TEST_CASE("ensemble pair doubles the point count") {
    Scenario sc = small_lognormal(32, 31);
    sc.grids = 1;
    const EnsemblePair pair = run_ensemble_pair(sc, 4);
    CHECK(pair.base.points == 32);
    CHECK(pair.doubled.points == 64);
    CHECK(pair.max_growth > 0.0);
    CHECK(std::isfinite(pair.max_growth));
    CHECK(pair.to_json().find("max_growth") != std::string::npos);
}

TEST_CASE("surgery table reports the analytic boundary weight on a shifted line") {
    Scenario sc = small_lognormal(64, 13);
    sc.surgery_taus = {0.1, 0.2};
    sc.surgery_trials = 400;
    sc.surgery_level = 2;
    const RunReport rep = run_scenario(sc);
    REQUIRE(rep.surgery.size() == 2);
    CHECK(rep.surgery[0].tau == 0.1);
    CHECK(rep.surgery[0].analytic == doctest::Approx(0.2));
    CHECK(rep.surgery[1].analytic == doctest::Approx(0.4));
    for (const SurgeryRow& row : rep.surgery) {
        CHECK(row.estimate >= 0.0);
        CHECK(row.estimate <= 1.0);
        CHECK(row.stderr_est >= 0.0);
    }

    // generic-mode spaces have no closed-form boundary weight
    Scenario tree = sc;
    tree.space_type = "tree";
    tree.kernel_kind = "zero";
    tree.points = 32;
    tree.delta = 1.0 / 16.0;
    tree.surgery_taus = {0.1};
    tree.surgery_level = 1;
    const RunReport trep = run_scenario(tree);
    REQUIRE(trep.surgery.size() == 1);
    CHECK(trep.surgery[0].analytic == -1.0);
}

TEST_CASE("lemma diagnostics populate when requested") {
    Scenario sc = small_lognormal(64, 17);
    sc.lemmas = true;
    sc.lemma_samples = 40;
    const RunReport rep = run_scenario(sc);
    CHECK(rep.lemmas_run);
    CHECK(rep.lemma_offsupport.samples > 0);
    CHECK(rep.lemma_offsupport.value >= 0.0);
    CHECK(rep.lemma_decay.samples > 0);
    CHECK(rep.lemma_wbp.value > 0.0);
    CHECK(rep.to_json().find("\"wbp\"") != std::string::npos);

    const RunReport quiet = run_scenario(small_lognormal(64, 17));
    CHECK_FALSE(quiet.lemmas_run);
    CHECK(quiet.to_json().find("\"wbp\"") == std::string::npos);
}

TEST_CASE("corona diagnostics surface the verification modes") {
    Scenario sc = small_lognormal(64, 19);
    sc.family = "spike";
    const RunReport rep = run_scenario(sc);
    CHECK(rep.corona.pivotal_used > 0.0);
    CHECK(rep.corona.quarter_max <= 0.25 + 1e-12);
    CHECK(rep.corona.generation_excess <= 1.0 + 1e-12);
    for (const char* key : {"paraproduct", "alpha", "beta", "gamma", "alpha_t=1", "alpha_t=2",
                            "alpha_t=3"}) {
        REQUIRE(rep.corona.measured.count(key) == 1);
        CHECK(rep.corona.measured.at(key) >= 0.0);
        CHECK(std::isfinite(rep.corona.measured.at(key)));
    }
}
