#include "slowbond/experiment.hpp"

#include "slowbond/pde.hpp"

#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace slowbond;

namespace {

constexpr double kPi = std::numbers::pi;

const char* kGoodConfig = R"({
  "beta": "0.5",
  "slow_points": ["0.5"],
  "N_list": [16, 32],
  "replicas": 20,
  "horizon": 0.01,
  "record_times": [0.0, 0.01],
  "profile": {"type": "cosine", "mean": 0.5, "amplitude": 0.3},
  "eps_mollify": 0.1,
  "pde_m": 64,
  "seed": 99
})";

bool mentions(const std::vector<std::string>& issues, const std::string& needle) {
    for (const std::string& s : issues) {
        if (s.find(needle) != std::string::npos) return true;
    }
    return false;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

ExperimentConfig tiny_config() {
    const ParsedConfig parsed = load_config(R"({
      "beta": "3",
      "slow_points": ["0.25", "0.75"],
      "N_list": [16, 32],
      "replicas": 20,
      "horizon": 0.01,
      "record_times": [0.0, 0.01],
      "profile": {"type": "step", "edges": [0.25, 0.75], "values": [0.8, 0.2]},
      "eps_mollify": 0.1,
      "pde_m": 64,
      "seed": 99
    })");
    REQUIRE(parsed.issues.empty());
    return parsed.cfg;
}

}  // namespace

TEST_CASE("config parsing") {
    SUBCASE("well-formed input") {
        const ParsedConfig p = load_config(kGoodConfig);
        CHECK(p.parse_ok);
        CHECK(p.issues.empty());
        CHECK(p.cfg.beta == 0.5);
        CHECK(p.cfg.beta_text == "0.5");
        REQUIRE(p.cfg.slow_points.size() == 1);
        CHECK(p.cfg.slow_points[0].num == 1);
        CHECK(p.cfg.slow_points[0].den == 2);
        CHECK(p.cfg.n_list == std::vector<std::int64_t>{16, 32});
        CHECK(p.cfg.replicas == 20);
        CHECK(p.cfg.horizon == 0.01);
        CHECK(p.cfg.eps_mollify == 0.1);
        CHECK(p.cfg.pde_m == 64);
        CHECK(p.cfg.pde_dt == 1e-4);  // default
        CHECK(p.cfg.seed == 99);
        CHECK(p.cfg.profile.name.find("cosine") != std::string::npos);
    }

    SUBCASE("numeric beta is accepted") {
        std::string text = kGoodConfig;
        text.replace(text.find("\"0.5\""), 5, "0.5");
        const ParsedConfig p = load_config(text);
        CHECK(p.issues.empty());
        CHECK(p.cfg.beta == 0.5);
    }

    SUBCASE("broken json") {
        const ParsedConfig p = load_config("{\"beta\": ");
        CHECK(!p.parse_ok);
        CHECK(!p.issues.empty());
    }

    SUBCASE("unknown keys are rejected") {
        std::string text = kGoodConfig;
        text.insert(text.rfind('}'), ", \"extra_knob\": 1");
        const ParsedConfig p = load_config(text);
        CHECK(mentions(p.issues, "extra_knob"));
    }

    SUBCASE("unknown profile keys are rejected") {
        std::string text = kGoodConfig;
        text.replace(text.find("\"amplitude\""), 11, "\"amp\"");
        const ParsedConfig p = load_config(text);
        CHECK(mentions(p.issues, "amp"));
    }

    SUBCASE("all problems are reported at once") {
        const ParsedConfig p = load_config(R"({
          "beta": "-1",
          "slow_points": ["1.5"],
          "N_list": [32, 16],
          "replicas": 0,
          "horizon": 0.01,
          "record_times": [0.0, 0.02],
          "profile": {"type": "nope"}
        })");
        CHECK(p.issues.size() >= 5);
        CHECK(mentions(p.issues, "beta"));
        CHECK(mentions(p.issues, "N_list"));
        CHECK(mentions(p.issues, "replicas"));
        CHECK(mentions(p.issues, "record_times"));
        CHECK(mentions(p.issues, "profile"));
    }

    SUBCASE("record time grid rules") {
        std::string text = kGoodConfig;
        text.replace(text.find("[0.0, 0.01]"), 11, "[0.001, 0.01]");
        CHECK(mentions(load_config(text).issues, "record_times"));

        text = kGoodConfig;
        text.replace(text.find("[0.0, 0.01]"), 11, "[]");
        const ParsedConfig p = load_config(text);
        CHECK(mentions(p.issues, "empty"));

        text = kGoodConfig;
        text.replace(text.find("[0.0, 0.01]"), 11, "[0.0, 0.005]");
        CHECK(mentions(load_config(text).issues, "horizon"));
    }

    SUBCASE("mollifier scale must clear the slow point gaps") {
        std::string text = kGoodConfig;
        text.replace(text.find("[\"0.5\"]"), 7, "[\"0.25\", \"0.5\"]");
        text.replace(text.find("\"eps_mollify\": 0.1"), 18, "\"eps_mollify\": 0.3");
        const ParsedConfig p = load_config(text);
        CHECK(mentions(p.issues, "eps_mollify"));
    }

    SUBCASE("pde grid must resolve the slow points in the defect regimes") {
        std::string text = kGoodConfig;
        text.replace(text.find("\"beta\": \"0.5\""), 13, "\"beta\": \"1\"");
        text.replace(text.find("[\"0.5\"]"), 7, "[\"0.3\"]");
        const ParsedConfig p = load_config(text);
        CHECK(mentions(p.issues, "pde_m"));

        // Same points on an aligned grid pass.
        std::string ok = kGoodConfig;
        ok.replace(ok.find("\"beta\": \"0.5\""), 13, "\"beta\": \"1\"");
        CHECK(load_config(ok).issues.empty());
    }
}

TEST_CASE("profile shorthand") {
    CHECK(profile_from_text("constant:0.5")(0.3) == 0.5);
    // Phase shifts the position: mean + amp * cos(2 pi f (u - phase)).
    const InitialProfile c = profile_from_text("cosine:0.5,0.3,2,0.1");
    CHECK(c(0.0) == doctest::Approx(0.5 + 0.3 * std::cos(2.0 * kPi * 2.0 * 0.1)));
    CHECK(c(0.1) == doctest::Approx(0.8));
    const InitialProfile s = profile_from_text("step:0.25,0.75|0.8,0.2");
    CHECK(s(0.3) == 0.8);
    CHECK(s(0.8) == 0.2);
    const InitialProfile t = profile_from_text("table:0,0.5|0.2,0.6");
    CHECK(t(0.25) == doctest::Approx(0.4));
    CHECK_THROWS_AS(profile_from_text("wavelet:1"), std::invalid_argument);
    CHECK_THROWS_AS(profile_from_text("step:0.25|0.8,0.2"), std::invalid_argument);
    CHECK_THROWS_AS(profile_from_text("constant:x"), std::invalid_argument);
}

TEST_CASE("mollified comparison") {
    const LatticeSpec spec(64, 0.5, {SlowPoint::parse("0.5")});
    const std::vector<double> times = {0.0, 0.01};
    const PdeSolution sol = solve_heat_periodic(
        [](double u) { return 0.5 + 0.3 * std::cos(2.0 * kPi * u); }, 64, times);

    SUBCASE("a solution row compared with itself vanishes") {
        const Eigen::VectorXd self = resample_to_lattice(sol, 64, 1);
        const CompareResult r = compare_mollified(self, sol, 0.01, 0.05, spec);
        CHECK(r.sup == 0.0);
        CHECK(r.l1 == 0.0);
        CHECK(r.time_offset == 0.0);
    }

    SUBCASE("constant offsets pass through the mollifier") {
        const Eigen::VectorXd shifted =
            resample_to_lattice(sol, 64, 1) + Eigen::VectorXd::Constant(64, 0.07);
        const CompareResult r = compare_mollified(shifted, sol, 0.01, 0.05, spec);
        CHECK(r.sup == doctest::Approx(0.07).epsilon(1e-12));
        CHECK(r.l1 == doctest::Approx(0.07).epsilon(1e-12));
    }

    SUBCASE("nearest recorded row is used and reported") {
        const Eigen::VectorXd self = resample_to_lattice(sol, 64, 1);
        const CompareResult r = compare_mollified(self, sol, 0.0105, 0.05, spec);
        CHECK(r.sup == 0.0);
        CHECK(r.time_offset == doctest::Approx(0.0005));
    }
}

TEST_CASE("strip occupancy term") {
    const LatticeSpec spec(32, 0.5, {SlowPoint::parse("0.5")});
    // Sites with x/32 in [0.5, 0.6): 16..19, so 4 of them, weighted 32^(-0.5).
    CHECK(strip_occupancy_term(spec, 0.1) == doctest::Approx(4.0 / std::sqrt(32.0)));
    const LatticeSpec two(40, 1.0, {SlowPoint::parse("0.25"), SlowPoint::parse("0.75")});
    // [0.25,0.35): sites 10..13; [0.75,0.85): sites 30..33; weight 40^0 = 1.
    CHECK(strip_occupancy_term(two, 0.1) == doctest::Approx(8.0));
}

TEST_CASE("experiment driver") {
    const ExperimentConfig cfg = tiny_config();

    const RunResult first = run_experiment(cfg, 1);
    REQUIRE(first.table.rows.size() == 4);
    CHECK(first.regime == Regime::neumann);

    SUBCASE("rows are ordered by size then time with pinned tolerances") {
        CHECK(first.table.rows[0].n == 16);
        CHECK(first.table.rows[1].n == 16);
        CHECK(first.table.rows[2].n == 32);
        CHECK(first.table.rows[3].n == 32);
        CHECK(first.table.rows[0].t == 0.0);
        CHECK(first.table.rows[1].t == 0.01);
        for (const ConvergenceRow& row : first.table.rows) {
            const double w = std::floor(0.1 * static_cast<double>(row.n) + 1e-9);
            const double se = std::sqrt(0.25 / (20.0 * w));
            CHECK(row.std_error == doctest::Approx(se).epsilon(1e-12));
            CHECK(row.tolerance == doctest::Approx(4.0 * se).epsilon(1e-12));
            CHECK(row.sup_dist >= 0.0);
            CHECK(row.pass == (row.sup_dist <= row.tolerance));
        }
    }

    SUBCASE("reruns and thread counts do not change a bit") {
        const RunResult again = run_experiment(cfg, 1);
        const RunResult threaded = run_experiment(cfg, 3);
        REQUIRE(again.table.rows.size() == 4);
        REQUIRE(threaded.table.rows.size() == 4);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(first.table.rows[i].sup_dist == again.table.rows[i].sup_dist);
            CHECK(first.table.rows[i].l1_dist == again.table.rows[i].l1_dist);
            CHECK(first.table.rows[i].sup_dist == threaded.table.rows[i].sup_dist);
        }
        REQUIRE(first.mean_profiles.size() == threaded.mean_profiles.size());
        for (std::size_t i = 0; i < first.mean_profiles.size(); ++i) {
            CHECK((first.mean_profiles[i] - threaded.mean_profiles[i]).cwiseAbs().maxCoeff() ==
                  0.0);
        }
    }

    SUBCASE("segment masses stay put under the frozen defects") {
        // beta = 3 at these sizes freezes the slow bonds almost entirely, so
        // each arc keeps its initial density; the observed profile at the
        // horizon must still be near the step.
        const Eigen::MatrixXd& final_mean = first.mean_profiles.back();
        double inside = 0.0;
        double outside = 0.0;
        int n_in = 0;
        int n_out = 0;
        for (int x = 1; x <= 32; ++x) {
            const double u = x / 32.0;
            if (u > 0.25 && u <= 0.75) {
                inside += final_mean(1, x - 1);
                ++n_in;
            } else {
                outside += final_mean(1, x - 1);
                ++n_out;
            }
        }
        CHECK(inside / n_in > 0.6);
        CHECK(outside / n_out < 0.4);
    }
}

TEST_CASE("artifact emission") {
    const ExperimentConfig cfg = tiny_config();
    const RunResult result = run_experiment(cfg, 1);
    const std::filesystem::path dir = "exp_artifacts_test_dir";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    emit_artifacts(result, dir.string());

    const char* expected[] = {
        "config_echo.json",        "pde_solution.csv",        "convergence_table.csv",
        "diagnostics_report.csv",  "mean_profile_N16_r0.csv", "mean_profile_N16_r1.csv",
        "mean_profile_N32_r0.csv", "mean_profile_N32_r1.csv", "compare_N16_r0.csv",
        "compare_N16_r1.csv",      "compare_N32_r0.csv",      "compare_N32_r1.csv",
    };
    for (const char* name : expected) {
        CHECK(std::filesystem::exists(dir / name));
    }

    // Solution dump carries the seed and survives a round trip.
    const std::string header = slurp(dir / "pde_solution.csv").substr(0, 200);
    CHECK(header.find("seed=99") != std::string::npos);
    const PdeSolution back = import_solution((dir / "pde_solution.csv").string());
    CHECK(back.m == 64);
    CHECK(back.regime == Regime::neumann);

    // Convergence table has one data row per (N, t).
    std::istringstream table(slurp(dir / "convergence_table.csv"));
    std::string line;
    int data_rows = 0;
    while (std::getline(table, line)) {
        if (!line.empty() && line[0] != '#' && line.find("N,") != 0) ++data_rows;
    }
    CHECK(data_rows == 4);

    // Emission is deterministic byte for byte.
    const std::string first_echo = slurp(dir / "config_echo.json");
    const std::string first_table = slurp(dir / "convergence_table.csv");
    emit_artifacts(result, dir.string());
    CHECK(slurp(dir / "config_echo.json") == first_echo);
    CHECK(slurp(dir / "convergence_table.csv") == first_table);

    std::filesystem::remove_all(dir);
}

TEST_CASE("diagnostics driver emits structured rows") {
    ExperimentConfig cfg = tiny_config();
    cfg.replicas = 10;
    const DiagnosticsReport report = run_diagnostics(cfg, 1);
    REQUIRE(!report.rows.empty());
    bool saw_replacement = false;
    bool saw_martingale = false;
    bool saw_strip = false;
    for (const DiagnosticRow& row : report.rows) {
        CHECK((row.status == "pass" || row.status == "fail" || row.status == "info"));
        if (row.name.find("replacement") != std::string::npos) saw_replacement = true;
        if (row.name.find("martingale") != std::string::npos) saw_martingale = true;
        if (row.name.find("strip") != std::string::npos) saw_strip = true;
    }
    CHECK(saw_replacement);
    CHECK(saw_martingale);
    CHECK(saw_strip);

    const std::filesystem::path dir = "exp_diag_test_dir";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    emit_diagnostics(report, cfg, dir.string());
    CHECK(std::filesystem::exists(dir / "diagnostics_report.csv"));
    std::filesystem::remove_all(dir);
}
