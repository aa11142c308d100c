#pragma once

#include "slowbond/lattice.hpp"
#include "slowbond/pde.hpp"
#include "slowbond/simulator.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace slowbond {

// Full description of a convergence experiment, parsed from a JSON document.
struct ExperimentConfig {
    double beta = 0.0;
    std::string beta_text;
    std::vector<SlowPoint> slow_points;
    std::vector<std::int64_t> n_list;
    int replicas = 0;
    double horizon = 0.0;
    std::vector<double> record_times;
    InitialProfile profile;
    std::string profile_echo;  // normalized JSON of the profile block
    double eps_mollify = 0.05;
    std::int64_t pde_m = 512;
    double pde_dt = 1e-4;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
};

// Parse result: when parse_ok is false the document itself was unreadable;
// otherwise cfg holds the parsed fields and issues lists every validation
// failure at once (empty means the config is runnable).
struct ParsedConfig {
    ExperimentConfig cfg;
    std::vector<std::string> issues;
    std::string echo;  // normalized JSON document, valid when parse_ok
    bool parse_ok = false;
};

ParsedConfig load_config(const std::string& text);
std::string read_text_file(const std::string& path);

// Compact profile syntax used on the command line, for example
// "constant:0.5", "cosine:0.5,0.3,1,0", "step:0.25,0.75|0.8,0.2",
// "table:0,0.5|0.2,0.8".  Throws std::invalid_argument on bad syntax.
InitialProfile profile_from_text(const std::string& text);

struct CompareResult {
    double sup = 0.0;
    double l1 = 0.0;
    double time_offset = 0.0;  // |requested t - matched solution time|
};

// Mollify the lattice mean profile and the resampled solution row with the
// same windows, then report sup and mean absolute distance over sites.
CompareResult compare_mollified(const Eigen::Ref<const Eigen::VectorXd>& mean_profile,
                                const PdeSolution& sol, double t, double eps,
                                const LatticeSpec& spec);

struct ConvergenceRow {
    std::int64_t n = 0;
    double t = 0.0;
    double sup_dist = 0.0;
    double l1_dist = 0.0;
    double std_error = 0.0;  // binomial standard error over one averaging window
    double tolerance = 0.0;  // 4 x std_error
    bool pass = false;
    double time_offset = 0.0;
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    bool all_pass() const;
};

struct RunResult {
    ExperimentConfig cfg;
    Regime regime = Regime::heat;
    std::vector<Eigen::MatrixXd> mean_profiles;  // per lattice size: times x sites
    PdeSolution limit;
    ConvergenceTable table;
    std::vector<std::string> notes;
};

// Simulate the replica ensembles for every lattice size, solve the limit
// equation selected by beta, and compare the mollified mean profiles with
// the solution at every record time.  Deterministic for a fixed config and
// seed regardless of the thread count (replicas are reduced in index order).
RunResult run_experiment(const ExperimentConfig& cfg, int threads = 1);

// Write config echo, per-size mean profiles, comparison dumps, the solution
// dump, the convergence table, and a diagnostics report into out_dir.  Every
// file starts with a "slowbond-v1" header carrying the master seed.
void emit_artifacts(const RunResult& result, const std::string& out_dir);

// Sites inside the half-open strips [b_i, b_i + eps) weighted by N^(beta-1);
// reported alongside the convergence data, no threshold attached.
double strip_occupancy_term(const LatticeSpec& spec, double eps);

struct DiagnosticRow {
    std::string name;
    std::int64_t n = 0;   // 0 when not size specific
    double value = 0.0;
    double aux = 0.0;     // standard error or bound, depending on the row
    std::string status;   // "pass", "fail", or "info"
};

struct DiagnosticsReport {
    std::vector<DiagnosticRow> rows;
    bool all_pass() const;
};

// Estimator suite over the configured lattice sizes: replacement-integral
// decay, Dynkin martingale mean and quadratic variation against its bound,
// time-averaged energy functional against the entropy ceiling, and the
// strip occupancy terms.
DiagnosticsReport run_diagnostics(const ExperimentConfig& cfg, int threads = 1);

void emit_diagnostics(const DiagnosticsReport& report, const ExperimentConfig& cfg,
                      const std::string& out_dir);

}  // namespace slowbond
