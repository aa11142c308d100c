#include "slowbond/experiment.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

namespace fs = std::filesystem;
using namespace slowbond;

void insert_seed_token(const std::string& path, std::uint64_t seed) {
    std::string text = read_text_file(path);
    const auto nl = text.find('\n');
    if (nl != std::string::npos) text.insert(nl, " seed=" + std::to_string(seed));
    std::ofstream out(path);
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path);
}

struct ConfigFlags {
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 1;
};

// Loads, applies flag overrides, writes the config echo, and reports every
// validation issue.  Returns false when the run must stop with exit code 2.
bool prepare_config(const std::string& path, const ConfigFlags& flags, ExperimentConfig& cfg) {
    ParsedConfig pc = load_config(read_text_file(path));
    if (!pc.parse_ok) {
        for (const std::string& issue : pc.issues) std::cerr << "config error: " << issue << "\n";
        return false;
    }
    if (flags.seed_set) pc.cfg.seed = flags.seed;
    if (!flags.out_dir.empty()) pc.cfg.out_dir = flags.out_dir;
    fs::create_directories(pc.cfg.out_dir);
    {
        std::ofstream echo((fs::path(pc.cfg.out_dir) / "config_echo.json").string());
        echo << pc.echo;
    }
    if (!pc.issues.empty()) {
        std::ofstream note((fs::path(pc.cfg.out_dir) / "error_note.txt").string());
        note << "# slowbond-v1 error_note seed=" << pc.cfg.seed << "\n";
        for (const std::string& issue : pc.issues) {
            note << issue << "\n";
            std::cerr << "config error: " << issue << "\n";
        }
        return false;
    }
    cfg = pc.cfg;
    return true;
}

int cmd_run(const std::string& config_path, const ConfigFlags& flags) {
    ExperimentConfig cfg;
    if (!prepare_config(config_path, flags, cfg)) return 2;
    try {
        const RunResult result = run_experiment(cfg, flags.threads);
        emit_artifacts(result, cfg.out_dir);
        std::cout << "tolerance per row: 4*sqrt(rho(1-rho)/(M*floor(eps*N))) with worst-case "
                     "rho(1-rho)=0.25, M="
                  << cfg.replicas << ", eps=" << cfg.eps_mollify << "\n";
        for (const ConvergenceRow& row : result.table.rows) {
            std::cout << "N=" << row.n << " t=" << row.t << " sup=" << row.sup_dist
                      << " l1=" << row.l1_dist << " tolerance=" << row.tolerance << " "
                      << (row.pass ? "pass" : "fail") << "\n";
        }
        const bool ok = result.table.all_pass();
        std::cout << "result: " << (ok ? "PASS" : "FAIL") << " (artifacts in " << cfg.out_dir
                  << ")\n";
        return ok ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return 1;
    }
}

int cmd_diagnose(const std::string& config_path, const ConfigFlags& flags) {
    ExperimentConfig cfg;
    if (!prepare_config(config_path, flags, cfg)) return 2;
    try {
        const DiagnosticsReport report = run_diagnostics(cfg, flags.threads);
        emit_diagnostics(report, cfg, cfg.out_dir);
        for (const DiagnosticRow& row : report.rows) {
            std::cout << row.name << " N=" << row.n << " value=" << row.value << " aux=" << row.aux
                      << " " << row.status << "\n";
        }
        const bool ok = report.all_pass();
        std::cout << "result: " << (ok ? "PASS" : "FAIL") << " (report in " << cfg.out_dir << ")\n";
        return ok ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "diagnose failed: " << e.what() << "\n";
        return 1;
    }
}

struct SolveArgs {
    std::string regime;
    std::int64_t m = 512;
    double dt = 1e-4;
    std::vector<double> times;
    std::vector<std::string> slow;
    std::string profile;
    ConfigFlags flags;
};

int cmd_solve(const SolveArgs& args) {
    try {
        const InitialProfile profile = profile_from_text(args.profile);
        auto gamma = [&profile](double u) { return profile(u); };
        std::vector<SlowPoint> slow_points;
        for (const std::string& s : args.slow) slow_points.push_back(SlowPoint::parse(s));
        SolverOptions opts;
        opts.dt = args.dt;
        PdeSolution sol;
        if (args.regime == "heat") {
            sol = solve_heat_periodic(gamma, args.m, args.times, opts);
        } else if (args.regime == "w") {
            sol = solve_w_equation(gamma, args.m, slow_points, args.times, opts);
        } else if (args.regime == "neumann") {
            sol = solve_neumann_segments(gamma, args.m, slow_points, args.times, opts);
        } else {
            std::cerr << "config error: unknown regime '" << args.regime << "'\n";
            return 2;
        }
        const std::string out_dir = args.flags.out_dir.empty() ? "." : args.flags.out_dir;
        fs::create_directories(out_dir);
        const std::string path = (fs::path(out_dir) / "pde_solution.csv").string();
        export_solution(sol, path);
        insert_seed_token(path, args.flags.seed);
        std::cout << "wrote " << path << " (" << sol.times.size() << " times, " << sol.m
                  << " nodes)\n";
        return 0;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "solve failed: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exclusion process with slow bonds: simulation, limit equations, diagnostics"};
    app.require_subcommand(1);

    std::string run_config, diag_config;
    ConfigFlags run_flags, diag_flags;
    SolveArgs solve_args;

    CLI::App* run = app.add_subcommand("run", "Run a convergence experiment from a JSON config");
    run->add_option("config", run_config, "Path to the JSON config")->required();
    run->add_option("--seed", run_flags.seed, "Override the master seed")
        ->each([&](const std::string&) { run_flags.seed_set = true; });
    run->add_option("--threads", run_flags.threads, "Worker threads for replica simulation");
    run->add_option("--out-dir", run_flags.out_dir, "Override the output directory");

    CLI::App* solve = app.add_subcommand("solve", "Solve one limit equation and dump it");
    solve->add_option("--regime", solve_args.regime, "heat, w, or neumann")->required();
    solve->add_option("--m", solve_args.m, "Grid nodes");
    solve->add_option("--dt", solve_args.dt, "Target time step");
    solve->add_option("--times", solve_args.times, "Record times, starting at 0")
        ->required()
        ->delimiter(',');
    solve->add_option("--slow", solve_args.slow, "Slow points as decimal strings")->delimiter(',');
    solve->add_option("--profile", solve_args.profile,
                      "Initial profile, e.g. cosine:0.5,0.3 or step:0.25,0.75|0.8,0.2")
        ->required();
    solve->add_option("--seed", solve_args.flags.seed, "Seed recorded in the dump header");
    solve->add_option("--threads", solve_args.flags.threads, "Accepted for symmetry; unused");
    solve->add_option("--out-dir", solve_args.flags.out_dir, "Output directory");

    CLI::App* diag = app.add_subcommand("diagnose", "Run estimator diagnostics from a JSON config");
    diag->add_option("config", diag_config, "Path to the JSON config")->required();
    diag->add_option("--seed", diag_flags.seed, "Override the master seed")
        ->each([&](const std::string&) { diag_flags.seed_set = true; });
    diag->add_option("--threads", diag_flags.threads, "Accepted for symmetry; estimators stream");
    diag->add_option("--out-dir", diag_flags.out_dir, "Override the output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) return cmd_run(run_config, run_flags);
        if (solve->parsed()) return cmd_solve(solve_args);
        if (diag->parsed()) return cmd_diagnose(diag_config, diag_flags);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
