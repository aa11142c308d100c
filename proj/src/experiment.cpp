#include "slowbond/experiment.hpp"

#include "slowbond/diagnostics.hpp"
#include "slowbond/empirical.hpp"
#include "slowbond/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace slowbond {

namespace {

using nlohmann::json;

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_decimal(const std::string& s) {
    if (s.empty()) throw std::invalid_argument("empty number");
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || !std::isfinite(v)) {
        throw std::invalid_argument("not a finite decimal: '" + s + "'");
    }
    return v;
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where, std::vector<std::string>& issues) {
    for (const auto& item : obj.items()) {
        bool ok = false;
        for (const char* k : allowed) ok = ok || item.key() == k;
        if (!ok) issues.push_back(where + ": unknown key '" + item.key() + "'");
    }
}

InitialProfile profile_from_json(const json& p, std::vector<std::string>& issues) {
    if (!p.is_object() || !p.contains("type") || !p["type"].is_string()) {
        issues.push_back("profile: must be an object with a string 'type'");
        return InitialProfile::constant(0.5);
    }
    const std::string type = p["type"].get<std::string>();
    try {
        if (type == "constant") {
            check_keys(p, {"type", "value"}, "profile", issues);
            if (!p.contains("value") || !p["value"].is_number()) throw std::invalid_argument("needs numeric 'value'");
            return InitialProfile::constant(p["value"].get<double>());
        }
        if (type == "cosine") {
            check_keys(p, {"type", "mean", "amplitude", "frequency", "phase"}, "profile", issues);
            if (!p.contains("mean") || !p.contains("amplitude")) throw std::invalid_argument("needs 'mean' and 'amplitude'");
            const int freq = p.contains("frequency") ? p["frequency"].get<int>() : 1;
            const double phase = p.contains("phase") ? p["phase"].get<double>() : 0.0;
            return InitialProfile::cosine(p["mean"].get<double>(), p["amplitude"].get<double>(), freq, phase);
        }
        if (type == "step") {
            check_keys(p, {"type", "edges", "values"}, "profile", issues);
            if (!p.contains("edges") || !p.contains("values")) throw std::invalid_argument("needs 'edges' and 'values'");
            return InitialProfile::step(p["edges"].get<std::vector<double>>(),
                                        p["values"].get<std::vector<double>>());
        }
        if (type == "table") {
            check_keys(p, {"type", "u", "v"}, "profile", issues);
            if (!p.contains("u") || !p.contains("v")) throw std::invalid_argument("needs 'u' and 'v'");
            return InitialProfile::table(p["u"].get<std::vector<double>>(),
                                         p["v"].get<std::vector<double>>());
        }
        throw std::invalid_argument("unknown type '" + type + "'");
    } catch (const std::exception& e) {
        issues.push_back(std::string("profile: ") + e.what());
        return InitialProfile::constant(0.5);
    }
}

// Smallest cyclic gap between the macroscopic slow points.
double min_cyclic_gap(std::vector<double> vals) {
    if (vals.size() < 2) return 1.0;
    std::sort(vals.begin(), vals.end());
    double gap = vals.front() + 1.0 - vals.back();
    for (std::size_t i = 1; i < vals.size(); ++i) gap = std::min(gap, vals[i] - vals[i - 1]);
    return gap;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

void finish_out(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + path);
}

// Runs body(0..count-1); results must be written into index-addressed slots.
// Replica order never affects results, so thread count only changes timing.
void parallel_replicas(int threads, int count, const std::function<void(int)>& body) {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
    if (threads <= 1) {
        for (int i = 0; i < count; ++i) {
            try {
                body(i);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
                break;
            }
        }
    } else {
        std::atomic<int> next{0};
        auto worker = [&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    body(i);
                } catch (...) {
                    errors[static_cast<std::size_t>(i)] = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        const int nthreads = std::min(threads, count);
        pool.reserve(static_cast<std::size_t>(nthreads));
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    for (int i = 0; i < count; ++i) {
        if (errors[static_cast<std::size_t>(i)]) {
            try {
                std::rethrow_exception(errors[static_cast<std::size_t>(i)]);
            } catch (const std::exception& e) {
                throw std::runtime_error("replica " + std::to_string(i) + " failed (stream id " +
                                         std::to_string(i) + "): " + e.what());
            }
        }
    }
}

}  // namespace

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

InitialProfile profile_from_text(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        throw std::invalid_argument("profile syntax is kind:args, e.g. constant:0.5");
    }
    const std::string kind = text.substr(0, colon);
    const std::string args = text.substr(colon + 1);
    auto split_list = [](const std::string& s) {
        std::vector<double> out;
        std::istringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(parse_decimal(cell));
        return out;
    };
    if (kind == "constant") {
        const auto v = split_list(args);
        if (v.size() != 1) throw std::invalid_argument("constant takes one value");
        return InitialProfile::constant(v[0]);
    }
    if (kind == "cosine") {
        const auto v = split_list(args);
        if (v.size() < 2 || v.size() > 4) throw std::invalid_argument("cosine takes mean,amplitude[,frequency[,phase]]");
        const int freq = v.size() > 2 ? static_cast<int>(std::llround(v[2])) : 1;
        return InitialProfile::cosine(v[0], v[1], freq, v.size() > 3 ? v[3] : 0.0);
    }
    if (kind == "step" || kind == "table") {
        const auto bar = args.find('|');
        if (bar == std::string::npos) throw std::invalid_argument(kind + " takes list|list");
        const auto xs = split_list(args.substr(0, bar));
        const auto ys = split_list(args.substr(bar + 1));
        return kind == "step" ? InitialProfile::step(xs, ys) : InitialProfile::table(xs, ys);
    }
    throw std::invalid_argument("unknown profile kind '" + kind + "'");
}

ParsedConfig load_config(const std::string& text) {
    ParsedConfig out;
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        out.issues.push_back("config: document is not a valid JSON object");
        return out;
    }
    out.parse_ok = true;
    out.echo = json{{"format_version", "slowbond-v1"}, {"config", doc}}.dump(2) + "\n";
    std::vector<std::string>& issues = out.issues;
    ExperimentConfig& cfg = out.cfg;

    check_keys(doc,
               {"beta", "slow_points", "N_list", "replicas", "horizon", "record_times", "profile",
                "eps_mollify", "pde_m", "pde_dt", "seed", "out_dir"},
               "config", issues);
    for (const char* key : {"beta", "slow_points", "N_list", "replicas", "horizon", "record_times", "profile"}) {
        if (!doc.contains(key)) issues.push_back(std::string("config: missing required key '") + key + "'");
    }

    bool beta_ok = false;
    if (doc.contains("beta")) {
        try {
            if (doc["beta"].is_string()) {
                cfg.beta_text = doc["beta"].get<std::string>();
            } else if (doc["beta"].is_number()) {
                cfg.beta_text = doc["beta"].dump();
            } else {
                throw std::invalid_argument("must be a decimal string or number");
            }
            cfg.beta = parse_decimal(cfg.beta_text);
            if (cfg.beta < 0.0) throw std::invalid_argument("must be nonnegative");
            beta_ok = true;
        } catch (const std::exception& e) {
            issues.push_back(std::string("beta: ") + e.what());
        }
    }

    bool slow_ok = false;
    if (doc.contains("slow_points")) {
        if (!doc["slow_points"].is_array() || doc["slow_points"].empty()) {
            issues.push_back("slow_points: must be a nonempty array of decimal strings");
        } else {
            slow_ok = true;
            for (const auto& entry : doc["slow_points"]) {
                if (!entry.is_string()) {
                    issues.push_back("slow_points: entries must be decimal strings");
                    slow_ok = false;
                    continue;
                }
                try {
                    cfg.slow_points.push_back(SlowPoint::parse(entry.get<std::string>()));
                } catch (const std::exception& e) {
                    issues.push_back("slow_points: " + entry.get<std::string>() + ": " + e.what());
                    slow_ok = false;
                }
            }
        }
    }

    if (doc.contains("N_list")) {
        if (!doc["N_list"].is_array() || doc["N_list"].empty()) {
            issues.push_back("N_list: must be a nonempty array of integers");
        } else {
            for (const auto& entry : doc["N_list"]) {
                if (!entry.is_number_integer()) {
                    issues.push_back("N_list: entries must be integers");
                    break;
                }
                cfg.n_list.push_back(entry.get<std::int64_t>());
            }
            for (std::size_t i = 0; i < cfg.n_list.size(); ++i) {
                if (cfg.n_list[i] < 2) issues.push_back("N_list: sizes must be at least 2");
                if (i > 0 && cfg.n_list[i] <= cfg.n_list[i - 1]) {
                    issues.push_back("N_list: sizes must be strictly increasing");
                }
            }
        }
    }

    if (doc.contains("replicas")) {
        if (!doc["replicas"].is_number_integer() || doc["replicas"].get<std::int64_t>() < 1) {
            issues.push_back("replicas: must be a positive integer");
        } else {
            cfg.replicas = static_cast<int>(doc["replicas"].get<std::int64_t>());
        }
    }

    bool horizon_ok = false;
    if (doc.contains("horizon")) {
        if (!doc["horizon"].is_number() || !(doc["horizon"].get<double>() > 0.0)) {
            issues.push_back("horizon: must be a positive number");
        } else {
            cfg.horizon = doc["horizon"].get<double>();
            horizon_ok = true;
        }
    }

    if (doc.contains("record_times")) {
        if (!doc["record_times"].is_array()) {
            issues.push_back("record_times: must be an array of numbers");
        } else {
            bool nums_ok = true;
            for (const auto& entry : doc["record_times"]) {
                if (!entry.is_number()) {
                    issues.push_back("record_times: entries must be numbers");
                    nums_ok = false;
                    break;
                }
                cfg.record_times.push_back(entry.get<double>());
            }
            if (nums_ok && cfg.record_times.empty()) {
                issues.push_back("record_times: empty; nothing to simulate");
            }
            if (nums_ok && !cfg.record_times.empty()) {
                if (cfg.record_times.front() != 0.0) issues.push_back("record_times: must start at 0");
                for (std::size_t i = 1; i < cfg.record_times.size(); ++i) {
                    if (cfg.record_times[i] <= cfg.record_times[i - 1]) {
                        issues.push_back("record_times: must be strictly increasing");
                        break;
                    }
                }
                if (horizon_ok && std::fabs(cfg.record_times.back() - cfg.horizon) > 1e-12) {
                    issues.push_back("record_times: last entry must equal horizon");
                }
            }
        }
    }

    if (doc.contains("profile")) {
        cfg.profile = profile_from_json(doc["profile"], issues);
        cfg.profile_echo = doc["profile"].dump();
        // Range scan so bad profiles are reported up front, not mid-run.
        try {
            for (int i = 0; i < 4096; ++i) cfg.profile(static_cast<double>(i) / 4096.0);
        } catch (const std::exception& e) {
            issues.push_back(std::string("profile: ") + e.what());
        }
    }

    if (doc.contains("eps_mollify")) {
        if (!doc["eps_mollify"].is_number() || !(doc["eps_mollify"].get<double>() > 0.0)) {
            issues.push_back("eps_mollify: must be a positive number");
        } else {
            cfg.eps_mollify = doc["eps_mollify"].get<double>();
        }
    }
    if (doc.contains("pde_m")) {
        if (!doc["pde_m"].is_number_integer() || doc["pde_m"].get<std::int64_t>() < 4) {
            issues.push_back("pde_m: must be an integer >= 4");
        } else {
            cfg.pde_m = doc["pde_m"].get<std::int64_t>();
        }
    }
    if (doc.contains("pde_dt")) {
        if (!doc["pde_dt"].is_number() || !(doc["pde_dt"].get<double>() > 0.0)) {
            issues.push_back("pde_dt: must be a positive number");
        } else {
            cfg.pde_dt = doc["pde_dt"].get<double>();
        }
    }
    if (doc.contains("seed")) {
        const auto& s = doc["seed"];
        if (s.is_number_unsigned()) {
            cfg.seed = s.get<std::uint64_t>();
        } else if (s.is_number_integer() && s.get<std::int64_t>() >= 0) {
            cfg.seed = static_cast<std::uint64_t>(s.get<std::int64_t>());
        } else if (s.is_string()) {
            try {
                cfg.seed = std::stoull(s.get<std::string>());
            } catch (const std::exception&) {
                issues.push_back("seed: not an unsigned integer");
            }
        } else {
            issues.push_back("seed: must be an unsigned integer or decimal string");
        }
    }
    if (doc.contains("out_dir")) {
        if (!doc["out_dir"].is_string() || doc["out_dir"].get<std::string>().empty()) {
            issues.push_back("out_dir: must be a nonempty string");
        } else {
            cfg.out_dir = doc["out_dir"].get<std::string>();
        }
    }

    // Cross-field checks once the pieces parsed.
    if (slow_ok) {
        std::vector<double> vals;
        for (const SlowPoint& p : cfg.slow_points) vals.push_back(p.value());
        const double gap = min_cyclic_gap(vals);
        if (!(cfg.eps_mollify < gap)) {
            issues.push_back("eps_mollify: must be below the smallest slow-point gap " + g17(gap));
        }
        if (beta_ok) {
            for (std::int64_t n : cfg.n_list) {
                try {
                    LatticeSpec spec(n, cfg.beta, cfg.slow_points);
                } catch (const std::exception& e) {
                    issues.push_back("N=" + std::to_string(n) + ": " + e.what());
                }
                if (box_width(cfg.eps_mollify, n) < 1) {
                    issues.push_back("N=" + std::to_string(n) + ": eps_mollify window is below one site");
                }
            }
            const Regime regime = regime_for_beta(cfg.beta);
            if (regime != Regime::heat) {
                for (const SlowPoint& p : cfg.slow_points) {
                    if ((cfg.pde_m * p.num) % p.den != 0) {
                        issues.push_back("pde_m: slow point " + p.text + " is not grid aligned at m=" +
                                         std::to_string(cfg.pde_m));
                    }
                }
            }
            if (regime == Regime::w &&
                cfg.pde_m < 16 * static_cast<std::int64_t>(cfg.slow_points.size())) {
                issues.push_back("pde_m: needs at least 16 nodes per slow point in the critical regime");
            }
        }
    }
    return out;
}

CompareResult compare_mollified(const Eigen::Ref<const Eigen::VectorXd>& mean_profile,
                                const PdeSolution& sol, double t, double eps,
                                const LatticeSpec& spec) {
    const std::int64_t n = spec.size();
    if (mean_profile.size() != n) throw std::invalid_argument("profile length must equal lattice size");
    if (sol.times.empty()) throw std::invalid_argument("solution has no recorded times");
    std::size_t row = 0;
    for (std::size_t r = 1; r < sol.times.size(); ++r) {
        if (std::fabs(sol.times[r] - t) < std::fabs(sol.times[row] - t)) row = r;
    }
    const Eigen::VectorXd resampled = resample_to_lattice(sol, n, static_cast<Eigen::Index>(row));
    const Eigen::VectorXd a = mollify_lattice(mean_profile, spec, eps);
    const Eigen::VectorXd b = mollify_lattice(resampled, spec, eps);
    CompareResult res;
    res.sup = (a - b).cwiseAbs().maxCoeff();
    res.l1 = (a - b).cwiseAbs().sum() / static_cast<double>(n);
    res.time_offset = std::fabs(sol.times[row] - t);
    return res;
}

bool ConvergenceTable::all_pass() const {
    for (const ConvergenceRow& row : rows) {
        if (!row.pass) return false;
    }
    return true;
}

RunResult run_experiment(const ExperimentConfig& cfg, int threads) {
    if (cfg.record_times.empty()) throw std::invalid_argument("no record times configured");
    RunResult result;
    result.cfg = cfg;
    result.regime = regime_for_beta(cfg.beta);

    const InitialProfile profile = cfg.profile;
    auto gamma = [profile](double u) { return profile(u); };
    SolverOptions opts;
    opts.dt = cfg.pde_dt;
    auto solve_limit = [&]() {
        switch (result.regime) {
            case Regime::heat:
                return solve_heat_periodic(gamma, cfg.pde_m, cfg.record_times, opts);
            case Regime::w:
                return solve_w_equation(gamma, cfg.pde_m, cfg.slow_points, cfg.record_times, opts);
            case Regime::neumann:
            default:
                return solve_neumann_segments(gamma, cfg.pde_m, cfg.slow_points, cfg.record_times, opts);
        }
    };
    std::future<PdeSolution> limit_future = std::async(std::launch::async, solve_limit);

    for (std::int64_t n : cfg.n_list) {
        const LatticeSpec spec(n, cfg.beta, cfg.slow_points);
        std::vector<std::optional<SnapshotSeries>> slots(static_cast<std::size_t>(cfg.replicas));
        try {
            parallel_replicas(threads, cfg.replicas, [&](int i) {
                PhiloxStream rng(cfg.seed, static_cast<std::uint64_t>(i));
                Configuration init = sample_initial(profile, spec, rng);
                slots[static_cast<std::size_t>(i)] = simulate(spec, std::move(init), cfg.record_times, rng);
            });
        } catch (const std::exception& e) {
            throw std::runtime_error("N=" + std::to_string(n) + " (master seed " +
                                     std::to_string(cfg.seed) + "): " + e.what());
        }
        std::vector<SnapshotSeries> ensemble;
        ensemble.reserve(slots.size());
        for (auto& slot : slots) ensemble.push_back(std::move(*slot));
        result.mean_profiles.push_back(mean_occupation(ensemble));
    }
    result.limit = limit_future.get();

    for (std::size_t ni = 0; ni < cfg.n_list.size(); ++ni) {
        const std::int64_t n = cfg.n_list[ni];
        if (result.limit.m != n) {
            result.notes.push_back("resampled solution grid m=" + std::to_string(result.limit.m) +
                                   " to N=" + std::to_string(n) + " (order-1 interpolation)");
        }
        const LatticeSpec spec(n, cfg.beta, cfg.slow_points);
        const std::int64_t w = box_width(cfg.eps_mollify, n);
        const double se = std::sqrt(0.25 / (static_cast<double>(cfg.replicas) * static_cast<double>(w)));
        for (std::size_t j = 0; j < cfg.record_times.size(); ++j) {
            const double t = cfg.record_times[j];
            const CompareResult cr = compare_mollified(
                result.mean_profiles[ni].row(static_cast<Eigen::Index>(j)).transpose(), result.limit,
                t, cfg.eps_mollify, spec);
            ConvergenceRow row;
            row.n = n;
            row.t = t;
            row.sup_dist = cr.sup;
            row.l1_dist = cr.l1;
            row.std_error = se;
            row.tolerance = 4.0 * se;
            row.pass = cr.sup <= row.tolerance;
            row.time_offset = cr.time_offset;
            result.table.rows.push_back(row);
        }
    }
    return result;
}

double strip_occupancy_term(const LatticeSpec& spec, double eps) {
    const std::int64_t n = spec.size();
    std::int64_t count = 0;
    for (std::int64_t x = 1; x <= n; ++x) {
        const double u = static_cast<double>(x) / static_cast<double>(n);
        for (const SlowPoint& p : spec.slow_points()) {
            double d = u - p.value();
            d -= std::floor(d);
            // Half-open strip [b, b+eps); the guard keeps a site that sits
            // exactly on the far edge out even when the subtraction rounds
            // just below eps.
            if (d < eps - 1e-9) {
                ++count;
                break;
            }
        }
    }
    return std::pow(static_cast<double>(n), spec.beta() - 1.0) * static_cast<double>(count);
}

namespace {

std::string run_header(const char* what, const ExperimentConfig& cfg) {
    return std::string("# slowbond-v1 ") + what + " seed=" + std::to_string(cfg.seed) +
           " beta=" + cfg.beta_text;
}

void write_diagnostic_rows(const std::vector<DiagnosticRow>& rows, const ExperimentConfig& cfg,
                           const std::string& path) {
    std::ofstream out = open_out(path);
    out << run_header("diagnostics", cfg) << "\n";
    out << "name,N,value,aux,status\n";
    for (const DiagnosticRow& row : rows) {
        out << row.name << "," << row.n << "," << g17(row.value) << "," << g17(row.aux) << ","
            << row.status << "\n";
    }
    finish_out(out, path);
}

}  // namespace

void emit_artifacts(const RunResult& result, const std::string& out_dir) {
    namespace fs = std::filesystem;
    const ExperimentConfig& cfg = result.cfg;
    fs::create_directories(out_dir);
    const auto path_of = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };

    {
        json cfgj;
        cfgj["beta"] = cfg.beta_text;
        json pts = json::array();
        for (const SlowPoint& p : cfg.slow_points) pts.push_back(p.text);
        cfgj["slow_points"] = pts;
        cfgj["N_list"] = cfg.n_list;
        cfgj["replicas"] = cfg.replicas;
        cfgj["horizon"] = cfg.horizon;
        cfgj["record_times"] = cfg.record_times;
        cfgj["profile"] = json::parse(cfg.profile_echo.empty() ? "null" : cfg.profile_echo);
        cfgj["eps_mollify"] = cfg.eps_mollify;
        cfgj["pde_m"] = cfg.pde_m;
        cfgj["pde_dt"] = cfg.pde_dt;
        cfgj["seed"] = cfg.seed;
        cfgj["out_dir"] = cfg.out_dir;
        const json echo = {{"format_version", "slowbond-v1"}, {"seed", cfg.seed}, {"config", cfgj}};
        const std::string path = path_of("config_echo.json");
        std::ofstream out = open_out(path);
        out << echo.dump(2) << "\n";
        finish_out(out, path);
    }

    for (std::size_t ni = 0; ni < cfg.n_list.size(); ++ni) {
        const std::int64_t n = cfg.n_list[ni];
        for (std::size_t j = 0; j < cfg.record_times.size(); ++j) {
            const std::string path =
                path_of("mean_profile_N" + std::to_string(n) + "_r" + std::to_string(j) + ".csv");
            std::ofstream out = open_out(path);
            out << run_header("mean_profile", cfg) << " N=" << n
                << " time=" << g17(cfg.record_times[j]) << "\n";
            out << "u,value\n";
            for (std::int64_t x = 1; x <= n; ++x) {
                out << g17(static_cast<double>(x) / static_cast<double>(n)) << ","
                    << g17(result.mean_profiles[ni](static_cast<Eigen::Index>(j),
                                                    static_cast<Eigen::Index>(x - 1)))
                    << "\n";
            }
            finish_out(out, path);
        }
    }

    for (std::size_t ni = 0; ni < cfg.n_list.size(); ++ni) {
        const std::int64_t n = cfg.n_list[ni];
        const LatticeSpec spec(n, cfg.beta, cfg.slow_points);
        for (std::size_t j = 0; j < cfg.record_times.size(); ++j) {
            const Eigen::VectorXd emp = mollify_lattice(
                result.mean_profiles[ni].row(static_cast<Eigen::Index>(j)).transpose(), spec,
                cfg.eps_mollify);
            const Eigen::VectorXd lim = mollify_lattice(
                resample_to_lattice(result.limit, n, static_cast<Eigen::Index>(j)), spec,
                cfg.eps_mollify);
            const std::string path =
                path_of("compare_N" + std::to_string(n) + "_r" + std::to_string(j) + ".csv");
            std::ofstream out = open_out(path);
            out << run_header("mollified_compare", cfg) << " N=" << n
                << " time=" << g17(cfg.record_times[j]) << " eps=" << g17(cfg.eps_mollify) << "\n";
            out << "u,empirical,limit,abs_diff\n";
            for (std::int64_t x = 1; x <= n; ++x) {
                const Eigen::Index i = static_cast<Eigen::Index>(x - 1);
                out << g17(static_cast<double>(x) / static_cast<double>(n)) << "," << g17(emp[i])
                    << "," << g17(lim[i]) << "," << g17(std::fabs(emp[i] - lim[i])) << "\n";
            }
            finish_out(out, path);
        }
    }

    {
        const std::string path = path_of("pde_solution.csv");
        export_solution(result.limit, path);
        std::string text = read_text_file(path);
        const auto nl = text.find('\n');
        if (nl != std::string::npos) {
            text.insert(nl, " seed=" + std::to_string(cfg.seed));
        }
        std::ofstream out = open_out(path);
        out << text;
        finish_out(out, path);
    }

    {
        const std::string path = path_of("convergence_table.csv");
        std::ofstream out = open_out(path);
        out << run_header("convergence_table", cfg) << " eps=" << g17(cfg.eps_mollify)
            << " replicas=" << cfg.replicas << "\n";
        for (const std::string& note : result.notes) out << "# note: " << note << "\n";
        out << "N,t,sup_distance,l1_distance,std_error,tolerance,pass\n";
        for (const ConvergenceRow& row : result.table.rows) {
            out << row.n << "," << g17(row.t) << "," << g17(row.sup_dist) << "," << g17(row.l1_dist)
                << "," << g17(row.std_error) << "," << g17(row.tolerance) << ","
                << (row.pass ? "pass" : "fail") << "\n";
        }
        finish_out(out, path);
    }

    {
        std::vector<DiagnosticRow> rows;
        for (std::int64_t n : cfg.n_list) {
            const LatticeSpec spec(n, cfg.beta, cfg.slow_points);
            rows.push_back({"strip_occupancy", n, strip_occupancy_term(spec, cfg.eps_mollify), 0.0,
                            "info"});
        }
        for (const ConvergenceRow& row : result.table.rows) {
            rows.push_back({"table_margin", row.n, row.tolerance - row.sup_dist, row.t, "info"});
        }
        rows.push_back({"pde_smoothed_start", 0, result.limit.smoothed ? 1.0 : 0.0, 0.0, "info"});
        rows.push_back({"pde_max_principle_excess", 0, result.limit.max_principle_excess, 0.0, "info"});
        const Eigen::Index nrows = static_cast<Eigen::Index>(result.limit.times.size());
        if (result.regime == Regime::neumann) {
            const Eigen::VectorXd m0 = segment_masses(result.limit, 0);
            double drift = 0.0;
            for (Eigen::Index r = 1; r < nrows; ++r) {
                drift = std::max(drift,
                                 (segment_masses(result.limit, r) - m0).cwiseAbs().maxCoeff());
            }
            rows.push_back({"pde_segment_mass_drift", 0, drift, 0.0, "info"});
        } else {
            const double m0 = total_mass(result.limit, 0);
            double drift = 0.0;
            for (Eigen::Index r = 1; r < nrows; ++r) {
                drift = std::max(drift, std::fabs(total_mass(result.limit, r) - m0));
            }
            rows.push_back({"pde_mass_drift", 0, drift, 0.0, "info"});
        }
        write_diagnostic_rows(rows, cfg, path_of("diagnostics_report.csv"));
    }
}

bool DiagnosticsReport::all_pass() const {
    for (const DiagnosticRow& row : rows) {
        if (row.status == "fail") return false;
    }
    return true;
}

DiagnosticsReport run_diagnostics(const ExperimentConfig& cfg, int threads) {
    (void)threads;  // estimators stream replicas one at a time to keep memory flat
    if (cfg.record_times.empty()) throw std::invalid_argument("no record times configured");
    DiagnosticsReport report;
    const double T = cfg.horizon;

    std::vector<double> repl_means;
    for (std::int64_t n : cfg.n_list) {
        const LatticeSpec spec(n, cfg.beta, cfg.slow_points);
        const std::int64_t x = spec.slow_left_vertices().front();
        const EstimatorStat st =
            replacement_estimator(spec, cfg.profile, T, x, cfg.eps_mollify, cfg.replicas, cfg.seed);
        repl_means.push_back(st.mean);
        report.rows.push_back({"replacement", n, st.mean, st.std_error, "info"});
    }
    if (repl_means.size() > 1) {
        bool decreasing = true;
        for (std::size_t i = 1; i < repl_means.size(); ++i) {
            decreasing = decreasing && repl_means[i] < repl_means[i - 1];
        }
        report.rows.push_back({"replacement_decreasing", cfg.n_list.back(), repl_means.back(),
                               repl_means.front(), decreasing ? "pass" : "fail"});
    }

    const std::int64_t n_max = cfg.n_list.back();
    {
        const LatticeSpec spec(n_max, cfg.beta, cfg.slow_points);
        Eigen::VectorXd H(n_max);
        for (std::int64_t x = 1; x <= n_max; ++x) {
            H[x - 1] = std::sin(2.0 * M_PI * static_cast<double>(x) / static_cast<double>(n_max));
        }
        const MartingaleEnsembleStat ms = martingale_ensemble(spec, cfg.profile, H, 2.0 * M_PI, T,
                                                              cfg.replicas, cfg.seed);
        const bool mean_ok = std::fabs(ms.mean) <= 4.0 * ms.mean_se + 1e-15;
        report.rows.push_back({"martingale_mean", n_max, ms.mean, 4.0 * ms.mean_se,
                               mean_ok ? "pass" : "fail"});
        const bool qv_ok = ms.qv_mean <= ms.bound + 1e-12;
        report.rows.push_back({"martingale_qv", n_max, ms.qv_mean, ms.bound, qv_ok ? "pass" : "fail"});
        report.rows.push_back({"martingale_variance", n_max, ms.variance, ms.variance_se, "info"});
    }

    {
        std::vector<double> vals;
        for (const SlowPoint& p : cfg.slow_points) vals.push_back(p.value());
        std::sort(vals.begin(), vals.end());
        const double s0 = vals.front();
        const double s1 = vals.size() > 1 ? vals[1] : vals.front() + 1.0;
        const double len = s1 - s0 - 2.0 * cfg.eps_mollify;
        double mean_density = 0.0;
        for (int i = 0; i < 4096; ++i) mean_density += cfg.profile(static_cast<double>(i) / 4096.0);
        mean_density /= 4096.0;
        if (len > 0.0 && mean_density > 0.0 && mean_density < 1.0) {
            const double eps = cfg.eps_mollify;
            auto bump = [s0, eps, len](double u) {
                double d = u - (s0 + eps);
                d -= std::floor(d);
                return d < len ? std::sin(M_PI * d / len) * std::sin(M_PI * d / len) : 0.0;
            };
            const LatticeSpec spec(n_max, cfg.beta, cfg.slow_points);
            const EstimatorStat vn = vn_time_average(spec, cfg.profile, bump, cfg.eps_mollify, T,
                                                     cfg.replicas, cfg.seed);
            const double ceiling = k0_bound(mean_density);
            const bool ok = vn.mean <= ceiling + 4.0 * vn.std_error;
            report.rows.push_back({"energy_average", n_max, vn.mean, ceiling, ok ? "pass" : "fail"});
        }
    }

    for (std::int64_t n : cfg.n_list) {
        const LatticeSpec spec(n, cfg.beta, cfg.slow_points);
        report.rows.push_back({"strip_occupancy", n, strip_occupancy_term(spec, cfg.eps_mollify),
                               0.0, "info"});
    }
    return report;
}

void emit_diagnostics(const DiagnosticsReport& report, const ExperimentConfig& cfg,
                      const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    write_diagnostic_rows(report.rows, cfg, (fs::path(out_dir) / "diagnostics_report.csv").string());
}

}  // namespace slowbond
