// End-to-end acceptance gate.  Each criterion exercises one headline claim of
// the library and prints a single [PASS]/[FAIL] line with the measured values
// and the pinned tolerance; the exit code is the number of failed criteria.
//
// Statistical criteria run a fixed ensemble under kMasterSeed so the whole
// gate is deterministic.  Passing a decimal seed as argv[1] overrides the
// pinned seed, which is how a fresh seed gets vetted after changes to the
// sampling layout.

#include "slowbond/diagnostics.hpp"
#include "slowbond/empirical.hpp"
#include "slowbond/pde.hpp"
#include "slowbond/rng.hpp"
#include "slowbond/simulator.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace {

using namespace slowbond;

constexpr double kPi = std::numbers::pi;
constexpr std::uint64_t kMasterSeed = 13;

// Stream ids: each criterion owns a disjoint 10000-wide block so no two
// ensembles ever share a Philox stream.
constexpr std::uint64_t kStreamHeat64 = 10000;
constexpr std::uint64_t kStreamHeat256 = 20000;
constexpr std::uint64_t kStreamW256 = 30000;
constexpr std::uint64_t kStreamSegments = 40000;
constexpr std::uint64_t kStreamOde = 50000;  // three regimes, 10000 apart

// Criteria that draw their replicas through library entry points taking a
// bare seed get the master seed shifted into a private range instead.
constexpr std::uint64_t kSeedShiftMartingale = 1u << 20;
constexpr std::uint64_t kSeedShiftReplacement = 2u << 20;

int g_failures = 0;

void report(bool pass, const std::string& line) {
    std::printf("[%s] %s\n", pass ? "PASS" : "FAIL", line.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double gamma_cosine(double u) { return 0.5 + 0.3 * std::cos(2.0 * kPi * u); }

const std::vector<SlowPoint> kHalf = {SlowPoint::parse("0.5")};
const std::vector<SlowPoint> kQuarters = {SlowPoint::parse("0.25"), SlowPoint::parse("0.75")};

// Ensemble mean occupation, one independent Philox stream per replica.
Eigen::MatrixXd ensemble_mean(const LatticeSpec& spec, const InitialProfile& profile,
                              std::span<const double> times, int replicas, std::uint64_t seed,
                              std::uint64_t stream_base) {
    std::vector<SnapshotSeries> runs;
    runs.reserve(static_cast<std::size_t>(replicas));
    for (int r = 0; r < replicas; ++r) {
        PhiloxStream rng(seed, stream_base + static_cast<std::uint64_t>(r));
        Configuration eta = sample_initial(profile, spec, rng);
        runs.push_back(simulate(spec, std::move(eta), times, rng));
    }
    return mean_occupation(runs);
}

// Sup distance between the mollified ensemble mean and the identically
// mollified limit profile, maximised over the recorded times.
double mollified_sup(const LatticeSpec& spec, const Eigen::MatrixXd& mean,
                     const PdeSolution& sol, double eps) {
    double worst = 0.0;
    for (Eigen::Index r = 0; r < mean.rows(); ++r) {
        Eigen::VectorXd emp = mollify_lattice(mean.row(r).transpose(), spec, eps);
        Eigen::VectorXd lim =
            mollify_lattice(resample_to_lattice(sol, spec.size(), r), spec, eps);
        worst = std::max(worst, (emp - lim).cwiseAbs().maxCoeff());
    }
    return worst;
}

// Criterion 1: below the critical strength the mollified empirical density
// follows the periodic heat flow, and doubling N twice tightens the fit.
void criterion_heat_convergence(std::uint64_t seed) {
    const std::vector<double> times = {0.0, 0.005, 0.01};
    const double eps = 0.05, tol = 0.05;
    SolverOptions opt;
    opt.dt = 1e-4;
    const PdeSolution sol = solve_heat_periodic(gamma_cosine, 1024, times, opt);
    const InitialProfile profile = InitialProfile::cosine(0.5, 0.3);

    const LatticeSpec coarse(64, 0.5, kHalf), fine(256, 0.5, kHalf);
    const double d64 = mollified_sup(
        coarse, ensemble_mean(coarse, profile, times, 400, seed, kStreamHeat64), sol, eps);
    const double d256 = mollified_sup(
        fine, ensemble_mean(fine, profile, times, 400, seed, kStreamHeat256), sol, eps);

    report(d64 <= tol && d256 <= tol && d256 < d64,
           fmt("heat regime convergence: sup_moll N=64 %.4f, N=256 %.4f (each <= %.2f, decreasing)",
               d64, d256, tol));
}

// Criterion 2: at the critical strength the ensemble follows the defect
// equation, whose discretisation on the process lattice is the generator
// itself (checked directly against the dense-eigendecomposition reference).
void criterion_w_convergence(std::uint64_t seed) {
    const std::vector<double> times = {0.0, 0.005, 0.01};
    const double eps = 0.05, tol = 0.05, id_tol = 1e-8;
    const LatticeSpec spec(256, 1.0, kHalf);
    SolverOptions opt;
    opt.dt = 1e-5;
    const PdeSolution sol = solve_w_equation(gamma_cosine, 256, kHalf, times, opt);

    const Eigen::MatrixXd oracle = discrete_ode_oracle(spec, gamma_cosine, times);
    double identity = 0.0;
    for (Eigen::Index r = 0; r < oracle.rows(); ++r) {
        identity = std::max(identity, (sol.values.row(r) - oracle.row(r)).cwiseAbs().maxCoeff());
    }

    const double d256 = mollified_sup(
        spec, ensemble_mean(spec, InitialProfile::cosine(0.5, 0.3), times, 400, seed, kStreamW256),
        sol, eps);

    report(d256 <= tol && identity <= id_tol,
           fmt("critical regime convergence: sup_moll N=256 %.4f (<= %.2f); "
               "|solver - generator ODE| %.2e (<= %.0e)",
               d256, tol, identity, id_tol));
}

// Criterion 3: above the critical strength the slow bonds insulate; segment
// masses are conserved replica by replica and the density keeps the initial
// jump at every slow point while matching the per-segment Neumann flow.
void criterion_segment_structure(std::uint64_t seed) {
    const std::vector<double> times = {0.0, 0.01, 0.02};
    const double eps = 0.05, tol = 0.05, jump_min = 0.4;
    const int replicas = 400;
    const LatticeSpec spec(256, 3.0, kQuarters);
    const InitialProfile profile = InitialProfile::step({0.25, 0.75}, {0.8, 0.2});
    const std::int64_t n = spec.size();

    // Segment A is the arc between the two slow bonds, sites lv0+1 .. lv1.
    const std::int64_t lv0 = spec.slow_left_vertices()[0];
    const std::int64_t lv1 = spec.slow_left_vertices()[1];
    auto mass_a = [&](const Configuration& eta) {
        std::int64_t s = 0;
        for (std::int64_t x = lv0 + 1; x <= lv1; ++x) s += eta.occ(x);
        return s;
    };

    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(times.size()), n);
    double drift_a_sum = 0.0, drift_a_sq = 0.0, drift_b_sum = 0.0, drift_b_sq = 0.0;
    for (int r = 0; r < replicas; ++r) {
        PhiloxStream rng(seed, kStreamSegments + static_cast<std::uint64_t>(r));
        Configuration eta = sample_initial(profile, spec, rng);
        SnapshotSeries traj = simulate(spec, std::move(eta), times, rng);
        for (std::size_t t = 0; t < times.size(); ++t) {
            for (std::int64_t x = 1; x <= n; ++x) {
                sum(static_cast<Eigen::Index>(t), x - 1) += traj.states[t].occ(x);
            }
        }
        const double da = std::abs(static_cast<double>(mass_a(traj.states.back()) -
                                                       mass_a(traj.states.front())));
        const double db = std::abs(static_cast<double>(traj.states.back().particles() -
                                                       mass_a(traj.states.back()) -
                                                       traj.states.front().particles() +
                                                       mass_a(traj.states.front())));
        drift_a_sum += da;
        drift_a_sq += da * da;
        drift_b_sum += db;
        drift_b_sq += db * db;
    }
    const Eigen::MatrixXd mean = sum / static_cast<double>(replicas);

    auto drift_ok = [&](double s, double sq) {
        const double m = s / replicas;
        const double var = std::max(0.0, sq / replicas - m * m);
        const double se = std::sqrt(var / replicas);
        return m <= 4.0 * se + 1e-9;
    };

    const std::int64_t w = box_width(eps, n);
    const Eigen::VectorXd last = mean.row(mean.rows() - 1).transpose();
    double jump0 = 0.0, jump1 = 0.0;
    for (std::size_t i = 0; i < spec.slow_left_vertices().size(); ++i) {
        const std::int64_t lv = spec.slow_left_vertices()[i];
        double right = 0.0, left = 0.0;
        for (std::int64_t j = 1; j <= w; ++j) {
            right += last[(lv + j - 1) % n];
            left += last[(lv - j + 2 * n) % n];
        }
        const double jump = std::abs(right - left) / static_cast<double>(w);
        (i == 0 ? jump0 : jump1) = jump;
    }

    SolverOptions opt;
    opt.dt = 1e-4;
    const PdeSolution sol = solve_neumann_segments(profile.density, 512, kQuarters, times, opt);
    const double d = mollified_sup(spec, mean, sol, eps);

    const bool mass_ok = drift_ok(drift_a_sum, drift_a_sq) && drift_ok(drift_b_sum, drift_b_sq);
    report(d <= tol && jump0 >= jump_min && jump1 >= jump_min && mass_ok,
           fmt("insulating regime segments: sup_moll N=256 %.4f (<= %.2f); jumps %.3f, %.3f "
               "(>= %.1f); mean |segment mass drift| %.4f, %.4f (<= 4 SE)",
               d, tol, jump0, jump1, jump_min, drift_a_sum / replicas, drift_b_sum / replicas));
}

// Criterion 4: the Dynkin martingale of a smooth test function is centred and
// its variance sits below the a-priori quadratic-variation ceiling, which is
// what drives the empirical density deterministic as N grows.
void criterion_martingale(std::uint64_t seed) {
    const LatticeSpec spec(128, 1.0, kHalf);
    Eigen::VectorXd H(spec.size());
    for (std::int64_t x = 1; x <= spec.size(); ++x) {
        H[x - 1] = std::sin(2.0 * kPi * static_cast<double>(x) / static_cast<double>(spec.size()));
    }
    const MartingaleEnsembleStat s =
        martingale_ensemble(spec, InitialProfile::cosine(0.5, 0.3), H, 2.0 * kPi, 0.01, 400,
                            seed + kSeedShiftMartingale);
    const bool centred = std::abs(s.mean) <= 4.0 * s.mean_se;
    const bool qv_ok = s.qv_mean <= s.bound * (1.0 + 1e-9);
    const bool var_ok = s.variance <= s.bound + 3.0 * s.variance_se;
    report(centred && qv_ok && var_ok,
           fmt("martingale fluctuations: |mean| %.2e (<= 4 SE %.2e); var %.3e <= bound %.3e "
               "+ 3 SE; QV mean %.3e <= bound",
               std::abs(s.mean), 4.0 * s.mean_se, s.variance, s.bound, s.qv_mean));
}

// Criterion 5: in every regime the ensemble mean tracks the exact ODE of the
// speeded-up generator, site by site, within Monte Carlo resolution.
void criterion_generator_ode(std::uint64_t seed) {
    const std::vector<double> times = {0.0, 0.01};
    const double tol = 0.06;
    const int replicas = 800;
    const InitialProfile profile = InitialProfile::cosine(0.5, 0.3);
    const double betas[3] = {0.5, 1.0, 3.0};
    double sup[3] = {0.0, 0.0, 0.0};
    bool ok = true;
    for (int i = 0; i < 3; ++i) {
        const LatticeSpec spec(128, betas[i], kHalf);
        const Eigen::MatrixXd mean =
            ensemble_mean(spec, profile, times, replicas, seed,
                          kStreamOde + 10000 * static_cast<std::uint64_t>(i));
        const Eigen::MatrixXd oracle = discrete_ode_oracle(spec, gamma_cosine, times);
        sup[i] = (mean - oracle).cwiseAbs().maxCoeff();
        ok = ok && sup[i] <= tol;
    }
    report(ok,
           fmt("generator ODE agreement: sup beta=0.5 %.4f, beta=1 %.4f, beta=3 %.4f (each <= %.2f)",
               sup[0], sup[1], sup[2], tol));
}

// Criterion 6: the periodic and segmented solvers converge at second order
// against exact single-mode solutions; the defect-face coupling of the
// critical solver is first order, so successive self-differences halve.
void criterion_spatial_orders() {
    const std::vector<double> times = {0.0, 0.01};
    SolverOptions opt;
    opt.dt = 1e-5;

    auto heat_err = [&](std::int64_t m) {
        const PdeSolution sol = solve_heat_periodic(gamma_cosine, m, times, opt);
        double e = 0.0;
        const double decay = std::exp(-4.0 * kPi * kPi * 0.01);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double exact = 0.5 + 0.3 * decay * std::cos(2.0 * kPi * sol.nodes[i]);
            e = std::max(e, std::abs(sol.values(1, i) - exact));
        }
        return e;
    };
    auto seg_err = [&](std::int64_t m) {
        auto gamma = [](double u) {
            double s = u - 0.5;
            s -= std::floor(s);
            return 0.5 + 0.3 * std::cos(kPi * s);
        };
        const PdeSolution sol = solve_neumann_segments(gamma, m, kHalf, times, opt);
        double e = 0.0;
        const double decay = std::exp(-kPi * kPi * 0.01);
        for (Eigen::Index i = 0; i < m; ++i) {
            double s = sol.nodes[i] - 0.5;
            s -= std::floor(s);
            const double exact = 0.5 + 0.3 * decay * std::cos(kPi * s);
            e = std::max(e, std::abs(sol.values(1, i) - exact));
        }
        return e;
    };

    const double h1 = heat_err(64), h2 = heat_err(128), h3 = heat_err(256);
    const double s1 = seg_err(64), s2 = seg_err(128), s3 = seg_err(256);
    const double oh1 = std::log2(h1 / h2), oh2 = std::log2(h2 / h3);
    const double os1 = std::log2(s1 / s2), os2 = std::log2(s2 / s3);

    std::vector<PdeSolution> ws;
    for (std::int64_t m : {128, 256, 512, 1024}) {
        ws.push_back(solve_w_equation(gamma_cosine, m, kHalf, times, opt));
    }
    double we[3];
    for (int j = 0; j < 3; ++j) {
        double e = 0.0;
        for (Eigen::Index i = 0; i < ws[j].m; ++i) {
            e = std::max(e, std::abs(ws[j].values(1, i) - ws[j + 1].values(1, 2 * i + 1)));
        }
        we[j] = e;
    }
    const double wr1 = we[0] / we[1], wr2 = we[1] / we[2];

    const bool second = oh1 >= 1.9 && oh2 >= 1.9 && os1 >= 1.9 && os2 >= 1.9;
    const bool first = wr1 >= 1.8 && wr2 >= 1.8;
    report(second && first,
           fmt("spatial convergence: heat orders %.2f, %.2f; segment orders %.2f, %.2f (>= 1.9); "
               "critical self-difference ratios %.2f, %.2f (>= 1.8)",
               oh1, oh2, os1, os2, wr1, wr2));
}

// Criterion 7: recorded solutions satisfy the weak formulation of their limit
// equation against five test functions per class, with residuals that shrink
// under grid refinement whenever they sit above rounding noise.
void criterion_weak_residuals() {
    const double tol = 1e-3, noise = 1e-8, shrink = 0.8;
    SolverOptions opt;
    opt.dt = 1e-4;

    auto max_residual = [](const PdeSolution& sol, const TestFunction& h) {
        double worst = 0.0;
        for (double t : sol.times) worst = std::max(worst, std::abs(weak_form_residual(sol, h, t)));
        return worst;
    };
    auto refine_ok = [&](double coarse, double fine) {
        return fine <= tol && (coarse <= noise || fine <= shrink * coarse);
    };

    std::vector<double> heat_times;
    for (int i = 0; i <= 50; ++i) heat_times.push_back(0.01 * i / 50.0);
    std::vector<TestFunction> smooth;
    smooth.push_back(TestFunction::smooth([](double) { return 1.0; }, [](double) { return 0.0; },
                                          [](double) { return 0.0; }));
    for (int f : {1, 2}) {
        smooth.push_back(TestFunction::smooth(
            [f](double u) { return std::cos(2 * f * kPi * u); },
            [f](double u) { return -2 * f * kPi * std::sin(2 * f * kPi * u); },
            [f](double u) { return -4 * f * f * kPi * kPi * std::cos(2 * f * kPi * u); }));
        smooth.push_back(TestFunction::smooth(
            [f](double u) { return std::sin(2 * f * kPi * u); },
            [f](double u) { return 2 * f * kPi * std::cos(2 * f * kPi * u); },
            [f](double u) { return -4 * f * f * kPi * kPi * std::sin(2 * f * kPi * u); }));
    }
    const PdeSolution heat_c = solve_heat_periodic(gamma_cosine, 128, heat_times, opt);
    const PdeSolution heat_f = solve_heat_periodic(gamma_cosine, 512, heat_times, opt);
    bool ok = true;
    double worst_heat = 0.0;
    for (const TestFunction& h : smooth) {
        const double rf = max_residual(heat_f, h);
        ok = ok && refine_ok(max_residual(heat_c, h), rf);
        worst_heat = std::max(worst_heat, rf);
    }

    std::vector<double> w_times;
    for (int i = 0; i <= 10; ++i) w_times.push_back(0.01 * i / 10.0);
    std::vector<TestFunction> domain;
    domain.push_back(build_cw([](double) { return 0.0; }, 1.0, kHalf));
    domain.push_back(build_cw([](double u) { return std::cos(2 * kPi * u); }, 0.0, kHalf));
    domain.push_back(build_cw([](double u) { return std::sin(2 * kPi * u); }, 0.2, kHalf));
    domain.push_back(build_cw([](double u) { return std::cos(4 * kPi * u); }, -0.1, kHalf));
    domain.push_back(build_cw(
        [](double u) { return std::sin(4 * kPi * u) + std::cos(2 * kPi * u); }, 0.5, kHalf));
    const PdeSolution w_c = solve_w_equation(gamma_cosine, 256, kHalf, w_times, opt);
    const PdeSolution w_f = solve_w_equation(gamma_cosine, 512, kHalf, w_times, opt);
    double worst_w = 0.0;
    for (const TestFunction& h : domain) {
        const double rf = max_residual(w_f, h);
        ok = ok && refine_ok(max_residual(w_c, h), rf);
        worst_w = std::max(worst_w, rf);
    }

    std::vector<double> seg_times;
    for (int i = 0; i <= 200; ++i) seg_times.push_back(0.01 * i / 200.0);
    auto seg_mode = [](double a, double b, int mode) {
        const double len = b - a;
        return TestFunction::segment(
            a, b,
            [a, len, mode](double, double u) { return std::cos(mode * kPi * (u - a) / len); },
            [a, len, mode](double, double u) {
                return -mode * kPi / len * std::sin(mode * kPi * (u - a) / len);
            },
            [a, len, mode](double, double u) {
                const double q = mode * kPi / len;
                return -q * q * std::cos(mode * kPi * (u - a) / len);
            },
            [](double, double) { return 0.0; });
    };
    std::vector<TestFunction> seg = {seg_mode(0.25, 0.75, 0), seg_mode(0.75, 1.25, 0),
                                     seg_mode(0.25, 0.75, 1), seg_mode(0.75, 1.25, 1),
                                     seg_mode(0.25, 0.75, 2)};
    const PdeSolution seg_c = solve_neumann_segments(gamma_cosine, 128, kQuarters, seg_times, opt);
    const PdeSolution seg_f = solve_neumann_segments(gamma_cosine, 512, kQuarters, seg_times, opt);
    double worst_seg = 0.0;
    for (const TestFunction& h : seg) {
        const double rf = max_residual(seg_f, h);
        ok = ok && refine_ok(max_residual(seg_c, h), rf);
        worst_seg = std::max(worst_seg, rf);
    }

    report(ok,
           fmt("weak-form residuals: max heat %.2e, critical %.2e, segment %.2e "
               "(each <= %.0e, shrinking under refinement)",
               worst_heat, worst_w, worst_seg, tol));
}

// Criterion 8: the gap between a single site and its box average, integrated
// in time next to the slow bond, shrinks as N grows at fixed box scale.
void criterion_replacement(std::uint64_t seed) {
    const double eps = 0.05, T = 0.01;
    const InitialProfile profile = InitialProfile::cosine(0.5, 0.3);
    double means[3], ses[3];
    const std::int64_t sizes[3] = {64, 128, 256};
    for (int i = 0; i < 3; ++i) {
        const LatticeSpec spec(sizes[i], 0.5, kHalf);
        const std::int64_t x = kHalf[0].left_vertex(sizes[i]) - 1;
        const EstimatorStat s = replacement_estimator(
            spec, profile, T, x, eps, 400,
            seed + kSeedShiftReplacement + static_cast<std::uint64_t>(i));
        means[i] = s.mean;
        ses[i] = s.std_error;
    }
    report(means[0] > means[1] && means[1] > means[2],
           fmt("replacement estimator: %.5f > %.5f > %.5f across N = 64, 128, 256 "
               "(SE %.1e, %.1e, %.1e)",
               means[0], means[1], means[2], ses[0], ses[1], ses[2]));
}

// Criterion 9: the critical-regime operator has the spectrum the uniqueness
// argument needs (zero mode constant, ascending eigenvalues, orthonormal
// modes) and the associated functional decays along solutions.
void criterion_spectrum() {
    const std::int64_t m = 256;
    const int n_modes = 48;
    const EigenSystem es = w_operator_eigen(m, kHalf, n_modes);

    const bool zero_mode = es.lambda[0] <= 1e-8;
    bool ascending = true;
    for (int i = 1; i < n_modes; ++i) ascending = ascending && es.lambda[i] >= es.lambda[i - 1];
    const double const_dev =
        (es.modes.col(0).array() - es.modes.col(0).mean()).abs().maxCoeff();
    const Eigen::MatrixXd gram =
        es.modes.transpose() * es.modes / static_cast<double>(m) -
        Eigen::MatrixXd::Identity(n_modes, n_modes);
    const double gram_err = gram.cwiseAbs().maxCoeff();

    std::vector<double> times;
    for (int i = 0; i <= 20; ++i) times.push_back(0.05 * i / 20.0);
    SolverOptions opt;
    opt.dt = 1e-4;
    const PdeSolution sol = solve_w_equation(gamma_cosine, m, kHalf, times, opt);
    const Eigen::VectorXd R = uniqueness_functional(sol, es);
    double worst_rise = 0.0;
    for (Eigen::Index i = 1; i < R.size(); ++i) worst_rise = std::max(worst_rise, R[i] - R[i - 1]);

    report(zero_mode && ascending && const_dev <= 1e-6 && gram_err <= 1e-10 &&
               worst_rise <= 1e-12 && R[R.size() - 1] <= 0.1 * R[0],
           fmt("spectral uniqueness: lambda0 %.1e, constant-mode dev %.1e, Gram err %.1e; "
               "R %.3e -> %.3e nonincreasing over 21 times",
               es.lambda[0], const_dev, gram_err, R[0], R[R.size() - 1]));
}

}  // namespace

int main(int argc, char** argv) {
    std::uint64_t seed = kMasterSeed;
    if (argc > 1) seed = std::strtoull(argv[1], nullptr, 10);

    criterion_heat_convergence(seed);
    criterion_w_convergence(seed);
    criterion_segment_structure(seed);
    criterion_martingale(seed);
    criterion_generator_ode(seed);
    criterion_spatial_orders();
    criterion_weak_residuals();
    criterion_replacement(seed);
    criterion_spectrum();

    std::printf("acceptance: %d of 9 criteria passed (seed %llu)\n", 9 - g_failures,
                static_cast<unsigned long long>(seed));
    return g_failures;
}
