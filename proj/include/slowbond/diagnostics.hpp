#pragma once

#include "slowbond/lattice.hpp"
#include "slowbond/pde.hpp"
#include "slowbond/simulator.hpp"

#include <Eigen/Core>

#include <functional>
#include <span>
#include <vector>

namespace slowbond {

// Test function classes paired with the three limit equations: twice
// differentiable on the circle, the critical-regime domain (jumps at the
// slow points, matched one-sided derivatives), and time-dependent smooth
// factors supported on one arc.
enum class FunctionClass { smooth_torus, w_domain, segment };

struct TestFunction {
    FunctionClass cls = FunctionClass::smooth_torus;

    // smooth_torus / w_domain evaluators; `second` is the classical second
    // derivative on the circle, or the generalized one for w_domain.
    std::function<double(double)> value, deriv, second;

    // w_domain bookkeeping.
    std::vector<double> atom_positions;  // atoms of the measure, in (0,1]
    std::vector<double> jumps;           // jump of the function at each atom
    double a = 0.0;                      // value at 0
    double b = 0.0;                      // generalized first derivative at 0

    // segment evaluators: f(t, u) on [seg_a, seg_b].
    std::function<double(double, double)> tvalue, tderiv_u, tsecond_u, tderiv_s;
    double seg_a = 0.0, seg_b = 0.0;

    static TestFunction smooth(std::function<double(double)> value,
                               std::function<double(double)> deriv,
                               std::function<double(double)> second);
    static TestFunction segment(double a, double b, std::function<double(double, double)> value,
                                std::function<double(double, double)> deriv_u,
                                std::function<double(double, double)> second_u,
                                std::function<double(double, double)> deriv_t);

    Eigen::VectorXd sample_lattice(std::int64_t n) const;  // values at x/n
};

// Member of the critical-regime domain with prescribed generalized second
// derivative h (mean zero) and value a at the origin: the unique profile
// whose jump at each slow point equals its one-sided derivatives there.
TestFunction build_cw(const std::function<double(double)>& h, double a,
                      const std::vector<SlowPoint>& slow_points, int quad_n = 8192);

// Exact integral over [0, T] of sum_x coeff[x] eta_s(x) ds along a logged
// trajectory (the integrand is constant between events).
double integrate_linear(const SnapshotSeries& traj, const Eigen::Ref<const Eigen::VectorXd>& coeff,
                        double T);

struct MartingaleSeries {
    std::vector<double> times;
    Eigen::VectorXd martingale;  // M_t(H)
    Eigen::VectorXd quadratic;   // predictable quadratic variation at t
};

// Dynkin decomposition of <pi_t, H> along one logged trajectory; the
// compensator and quadratic variation are integrated exactly event by event.
MartingaleSeries dynkin_martingale(const SnapshotSeries& traj,
                                   const Eigen::Ref<const Eigen::VectorXd>& H_grid);

struct EstimatorStat {
    double mean = 0.0;
    double std_error = 0.0;
    int replicas = 0;
};

// |integral over [0,T] of (eta_s(x) - box average at x)| for one trajectory.
double replacement_integral(const SnapshotSeries& traj, std::int64_t x, double eps);

EstimatorStat replacement_estimator(std::span<const SnapshotSeries> ensemble, std::int64_t x,
                                    double eps);
// Streaming version: simulates its own replicas so memory stays flat.
EstimatorStat replacement_estimator(const LatticeSpec& spec, const InitialProfile& profile,
                                    double T, std::int64_t x, double eps, int replicas,
                                    std::uint64_t seed);

// V_N(eps, H, eta); H must vanish on an eps-neighbourhood of every slow point.
double energy_functional_vn(const Configuration& eta, const LatticeSpec& spec,
                            const std::function<double(double)>& H, double eps);

// Ensemble mean of (1/T) integral of V_N along the trajectory.
EstimatorStat vn_time_average(const LatticeSpec& spec, const InitialProfile& profile,
                              const std::function<double(double)>& H, double eps, double T,
                              int replicas, std::uint64_t seed);

// Entropy ceiling of a Bernoulli(alpha) reference measure, per site.
double k0_bound(double alpha);

struct MartingaleEnsembleStat {
    double mean = 0.0;
    double mean_se = 0.0;
    double variance = 0.0;
    double variance_se = 0.0;
    double qv_mean = 0.0;
    double bound = 0.0;  // (T/N) sup|H'|^2
    int replicas = 0;
};

MartingaleEnsembleStat martingale_ensemble(const LatticeSpec& spec, const InitialProfile& profile,
                                           const Eigen::Ref<const Eigen::VectorXd>& H_grid,
                                           double deriv_sup, double T, int replicas,
                                           std::uint64_t seed);

// Residual of the weak formulation matched to the solution regime at a
// recorded time t; small for faithful solutions and admissible H.
double weak_form_residual(const PdeSolution& sol, const TestFunction& H, double t);

}  // namespace slowbond
