#pragma once

#include "slowbond/lattice.hpp"

#include <Eigen/Core>

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace slowbond {

enum class Regime { heat, w, neumann };

// Limit equation selected by the slow-bond strength alone.
Regime regime_for_beta(double beta);
const char* regime_name(Regime r);

// Weighted graph Laplacian on a path or cycle of grid nodes; every solver
// matrix in this project has this shape, so the implicit steps reduce to
// (cyclic) tridiagonal solves.
class PathLaplacian {
public:
    // cyclic: couplings[i] joins node i and i+1, couplings[m-1] wraps to 0.
    // path: couplings has size m-1 (empty for a single node).
    PathLaplacian(Eigen::VectorXd couplings, bool cyclic);

    Eigen::Index size() const { return size_; }
    Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& u) const;
    // Solve (I - c A) x = r for c >= 0; unconditionally stable direct solve.
    Eigen::VectorXd solve_shifted(double c, const Eigen::Ref<const Eigen::VectorXd>& r) const;
    Eigen::MatrixXd dense() const;

private:
    Eigen::VectorXd g_;
    bool cyclic_;
    Eigen::Index size_;
};

struct SolverOptions {
    double dt = 1e-4;        // target step; record intervals are subdivided evenly
    int smoothing_steps = 5; // backward-difference startup steps on overshoot restart
};

struct PdeSolution {
    Regime regime = Regime::heat;
    std::int64_t m = 0;                 // number of grid nodes
    double dt = 0.0;                    // target step used
    std::vector<SlowPoint> slow_points; // empty for heat
    Eigen::VectorXd nodes;              // sample positions in (0,1]
    std::vector<double> times;          // recorded times, ascending
    Eigen::MatrixXd values;             // times x nodes
    bool smoothed = false;              // restarted with damped startup steps
    double max_principle_excess = 0.0;  // worst excursion beyond [min,max] of the data
};

// Periodic heat equation on the unit circle, second-order in space and time.
PdeSolution solve_heat_periodic(const std::function<double(double)>& gamma, std::int64_t m,
                                std::span<const double> record_times,
                                const SolverOptions& options = {});

// Critical-regime equation: finite volumes with unit conductance everywhere
// except the faces carrying a slow point, which get conductance 1/m.  The
// resulting matrix coincides with the N^2-speeded lattice generator at
// beta = 1 on the same grid.
PdeSolution solve_w_equation(const std::function<double(double)>& gamma, std::int64_t m,
                             const std::vector<SlowPoint>& slow_points,
                             std::span<const double> record_times,
                             const SolverOptions& options = {});

// Independent Neumann heat evolution on each arc between consecutive slow
// points; cell-centered grid so segment boundaries are sharp.
PdeSolution solve_neumann_segments(const std::function<double(double)>& gamma, std::int64_t m,
                                   const std::vector<SlowPoint>& slow_points,
                                   std::span<const double> record_times,
                                   const SolverOptions& options = {});

// Reference solution of d phi / dt = N^2 L_N phi via a dense symmetric
// eigendecomposition; rows follow record_times.
Eigen::MatrixXd discrete_ode_oracle(const LatticeSpec& spec,
                                    const Eigen::Ref<const Eigen::VectorXd>& phi0,
                                    std::span<const double> record_times);
Eigen::MatrixXd discrete_ode_oracle(const LatticeSpec& spec,
                                    const std::function<double(double)>& gamma,
                                    std::span<const double> record_times);

struct EigenSystem {
    Eigen::VectorXd lambda;  // ascending eigenvalues of the positive operator
    Eigen::MatrixXd modes;   // m x n_modes, orthonormal in (1/m) sum f g
};

// Spectrum of -(critical-regime operator) on m nodes.
EigenSystem w_operator_eigen(std::int64_t m, const std::vector<SlowPoint>& slow_points,
                             int n_modes);

// R(t) = sum_{n>=1} <rho_t - mean, F_n>^2 / (n^2 (1 + lambda_n)), one entry
// per recorded time; nonincreasing along critical-regime solutions.
Eigen::VectorXd uniqueness_functional(const PdeSolution& sol, const EigenSystem& es);

// One-sided limits of the solution at each slow point (columns follow the
// sorted slow points, rows the recorded times).
Eigen::MatrixXd trace_left(const PdeSolution& sol);
Eigen::MatrixXd trace_right(const PdeSolution& sol);

double total_mass(const PdeSolution& sol, Eigen::Index row);
// Per-segment masses for the segmented regime.
Eigen::VectorXd segment_masses(const PdeSolution& sol, Eigen::Index row);

// Sample a recorded row at lattice positions x/N for x = 1..N without ever
// interpolating across a slow point.
Eigen::VectorXd resample_to_lattice(const PdeSolution& sol, std::int64_t n, Eigen::Index row);

// Text dump with %.17g values; import reproduces the solution bit for bit.
void export_solution(const PdeSolution& sol, const std::string& path);
PdeSolution import_solution(const std::string& path);

}  // namespace slowbond
