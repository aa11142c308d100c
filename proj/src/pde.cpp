#include "slowbond/pde.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace slowbond {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

double wrap01(double u) { return u - std::floor(u); }

// Exact node index of a slow point on an m-grid, in {0..m-1}; the point must
// sit on a grid node.
std::int64_t aligned_index(const SlowPoint& p, std::int64_t m) {
    const __int128 scaled = static_cast<__int128>(m) * p.num;
    if (scaled % p.den != 0) {
        fail("slow point " + p.text + " is not a grid node at M=" + std::to_string(m));
    }
    return static_cast<std::int64_t>(scaled / p.den);
}

std::vector<SlowPoint> sorted_points(std::vector<SlowPoint> pts) {
    std::sort(pts.begin(), pts.end(), [](const SlowPoint& a, const SlowPoint& b) {
        return static_cast<__int128>(a.num) * b.den < static_cast<__int128>(b.num) * a.den;
    });
    return pts;
}

// Cell lists of the arcs between consecutive slow points; cell j in {1..m}
// has center (j - 1/2)/m and the arc starting at b_i holds cells
// {m b_i + 1, ..., m b_{i+1}} (cyclic).
std::vector<std::vector<Eigen::Index>> neumann_cells(std::int64_t m,
                                                     const std::vector<SlowPoint>& slow) {
    if (slow.empty()) fail("segmented solver needs at least one slow point");
    const std::size_t k = slow.size();
    std::vector<std::int64_t> v(k);
    for (std::size_t i = 0; i < k; ++i) v[i] = aligned_index(slow[i], m);
    std::vector<std::vector<Eigen::Index>> cells(k);
    for (std::size_t i = 0; i < k; ++i) {
        const std::int64_t count = i + 1 < k ? v[i + 1] - v[i] : v[0] + m - v[i];
        if (count < 1) fail("empty segment between slow points");
        cells[i].reserve(static_cast<std::size_t>(count));
        for (std::int64_t j = 1; j <= count; ++j) {
            cells[i].push_back(static_cast<Eigen::Index>((v[i] + j - 1) % m));
        }
    }
    return cells;
}

struct StepMonitor {
    double lo, hi;
    double excess = 0.0;
    void observe(const Eigen::VectorXd& u) {
        excess = std::max({excess, u.maxCoeff() - hi, lo - u.minCoeff()});
    }
};

// Crank-Nicolson march with an optional damped (backward-difference) start;
// records the state at every requested time.
void march(const PathLaplacian& A, Eigen::VectorXd& u, std::span<const double> record_times,
           double dt_target, int smooth_steps, StepMonitor& monitor,
           const std::function<void(std::size_t, const Eigen::VectorXd&)>& store) {
    double t = 0.0;
    int taken = 0;
    for (std::size_t r = 0; r < record_times.size(); ++r) {
        const double span = record_times[r] - t;
        if (span < 0.0) fail("record times must be ascending");
        if (span > 0.0) {
            const auto steps = static_cast<std::int64_t>(std::ceil(span / dt_target - 1e-9));
            const double dt = span / static_cast<double>(std::max<std::int64_t>(steps, 1));
            for (std::int64_t s = 0; s < std::max<std::int64_t>(steps, 1); ++s) {
                if (taken < smooth_steps) {
                    u = A.solve_shifted(dt, u);
                } else {
                    const Eigen::VectorXd rhs = u + 0.5 * dt * A.apply(u);
                    u = A.solve_shifted(0.5 * dt, rhs);
                }
                ++taken;
                monitor.observe(u);
            }
            t = record_times[r];
        }
        store(r, u);
    }
}

void check_records(std::span<const double> record_times) {
    if (record_times.empty()) fail("at least one record time is required");
    if (record_times.front() < 0.0 || !std::is_sorted(record_times.begin(), record_times.end())) {
        fail("record times must be sorted and nonnegative");
    }
}

// Shared driver: run plain, restart once with damped startup steps if the
// march left the data range.
PdeSolution run_cyclic(Regime regime, std::int64_t m, const Eigen::VectorXd& init,
                       Eigen::VectorXd nodes, const PathLaplacian& A,
                       std::vector<SlowPoint> slow, std::span<const double> record_times,
                       const SolverOptions& options) {
    PdeSolution sol;
    sol.regime = regime;
    sol.m = m;
    sol.dt = options.dt;
    sol.slow_points = std::move(slow);
    sol.nodes = std::move(nodes);
    sol.times.assign(record_times.begin(), record_times.end());
    sol.values.resize(static_cast<Eigen::Index>(record_times.size()), m);
    for (int attempt = 0; attempt < 2; ++attempt) {
        const bool smooth = attempt == 1;
        StepMonitor monitor{init.minCoeff(), init.maxCoeff()};
        Eigen::VectorXd u = init;
        march(A, u, record_times, options.dt, smooth ? options.smoothing_steps : 0, monitor,
              [&](std::size_t r, const Eigen::VectorXd& state) {
                  sol.values.row(static_cast<Eigen::Index>(r)) = state.transpose();
              });
        sol.smoothed = smooth;
        sol.max_principle_excess = monitor.excess;
        if (monitor.excess <= 1e-12) break;
    }
    return sol;
}

Eigen::VectorXd sample_profile(const std::function<double(double)>& gamma,
                               const Eigen::VectorXd& nodes) {
    Eigen::VectorXd u(nodes.size());
    for (Eigen::Index i = 0; i < nodes.size(); ++i) u[i] = gamma(wrap01(nodes[i]));
    return u;
}

}  // namespace

Regime regime_for_beta(double beta) {
    if (!(beta >= 0.0) || !std::isfinite(beta)) fail("beta must be a finite real >= 0");
    if (beta < 1.0) return Regime::heat;
    if (beta == 1.0) return Regime::w;
    return Regime::neumann;
}

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::heat: return "heat";
        case Regime::w: return "w";
        case Regime::neumann: return "neumann";
    }
    return "?";
}

PathLaplacian::PathLaplacian(Eigen::VectorXd couplings, bool cyclic)
    : g_(std::move(couplings)), cyclic_(cyclic) {
    size_ = cyclic_ ? g_.size() : g_.size() + 1;
    if (cyclic_ && size_ < 2) fail("cyclic operator needs at least two nodes");
    if ((g_.array() < 0.0).any()) fail("couplings must be nonnegative");
}

Eigen::VectorXd PathLaplacian::apply(const Eigen::Ref<const Eigen::VectorXd>& u) const {
    if (u.size() != size_) fail("vector length does not match operator size");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(size_);
    const Eigen::Index edges = g_.size();
    for (Eigen::Index e = 0; e < edges; ++e) {
        const Eigen::Index i = e;
        const Eigen::Index j = (e + 1) % size_;
        const double flow = g_[e] * (u[j] - u[i]);
        out[i] += flow;
        out[j] -= flow;
    }
    return out;
}

Eigen::MatrixXd PathLaplacian::dense() const {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(size_, size_);
    const Eigen::Index edges = g_.size();
    for (Eigen::Index e = 0; e < edges; ++e) {
        const Eigen::Index i = e;
        const Eigen::Index j = (e + 1) % size_;
        A(i, j) += g_[e];
        A(j, i) += g_[e];
        A(i, i) -= g_[e];
        A(j, j) -= g_[e];
    }
    return A;
}

namespace {

// Thomas sweep for a strictly tridiagonal system; diag is consumed.
Eigen::VectorXd thomas(Eigen::VectorXd diag, const Eigen::VectorXd& sub,
                       const Eigen::VectorXd& sup, Eigen::VectorXd rhs) {
    const Eigen::Index n = diag.size();
    for (Eigen::Index i = 1; i < n; ++i) {
        const double wgt = sub[i - 1] / diag[i - 1];
        diag[i] -= wgt * sup[i - 1];
        rhs[i] -= wgt * rhs[i - 1];
    }
    Eigen::VectorXd x(n);
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for (Eigen::Index i = n - 2; i >= 0; --i) x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
    return x;
}

}  // namespace

Eigen::VectorXd PathLaplacian::solve_shifted(double c,
                                             const Eigen::Ref<const Eigen::VectorXd>& r) const {
    if (r.size() != size_) fail("vector length does not match operator size");
    if (c == 0.0) return r;
    const Eigen::Index n = size_;
    Eigen::VectorXd diag = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd sub = Eigen::VectorXd::Zero(std::max<Eigen::Index>(n - 1, 0));
    Eigen::VectorXd sup = sub;
    const Eigen::Index inner = cyclic_ ? n - 1 : g_.size();
    for (Eigen::Index e = 0; e < inner; ++e) {
        diag[e] += c * g_[e];
        diag[e + 1] += c * g_[e];
        sub[e] -= c * g_[e];
        sup[e] -= c * g_[e];
    }
    if (!cyclic_) {
        if (n == 1) return r / diag[0];
        return thomas(std::move(diag), sub, sup, r);
    }
    // Wrap coupling: rank-one correction on top of the tridiagonal core.
    const double gw = g_[n - 1];
    diag[0] += c * gw;
    diag[n - 1] += c * gw;
    const double corner = -c * gw;  // A(0,n-1) and A(n-1,0) of the shifted matrix
    const double gamma = -diag[0];
    Eigen::VectorXd bdiag = diag;
    bdiag[0] -= gamma;
    bdiag[n - 1] -= corner * corner / gamma;
    Eigen::VectorXd uvec = Eigen::VectorXd::Zero(n);
    uvec[0] = gamma;
    uvec[n - 1] = corner;
    const Eigen::VectorXd y = thomas(bdiag, sub, sup, r);
    const Eigen::VectorXd z = thomas(bdiag, sub, sup, uvec);
    const double vy = y[0] + corner / gamma * y[n - 1];
    const double vz = z[0] + corner / gamma * z[n - 1];
    return y - z * (vy / (1.0 + vz));
}

PdeSolution solve_heat_periodic(const std::function<double(double)>& gamma, std::int64_t m,
                                std::span<const double> record_times,
                                const SolverOptions& options) {
    if (m < 4) fail("grid too coarse");
    check_records(record_times);
    const double m2 = static_cast<double>(m) * static_cast<double>(m);
    Eigen::VectorXd nodes(m);
    for (std::int64_t i = 0; i < m; ++i) nodes[i] = static_cast<double>(i + 1) / static_cast<double>(m);
    const PathLaplacian A(Eigen::VectorXd::Constant(m, m2), true);
    // Sample before handing the node vector over; the argument order of the
    // call below must not be allowed to move it first.
    Eigen::VectorXd init = sample_profile(gamma, nodes);
    return run_cyclic(Regime::heat, m, init, std::move(nodes), A, {}, record_times, options);
}

PdeSolution solve_w_equation(const std::function<double(double)>& gamma, std::int64_t m,
                             const std::vector<SlowPoint>& slow_points,
                             std::span<const double> record_times,
                             const SolverOptions& options) {
    if (m < 4) fail("grid too coarse");
    check_records(record_times);
    auto slow = sorted_points(slow_points);
    for (const SlowPoint& p : slow) aligned_index(p, m);
    if (static_cast<std::int64_t>(slow.size()) * 16 > m) fail("grid too coarse for the slow points: need M >= 16k");
    const LatticeSpec lspec(m, 1.0, slow);
    const double m2 = static_cast<double>(m) * static_cast<double>(m);
    Eigen::VectorXd couplings(m);
    // Face between nodes i and i+1 is lattice bond (i+1, i+2); conductance
    // 1/m on slow faces reproduces the beta = 1 lattice generator exactly.
    for (std::int64_t i = 0; i < m; ++i) couplings[i] = m2 * lspec.conductance(i + 1);
    Eigen::VectorXd nodes(m);
    for (std::int64_t i = 0; i < m; ++i) nodes[i] = static_cast<double>(i + 1) / static_cast<double>(m);
    const PathLaplacian A(std::move(couplings), true);
    Eigen::VectorXd init = sample_profile(gamma, nodes);
    return run_cyclic(Regime::w, m, init, std::move(nodes), A, std::move(slow), record_times,
                      options);
}

PdeSolution solve_neumann_segments(const std::function<double(double)>& gamma, std::int64_t m,
                                   const std::vector<SlowPoint>& slow_points,
                                   std::span<const double> record_times,
                                   const SolverOptions& options) {
    if (m < 4) fail("grid too coarse");
    check_records(record_times);
    auto slow = sorted_points(slow_points);
    if (static_cast<std::int64_t>(slow.size()) * 16 > m) fail("grid too coarse for the slow points: need M >= 16k");
    const auto cells = neumann_cells(m, slow);
    const double m2 = static_cast<double>(m) * static_cast<double>(m);

    PdeSolution sol;
    sol.regime = Regime::neumann;
    sol.m = m;
    sol.dt = options.dt;
    sol.slow_points = slow;
    sol.nodes.resize(m);
    for (std::int64_t j = 0; j < m; ++j) {
        sol.nodes[j] = (static_cast<double>(j) + 0.5) / static_cast<double>(m);
    }
    sol.times.assign(record_times.begin(), record_times.end());
    sol.values.resize(static_cast<Eigen::Index>(record_times.size()), m);

    const Eigen::VectorXd init = sample_profile(gamma, sol.nodes);
    double worst = 0.0;
    bool any_smoothed = false;
    for (const auto& seg : cells) {
        const Eigen::Index ns = static_cast<Eigen::Index>(seg.size());
        Eigen::VectorXd u0(ns);
        for (Eigen::Index i = 0; i < ns; ++i) u0[i] = init[seg[static_cast<std::size_t>(i)]];
        const PathLaplacian A(Eigen::VectorXd::Constant(std::max<Eigen::Index>(ns - 1, 0), m2),
                              false);
        for (int attempt = 0; attempt < 2; ++attempt) {
            StepMonitor monitor{u0.minCoeff(), u0.maxCoeff()};
            Eigen::VectorXd u = u0;
            march(A, u, record_times, options.dt,
                  attempt == 1 ? options.smoothing_steps : 0, monitor,
                  [&](std::size_t r, const Eigen::VectorXd& state) {
                      for (Eigen::Index i = 0; i < ns; ++i) {
                          sol.values(static_cast<Eigen::Index>(r), seg[static_cast<std::size_t>(i)]) =
                              state[i];
                      }
                  });
            if (monitor.excess <= 1e-12 || attempt == 1) {
                worst = std::max(worst, monitor.excess);
                any_smoothed = any_smoothed || attempt == 1;
                break;
            }
        }
    }
    sol.smoothed = any_smoothed;
    sol.max_principle_excess = worst;
    return sol;
}

Eigen::MatrixXd discrete_ode_oracle(const LatticeSpec& spec,
                                    const Eigen::Ref<const Eigen::VectorXd>& phi0,
                                    std::span<const double> record_times) {
    const std::int64_t n = spec.size();
    if (n > 2048) fail("dense reference solver capped at N <= 2048");
    if (phi0.size() != n) fail("initial vector length must equal lattice size");
    check_records(record_times);
    const Eigen::MatrixXd A = generator_matrix(spec);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
    const Eigen::VectorXd coef = es.eigenvectors().transpose() * phi0;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(record_times.size()), n);
    for (std::size_t r = 0; r < record_times.size(); ++r) {
        const Eigen::VectorXd decay =
            ((es.eigenvalues().array() * record_times[r]).exp() * coef.array()).matrix();
        out.row(static_cast<Eigen::Index>(r)) = (es.eigenvectors() * decay).transpose();
    }
    return out;
}

Eigen::MatrixXd discrete_ode_oracle(const LatticeSpec& spec,
                                    const std::function<double(double)>& gamma,
                                    std::span<const double> record_times) {
    const std::int64_t n = spec.size();
    Eigen::VectorXd phi0(n);
    for (std::int64_t x = 1; x <= n; ++x) {
        phi0[x - 1] = gamma(wrap01(static_cast<double>(x) / static_cast<double>(n)));
    }
    return discrete_ode_oracle(spec, phi0, record_times);
}

EigenSystem w_operator_eigen(std::int64_t m, const std::vector<SlowPoint>& slow_points,
                             int n_modes) {
    if (m < 4 || m > 4096) fail("eigensolver grid must satisfy 4 <= M <= 4096");
    if (n_modes < 1 || n_modes > m) fail("need 1 <= n_modes <= M");
    const auto slow = sorted_points(slow_points);
    for (const SlowPoint& p : slow) aligned_index(p, m);
    const double m2 = static_cast<double>(m) * static_cast<double>(m);
    Eigen::VectorXd couplings = Eigen::VectorXd::Constant(m, m2);
    if (!slow.empty()) {
        // With defects present, reuse the lattice scaling beta=1 so each slow
        // coupling becomes m^2 * m^{-1} = m, the discrete W operator.
        const LatticeSpec lspec(m, 1.0, slow);
        for (std::int64_t i = 0; i < m; ++i) couplings[i] = m2 * lspec.conductance(i + 1);
    }
    const PathLaplacian A(std::move(couplings), true);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-A.dense());
    if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
    EigenSystem sys;
    sys.lambda = es.eigenvalues().head(n_modes);
    // Rescale so the modes are orthonormal in (1/m) sum_j f_j g_j.
    sys.modes = es.eigenvectors().leftCols(n_modes) * std::sqrt(static_cast<double>(m));
    return sys;
}

Eigen::VectorXd uniqueness_functional(const PdeSolution& sol, const EigenSystem& es) {
    if (es.modes.rows() != sol.values.cols()) fail("mode grid does not match solution grid");
    const Eigen::Index rows = sol.values.rows();
    const double m = static_cast<double>(sol.values.cols());
    Eigen::VectorXd out(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        Eigen::VectorXd centered = sol.values.row(r).transpose();
        centered.array() -= centered.mean();
        const Eigen::VectorXd coef = es.modes.transpose() * centered / m;
        double acc = 0.0;
        for (Eigen::Index nidx = 1; nidx < coef.size(); ++nidx) {
            const double n = static_cast<double>(nidx);
            acc += coef[nidx] * coef[nidx] / (n * n * (1.0 + es.lambda[nidx]));
        }
        out[r] = acc;
    }
    return out;
}

namespace {

// Interface sample columns: for each slow point the node indices carrying
// the left and right one-sided values.
void interface_columns(const PdeSolution& sol, std::vector<Eigen::Index>& left,
                       std::vector<Eigen::Index>& right) {
    left.clear();
    right.clear();
    const std::int64_t m = sol.m;
    if (sol.regime == Regime::w) {
        const LatticeSpec lspec(m, 1.0, sol.slow_points);
        for (std::int64_t L : lspec.slow_left_vertices()) {
            left.push_back(static_cast<Eigen::Index>(L - 1));
            right.push_back(static_cast<Eigen::Index>(L % m));
        }
    } else if (sol.regime == Regime::neumann) {
        const auto cells = neumann_cells(m, sol.slow_points);
        const std::size_t k = cells.size();
        for (std::size_t i = 0; i < k; ++i) {
            right.push_back(cells[i].front());
            left.push_back(cells[(i + k - 1) % k].back());
        }
    }
}

}  // namespace

Eigen::MatrixXd trace_left(const PdeSolution& sol) {
    std::vector<Eigen::Index> left, right;
    interface_columns(sol, left, right);
    Eigen::MatrixXd out(sol.values.rows(), static_cast<Eigen::Index>(left.size()));
    for (std::size_t i = 0; i < left.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = sol.values.col(left[i]);
    return out;
}

Eigen::MatrixXd trace_right(const PdeSolution& sol) {
    std::vector<Eigen::Index> left, right;
    interface_columns(sol, left, right);
    Eigen::MatrixXd out(sol.values.rows(), static_cast<Eigen::Index>(right.size()));
    for (std::size_t i = 0; i < right.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = sol.values.col(right[i]);
    return out;
}

double total_mass(const PdeSolution& sol, Eigen::Index row) {
    return sol.values.row(row).sum() / static_cast<double>(sol.m);
}

Eigen::VectorXd segment_masses(const PdeSolution& sol, Eigen::Index row) {
    if (sol.regime != Regime::neumann) fail("per-segment masses only exist in the segmented regime");
    const auto cells = neumann_cells(sol.m, sol.slow_points);
    Eigen::VectorXd out(static_cast<Eigen::Index>(cells.size()));
    for (std::size_t s = 0; s < cells.size(); ++s) {
        double acc = 0.0;
        for (Eigen::Index j : cells[s]) acc += sol.values(row, j);
        out[static_cast<Eigen::Index>(s)] = acc / static_cast<double>(sol.m);
    }
    return out;
}

namespace {

// Segment id of a macroscopic point: the arc [b_i, b_{i+1}) that contains u.
std::size_t segment_of(const std::vector<SlowPoint>& slow, double u) {
    const std::size_t k = slow.size();
    for (std::size_t i = 0; i + 1 < k; ++i) {
        if (u >= slow[i].value() && u < slow[i + 1].value()) return i;
    }
    return k - 1;  // wrapping arc
}

}  // namespace

Eigen::VectorXd resample_to_lattice(const PdeSolution& sol, std::int64_t n, Eigen::Index row) {
    if (n < 2) fail("lattice size must be at least 2");
    const std::int64_t m = sol.m;
    const Eigen::VectorXd vals = sol.values.row(row).transpose();
    Eigen::VectorXd out(n);
    if (sol.regime == Regime::heat) {
        for (std::int64_t x = 1; x <= n; ++x) {
            const double s = static_cast<double>(x) / static_cast<double>(n) * m - 1.0;
            const double fl = std::floor(s);
            const auto j = static_cast<std::int64_t>(fl);
            const double frac = s - fl;
            const std::int64_t j0 = (j % m + m) % m;
            const std::int64_t j1 = (j0 + 1) % m;
            out[x - 1] = (1.0 - frac) * vals[j0] + frac * vals[j1];
        }
        return out;
    }
    const auto& slow = sol.slow_points;
    std::vector<std::int64_t> v(slow.size());
    for (std::size_t i = 0; i < slow.size(); ++i) v[i] = aligned_index(slow[i], m);
    for (std::int64_t x = 1; x <= n; ++x) {
        double u = static_cast<double>(x) / static_cast<double>(n);
        if (u >= 1.0) u -= 1.0;
        const std::size_t s = segment_of(slow, u);
        double d = u - slow[s].value();
        if (d < 0.0) d += 1.0;
        const std::int64_t len = s + 1 < v.size() ? v[s + 1] - v[s] : v[0] + m - v[s];
        const double offset_scale = d * static_cast<double>(m);
        // 0-based value index of the node at offset `off` along the segment:
        // w nodes are sites v_s .. v_{s+1}-1, segmented cells are v_s+1 .. v_{s+1}.
        const std::int64_t first = sol.regime == Regime::w ? v[s] - 1 : v[s];
        auto cell = [&](std::int64_t off) {
            const std::int64_t idx = (first + off) % m;
            return vals[idx < 0 ? idx + m : idx];
        };
        if (sol.regime == Regime::w) {
            // Never blend across the cut; extrapolate from inside instead.
            double r = offset_scale;
            if (len == 1) {
                out[x - 1] = cell(0);
                continue;
            }
            if (r > static_cast<double>(len - 1)) {
                const double slope = cell(len - 1) - cell(len - 2);
                out[x - 1] = cell(len - 1) + (r - static_cast<double>(len - 1)) * slope;
                continue;
            }
            const double fl = std::floor(r);
            const auto j = static_cast<std::int64_t>(fl);
            const double frac = r - fl;
            out[x - 1] = (1.0 - frac) * cell(j) + frac * cell(std::min(j + 1, len - 1));
        } else {
            // Cell centers at offsets 1/2..len-1/2; clamp at the reflecting
            // ends where the solution is flat to second order.
            double r = offset_scale - 0.5;
            r = std::clamp(r, 0.0, static_cast<double>(len - 1));
            const double fl = std::floor(r);
            const auto j = static_cast<std::int64_t>(fl);
            const double frac = r - fl;
            out[x - 1] = (1.0 - frac) * cell(j) + frac * cell(std::min(j + 1, len - 1));
        }
    }
    return out;
}

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void export_solution(const PdeSolution& sol, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "# slowbond-v1 pde regime=" << regime_name(sol.regime) << " M=" << sol.m
        << " dt=" << fmt17(sol.dt) << " smoothed=" << (sol.smoothed ? 1 : 0) << " slow_points=";
    if (sol.slow_points.empty()) {
        out << "-";
    } else {
        for (std::size_t i = 0; i < sol.slow_points.size(); ++i) {
            out << (i ? ";" : "") << sol.slow_points[i].text;
        }
    }
    out << "\n# u";
    for (Eigen::Index j = 0; j < sol.nodes.size(); ++j) out << "," << fmt17(sol.nodes[j]);
    out << "\n";
    for (std::size_t r = 0; r < sol.times.size(); ++r) {
        out << fmt17(sol.times[r]);
        for (Eigen::Index j = 0; j < sol.values.cols(); ++j) {
            out << "," << fmt17(sol.values(static_cast<Eigen::Index>(r), j));
        }
        out << "\n";
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

PdeSolution import_solution(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# slowbond-v1 pde ", 0) != 0) {
        throw std::runtime_error("not a slowbond-v1 pde dump: " + path);
    }
    PdeSolution sol;
    {
        std::istringstream header(line.substr(2));
        std::string tok;
        while (header >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = tok.substr(0, eq);
            const std::string val = tok.substr(eq + 1);
            if (key == "regime") {
                if (val == "heat") sol.regime = Regime::heat;
                else if (val == "w") sol.regime = Regime::w;
                else if (val == "neumann") sol.regime = Regime::neumann;
                else throw std::runtime_error("unknown regime in dump: " + val);
            } else if (key == "M") {
                sol.m = std::stoll(val);
            } else if (key == "dt") {
                sol.dt = std::stod(val);
            } else if (key == "smoothed") {
                sol.smoothed = val == "1";
            } else if (key == "slow_points" && val != "-") {
                std::istringstream pts(val);
                std::string p;
                while (std::getline(pts, p, ';')) sol.slow_points.push_back(SlowPoint::parse(p));
            }
        }
    }
    if (sol.m <= 0) throw std::runtime_error("bad grid size in dump header");
    if (!std::getline(in, line) || line.rfind("# u,", 0) != 0) {
        throw std::runtime_error("missing node row in dump");
    }
    std::vector<double> nodes;
    {
        std::istringstream row(line.substr(4));
        std::string cell;
        while (std::getline(row, cell, ',')) nodes.push_back(std::stod(cell));
    }
    if (static_cast<std::int64_t>(nodes.size()) != sol.m) {
        throw std::runtime_error("node count disagrees with header");
    }
    sol.nodes = Eigen::Map<Eigen::VectorXd>(nodes.data(), static_cast<Eigen::Index>(nodes.size()));
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::vector<double> parsed;
        while (std::getline(row, cell, ',')) parsed.push_back(std::stod(cell));
        if (static_cast<std::int64_t>(parsed.size()) != sol.m + 1) {
            throw std::runtime_error("bad row width in dump");
        }
        rows.push_back(std::move(parsed));
    }
    sol.values.resize(static_cast<Eigen::Index>(rows.size()), sol.m);
    sol.times.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        sol.times[r] = rows[r][0];
        for (std::int64_t j = 0; j < sol.m; ++j) {
            sol.values(static_cast<Eigen::Index>(r), j) = rows[r][static_cast<std::size_t>(j + 1)];
        }
    }
    return sol;
}

}  // namespace slowbond
