#include "slowbond/diagnostics.hpp"

#include "slowbond/empirical.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

namespace slowbond {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

double cyclic_dist(double u, double v) {
    const double d = std::fabs(u - v);
    return std::min(d, 1.0 - d);
}

}  // namespace

TestFunction TestFunction::smooth(std::function<double(double)> value,
                                  std::function<double(double)> deriv,
                                  std::function<double(double)> second) {
    TestFunction f;
    f.cls = FunctionClass::smooth_torus;
    f.value = std::move(value);
    f.deriv = std::move(deriv);
    f.second = std::move(second);
    return f;
}

TestFunction TestFunction::segment(double a, double b, std::function<double(double, double)> value,
                                   std::function<double(double, double)> deriv_u,
                                   std::function<double(double, double)> second_u,
                                   std::function<double(double, double)> deriv_t) {
    if (!(b > a) || !(b - a <= 1.0)) fail("segment must satisfy a < b <= a+1");
    TestFunction f;
    f.cls = FunctionClass::segment;
    f.seg_a = a;
    f.seg_b = b;
    f.tvalue = std::move(value);
    f.tderiv_u = std::move(deriv_u);
    f.tsecond_u = std::move(second_u);
    f.tderiv_s = std::move(deriv_t);
    return f;
}

Eigen::VectorXd TestFunction::sample_lattice(std::int64_t n) const {
    if (cls == FunctionClass::segment) fail("segment functions are time dependent; sample via tvalue");
    Eigen::VectorXd out(n);
    for (std::int64_t x = 1; x <= n; ++x) out[x - 1] = value(static_cast<double>(x) / static_cast<double>(n));
    return out;
}

TestFunction build_cw(const std::function<double(double)>& h, double a,
                      const std::vector<SlowPoint>& slow_points, int quad_n) {
    if (quad_n < 16) fail("quadrature grid too coarse");
    if (slow_points.empty()) fail("at least one slow point is required");
    const int Q = quad_n;
    auto hv = std::make_shared<std::vector<double>>(static_cast<std::size_t>(Q) + 1);
    for (int i = 0; i <= Q; ++i) (*hv)[static_cast<std::size_t>(i)] = h(static_cast<double>(i) / Q);
    // F(x) = int_0^x h, then I2(x) = int_0^x F, both cumulative trapezoid.
    auto F = std::make_shared<std::vector<double>>(static_cast<std::size_t>(Q) + 1, 0.0);
    for (int i = 1; i <= Q; ++i) {
        (*F)[static_cast<std::size_t>(i)] =
            (*F)[static_cast<std::size_t>(i - 1)] +
            0.5 * ((*hv)[static_cast<std::size_t>(i - 1)] + (*hv)[static_cast<std::size_t>(i)]) / Q;
    }
    const double total_h = F->back();
    double scale = 0.0;
    for (double v : *hv) scale = std::max(scale, std::fabs(v));
    if (std::fabs(total_h) > 1e-8 * (1.0 + scale)) {
        fail("generalized second derivative must have zero mean");
    }
    auto I2 = std::make_shared<std::vector<double>>(static_cast<std::size_t>(Q) + 1, 0.0);
    for (int i = 1; i <= Q; ++i) {
        (*I2)[static_cast<std::size_t>(i)] =
            (*I2)[static_cast<std::size_t>(i - 1)] +
            0.5 * ((*F)[static_cast<std::size_t>(i - 1)] + (*F)[static_cast<std::size_t>(i)]) / Q;
    }
    auto table = [Q](const std::vector<double>& tab, double x) {
        x -= std::floor(x);
        const double s = x * Q;
        const double fl = std::floor(s);
        const int i = std::min(static_cast<int>(fl), Q - 1);
        const double frac = s - static_cast<double>(i);
        return tab[static_cast<std::size_t>(i)] +
               frac * (tab[static_cast<std::size_t>(i + 1)] - tab[static_cast<std::size_t>(i)]);
    };

    TestFunction f;
    f.cls = FunctionClass::w_domain;
    f.a = a;
    const double int_F = I2->back();
    double atom_F_sum = 0.0;
    for (const SlowPoint& p : slow_points) atom_F_sum += table(*F, p.value());
    const double k = static_cast<double>(slow_points.size());
    f.b = -(int_F + atom_F_sum) / (1.0 + k);
    for (const SlowPoint& p : slow_points) {
        const double pos = p.value() == 0.0 ? 1.0 : p.value();
        f.atom_positions.push_back(pos);
        f.jumps.push_back(f.b + table(*F, p.value()));
    }
    // Keep atoms sorted by their position in (0,1].
    std::vector<std::size_t> order(f.atom_positions.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return f.atom_positions[i] < f.atom_positions[j];
    });
    std::vector<double> pos_sorted, jump_sorted;
    for (std::size_t i : order) {
        pos_sorted.push_back(f.atom_positions[i]);
        jump_sorted.push_back(f.jumps[i]);
    }
    f.atom_positions = pos_sorted;
    f.jumps = jump_sorted;

    const double b = f.b;
    const auto atoms = f.atom_positions;
    const auto jumps = f.jumps;
    f.value = [=](double x) {
        x -= std::floor(x);
        double acc = a + b * x + table(*I2, x);
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            if (atoms[i] <= x) acc += jumps[i];
        }
        return acc;
    };
    f.deriv = [=](double x) { return b + table(*F, x); };
    f.second = h;
    return f;
}

double integrate_linear(const SnapshotSeries& traj, const Eigen::Ref<const Eigen::VectorXd>& coeff,
                        double T) {
    if (!traj.has_events) fail("trajectory was simulated without event logging");
    const std::int64_t n = traj.lattice_size();
    if (coeff.size() != n) fail("coefficient vector length must equal lattice size");
    if (T > traj.times.back() + 1e-12) fail("integration horizon exceeds the simulated span");
    Configuration eta = traj.states.front();
    double S = 0.0;
    for (std::int64_t x = 1; x <= n; ++x) S += coeff[x - 1] * eta.occ(x);
    double acc = 0.0;
    double t = 0.0;
    for (const EventRecord& ev : traj.events) {
        if (ev.time > T) break;
        acc += S * (ev.time - t);
        t = ev.time;
        const std::int64_t x = ev.bond;
        const std::int64_t y = x % n + 1;
        S += (coeff[x - 1] - coeff[y - 1]) * (eta.occ(y) - eta.occ(x));
        exchange_in_place(eta, x);
    }
    acc += S * (T - t);
    return acc;
}

MartingaleSeries dynkin_martingale(const SnapshotSeries& traj,
                                   const Eigen::Ref<const Eigen::VectorXd>& H_grid) {
    if (!traj.has_events) fail("trajectory was simulated without event logging");
    const std::int64_t n = traj.lattice_size();
    if (H_grid.size() != n) fail("grid vector length must equal lattice size");
    const LatticeSpec& spec = traj.spec;
    const double n2 = static_cast<double>(n) * static_cast<double>(n);
    // Compensator integrand coefficients: <pi, N^2 L H> = sum_x G_x eta(x)/N.
    const Eigen::VectorXd G = n2 / static_cast<double>(n) * discrete_operator_apply(spec, H_grid);
    // Per-bond quadratic-variation weights xi_x (Delta H_x)^2.
    Eigen::VectorXd qw(n);
    for (std::int64_t x = 1; x <= n; ++x) {
        const std::int64_t y = x % n + 1;
        const double dH = H_grid[y - 1] - H_grid[x - 1];
        qw[x - 1] = spec.conductance(x) * dH * dH;
    }

    Configuration eta = traj.states.front();
    const double pair0 = pair_with(eta, H_grid);
    double S = 0.0;
    for (std::int64_t x = 1; x <= n; ++x) S += G[x - 1] * eta.occ(x);
    auto disc = [&](std::int64_t bond) {
        bond = spec.wrap_site(bond);
        return eta.occ(bond) != eta.occ(bond % n + 1) ? 1.0 : 0.0;
    };
    double Q = 0.0;
    for (std::int64_t x = 1; x <= n; ++x) Q += qw[x - 1] * disc(x);

    MartingaleSeries out;
    out.times = traj.times;
    out.martingale.resize(static_cast<Eigen::Index>(traj.times.size()));
    out.quadratic.resize(static_cast<Eigen::Index>(traj.times.size()));
    double acc_comp = 0.0;
    double acc_qv = 0.0;
    double t = 0.0;
    std::size_t ev_idx = 0;
    for (std::size_t r = 0; r < traj.times.size(); ++r) {
        const double target = traj.times[r];
        while (ev_idx < traj.events.size() && traj.events[ev_idx].time <= target) {
            const EventRecord& ev = traj.events[ev_idx];
            acc_comp += S * (ev.time - t);
            acc_qv += Q * (ev.time - t);
            t = ev.time;
            const std::int64_t x = ev.bond;
            const std::int64_t y = x % n + 1;
            S += (G[x - 1] - G[y - 1]) * (eta.occ(y) - eta.occ(x));
            Q -= qw[spec.wrap_site(x - 1) - 1] * disc(x - 1) + qw[spec.wrap_site(x + 1) - 1] * disc(x + 1);
            exchange_in_place(eta, x);
            Q += qw[spec.wrap_site(x - 1) - 1] * disc(x - 1) + qw[spec.wrap_site(x + 1) - 1] * disc(x + 1);
            ++ev_idx;
        }
        acc_comp += S * (target - t);
        acc_qv += Q * (target - t);
        t = target;
        const double pair_t = pair_with(traj.states[r], H_grid);
        out.martingale[static_cast<Eigen::Index>(r)] = pair_t - pair0 - acc_comp;
        out.quadratic[static_cast<Eigen::Index>(r)] = acc_qv;
    }
    return out;
}

namespace {

EstimatorStat reduce_stat(const std::vector<double>& samples) {
    EstimatorStat st;
    st.replicas = static_cast<int>(samples.size());
    if (samples.empty()) return st;
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) /
                        static_cast<double>(samples.size());
    double ss = 0.0;
    for (double v : samples) ss += (v - mean) * (v - mean);
    st.mean = mean;
    if (samples.size() > 1) {
        const double var = ss / static_cast<double>(samples.size() - 1);
        st.std_error = std::sqrt(var / static_cast<double>(samples.size()));
    }
    return st;
}

Eigen::VectorXd replacement_coeff(const LatticeSpec& spec, std::int64_t x, double eps) {
    const std::int64_t n = spec.size();
    const std::int64_t w = box_width(eps, n);
    if (w < 1) fail("eps*N below one site");
    Eigen::VectorXd coeff = Eigen::VectorXd::Zero(n);
    coeff[x - 1] += 1.0;
    const std::int64_t start = box_window_start(spec, x, w, spec.beta() >= 1.0);
    for (std::int64_t j = 0; j < w; ++j) {
        coeff[spec.wrap_site(start + j) - 1] -= 1.0 / static_cast<double>(w);
    }
    return coeff;
}

}  // namespace

double replacement_integral(const SnapshotSeries& traj, std::int64_t x, double eps) {
    const Eigen::VectorXd coeff = replacement_coeff(traj.spec, x, eps);
    return std::fabs(integrate_linear(traj, coeff, traj.times.back()));
}

EstimatorStat replacement_estimator(std::span<const SnapshotSeries> ensemble, std::int64_t x,
                                    double eps) {
    std::vector<double> samples;
    samples.reserve(ensemble.size());
    for (const SnapshotSeries& traj : ensemble) samples.push_back(replacement_integral(traj, x, eps));
    return reduce_stat(samples);
}

EstimatorStat replacement_estimator(const LatticeSpec& spec, const InitialProfile& profile,
                                    double T, std::int64_t x, double eps, int replicas,
                                    std::uint64_t seed) {
    const std::vector<double> record = {0.0, T};
    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>(replicas));
    for (int r = 0; r < replicas; ++r) {
        PhiloxStream rng(seed, static_cast<std::uint64_t>(r));
        Configuration init = sample_initial(profile, spec, rng);
        const SnapshotSeries traj = simulate(spec, std::move(init), record, rng, {.log_events = true});
        samples.push_back(replacement_integral(traj, x, eps));
    }
    return reduce_stat(samples);
}

double energy_functional_vn(const Configuration& eta, const LatticeSpec& spec,
                            const std::function<double(double)>& H, double eps) {
    const std::int64_t n = spec.size();
    if (eta.size() != n) fail("configuration size does not match lattice");
    const std::int64_t w = box_width(eps, n);
    if (w < 1) fail("eps*N below one site");
    Eigen::VectorXd Hg(n);
    for (std::int64_t x = 1; x <= n; ++x) {
        const double u = static_cast<double>(x) / static_cast<double>(n);
        Hg[x - 1] = H(u);
        for (const SlowPoint& p : spec.slow_points()) {
            if (cyclic_dist(u, p.value()) <= eps && Hg[x - 1] != 0.0) {
                fail("test function must vanish on an eps-neighbourhood of every slow point");
            }
        }
    }
    double first = 0.0;
    double second = 0.0;
    for (std::int64_t x = 1; x <= n; ++x) {
        const std::int64_t xe = spec.wrap_site(x + w);
        first += Hg[x - 1] * (eta.occ(x) - eta.occ(xe));
        second += Hg[x - 1] * Hg[x - 1];
    }
    return first / static_cast<double>(w) - 2.0 * second / static_cast<double>(n);
}

EstimatorStat vn_time_average(const LatticeSpec& spec, const InitialProfile& profile,
                              const std::function<double(double)>& H, double eps, double T,
                              int replicas, std::uint64_t seed) {
    const std::int64_t n = spec.size();
    const std::int64_t w = box_width(eps, n);
    if (w < 1) fail("eps*N below one site");
    // Validate the support condition once via the single-configuration path.
    energy_functional_vn(Configuration(n), spec, H, eps);
    Eigen::VectorXd Hg(n);
    for (std::int64_t x = 1; x <= n; ++x) Hg[x - 1] = H(static_cast<double>(x) / static_cast<double>(n));
    // V_N is linear in eta: sum_x (H_x - H_{x-w}) eta(x) / w minus a constant.
    Eigen::VectorXd coeff(n);
    double hsq = 0.0;
    for (std::int64_t x = 1; x <= n; ++x) {
        coeff[x - 1] = (Hg[x - 1] - Hg[spec.wrap_site(x - w) - 1]) / static_cast<double>(w);
        hsq += Hg[x - 1] * Hg[x - 1];
    }
    const double constant = -2.0 * hsq / static_cast<double>(n);
    const std::vector<double> record = {0.0, T};
    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>(replicas));
    for (int r = 0; r < replicas; ++r) {
        PhiloxStream rng(seed, static_cast<std::uint64_t>(r));
        Configuration init = sample_initial(profile, spec, rng);
        const SnapshotSeries traj = simulate(spec, std::move(init), record, rng, {.log_events = true});
        samples.push_back(integrate_linear(traj, coeff, T) / T + constant);
    }
    return reduce_stat(samples);
}

double k0_bound(double alpha) {
    if (!(alpha > 0.0) || !(alpha < 1.0)) fail("alpha must lie in (0,1)");
    return -std::log(std::min(alpha, 1.0 - alpha));
}

MartingaleEnsembleStat martingale_ensemble(const LatticeSpec& spec, const InitialProfile& profile,
                                           const Eigen::Ref<const Eigen::VectorXd>& H_grid,
                                           double deriv_sup, double T, int replicas,
                                           std::uint64_t seed) {
    const std::vector<double> record = {0.0, T};
    std::vector<double> finals;
    double qv_acc = 0.0;
    finals.reserve(static_cast<std::size_t>(replicas));
    for (int r = 0; r < replicas; ++r) {
        PhiloxStream rng(seed, static_cast<std::uint64_t>(r));
        Configuration init = sample_initial(profile, spec, rng);
        const SnapshotSeries traj = simulate(spec, std::move(init), record, rng, {.log_events = true});
        const MartingaleSeries ms = dynkin_martingale(traj, H_grid);
        finals.push_back(ms.martingale[ms.martingale.size() - 1]);
        qv_acc += ms.quadratic[ms.quadratic.size() - 1];
    }
    const EstimatorStat base = reduce_stat(finals);
    MartingaleEnsembleStat st;
    st.replicas = base.replicas;
    st.mean = base.mean;
    st.mean_se = base.std_error;
    double ss = 0.0;
    for (double v : finals) ss += (v - base.mean) * (v - base.mean);
    if (replicas > 1) {
        st.variance = ss / static_cast<double>(replicas - 1);
        // Normal-theory spread of a sample variance.
        st.variance_se = st.variance * std::sqrt(2.0 / static_cast<double>(replicas - 1));
    }
    st.qv_mean = qv_acc / static_cast<double>(replicas);
    st.bound = T / static_cast<double>(spec.size()) * deriv_sup * deriv_sup;
    return st;
}

namespace {

double trapezoid_time(const std::vector<double>& times, const std::vector<double>& vals,
                      std::size_t upto) {
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 <= upto; ++j) {
        acc += 0.5 * (vals[j] + vals[j + 1]) * (times[j + 1] - times[j]);
    }
    return acc;
}

std::size_t row_of_time(const PdeSolution& sol, double t) {
    for (std::size_t r = 0; r < sol.times.size(); ++r) {
        if (std::fabs(sol.times[r] - t) <= 1e-12) return r;
    }
    fail("t is not a recorded time of the solution");
}

}  // namespace

double weak_form_residual(const PdeSolution& sol, const TestFunction& H, double t) {
    const std::size_t upto = row_of_time(sol, t);
    const double m = static_cast<double>(sol.m);

    if (sol.regime == Regime::heat || sol.regime == Regime::w) {
        const bool want_w = sol.regime == Regime::w;
        if (want_w != (H.cls == FunctionClass::w_domain) ||
            (!want_w && H.cls != FunctionClass::smooth_torus)) {
            fail("test-function class does not match the solution regime");
        }
        Eigen::VectorXd Hv(sol.m), H2(sol.m);
        for (std::int64_t j = 0; j < sol.m; ++j) {
            Hv[j] = H.value(sol.nodes[j]);
            H2[j] = H.second(sol.nodes[j]);
        }
        std::vector<double> inner(upto + 1);
        for (std::size_t r = 0; r <= upto; ++r) {
            inner[r] = sol.values.row(static_cast<Eigen::Index>(r)).dot(H2) / m;
        }
        const double p_t = sol.values.row(static_cast<Eigen::Index>(upto)).dot(Hv) / m;
        const double p_0 = sol.values.row(0).dot(Hv) / m;
        return std::fabs(p_t - p_0 - trapezoid_time(sol.times, inner, upto));
    }

    // Segmented regime: integral identity on one arc with boundary terms.
    if (H.cls != FunctionClass::segment) fail("test-function class does not match the solution regime");
    const auto& slow = sol.slow_points;
    std::size_t seg = slow.size();
    for (std::size_t i = 0; i < slow.size(); ++i) {
        const double a = slow[i].value();
        const double b = i + 1 < slow.size() ? slow[i + 1].value() : slow[0].value() + 1.0;
        if (std::fabs(a - H.seg_a) <= 1e-12 && std::fabs(b - H.seg_b) <= 1e-12) {
            seg = i;
            break;
        }
    }
    if (seg == slow.size()) fail("segment test function does not match any arc between slow points");

    // Cells of this arc: centers within (seg_a, seg_b) modulo 1.
    std::vector<Eigen::Index> cells;
    for (std::int64_t j = 0; j < sol.m; ++j) {
        double u = sol.nodes[j];
        double d = u - H.seg_a;
        if (d < 0.0) d += 1.0;
        if (d > 0.0 && d < H.seg_b - H.seg_a) cells.push_back(static_cast<Eigen::Index>(j));
    }
    const Eigen::MatrixXd tl = trace_left(sol);
    const Eigen::MatrixXd tr = trace_right(sol);
    const std::size_t seg_right_end = (seg + 1) % slow.size();

    auto space_pair = [&](std::size_t r, auto&& fn) {
        double acc = 0.0;
        for (Eigen::Index j : cells) {
            double u = sol.nodes[j];
            double d = u - H.seg_a;
            if (d < 0.0) d += 1.0;
            acc += sol.values(static_cast<Eigen::Index>(r), j) * fn(sol.times[r], H.seg_a + d);
        }
        return acc / m;
    };

    std::vector<double> bulk(upto + 1), bleft(upto + 1), bright(upto + 1);
    for (std::size_t r = 0; r <= upto; ++r) {
        bulk[r] = space_pair(r, [&](double s, double u) { return H.tsecond_u(s, u) + H.tderiv_s(s, u); });
        const double s = sol.times[r];
        bright[r] = H.tderiv_u(s, H.seg_b) * tl(static_cast<Eigen::Index>(r),
                                               static_cast<Eigen::Index>(seg_right_end));
        bleft[r] = H.tderiv_u(s, H.seg_a) * tr(static_cast<Eigen::Index>(r),
                                               static_cast<Eigen::Index>(seg));
    }
    const double p_t = space_pair(upto, [&](double, double u) { return H.tvalue(t, u); });
    const double p_0 = space_pair(0, [&](double, double u) { return H.tvalue(0.0, u); });
    const double residual = p_t - p_0 - trapezoid_time(sol.times, bulk, upto) +
                            trapezoid_time(sol.times, bright, upto) -
                            trapezoid_time(sol.times, bleft, upto);
    return std::fabs(residual);
}

}  // namespace slowbond
