#include "slowbond/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace slowbond {

double InitialProfile::operator()(double u) const {
    const double v = density(u);
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw std::invalid_argument("initial profile value outside [0,1] at u=" + std::to_string(u));
    }
    return v;
}

InitialProfile InitialProfile::constant(double c) {
    return {"constant", [c](double) { return c; }};
}

InitialProfile InitialProfile::cosine(double mean, double amplitude, int frequency, double phase) {
    return {"cosine", [=](double u) {
                return mean + amplitude * std::cos(2.0 * M_PI * frequency * (u - phase));
            }};
}

InitialProfile InitialProfile::step(std::vector<double> edges, std::vector<double> values) {
    if (edges.size() != values.size() || edges.empty()) {
        throw std::invalid_argument("step profile needs one value per edge");
    }
    if (!std::is_sorted(edges.begin(), edges.end()) || edges.front() < 0.0 || edges.back() >= 1.0) {
        throw std::invalid_argument("step profile edges must be sorted inside [0,1)");
    }
    return {"step", [edges = std::move(edges), values = std::move(values)](double u) {
                u -= std::floor(u);
                auto it = std::upper_bound(edges.begin(), edges.end(), u);
                // Before the first edge we are in the wrapping interval.
                const std::size_t i = it == edges.begin() ? edges.size() - 1
                                                          : static_cast<std::size_t>(it - edges.begin()) - 1;
                return values[i];
            }};
}

InitialProfile InitialProfile::table(std::vector<double> us, std::vector<double> vals) {
    if (us.size() != vals.size() || us.size() < 2) {
        throw std::invalid_argument("table profile needs at least two points");
    }
    if (!std::is_sorted(us.begin(), us.end()) || us.front() < 0.0 || us.back() >= 1.0) {
        throw std::invalid_argument("table profile abscissae must be sorted inside [0,1)");
    }
    return {"table", [us = std::move(us), vals = std::move(vals)](double u) {
                u -= std::floor(u);
                auto it = std::upper_bound(us.begin(), us.end(), u);
                if (it == us.begin() || it == us.end()) {
                    // Wrapping segment from (us.back(), vals.back()) to (us.front()+1, vals.front()).
                    const double a = us.back();
                    const double span = us.front() + 1.0 - a;
                    const double s = (u >= a ? u - a : u + 1.0 - a) / span;
                    return vals.back() + s * (vals.front() - vals.back());
                }
                const std::size_t i = static_cast<std::size_t>(it - us.begin()) - 1;
                const double s = (u - us[i]) / (us[i + 1] - us[i]);
                return vals[i] + s * (vals[i + 1] - vals[i]);
            }};
}

Configuration sample_initial(const InitialProfile& profile, const LatticeSpec& spec,
                             PhiloxStream& rng) {
    const std::int64_t n = spec.size();
    Configuration eta(n);
    for (std::int64_t x = 1; x <= n; ++x) {
        const double p = profile(static_cast<double>(x) / static_cast<double>(n));
        eta.set(x, rng.next_u01() <= p ? 1 : 0);
    }
    return eta;
}

RateTree::RateTree(const std::vector<double>& weights) : n_(weights.size()) {
    base_ = 1;
    while (base_ < n_) base_ <<= 1;
    tree_.assign(2 * base_, 0.0);
    std::copy(weights.begin(), weights.end(), tree_.begin() + static_cast<std::ptrdiff_t>(base_));
    for (std::size_t i = base_ - 1; i >= 1; --i) tree_[i] = tree_[2 * i] + tree_[2 * i + 1];
}

void RateTree::set(std::size_t i, double w) {
    std::size_t node = base_ + i;
    tree_[node] = w;
    for (node >>= 1; node >= 1; node >>= 1) tree_[node] = tree_[2 * node] + tree_[2 * node + 1];
}

std::size_t RateTree::sample(double u) const {
    double target = u * tree_[1];
    std::size_t node = 1;
    while (node < base_) {
        const std::size_t left = 2 * node;
        if (target <= tree_[left]) {
            node = left;
        } else {
            target -= tree_[left];
            node = left + 1;
        }
    }
    std::size_t leaf = node - base_;
    // Rounding in the partial sums can land on an empty leaf; step to the
    // nearest occupied one.
    if (tree_[node] <= 0.0) {
        std::size_t fwd = leaf;
        while (fwd + 1 < n_ && tree_[base_ + fwd] <= 0.0) ++fwd;
        if (tree_[base_ + fwd] > 0.0) return fwd;
        while (leaf > 0 && tree_[base_ + leaf] <= 0.0) --leaf;
    }
    return leaf;
}

SnapshotSeries simulate(const LatticeSpec& spec, Configuration eta,
                        std::span<const double> record_times, PhiloxStream& rng,
                        const SimOptions& options) {
    const std::int64_t n = spec.size();
    if (eta.size() != n) throw std::invalid_argument("configuration size does not match lattice");
    if (record_times.empty() || record_times.front() != 0.0 ||
        !std::is_sorted(record_times.begin(), record_times.end())) {
        throw std::invalid_argument("record times must be sorted and start at 0");
    }

    SnapshotSeries series{spec, {}, {}, {}, options.log_events};
    series.times.assign(record_times.begin(), record_times.end());
    series.states.reserve(record_times.size());

    const double n2 = static_cast<double>(n) * static_cast<double>(n);
    std::vector<double> weights(static_cast<std::size_t>(n), 0.0);
    for (std::int64_t x = 1; x <= n; ++x) {
        const std::int64_t y = x % n + 1;
        if (eta.occ(x) != eta.occ(y)) weights[static_cast<std::size_t>(x - 1)] = n2 * spec.conductance(x);
    }
    RateTree tree(weights);

    double t = 0.0;
    std::size_t next_record = 0;
    const auto update_bond = [&](std::int64_t x) {
        x = spec.wrap_site(x);
        const std::int64_t y = x % n + 1;
        const double w = eta.occ(x) != eta.occ(y) ? n2 * spec.conductance(x) : 0.0;
        tree.set(static_cast<std::size_t>(x - 1), w);
    };

    while (next_record < record_times.size()) {
        const double total = tree.total();
        if (total <= 0.0) {
            // Frozen configuration: every remaining snapshot is the current state.
            for (; next_record < record_times.size(); ++next_record) series.states.push_back(eta);
            break;
        }
        const double dt = -std::log(rng.next_u01()) / total;
        const double t_next = t + dt;
        while (next_record < record_times.size() && record_times[next_record] < t_next) {
            series.states.push_back(eta);
            ++next_record;
        }
        if (next_record == record_times.size()) break;
        t = t_next;
        const std::int64_t bond = static_cast<std::int64_t>(tree.sample(rng.next_u01())) + 1;
        if (options.log_events) series.events.push_back({t, static_cast<std::int32_t>(bond)});
        exchange_in_place(eta, bond);
        // The fired bond keeps its discrepancy; only its neighbours change.
        update_bond(bond - 1);
        update_bond(bond + 1);
    }
    return series;
}

Eigen::MatrixXd mean_occupation(std::span<const SnapshotSeries> ensemble) {
    if (ensemble.empty()) throw std::invalid_argument("empty ensemble");
    const std::size_t rows = ensemble.front().times.size();
    const std::int64_t n = ensemble.front().lattice_size();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), n);
    for (const SnapshotSeries& s : ensemble) {
        if (s.times.size() != rows || s.lattice_size() != n) {
            throw std::invalid_argument("ensemble members disagree on grid or record times");
        }
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::int64_t x = 1; x <= n; ++x) {
                acc(static_cast<Eigen::Index>(r), x - 1) += s.states[r].occ(x);
            }
        }
    }
    return acc / static_cast<double>(ensemble.size());
}

std::string encode_rle(const Configuration& eta) {
    std::string out;
    const std::int64_t n = eta.size();
    std::int64_t x = 1;
    while (x <= n) {
        const int v = eta.occ(x);
        std::int64_t run = 1;
        while (x + run <= n && eta.occ(x + run) == v) ++run;
        if (!out.empty()) out += ',';
        out += std::to_string(v) + ":" + std::to_string(run);
        x += run;
    }
    return out;
}

}  // namespace slowbond
