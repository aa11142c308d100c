#pragma once

#include "slowbond/lattice.hpp"
#include "slowbond/rng.hpp"

#include <Eigen/Core>

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace slowbond {

// Initial density profile u -> [0,1] on the unit circle.
struct InitialProfile {
    std::string name;
    std::function<double(double)> density;

    double operator()(double u) const;

    static InitialProfile constant(double c);
    static InitialProfile cosine(double mean, double amplitude, int frequency = 1,
                                 double phase = 0.0);
    // Piecewise constant: values[i] on [edges[i], edges[i+1]), wrapping at 1.
    static InitialProfile step(std::vector<double> edges, std::vector<double> values);
    // Piecewise linear periodic interpolation through (us[i], vals[i]).
    static InitialProfile table(std::vector<double> us, std::vector<double> vals);
};

// Product Bernoulli sample: site x occupied with probability profile(x/N).
Configuration sample_initial(const InitialProfile& profile, const LatticeSpec& spec,
                             PhiloxStream& rng);

// Binary segment tree over nonnegative bond weights; sampling and updates
// are O(log n) and parent sums are recomputed exactly on every update so no
// floating-point drift accumulates over long runs.
class RateTree {
public:
    explicit RateTree(const std::vector<double>& weights);
    void set(std::size_t i, double w);
    double weight(std::size_t i) const { return tree_[base_ + i]; }
    double total() const { return tree_[1]; }
    // u in (0,1]; returns a leaf with positive weight (total() must be > 0).
    std::size_t sample(double u) const;

private:
    std::size_t n_ = 0;
    std::size_t base_ = 1;
    std::vector<double> tree_;
};

struct EventRecord {
    double time;        // macroscopic time of the exchange
    std::int32_t bond;  // bond index in {1..N}
};

struct SimOptions {
    bool log_events = false;
};

// Piecewise-constant trajectory recorded at the requested times (the state
// at time t is the state after the last event with event time <= t).
struct SnapshotSeries {
    LatticeSpec spec;
    std::vector<double> times;
    std::vector<Configuration> states;
    std::vector<EventRecord> events;
    bool has_events = false;

    std::int64_t lattice_size() const { return spec.size(); }
};

// Rejection-free kinetic Monte Carlo run of the speeded-up exclusion process
// (bond (x,x+1) exchanges at rate N^2 xi_x; only discrepancy bonds can fire).
// record_times must be sorted, start at 0, and defines the horizon by its
// last entry.
SnapshotSeries simulate(const LatticeSpec& spec, Configuration initial,
                        std::span<const double> record_times, PhiloxStream& rng,
                        const SimOptions& options = {});

// Ensemble average occupation, one row per record time, one column per site.
Eigen::MatrixXd mean_occupation(std::span<const SnapshotSeries> ensemble);

// Run-length encoding "v:count,v:count,..." of the occupancies from site 1.
std::string encode_rle(const Configuration& eta);

}  // namespace slowbond
