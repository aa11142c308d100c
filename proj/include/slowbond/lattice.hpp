#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace slowbond {

// Macroscopic point on the unit circle given as an exact decimal, kept as a
// reduced fraction num/den so bond membership can be decided with integer
// arithmetic instead of floating-point comparisons.
struct SlowPoint {
    std::int64_t num = 0;
    std::int64_t den = 1;
    std::string text;

    static SlowPoint parse(std::string_view s);
    static SlowPoint from_fraction(std::int64_t num, std::int64_t den);

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }

    // Left vertex of the slow bond at lattice size n, in {1..n}.  The slow
    // bond is the unique (x, x+1) with num/den in (x/n, (x+1)/n]; when the
    // point sits exactly on a vertex this picks the bond to its left.
    std::int64_t left_vertex(std::int64_t n) const;
};

// Cyclic lattice {1..n} with k slow bonds of conductance n^(-beta).
class LatticeSpec {
public:
    LatticeSpec(std::int64_t n, double beta, std::vector<SlowPoint> slow_points);

    std::int64_t size() const { return n_; }
    double beta() const { return beta_; }
    double slow_weight() const { return slow_weight_; }
    const std::vector<SlowPoint>& slow_points() const { return slow_points_; }
    // Left vertices of the slow bonds, sorted, each in {1..n}.
    const std::vector<std::int64_t>& slow_left_vertices() const { return left_vertices_; }
    // Smallest cyclic gap between two slow points (1.0 when k == 1).
    double min_gap() const { return min_gap_; }

    bool is_slow_bond(std::int64_t x) const;
    // Conductance of bond (x, x+1), x in {1..n}, site n+1 wrapping to 1.
    double conductance(std::int64_t x) const;

    std::int64_t wrap_site(std::int64_t x) const {
        return (x - 1) % n_ + ((x - 1) % n_ < 0 ? n_ : 0) + 1;
    }

private:
    std::int64_t n_;
    double beta_;
    double slow_weight_;
    double min_gap_;
    std::vector<SlowPoint> slow_points_;
    std::vector<std::int64_t> left_vertices_;
};

// Exclusion configuration: one byte per site, sites addressed 1..n.
class Configuration {
public:
    Configuration() = default;
    explicit Configuration(std::int64_t n) : occ_(static_cast<std::size_t>(n), 0) {}
    Configuration(std::initializer_list<int> bits);

    std::int64_t size() const { return static_cast<std::int64_t>(occ_.size()); }
    int occ(std::int64_t x) const { return occ_[static_cast<std::size_t>(x - 1)]; }
    void set(std::int64_t x, int v) { occ_[static_cast<std::size_t>(x - 1)] = static_cast<std::uint8_t>(v); }
    std::int64_t particles() const;
    const std::vector<std::uint8_t>& raw() const { return occ_; }

    bool operator==(const Configuration&) const = default;

private:
    std::vector<std::uint8_t> occ_;
};

// Swap occupancies of sites x and x+1 (cyclic); involution.
void exchange_in_place(Configuration& eta, std::int64_t x);
Configuration exchange(const Configuration& eta, std::int64_t x);

// (L_N H)(x/N) = xi_{x,x+1} (H_{x+1} - H_x) + xi_{x-1,x} (H_{x-1} - H_x).
// H holds grid values H((x)/N) for x = 1..N; no N^2 speedup factor here.
Eigen::VectorXd discrete_operator_apply(const LatticeSpec& spec,
                                        const Eigen::Ref<const Eigen::VectorXd>& H);

// Dense matrix of N^2 L_N acting on grid vectors (macroscopic time units).
Eigen::MatrixXd generator_matrix(const LatticeSpec& spec);

}  // namespace slowbond
