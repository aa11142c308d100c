#include "slowbond/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace slowbond {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

SlowPoint SlowPoint::parse(std::string_view s) {
    std::size_t pos = 0;
    std::int64_t ipart = 0;
    bool any_digit = false;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
        ipart = ipart * 10 + (s[pos] - '0');
        ++pos;
        any_digit = true;
    }
    std::int64_t num = ipart;
    std::int64_t den = 1;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
            if (den > 100'000'000'000'000'000LL) fail("slow point has too many decimal digits: " + std::string(s));
            num = num * 10 + (s[pos] - '0');
            den *= 10;
            ++pos;
            any_digit = true;
        }
    }
    if (!any_digit || pos != s.size()) fail("slow point is not a decimal in [0,1): " + std::string(s));
    if (num >= den) fail("slow point must lie in [0,1): " + std::string(s));
    SlowPoint p = from_fraction(num, den);
    p.text = std::string(s);
    return p;
}

SlowPoint SlowPoint::from_fraction(std::int64_t num, std::int64_t den) {
    if (den <= 0 || num < 0 || num >= den) fail("slow point fraction outside [0,1)");
    const std::int64_t g = std::gcd(num, den);
    SlowPoint p;
    p.num = num / g;
    p.den = den / g;
    p.text = std::to_string(p.num) + "/" + std::to_string(p.den);
    return p;
}

std::int64_t SlowPoint::left_vertex(std::int64_t n) const {
    if (n < 2) fail("lattice size must be at least 2");
    const __int128 scaled = static_cast<__int128>(n) * num;
    std::int64_t left;
    if (scaled % den == 0) {
        // Point on a vertex: take the bond to its left, (m-1, m).
        const std::int64_t m = static_cast<std::int64_t>(scaled / den);
        left = m - 1;
    } else {
        left = static_cast<std::int64_t>(scaled / den);  // floor, operands nonnegative
    }
    // Map from {-1, 0, .., n-1} onto site labels {1..n}.
    return (left - 1 + 2 * n) % n + 1;
}

LatticeSpec::LatticeSpec(std::int64_t n, double beta, std::vector<SlowPoint> slow_points)
    : n_(n), beta_(beta), slow_points_(std::move(slow_points)) {
    if (n_ < 2) fail("lattice size must be at least 2");
    if (!(beta_ >= 0.0) || !std::isfinite(beta_)) fail("beta must be a finite real >= 0");
    const std::int64_t k = static_cast<std::int64_t>(slow_points_.size());
    if (k < 1) fail("at least one slow point is required");
    if (k > 1 && 4 * k > n_) fail("too many slow bonds: need 4k <= N");

    std::sort(slow_points_.begin(), slow_points_.end(),
              [](const SlowPoint& a, const SlowPoint& b) {
                  return static_cast<__int128>(a.num) * b.den < static_cast<__int128>(b.num) * a.den;
              });
    left_vertices_.reserve(slow_points_.size());
    for (const SlowPoint& p : slow_points_) left_vertices_.push_back(p.left_vertex(n_));
    std::vector<std::int64_t> sorted = left_vertices_;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        if (sorted[i] == sorted[i + 1]) fail("two slow points land on the same bond");
    }
    // Slow bonds must be separated by at least one normal bond on the cycle.
    if (sorted.size() > 1) {
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            const std::int64_t a = sorted[i];
            const std::int64_t b = sorted[(i + 1) % sorted.size()];
            const std::int64_t gap = (b - a + n_) % n_;
            if (gap < 2) fail("slow bonds must be separated by at least one normal bond");
        }
    }
    min_gap_ = 1.0;
    if (slow_points_.size() > 1) {
        min_gap_ = 2.0;
        for (std::size_t i = 0; i < slow_points_.size(); ++i) {
            const double a = slow_points_[i].value();
            const double b = slow_points_[(i + 1) % slow_points_.size()].value();
            const double gap = i + 1 < slow_points_.size() ? b - a : b + 1.0 - a;
            min_gap_ = std::min(min_gap_, gap);
        }
    }
    slow_weight_ = std::pow(static_cast<double>(n_), -beta_);
}

bool LatticeSpec::is_slow_bond(std::int64_t x) const {
    return std::find(left_vertices_.begin(), left_vertices_.end(), x) != left_vertices_.end();
}

double LatticeSpec::conductance(std::int64_t x) const {
    if (x < 1 || x > n_) fail("bond index out of range");
    return is_slow_bond(x) ? slow_weight_ : 1.0;
}

Configuration::Configuration(std::initializer_list<int> bits) {
    occ_.reserve(bits.size());
    for (int b : bits) {
        if (b != 0 && b != 1) throw std::invalid_argument("occupancies must be 0 or 1");
        occ_.push_back(static_cast<std::uint8_t>(b));
    }
}

std::int64_t Configuration::particles() const {
    return std::accumulate(occ_.begin(), occ_.end(), std::int64_t{0});
}

void exchange_in_place(Configuration& eta, std::int64_t x) {
    const std::int64_t n = eta.size();
    if (x < 1 || x > n) throw std::invalid_argument("bond index out of range");
    const std::int64_t y = x % n + 1;
    const int a = eta.occ(x);
    eta.set(x, eta.occ(y));
    eta.set(y, a);
}

Configuration exchange(const Configuration& eta, std::int64_t x) {
    Configuration out = eta;
    exchange_in_place(out, x);
    return out;
}

Eigen::VectorXd discrete_operator_apply(const LatticeSpec& spec,
                                        const Eigen::Ref<const Eigen::VectorXd>& H) {
    const std::int64_t n = spec.size();
    if (H.size() != n) throw std::invalid_argument("grid vector length must equal lattice size");
    Eigen::VectorXd xi = Eigen::VectorXd::Ones(n);
    for (std::int64_t v : spec.slow_left_vertices()) xi[v - 1] = spec.slow_weight();
    Eigen::VectorXd out(n);
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t ip = (i + 1) % n;
        const std::int64_t im = (i + n - 1) % n;
        out[i] = xi[i] * (H[ip] - H[i]) + xi[im] * (H[im] - H[i]);
    }
    return out;
}

Eigen::MatrixXd generator_matrix(const LatticeSpec& spec) {
    const std::int64_t n = spec.size();
    const double scale = static_cast<double>(n) * static_cast<double>(n);
    Eigen::VectorXd xi = Eigen::VectorXd::Ones(n);
    for (std::int64_t v : spec.slow_left_vertices()) xi[v - 1] = spec.slow_weight();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t ip = (i + 1) % n;
        const std::int64_t im = (i + n - 1) % n;
        A(i, ip) += scale * xi[i];
        A(i, im) += scale * xi[im];
        A(i, i) -= scale * (xi[i] + xi[im]);
    }
    return A;
}

}  // namespace slowbond
