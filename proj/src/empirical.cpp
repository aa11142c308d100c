#include "slowbond/empirical.hpp"

#include <cmath>
#include <stdexcept>

namespace slowbond {

double pair_with(const Configuration& eta, const Eigen::Ref<const Eigen::VectorXd>& H_grid) {
    const std::int64_t n = eta.size();
    if (H_grid.size() != n) throw std::invalid_argument("grid vector length must equal lattice size");
    double acc = 0.0;
    for (std::int64_t x = 1; x <= n; ++x) acc += H_grid[x - 1] * eta.occ(x);
    return acc / static_cast<double>(n);
}

double pair_with(const Configuration& eta, const std::function<double(double)>& H) {
    const std::int64_t n = eta.size();
    double acc = 0.0;
    for (std::int64_t x = 1; x <= n; ++x) {
        if (eta.occ(x)) acc += H(static_cast<double>(x) / static_cast<double>(n));
    }
    return acc / static_cast<double>(n);
}

std::int64_t box_width(double eps, std::int64_t n) {
    return static_cast<std::int64_t>(std::floor(eps * static_cast<double>(n) + 1e-9));
}

namespace {

void check_scale(const LatticeSpec& spec, double eps, std::int64_t w) {
    if (!(eps > 0.0) || eps >= spec.min_gap()) {
        throw std::invalid_argument("eps must satisfy 0 < eps < min cyclic gap of the slow points");
    }
    if (w < 1) throw std::invalid_argument("eps*N below one site");
}

}  // namespace

std::int64_t box_window_start(const LatticeSpec& spec, std::int64_t x, std::int64_t w,
                              bool avoid_slow) {
    const std::int64_t n = spec.size();
    if (avoid_slow) {
        for (std::int64_t v : spec.slow_left_vertices()) {
            // Slow left vertex inside {x, ..., x+w}?
            if ((v - x + n) % n <= w) return spec.wrap_site(v - w + 1);
        }
    }
    return spec.wrap_site(x + 1);
}

double box_average(const Configuration& eta, const LatticeSpec& spec, std::int64_t x,
                   double eps) {
    const std::int64_t n = spec.size();
    if (eta.size() != n) throw std::invalid_argument("configuration size does not match lattice");
    if (x < 1 || x > n) throw std::invalid_argument("site index out of range");
    const std::int64_t w = box_width(eps, n);
    check_scale(spec, eps, w);
    const std::int64_t start = box_window_start(spec, x, w, spec.beta() >= 1.0);
    std::int64_t count = 0;
    for (std::int64_t j = 0; j < w; ++j) count += eta.occ(spec.wrap_site(start + j));
    return static_cast<double>(count) / static_cast<double>(w);
}

double mollify_at_site(const Eigen::Ref<const Eigen::VectorXd>& values,
                       const LatticeSpec& spec, std::int64_t x, double eps) {
    const std::int64_t n = spec.size();
    if (values.size() != n) throw std::invalid_argument("grid vector length must equal lattice size");
    const std::int64_t w = box_width(eps, n);
    check_scale(spec, eps, w);
    const std::int64_t start = box_window_start(spec, x, w, spec.beta() >= 1.0);
    double acc = 0.0;
    for (std::int64_t j = 0; j < w; ++j) acc += values[spec.wrap_site(start + j) - 1];
    return acc / static_cast<double>(w);
}

Eigen::VectorXd mollify_lattice(const Eigen::Ref<const Eigen::VectorXd>& values,
                                const LatticeSpec& spec, double eps) {
    const std::int64_t n = spec.size();
    Eigen::VectorXd out(n);
    for (std::int64_t x = 1; x <= n; ++x) out[x - 1] = mollify_at_site(values, spec, x, eps);
    return out;
}

double mollify_point(const std::function<double(double)>& density, double eps,
                     const std::vector<double>& slow_values, double v, int quad_n) {
    if (!(eps > 0.0) || eps >= 1.0) throw std::invalid_argument("eps must lie in (0,1)");
    v -= std::floor(v);
    double lo = v;
    for (double b : slow_values) {
        // Cyclic membership of v in (b-eps, b).
        const double d = b - v - std::floor(b - v);
        if (d > 0.0 && d < eps) {
            lo = b - eps;
            break;
        }
    }
    double acc = 0.0;
    for (int i = 0; i < quad_n; ++i) {
        const double u = lo + eps * (i + 0.5) / quad_n;
        acc += density(u - std::floor(u));
    }
    return acc / quad_n;
}

}  // namespace slowbond
