#pragma once

#include "slowbond/lattice.hpp"

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace slowbond {

// <pi^N, H> = (1/N) sum_x H(x/N) eta(x).
double pair_with(const Configuration& eta, const Eigen::Ref<const Eigen::VectorXd>& H_grid);
double pair_with(const Configuration& eta, const std::function<double(double)>& H);

// Window width in sites for a box average or mollifier at scale eps.  A tiny
// nudge recovers the intended integer when eps*N is an exact decimal whose
// double representation falls a few ulps short.
std::int64_t box_width(double eps, std::int64_t n);

// Sites averaged by the box average at x: {x+1..x+w}, except in the
// slow-avoiding regime where a window touching a slow bond is replaced by
// the w sites ending at its left vertex.  Returns the first site; the
// window is the w consecutive sites from there (cyclic).
std::int64_t box_window_start(const LatticeSpec& spec, std::int64_t x, std::int64_t w,
                              bool avoid_slow);

// Box average of Definition-style windows; slow-avoiding iff beta >= 1.
double box_average(const Configuration& eta, const LatticeSpec& spec, std::int64_t x,
                   double eps);

// Mollified grid density evaluated at site positions x/N for x = 1..N.
// Windows are identical to box_average ones, so on occupancy data this
// reproduces the box averages exactly.
Eigen::VectorXd mollify_lattice(const Eigen::Ref<const Eigen::VectorXd>& values,
                                const LatticeSpec& spec, double eps);
double mollify_at_site(const Eigen::Ref<const Eigen::VectorXd>& values,
                       const LatticeSpec& spec, std::int64_t x, double eps);

// Continuum mollifier (1/eps) * integral of the density over (v, v+eps],
// or over (b-eps, b) when v lies in that strip left of a slow point.
double mollify_point(const std::function<double(double)>& density, double eps,
                     const std::vector<double>& slow_values, double v, int quad_n = 4096);

}  // namespace slowbond
