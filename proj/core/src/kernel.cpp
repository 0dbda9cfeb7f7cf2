#include "lif/kernel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lif {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kFourPi = 4.0 * std::numbers::pi;
}  // namespace

double ou_transition_density(double x, double t, double y0) {
    if (!(t > 0.0)) throw std::domain_error("ou_transition_density: t must be > 0");
    double var = -std::expm1(-2.0 * t);  // 1 - e^{-2t}
    double mean = std::exp(-t) * y0;
    double d = x - mean;
    return std::exp(-d * d / (2.0 * var)) / std::sqrt(kTwoPi * var);
}

double ou_density_bound(double t) {
    if (!(t > 0.0)) throw std::domain_error("ou_density_bound: t must be > 0");
    return 1.0 / std::sqrt(kTwoPi * -std::expm1(-2.0 * t));
}

double heat_kernel(double y, double s, double xi, double tau) {
    if (!(s > tau)) throw std::domain_error("heat_kernel: requires s > tau");
    double ds = s - tau;
    double d = y - xi;
    return std::exp(-d * d / (4.0 * ds)) / std::sqrt(kFourPi * ds);
}

double heat_kernel_dy(double y, double s, double xi, double tau) {
    if (!(s > tau)) throw std::domain_error("heat_kernel_dy: requires s > tau");
    double ds = s - tau;
    return -(y - xi) / (2.0 * ds) * heat_kernel(y, s, xi, tau);
}

double heat_kernel_dy_boundary(double s, double tau) {
    if (!(s > tau)) {
        throw std::domain_error("heat_kernel_dy_boundary: requires s > tau");
    }
    if (tau < 0.0) throw std::domain_error("heat_kernel_dy_boundary: tau >= 0");
    double ds = s - tau;
    double bsum = frame_boundary(s) + frame_boundary(tau);
    return -std::exp(-ds / (bsum * bsum)) / (bsum * std::sqrt(kFourPi * ds));
}

MovingFrame to_moving_frame(double x, double t) {
    if (t < 0.0) throw std::domain_error("to_moving_frame: t must be >= 0");
    MovingFrame f;
    f.b = std::exp(t);
    f.y = f.b * x;
    f.s = 0.5 * std::expm1(2.0 * t);
    return f;
}

std::pair<double, double> from_moving_frame(double y, double s) {
    if (s < 0.0) throw std::domain_error("from_moving_frame: s must be >= 0");
    double t = 0.5 * std::log1p(2.0 * s);
    return {y / frame_boundary(s), t};
}

double frame_time(double t) { return 0.5 * std::expm1(2.0 * t); }

double frame_boundary(double s) { return std::sqrt(2.0 * s + 1.0); }

}  // namespace lif
