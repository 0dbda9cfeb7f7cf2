#pragma once

#include <utility>

#include "lif/types.hpp"

namespace lif {

/// Transition density of dX = -X dt + sqrt(2) dB: the N(e^{-t} y0, 1 - e^{-2t})
/// density evaluated at x. Requires t > 0.
double ou_transition_density(double x, double t, double y0);

/// Sup-norm cap 1 / sqrt(2 pi (1 - e^{-2t})) for the no-jump sub-density.
/// Requires t > 0.
double ou_density_bound(double t);

/// Heat kernel Gamma(y, s; xi, tau) = (4 pi (s-tau))^{-1/2}
/// exp(-(y-xi)^2 / (4(s-tau))). Requires s > tau.
double heat_kernel(double y, double s, double xi, double tau);

/// d/dy of heat_kernel at a general point. Requires s > tau.
double heat_kernel_dy(double y, double s, double xi, double tau);

/// d/dy of the heat kernel on the moving-boundary pair
/// (y, xi) = (b(s), b(tau)) with b(s) = sqrt(2s+1), computed through the
/// algebraic simplification (b(s)-b(tau)) / (2(s-tau)) = 1 / (b(s)+b(tau)):
///   -(4 pi (s-tau))^{-1/2} exp(-(s-tau)/(b(s)+b(tau))^2) / (b(s)+b(tau)).
/// This form stays finite as tau -> s^- apart from the integrable 1/sqrt
/// factor, avoiding the 0/0 of the naive expression. Requires s > tau >= 0.
double heat_kernel_dy_boundary(double s, double tau);

/// Frame map y = e^t x, s = (e^{2t}-1)/2, b = e^t. Requires t >= 0.
MovingFrame to_moving_frame(double x, double t);

/// Inverse frame map; returns (x, t). Requires s >= 0.
std::pair<double, double> from_moving_frame(double y, double s);

/// s(t) = (e^{2t}-1)/2.
double frame_time(double t);

/// b(s) = sqrt(2s+1).
double frame_boundary(double s);

}  // namespace lif
