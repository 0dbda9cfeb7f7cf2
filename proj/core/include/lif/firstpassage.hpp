#pragma once

#include <cstddef>
#include <vector>

#include "lif/types.hpp"

namespace lif::fp {

/// Solution of the moving-boundary Volterra equation for the negative
/// boundary derivative M(s) of the frame solution, sampled at the images
/// s(t_k) of a uniform t-grid.
struct MSolution {
    TimeGrid parent;               ///< uniform t-grid
    std::vector<double> s_nodes;   ///< s(t_k)
    std::vector<double> b_nodes;   ///< b(s(t_k)) = e^{t_k}
    std::vector<double> m;         ///< M(s_k) >= 0
    std::size_t clipped = 0;       ///< count of negative values clipped to 0
    double max_clip = 0.0;         ///< largest clipped magnitude
};

/// Jump-time density ladder f_{T_1}, f_{T_2}, ... on a shared time grid,
/// with sub-probability masses P(T_n <= T).
struct FiringLadder {
    TimeGrid times;
    std::vector<TimeSeries> rungs;  ///< rungs[n-1] = f_{T_n}
    std::vector<double> masses;     ///< masses[n-1] = P(T_n <= T)
    double rho = 0.0;               ///< P(T_1 <= T)
    double dropped_tail_bound = 0.0;
};

/// March the second-kind Volterra equation
///   M(s_k) = 2 J1(s_k) + 2 \int_0^{s_k} Gamma_y(b(s_k), s_k, b(tau), tau) M(tau) dtau
/// with J1(s) = -Gamma_y(b(s), s, 0, 0), using product integration that is
/// exact for (s - tau)^{-1/2} against piecewise-linear M (the smooth kernel
/// factor is frozen at subinterval midpoints) and solving the implicit
/// diagonal weight in closed form. Negative quadrature noise below zero is
/// clipped to 0 and counted; values below -clip_floor additionally raise
/// an error.
MSolution solve_M(const TimeGrid& parent, double clip_floor = 1e-6);

/// f_{T_1}(t_k) = e^{2 t_k} M(s(t_k)) on the parent grid.
TimeSeries fT1_from_M(const MSolution& m);

/// f_{T_1}(t) = -d/dx f0(1^-, t) read from an absorbing-only sub-density
/// field's boundary-flux record. Fields with reinjection are rejected.
TimeSeries fT1_from_flux(const DensityField& f0);

/// Trapezoid convolution (a*b)(t_k) = \int_0^{t_k} a(t_k - s) b(s) ds
/// on a common grid; requires a(0) = b(0) = 0.
TimeSeries renewal_convolve(const TimeSeries& a, const TimeSeries& b);

/// Iterate f_{T_{n+1}} = f_{T_n} * f_{T_1} until sup |f_{T_{n+1}}| * T <= tol
/// or n_cap rungs; errors if P(T_1 <= T) >= 1 - 1e-6.
FiringLadder build_ladder(const TimeSeries& fT1, double tol = 1e-8, int n_cap = 60);

/// Ladder with a different first rung (general initial data): rung 1 is
/// `first`, subsequent rungs convolve with `fT1` (excursions after the
/// first reset restart from 0).
FiringLadder build_ladder_inhomogeneous(const TimeSeries& first,
                                        const TimeSeries& fT1,
                                        double tol = 1e-8, int n_cap = 60);

/// N(t_k) = sum_n f_{T_n}(t_k).
TimeSeries firing_rate(const FiringLadder& ladder);

/// rho_T = \int_0^T f_{T_1}; errors if outside (0, 1) by more than 1e-6.
double rho_T(const TimeSeries& fT1, double T);

}  // namespace lif::fp
