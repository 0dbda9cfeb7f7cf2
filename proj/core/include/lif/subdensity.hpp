#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lif/firstpassage.hpp"
#include "lif/types.hpp"

namespace lif::sub {

/// Per-n sub-density fields plus the guaranteed sup-norm of the dropped tail.
struct SubdensityStack {
    std::vector<DensityField> fields;  ///< fields[n] = f_n
    double tail_bound = 0.0;
};

/// No-jump sub-density by the frame representation
///   u(y,s) = Gamma(y,s,0,0) - \int_0^s Gamma(y,s,b(tau),tau) M(tau) dtau,
///   f0(x,t) = e^t u(e^t x, s(t)),
/// with the same product quadrature as the Volterra march.  Every output
/// time must be a node of m's parent grid; the t = 0 row stays zero (delta
/// limit).  Negative quadrature noise is clipped to 0 (undershoot logged).
DensityField f0_from_representation(const Grid1D& grid, const TimeGrid& times,
                                    const fp::MSolution& m);

/// No-jump sub-density by the absorbing PDE march, warm-started from the
/// exact OU kernel at warm_t0 in [1e-4, 1e-2] (hit probability <= 1e-6
/// there); rows before warm_t0 are zero-extended.  `store_stride` thins the
/// stored rows; mass / boundary flux stay at marching resolution.
DensityField f0_pde(const Grid1D& grid, const TimeGrid& times, double warm_t0,
                    std::size_t store_stride = 1);

/// One row of the renewal time convolution \int_0^t base(x, t - s) w(s) ds
/// evaluated at t (a stored time of `base`), with the [0, warm_t0) part of a
/// delta-started base handled analytically through the occupation integral
/// of the free OU kernel.
std::vector<double> convolve_row(const DensityField& base, const TimeSeries& w,
                                 double t);

/// f_n(x_i, t_k) = \int_0^{t_k} f0(x_i, t_k - s) f_{T_n}(s) ds on f0's
/// stored grid (n >= 1 rung from the ladder).
DensityField fn_from_ladder(const DensityField& f0, const TimeSeries& rung);

/// Same quadrature with (f_{n-1}, f_{T_1}) in place of (f0, f_{T_n}).
DensityField fn_iterate(const DensityField& f_prev, const TimeSeries& fT1);

/// f = f0 + \sum_{n>=1} f_n summed through the identity
/// \sum_n f0 * f_{T_n} = f0 * N with N truncated by the ladder; the
/// recorded tail bound is sup f0 * mass_last * rho / (1 - rho).
/// When `stack_out` is non-null the individual f_n fields are also built.
DensityField sum_series(const DensityField& f0, const fp::FiringLadder& ladder,
                        double tol = 1e-8, SubdensityStack* stack_out = nullptr);

/// Point evaluation of the series at selected output times only (the
/// economical path for fine grids): rows of f and of requested f_n.
struct SeriesEval {
    Grid1D grid;
    std::vector<double> out_times;
    std::vector<std::vector<double>> f;  ///< total density rows
    std::vector<std::vector<std::vector<double>>> fn;  ///< [want][time][node]
    std::vector<std::uint32_t> fn_indices;
    double tail_bound = 0.0;
};
SeriesEval evaluate_series(const DensityField& f0, const fp::FiringLadder& ladder,
                           const std::vector<double>& out_times,
                           const std::vector<std::uint32_t>& want_fn = {});

struct GeneralInitialOptions {
    double eps0 = 0.05;
    double tol = 1e-8;
    int n_cap = 60;
    std::size_t store_stride = 1;
    std::vector<double> out_times;
};

/// Full density for general initial data f_in (nodal values; support must
/// lie in [-L+1, 1-eps0], unit mass):
///   f0_nu   = absorbing solve from f_in,
///   fT1_nu  = boundary flux of f0_nu,
///   ladder  = fT1_nu * fT1_delta^{*(n-1)} (later excursions restart at 0),
///   f^nu    = f0_nu + f0_delta * N_nu.
struct GeneralInitialResult {
    DensityField f0_nu;
    TimeSeries fT1_nu;
    fp::FiringLadder ladder_nu;
    TimeSeries firing_nu;
    std::vector<double> out_times;
    std::vector<std::vector<double>> f_rows;  ///< f^nu at out_times
};
GeneralInitialResult general_initial(const std::vector<double>& f_in,
                                     const Grid1D& grid, const TimeGrid& march,
                                     const DensityField& f0_delta,
                                     const TimeSeries& fT1_delta,
                                     const GeneralInitialOptions& opts);

/// \int_0^{t0} ou_transition_density(x, tau, 0) dtau by Gauss-Legendre in
/// sqrt(tau) (the integrand is smooth there); the analytic endpoint weight
/// for delta-started time convolutions.
double occupation_integral(double x, double t0);

}  // namespace lif::sub
