#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "lif/types.hpp"

namespace lif::fpe {

enum class Mode { absorbing, flux_shift };

/// Conservative finite-difference operator for f_t = d/dx(x f) + f_xx on the
/// unknowns at nodes 1 .. n-2 (both end nodes hold fixed zero values).
/// Face fluxes Phi_{i+1/2} = x_{i+1/2} (f_i + f_{i+1})/2 + (f_{i+1} - f_i)/h
/// with a zero-flux truncation face at x = -L and the absorbing outflux
/// Phi_top = -(4 f_{n-2} - f_{n-3})/(2h) through x = 1 (second-order
/// one-sided, matching the firing-rate readout exactly).  In flux-shift mode
/// the outflux is rerouted into the reset cell, making every column sum
/// exactly zero (discrete mass conservation by construction).
struct DiscreteOperator {
    Grid1D grid;
    Mode mode = Mode::absorbing;
    // Tridiagonal part over the unknown vector u_j = f(x_{j+1}), j = 0..n-1.
    std::vector<double> lower, diag, upper;
    // Flux-shift reroute entries A(reset_row, n-1) and A(reset_row, n-2).
    double reroute_last = 0.0, reroute_prev = 0.0;
    std::size_t reset_row = 0;

    std::size_t n() const { return diag.size(); }
    std::vector<double> apply(std::span<const double> f) const;
    std::vector<double> column_sums() const;
};

DiscreteOperator build_operator(const Grid1D& grid, Mode mode);

/// Backward-Euler step cache: Thomas factorization of (I - dt T) plus a
/// Sherman-Morrison rank-one correction for the reroute row.
class ImplicitStepper {
  public:
    ImplicitStepper(const DiscreteOperator& op, double dt);
    /// In-place backward-Euler step (I - dt A) f_new = f_old (+ dt * source).
    void advance(std::vector<double>& f) const;
    double dt() const { return dt_; }

  private:
    void solve_tridiag(std::vector<double>& b) const;
    double dt_ = 0.0;
    std::vector<double> low_, c_prime_, inv_denom_;
    std::vector<double> t_inv_u_;  ///< (I - dt T)^{-1} e_reset
    double sm_denom_ = 1.0;
    double v_last_ = 0.0, v_prev_ = 0.0;
    std::size_t reset_row_ = 0;
    bool has_reroute_ = false;
};

/// One backward-Euler step as a free function (builds a stepper internally).
std::vector<double> step(const std::vector<double>& f, double dt,
                         const DiscreteOperator& op);

struct SolveOptions {
    bool delta_start = true;       ///< warm-start OU kernel for a delta at 0
    double warm_t0 = 1e-3;         ///< must be a grid time in [1e-4, 1e-2]
    std::vector<double> f_in;      ///< nodal initial density when !delta_start
    std::size_t snapshot_stride = 1;
    /// Optional source term S(t) added implicitly; fills values on unknowns.
    std::function<void(double t, std::span<double> s)> source;
    bool check_mass = true;        ///< error on mass drift > 1e-8 (flux-shift)
};

struct SolveResult {
    DensityField field;   ///< rows stored every snapshot_stride marching steps
    TimeSeries firing;    ///< N(t) at every marching step
    TimeSeries mass;      ///< discrete mass at every marching step
    double max_mass_drift = 0.0;
    double min_value = 0.0;
    double max_flux_mismatch = 0.0;  ///< |N dt - rerouted mass| relative, t >= 10 dt
};

/// March to times.t_end recording N(t_k) = (4 f_{n-2} - f_{n-3})/(2h) each
/// step.  The `on_step` callback (if set) receives every marching row.
SolveResult solve(const Grid1D& grid, const TimeGrid& times, Mode mode,
                  const SolveOptions& opts,
                  const std::function<void(std::size_t k, double t,
                                           std::span<const double> f_nodes)>&
                      on_step = nullptr);

struct JumpDefect {
    double slope_jump_error = 0.0;  ///< |(f_x(0^-) - f_x(0^+)) - N(t)|
    double value_mismatch = 0.0;    ///< |f(0^-) - f(0^+)| (0 on a single-valued grid)
};

/// Reset-node derivative-jump defect of a stored field row at time t,
/// using second-order one-sided stencils on each side of x = 0.
JumpDefect jump_defect(const DensityField& field, const TimeSeries& firing,
                       double t);

/// Test function with the evaluations needed by the weak-solution identity.
struct TestFunction {
    std::function<double(double x, double t)> value;
    std::function<double(double x, double t)> dt;    ///< phi_t
    std::function<double(double x, double t)> xdx;   ///< x phi_x
    std::function<double(double x, double t)> dxx;   ///< phi_xx
};

/// | LHS - RHS | of the weak identity
///   int int (phi_t - x phi_x + phi_xx) f dx dt
///     = int phi(x,T) f(x,T) dx - int phi(x,t0) f(x,t0) dx
///       + int (phi(1,t) - phi(0,t)) N(t) dt
/// by tensor trapezoid over the stored rows, starting from the first row
/// with positive mass.
double weak_residual(const DensityField& field, const TimeSeries& firing,
                     const TestFunction& phi);

/// || f(., t) - f_in ||_2 at every stored time <= t_max.
TimeSeries l2_initial_convergence(const DensityField& field,
                                  const std::vector<double>& f_in,
                                  double t_max = 0.025);

}  // namespace lif::fpe
