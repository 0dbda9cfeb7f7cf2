#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lif {

/// Fixed model normalization: drift -x, diffusion coefficient a = 1
/// (sigma = sqrt(2)), reset potential 0, firing threshold 1.
struct ModelParams {
    double v_reset = 0.0;
    double v_fire = 1.0;
    double drift_slope = 1.0;  ///< drift is -drift_slope * x
    double diffusion = 1.0;    ///< a = sigma^2 / 2

    /// Throws std::invalid_argument unless the constants equal the
    /// normalized model values above.
    void validate() const;
};

/// Uniform spatial grid on [-L, 1] with nodes x_i = -L + i*h.
/// Both x = 0 and x = 1 must fall exactly on nodes.
struct Grid1D {
    double x_min = 0.0;
    double x_max = 1.0;
    double h = 0.0;
    std::size_t n_nodes = 0;      ///< total node count, including both ends
    std::size_t reset_index = 0;  ///< node with x == 0

    /// Build the grid for truncation depth L > 0 and spacing h; h must
    /// divide both L and 1 to within 1e-12 relative.
    static Grid1D truncated(double L, double h);

    double x(std::size_t i) const { return x_min + h * static_cast<double>(i); }
    std::size_t last_index() const { return n_nodes - 1; }
    /// Number of evolved unknowns in the PDE solver (nodes 1 .. n-2;
    /// both boundary nodes carry fixed zero values).
    std::size_t n_unknowns() const { return n_nodes - 2; }
    bool same_as(const Grid1D& o) const;
};

/// Uniform time grid t_k = k*dt, k = 0..n_steps.
struct TimeGrid {
    double t_end = 0.0;
    double dt = 0.0;
    std::size_t n_steps = 0;

    static TimeGrid uniform(double t_end, double dt);

    double t(std::size_t k) const { return dt * static_cast<double>(k); }
    std::size_t n_nodes() const { return n_steps + 1; }
    bool same_as(const TimeGrid& o) const;
    /// Index of time t on the grid; throws if t is not a node (1e-9 snap).
    std::size_t index_of(double t) const;
};

/// Scalar function sampled on a TimeGrid (first-passage densities,
/// firing rates, boundary-derivative solutions, ...).
struct TimeSeries {
    TimeGrid times;
    std::vector<double> values;

    TimeSeries() = default;
    explicit TimeSeries(TimeGrid g) : times(g), values(g.n_nodes(), 0.0) {}

    /// Linear interpolation; clamps to the end values outside the grid.
    double at(double t) const;
    /// Trapezoid integral over the full grid.
    double integral() const;
    /// Trapezoid integral over [0, t]; t need not be a node.
    double integral_to(double t) const;
    double max_abs() const;
};

/// Space-time density table with mass / boundary-flux metadata.
/// `values` holds rows f(., t_k) for the storage grid `times`;
/// `mass` and `right_flux` are tracked on the (possibly finer)
/// marching grid of the solver that produced the field.
struct DensityField {
    Grid1D grid;
    TimeGrid times;
    std::vector<double> values;  ///< row-major: values[k * n_nodes + i]

    TimeSeries mass;        ///< total mass per marching step
    TimeSeries right_flux;  ///< -d/dx f(1^-, t) per marching step

    bool has_reinjection = false;  ///< true for flux-shift solves
    bool delta_start = false;      ///< started from a warm delta kernel
    double warm_t0 = 0.0;          ///< rows with t < warm_t0 are zero-extended
    double max_undershoot = 0.0;   ///< largest clipped negative value (magnitude)

    DensityField() = default;
    DensityField(Grid1D g, TimeGrid tg);

    double at(std::size_t k, std::size_t i) const {
        return values[k * grid.n_nodes + i];
    }
    std::span<const double> row(std::size_t k) const {
        return {values.data() + k * grid.n_nodes, grid.n_nodes};
    }
    std::span<double> row(std::size_t k) {
        return {values.data() + k * grid.n_nodes, grid.n_nodes};
    }
    /// Trapezoid mass of a stored row.
    double row_mass(std::size_t k) const;
    /// Second-order one-sided -d/dx f(1^-) of a stored row.
    double row_right_flux(std::size_t k) const;
    /// Fill mass / right_flux metadata from the stored rows.
    void refresh_metadata();
};

/// Moving-boundary frame: y = e^t x, s = (e^{2t}-1)/2, b(s) = sqrt(2s+1).
struct MovingFrame {
    double y = 0.0;
    double s = 0.0;
    double b = 1.0;
};

/// Trapezoid integral of nodal values against a uniform spacing.
double trapezoid(std::span<const double> v, double h);

}  // namespace lif
