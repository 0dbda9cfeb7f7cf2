#include "lif/types.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lif {

void ModelParams::validate() const {
    if (!(v_reset < v_fire)) {
        throw std::invalid_argument("ModelParams: v_reset must be below v_fire");
    }
    if (v_reset != 0.0 || v_fire != 1.0 || drift_slope != 1.0 || diffusion != 1.0) {
        throw std::invalid_argument(
            "ModelParams: constants are fixed to the normalized model "
            "(v_reset=0, v_fire=1, drift -x, diffusion 1)");
    }
}

Grid1D Grid1D::truncated(double L, double h) {
    if (!(L > 0.0) || !(h > 0.0)) {
        throw std::invalid_argument("Grid1D: L and h must be positive");
    }
    auto near_integer = [](double v) {
        return std::abs(v - std::round(v)) <= 1e-12 * std::max(1.0, std::abs(v));
    };
    if (!near_integer(L / h) || !near_integer(1.0 / h)) {
        throw std::invalid_argument("Grid1D: h must divide both L and 1");
    }
    Grid1D g;
    g.x_min = -L;
    g.x_max = 1.0;
    g.h = h;
    g.n_nodes = static_cast<std::size_t>(std::llround((L + 1.0) / h)) + 1;
    g.reset_index = static_cast<std::size_t>(std::llround(L / h));
    if (g.n_nodes < 16) {
        throw std::invalid_argument("Grid1D: need at least 16 nodes");
    }
    return g;
}

bool Grid1D::same_as(const Grid1D& o) const {
    return n_nodes == o.n_nodes && std::abs(x_min - o.x_min) < 1e-12 &&
           std::abs(h - o.h) < 1e-15;
}

TimeGrid TimeGrid::uniform(double t_end, double dt) {
    if (!(dt > 0.0) || !(t_end > 0.0)) {
        throw std::invalid_argument("TimeGrid: t_end and dt must be positive");
    }
    TimeGrid g;
    g.dt = dt;
    g.n_steps = static_cast<std::size_t>(std::llround(t_end / dt));
    g.t_end = t_end;
    if (g.n_steps == 0 ||
        std::abs(static_cast<double>(g.n_steps) * dt - t_end) > 1e-12 * t_end) {
        throw std::invalid_argument("TimeGrid: dt must divide t_end");
    }
    return g;
}

bool TimeGrid::same_as(const TimeGrid& o) const {
    return n_steps == o.n_steps && std::abs(dt - o.dt) < 1e-15;
}

std::size_t TimeGrid::index_of(double t) const {
    double k = t / dt;
    auto ki = static_cast<std::size_t>(std::llround(k));
    if (ki > n_steps || std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k)) {
        throw std::invalid_argument("TimeGrid: t=" + std::to_string(t) +
                                    " is not a grid node");
    }
    return ki;
}

double TimeSeries::at(double t) const {
    if (values.empty()) throw std::logic_error("TimeSeries: empty");
    if (t <= 0.0) return values.front();
    double k = t / times.dt;
    auto k0 = static_cast<std::size_t>(k);
    if (k0 >= times.n_steps) return values.back();
    double w = k - static_cast<double>(k0);
    return (1.0 - w) * values[k0] + w * values[k0 + 1];
}

double TimeSeries::integral() const { return trapezoid(values, times.dt); }

double TimeSeries::integral_to(double t) const {
    if (t <= 0.0) return 0.0;
    if (t >= times.t_end) return integral();
    double k = t / times.dt;
    auto k0 = static_cast<std::size_t>(k);
    double acc = trapezoid({values.data(), k0 + 1}, times.dt);
    double frac = (k - static_cast<double>(k0)) * times.dt;
    double v_t = at(t);
    acc += 0.5 * (values[k0] + v_t) * frac;
    return acc;
}

double TimeSeries::max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

DensityField::DensityField(Grid1D g, TimeGrid tg)
    : grid(g), times(tg), values(tg.n_nodes() * g.n_nodes, 0.0) {}

double DensityField::row_mass(std::size_t k) const {
    return trapezoid(row(k), grid.h);
}

double DensityField::row_right_flux(std::size_t k) const {
    auto r = row(k);
    std::size_t n = grid.n_nodes;
    // f(1) = 0 at the absorbing node; second-order one-sided stencil.
    return (4.0 * r[n - 2] - r[n - 3] - 3.0 * r[n - 1]) / (2.0 * grid.h);
}

void DensityField::refresh_metadata() {
    mass = TimeSeries(times);
    right_flux = TimeSeries(times);
    for (std::size_t k = 0; k < times.n_nodes(); ++k) {
        mass.values[k] = row_mass(k);
        right_flux.values[k] = row_right_flux(k);
    }
}

double trapezoid(std::span<const double> v, double h) {
    if (v.size() < 2) return 0.0;
    double acc = 0.5 * (v.front() + v.back());
    for (std::size_t i = 1; i + 1 < v.size(); ++i) acc += v[i];
    return acc * h;
}

}  // namespace lif
