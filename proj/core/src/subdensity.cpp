#include "lif/subdensity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "lif/fpe.hpp"
#include "lif/kernel.hpp"

namespace lif::sub {

namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;

// 16-point Gauss-Legendre nodes/weights on (0, 1).
constexpr double kGlNode[16] = {
    0.0052995325041750337, 0.0277124884633837046, 0.0671843988060841224,
    0.1222977958224984868, 0.1910618777986781147, 0.2709916111713863151,
    0.3591982246103705422, 0.4524937450811812866, 0.5475062549188187134,
    0.6408017753896294578, 0.7290083888286136849, 0.8089381222013218853,
    0.8777022041775015132, 0.9328156011939158776, 0.9722875115366162954,
    0.9947004674958249663};
constexpr double kGlWeight[16] = {
    0.0135762297058770482, 0.0311267619693239469, 0.0475792558412463928,
    0.0623144856277669384, 0.0747979944082883680, 0.0845782596975012679,
    0.0913017075224617918, 0.0947253052275342511, 0.0947253052275342511,
    0.0913017075224617918, 0.0845782596975012679, 0.0747979944082883680,
    0.0623144856277669384, 0.0475792558412463928, 0.0311267619693239469,
    0.0135762297058770482};

void clip_row(std::span<double> row, double& max_undershoot) {
    for (auto& v : row) {
        if (v < 0.0) {
            max_undershoot = std::max(max_undershoot, -v);
            v = 0.0;
        }
    }
}

}  // namespace

double occupation_integral(double x, double t0) {
    if (!(t0 > 0.0)) throw std::invalid_argument("occupation_integral: t0 > 0");
    const double u_max = std::sqrt(t0);
    const int n_panels = 4;
    double acc = 0.0;
    for (int p = 0; p < n_panels; ++p) {
        double a = u_max * p / n_panels;
        double w = u_max / n_panels;
        for (int q = 0; q < 16; ++q) {
            double u = a + w * kGlNode[q];
            acc += w * kGlWeight[q] * 2.0 * u *
                   ou_transition_density(x, u * u, 0.0);
        }
    }
    return acc;
}

DensityField f0_from_representation(const Grid1D& grid, const TimeGrid& times,
                                    const fp::MSolution& m) {
    if (m.s_nodes.back() + 1e-12 < frame_time(times.t_end)) {
        throw std::invalid_argument(
            "f0_from_representation: M solution does not cover t_end");
    }
    DensityField field(grid, times);
    field.delta_start = true;
    field.warm_t0 = times.dt;  // row 0 stays the (zero-extended) delta limit

    const auto& s = m.s_nodes;
    std::size_t ns = s.size();
    std::vector<double> b_mid(ns - 1);
    for (std::size_t j = 0; j + 1 < ns; ++j) {
        b_mid[j] = std::sqrt(s[j] + s[j + 1] + 1.0);
    }

    for (std::size_t k = 1; k <= times.n_steps; ++k) {
        const double t = times.t(k);
        const std::size_t km = m.parent.index_of(t);
        const double sk = m.s_nodes[km];
        const double et = m.b_nodes[km];  // e^t
        auto row = field.row(k);
        for (std::size_t i = 0; i + 1 < grid.n_nodes; ++i) {
            const double y = et * grid.x(i);
            double u = heat_kernel(y, sk, 0.0, 0.0);
            for (std::size_t j = 0; j < km; ++j) {
                const double ra = std::sqrt(sk - s[j]);
                const double rb = std::sqrt(sk - s[j + 1]);
                const double i0 = 2.0 * (ra - rb);
                const double ca = ra * ra;
                const double i1 =
                    ca * i0 - (2.0 / 3.0) * (ca * ra - rb * rb * rb);
                const double w1 = i1 / (s[j + 1] - s[j]);
                const double w0 = i0 - w1;
                const double tau_m = 0.5 * (s[j] + s[j + 1]);
                const double dy = y - b_mid[j];
                const double g = std::exp(-dy * dy / (4.0 * (sk - tau_m))) /
                                 std::sqrt(kFourPi);
                u -= g * (w0 * m.m[j] + w1 * m.m[j + 1]);
            }
            row[i] = et * u;
        }
        row[grid.n_nodes - 1] = 0.0;  // absorbing boundary image
        clip_row(row, field.max_undershoot);
    }
    field.refresh_metadata();
    return field;
}

DensityField f0_pde(const Grid1D& grid, const TimeGrid& times, double warm_t0,
                    std::size_t store_stride) {
    fpe::SolveOptions opts;
    opts.delta_start = true;
    opts.warm_t0 = warm_t0;
    opts.snapshot_stride = store_stride;
    auto res = fpe::solve(grid, times, fpe::Mode::absorbing, opts);
    return std::move(res.field);
}

std::vector<double> convolve_row(const DensityField& base, const TimeSeries& w,
                                 double t) {
    const Grid1D& g = base.grid;
    std::vector<double> out(g.n_nodes, 0.0);
    const std::size_t k = base.times.index_of(t);
    std::size_t ks = 0;
    if (base.delta_start) {
        ks = base.times.index_of(base.warm_t0);
        if (ks == 0) {
            throw std::logic_error("convolve_row: warm_t0 must be a stored time");
        }
    }
    if (k < ks || k == 0) return out;

    const double dtau = base.times.dt;
    // Trapezoid over stored rows tau in [warm_t0, t].
    for (std::size_t j = ks; j <= k; ++j) {
        double c = w.at(t - base.times.t(j)) * dtau;
        if (j == ks || j == k) c *= 0.5;
        if (c == 0.0) continue;
        auto row = base.row(j);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += c * row[i];
    }
    if (base.delta_start) {
        // Analytic [0, warm_t0) endpoint: base equals the free OU kernel
        // there up to a <= 1e-6 hit probability.
        const double wt = w.at(t);
        if (wt != 0.0) {
            for (std::size_t i = 0; i + 1 < out.size(); ++i) {
                out[i] += wt * occupation_integral(g.x(i), base.warm_t0);
            }
        }
    }
    out[g.n_nodes - 1] = 0.0;
    return out;
}

namespace {

DensityField convolve_field(const DensityField& base, const TimeSeries& w) {
    if (w.times.t_end + 1e-12 < base.times.t_end) {
        throw std::invalid_argument("time convolution: series grid too short");
    }
    DensityField out(base.grid, base.times);
    for (std::size_t k = 1; k <= base.times.n_steps; ++k) {
        auto row = convolve_row(base, w, base.times.t(k));
        std::copy(row.begin(), row.end(), out.row(k).begin());
        clip_row(out.row(k), out.max_undershoot);
    }
    out.refresh_metadata();
    return out;
}

double sup_value(const DensityField& f) {
    double s = 0.0;
    for (double v : f.values) s = std::max(s, v);
    return s;
}

}  // namespace

DensityField fn_from_ladder(const DensityField& f0, const TimeSeries& rung) {
    return convolve_field(f0, rung);
}

DensityField fn_iterate(const DensityField& f_prev, const TimeSeries& fT1) {
    return convolve_field(f_prev, fT1);
}

DensityField sum_series(const DensityField& f0, const fp::FiringLadder& ladder,
                        double tol, SubdensityStack* stack_out) {
    if (ladder.rho >= 1.0) throw std::runtime_error("sum_series: rho >= 1");
    TimeSeries n_series = fp::firing_rate(ladder);
    DensityField out = convolve_field(f0, n_series);
    for (std::size_t k = 0; k < f0.times.n_nodes(); ++k) {
        auto dst = out.row(k);
        auto src = f0.row(k);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
    out.delta_start = f0.delta_start;
    out.warm_t0 = f0.warm_t0;
    out.has_reinjection = true;
    out.refresh_metadata();
    if (stack_out) {
        stack_out->fields.clear();
        stack_out->fields.push_back(f0);
        for (const auto& rung : ladder.rungs) {
            stack_out->fields.push_back(fn_from_ladder(f0, rung));
        }
    }
    double tail = sup_value(f0) * ladder.masses.back() * ladder.rho /
                  (1.0 - ladder.rho);
    out.max_undershoot = std::max(out.max_undershoot, f0.max_undershoot);
    if (stack_out) stack_out->tail_bound = tail;
    (void)tol;
    return out;
}

SeriesEval evaluate_series(const DensityField& f0, const fp::FiringLadder& ladder,
                           const std::vector<double>& out_times,
                           const std::vector<std::uint32_t>& want_fn) {
    SeriesEval ev;
    ev.grid = f0.grid;
    ev.out_times = out_times;
    ev.fn_indices = want_fn;
    TimeSeries n_series = fp::firing_rate(ladder);
    for (double t : out_times) {
        auto row = convolve_row(f0, n_series, t);
        auto base = f0.row(f0.times.index_of(t));
        for (std::size_t i = 0; i < row.size(); ++i) row[i] += base[i];
        ev.f.push_back(std::move(row));
    }
    for (std::uint32_t n : want_fn) {
        if (n < 1 || n > ladder.rungs.size()) {
            throw std::invalid_argument("evaluate_series: rung index out of range");
        }
        std::vector<std::vector<double>> rows;
        for (double t : out_times) {
            rows.push_back(convolve_row(f0, ladder.rungs[n - 1], t));
        }
        ev.fn.push_back(std::move(rows));
    }
    ev.tail_bound = sup_value(f0) * ladder.masses.back() * ladder.rho /
                    (1.0 - ladder.rho);
    return ev;
}

GeneralInitialResult general_initial(const std::vector<double>& f_in,
                                     const Grid1D& grid, const TimeGrid& march,
                                     const DensityField& f0_delta,
                                     const TimeSeries& fT1_delta,
                                     const GeneralInitialOptions& opts) {
    if (f_in.size() != grid.n_nodes) {
        throw std::invalid_argument("general_initial: f_in size mismatch");
    }
    double mass = trapezoid(f_in, grid.h);
    if (std::abs(mass - 1.0) > 1e-10) {
        throw std::invalid_argument("general_initial: f_in mass must be 1 +- 1e-10");
    }
    if (!(opts.eps0 >= 0.05)) {
        throw std::invalid_argument("general_initial: eps0 must be >= 0.05");
    }
    for (std::size_t i = 0; i < grid.n_nodes; ++i) {
        if (f_in[i] < -1e-12) {
            throw std::invalid_argument("general_initial: f_in must be >= 0");
        }
        if (f_in[i] > 0.0 && (grid.x(i) < grid.x_min + 1.0 - 1e-12 ||
                              grid.x(i) > 1.0 - opts.eps0 + 1e-12)) {
            throw std::invalid_argument(
                "general_initial: support must lie in [-L+1, 1-eps0]");
        }
    }

    GeneralInitialResult res;
    fpe::SolveOptions sopts;
    sopts.delta_start = false;
    sopts.f_in = f_in;
    sopts.snapshot_stride = opts.store_stride;
    auto solved = fpe::solve(grid, march, fpe::Mode::absorbing, sopts);
    res.f0_nu = std::move(solved.field);
    res.fT1_nu = solved.firing;

    res.ladder_nu = fp::build_ladder_inhomogeneous(res.fT1_nu, fT1_delta,
                                                   opts.tol, opts.n_cap);
    res.firing_nu = fp::firing_rate(res.ladder_nu);
    res.out_times = opts.out_times;
    for (double t : opts.out_times) {
        auto row = convolve_row(f0_delta, res.firing_nu, t);
        auto base = res.f0_nu.row(res.f0_nu.times.index_of(t));
        for (std::size_t i = 0; i < row.size(); ++i) row[i] += base[i];
        res.f_rows.push_back(std::move(row));
    }
    return res;
}

}  // namespace lif::sub
