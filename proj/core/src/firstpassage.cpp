#include "lif/firstpassage.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "lif/kernel.hpp"

namespace lif::fp {

namespace {
constexpr double kFourPi = 4.0 * std::numbers::pi;

// J1(s) = -Gamma_y(b(s), s, 0, 0) = Gamma(b(s), s, 0, 0) * b(s) / (2s).
double j1_term(double s, double b) {
    if (s <= 0.0) return 0.0;
    return std::exp(-b * b / (4.0 * s)) / std::sqrt(kFourPi * s) * b / (2.0 * s);
}
}  // namespace

MSolution solve_M(const TimeGrid& parent, double clip_floor) {
    if (parent.dt > 1e-3 + 1e-15) {
        throw std::invalid_argument("solve_M: parent grid needs dt <= 1e-3");
    }
    MSolution sol;
    sol.parent = parent;
    std::size_t n = parent.n_nodes();
    sol.s_nodes.resize(n);
    sol.b_nodes.resize(n);
    sol.m.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double t = parent.t(k);
        sol.s_nodes[k] = frame_time(t);
        sol.b_nodes[k] = std::exp(t);
    }
    const auto& s = sol.s_nodes;
    // b at subinterval midpoints: b((s_j + s_{j+1}) / 2).
    std::vector<double> b_mid(n - 1), sqrt_gap(n);
    for (std::size_t j = 0; j + 1 < n; ++j) {
        b_mid[j] = std::sqrt(s[j] + s[j + 1] + 1.0);
    }
    auto& m = sol.m;
    for (std::size_t k = 1; k < n; ++k) {
        const double sk = s[k];
        const double bk = sol.b_nodes[k];
        const double rhs = 2.0 * j1_term(sk, bk);
        // sqrt(sk - s_j) for all j <= k.
        for (std::size_t j = 0; j <= k; ++j) sqrt_gap[j] = std::sqrt(sk - s[j]);
        double acc = 0.0;
        double diag_w = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double ra = sqrt_gap[j];      // sqrt(sk - s_j)
            const double rb = sqrt_gap[j + 1];  // sqrt(sk - s_{j+1})
            // Product weights, exact for (sk - tau)^{-1/2} times linear M:
            //   I0 = \int 1/sqrt, I1 = \int (tau - s_j)/sqrt over [s_j, s_{j+1}].
            const double i0 = 2.0 * (ra - rb);
            const double ca = ra * ra;  // sk - s_j
            const double i1 = ca * i0 - (2.0 / 3.0) * (ca * ra - rb * rb * rb);
            const double w1 = i1 / (s[j + 1] - s[j]);
            const double w0 = i0 - w1;
            // Smooth kernel factor frozen at the midpoint:
            //   Gamma_y = -exp(-(sk-tau)/(bk+b(tau))^2) / ((bk+b(tau)) sqrt(4 pi (sk-tau)))
            const double bsum = bk + b_mid[j];
            const double tau_m = 0.5 * (s[j] + s[j + 1]);
            const double g =
                -std::exp(-(sk - tau_m) / (bsum * bsum)) / (std::sqrt(kFourPi) * bsum);
            acc += g * w0 * m[j];
            if (j + 1 < k) {
                acc += g * w1 * m[j + 1];
            } else {
                diag_w = g * w1;
            }
        }
        double mk = (rhs + 2.0 * acc) / (1.0 - 2.0 * diag_w);
        if (mk < 0.0) {
            if (mk < -clip_floor) {
                throw std::runtime_error("solve_M: negative M beyond noise floor");
            }
            sol.max_clip = std::max(sol.max_clip, -mk);
            ++sol.clipped;
            mk = 0.0;
        }
        m[k] = mk;
    }
    return sol;
}

TimeSeries fT1_from_M(const MSolution& m) {
    TimeSeries out(m.parent);
    for (std::size_t k = 0; k < m.parent.n_nodes(); ++k) {
        out.values[k] = std::exp(2.0 * m.parent.t(k)) * m.m[k];
    }
    return out;
}

TimeSeries fT1_from_flux(const DensityField& f0) {
    if (f0.has_reinjection) {
        throw std::invalid_argument(
            "fT1_from_flux: field has reinjection; need an absorbing-only field");
    }
    return f0.right_flux;
}

TimeSeries renewal_convolve(const TimeSeries& a, const TimeSeries& b) {
    if (!a.times.same_as(b.times)) {
        throw std::invalid_argument("renewal_convolve: grids differ");
    }
    if (std::abs(a.values.front()) > 1e-12 || std::abs(b.values.front()) > 1e-12) {
        throw std::invalid_argument("renewal_convolve: factors must vanish at 0");
    }
    std::size_t n = a.times.n_nodes();
    TimeSeries out(a.times);
    const double dt = a.times.dt;
    const double* av = a.values.data();
    const double* bv = b.values.data();
    for (std::size_t k = 1; k < n; ++k) {
        double acc = 0.0;
        for (std::size_t j = 1; j < k; ++j) acc += av[k - j] * bv[j];
        acc += 0.5 * (av[0] * bv[k] + av[k] * bv[0]);
        out.values[k] = std::max(0.0, dt * acc);
    }
    return out;
}

FiringLadder build_ladder(const TimeSeries& fT1, double tol, int n_cap) {
    return build_ladder_inhomogeneous(fT1, fT1, tol, n_cap);
}

FiringLadder build_ladder_inhomogeneous(const TimeSeries& first,
                                        const TimeSeries& fT1, double tol,
                                        int n_cap) {
    if (!(tol > 0.0) || n_cap < 1) {
        throw std::invalid_argument("build_ladder: need tol > 0 and n_cap >= 1");
    }
    FiringLadder ladder;
    ladder.times = first.times;
    double T = first.times.t_end;
    ladder.rho = rho_T(fT1, T);
    if (ladder.rho >= 1.0 - 1e-6) {
        throw std::runtime_error("build_ladder: P(T_1 <= T) >= 1 - 1e-6");
    }
    TimeSeries cur = first;
    for (int n_rung = 1; n_rung <= n_cap; ++n_rung) {
        ladder.rungs.push_back(cur);
        ladder.masses.push_back(cur.integral());
        if (cur.max_abs() * T <= tol) break;
        if (n_rung < n_cap) cur = renewal_convolve(cur, fT1);
    }
    ladder.dropped_tail_bound = tol * ladder.rho / (1.0 - ladder.rho);
    return ladder;
}

TimeSeries firing_rate(const FiringLadder& ladder) {
    TimeSeries out(ladder.times);
    for (const auto& rung : ladder.rungs) {
        for (std::size_t k = 0; k < out.values.size(); ++k) {
            out.values[k] += rung.values[k];
        }
    }
    return out;
}

double rho_T(const TimeSeries& fT1, double T) {
    if (T > fT1.times.t_end + 1e-12) {
        throw std::invalid_argument("rho_T: T beyond the series grid");
    }
    double rho = fT1.integral_to(T);
    if (rho <= -1e-6 || rho >= 1.0 + 1e-6) {
        throw std::runtime_error("rho_T: integral outside (0, 1)");
    }
    return rho;
}

}  // namespace lif::fp
