#include <cmath>

#include <doctest.h>

#include "lif/firstpassage.hpp"
#include "lif/kernel.hpp"
#include "lif/subdensity.hpp"

using namespace lif;

namespace {

struct CoarseSetup {
    Grid1D grid = Grid1D::truncated(6.0, 1.0 / 100.0);
    TimeGrid march = TimeGrid::uniform(1.0, 5e-4);
    DensityField f0;
    TimeSeries fT1;
    fp::FiringLadder ladder;

    CoarseSetup() {
        f0 = sub::f0_pde(grid, march, 1e-3, 2);
        fT1 = fp::fT1_from_M(fp::solve_M(march));
        ladder = fp::build_ladder(fT1, 1e-8, 60);
    }
};

const CoarseSetup& setup() {
    static CoarseSetup s;
    return s;
}

}  // namespace

TEST_CASE("occupation integral matches a brute-force quadrature") {
    const double t0 = 1e-3;
    for (double x : {0.05, 0.3, -0.4}) {
        // Riemann sum in sqrt(tau) at very fine resolution.
        const int n = 200000;
        double acc = 0.0;
        const double du = std::sqrt(t0) / n;
        for (int i = 0; i < n; ++i) {
            double u = (i + 0.5) * du;
            acc += 2.0 * u * ou_transition_density(x, u * u, 0.0) * du;
        }
        CHECK(sub::occupation_integral(x, t0) ==
              doctest::Approx(acc).epsilon(1e-8));
    }
}

TEST_CASE("PDE and representation routes to the no-jump density agree") {
    const auto& s = setup();
    TimeGrid out = TimeGrid::uniform(0.5, 0.5);
    auto m = fp::solve_M(s.march);
    auto f0r = sub::f0_from_representation(s.grid, out, m);
    auto pde_row = s.f0.row(s.f0.times.index_of(0.5));
    auto rep_row = f0r.row(1);
    double err = 0.0;
    for (std::size_t i = 0; i < s.grid.n_nodes; ++i) {
        err = std::max(err, std::abs(pde_row[i] - rep_row[i]));
    }
    CHECK(err <= 2e-3);
    CHECK(f0r.max_undershoot <= 1e-6);
}

TEST_CASE("no-jump density mass balances the first-passage mass") {
    const auto& s = setup();
    // mass(f0(t)) + P(T_1 <= t) = 1.
    for (double t : {0.25, 0.5, 1.0}) {
        double m0 = s.f0.mass.at(t);
        CHECK(m0 + s.fT1.integral_to(t) == doctest::Approx(1.0).epsilon(2e-4));
    }
    // The boundary flux of f0 is the first-passage density.
    auto flux = fp::fT1_from_flux(s.f0);
    double sup = 0.0;
    for (std::size_t k = 0; k < flux.values.size(); ++k) {
        sup = std::max(sup, std::abs(flux.values[k] - s.fT1.values[k]));
    }
    CHECK(sup <= 5e-3);  // coarse h = 1/100 run
}

TEST_CASE("series sum and pointwise evaluation agree") {
    const auto& s = setup();
    sub::SubdensityStack stack;
    auto full = sub::sum_series(s.f0, s.ladder, 1e-8, &stack);
    auto ev = sub::evaluate_series(s.f0, s.ladder, {0.5, 1.0}, {1, 2});
    for (std::size_t r = 0; r < ev.out_times.size(); ++r) {
        auto row = full.row(full.times.index_of(ev.out_times[r]));
        for (std::size_t i = 0; i < s.grid.n_nodes; ++i) {
            CHECK(std::abs(row[i] - ev.f[r][i]) <= 1e-12);
        }
    }
    CHECK(full.has_reinjection);

    // Stack members match the rung-convolution fields.
    REQUIRE(stack.fields.size() == s.ladder.rungs.size() + 1);
    auto f1 = sub::fn_from_ladder(s.f0, s.ladder.rungs[0]);
    auto row_full = stack.fields[1].row(stack.fields[1].times.index_of(1.0));
    auto row_f1 = f1.row(f1.times.index_of(1.0));
    for (std::size_t i = 0; i < s.grid.n_nodes; ++i) {
        CHECK(std::abs(row_full[i] - row_f1[i]) <= 1e-14);
    }

    // Iteration route f_2 = f_1 * f_{T_1} equals the ladder route
    // f_2 = f_0 * f_{T_2}.
    auto f2_ladder = sub::fn_from_ladder(s.f0, s.ladder.rungs[1]);
    auto f2_iter = sub::fn_iterate(f1, s.fT1);
    auto a = f2_ladder.row(f2_ladder.times.index_of(1.0));
    auto b = f2_iter.row(f2_iter.times.index_of(1.0));
    double err = 0.0;
    for (std::size_t i = 0; i < s.grid.n_nodes; ++i) {
        err = std::max(err, std::abs(a[i] - b[i]));
    }
    CHECK(err <= 1e-4);
}

TEST_CASE("series restores unit mass and the subdensity split") {
    const auto& s = setup();
    auto ev = sub::evaluate_series(s.f0, s.ladder, {1.0}, {1});
    CHECK(trapezoid(ev.f[0], s.grid.h) == doctest::Approx(1.0).epsilon(5e-4));
    // mass(f1(t)) = P(T_1 <= t < T_2) = P(T_1 <= t) - P(T_2 <= t).
    double m1 = trapezoid(ev.fn[0][0], s.grid.h);
    CHECK(m1 == doctest::Approx(s.ladder.masses[0] - s.ladder.masses[1])
                    .epsilon(2e-3));
    CHECK(ev.tail_bound <= 1e-6);
}

TEST_CASE("general initial data pipeline") {
    const auto& s = setup();
    std::vector<double> f_in(s.grid.n_nodes, 0.0);
    for (std::size_t i = 0; i < s.grid.n_nodes; ++i) {
        double x = s.grid.x(i);
        if (x > -1.0 && x < 0.5) {
            double a = (x + 1.0) * (0.5 - x);
            f_in[i] = a * a;
        }
    }
    double mass = trapezoid(f_in, s.grid.h);
    for (auto& v : f_in) v /= mass;

    sub::GeneralInitialOptions opts;
    opts.store_stride = 2;
    opts.out_times = {0.5, 1.0};
    auto res = sub::general_initial(f_in, s.grid, s.march, s.f0, s.fT1, opts);
    for (const auto& row : res.f_rows) {
        CHECK(trapezoid(row, s.grid.h) == doctest::Approx(1.0).epsilon(2e-3));
        for (double v : row) CHECK(v >= -1e-9);
    }
    CHECK(res.ladder_nu.rho > 0.0);
    CHECK(res.ladder_nu.rho < 1.0);

    // Validation: wrong mass and illegal support are rejected.
    auto doubled = f_in;
    for (auto& v : doubled) v *= 2.0;
    CHECK_THROWS(sub::general_initial(doubled, s.grid, s.march, s.f0, s.fT1, opts));
    auto shifted = f_in;
    shifted.assign(s.grid.n_nodes, 0.0);
    shifted[s.grid.n_nodes - 2] = 1.0 / s.grid.h;  // mass next to threshold
    CHECK_THROWS(sub::general_initial(shifted, s.grid, s.march, s.f0, s.fT1, opts));
}
