#include <cmath>

#include <doctest.h>

#include "lif/firstpassage.hpp"

using namespace lif;

TEST_CASE("Volterra march reproduces the hitting probability over [0, 2]") {
    auto m = fp::solve_M(TimeGrid::uniform(2.0, 1e-3));
    auto fT1 = fp::fT1_from_M(m);
    // Independent oracle: fine-resolution value of rho_2 = P(T_1 <= 2),
    // cross-validated against Monte Carlo.
    CHECK(fp::rho_T(fT1, 2.0) == doctest::Approx(0.645892).epsilon(5e-4));
    for (double v : fT1.values) CHECK(v >= 0.0);
    // Small-time flatness: the density is superexponentially small at 0.01.
    CHECK(fT1.at(0.01) <= 1e-6);
    CHECK(m.max_clip <= 1e-6);
}

TEST_CASE("solve_M rejects overly coarse grids") {
    CHECK_THROWS(fp::solve_M(TimeGrid::uniform(1.0, 2e-3)));
}

TEST_CASE("renewal convolution matches a closed form") {
    // a(t) = b(t) = t on [0, 1]: (a*b)(t) = t^3 / 6.
    TimeSeries a(TimeGrid::uniform(1.0, 1e-3));
    for (std::size_t k = 0; k < a.values.size(); ++k) a.values[k] = a.times.t(k);
    auto c = fp::renewal_convolve(a, a);
    for (double t : {0.25, 0.5, 1.0}) {
        CHECK(c.at(t) == doctest::Approx(t * t * t / 6.0).epsilon(1e-5));
    }
}

TEST_CASE("renewal convolution requires vanishing initial values") {
    TimeSeries a(TimeGrid::uniform(1.0, 1e-2));
    a.values[0] = 1.0;
    CHECK_THROWS(fp::renewal_convolve(a, a));
}

TEST_CASE("ladder masses decay and the firing rate sums the rungs") {
    auto fT1 = fp::fT1_from_M(fp::solve_M(TimeGrid::uniform(2.0, 1e-3)));
    auto ladder = fp::build_ladder(fT1, 1e-8, 60);
    CHECK(ladder.rho == doctest::Approx(fp::rho_T(fT1, 2.0)).epsilon(1e-12));
    CHECK(ladder.masses.front() == doctest::Approx(ladder.rho).epsilon(1e-12));
    for (std::size_t n = 1; n < ladder.masses.size(); ++n) {
        CHECK(ladder.masses[n] < ladder.masses[n - 1]);
        // P(T_{n+1} <= T) <= P(T_n <= T) * rho.
        CHECK(ladder.masses[n] <= ladder.masses[n - 1] * ladder.rho * 1.02);
    }
    CHECK(ladder.dropped_tail_bound <= 1e-8 * ladder.rho / (1.0 - ladder.rho) * 1.01);

    auto n_series = fp::firing_rate(ladder);
    double sum = 0.0;
    std::size_t mid = n_series.values.size() / 2;
    for (const auto& rung : ladder.rungs) sum += rung.values[mid];
    CHECK(n_series.values[mid] == doctest::Approx(sum).epsilon(1e-12));
    // E[number of jumps by T] = \int_0^T N.
    CHECK(n_series.integral() == doctest::Approx(1.11490).epsilon(2e-3));
}

TEST_CASE("inhomogeneous ladder with the same first rung reduces to the plain one") {
    auto fT1 = fp::fT1_from_M(fp::solve_M(TimeGrid::uniform(1.0, 1e-3)));
    auto a = fp::build_ladder(fT1, 1e-8, 60);
    auto b = fp::build_ladder_inhomogeneous(fT1, fT1, 1e-8, 60);
    REQUIRE(a.rungs.size() == b.rungs.size());
    for (std::size_t n = 0; n < a.rungs.size(); ++n) {
        CHECK(a.masses[n] == doctest::Approx(b.masses[n]).epsilon(1e-14));
    }
}

TEST_CASE("rho_T rejects values outside the open unit interval") {
    auto fT1 = fp::fT1_from_M(fp::solve_M(TimeGrid::uniform(1.0, 1e-3)));
    TimeSeries doubled = fT1;
    for (auto& v : doubled.values) v *= 4.0;
    CHECK_THROWS(fp::rho_T(doubled, 1.0));
}

TEST_CASE("flux-based first-passage reader rejects reinjecting fields") {
    Grid1D g = Grid1D::truncated(2.0, 1.0 / 50.0);
    DensityField f(g, TimeGrid::uniform(0.1, 1e-2));
    f.refresh_metadata();
    f.has_reinjection = true;
    CHECK_THROWS(fp::fT1_from_flux(f));
}
