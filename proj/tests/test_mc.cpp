#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include <doctest.h>

#include "lif/kernel.hpp"
#include "lif/mc.hpp"

using namespace lif;

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("free OU moments without a boundary") {
    mc::PathConfig cfg;
    cfg.t_end = 1.0;
    cfg.substep = 1e-3;
    cfg.seed = 7;
    cfg.n_paths = 40000;
    cfg.fire_level = std::numeric_limits<double>::infinity();
    auto ens = mc::simulate_ensemble(cfg);

    double mean = 0.0, var = 0.0;
    for (const auto& s : ens.samples) {
        mean += s.x_end;
        CHECK(s.n_jumps == 0);
    }
    mean /= cfg.n_paths;
    for (const auto& s : ens.samples) var += (s.x_end - mean) * (s.x_end - mean);
    var /= cfg.n_paths - 1;

    const double var_exact = 1.0 - std::exp(-2.0 * cfg.t_end);
    const double se_mean = std::sqrt(var_exact / cfg.n_paths);
    CHECK(std::abs(mean) <= 4.0 * se_mean);
    CHECK(var == doctest::Approx(var_exact).epsilon(0.02));

    // Exact transitions: the terminal law is Gaussian (KS at the 1% level).
    double ks = mc::ks_distance(ens, [&](double x) {
        return normal_cdf(x / std::sqrt(var_exact));
    });
    CHECK(ks <= 1.63 / std::sqrt(static_cast<double>(cfg.n_paths)));
}

TEST_CASE("ensembles are deterministic and thread-count independent") {
    mc::PathConfig cfg;
    cfg.t_end = 0.5;
    cfg.substep = 1e-3;
    cfg.seed = 99;
    cfg.n_paths = 4096;
    cfg.record_jump_times = true;
    auto a = mc::simulate_ensemble(cfg, 1);
    auto b = mc::simulate_ensemble(cfg, 3);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(a.samples[i].x_end == b.samples[i].x_end);
        CHECK(a.samples[i].n_jumps == b.samples[i].n_jumps);
        CHECK(a.samples[i].jump_times == b.samples[i].jump_times);
    }
    // Per-path streams: a single path matches its slot in the ensemble.
    auto one = mc::simulate_path(17, cfg);
    CHECK(one.x_end == a.samples[17].x_end);
}

TEST_CASE("jump statistics against the hitting-probability oracle") {
    mc::PathConfig cfg;
    cfg.t_end = 2.0;
    cfg.substep = 1e-3;
    cfg.seed = 12345;
    cfg.n_paths = 50000;
    cfg.record_jump_times = true;
    auto ens = mc::simulate_ensemble(cfg);

    double p1 = 0.0;
    for (const auto& s : ens.samples) {
        if (s.n_jumps > 0) p1 += 1.0;
        CHECK(s.x_end <= 1.0);
        CHECK(std::is_sorted(s.jump_times.begin(), s.jump_times.end()));
        CHECK(s.jump_times.size() == s.n_jumps);
        for (double t : s.jump_times) {
            CHECK(t > 0.0);
            CHECK(t <= cfg.t_end);
        }
    }
    p1 /= cfg.n_paths;
    const double rho2 = 0.645892;  // fine Volterra value of P(T_1 <= 2)
    const double sigma = std::sqrt(rho2 * (1.0 - rho2) / cfg.n_paths);
    CHECK(std::abs(p1 - rho2) <= 4.0 * sigma);

    // Sub-CDF at the threshold equals the plain count fractions.
    double total = 0.0;
    for (std::uint32_t n = 0; n <= 6; ++n) {
        double c = mc::empirical_subcdf(ens, n, 1.0);
        CHECK(c >= 0.0);
        total += c;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(mc::empirical_subcdf(ens, 0, 1.0) ==
          doctest::Approx(1.0 - p1).epsilon(1e-12));

    // Histogram of T_1 integrates to P(T_1 <= 2).
    bool empty = false;
    auto hist = mc::empirical_hitting_histogram(
        ens, 1, TimeGrid::uniform(2.0, 0.02), &empty);
    CHECK(!empty);
    double mass = 0.0;
    for (std::size_t j = 1; j < hist.values.size(); ++j) {
        mass += hist.values[j] * hist.times.dt;
    }
    CHECK(mass == doctest::Approx(p1).epsilon(1e-10));
}

TEST_CASE("initial-density sampling hits the requested law") {
    Grid1D g = Grid1D::truncated(6.0, 1.0 / 100.0);
    mc::InitialDensity init;
    init.grid = g;
    init.pdf.assign(g.n_nodes, 0.0);
    // Triangle density on [-1, 0]: pdf = 2 (x + 1) on [-1, 0].
    for (std::size_t i = 0; i < g.n_nodes; ++i) {
        double x = g.x(i);
        if (x >= -1.0 && x <= 0.0) init.pdf[i] = 2.0 * (x + 1.0);
    }
    double mass = trapezoid(init.pdf, g.h);
    for (auto& v : init.pdf) v /= mass;

    mc::PathConfig cfg;
    cfg.t_end = 1e-3;  // essentially no evolution
    cfg.substep = 1e-3;
    cfg.seed = 3;
    cfg.n_paths = 30000;
    cfg.initial_density = init;
    auto ens = mc::simulate_ensemble(cfg);
    double m1 = 0.0;
    for (const auto& s : ens.samples) m1 += s.x_end;
    m1 /= cfg.n_paths;
    CHECK(m1 == doctest::Approx(-1.0 / 3.0).epsilon(0.02));
}

TEST_CASE("binary ensemble dump round-trips with its config hash") {
    mc::PathConfig cfg;
    cfg.t_end = 0.25;
    cfg.substep = 1e-3;
    cfg.seed = 11;
    cfg.n_paths = 500;
    cfg.record_jump_times = true;
    auto ens = mc::simulate_ensemble(cfg);

    auto path = std::filesystem::temp_directory_path() / "lif_ens_test.bin";
    mc::write_ensemble(ens, path.string());
    std::uint64_t hash = 0;
    auto back = mc::read_ensemble(path.string(), &hash);
    CHECK(hash == mc::config_hash(cfg));
    REQUIRE(back.samples.size() == ens.samples.size());
    for (std::size_t i = 0; i < ens.samples.size(); ++i) {
        CHECK(back.samples[i].x_end == ens.samples[i].x_end);
        CHECK(back.samples[i].n_jumps == ens.samples[i].n_jumps);
        CHECK(back.samples[i].jump_times == ens.samples[i].jump_times);
    }
    std::filesystem::remove(path);

    // Dumps without recorded jump times would lose information.
    mc::PathConfig bare = cfg;
    bare.record_jump_times = false;
    bare.n_paths = 10;
    auto small = mc::simulate_ensemble(bare);
    CHECK_THROWS(mc::write_ensemble(small, path.string()));
}

TEST_CASE("ks_distance rejects non-monotone CDF callables") {
    mc::PathConfig cfg;
    cfg.t_end = 0.1;
    cfg.substep = 1e-3;
    cfg.seed = 5;
    cfg.n_paths = 100;
    auto ens = mc::simulate_ensemble(cfg);
    CHECK_THROWS(mc::ks_distance(ens, [](double x) { return -x; }));
}
