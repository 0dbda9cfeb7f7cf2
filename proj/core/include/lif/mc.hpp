#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lif/types.hpp"

namespace lif::mc {

/// Initial density table for ensemble starts from general data; sampled by
/// an inverse-CDF table built on the nodes.
struct InitialDensity {
    Grid1D grid;
    std::vector<double> pdf;  ///< nodal values, >= 0, trapezoid mass 1
    double eps0 = 0.05;       ///< support must stay below 1 - eps0
};

struct PathConfig {
    double t_end = 2.0;
    double substep = 1e-3;
    std::uint64_t seed = 0;
    std::size_t n_paths = 1;
    bool record_jump_times = false;
    double initial_point = 0.0;
    std::optional<InitialDensity> initial_density;
    /// Test hook: raise the firing level (e.g. +inf disables the boundary).
    double fire_level = 1.0;

    void validate() const;
};

struct PathSample {
    double x_end = 0.0;
    std::uint32_t n_jumps = 0;
    std::vector<double> jump_times;  ///< recorded only when enabled
};

struct PathEnsemble {
    PathConfig config;
    std::vector<PathSample> samples;
};

/// Simulate one path: exact OU transitions per substep, drift-frozen
/// Brownian-bridge crossing probability exp(-(1-x0)(1-x1)/dt) between
/// substeps; on a hit, the time is recorded (linear interpolation for
/// threshold-exceeded endpoints, substep midpoint for bridge hits), the
/// state resets to 0 and the remainder of the horizon is re-simulated with
/// fresh randomness.  `path_index` selects the per-path counter-based RNG
/// stream derived from the seed.
PathSample simulate_path(std::uint64_t path_index, const PathConfig& cfg);

/// n_paths independent streams; deterministic for fixed (seed, config)
/// regardless of the number of worker threads (0 = auto).
PathEnsemble simulate_ensemble(const PathConfig& cfg, unsigned n_threads = 0);

/// Fraction of samples with x_end <= x and n_jumps == n.
double empirical_subcdf(const PathEnsemble& ens, std::uint32_t n, double x);

/// Normalized histogram of the k-th jump time (k >= 1) among paths with at
/// least k jumps, scaled to estimate the sub-probability density of T_k on
/// [0, t_end].  Bin j covers (t_{j-1}, t_j]; the node-0 value is 0.  Sets
/// *empty when no path has k jumps.
TimeSeries empirical_hitting_histogram(const PathEnsemble& ens, std::uint32_t k,
                                       const TimeGrid& bins,
                                       bool* empty = nullptr);

/// Two-sided Kolmogorov-Smirnov statistic between the empirical law of
/// x_end and the supplied CDF; rejects non-monotone CDF samples.
double ks_distance(const PathEnsemble& ens,
                   const std::function<double(double)>& cdf);

/// Little-endian binary dump: 8-byte magic, uint64 config hash, uint64
/// n_paths; then per path x_end float64, n_jumps uint32, jump_times
/// float64[n_jumps].
void write_ensemble(const PathEnsemble& ens, const std::string& path);
/// Reads a dump back (config echo limited to n_paths / record flag; the
/// stored config hash is returned through hash_out when non-null).
PathEnsemble read_ensemble(const std::string& path,
                           std::uint64_t* hash_out = nullptr);

std::uint64_t config_hash(const PathConfig& cfg);

}  // namespace lif::mc
