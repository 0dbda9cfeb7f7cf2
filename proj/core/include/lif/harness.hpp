#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lif/fpe.hpp"
#include "lif/firstpassage.hpp"
#include "lif/mc.hpp"
#include "lif/subdensity.hpp"
#include "lif/types.hpp"

namespace lif::harness {

struct RunConfig {
    double T = 2.0;
    double dt = 1e-4;
    double L = 6.0;
    double h = 1.0 / 400.0;
    std::size_t mc_paths = 1000000;
    double mc_substep = 1e-3;
    std::uint64_t seed = 12345;
    double ladder_tol = 1e-8;
    int ladder_cap = 60;
    std::string initial_kind = "delta";  ///< "delta" or "density"
    std::string initial_file;            ///< CSV x,value when kind = density
    double eps0 = 0.05;
    double warm_t0 = 1e-3;
    std::vector<std::string> pipelines = {"mc", "fpe", "series"};
    std::vector<double> snapshot_times = {0.5, 1.0, 2.0};
    std::string out_dir = "out";
    bool dump_ensemble = false;

    void validate() const;
    /// Flat dotted-key map (the config file format, one `key = value` per line).
    std::map<std::string, std::string> to_map() const;
    static RunConfig from_map(const std::map<std::string, std::string>& kv);
    static RunConfig from_file(const std::string& path);
    void write_file(const std::string& path) const;
};

struct Metric {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;  ///< pass iff value <= threshold (when checked)
    bool checked = false;
    bool pass = true;
};

struct RunManifest {
    RunConfig config;
    std::string build_id;
    std::map<std::string, double> timings;  ///< seconds per pipeline
    std::vector<Metric> metrics;
    std::vector<std::string> warnings;
    bool all_pass = true;

    void write_json(const std::string& path) const;
};

/// In-memory artifacts of one run (what `compare` consumes).
struct RunOutputs {
    Grid1D grid;
    TimeGrid march;
    std::vector<double> snapshot_times;
    // series pipeline
    std::optional<fp::FiringLadder> ladder;
    std::optional<TimeSeries> fT1;
    std::optional<TimeSeries> firing_ladder;
    std::optional<sub::SeriesEval> series;
    std::optional<DensityField> f0;
    // fpe pipeline
    std::optional<fpe::SolveResult> fpe_run;
    // mc pipeline
    std::optional<mc::PathEnsemble> ensemble;
};

/// Execute the requested pipelines, write density_{pipeline}.csv,
/// firing_{pipeline}.csv, ladder.csv, metrics.csv, manifest.json and a plot
/// script into config.out_dir.  `outputs` (optional) receives the in-memory
/// artifacts.
RunManifest run(const RunConfig& config, RunOutputs* outputs = nullptr);

/// Cross-pipeline metric set with the acceptance allowances.
std::vector<Metric> compare(const RunOutputs& out, const RunConfig& config);

// --- small comparison helpers ---------------------------------------------
double l1_distance(const Grid1D& g, std::span<const double> a,
                   std::span<const double> b);
double linf_distance(std::span<const double> a, std::span<const double> b);
/// sup |a - b| over grid times in [t_lo, t_hi] (b interpolated onto a's grid).
double sup_distance(const TimeSeries& a, const TimeSeries& b, double t_lo,
                    double t_hi);
/// CDF of a nodal density row (trapezoid cumulative, normalized).
std::function<double(double)> cdf_from_density(const Grid1D& g,
                                               std::vector<double> row);

struct ConvergenceResult {
    std::string name;
    std::vector<double> resolution;  ///< h or dt per level
    std::vector<double> error;
    double order = 0.0;
    double r2 = 0.0;
    bool monotone = true;
};

/// Refinement studies: manufactured-solution spatial order in absorbing
/// mode, backward-Euler temporal order on the flux-shift problem, and the
/// Volterra marching order.  `levels` >= 3.
std::vector<ConvergenceResult> convergence_study(const RunConfig& base,
                                                 int levels = 3);

/// Least-squares geometric fit of ladder masses: returns (ratio, theta_hat)
/// with theta_hat = -log ratio; needs >= 4 masses above 1e-12.
std::pair<double, double> decay_fit(const std::vector<double>& masses);

/// Read a density profile CSV (`x,value` per line), interpolate onto the
/// grid and normalize to unit mass.
std::vector<double> read_density_file(const Grid1D& grid,
                                      const std::string& path);

/// Compact build identifier (compiler + date) embedded in manifests.
std::string build_id();

}  // namespace lif::harness
