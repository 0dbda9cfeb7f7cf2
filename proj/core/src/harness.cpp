#include "lif/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lif/kernel.hpp"

namespace lif::harness {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

/// Largest stride <= target that divides n_steps (and k0 when k0 > 0), so
/// that snapshots stay aligned with the marching grid and the warm start.
std::size_t pick_stride(std::size_t n_steps, std::size_t target,
                        std::size_t k0 = 0) {
    target = std::clamp<std::size_t>(target, 1, n_steps);
    for (std::size_t s = target; s >= 1; --s) {
        if (n_steps % s == 0 && (k0 == 0 || k0 % s == 0)) return s;
    }
    return 1;
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             start)
            .count();
    }
};

void fit_loglog(const std::vector<double>& x, const std::vector<double>& y,
                double& slope, double& r2) {
    std::size_t n = x.size();
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        lx[i] = std::log(x[i]);
        ly[i] = std::log(std::max(y[i], 1e-300));
    }
    double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    slope = sxy / sxx;
    r2 = (syy > 0.0) ? (sxy * sxy) / (sxx * syy) : 1.0;
}

}  // namespace

// --- RunConfig --------------------------------------------------------------

void RunConfig::validate() const {
    if (!(T > 0.0) || !(dt > 0.0) || !(h > 0.0) || !(L > 0.0)) {
        throw std::invalid_argument("RunConfig: T, dt, h, L must be positive");
    }
    if (dt > 1e-3 + 1e-15) {
        throw std::invalid_argument("RunConfig: dt must be <= 1e-3");
    }
    if (!(ladder_tol > 0.0) || ladder_cap < 1) {
        throw std::invalid_argument("RunConfig: ladder tolerances must be positive");
    }
    if (pipelines.empty()) {
        throw std::invalid_argument("RunConfig: pipelines must be nonempty");
    }
    for (const auto& p : pipelines) {
        if (p != "mc" && p != "fpe" && p != "series") {
            throw std::invalid_argument("RunConfig: unknown pipeline " + p);
        }
    }
    if (initial_kind != "delta" && initial_kind != "density") {
        throw std::invalid_argument("RunConfig: initial kind must be delta or density");
    }
    if (initial_kind == "density") {
        if (initial_file.empty() || !std::filesystem::exists(initial_file)) {
            throw std::invalid_argument("RunConfig: initial density file not found");
        }
    }
}

std::map<std::string, std::string> RunConfig::to_map() const {
    std::map<std::string, std::string> kv;
    kv["run.T"] = fmt(T);
    kv["run.dt"] = fmt(dt);
    kv["grid.L"] = fmt(L);
    kv["grid.h"] = fmt(h);
    kv["mc.n_paths"] = std::to_string(mc_paths);
    kv["mc.substep"] = fmt(mc_substep);
    kv["mc.seed"] = std::to_string(seed);
    kv["ladder.tol"] = fmt(ladder_tol);
    kv["ladder.n_cap"] = std::to_string(ladder_cap);
    kv["initial.kind"] = initial_kind;
    if (!initial_file.empty()) kv["initial.file"] = initial_file;
    kv["initial.eps0"] = fmt(eps0);
    kv["solver.warm_t0"] = fmt(warm_t0);
    std::string p;
    for (const auto& s : pipelines) p += (p.empty() ? "" : ",") + s;
    kv["run.pipelines"] = p;
    std::string snaps;
    for (double t : snapshot_times) {
        snaps += (snaps.empty() ? "" : ",") + fmt(t);
    }
    kv["output.snapshots"] = snaps;
    kv["output.dir"] = out_dir;
    kv["output.dump_ensemble"] = dump_ensemble ? "true" : "false";
    return kv;
}

RunConfig RunConfig::from_map(const std::map<std::string, std::string>& kv) {
    RunConfig c;
    auto get = [&](const std::string& key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    auto getd = [&](const std::string& key, double& dst) {
        if (auto* v = get(key)) dst = std::stod(*v);
    };
    getd("run.T", c.T);
    getd("run.dt", c.dt);
    getd("grid.L", c.L);
    getd("grid.h", c.h);
    if (auto* v = get("mc.n_paths")) c.mc_paths = std::stoull(*v);
    getd("mc.substep", c.mc_substep);
    if (auto* v = get("mc.seed")) c.seed = std::stoull(*v);
    getd("ladder.tol", c.ladder_tol);
    if (auto* v = get("ladder.n_cap")) c.ladder_cap = std::stoi(*v);
    if (auto* v = get("initial.kind")) c.initial_kind = *v;
    if (auto* v = get("initial.file")) c.initial_file = *v;
    getd("initial.eps0", c.eps0);
    getd("solver.warm_t0", c.warm_t0);
    auto split = [](const std::string& s) {
        std::vector<std::string> parts;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) parts.push_back(item);
        }
        return parts;
    };
    if (auto* v = get("run.pipelines")) c.pipelines = split(*v);
    if (auto* v = get("output.snapshots")) {
        c.snapshot_times.clear();
        for (const auto& s : split(*v)) c.snapshot_times.push_back(std::stod(s));
    }
    if (auto* v = get("output.dir")) c.out_dir = *v;
    if (auto* v = get("output.dump_ensemble")) c.dump_ensemble = (*v == "true");
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("RunConfig: cannot open " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    auto trim = [](std::string s) {
        auto issp = [](unsigned char ch) { return std::isspace(ch); };
        while (!s.empty() && issp(s.front())) s.erase(s.begin());
        while (!s.empty() && issp(s.back())) s.pop_back();
        return s;
    };
    while (std::getline(is, line)) {
        if (auto pos = line.find('#'); pos != std::string::npos) {
            line.erase(pos);
        }
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("RunConfig: malformed line: " + line);
        }
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return from_map(kv);
}

void RunConfig::write_file(const std::string& path) const {
    std::ofstream os(path);
    for (const auto& [k, v] : to_map()) os << k << " = " << v << "\n";
}

// --- manifest ---------------------------------------------------------------

std::string build_id() {
    std::string id = "lifdensity-1.0.0";
#if defined(__clang__)
    id += " clang-" + std::to_string(__clang_major__);
#elif defined(__GNUC__)
    id += " gcc-" + std::to_string(__GNUC__);
#endif
    id += " built " __DATE__;
    return id;
}

void RunManifest::write_json(const std::string& path) const {
    nlohmann::ordered_json j;
    j["config"] = config.to_map();
    j["build"] = build_id;
    nlohmann::ordered_json ms = nlohmann::ordered_json::array();
    for (const auto& m : metrics) {
        nlohmann::ordered_json e;
        e["name"] = m.name;
        e["value"] = m.value;
        if (m.checked) {
            e["threshold"] = m.threshold;
            e["pass"] = m.pass;
        }
        ms.push_back(e);
    }
    j["metrics"] = ms;
    j["warnings"] = warnings;
    j["timings"] = timings;
    j["all_pass"] = all_pass;
    std::ofstream os(path);
    os << j.dump(2) << "\n";
}

// --- comparison helpers -----------------------------------------------------

double l1_distance(const Grid1D& g, std::span<const double> a,
                   std::span<const double> b) {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = std::abs(a[i] - b[i]);
    return trapezoid(d, g.h);
}

double linf_distance(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

double sup_distance(const TimeSeries& a, const TimeSeries& b, double t_lo,
                    double t_hi) {
    double m = 0.0;
    for (std::size_t k = 0; k <= a.times.n_steps; ++k) {
        double t = a.times.t(k);
        if (t < t_lo - 1e-12 || t > t_hi + 1e-12) continue;
        m = std::max(m, std::abs(a.values[k] - b.at(t)));
    }
    return m;
}

std::function<double(double)> cdf_from_density(const Grid1D& g,
                                               std::vector<double> row) {
    std::vector<double> xs(g.n_nodes), cdf(g.n_nodes);
    double acc = 0.0;
    xs[0] = g.x(0);
    cdf[0] = 0.0;
    for (std::size_t i = 1; i < g.n_nodes; ++i) {
        acc += 0.5 * (row[i - 1] + row[i]) * g.h;
        xs[i] = g.x(i);
        cdf[i] = acc;
    }
    double total = acc > 0.0 ? acc : 1.0;
    for (auto& c : cdf) c /= total;
    return [xs = std::move(xs), cdf = std::move(cdf)](double x) {
        if (x <= xs.front()) return 0.0;
        if (x >= xs.back()) return 1.0;
        auto it = std::upper_bound(xs.begin(), xs.end(), x);
        std::size_t j = static_cast<std::size_t>(it - xs.begin());
        double w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
        return cdf[j - 1] + w * (cdf[j] - cdf[j - 1]);
    };
}

std::pair<double, double> decay_fit(const std::vector<double>& masses) {
    std::vector<double> ns, ms;
    for (std::size_t i = 0; i < masses.size(); ++i) {
        if (masses[i] > 1e-12) {
            ns.push_back(static_cast<double>(i + 1));
            ms.push_back(masses[i]);
        }
    }
    if (ns.size() < 4) {
        throw std::invalid_argument("decay_fit: need >= 4 rungs above 1e-12");
    }
    // Least-squares slope of log(mass) vs n.
    double n = static_cast<double>(ns.size());
    double mx = std::accumulate(ns.begin(), ns.end(), 0.0) / n;
    double my = 0.0;
    std::vector<double> ly(ns.size());
    for (std::size_t i = 0; i < ns.size(); ++i) {
        ly[i] = std::log(ms[i]);
        my += ly[i];
    }
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        sxx += (ns[i] - mx) * (ns[i] - mx);
        sxy += (ns[i] - mx) * (ly[i] - my);
    }
    double slope = sxy / sxx;
    double ratio = std::exp(slope);
    return {ratio, -slope};
}

std::vector<double> read_density_file(const Grid1D& grid,
                                      const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("read_density_file: cannot open " + path);
    std::vector<double> xs, vs;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("x,", 0) == 0) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        xs.push_back(std::stod(line.substr(0, comma)));
        vs.push_back(std::stod(line.substr(comma + 1)));
    }
    if (xs.size() < 2) throw std::runtime_error("read_density_file: too few rows");
    std::vector<double> out(grid.n_nodes, 0.0);
    for (std::size_t i = 0; i < grid.n_nodes; ++i) {
        double x = grid.x(i);
        if (x < xs.front() || x > xs.back()) continue;
        auto it = std::upper_bound(xs.begin(), xs.end(), x);
        std::size_t j = std::min<std::size_t>(
            std::max<std::ptrdiff_t>(1, it - xs.begin()), xs.size() - 1);
        double w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
        out[i] = std::max(0.0, (1.0 - w) * vs[j - 1] + w * vs[j]);
    }
    double mass = trapezoid(out, grid.h);
    if (!(mass > 0.0)) throw std::runtime_error("read_density_file: zero mass");
    for (auto& v : out) v /= mass;
    return out;
}

// --- run --------------------------------------------------------------------

namespace {

void write_series_csv(const std::string& path, const TimeSeries& s,
                      std::size_t stride, const char* value_name = "value") {
    std::ofstream os(path);
    os << "t," << value_name << "\n";
    for (std::size_t k = 0; k <= s.times.n_steps; k += stride) {
        os << fmt(s.times.t(k)) << "," << fmt(s.values[k]) << "\n";
    }
}

void write_density_rows_csv(const std::string& path, const Grid1D& g,
                            const std::vector<double>& times,
                            const std::vector<std::vector<double>>& rows) {
    std::ofstream os(path);
    os << "t,x,value\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t i = 0; i < g.n_nodes; ++i) {
            os << fmt(times[r]) << "," << fmt(g.x(i)) << "," << fmt(rows[r][i])
               << "\n";
        }
    }
}

void write_plot_script(const std::string& dir) {
    std::ofstream os(dir + "/plot_results.py");
    os << R"PY(#!/usr/bin/env python3
"""Render density snapshots and firing-rate overlays from the run CSVs."""
import csv
import os
import sys
from collections import defaultdict

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit("matplotlib is required to render the figures")

out = sys.argv[1] if len(sys.argv) > 1 else "."

def read_rows(name):
    path = os.path.join(out, name)
    if not os.path.exists(path):
        return None
    with open(path) as fh:
        return list(csv.DictReader(fh))

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(12, 4.5))
for label, fname in [("series", "density_series.csv"),
                     ("fpe", "density_fpe.csv"),
                     ("mc", "density_mc.csv")]:
    rows = read_rows(fname)
    if not rows:
        continue
    by_t = defaultdict(list)
    for r in rows:
        by_t[float(r["t"])].append((float(r["x"]), float(r["value"])))
    t_last = max(by_t)
    pts = sorted(by_t[t_last])
    ax1.plot([p[0] for p in pts], [p[1] for p in pts],
             label=f"{label} (t={t_last:g})",
             linestyle="--" if label == "mc" else "-")
ax1.set_xlabel("x"); ax1.set_ylabel("f(x, t)"); ax1.legend()
ax1.set_title("density snapshots")

for label, fname in [("ladder", "firing_series.csv"),
                     ("fpe", "firing_fpe.csv"),
                     ("mc", "firing_mc.csv")]:
    rows = read_rows(fname)
    if not rows:
        continue
    key = "value" if "value" in rows[0] else "N"
    ax2.plot([float(r["t"]) for r in rows], [float(r[key]) for r in rows],
             label=label, linestyle="--" if label == "mc" else "-")
ax2.set_xlabel("t"); ax2.set_ylabel("N(t)"); ax2.legend()
ax2.set_title("firing rate")

fig.tight_layout()
fig.savefig(os.path.join(out, "overview.png"), dpi=150)
print("wrote", os.path.join(out, "overview.png"))
)PY";
}

}  // namespace

std::vector<Metric> compare(const RunOutputs& out, const RunConfig& config) {
    std::vector<Metric> ms;
    auto push = [&](std::string name, double value, double threshold,
                    bool checked = true) {
        Metric m;
        m.name = std::move(name);
        m.value = value;
        m.threshold = threshold;
        m.checked = checked;
        m.pass = !checked || value <= threshold;
        ms.push_back(std::move(m));
    };
    const double T = config.T;

    const bool has_series = out.series.has_value();
    const bool has_fpe = out.fpe_run.has_value();
    const bool has_mc = out.ensemble.has_value();

    std::vector<double> series_row_T, fpe_row_T;
    if (has_series) {
        for (std::size_t r = 0; r < out.snapshot_times.size(); ++r) {
            if (std::abs(out.snapshot_times[r] - T) < 1e-12) {
                series_row_T = out.series->f[r];
            }
        }
    }
    if (has_fpe) {
        auto row = out.fpe_run->field.row(out.fpe_run->field.times.index_of(T));
        fpe_row_T.assign(row.begin(), row.end());
    }

    if (has_series && has_fpe && !series_row_T.empty()) {
        push("compare.l1_series_fpe_T", l1_distance(out.grid, series_row_T, fpe_row_T),
             5e-3);
        push("compare.sup_N_ladder_fpe",
             sup_distance(*out.firing_ladder, out.fpe_run->firing, 0.1, T), 2e-3);
    }
    if (has_series && out.f0 && out.fT1) {
        // Two independent routes to the first-passage density.
        push("compare.sup_fT1_volterra_flux",
             sup_distance(*out.fT1, out.f0->right_flux, 0.0, T), 1e-3);
    }
    if (has_mc) {
        const auto& ens = *out.ensemble;
        double n = static_cast<double>(ens.samples.size());
        double mean_jumps = 0.0, mean_sq = 0.0, p_t1 = 0.0;
        for (const auto& s : ens.samples) {
            mean_jumps += s.n_jumps;
            mean_sq += static_cast<double>(s.n_jumps) * s.n_jumps;
            if (s.n_jumps > 0) p_t1 += 1.0;
        }
        mean_jumps /= n;
        mean_sq /= n;
        p_t1 /= n;
        double sd_jumps = std::sqrt(std::max(0.0, mean_sq - mean_jumps * mean_jumps));
        if (has_fpe) {
            double ks = mc::ks_distance(
                ens, cdf_from_density(out.grid, fpe_row_T));
            push("compare.ks_mc_fpe", ks, 0.004 + 5e-3);
        }
        if (has_series && !series_row_T.empty()) {
            double ks = mc::ks_distance(
                ens, cdf_from_density(out.grid, series_row_T));
            push("compare.ks_mc_series", ks, 0.004 + 5e-3);
        }
        if (out.ladder) {
            double rho = out.ladder->rho;
            double sigma = std::sqrt(std::max(rho * (1.0 - rho), 1e-30) / n);
            push("compare.rho_vs_mc_pT1", std::abs(rho - p_t1), 3.0 * sigma);
        }
        if (out.firing_ladder) {
            double int_n = out.firing_ladder->integral();
            push("compare.intN_vs_mc_mean_jumps", std::abs(int_n - mean_jumps),
                 3.0 * sd_jumps / std::sqrt(n));
        }
    }
    return ms;
}

RunManifest run(const RunConfig& config, RunOutputs* outputs) {
    config.validate();
    RunManifest man;
    man.config = config;
    man.build_id = build_id();

    std::filesystem::create_directories(config.out_dir);
    const std::string dir = config.out_dir;

    RunOutputs local;
    RunOutputs& out = outputs ? *outputs : local;
    out.grid = Grid1D::truncated(config.L, config.h);
    out.march = TimeGrid::uniform(config.T, config.dt);
    out.snapshot_times = config.snapshot_times;

    const std::size_t k_warm = out.march.index_of(config.warm_t0);
    const std::size_t stride_tau = pick_stride(
        out.march.n_steps,
        static_cast<std::size_t>(std::llround(1e-3 / config.dt)), k_warm);
    const std::size_t stride_f = pick_stride(
        out.march.n_steps,
        static_cast<std::size_t>(std::llround(2.5e-3 / config.dt)));

    const bool density_initial = config.initial_kind == "density";
    std::vector<double> f_in;
    if (density_initial) {
        f_in = read_density_file(out.grid, config.initial_file);
    }

    auto has = [&](const char* p) {
        return std::find(config.pipelines.begin(), config.pipelines.end(), p) !=
               config.pipelines.end();
    };

    std::optional<sub::GeneralInitialResult> gi;

    if (has("series")) {
        Timer timer;
        auto m = fp::solve_M(out.march);
        if (m.clipped > 0) {
            man.warnings.push_back("volterra: clipped " +
                                   std::to_string(m.clipped) +
                                   " negative noise values");
        }
        out.fT1 = fp::fT1_from_M(m);
        out.ladder = fp::build_ladder(*out.fT1, config.ladder_tol,
                                      config.ladder_cap);
        out.firing_ladder = fp::firing_rate(*out.ladder);
        out.f0 = sub::f0_pde(out.grid, out.march, config.warm_t0, stride_tau);
        if (!density_initial) {
            out.series = sub::evaluate_series(*out.f0, *out.ladder,
                                              config.snapshot_times, {1, 2});
        } else {
            sub::GeneralInitialOptions gopts;
            gopts.eps0 = config.eps0;
            gopts.tol = config.ladder_tol;
            gopts.n_cap = config.ladder_cap;
            gopts.store_stride = stride_tau;
            gopts.out_times = config.snapshot_times;
            gi = sub::general_initial(f_in, out.grid, out.march, *out.f0,
                                      *out.fT1, gopts);
            sub::SeriesEval ev;
            ev.grid = out.grid;
            ev.out_times = config.snapshot_times;
            ev.f = gi->f_rows;
            out.series = std::move(ev);
            out.firing_ladder = gi->firing_nu;
            out.ladder = gi->ladder_nu;
        }
        man.timings["series"] = timer.seconds();

        write_density_rows_csv(dir + "/density_series.csv", out.grid,
                               out.series->out_times, out.series->f);
        write_series_csv(dir + "/firing_series.csv", *out.firing_ladder,
                         stride_tau, "N");
        {
            std::ofstream os(dir + "/ladder.csv");
            os << "t,n,value\n";
            for (std::size_t r = 0; r < out.ladder->rungs.size(); ++r) {
                const auto& rung = out.ladder->rungs[r];
                for (std::size_t k = 0; k <= rung.times.n_steps;
                     k += stride_tau) {
                    os << fmt(rung.times.t(k)) << "," << r + 1 << ","
                       << fmt(rung.values[k]) << "\n";
                }
            }
        }
        man.metrics.push_back(
            {"series.rho_T", out.ladder->rho, 1.0 - 1e-6, true,
             out.ladder->rho > 0.0 && out.ladder->rho < 1.0 - 1e-6});
        auto [ratio, theta] = decay_fit(out.ladder->masses);
        man.metrics.push_back({"series.ladder_decay_ratio", ratio,
                               out.ladder->rho + 0.02, true,
                               ratio <= out.ladder->rho + 0.02});
        man.metrics.push_back({"series.theta_hat", theta, 0.0, false, true});
        man.metrics.push_back(
            {"series.tail_bound", out.series->tail_bound, 0.0, false, true});
        if (!density_initial) {
            double worst_mass = 0.0;
            for (const auto& row : out.series->f) {
                worst_mass = std::max(
                    worst_mass, std::abs(trapezoid(row, out.grid.h) - 1.0));
            }
            man.metrics.push_back({"series.mass_error", worst_mass, 1e-4, true,
                                   worst_mass <= 1e-4});
        }
    }

    if (has("fpe")) {
        Timer timer;
        fpe::SolveOptions sopts;
        sopts.snapshot_stride = stride_f;
        if (density_initial) {
            sopts.delta_start = false;
            sopts.f_in = f_in;
        } else {
            sopts.delta_start = true;
            sopts.warm_t0 = config.warm_t0;
        }
        out.fpe_run = fpe::solve(out.grid, out.march, fpe::Mode::flux_shift,
                                 sopts);
        man.timings["fpe"] = timer.seconds();

        const auto& field = out.fpe_run->field;
        std::vector<std::vector<double>> rows;
        for (double t : config.snapshot_times) {
            auto r = field.row(field.times.index_of(t));
            rows.emplace_back(r.begin(), r.end());
        }
        write_density_rows_csv(dir + "/density_fpe.csv", out.grid,
                               config.snapshot_times, rows);
        write_series_csv(dir + "/firing_fpe.csv", out.fpe_run->firing, stride_f,
                         "N");

        double mass_err = 0.0;
        for (double v : out.fpe_run->mass.values) {
            mass_err = std::max(mass_err, std::abs(v - 1.0));
        }
        man.metrics.push_back(
            {"fpe.mass_error", mass_err, 1e-10, true, mass_err <= 1e-10});
        double undershoot = std::max(0.0, -out.fpe_run->min_value);
        man.metrics.push_back(
            {"fpe.undershoot", undershoot, 1e-8, true, undershoot <= 1e-8});
        man.metrics.push_back({"fpe.flux_mismatch", out.fpe_run->max_flux_mismatch,
                               1e-6, true,
                               out.fpe_run->max_flux_mismatch <= 1e-6});
    }

    if (has("mc")) {
        Timer timer;
        mc::PathConfig mcfg;
        mcfg.t_end = config.T;
        mcfg.substep = config.mc_substep;
        mcfg.seed = config.seed;
        mcfg.n_paths = config.mc_paths;
        mcfg.record_jump_times = true;
        if (density_initial) {
            mc::InitialDensity init;
            init.grid = out.grid;
            init.pdf = f_in;
            init.eps0 = config.eps0;
            mcfg.initial_density = std::move(init);
        }
        out.ensemble = mc::simulate_ensemble(mcfg);
        man.timings["mc"] = timer.seconds();

        const auto& ens = *out.ensemble;
        const double n = static_cast<double>(ens.samples.size());
        // Pooled jump-time histogram estimates N(t).
        TimeGrid bins = TimeGrid::uniform(config.T, config.T / 100.0);
        TimeSeries n_hat(bins);
        double mean_jumps = 0.0;
        for (const auto& s : ens.samples) {
            mean_jumps += s.n_jumps;
            for (double tj : s.jump_times) {
                auto j = static_cast<std::size_t>(std::ceil(tj / bins.dt - 1e-12));
                j = std::clamp<std::size_t>(j, 1, bins.n_steps);
                n_hat.values[j] += 1.0;
            }
        }
        mean_jumps /= n;
        for (auto& v : n_hat.values) v /= n * bins.dt;
        write_series_csv(dir + "/firing_mc.csv", n_hat, 1, "N");

        // Terminal-density histogram.
        const double bw = 0.05;
        auto nb = static_cast<std::size_t>(std::llround((config.L + 1.0) / bw));
        std::vector<double> hist(nb, 0.0);
        for (const auto& s : ens.samples) {
            auto j = static_cast<std::size_t>((s.x_end + config.L) / bw);
            if (j < nb) hist[j] += 1.0;
        }
        {
            std::ofstream os(dir + "/density_mc.csv");
            os << "t,x,value\n";
            for (std::size_t j = 0; j < nb; ++j) {
                os << fmt(config.T) << ","
                   << fmt(-config.L + (j + 0.5) * bw) << ","
                   << fmt(hist[j] / (n * bw)) << "\n";
            }
        }
        man.metrics.push_back({"mc.mean_jumps", mean_jumps, 0.0, false, true});
        double p_t1 = 0.0;
        for (const auto& s : ens.samples) {
            if (s.n_jumps > 0) p_t1 += 1.0;
        }
        man.metrics.push_back({"mc.p_T1_le_T", p_t1 / n, 0.0, false, true});
        if (config.dump_ensemble) {
            mc::write_ensemble(ens, dir + "/ensemble.bin");
        }
    }

    {
        Timer timer;
        auto cross = compare(out, config);
        man.metrics.insert(man.metrics.end(), cross.begin(), cross.end());
        man.timings["compare"] = timer.seconds();
    }

    for (const auto& m : man.metrics) {
        if (m.checked && !m.pass) man.all_pass = false;
    }

    {
        std::ofstream os(dir + "/metrics.csv");
        os << "name,value,threshold,checked,pass\n";
        for (const auto& m : man.metrics) {
            os << m.name << "," << fmt(m.value) << ","
               << (m.checked ? fmt(m.threshold) : std::string("")) << ","
               << (m.checked ? "1" : "0") << "," << (m.pass ? "1" : "0")
               << "\n";
        }
    }
    man.write_json(dir + "/manifest.json");
    write_plot_script(dir);
    return man;
}

// --- convergence studies ----------------------------------------------------

namespace {

// Manufactured solution for the absorbing operator: f*(x,t) = e^{-t} g(x)
// with g = (1-x)^3 (x+L)^3.  The triple zeros keep both boundary faces
// consistent at second order: the one-sided outflux stencil at x = 1 and the
// zero-flux truncation face at x = -L (which needs f'' to vanish there, or
// the dropped face flux is O(h) and degrades the global order to one).
struct Manufactured {
    double L;
    double g(double x) const {
        double a = 1.0 - x, b = x + L;
        return a * a * a * b * b * b;
    }
    double gp(double x) const {
        double a = 1.0 - x, b = x + L;
        return 3.0 * a * a * b * b * (a - b);
    }
    double gpp(double x) const {
        double a = 1.0 - x, b = x + L;
        return 6.0 * a * b * b * b - 18.0 * a * a * b * b + 6.0 * a * a * a * b;
    }
    double value(double x, double t) const { return std::exp(-t) * g(x); }
    // Source so that f* solves f_t = (x f)_x + f_xx + S:
    // S = f*_t - (x f*)_x - f*_xx = e^{-t} (-2 g - x g' - g'').
    double source(double x, double t) const {
        return std::exp(-t) * (-2.0 * g(x) - x * gp(x) - gpp(x));
    }
};

}  // namespace

std::vector<ConvergenceResult> convergence_study(const RunConfig& base,
                                                 int levels) {
    if (levels < 3) throw std::invalid_argument("convergence_study: levels >= 3");
    std::vector<ConvergenceResult> results;

    // 1. Manufactured-solution spatial order (absorbing mode, dt ~ h^2 so the
    //    temporal error refines twice as fast).
    {
        ConvergenceResult res;
        res.name = "mms_spatial";
        const double L = 2.0, T = 0.5;
        Manufactured mfg{L};
        for (int lev = 0; lev < levels; ++lev) {
            double h = 1.0 / (25.0 * std::pow(2.0, lev));
            Grid1D grid = Grid1D::truncated(L, h);
            auto n_steps = static_cast<std::size_t>(
                std::llround(T / (0.1 * h * h)));
            TimeGrid times = TimeGrid::uniform(T, T / n_steps);
            fpe::SolveOptions opts;
            opts.delta_start = false;
            opts.f_in.resize(grid.n_nodes);
            for (std::size_t i = 0; i < grid.n_nodes; ++i) {
                opts.f_in[i] = mfg.value(grid.x(i), 0.0);
            }
            opts.snapshot_stride = n_steps;
            opts.source = [&](double t, std::span<double> s) {
                for (std::size_t j = 0; j < s.size(); ++j) {
                    s[j] = mfg.source(grid.x(j + 1), t);
                }
            };
            auto solved = fpe::solve(grid, times, fpe::Mode::absorbing, opts);
            auto row = solved.field.row(solved.field.times.n_nodes() - 1);
            double err = 0.0;
            for (std::size_t i = 0; i < grid.n_nodes; ++i) {
                err = std::max(err, std::abs(row[i] - mfg.value(grid.x(i), T)));
            }
            res.resolution.push_back(h);
            res.error.push_back(err);
        }
        fit_loglog(res.resolution, res.error, res.order, res.r2);
        res.monotone = std::is_sorted(res.error.rbegin(), res.error.rend());
        results.push_back(std::move(res));
    }

    // 2. Backward-Euler temporal order on the flux-shift problem.
    {
        ConvergenceResult res;
        res.name = "backward_euler_temporal";
        const double T = 1.0, warm = 4e-3;
        Grid1D grid = Grid1D::truncated(base.L, 1.0 / 100.0);
        auto run_level = [&](double dt) {
            fpe::SolveOptions opts;
            opts.warm_t0 = warm;
            opts.snapshot_stride = TimeGrid::uniform(T, dt).n_steps;
            auto solved = fpe::solve(grid, TimeGrid::uniform(T, dt),
                                     fpe::Mode::flux_shift, opts);
            auto row = solved.field.row(solved.field.times.n_nodes() - 1);
            return std::vector<double>(row.begin(), row.end());
        };
        auto ref = run_level(1.25e-4);
        for (int lev = 0; lev < levels; ++lev) {
            double dt = 4e-3 / std::pow(2.0, lev);
            auto row = run_level(dt);
            res.resolution.push_back(dt);
            res.error.push_back(l1_distance(grid, row, ref));
        }
        fit_loglog(res.resolution, res.error, res.order, res.r2);
        res.monotone = std::is_sorted(res.error.rbegin(), res.error.rend());
        results.push_back(std::move(res));
    }

    // 3. Volterra marching order (against a fine reference).
    {
        ConvergenceResult res;
        res.name = "volterra_temporal";
        const double T = 1.0;
        auto ref = fp::fT1_from_M(fp::solve_M(TimeGrid::uniform(T, 5e-5)));
        for (int lev = 0; lev < levels; ++lev) {
            double dt = 8e-4 / std::pow(2.0, lev);
            auto fT1 = fp::fT1_from_M(fp::solve_M(TimeGrid::uniform(T, dt)));
            res.resolution.push_back(dt);
            res.error.push_back(sup_distance(fT1, ref, 0.0, T));
        }
        fit_loglog(res.resolution, res.error, res.order, res.r2);
        res.monotone = std::is_sorted(res.error.rbegin(), res.error.rend());
        results.push_back(std::move(res));
    }
    return results;
}

}  // namespace lif::harness
