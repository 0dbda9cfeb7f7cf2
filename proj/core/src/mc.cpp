#include "lif/mc.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>
#include <thread>

namespace lif::mc {

namespace {

struct SplitMix64 {
    std::uint64_t state;
    explicit SplitMix64(std::uint64_t s) : state(s) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
};

/// xoshiro256++ with a splitmix64-expanded per-path seed.
class Xoshiro256pp {
  public:
    using result_type = std::uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~0ULL; }
    Xoshiro256pp(std::uint64_t seed, std::uint64_t stream) {
        SplitMix64 sm(seed + 0x9E3779B97F4A7C15ULL * (stream + 1));
        for (auto& w : s_) w = sm.next();
    }
    result_type operator()() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
};

/// Inverse-CDF table on the f_in grid (linear interpolation of the
/// trapezoid cumulative).
struct InitialSampler {
    std::vector<double> xs, cdf;
    explicit InitialSampler(const InitialDensity& d) {
        const auto& g = d.grid;
        if (d.pdf.size() != g.n_nodes) {
            throw std::invalid_argument("InitialDensity: pdf size mismatch");
        }
        double mass = trapezoid(d.pdf, g.h);
        if (std::abs(mass - 1.0) > 1e-10) {
            throw std::invalid_argument("InitialDensity: mass must be 1 +- 1e-10");
        }
        if (!(d.eps0 > 0.0)) {
            throw std::invalid_argument("InitialDensity: eps0 must be > 0");
        }
        xs.resize(g.n_nodes);
        cdf.resize(g.n_nodes);
        double acc = 0.0;
        cdf[0] = 0.0;
        xs[0] = g.x(0);
        for (std::size_t i = 1; i < g.n_nodes; ++i) {
            if (d.pdf[i] < -1e-12) {
                throw std::invalid_argument("InitialDensity: pdf must be >= 0");
            }
            if (d.pdf[i] > 0.0 && g.x(i) > 1.0 - d.eps0 + 1e-12) {
                throw std::invalid_argument(
                    "InitialDensity: support exceeds 1 - eps0");
            }
            acc += 0.5 * (d.pdf[i - 1] + d.pdf[i]) * g.h;
            xs[i] = g.x(i);
            cdf[i] = std::min(acc / mass, 1.0);
        }
        cdf.back() = 1.0;
    }
    template <class Eng>
    double draw(Eng& eng, std::uniform_real_distribution<double>& unif) const {
        double u = unif(eng);
        auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        std::size_t j = static_cast<std::size_t>(it - cdf.begin());
        if (j == 0) return xs.front();
        double c0 = cdf[j - 1], c1 = cdf[j];
        double w = (c1 > c0) ? (u - c0) / (c1 - c0) : 0.0;
        return xs[j - 1] + w * (xs[j] - xs[j - 1]);
    }
};

PathSample simulate_one(std::uint64_t path_index, const PathConfig& cfg,
                        const InitialSampler* sampler) {
    Xoshiro256pp eng(cfg.seed, path_index);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    PathSample out;
    double x = sampler ? sampler->draw(eng, unif) : cfg.initial_point;
    double t = 0.0;
    const double T = cfg.t_end;
    const double F = cfg.fire_level;
    const double step = cfg.substep;
    const double a_full = std::exp(-step);
    const double sd_full = std::sqrt(-std::expm1(-2.0 * step));
    const bool bounded = std::isfinite(F);

    while (T - t > 1e-15) {
        double d = std::min(step, T - t);
        double a, sd;
        if (d == step) {
            a = a_full;
            sd = sd_full;
        } else {
            if (d <= 0.0) break;
            a = std::exp(-d);
            sd = std::sqrt(-std::expm1(-2.0 * d));
        }
        double g = normal(eng);
        if (!std::isfinite(g)) throw std::runtime_error("simulate_path: RNG NaN");
        double xn = a * x + sd * g;
        bool hit = false;
        double t_hit = 0.0;
        if (bounded) {
            if (xn >= F) {
                hit = true;
                t_hit = t + d * (F - x) / (xn - x);
            } else {
                // Drift-frozen Brownian bridge (sigma^2 = 2): crossing
                // probability exp(-(F-x)(F-xn)/d).  Skip the draw when the
                // probability is below 1e-18.
                double q = (F - x) * (F - xn);
                if (q < 41.5 * d && unif(eng) < std::exp(-q / d)) {
                    hit = true;
                    t_hit = t + 0.5 * d;
                }
            }
        }
        if (hit) {
            if (t_hit >= T) t_hit = std::nextafter(T, 0.0);
            ++out.n_jumps;
            if (cfg.record_jump_times) out.jump_times.push_back(t_hit);
            x = 0.0;
            t = t_hit;
        } else {
            x = xn;
            t += d;
        }
    }
    out.x_end = x;
    return out;
}

}  // namespace

void PathConfig::validate() const {
    if (!(t_end >= 0.0)) throw std::invalid_argument("PathConfig: t_end >= 0");
    if (!(substep > 0.0)) throw std::invalid_argument("PathConfig: substep > 0");
    if (n_paths == 0) throw std::invalid_argument("PathConfig: n_paths >= 1");
    if (!initial_density && !(initial_point < fire_level)) {
        throw std::invalid_argument("PathConfig: initial point must be below the threshold");
    }
}

PathSample simulate_path(std::uint64_t path_index, const PathConfig& cfg) {
    cfg.validate();
    if (cfg.t_end == 0.0) {
        PathSample s;
        s.x_end = cfg.initial_point;
        return s;
    }
    if (cfg.initial_density) {
        InitialSampler sampler(*cfg.initial_density);
        return simulate_one(path_index, cfg, &sampler);
    }
    return simulate_one(path_index, cfg, nullptr);
}

PathEnsemble simulate_ensemble(const PathConfig& cfg, unsigned n_threads) {
    cfg.validate();
    PathEnsemble ens;
    ens.config = cfg;
    ens.samples.resize(cfg.n_paths);
    std::optional<InitialSampler> sampler;
    if (cfg.initial_density) sampler.emplace(*cfg.initial_density);
    const InitialSampler* sp = sampler ? &*sampler : nullptr;

    auto work = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            if (cfg.t_end == 0.0) {
                ens.samples[i].x_end =
                    sp ? simulate_one(i, cfg, sp).x_end : cfg.initial_point;
            } else {
                ens.samples[i] = simulate_one(i, cfg, sp);
            }
        }
    };
    unsigned hw = n_threads ? n_threads : std::thread::hardware_concurrency();
    if (hw <= 1 || cfg.n_paths < 1024) {
        work(0, cfg.n_paths);
    } else {
        std::vector<std::thread> pool;
        std::size_t chunk = (cfg.n_paths + hw - 1) / hw;
        for (unsigned w = 0; w < hw; ++w) {
            std::size_t lo = std::min<std::size_t>(w * chunk, cfg.n_paths);
            std::size_t hi = std::min(lo + chunk, cfg.n_paths);
            if (lo < hi) pool.emplace_back(work, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    return ens;
}

double empirical_subcdf(const PathEnsemble& ens, std::uint32_t n, double x) {
    std::size_t count = 0;
    for (const auto& s : ens.samples) {
        if (s.n_jumps == n && s.x_end <= x) ++count;
    }
    return static_cast<double>(count) / static_cast<double>(ens.samples.size());
}

TimeSeries empirical_hitting_histogram(const PathEnsemble& ens, std::uint32_t k,
                                       const TimeGrid& bins, bool* empty) {
    if (k < 1) throw std::invalid_argument("empirical_hitting_histogram: k >= 1");
    if (!ens.config.record_jump_times) {
        throw std::invalid_argument(
            "empirical_hitting_histogram: jump times were not recorded");
    }
    TimeSeries out(bins);
    std::size_t hits = 0;
    const double width = bins.dt;
    for (const auto& s : ens.samples) {
        if (s.jump_times.size() < k) continue;
        double tk = s.jump_times[k - 1];
        auto j = static_cast<std::size_t>(std::ceil(tk / width - 1e-12));
        j = std::clamp<std::size_t>(j, 1, bins.n_steps);
        out.values[j] += 1.0;
        ++hits;
    }
    if (empty) *empty = (hits == 0);
    const double scale =
        1.0 / (static_cast<double>(ens.samples.size()) * width);
    for (auto& v : out.values) v *= scale;
    return out;
}

double ks_distance(const PathEnsemble& ens,
                   const std::function<double(double)>& cdf) {
    std::vector<double> xs;
    xs.reserve(ens.samples.size());
    for (const auto& s : ens.samples) xs.push_back(s.x_end);
    std::sort(xs.begin(), xs.end());
    const auto n = static_cast<double>(xs.size());
    double d = 0.0;
    double prev_c = -1e300;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double c = cdf(xs[i]);
        if (c < prev_c - 1e-12) {
            throw std::invalid_argument("ks_distance: cdf is not monotone");
        }
        prev_c = std::max(prev_c, c);
        d = std::max(d, std::abs(c - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - c));
    }
    return d;
}

std::uint64_t config_hash(const PathConfig& cfg) {
    auto mix = [](std::uint64_t h, std::uint64_t v) {
        h ^= v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
        return h;
    };
    auto bits = [](double v) {
        std::uint64_t u;
        std::memcpy(&u, &v, sizeof(u));
        return u;
    };
    std::uint64_t h = 0xC0FFEE5EED5EEDULL;
    h = mix(h, bits(cfg.t_end));
    h = mix(h, bits(cfg.substep));
    h = mix(h, cfg.seed);
    h = mix(h, cfg.n_paths);
    h = mix(h, cfg.record_jump_times ? 1 : 0);
    h = mix(h, bits(cfg.initial_point));
    h = mix(h, bits(cfg.fire_level));
    if (cfg.initial_density) {
        for (double v : cfg.initial_density->pdf) h = mix(h, bits(v));
    }
    return h;
}

namespace {
constexpr char kMagic[8] = {'L', 'I', 'F', 'E', 'N', 'S', '1', '\0'};
}

void write_ensemble(const PathEnsemble& ens, const std::string& path) {
    if (!ens.config.record_jump_times) {
        throw std::invalid_argument(
            "write_ensemble: jump times must be recorded for the binary dump");
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_ensemble: cannot open " + path);
    os.write(kMagic, sizeof(kMagic));
    std::uint64_t hash = config_hash(ens.config);
    std::uint64_t n = ens.samples.size();
    os.write(reinterpret_cast<const char*>(&hash), sizeof(hash));
    os.write(reinterpret_cast<const char*>(&n), sizeof(n));
    for (const auto& s : ens.samples) {
        os.write(reinterpret_cast<const char*>(&s.x_end), sizeof(double));
        os.write(reinterpret_cast<const char*>(&s.n_jumps), sizeof(std::uint32_t));
        std::uint32_t nj = static_cast<std::uint32_t>(s.jump_times.size());
        os.write(reinterpret_cast<const char*>(s.jump_times.data()),
                 static_cast<std::streamsize>(nj * sizeof(double)));
    }
    if (!os) throw std::runtime_error("write_ensemble: write failed");
}

PathEnsemble read_ensemble(const std::string& path, std::uint64_t* hash_out) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_ensemble: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("read_ensemble: bad magic");
    }
    std::uint64_t hash = 0, n = 0;
    is.read(reinterpret_cast<char*>(&hash), sizeof(hash));
    is.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (hash_out) *hash_out = hash;
    PathEnsemble ens;
    ens.config.n_paths = n;
    ens.config.record_jump_times = true;
    ens.samples.resize(n);
    for (auto& s : ens.samples) {
        is.read(reinterpret_cast<char*>(&s.x_end), sizeof(double));
        is.read(reinterpret_cast<char*>(&s.n_jumps), sizeof(std::uint32_t));
        s.jump_times.resize(s.n_jumps);
        is.read(reinterpret_cast<char*>(s.jump_times.data()),
                static_cast<std::streamsize>(s.n_jumps * sizeof(double)));
    }
    if (!is) throw std::runtime_error("read_ensemble: truncated file");
    return ens;
}

}  // namespace lif::mc
