#include "mpc/bench_sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mpc/error.hpp"
#include "mpc/rng.hpp"
#include "mpc/similarity.hpp"

namespace mpc {
namespace {

volatile double g_sink = 0.0;

template <typename F>
double seconds_per_call(F&& f, const SimBenchConfig& cfg) {
    using clock = std::chrono::steady_clock;
    std::vector<double> runs;
    for (std::size_t r = 0; r < cfg.repeats; ++r) {
        std::size_t calls = 0;
        const auto start = clock::now();
        double elapsed = 0.0;
        do {
            g_sink = g_sink + f(calls++);
            elapsed = std::chrono::duration<double>(clock::now() - start).count();
        } while (elapsed < cfg.min_seconds);
        runs.push_back(elapsed / static_cast<double>(calls));
    }
    std::nth_element(runs.begin(), runs.begin() + runs.size() / 2, runs.end());
    return runs[runs.size() / 2];
}

}  // namespace

std::vector<SimTiming> bench_similarities(std::span<const std::size_t> js, const SimBenchConfig& cfg) {
    if (cfg.dim == 0 || cfg.repeats == 0) throw Error(ErrorCode::InvalidArgument, "dim and repeats must be positive");
    Rng rng(stream_key({cfg.seed, 0xbe7c}));
    CompositeGaussian c;
    ProbEmbedding t;
    for (std::size_t d = 0; d < cfg.dim; ++d) {
        c.mean.push_back(rng.normal());
        c.var.push_back(std::exp(0.3 * rng.normal()));
        t.mean.push_back(rng.normal());
        t.log_var.push_back(0.3 * rng.normal());
    }
    std::vector<SimTiming> out;
    for (std::size_t j : js) {
        if (j == 0) throw Error(ErrorCode::InvalidArgument, "J must be positive");
        SimConfig sc{static_cast<std::uint32_t>(j), cfg.seed};
        SimTiming timing;
        timing.j = j;
        if (cfg.include_sampling) {
            timing.mpc_seconds = seconds_per_call([&](std::size_t i) { return sim_mpc(c, t, sc, i); }, cfg);
            timing.pairwise_seconds =
                seconds_per_call([&](std::size_t i) { return sim_mc_pairwise(c, t, sc, i); }, cfg);
        } else {
            const Matrix ts = reparameterize(t, noise_matrix(cfg.dim, sc, 1));
            const Matrix cs = reparameterize(c, noise_matrix(cfg.dim, sc, 2));
            timing.mpc_seconds = seconds_per_call([&](std::size_t) { return mpc_score(c, ts); }, cfg);
            timing.pairwise_seconds = seconds_per_call([&](std::size_t) { return pairwise_score(cs, ts); }, cfg);
        }
        out.push_back(timing);
    }
    return out;
}

std::optional<double> loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(ErrorCode::InvalidArgument, "x and y differ in length");
    if (x.size() < 2) return std::nullopt;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0) return std::nullopt;
    return sxy / sxx;
}

}  // namespace mpc
