#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mpc {

struct SimTiming {
    std::size_t j = 0;
    double mpc_seconds = 0.0;       // per call
    double pairwise_seconds = 0.0;  // per call
};

struct SimBenchConfig {
    std::size_t dim = 64;
    std::uint64_t seed = 0;
    // Minimum wall time per measurement; the median of `repeats` is kept.
    double min_seconds = 0.02;
    std::size_t repeats = 5;
    // false: time only the scoring kernels on pre-drawn samples.
    // true: time the full calls including noise generation.
    bool include_sampling = false;
};

std::vector<SimTiming> bench_similarities(std::span<const std::size_t> js, const SimBenchConfig& cfg);

// Least-squares slope of log(y) against log(x); empty with fewer than two points.
std::optional<double> loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace mpc
