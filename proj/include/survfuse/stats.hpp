#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "survfuse/error.hpp"
#include "survfuse/rng.hpp"

namespace survfuse {

// Type-7 quantile (linear interpolation between order statistics) of an
// already sorted sample.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw StatError("quantile: empty sample");
    if (p < 0.0 || p > 1.0) throw ConfigError("quantile: p outside [0,1]");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - std::floor(h)) * (sorted[hi] - sorted[lo]);
}

struct BootstrapResult {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t skipped = 0; // degenerate resamples
};

// Percentile bootstrap over subjects. `metric` maps a with-replacement index
// sample to a statistic; it may throw StatError on degenerate resamples
// (those are skipped). More than half skipped is an error.
inline BootstrapResult bootstrap_ci(std::size_t n,
                                    const std::function<double(const std::vector<std::size_t>&)>& metric,
                                    std::size_t resamples, std::uint64_t seed,
                                    double level = 0.95) {
    if (n == 0) throw DataError("bootstrap: empty cohort");
    if (resamples == 0) throw ConfigError("bootstrap: need at least 1 resample");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("bootstrap: level outside (0,1)");
    Rng rng(seed);
    std::vector<double> stats;
    stats.reserve(resamples);
    std::vector<std::size_t> idx(n);
    std::size_t skipped = 0;
    for (std::size_t r = 0; r < resamples; ++r) {
        for (std::size_t i = 0; i < n; ++i) idx[i] = rng.below(n);
        try {
            const double v = metric(idx);
            if (!std::isfinite(v)) throw StatError("non-finite statistic");
            stats.push_back(v);
        } catch (const StatError&) {
            ++skipped;
        }
    }
    if (skipped * 2 > resamples)
        throw StatError("bootstrap: " + std::to_string(skipped) + " of " +
                        std::to_string(resamples) + " resamples degenerate");
    std::sort(stats.begin(), stats.end());
    const double alpha = (1.0 - level) / 2.0;
    return {quantile_sorted(stats, alpha), quantile_sorted(stats, 1.0 - alpha), skipped};
}

// Exact one-sided paired test via sign flips: enumerates all 2^k sign
// assignments of the paired differences and counts those whose mean is at
// least the observed mean. The identity assignment is always counted, so
// the smallest attainable p is 1/2^k.
inline double paired_sign_flip_p(const std::vector<double>& delta) {
    const std::size_t k = delta.size();
    if (k < 2 || k > 20)
        throw ConfigError("sign-flip test: need between 2 and 20 pairs, got " +
                          std::to_string(k));
    for (std::size_t i = 0; i < k; ++i)
        if (!std::isfinite(delta[i]))
            throw StatError("sign-flip test: non-finite difference at index " +
                            std::to_string(i));
    double observed = 0.0;
    for (double d : delta) observed += d;
    std::uint64_t count = 0;
    const std::uint64_t total = std::uint64_t{1} << k;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i)
            s += (mask >> i) & 1 ? -delta[i] : delta[i];
        if (s >= observed) ++count;
    }
    return static_cast<double>(count) / static_cast<double>(total);
}

inline double mean(const std::vector<double>& x) {
    if (x.empty()) throw StatError("mean: empty sample");
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

inline double sample_std(const std::vector<double>& x) {
    if (x.size() < 2) throw StatError("std: need at least 2 values");
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / (static_cast<double>(x.size()) - 1.0));
}

} // namespace survfuse
