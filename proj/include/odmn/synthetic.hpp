#pragma once

#include <cstdint>

#include "odmn/data.hpp"

namespace odmn {

/// Zero-inflated long-tail generator. Each user is totally inactive with
/// probability zero_rate; otherwise draws a latent engagement z = exp(Normal)
/// and is active on each day independently with rate
///   p = p_min + (1 - p_min) * sigmoid(steepness * log z + offset).
/// The label for horizon N is the cumulative active-day count over the first
/// N days, clamped at cap_fraction * N, so labels are non-decreasing across
/// horizons with a spike at zero and a raised spike at the cap.
struct SyntheticConfig {
    int64_t n_users = 10000;
    std::vector<int> horizons = {30, 90, 180, 365};
    double zero_rate = 0.6;
    double cap_fraction = 1.0;  // per-horizon cap = round(cap_fraction * N)
    uint64_t seed = 1;

    // latent engagement law
    double log_mean = 0.0;
    double log_sigma = 1.0;
    double steepness = 3.0;
    double offset = -2.5;
    double p_min = 0.02;
};

FeatureSchema synthetic_schema(const SyntheticConfig& config);
Dataset generate_synthetic(const SyntheticConfig& config);

}  // namespace odmn
