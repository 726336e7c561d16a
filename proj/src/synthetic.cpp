#include "odmn/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "odmn/rng.hpp"

namespace odmn {

namespace {
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

FeatureSchema synthetic_schema(const SyntheticConfig& config) {
    FeatureSchema s;
    std::vector<std::string> channels;
    for (int i = 0; i < 8; ++i) channels.push_back("ch" + std::to_string(i));
    std::vector<std::string> platforms;
    for (int i = 0; i < 12; ++i) platforms.push_back("pf" + std::to_string(i));
    s.categorical = {{"channel", channels}, {"platform", platforms}};
    s.numeric = {{"recency_score", 16}, {"frequency_score", 16}, {"monetary_score", 16},
                 {"noise_score", 16}};
    s.sequence = {{"active_minutes", 7, 16}};
    s.horizons = config.horizons;
    return s;
}

Dataset generate_synthetic(const SyntheticConfig& config) {
    if (config.n_users < 1) throw ConfigError("generate_synthetic: n_users must be >= 1");
    if (config.zero_rate < 0.0 || config.zero_rate >= 1.0)
        throw ConfigError("generate_synthetic: zero_rate must be in [0, 1)");
    if (config.cap_fraction <= 0.0 || config.cap_fraction > 1.0)
        throw ConfigError("generate_synthetic: cap_fraction must be in (0, 1]");
    if (config.horizons.empty()) throw ConfigError("generate_synthetic: no horizons");
    for (size_t i = 0; i < config.horizons.size(); ++i) {
        if (config.horizons[i] < 1) throw ConfigError("generate_synthetic: horizons must be >= 1");
        if (i > 0 && config.horizons[i] <= config.horizons[i - 1])
            throw ConfigError("generate_synthetic: horizons must be strictly increasing");
    }

    const int max_horizon = config.horizons.back();
    std::vector<int> caps;
    for (int h : config.horizons)
        caps.push_back(std::max(1, static_cast<int>(std::llround(config.cap_fraction * h))));

    Dataset ds;
    ds.rows.reserve(static_cast<size_t>(config.n_users));
    for (int64_t u = 0; u < config.n_users; ++u) {
        // One independent stream per row, keyed by (seed, row index).
        Rng rng(mix64(config.seed, static_cast<uint64_t>(u)));

        const bool inactive = rng.bernoulli(config.zero_rate);
        const double z = inactive ? 0.0 : std::exp(config.log_mean + config.log_sigma * rng.normal());
        const double p = inactive
                             ? 0.0
                             : config.p_min + (1.0 - config.p_min) *
                                                  sigmoid(config.steepness * std::log(z) + config.offset);

        FeatureRow row;

        // Informative features: noisy monotone transforms of z. Inactive
        // users sit at the z -> 0 limit of each transform.
        const double s = std::log1p(z);
        const double recency = s + 0.3 * rng.normal();
        const double frequency = z / (1.0 + z) + 0.05 * rng.normal();
        const double monetary = std::sqrt(z) + 0.5 * rng.normal();
        const double noise = rng.normal();
        row.numeric = {recency, frequency, monetary, noise};

        const int channel =
            std::clamp(static_cast<int>(sigmoid(1.5 * (s - 1.0) + 0.5 * rng.normal()) * 8.0), 0, 7);
        const int platform = rng.uniform_int(12);
        row.categorical = {"ch" + std::to_string(channel), "pf" + std::to_string(platform)};

        // Day-level activity for the 7-day observation window.
        std::vector<double> minutes(7, 0.0);
        for (int d = 0; d < 7; ++d)
            if (!inactive && rng.bernoulli(p)) minutes[d] = rng.poisson(10.0 + 110.0 * p);
        row.sequence = {std::move(minutes)};

        // Cumulative active days over the label window.
        row.labels.assign(config.horizons.size(), 0.0);
        if (!inactive) {
            int active_days = 0;
            size_t t = 0;
            for (int day = 1; day <= max_horizon; ++day) {
                if (rng.bernoulli(p)) ++active_days;
                while (t < config.horizons.size() && config.horizons[t] == day) {
                    row.labels[t] = std::min(active_days, caps[t]);
                    ++t;
                }
            }
        }
        ds.rows.push_back(std::move(row));
    }
    return ds;
}

}  // namespace odmn
