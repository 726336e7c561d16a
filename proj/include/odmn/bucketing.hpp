#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "odmn/errors.hpp"

namespace odmn {

/// One value range inside a sub-distribution. Non-singleton buckets cover
/// (lower, upper]; a singleton bucket covers exactly one value. train_min /
/// train_max are the observed label min/max inside the bucket and define the
/// bias coefficient: bias = (ltv - train_min) / (train_max - train_min).
struct Bucket {
    double lower = 0.0;
    double upper = 0.0;
    double train_min = 0.0;
    double train_max = 0.0;
    bool singleton = false;
    int64_t count = 0;
    int bias_slot = -1;  // index into the bias tower outputs; -1 for singletons
};

struct SubDist {
    bool singleton = false;  // a configured high-frequency value, e.g. 0
    std::vector<Bucket> buckets;
    int global_offset = 0;  // global bucket index of buckets[0]

    int bucket_count() const { return static_cast<int>(buckets.size()); }
    int bias_count() const {
        int r = 0;
        for (const Bucket& b : buckets)
            if (!b.singleton) ++r;
        return r;
    }
};

struct TaskScheme {
    int horizon = 0;
    std::vector<SubDist> subdists;
    int total_buckets = 0;  // M_t

    int subdist_count() const { return static_cast<int>(subdists.size()); }
};

struct BucketingScheme {
    std::vector<TaskScheme> tasks;
    std::vector<std::string> warnings;
};

struct BucketConfig {
    std::vector<double> singleton_values = {0.0};
    int buckets_per_subdist = 10;
    std::vector<double> cut_points = {};  // extra sub-distribution splits of the non-singleton range
};

/// Encoded training target for one (sample, task).
struct EncodedTarget {
    int sub_dist = 0;
    int bucket = 0;         // local index within the sub-distribution
    int global_bucket = 0;  // index into the normalized bucket distribution
    std::optional<double> bias;  // absent for singleton buckets
    bool clamped = false;
};

enum class DecodeMode {
    Bias,      // left boundary + predicted bias * width
    Midpoint,  // (train_min + train_max) / 2, ignoring the bias tower
};

/// Equal-frequency bucketing of per-task training labels. Configured
/// singleton values become their own sub-distributions; the remaining range
/// is split at the configured cut points and bucketed by nearest-rank
/// quantiles inside each piece.
BucketingScheme fit_bucketing(const std::vector<std::vector<double>>& labels_per_task,
                              const std::vector<int>& horizons, const BucketConfig& config);

EncodedTarget encode_label(double ltv, const TaskScheme& task);

/// Targets for the ordinal towers: entry u is 1 iff u < label_index.
std::vector<double> ordinal_targets(int label_index, int size);

/// Eq-style hard decode: argmax sub-distribution, argmax bucket, then the
/// bucket's value (singleton) or left boundary + bias * width. Ties resolve
/// to the lowest index.
double decode(std::span<const double> p_c, const std::vector<std::vector<double>>& q_c,
              const std::vector<std::vector<double>>& q_b, const TaskScheme& task,
              DecodeMode mode = DecodeMode::Bias);

const Bucket& bucket_at(const TaskScheme& task, int global_index);

uint64_t scheme_hash(const BucketingScheme& scheme);
std::string scheme_to_json(const BucketingScheme& scheme);
BucketingScheme scheme_from_json(const std::string& text);
void save_scheme(const BucketingScheme& scheme, const std::string& path);
BucketingScheme load_scheme(const std::string& path);

}  // namespace odmn
