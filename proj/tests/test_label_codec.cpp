#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "odmn/bucketing.hpp"
#include "odmn/rng.hpp"
#include "odmn/synthetic.hpp"

using namespace odmn;

namespace {
BucketingScheme reference_scheme() {
    // labels: four zeros plus 1,2,3,10,20,100; zero singleton; three
    // equal-frequency buckets over the positives.
    std::vector<std::vector<double>> labels = {{0, 0, 0, 0, 1, 2, 3, 10, 20, 100}};
    BucketConfig config;
    config.singleton_values = {0.0};
    config.buckets_per_subdist = 3;
    return fit_bucketing(labels, {365}, config);
}
}  // namespace

TEST_CASE("fit_bucketing: zero singleton plus nearest-rank positive buckets") {
    const BucketingScheme scheme = reference_scheme();
    REQUIRE(scheme.tasks.size() == 1);
    const TaskScheme& task = scheme.tasks[0];
    REQUIRE(task.subdist_count() == 2);
    CHECK(task.subdists[0].singleton);
    CHECK(task.subdists[0].buckets[0].train_min == 0.0);
    CHECK(task.subdists[0].buckets[0].count == 4);

    const SubDist& pos = task.subdists[1];
    REQUIRE(pos.bucket_count() == 3);
    // nearest-rank 1/3 and 2/3 quantiles of {1,2,3,10,20,100} are 2 and 10
    CHECK(pos.buckets[0].upper == 2.0);
    CHECK(pos.buckets[1].lower == 2.0);
    CHECK(pos.buckets[1].upper == 10.0);
    CHECK(pos.buckets[2].lower == 10.0);
    CHECK(pos.buckets[2].upper == 100.0);
    CHECK(pos.buckets[0].count == 2);
    CHECK(pos.buckets[1].count == 2);
    CHECK(pos.buckets[2].count == 2);
    CHECK(task.total_buckets == 4);
}

TEST_CASE("fit_bucketing: identical labels collapse to one singleton with warning") {
    const BucketingScheme scheme = fit_bucketing({{5.0, 5.0, 5.0}}, {30}, BucketConfig{{}, 4, {}});
    REQUIRE(scheme.tasks[0].subdist_count() == 1);
    REQUIRE(scheme.tasks[0].subdists[0].bucket_count() == 1);
    CHECK(scheme.tasks[0].subdists[0].buckets[0].singleton);
    CHECK_FALSE(scheme.warnings.empty());
}

TEST_CASE("fit_bucketing: bucket count reduced to distinct values with warning") {
    const BucketingScheme scheme =
        fit_bucketing({{1.0, 1.0, 2.0, 2.0, 3.0}}, {30}, BucketConfig{{}, 5, {}});
    CHECK(scheme.tasks[0].subdists[0].bucket_count() == 3);
    bool warned = false;
    for (const std::string& w : scheme.warnings)
        warned |= w.find("reducing bucket count") != std::string::npos;
    CHECK(warned);
}

TEST_CASE("fit_bucketing: absent singleton value dropped with warning") {
    const BucketingScheme scheme = fit_bucketing({{1.0, 2.0, 3.0}}, {30}, BucketConfig{{0.0}, 2, {}});
    CHECK(scheme.tasks[0].subdist_count() == 1);
    bool warned = false;
    for (const std::string& w : scheme.warnings) warned |= w.find("dropped") != std::string::npos;
    CHECK(warned);
}

TEST_CASE("fit_bucketing: explicit cut points split sub-distributions") {
    BucketConfig config;
    config.singleton_values = {0.0};
    config.buckets_per_subdist = 2;
    config.cut_points = {10.0};
    const BucketingScheme scheme = fit_bucketing({{0, 0, 1, 2, 3, 4, 11, 20, 30, 40}}, {30}, config);
    REQUIRE(scheme.tasks[0].subdist_count() == 3);
    CHECK(scheme.tasks[0].subdists[1].buckets.back().upper == 4.0);
    CHECK(scheme.tasks[0].subdists[2].buckets.front().lower == 10.0);
}

TEST_CASE("encode_label: singleton, in-bucket bias, and clamping") {
    const BucketingScheme scheme = reference_scheme();
    const TaskScheme& task = scheme.tasks[0];

    const EncodedTarget zero = encode_label(0.0, task);
    CHECK(zero.sub_dist == 0);
    CHECK(zero.bucket == 0);
    CHECK(zero.global_bucket == 0);
    CHECK_FALSE(zero.bias.has_value());
    CHECK_FALSE(zero.clamped);

    // 10 falls in (2,10] whose training min/max are 3 and 10 -> bias 1.
    const EncodedTarget ten = encode_label(10.0, task);
    CHECK(ten.sub_dist == 1);
    CHECK(ten.bucket == 1);
    CHECK(ten.global_bucket == 2);
    REQUIRE(ten.bias.has_value());
    CHECK(*ten.bias == doctest::Approx(1.0));

    const EncodedTarget huge = encode_label(1e9, task);
    CHECK(huge.clamped);
    CHECK(huge.sub_dist == 1);
    CHECK(huge.bucket == 2);
    REQUIRE(huge.bias.has_value());
    CHECK(*huge.bias == 1.0);
}

TEST_CASE("ordinal_targets: entries below the label are one") {
    CHECK(ordinal_targets(0, 3) == std::vector<double>{0, 0, 0});
    CHECK(ordinal_targets(2, 3) == std::vector<double>{1, 1, 0});
    CHECK(ordinal_targets(3, 4) == std::vector<double>{1, 1, 1, 0});
    CHECK_THROWS_AS(ordinal_targets(3, 3), ConfigError);
    CHECK_THROWS_AS(ordinal_targets(-1, 3), ConfigError);
}

TEST_CASE("decode: singleton wins on argmax ties at the lowest index") {
    const BucketingScheme scheme = reference_scheme();
    const TaskScheme& task = scheme.tasks[0];
    // p_c favours the zero singleton
    CHECK(decode(std::vector<double>{0.9, 0.1}, {{1.0}, {0.4, 0.3, 0.3}}, {{}, {0.5, 0.5, 0.5}},
                 task) == 0.0);
    // uniform everywhere: lowest-index tie rule lands on the singleton
    CHECK(decode(std::vector<double>{0.5, 0.5}, {{1.0}, {1.0 / 3, 1.0 / 3, 1.0 / 3}},
                 {{}, {0.5, 0.5, 0.5}}, task) == 0.0);
}

TEST_CASE("decode: bias path reproduces the worked example") {
    // Two positive buckets (0,2] and (2,10]; the second holds training
    // values {3,10}. bias 0.25 -> 3 + 0.25*7 = 4.75.
    std::vector<std::vector<double>> labels = {{0, 0, 1, 2, 3, 10}};
    BucketConfig config;
    config.singleton_values = {0.0};
    config.buckets_per_subdist = 2;
    const BucketingScheme scheme = fit_bucketing(labels, {30}, config);
    const TaskScheme& task = scheme.tasks[0];
    REQUIRE(task.subdists[1].bucket_count() == 2);
    CHECK(task.subdists[1].buckets[1].train_min == 3.0);
    CHECK(task.subdists[1].buckets[1].train_max == 10.0);
    const double est =
        decode(std::vector<double>{0.3, 0.7}, {{1.0}, {0.4, 0.6}}, {{}, {0.3, 0.25}}, task);
    CHECK(est == doctest::Approx(4.75));
}

TEST_CASE("decode: midpoint mode uses the bucket centre") {
    const BucketingScheme scheme = reference_scheme();
    const TaskScheme& task = scheme.tasks[0];
    const double est = decode(std::vector<double>{0.1, 0.9}, {{1.0}, {0.1, 0.8, 0.1}}, {{}, {}}, task,
                              DecodeMode::Midpoint);
    CHECK(est == doctest::Approx(0.5 * (3.0 + 10.0)));
}

TEST_CASE("round-trip: every training label decodes back exactly") {
    std::vector<std::vector<double>> labels = {{0, 0, 0, 0, 1, 2, 3, 10, 20, 100}};
    const BucketingScheme scheme = fit_bucketing(labels, {365}, BucketConfig{{0.0}, 3, {}});
    const TaskScheme& task = scheme.tasks[0];
    for (double label : labels[0]) {
        const EncodedTarget e = encode_label(label, task);
        CHECK_FALSE(e.clamped);
        std::vector<double> p_c(task.subdist_count(), 0.0);
        p_c[static_cast<size_t>(e.sub_dist)] = 1.0;
        std::vector<std::vector<double>> q_c, q_b;
        for (int s = 0; s < task.subdist_count(); ++s) {
            q_c.emplace_back(task.subdists[static_cast<size_t>(s)].bucket_count(), 0.0);
            q_b.emplace_back(task.subdists[static_cast<size_t>(s)].bias_count(), 0.0);
        }
        q_c[static_cast<size_t>(e.sub_dist)][static_cast<size_t>(e.bucket)] = 1.0;
        if (e.bias) {
            const int slot = task.subdists[static_cast<size_t>(e.sub_dist)]
                                 .buckets[static_cast<size_t>(e.bucket)]
                                 .bias_slot;
            q_b[static_cast<size_t>(e.sub_dist)][static_cast<size_t>(slot)] = *e.bias;
        }
        CHECK(decode(p_c, q_c, q_b, task) == doctest::Approx(label).epsilon(1e-12));
    }
}

TEST_CASE("decode is strictly increasing in the bias of a non-singleton bucket") {
    const BucketingScheme scheme = reference_scheme();
    const TaskScheme& task = scheme.tasks[0];
    const std::vector<double> p_c = {0.2, 0.8};
    const std::vector<std::vector<double>> q_c = {{1.0}, {0.1, 0.7, 0.2}};
    double prev = -1.0;
    for (double bias = 0.0; bias <= 1.0; bias += 0.125) {
        const double est = decode(p_c, q_c, {{}, {0.0, bias, 0.0}}, task);
        CHECK(est > prev);
        prev = est;
    }
}

TEST_CASE("global bucket index is ascending in LTV value") {
    SyntheticConfig config;
    config.n_users = 5000;
    config.seed = 17;
    const Dataset ds = generate_synthetic(config);
    std::vector<std::vector<double>> labels(config.horizons.size());
    for (const FeatureRow& row : ds.rows)
        for (size_t t = 0; t < row.labels.size(); ++t) labels[t].push_back(row.labels[t]);
    const BucketingScheme scheme = fit_bucketing(labels, config.horizons, BucketConfig{});
    for (const TaskScheme& task : scheme.tasks) {
        double prev_upper = -1.0;
        int expected_global = 0;
        for (const SubDist& sd : task.subdists) {
            CHECK(sd.global_offset == expected_global);
            for (const Bucket& b : sd.buckets) {
                CHECK(b.train_min >= prev_upper);
                CHECK(b.train_max >= b.train_min);
                prev_upper = b.train_max;
                ++expected_global;
            }
        }
        CHECK(task.total_buckets == expected_global);
    }
}

TEST_CASE("coverage: synthetic training labels encode without clamping") {
    SyntheticConfig config;
    config.n_users = 20000;
    config.seed = 23;
    const Dataset ds = generate_synthetic(config);
    std::vector<std::vector<double>> labels(config.horizons.size());
    for (const FeatureRow& row : ds.rows)
        for (size_t t = 0; t < row.labels.size(); ++t) labels[t].push_back(row.labels[t]);
    const BucketingScheme scheme = fit_bucketing(labels, config.horizons, BucketConfig{});
    int64_t clamps = 0;
    for (size_t t = 0; t < labels.size(); ++t)
        for (double label : labels[t])
            if (encode_label(label, scheme.tasks[t]).clamped) ++clamps;
    CHECK(clamps == 0);
}

TEST_CASE("scheme serialization round-trips bit-exactly") {
    const BucketingScheme scheme = reference_scheme();
    const std::string path =
        (std::filesystem::temp_directory_path() / "odmn_scheme_test.json").string();
    save_scheme(scheme, path);
    const BucketingScheme back = load_scheme(path);
    CHECK(scheme_hash(back) == scheme_hash(scheme));
    CHECK(scheme_to_json(back) == scheme_to_json(scheme));
    REQUIRE(back.tasks.size() == scheme.tasks.size());
    const Bucket& a = scheme.tasks[0].subdists[1].buckets[2];
    const Bucket& b = back.tasks[0].subdists[1].buckets[2];
    CHECK(a.train_min == b.train_min);
    CHECK(a.train_max == b.train_max);
    std::filesystem::remove(path);
}

TEST_CASE("scheme files reject wrong kinds") {
    CHECK_THROWS_AS(scheme_from_json("{\"kind\":\"other\",\"version\":1}"), DataError);
}
