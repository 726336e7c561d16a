#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "odmn/metrics.hpp"
#include "odmn/rng.hpp"

using namespace odmn;

TEST_CASE("nrmse/nmae: exact predictions score zero") {
    const std::vector<double> y = {1, 2, 3};
    CHECK(nrmse(y, y) == 0.0);
    CHECK(nmae(y, y) == 0.0);
}

TEST_CASE("nrmse/nmae: hand-evaluated case") {
    const std::vector<double> y = {0, 4};
    const std::vector<double> yh = {2, 2};
    CHECK(nrmse(y, yh) == doctest::Approx(1.0));
    CHECK(nmae(y, yh) == doctest::Approx(1.0));
}

TEST_CASE("nrmse: all-zero labels are rejected") {
    const std::vector<double> y = {0, 0};
    const std::vector<double> yh = {1, 1};
    CHECK_THROWS_AS(nrmse(y, yh), MetricError);
    CHECK_THROWS_AS(nmae(y, yh), MetricError);
}

TEST_CASE("ambe: absolute difference of means, unnormalized") {
    CHECK(ambe(std::vector<double>{1, 2}, std::vector<double>{1, 2}) == 0.0);
    CHECK(ambe(std::vector<double>{0, 4}, std::vector<double>{2, 2}) == 0.0);
    CHECK(ambe(std::vector<double>{1, 1}, std::vector<double>{2, 4}) == doctest::Approx(2.0));
}

TEST_CASE("gini: equal class counts cancel to zero") {
    CHECK(gini_from_counts({50, 50}) == doctest::Approx(0.0));
}

TEST_CASE("gini: all mass in the top class gives (C-1)/C") {
    for (int c = 2; c <= 10; ++c) {
        std::vector<int64_t> counts(static_cast<size_t>(c), 0);
        counts.back() = 100;
        CHECK(gini_from_counts(counts) ==
              doctest::Approx((static_cast<double>(c) - 1.0) / static_cast<double>(c)));
    }
    // C=4 worked example: (2*4-4-1)*100 / (4*100) = 0.75
    CHECK(gini_from_counts({0, 0, 0, 100}) == doctest::Approx(0.75));
}

TEST_CASE("gini: single class and empty input") {
    CHECK(gini_from_counts({42}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(gini_from_counts({}), MetricError);
    CHECK_THROWS_AS(gini_from_counts({0, 0}), MetricError);
}

TEST_CASE("lorenz: endpoints, monotonicity, and perfect-prediction identity") {
    const std::vector<double> y = {5, 1, 3, 0, 2};
    const LorenzCurve truth = lorenz(y, y);
    CHECK(truth.x.front() == 0.0);
    CHECK(truth.y.front() == 0.0);
    CHECK(truth.x.back() == 1.0);
    CHECK(truth.y.back() == 1.0);
    for (size_t i = 1; i < truth.x.size(); ++i) {
        CHECK(truth.x[i] > truth.x[i - 1]);
        CHECK(truth.y[i] >= truth.y[i - 1]);
    }
    const LorenzCurve model = lorenz(y, y);
    CHECK(mutual_gini(truth, model) == 0.0);
}

TEST_CASE("lorenz: two-user reversed-order construction") {
    const std::vector<double> truth_vals = {3, 1};
    const std::vector<double> model_vals = {1, 3};  // reversed ranking
    const LorenzCurve truth = lorenz(truth_vals, truth_vals);
    const LorenzCurve model = lorenz(model_vals, truth_vals);
    CHECK(truth.at(0.5) == doctest::Approx(0.75));
    CHECK(model.at(0.5) == doctest::Approx(0.25));
    CHECK(truth.at(1.0) == doctest::Approx(1.0));
    CHECK(model.at(1.0) == doctest::Approx(1.0));
}

TEST_CASE("lorenz: uniform values give the diagonal") {
    const std::vector<double> y = {2, 2, 2, 2};
    const LorenzCurve curve = lorenz(y, y);
    for (double q = 0.0; q <= 1.0; q += 0.1) CHECK(curve.at(q) == doctest::Approx(q));
}

TEST_CASE("lorenz: zero total mass is an error") {
    const std::vector<double> zeros = {0, 0};
    CHECK_THROWS_AS(lorenz(zeros, zeros), MetricError);
}

TEST_CASE("mutual_gini: reversed 2-user case is exactly 0.25") {
    const std::vector<double> truth_vals = {3, 1};
    const std::vector<double> model_vals = {1, 3};
    const LorenzCurve truth = lorenz(truth_vals, truth_vals);
    const LorenzCurve model = lorenz(model_vals, truth_vals);
    CHECK(mutual_gini(truth, model) == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(mutual_gini(model, truth) == doctest::Approx(0.25).epsilon(1e-9));  // symmetry
}

TEST_CASE("mutual_gini: crossing curves do not cancel") {
    // One curve above then below the other; signed areas cancel, absolute do not.
    LorenzCurve a;
    a.x = {0.0, 0.5, 1.0};
    a.y = {0.0, 0.75, 1.0};
    LorenzCurve b;
    b.x = {0.0, 0.25, 0.75, 1.0};
    b.y = {0.0, 0.125, 0.875, 1.0};
    const double area = mutual_gini(a, b);
    CHECK(area > 0.0);
    // signed integral for comparison
    double signed_area = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = (i + 0.5) / n;
        signed_area += (a.at(x) - b.at(x)) / n;
    }
    CHECK(area > std::abs(signed_area) + 1e-6);
}

namespace {
LorenzCurve random_curve(Rng& rng, int users) {
    std::vector<double> order(static_cast<size_t>(users));
    std::vector<double> mass(static_cast<size_t>(users));
    for (int i = 0; i < users; ++i) {
        order[static_cast<size_t>(i)] = rng.uniform(0.0, 1.0);
        mass[static_cast<size_t>(i)] = rng.bernoulli(0.4) ? 0.0 : std::exp(rng.normal() * 1.5);
    }
    // guarantee positive total
    mass[0] += 1.0;
    return lorenz(order, mass);
}
}  // namespace

TEST_CASE("mutual_gini: closed form matches high-resolution quadrature") {
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const LorenzCurve a = random_curve(rng, 40 + rng.uniform_int(60));
        const LorenzCurve b = random_curve(rng, 40 + rng.uniform_int(60));
        const double exact = mutual_gini(a, b);
        const int n = 1000000;
        double approx = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = (i + 0.5) / static_cast<double>(n);
            approx += std::abs(a.at(x) - b.at(x));
        }
        approx /= static_cast<double>(n);
        REQUIRE(exact == doctest::Approx(approx).epsilon(1e-6));
        REQUIRE(exact <= 1.0);
        REQUIRE(mutual_gini(a, a) == 0.0);
    }
}

TEST_CASE("bucket_class_counts feeds the scheme partition into gini") {
    const BucketingScheme scheme =
        fit_bucketing({{0, 0, 0, 1, 2, 3, 4, 5, 6}}, {30}, BucketConfig{{0.0}, 3, {}});
    const std::vector<double> values = {0, 0, 1, 6};
    const std::vector<int64_t> counts = bucket_class_counts(values, scheme.tasks[0]);
    REQUIRE(counts.size() == 4);
    CHECK(counts[0] == 2);
    CHECK(counts[1] == 1);
    CHECK(counts[3] == 1);
}

TEST_CASE("evaluate_predictions: perfect oracle scores zero everywhere") {
    const BucketingScheme scheme =
        fit_bucketing({{0, 0, 1, 2, 3, 4}, {0, 0, 2, 4, 6, 8}}, {30, 90}, BucketConfig{{0.0}, 2, {}});
    const std::vector<std::vector<double>> labels = {{0, 0, 1, 2, 3, 4}, {0, 0, 2, 4, 6, 8}};
    const EvalReport report = evaluate_predictions(labels, labels, scheme);
    REQUIRE(report.tasks.size() == 2);
    for (const TaskMetrics& t : report.tasks) {
        CHECK(t.nrmse == 0.0);
        CHECK(t.nmae == 0.0);
        CHECK(t.ambe == 0.0);
        CHECK(t.mutual_gini == 0.0);
        CHECK(t.gini_model == t.gini_true);
    }
    CHECK(report.violation_rate == 0.0);
}

TEST_CASE("evaluate_predictions: violation rates count adjacent inversions") {
    const BucketingScheme scheme =
        fit_bucketing({{0, 1, 2, 3}, {0, 2, 4, 6}}, {30, 90}, BucketConfig{{0.0}, 2, {}});
    const std::vector<std::vector<double>> labels = {{0, 1, 2, 3}, {0, 2, 4, 6}};
    const std::vector<std::vector<double>> preds = {{0, 5, 2, 3}, {0, 2, 4, 6}};
    const EvalReport report = evaluate_predictions(labels, preds, scheme);
    CHECK(report.violation_rate == doctest::Approx(0.25));
    CHECK(report.tasks[0].violation_rate_vs_next == doctest::Approx(0.25));
    CHECK(report.tasks[1].violation_rate_vs_next == 0.0);
}

TEST_CASE("report serialization round-trips") {
    const BucketingScheme scheme = fit_bucketing({{0, 1, 2, 3}}, {30}, BucketConfig{{0.0}, 2, {}});
    const std::vector<std::vector<double>> labels = {{0, 1, 2, 3}};
    const std::vector<std::vector<double>> preds = {{0, 1, 2, 2.5}};
    const EvalReport report = evaluate_predictions(labels, preds, scheme);
    const EvalReport back = EvalReport::from_json(report.to_json());
    CHECK(back.to_json() == report.to_json());
    CHECK(back.tasks[0].mutual_gini == report.tasks[0].mutual_gini);
}
