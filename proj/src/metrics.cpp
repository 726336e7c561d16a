#include "odmn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace odmn {

namespace {
double mean(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

void require_equal_lengths(std::span<const double> y, std::span<const double> y_hat) {
    if (y.size() != y_hat.size())
        throw ShapeError("metric: " + std::to_string(y.size()) + " labels vs " +
                         std::to_string(y_hat.size()) + " predictions");
    if (y.empty()) throw MetricError("metric: empty input");
}
}  // namespace

double nrmse(std::span<const double> y, std::span<const double> y_hat) {
    require_equal_lengths(y, y_hat);
    const double m = mean(y);
    if (m <= 0.0) throw MetricError("nrmse: mean of true labels is not positive");
    double sq = 0.0;
    for (size_t i = 0; i < y.size(); ++i) sq += (y_hat[i] - y[i]) * (y_hat[i] - y[i]);
    return std::sqrt(sq / static_cast<double>(y.size())) / m;
}

double nmae(std::span<const double> y, std::span<const double> y_hat) {
    require_equal_lengths(y, y_hat);
    const double m = mean(y);
    if (m <= 0.0) throw MetricError("nmae: mean of true labels is not positive");
    double abs_sum = 0.0;
    for (size_t i = 0; i < y.size(); ++i) abs_sum += std::abs(y_hat[i] - y[i]);
    return abs_sum / static_cast<double>(y.size()) / m;
}

double ambe(std::span<const double> y, std::span<const double> y_hat) {
    require_equal_lengths(y, y_hat);
    return std::abs(mean(y_hat) - mean(y));
}

double gini_from_counts(const std::vector<int64_t>& class_counts) {
    if (class_counts.empty()) throw MetricError("gini: no classes");
    const auto c = static_cast<int64_t>(class_counts.size());
    int64_t total = 0;
    double num = 0.0;
    for (int64_t i = 1; i <= c; ++i) {
        const int64_t n_i = class_counts[static_cast<size_t>(i - 1)];
        if (n_i < 0) throw MetricError("gini: negative class count");
        num += static_cast<double>(2 * i - c - 1) * static_cast<double>(n_i);
        total += n_i;
    }
    if (total == 0) throw MetricError("gini: empty class counts");
    return num / (static_cast<double>(c) * static_cast<double>(total));
}

std::vector<int64_t> bucket_class_counts(std::span<const double> values, const TaskScheme& task) {
    std::vector<int64_t> counts(static_cast<size_t>(task.total_buckets), 0);
    for (double v : values) ++counts[static_cast<size_t>(encode_label(v, task).global_bucket)];
    return counts;
}

double LorenzCurve::at(double q) const {
    if (q <= x.front()) return y.front();
    if (q >= x.back()) return y.back();
    const auto it = std::upper_bound(x.begin(), x.end(), q);
    const size_t hi = static_cast<size_t>(it - x.begin());
    const size_t lo = hi - 1;
    const double w = (q - x[lo]) / (x[hi] - x[lo]);
    return y[lo] + w * (y[hi] - y[lo]);
}

LorenzCurve lorenz(std::span<const double> values_for_order, std::span<const double> values_for_mass) {
    if (values_for_order.size() != values_for_mass.size() || values_for_order.empty())
        throw MetricError("lorenz: order/mass lengths differ or empty");
    double total = 0.0;
    for (double m : values_for_mass) {
        if (m < 0.0) throw MetricError("lorenz: negative mass value");
        total += m;
    }
    if (total <= 0.0) throw MetricError("lorenz: total mass is zero");

    const size_t n = values_for_order.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return values_for_order[a] > values_for_order[b];
    });

    LorenzCurve curve;
    curve.x.reserve(n + 1);
    curve.y.reserve(n + 1);
    curve.x.push_back(0.0);
    curve.y.push_back(0.0);
    double acc = 0.0;
    for (size_t k = 0; k < n; ++k) {
        acc += values_for_mass[order[k]];
        curve.x.push_back(static_cast<double>(k + 1) / static_cast<double>(n));
        curve.y.push_back(acc / total);
    }
    curve.x.back() = 1.0;
    curve.y.back() = 1.0;
    return curve;
}

double mutual_gini(const LorenzCurve& a, const LorenzCurve& b) {
    // Merge breakpoints; the difference is linear between adjacent ones.
    std::vector<double> xs;
    xs.reserve(a.x.size() + b.x.size());
    std::merge(a.x.begin(), a.x.end(), b.x.begin(), b.x.end(), std::back_inserter(xs));
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    double area = 0.0;
    double x0 = xs.front();
    double d0 = a.at(x0) - b.at(x0);
    for (size_t i = 1; i < xs.size(); ++i) {
        const double x1 = xs[i];
        const double d1 = a.at(x1) - b.at(x1);
        const double w = x1 - x0;
        if (d0 * d1 >= 0.0) {
            area += 0.5 * std::abs(d0 + d1) * w;
        } else {
            // The sign flips inside the segment; split at the root.
            const double root = w * d0 / (d0 - d1);
            area += 0.5 * std::abs(d0) * root + 0.5 * std::abs(d1) * (w - root);
        }
        x0 = x1;
        d0 = d1;
    }
    return area;
}

using nlohmann::json;

namespace {
json curve_to_json(const LorenzCurve& c) {
    return json{{"x", c.x}, {"y", c.y}};
}
LorenzCurve curve_from_json(const json& j) {
    LorenzCurve c;
    c.x = j.at("x").get<std::vector<double>>();
    c.y = j.at("y").get<std::vector<double>>();
    return c;
}
}  // namespace

std::string EvalReport::to_json() const {
    json root;
    root["version"] = 1;
    root["kind"] = "odmn-report";
    root["rows"] = rows;
    root["violation_rate"] = violation_rate;
    json jt = json::array();
    for (const TaskMetrics& t : tasks) {
        jt.push_back({{"horizon", t.horizon},
                      {"nrmse", t.nrmse},
                      {"nmae", t.nmae},
                      {"ambe", t.ambe},
                      {"gini_true", t.gini_true},
                      {"gini_model", t.gini_model},
                      {"mutual_gini", t.mutual_gini},
                      {"violation_rate_vs_next", t.violation_rate_vs_next},
                      {"curve_true", curve_to_json(t.curve_true)},
                      {"curve_model", curve_to_json(t.curve_model)}});
    }
    root["tasks"] = std::move(jt);
    return root.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
    json root = json::parse(text);
    if (!root.contains("kind") || root["kind"] != "odmn-report")
        throw DataError("EvalReport::from_json: wrong file kind");
    EvalReport r;
    r.rows = root.at("rows").get<int64_t>();
    r.violation_rate = root.at("violation_rate").get<double>();
    for (const json& j : root.at("tasks")) {
        TaskMetrics t;
        t.horizon = j.at("horizon").get<int>();
        t.nrmse = j.at("nrmse").get<double>();
        t.nmae = j.at("nmae").get<double>();
        t.ambe = j.at("ambe").get<double>();
        t.gini_true = j.at("gini_true").get<double>();
        t.gini_model = j.at("gini_model").get<double>();
        t.mutual_gini = j.at("mutual_gini").get<double>();
        t.violation_rate_vs_next = j.at("violation_rate_vs_next").get<double>();
        t.curve_true = curve_from_json(j.at("curve_true"));
        t.curve_model = curve_from_json(j.at("curve_model"));
        r.tasks.push_back(std::move(t));
    }
    return r;
}

EvalReport evaluate_predictions(const std::vector<std::vector<double>>& labels,
                                const std::vector<std::vector<double>>& predictions,
                                const BucketingScheme& scheme) {
    if (labels.size() != predictions.size() || labels.size() != scheme.tasks.size())
        throw ShapeError("evaluate_predictions: task count mismatch");
    const size_t tasks = labels.size();
    const size_t n = labels.empty() ? 0 : labels[0].size();
    EvalReport report;
    report.rows = static_cast<int64_t>(n);
    for (size_t t = 0; t < tasks; ++t) {
        if (labels[t].size() != n || predictions[t].size() != n)
            throw ShapeError("evaluate_predictions: row count mismatch at task " + std::to_string(t));
        TaskMetrics m;
        m.horizon = scheme.tasks[t].horizon;
        m.nrmse = nrmse(labels[t], predictions[t]);
        m.nmae = nmae(labels[t], predictions[t]);
        m.ambe = ambe(labels[t], predictions[t]);
        m.gini_true = gini_from_counts(bucket_class_counts(labels[t], scheme.tasks[t]));
        m.gini_model = gini_from_counts(bucket_class_counts(predictions[t], scheme.tasks[t]));
        m.curve_true = lorenz(labels[t], labels[t]);
        m.curve_model = lorenz(predictions[t], labels[t]);
        m.mutual_gini = mutual_gini(m.curve_true, m.curve_model);
        report.tasks.push_back(std::move(m));
    }
    int64_t any_violation = 0;
    for (size_t i = 0; i < n; ++i) {
        bool violated = false;
        for (size_t t = 0; t + 1 < tasks; ++t) {
            if (predictions[t][i] > predictions[t + 1][i]) {
                violated = true;
                report.tasks[t].violation_rate_vs_next += 1.0;
            }
        }
        if (violated) ++any_violation;
    }
    if (n > 0) {
        for (size_t t = 0; t + 1 < tasks; ++t)
            report.tasks[t].violation_rate_vs_next /= static_cast<double>(n);
        report.violation_rate = static_cast<double>(any_violation) / static_cast<double>(n);
    }
    return report;
}

void save_report(const EvalReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("save_report: cannot open '" + path + "' for writing");
    out << report.to_json();
    if (!out) throw DataError("save_report: write failed for '" + path + "'");
}

void save_lorenz(const LorenzCurve& curve, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("save_lorenz: cannot open '" + path + "' for writing");
    char buf[80];
    for (size_t i = 0; i < curve.x.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", curve.x[i], curve.y[i]);
        out << buf;
    }
    if (!out) throw DataError("save_lorenz: write failed for '" + path + "'");
}

}  // namespace odmn
