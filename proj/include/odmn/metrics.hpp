#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "odmn/bucketing.hpp"
#include "odmn/errors.hpp"

namespace odmn {

double nrmse(std::span<const double> y, std::span<const double> y_hat);
double nmae(std::span<const double> y, std::span<const double> y_hat);
double ambe(std::span<const double> y, std::span<const double> y_hat);

/// Gini coefficient over a class partition with ascending-value classes:
/// sum_i (2i - C - 1) N_i / (C sum_i N_i), i = 1..C.
double gini_from_counts(const std::vector<int64_t>& class_counts);

/// Counts of values per global bucket of the task scheme (the class
/// partition used for the reported Gini).
std::vector<int64_t> bucket_class_counts(std::span<const double> values, const TaskScheme& task);

/// Piecewise-linear Lorenz curve: users sorted descending by the ordering
/// values (stable ties), point k = (k/N, cumulative mass share). Starts at
/// (0,0), ends at (1,1).
struct LorenzCurve {
    std::vector<double> x;
    std::vector<double> y;

    double at(double q) const;  // linear interpolation
};

LorenzCurve lorenz(std::span<const double> values_for_order, std::span<const double> values_for_mass);

/// Area between two Lorenz curves, integrated exactly on the merged
/// breakpoint grid with sign-change splitting.
double mutual_gini(const LorenzCurve& a, const LorenzCurve& b);

struct TaskMetrics {
    int horizon = 0;
    double nrmse = 0.0;
    double nmae = 0.0;
    double ambe = 0.0;
    double gini_true = 0.0;
    double gini_model = 0.0;
    double mutual_gini = 0.0;
    double violation_rate_vs_next = 0.0;  // fraction with y_hat[t] > y_hat[t+1]; 0 for the last task
    LorenzCurve curve_true;
    LorenzCurve curve_model;
};

struct EvalReport {
    std::vector<TaskMetrics> tasks;
    double violation_rate = 0.0;  // fraction of users with any adjacent inversion
    int64_t rows = 0;

    std::string to_json() const;
    static EvalReport from_json(const std::string& text);
};

/// Full per-task report. predictions[t] and labels[t] are parallel over rows.
EvalReport evaluate_predictions(const std::vector<std::vector<double>>& labels,
                                const std::vector<std::vector<double>>& predictions,
                                const BucketingScheme& scheme);

void save_report(const EvalReport& report, const std::string& path);
void save_lorenz(const LorenzCurve& curve, const std::string& path);

}  // namespace odmn
