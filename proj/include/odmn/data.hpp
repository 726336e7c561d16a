#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odmn/errors.hpp"

namespace odmn {

struct CategoricalFeature {
    std::string name;
    std::vector<std::string> vocabulary;  // unknown values map to index size()
};

struct NumericFeature {
    std::string name;
    int bins = 16;
};

struct SequenceFeature {
    std::string name;
    int length = 7;
    int bins = 16;
};

/// Column layout of a dataset plus the prediction horizons. Horizons must be
/// strictly increasing; label columns are named ltv<N>.
struct FeatureSchema {
    std::vector<CategoricalFeature> categorical;
    std::vector<NumericFeature> numeric;
    std::vector<SequenceFeature> sequence;
    std::vector<int> horizons;

    int task_count() const { return static_cast<int>(horizons.size()); }
    void validate() const;
};

struct FeatureRow {
    std::vector<std::string> categorical;
    std::vector<double> numeric;
    std::vector<std::vector<double>> sequence;
    std::vector<double> labels;  // one per horizon, non-decreasing
};

struct Dataset {
    std::vector<FeatureRow> rows;
};

uint64_t schema_hash(const FeatureSchema& schema);
std::string schema_to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const std::string& text);
void save_schema(const FeatureSchema& schema, const std::string& path);
FeatureSchema load_schema(const std::string& path);

/// Comma-delimited UTF-8 with a header row; sequence cells use ';' between
/// elements. Malformed rows (bad numbers, negative or non-monotone labels,
/// wrong sequence length) abort the load with the offending line numbers.
Dataset load_delimited(const std::string& path, const FeatureSchema& schema);
void save_delimited(const Dataset& dataset, const FeatureSchema& schema, const std::string& path);

/// Same format but label columns are optional (prediction inputs).
Dataset load_features_only(const std::string& path, const FeatureSchema& schema, bool* had_labels);

}  // namespace odmn
