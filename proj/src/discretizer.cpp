#include "odmn/discretizer.hpp"

#include <algorithm>

#include "json.hpp"

namespace odmn {

std::vector<double> equal_frequency_cuts(std::vector<double> values, int bins) {
    if (values.empty()) throw DataError("equal_frequency_cuts: no values");
    std::sort(values.begin(), values.end());
    const auto n = static_cast<int64_t>(values.size());
    std::vector<double> cuts;
    for (int k = 1; k < bins; ++k) {
        const int64_t rank = (n * k + bins - 1) / bins;  // ceil(n*k/bins)
        const double c = values[static_cast<size_t>(rank - 1)];
        if (cuts.empty() || c != cuts.back()) cuts.push_back(c);
    }
    // A cut at the maximum would leave the top bin empty on the fitted data.
    while (!cuts.empty() && cuts.back() >= values.back()) cuts.pop_back();
    return cuts;
}

namespace {
int bin_of(const std::vector<double>& cuts, double value) {
    // Number of cut points strictly below value.
    return static_cast<int>(std::lower_bound(cuts.begin(), cuts.end(), value) - cuts.begin());
}
}  // namespace

Discretizer Discretizer::fit(const Dataset& dataset, const FeatureSchema& schema) {
    if (dataset.rows.empty()) throw DataError("Discretizer::fit: empty dataset");
    Discretizer d;
    for (size_t f = 0; f < schema.numeric.size(); ++f) {
        std::vector<double> values;
        values.reserve(dataset.rows.size());
        for (const FeatureRow& row : dataset.rows) values.push_back(row.numeric[f]);
        std::vector<double> cuts = equal_frequency_cuts(std::move(values), schema.numeric[f].bins);
        if (cuts.empty())
            d.warnings_.push_back("numeric feature '" + schema.numeric[f].name +
                                  "' is constant, single bin");
        d.numeric_cuts_.push_back(std::move(cuts));
    }
    for (size_t f = 0; f < schema.sequence.size(); ++f) {
        std::vector<double> values;
        values.reserve(dataset.rows.size() * static_cast<size_t>(schema.sequence[f].length));
        for (const FeatureRow& row : dataset.rows)
            for (double v : row.sequence[f]) values.push_back(v);
        std::vector<double> cuts = equal_frequency_cuts(std::move(values), schema.sequence[f].bins);
        if (cuts.empty())
            d.warnings_.push_back("sequence feature '" + schema.sequence[f].name +
                                  "' is constant, single bin");
        d.sequence_cuts_.push_back(std::move(cuts));
    }
    return d;
}

int Discretizer::numeric_bin(int feature, double value) const {
    return bin_of(numeric_cuts_[static_cast<size_t>(feature)], value);
}

int Discretizer::sequence_bin(int feature, double value) const {
    return bin_of(sequence_cuts_[static_cast<size_t>(feature)], value);
}

std::vector<int> Discretizer::encode(const FeatureRow& row, const FeatureSchema& schema) const {
    std::vector<int> ids;
    for (size_t f = 0; f < schema.categorical.size(); ++f) {
        const std::vector<std::string>& vocab = schema.categorical[f].vocabulary;
        const auto it = std::find(vocab.begin(), vocab.end(), row.categorical[f]);
        ids.push_back(it == vocab.end() ? static_cast<int>(vocab.size())
                                        : static_cast<int>(it - vocab.begin()));
    }
    for (size_t f = 0; f < schema.numeric.size(); ++f)
        ids.push_back(numeric_bin(static_cast<int>(f), row.numeric[f]));
    for (size_t f = 0; f < schema.sequence.size(); ++f)
        for (double v : row.sequence[f]) ids.push_back(sequence_bin(static_cast<int>(f), v));
    return ids;
}

std::string Discretizer::to_json() const {
    nlohmann::json root;
    root["version"] = 1;
    root["kind"] = "odmn-discretizer";
    root["numeric_cuts"] = numeric_cuts_;
    root["sequence_cuts"] = sequence_cuts_;
    root["warnings"] = warnings_;
    return root.dump(2);
}

Discretizer Discretizer::from_json(const std::string& text) {
    nlohmann::json root = nlohmann::json::parse(text);
    if (!root.contains("kind") || root["kind"] != "odmn-discretizer")
        throw DataError("Discretizer::from_json: wrong file kind");
    if (root.at("version").get<int>() != 1) throw DataError("Discretizer::from_json: unsupported version");
    Discretizer d;
    d.numeric_cuts_ = root.at("numeric_cuts").get<std::vector<std::vector<double>>>();
    d.sequence_cuts_ = root.at("sequence_cuts").get<std::vector<std::vector<double>>>();
    if (root.contains("warnings")) d.warnings_ = root["warnings"].get<std::vector<std::string>>();
    return d;
}

SlotLayout slot_layout(const FeatureSchema& schema) {
    SlotLayout layout;
    for (const CategoricalFeature& f : schema.categorical) {
        layout.slots.push_back({f.name, static_cast<int>(f.vocabulary.size()) + 1, 1});
        layout.total_lookups += 1;
    }
    for (const NumericFeature& f : schema.numeric) {
        layout.slots.push_back({f.name, f.bins, 1});
        layout.total_lookups += 1;
    }
    for (const SequenceFeature& f : schema.sequence) {
        layout.slots.push_back({f.name, f.bins, f.length});
        layout.total_lookups += f.length;
    }
    return layout;
}

}  // namespace odmn
