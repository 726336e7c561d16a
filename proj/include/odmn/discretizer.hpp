#pragma once

#include <string>
#include <vector>

#include "odmn/data.hpp"

namespace odmn {

/// Equal-frequency discretization of numeric and sequence features plus
/// vocabulary mapping for categoricals. Cut points are nearest-rank quantiles
/// of the fitted sample with duplicates collapsed; bin(x) = number of cut
/// points strictly below x, so the bin index is monotone in the raw value.
class Discretizer {
  public:
    Discretizer() = default;

    static Discretizer fit(const Dataset& dataset, const FeatureSchema& schema);

    /// One id per categorical value, numeric value, and sequence element, in
    /// schema order. Unknown categorical values map to the slot's reserved id.
    std::vector<int> encode(const FeatureRow& row, const FeatureSchema& schema) const;

    int numeric_bin(int feature, double value) const;
    int sequence_bin(int feature, double value) const;

    const std::vector<std::vector<double>>& numeric_cuts() const { return numeric_cuts_; }
    const std::vector<std::vector<double>>& sequence_cuts() const { return sequence_cuts_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    std::string to_json() const;
    static Discretizer from_json(const std::string& text);

  private:
    std::vector<std::vector<double>> numeric_cuts_;   // per numeric feature
    std::vector<std::vector<double>> sequence_cuts_;  // per sequence feature (shared across elements)
    std::vector<std::string> warnings_;
};

/// Nearest-rank quantile cut points (k/bins for k = 1..bins-1), duplicates
/// collapsed. Exposed for tests.
std::vector<double> equal_frequency_cuts(std::vector<double> values, int bins);

/// Slot layout of the encoded id vector, used to size embedding tables.
struct SlotLayout {
    struct Slot {
        std::string name;
        int table_rows;  // vocabulary size (+1 unknown) or bin count
        int lookups;     // 1, or sequence length
    };
    std::vector<Slot> slots;
    int total_lookups = 0;
};

SlotLayout slot_layout(const FeatureSchema& schema);

}  // namespace odmn
