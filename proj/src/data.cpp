#include "odmn/data.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "odmn/rng.hpp"

namespace odmn {

void FeatureSchema::validate() const {
    if (horizons.empty()) throw ConfigError("schema: no horizons");
    for (size_t i = 1; i < horizons.size(); ++i)
        if (horizons[i] <= horizons[i - 1])
            throw ConfigError("schema: horizons must be strictly increasing");
    for (const NumericFeature& f : numeric)
        if (f.bins < 2) throw ConfigError("schema: numeric feature '" + f.name + "' needs >= 2 bins");
    for (const SequenceFeature& f : sequence) {
        if (f.bins < 2) throw ConfigError("schema: sequence feature '" + f.name + "' needs >= 2 bins");
        if (f.length < 1) throw ConfigError("schema: sequence feature '" + f.name + "' needs length >= 1");
    }
}

using nlohmann::json;

std::string schema_to_json(const FeatureSchema& schema) {
    json root;
    root["version"] = 1;
    root["kind"] = "odmn-schema";
    json cats = json::array();
    for (const CategoricalFeature& f : schema.categorical)
        cats.push_back({{"name", f.name}, {"vocabulary", f.vocabulary}});
    json nums = json::array();
    for (const NumericFeature& f : schema.numeric) nums.push_back({{"name", f.name}, {"bins", f.bins}});
    json seqs = json::array();
    for (const SequenceFeature& f : schema.sequence)
        seqs.push_back({{"name", f.name}, {"length", f.length}, {"bins", f.bins}});
    root["categorical"] = std::move(cats);
    root["numeric"] = std::move(nums);
    root["sequence"] = std::move(seqs);
    root["horizons"] = schema.horizons;
    return root.dump(2);
}

FeatureSchema schema_from_json(const std::string& text) {
    json root = json::parse(text);
    if (!root.contains("kind") || root["kind"] != "odmn-schema")
        throw DataError("schema_from_json: not a schema file");
    if (root.at("version").get<int>() != 1) throw DataError("schema_from_json: unsupported version");
    FeatureSchema s;
    for (const json& j : root.at("categorical"))
        s.categorical.push_back({j.at("name").get<std::string>(),
                                 j.at("vocabulary").get<std::vector<std::string>>()});
    for (const json& j : root.at("numeric"))
        s.numeric.push_back({j.at("name").get<std::string>(), j.at("bins").get<int>()});
    for (const json& j : root.at("sequence"))
        s.sequence.push_back({j.at("name").get<std::string>(), j.at("length").get<int>(),
                              j.at("bins").get<int>()});
    s.horizons = root.at("horizons").get<std::vector<int>>();
    s.validate();
    return s;
}

uint64_t schema_hash(const FeatureSchema& schema) { return fnv1a(schema_to_json(schema)); }

void save_schema(const FeatureSchema& schema, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("save_schema: cannot open '" + path + "' for writing");
    out << schema_to_json(schema);
}

FeatureSchema load_schema(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_schema: cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return schema_from_json(text);
}

namespace {

std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        const size_t pos = line.find(delim, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

bool parse_double(const std::string& s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && !s.empty();
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

struct ColumnIndex {
    std::vector<int> categorical, numeric, sequence, labels;
};

ColumnIndex resolve_columns(const std::vector<std::string>& header, const FeatureSchema& schema,
                            bool require_labels, bool* found_labels) {
    std::unordered_map<std::string, int> pos;
    for (size_t i = 0; i < header.size(); ++i) pos[header[i]] = static_cast<int>(i);
    auto lookup = [&](const std::string& name, bool required) {
        auto it = pos.find(name);
        if (it == pos.end()) {
            if (required) throw DataError("missing column '" + name + "' in header");
            return -1;
        }
        return it->second;
    };
    ColumnIndex idx;
    for (const CategoricalFeature& f : schema.categorical) idx.categorical.push_back(lookup(f.name, true));
    for (const NumericFeature& f : schema.numeric) idx.numeric.push_back(lookup(f.name, true));
    for (const SequenceFeature& f : schema.sequence) idx.sequence.push_back(lookup(f.name, true));
    bool any_label = false, all_labels = true;
    for (int h : schema.horizons) {
        const int c = lookup("ltv" + std::to_string(h), require_labels);
        idx.labels.push_back(c);
        any_label |= c >= 0;
        all_labels &= c >= 0;
    }
    if (any_label && !all_labels) throw DataError("dataset has only some of the label columns");
    if (found_labels) *found_labels = all_labels;
    return idx;
}

Dataset load_impl(const std::string& path, const FeatureSchema& schema, bool require_labels,
                  bool* found_labels) {
    schema.validate();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("dataset '" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const ColumnIndex idx = resolve_columns(split(line, ','), schema, require_labels, found_labels);
    const bool with_labels = idx.labels.empty() ? false : idx.labels[0] >= 0;

    Dataset ds;
    std::vector<std::string> bad;
    auto complain = [&](int line_no, const std::string& what) {
        if (bad.size() < 20) bad.push_back("line " + std::to_string(line_no) + ": " + what);
    };
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> cells = split(line, ',');
        FeatureRow row;
        bool ok = true;
        auto cell = [&](int c) -> const std::string& { return cells[static_cast<size_t>(c)]; };
        for (size_t f = 0; f < schema.categorical.size() && ok; ++f) {
            if (idx.categorical[f] >= static_cast<int>(cells.size())) {
                complain(line_no, "row too short");
                ok = false;
                break;
            }
            row.categorical.push_back(cell(idx.categorical[f]));
        }
        for (size_t f = 0; f < schema.numeric.size() && ok; ++f) {
            double v;
            if (idx.numeric[f] >= static_cast<int>(cells.size()) || !parse_double(cell(idx.numeric[f]), v)) {
                complain(line_no, "bad numeric value for '" + schema.numeric[f].name + "'");
                ok = false;
                break;
            }
            row.numeric.push_back(v);
        }
        for (size_t f = 0; f < schema.sequence.size() && ok; ++f) {
            if (idx.sequence[f] >= static_cast<int>(cells.size())) {
                complain(line_no, "row too short");
                ok = false;
                break;
            }
            std::vector<double> seq;
            for (const std::string& part : split(cell(idx.sequence[f]), ';')) {
                double v;
                if (!parse_double(part, v)) {
                    complain(line_no, "bad sequence value for '" + schema.sequence[f].name + "'");
                    ok = false;
                    break;
                }
                seq.push_back(v);
            }
            if (ok && static_cast<int>(seq.size()) != schema.sequence[f].length) {
                complain(line_no, "sequence '" + schema.sequence[f].name + "' has " +
                                      std::to_string(seq.size()) + " elements, want " +
                                      std::to_string(schema.sequence[f].length));
                ok = false;
            }
            if (ok) row.sequence.push_back(std::move(seq));
        }
        if (ok && with_labels) {
            for (size_t t = 0; t < schema.horizons.size() && ok; ++t) {
                double v;
                if (idx.labels[t] >= static_cast<int>(cells.size()) || !parse_double(cell(idx.labels[t]), v)) {
                    complain(line_no, "non-numeric label ltv" + std::to_string(schema.horizons[t]));
                    ok = false;
                    break;
                }
                if (v < 0.0) {
                    complain(line_no, "negative label ltv" + std::to_string(schema.horizons[t]));
                    ok = false;
                    break;
                }
                row.labels.push_back(v);
            }
            for (size_t t = 1; ok && t < row.labels.size(); ++t) {
                if (row.labels[t] < row.labels[t - 1]) {
                    complain(line_no, "label monotonicity violated: ltv" +
                                          std::to_string(schema.horizons[t - 1]) + "=" +
                                          format_double(row.labels[t - 1]) + " > ltv" +
                                          std::to_string(schema.horizons[t]) + "=" +
                                          format_double(row.labels[t]));
                    ok = false;
                }
            }
        }
        if (ok) ds.rows.push_back(std::move(row));
    }
    if (!bad.empty()) {
        std::string msg = "dataset '" + path + "' has malformed rows:";
        for (const std::string& b : bad) msg += "\n  " + b;
        throw DataError(msg);
    }
    return ds;
}

}  // namespace

Dataset load_delimited(const std::string& path, const FeatureSchema& schema) {
    return load_impl(path, schema, true, nullptr);
}

Dataset load_features_only(const std::string& path, const FeatureSchema& schema, bool* had_labels) {
    return load_impl(path, schema, false, had_labels);
}

void save_delimited(const Dataset& dataset, const FeatureSchema& schema, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("save_delimited: cannot open '" + path + "' for writing");
    std::vector<std::string> header;
    for (const CategoricalFeature& f : schema.categorical) header.push_back(f.name);
    for (const NumericFeature& f : schema.numeric) header.push_back(f.name);
    for (const SequenceFeature& f : schema.sequence) header.push_back(f.name);
    const bool with_labels = !dataset.rows.empty() && !dataset.rows[0].labels.empty();
    if (with_labels)
        for (int h : schema.horizons) header.push_back("ltv" + std::to_string(h));
    for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (const FeatureRow& row : dataset.rows) {
        bool first = true;
        auto emit = [&](const std::string& s) {
            if (!first) out << ',';
            out << s;
            first = false;
        };
        for (const std::string& c : row.categorical) emit(c);
        for (double v : row.numeric) emit(format_double(v));
        for (const std::vector<double>& seq : row.sequence) {
            std::string cell;
            for (size_t k = 0; k < seq.size(); ++k) {
                if (k) cell += ';';
                cell += format_double(seq[k]);
            }
            emit(cell);
        }
        if (with_labels)
            for (double v : row.labels) emit(format_double(v));
        out << '\n';
    }
    if (!out) throw DataError("save_delimited: write failed for '" + path + "'");
}

}  // namespace odmn
