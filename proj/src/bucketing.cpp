#include "odmn/bucketing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "json.hpp"
#include "odmn/rng.hpp"

namespace odmn {

namespace {

/// Nearest-rank quantile cuts for `bucket_count` equal-frequency buckets over
/// sorted values. Duplicate cuts collapse; cuts equal to the maximum are
/// dropped (they would create an empty top bucket).
std::vector<double> quantile_cuts(const std::vector<double>& sorted, int bucket_count) {
    const auto n = static_cast<int64_t>(sorted.size());
    std::vector<double> cuts;
    for (int k = 1; k < bucket_count; ++k) {
        const int64_t rank = (n * k + bucket_count - 1) / bucket_count;  // ceil(n*k/B)
        const double c = sorted[static_cast<size_t>(rank - 1)];
        if (c >= sorted.back()) continue;
        if (cuts.empty() || c != cuts.back()) cuts.push_back(c);
    }
    return cuts;
}

SubDist build_piece(const std::vector<double>& sorted, double lower_edge, int requested_buckets,
                    std::vector<std::string>& warnings, const std::string& where) {
    std::set<double> distinct(sorted.begin(), sorted.end());
    int bucket_count = std::min<int>(requested_buckets, static_cast<int>(distinct.size()));
    if (bucket_count < requested_buckets)
        warnings.push_back(where + ": only " + std::to_string(distinct.size()) +
                           " distinct values, reducing bucket count from " +
                           std::to_string(requested_buckets) + " to " + std::to_string(bucket_count));
    std::vector<double> cuts = quantile_cuts(sorted, bucket_count);

    SubDist sd;
    sd.singleton = false;
    double lo = lower_edge;
    size_t pos = 0;
    for (size_t b = 0; b <= cuts.size(); ++b) {
        const double hi = b < cuts.size() ? cuts[b] : sorted.back();
        Bucket bucket;
        bucket.lower = lo;
        bucket.upper = hi;
        bucket.train_min = sorted[pos];
        while (pos < sorted.size() && sorted[pos] <= hi) {
            bucket.train_max = sorted[pos];
            ++bucket.count;
            ++pos;
        }
        bucket.singleton = bucket.train_min == bucket.train_max;
        sd.buckets.push_back(bucket);
        lo = hi;
    }
    int slot = 0;
    for (Bucket& b : sd.buckets)
        if (!b.singleton) b.bias_slot = slot++;
    return sd;
}

}  // namespace

BucketingScheme fit_bucketing(const std::vector<std::vector<double>>& labels_per_task,
                              const std::vector<int>& horizons, const BucketConfig& config) {
    if (labels_per_task.empty()) throw DataError("fit_bucketing: no tasks");
    if (horizons.size() != labels_per_task.size())
        throw ConfigError("fit_bucketing: " + std::to_string(horizons.size()) + " horizons for " +
                          std::to_string(labels_per_task.size()) + " label lists");
    if (config.buckets_per_subdist < 1) throw ConfigError("fit_bucketing: buckets_per_subdist < 1");

    BucketingScheme scheme;
    for (size_t t = 0; t < labels_per_task.size(); ++t) {
        const std::vector<double>& labels = labels_per_task[t];
        if (labels.empty()) throw DataError("fit_bucketing: task " + std::to_string(t) + " has no labels");
        const std::string where = "task " + std::to_string(t);

        std::set<double> singles;
        for (double v : config.singleton_values) {
            if (std::find(labels.begin(), labels.end(), v) != labels.end()) {
                singles.insert(v);
            } else {
                scheme.warnings.push_back(where + ": singleton value " + std::to_string(v) +
                                          " absent from labels, dropped");
            }
        }

        std::vector<double> rest;
        rest.reserve(labels.size());
        std::map<double, int64_t> singleton_counts;
        for (double v : labels) {
            if (singles.count(v)) {
                ++singleton_counts[v];
            } else {
                rest.push_back(v);
            }
        }
        std::sort(rest.begin(), rest.end());

        // Piece boundaries: configured cut points plus the singleton values,
        // so no bucket range straddles a singleton.
        std::set<double> bounds(config.cut_points.begin(), config.cut_points.end());
        bounds.insert(singles.begin(), singles.end());

        // (key, subdist) pairs, ordered by value range.
        std::vector<std::pair<double, SubDist>> parts;
        for (double v : singles) {
            SubDist sd;
            sd.singleton = true;
            Bucket b;
            b.lower = v;
            b.upper = v;
            b.train_min = v;
            b.train_max = v;
            b.singleton = true;
            b.count = singleton_counts[v];
            sd.buckets.push_back(b);
            parts.emplace_back(v, std::move(sd));
        }
        size_t lo_idx = 0;
        std::vector<double> bound_list(bounds.begin(), bounds.end());
        for (size_t bi = 0; bi <= bound_list.size(); ++bi) {
            const double hi = bi < bound_list.size() ? bound_list[bi]
                                                     : std::numeric_limits<double>::infinity();
            std::vector<double> piece;
            while (lo_idx < rest.size() && rest[lo_idx] <= hi) piece.push_back(rest[lo_idx++]);
            if (piece.empty()) continue;
            const double lower_edge = bi == 0 ? std::min(piece.front(), 0.0) : bound_list[bi - 1];
            parts.emplace_back(piece.front(),
                               build_piece(piece, lower_edge, config.buckets_per_subdist,
                                           scheme.warnings, where));
        }
        if (parts.empty()) throw DataError(where + ": no usable labels");
        std::stable_sort(parts.begin(), parts.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });

        TaskScheme task;
        task.horizon = horizons[t];
        int offset = 0;
        for (auto& [key, sd] : parts) {
            sd.global_offset = offset;
            offset += sd.bucket_count();
            task.subdists.push_back(std::move(sd));
        }
        task.total_buckets = offset;
        if (task.subdist_count() == 1 && task.subdists[0].singleton)
            scheme.warnings.push_back(where + ": all labels identical, single singleton bucket");
        scheme.tasks.push_back(std::move(task));
    }
    return scheme;
}

EncodedTarget encode_label(double ltv, const TaskScheme& task) {
    EncodedTarget out;
    int global = 0;
    for (int s = 0; s < task.subdist_count(); ++s) {
        const SubDist& sd = task.subdists[s];
        for (int b = 0; b < sd.bucket_count(); ++b) {
            const Bucket& bucket = sd.buckets[b];
            const bool last = s == task.subdist_count() - 1 && b == sd.bucket_count() - 1;
            if (ltv <= bucket.upper || last) {
                out.sub_dist = s;
                out.bucket = b;
                out.global_bucket = global;
                out.clamped = last && ltv > bucket.upper;
                if (!bucket.singleton) {
                    const double width = bucket.train_max - bucket.train_min;
                    double bias = (ltv - bucket.train_min) / width;
                    out.bias = std::clamp(bias, 0.0, 1.0);
                }
                return out;
            }
            ++global;
        }
    }
    throw StateError("encode_label: scheme has no buckets");
}

std::vector<double> ordinal_targets(int label_index, int size) {
    if (label_index < 0 || label_index >= size)
        throw ConfigError("ordinal_targets: label " + std::to_string(label_index) +
                          " out of range [0," + std::to_string(size) + ")");
    std::vector<double> t(static_cast<size_t>(size), 0.0);
    for (int u = 0; u < label_index; ++u) t[static_cast<size_t>(u)] = 1.0;
    return t;
}

namespace {
int argmax_first(std::span<const double> xs) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(xs.size()); ++i)
        if (xs[i] > xs[best]) best = i;
    return best;
}
}  // namespace

double decode(std::span<const double> p_c, const std::vector<std::vector<double>>& q_c,
              const std::vector<std::vector<double>>& q_b, const TaskScheme& task, DecodeMode mode) {
    if (static_cast<int>(p_c.size()) != task.subdist_count())
        throw ShapeError("decode: p_c size " + std::to_string(p_c.size()) + " vs " +
                         std::to_string(task.subdist_count()) + " sub-distributions");
    const int s = argmax_first(p_c);
    const SubDist& sd = task.subdists[s];
    if (static_cast<int>(q_c[s].size()) != sd.bucket_count())
        throw ShapeError("decode: q_c size mismatch for sub-distribution " + std::to_string(s));
    const int b = argmax_first(q_c[s]);
    const Bucket& bucket = sd.buckets[b];
    if (bucket.singleton) return bucket.train_min;
    if (mode == DecodeMode::Midpoint) return 0.5 * (bucket.train_min + bucket.train_max);
    if (s >= static_cast<int>(q_b.size()) ||
        bucket.bias_slot >= static_cast<int>(q_b[s].size()))
        throw ShapeError("decode: missing bias output for sub-distribution " + std::to_string(s));
    const double bias = q_b[s][static_cast<size_t>(bucket.bias_slot)];
    return bucket.train_min + bias * (bucket.train_max - bucket.train_min);
}

const Bucket& bucket_at(const TaskScheme& task, int global_index) {
    for (const SubDist& sd : task.subdists) {
        if (global_index < sd.global_offset + sd.bucket_count())
            return sd.buckets[static_cast<size_t>(global_index - sd.global_offset)];
    }
    throw ShapeError("bucket_at: global index " + std::to_string(global_index) + " out of range");
}

// ---- serialization ---------------------------------------------------------

using nlohmann::json;

std::string scheme_to_json(const BucketingScheme& scheme) {
    json root;
    root["version"] = 1;
    root["kind"] = "odmn-bucketing";
    json tasks = json::array();
    for (const TaskScheme& t : scheme.tasks) {
        json jt;
        jt["horizon"] = t.horizon;
        jt["total_buckets"] = t.total_buckets;
        json sds = json::array();
        for (const SubDist& sd : t.subdists) {
            json jsd;
            jsd["singleton"] = sd.singleton;
            jsd["global_offset"] = sd.global_offset;
            json buckets = json::array();
            for (const Bucket& b : sd.buckets) {
                buckets.push_back({{"lower", b.lower},
                                   {"upper", b.upper},
                                   {"train_min", b.train_min},
                                   {"train_max", b.train_max},
                                   {"singleton", b.singleton},
                                   {"count", b.count},
                                   {"bias_slot", b.bias_slot}});
            }
            jsd["buckets"] = std::move(buckets);
            sds.push_back(std::move(jsd));
        }
        jt["subdists"] = std::move(sds);
        tasks.push_back(std::move(jt));
    }
    root["tasks"] = std::move(tasks);
    root["warnings"] = scheme.warnings;
    return root.dump(2);
}

BucketingScheme scheme_from_json(const std::string& text) {
    json root = json::parse(text);
    if (!root.contains("kind") || root["kind"] != "odmn-bucketing")
        throw DataError("scheme_from_json: not a bucketing scheme file");
    if (root.at("version").get<int>() != 1)
        throw DataError("scheme_from_json: unsupported version");
    BucketingScheme scheme;
    for (const json& jt : root.at("tasks")) {
        TaskScheme t;
        t.horizon = jt.at("horizon").get<int>();
        t.total_buckets = jt.at("total_buckets").get<int>();
        for (const json& jsd : jt.at("subdists")) {
            SubDist sd;
            sd.singleton = jsd.at("singleton").get<bool>();
            sd.global_offset = jsd.at("global_offset").get<int>();
            for (const json& jb : jsd.at("buckets")) {
                Bucket b;
                b.lower = jb.at("lower").get<double>();
                b.upper = jb.at("upper").get<double>();
                b.train_min = jb.at("train_min").get<double>();
                b.train_max = jb.at("train_max").get<double>();
                b.singleton = jb.at("singleton").get<bool>();
                b.count = jb.at("count").get<int64_t>();
                b.bias_slot = jb.at("bias_slot").get<int>();
                sd.buckets.push_back(b);
            }
            t.subdists.push_back(std::move(sd));
        }
        scheme.tasks.push_back(std::move(t));
    }
    if (root.contains("warnings"))
        scheme.warnings = root["warnings"].get<std::vector<std::string>>();
    return scheme;
}

uint64_t scheme_hash(const BucketingScheme& scheme) {
    BucketingScheme bare = scheme;
    bare.warnings.clear();
    return fnv1a(scheme_to_json(bare));
}

void save_scheme(const BucketingScheme& scheme, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("save_scheme: cannot open '" + path + "' for writing");
    out << scheme_to_json(scheme);
    if (!out) throw DataError("save_scheme: write failed for '" + path + "'");
}

BucketingScheme load_scheme(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_scheme: cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return scheme_from_json(text);
}

}  // namespace odmn
