#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "odmn/discretizer.hpp"
#include "odmn/synthetic.hpp"

using namespace odmn;

namespace {
std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

FeatureSchema tiny_schema() {
    FeatureSchema s;
    s.categorical = {{"channel", {"a", "b"}}};
    s.numeric = {{"score", 4}};
    s.sequence = {{"mins", 3, 4}};
    s.horizons = {30, 365};
    return s;
}
}  // namespace

TEST_CASE("generate_synthetic rejects bad configs") {
    SyntheticConfig config;
    config.zero_rate = 1.0;
    CHECK_THROWS_AS(generate_synthetic(config), ConfigError);
    config.zero_rate = 0.5;
    config.n_users = 0;
    CHECK_THROWS_AS(generate_synthetic(config), ConfigError);
    config.n_users = 10;
    config.horizons = {30, 30};
    CHECK_THROWS_AS(generate_synthetic(config), ConfigError);
}

TEST_CASE("generate_synthetic: labels ascend across horizons, capped per horizon") {
    SyntheticConfig config;
    config.n_users = 4000;
    config.seed = 3;
    const Dataset ds = generate_synthetic(config);
    REQUIRE(ds.rows.size() == 4000);
    for (const FeatureRow& row : ds.rows) {
        REQUIRE(row.labels.size() == config.horizons.size());
        for (size_t t = 0; t < row.labels.size(); ++t) {
            REQUIRE(row.labels[t] >= 0.0);
            REQUIRE(row.labels[t] <= config.horizons[t]);
            if (t > 0) REQUIRE(row.labels[t] >= row.labels[t - 1]);
        }
    }
}

TEST_CASE("generate_synthetic: extreme zero rate yields mostly empty rows") {
    SyntheticConfig config;
    config.n_users = 1000;
    config.zero_rate = 0.99;
    config.seed = 41;
    const Dataset ds = generate_synthetic(config);
    int64_t zero_rows = 0;
    for (const FeatureRow& row : ds.rows)
        if (row.labels.back() == 0.0) ++zero_rows;
    // binomial(1000, 0.99); the seed-fixed draw
    CHECK(zero_rows >= 950);
    CHECK(zero_rows == 989);
}

TEST_CASE("generate_synthetic: marginal shape has zero spike, body, and cap spike") {
    SyntheticConfig config;
    config.n_users = 100000;
    config.seed = 7;
    const Dataset ds = generate_synthetic(config);
    int64_t zeros = 0, at_cap = 0, in_body = 0;
    const double cap = static_cast<double>(config.horizons.back());
    for (const FeatureRow& row : ds.rows) {
        const double y = row.labels.back();
        if (y == 0.0) ++zeros;
        else if (y == cap) ++at_cap;
        else ++in_body;
    }
    const double zero_fraction = static_cast<double>(zeros) / static_cast<double>(ds.rows.size());
    CHECK(zero_fraction == doctest::Approx(config.zero_rate).epsilon(0.02 / config.zero_rate));
    CHECK(at_cap > 0);
    CHECK(in_body > 0);
}

TEST_CASE("dataset round-trips through the delimited format") {
    SyntheticConfig config;
    config.n_users = 500;
    config.seed = 11;
    const FeatureSchema schema = synthetic_schema(config);
    const Dataset ds = generate_synthetic(config);
    const std::string path = temp_path("odmn_roundtrip.csv");
    save_delimited(ds, schema, path);
    const Dataset back = load_delimited(path, schema);
    REQUIRE(back.rows.size() == ds.rows.size());
    for (size_t i = 0; i < ds.rows.size(); ++i) {
        REQUIRE(back.rows[i].categorical == ds.rows[i].categorical);
        REQUIRE(back.rows[i].numeric == ds.rows[i].numeric);
        REQUIRE(back.rows[i].sequence == ds.rows[i].sequence);
        REQUIRE(back.rows[i].labels == ds.rows[i].labels);
    }
    std::filesystem::remove(path);
}

TEST_CASE("load_delimited: well-formed file loads every row") {
    const std::string path = temp_path("odmn_ok.csv");
    write_file(path,
               "channel,score,mins,ltv30,ltv365\n"
               "a,1.5,1;2;3,0,4\n"
               "b,2.5,0;0;0,1,1\n"
               "zz,3.5,9;9;9,2,30\n");
    const Dataset ds = load_delimited(path, tiny_schema());
    CHECK(ds.rows.size() == 3);
    CHECK(ds.rows[2].categorical[0] == "zz");
    std::filesystem::remove(path);
}

TEST_CASE("load_delimited: negative label names the line") {
    const std::string path = temp_path("odmn_neg.csv");
    write_file(path,
               "channel,score,mins,ltv30,ltv365\n"
               "a,1.5,1;2;3,0,4\n"
               "a,1.5,1;2;3,-1,4\n");
    try {
        load_delimited(path, tiny_schema());
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 3") != std::string::npos);
        CHECK(msg.find("negative label") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("load_delimited: label monotonicity violations are diagnosed") {
    const std::string path = temp_path("odmn_mono.csv");
    write_file(path,
               "channel,score,mins,ltv30,ltv365\n"
               "a,1.5,1;2;3,5,4\n");
    try {
        load_delimited(path, tiny_schema());
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 2") != std::string::npos);
        CHECK(msg.find("monotonicity") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("load_delimited: missing column and bad sequence length") {
    const std::string path = temp_path("odmn_miss.csv");
    write_file(path, "channel,mins,ltv30,ltv365\na,1;2;3,0,4\n");
    CHECK_THROWS_AS(load_delimited(path, tiny_schema()), DataError);
    write_file(path,
               "channel,score,mins,ltv30,ltv365\n"
               "a,1.5,1;2,0,4\n");
    CHECK_THROWS_AS(load_delimited(path, tiny_schema()), DataError);
    std::filesystem::remove(path);
}

TEST_CASE("schema serialization round-trips") {
    const FeatureSchema schema = tiny_schema();
    const FeatureSchema back = schema_from_json(schema_to_json(schema));
    CHECK(schema_hash(back) == schema_hash(schema));
    CHECK(back.categorical[0].vocabulary == schema.categorical[0].vocabulary);
    CHECK(back.horizons == schema.horizons);
}

TEST_CASE("schema validation rejects non-increasing horizons") {
    FeatureSchema s = tiny_schema();
    s.horizons = {90, 30};
    CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("equal_frequency_cuts: 1..8 in 4 bins cuts at 2,4,6 with 2 per bin") {
    const std::vector<double> cuts = equal_frequency_cuts({1, 2, 3, 4, 5, 6, 7, 8}, 4);
    CHECK(cuts == std::vector<double>{2, 4, 6});
}

TEST_CASE("equal_frequency_cuts: constant feature collapses to a single bin") {
    CHECK(equal_frequency_cuts({3, 3, 3, 3}, 5).empty());
}

TEST_CASE("equal_frequency_cuts: 90% zeros collapse into one zero bin") {
    std::vector<double> values(900, 0.0);
    for (int i = 1; i <= 100; ++i) values.push_back(static_cast<double>(i));
    const std::vector<double> cuts = equal_frequency_cuts(values, 10);
    // all k/10 quantiles for k <= 9 land on 0; duplicates collapse
    CHECK(cuts == std::vector<double>{0.0});
}

TEST_CASE("discretizer: bins are monotone in the raw value") {
    SyntheticConfig config;
    config.n_users = 2000;
    config.seed = 13;
    const FeatureSchema schema = synthetic_schema(config);
    const Dataset ds = generate_synthetic(config);
    const Discretizer disc = Discretizer::fit(ds, schema);
    Rng rng(101);
    for (int trial = 0; trial < 1000; ++trial) {
        const double a = rng.uniform(-5.0, 25.0);
        const double b = rng.uniform(-5.0, 25.0);
        const double lo = std::min(a, b), hi = std::max(a, b);
        for (size_t f = 0; f < schema.numeric.size(); ++f) {
            REQUIRE(disc.numeric_bin(static_cast<int>(f), lo) <=
                    disc.numeric_bin(static_cast<int>(f), hi));
        }
    }
}

TEST_CASE("discretizer: occupancies of 1..8 with 4 bins are exactly 2 each") {
    FeatureSchema schema;
    schema.numeric = {{"x", 4}};
    schema.horizons = {30};
    Dataset ds;
    for (int i = 1; i <= 8; ++i) {
        FeatureRow row;
        row.numeric = {static_cast<double>(i)};
        row.labels = {0.0};
        ds.rows.push_back(row);
    }
    const Discretizer disc = Discretizer::fit(ds, schema);
    std::vector<int> occupancy(4, 0);
    for (const FeatureRow& row : ds.rows) ++occupancy[static_cast<size_t>(disc.numeric_bin(0, row.numeric[0]))];
    CHECK(occupancy == std::vector<int>{2, 2, 2, 2});
}

TEST_CASE("encode_features: bins, unknown ids, and sequence order") {
    FeatureSchema schema = tiny_schema();
    Dataset ds;
    for (int i = 1; i <= 8; ++i) {
        FeatureRow row;
        row.categorical = {i % 2 ? "a" : "b"};
        row.numeric = {static_cast<double>(i)};
        row.sequence = {{static_cast<double>(i), static_cast<double>(i + 1), static_cast<double>(i + 2)}};
        row.labels = {0.0, 0.0};
        ds.rows.push_back(row);
    }
    const Discretizer disc = Discretizer::fit(ds, schema);

    FeatureRow probe;
    probe.categorical = {"unseen"};
    probe.numeric = {-100.0};  // below the first cut point -> bin 0
    probe.sequence = {{1.0, 5.0, 9.0}};
    const std::vector<int> ids = disc.encode(probe, schema);
    REQUIRE(ids.size() == 1 + 1 + 3);
    CHECK(ids[0] == 2);  // vocabulary {a,b} -> unknown id 2
    CHECK(ids[1] == 0);
    // sequence elements appended in order, monotone bins
    CHECK(ids[2] <= ids[3]);
    CHECK(ids[3] <= ids[4]);

    const SlotLayout layout = slot_layout(schema);
    REQUIRE(layout.slots.size() == 3);
    CHECK(layout.slots[0].table_rows == 3);
    CHECK(layout.total_lookups == 5);
}

TEST_CASE("discretizer serialization round-trips") {
    SyntheticConfig config;
    config.n_users = 300;
    config.seed = 29;
    const FeatureSchema schema = synthetic_schema(config);
    const Dataset ds = generate_synthetic(config);
    const Discretizer disc = Discretizer::fit(ds, schema);
    const Discretizer back = Discretizer::from_json(disc.to_json());
    CHECK(back.numeric_cuts() == disc.numeric_cuts());
    CHECK(back.sequence_cuts() == disc.sequence_cuts());
}
