#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "a2/data.hpp"

using namespace a2;

TEST_CASE("synthetic generation is deterministic") {
    SyntheticConfig cfg;
    cfg.samples = 500;
    cfg.seed = 13;
    Dataset a = generate_synthetic(cfg);
    Dataset b = generate_synthetic(cfg);
    REQUIRE(a.size() == 500);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.records[i].tokens == b.records[i].tokens);
        CHECK(a.records[i].label == b.records[i].label);
        CHECK(a.records[i].truth_domain == b.records[i].truth_domain);
    }
    CHECK(a.has_truth_domains());
    REQUIRE(a.truth.has_value());
}

TEST_CASE("zero weights give CTR one half") {
    SyntheticConfig cfg;
    cfg.samples = 100000;
    cfg.weight_scale = 0.0;
    cfg.bias_scale = 0.0;
    cfg.seed = 3;
    Dataset ds = generate_synthetic(cfg);
    double mean = 0;
    for (const auto& r : ds.records) mean += r.label;
    mean /= static_cast<double>(ds.size());
    CHECK(std::fabs(mean - 0.5) < 3 * std::sqrt(0.25 / 100000));
}

TEST_CASE("fixed logit 2 gives CTR near sigmoid(2)") {
    SyntheticConfig cfg;
    cfg.samples = 100000;
    cfg.weight_scale = 0.0;
    cfg.fixed_bias = 2.0;  // every sample's logit is exactly 2
    cfg.seed = 4;
    Dataset ds = generate_synthetic(cfg);
    double mean = 0;
    for (const auto& r : ds.records) mean += r.label;
    mean /= static_cast<double>(ds.size());
    const double p = 1.0 / (1.0 + std::exp(-2.0));  // 0.8808
    CHECK(std::fabs(mean - p) < 3 * std::sqrt(p * (1 - p) / 100000));
}

TEST_CASE("truth logit matches generator tables") {
    SyntheticConfig cfg;
    cfg.samples = 50;
    cfg.seed = 6;
    Dataset ds = generate_synthetic(cfg);
    const SyntheticTruth& t = *ds.truth;
    // recompute one logit by hand from the tables
    std::vector<std::size_t> values(cfg.fields, 0);
    double expect = t.bias[1];
    for (std::size_t f = 0; f < cfg.fields; ++f) expect += t.weights[1][f][0];
    CHECK(t.logit(1, values) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("conflicting domains pool to 0.5 but stay separated") {
    SyntheticConfig cfg;
    cfg.domains = 2;
    cfg.fields = 4;
    cfg.vocab = 8;
    cfg.samples = 60000;
    cfg.conflicting = true;
    cfg.weight_scale = 1.5;
    cfg.seed = 11;
    Dataset ds = generate_synthetic(cfg);
    const SyntheticTruth& t = *ds.truth;

    // shared fields carry sign-flipped weights; indicative fields carry none
    const std::size_t shared = cfg.shared_fields_or_default();
    for (std::size_t f = 0; f < cfg.fields; ++f)
        for (std::size_t v = 0; v < cfg.vocab; ++v) {
            if (f < shared)
                CHECK(t.weights[1][f][v] == -t.weights[0][f][v]);
            else
                CHECK(t.weights[1][f][v] == 0.0);
        }

    // pooled CTR near 0.5, per-domain CTRs clearly apart for a frequent
    // shared-field combo
    std::map<std::string, std::array<std::pair<double, double>, 2>> combos;
    double pooled = 0;
    for (const auto& r : ds.records) {
        pooled += r.label;
        std::string key;
        for (std::size_t f = 0; f < shared; ++f) key += r.tokens[f] + "|";
        auto& cell = combos[key][static_cast<std::size_t>(r.truth_domain)];
        cell.first += r.label;
        cell.second += 1;
    }
    pooled /= static_cast<double>(ds.size());
    CHECK(std::fabs(pooled - 0.5) < 0.02);

    bool separated = false;
    for (const auto& [key, cells] : combos) {
        if (cells[0].second < 200 || cells[1].second < 200) continue;
        const double c0 = cells[0].first / cells[0].second;
        const double c1 = cells[1].first / cells[1].second;
        if (std::fabs(c0 - c1) > 0.2) separated = true;
    }
    CHECK(separated);
}

TEST_CASE("csv round trip and error reporting") {
    const std::string path = "/tmp/a2_test_data.csv";
    {
        std::ofstream os(path);
        os << "f0,f1,label\n"
           << "a,b,1\n"
           << "c,d,0\n"
           << "e,f,1\n";
    }
    FeatureSchema schema;
    schema.fields = {{"f0", FieldRole::user, 64, 4}, {"f1", FieldRole::item, 64, 4}};

    Dataset ds = load_csv(path, schema, {});
    REQUIRE(ds.size() == 3);
    CHECK(ds.provenance == Provenance::csv);
    CHECK_FALSE(ds.has_truth_domains());
    CHECK(ds.records[0].tokens == std::vector<std::string>{"a", "b"});
    CHECK(ds.records[2].label == 1.0);

    CsvOptions limited;
    limited.max_rows = 2;
    CHECK(load_csv(path, schema, limited).size() == 2);

    {
        std::ofstream os(path);
        os << "f0,f1,label\n"
           << "a,b,1\n"
           << "c,d,0\n"
           << "e,f,1\n"
           << "g,h,2\n";  // bad label on line 5
    }
    bool named_line = false;
    try {
        load_csv(path, schema, {});
    } catch (const std::exception& e) {
        named_line = std::string(e.what()).find("5") != std::string::npos;
    }
    CHECK(named_line);

    CHECK_THROWS(load_csv("/tmp/a2_does_not_exist.csv", schema, {}));
}

TEST_CASE("export then reload preserves records") {
    SyntheticConfig cfg;
    cfg.samples = 40;
    cfg.fields = 3;
    cfg.seed = 21;
    Dataset ds = generate_synthetic(cfg);
    const std::string path = "/tmp/a2_test_export.csv";
    export_csv(ds, path);
    Dataset back = load_csv(path, ds.schema, {});
    REQUIRE(back.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(back.records[i].tokens == ds.records[i].tokens);
        CHECK(back.records[i].label == ds.records[i].label);
    }
}

TEST_CASE("split sizes and determinism") {
    SyntheticConfig cfg;
    cfg.samples = 10;
    cfg.seed = 2;
    Dataset ds = generate_synthetic(cfg);
    SplitSpec spec;  // 0.8/0.1/0.1
    Splits s = split(ds, spec);
    CHECK(s.train.size() == 8);
    CHECK(s.val.size() == 1);
    CHECK(s.test.size() == 1);

    Splits s2 = split(ds, spec);
    for (std::size_t i = 0; i < 8; ++i)
        CHECK(s.train.records[i].tokens == s2.train.records[i].tokens);

    // partition: union is the original multiset
    std::multiset<std::string> orig, parts;
    auto key = [](const FeatureRecord& r) {
        std::string k;
        for (const auto& t : r.tokens) k += t + "|";
        return k + std::to_string(r.label);
    };
    for (const auto& r : ds.records) orig.insert(key(r));
    for (const Dataset* d : {&s.train, &s.val, &s.test})
        for (const auto& r : d->records) parts.insert(key(r));
    CHECK(orig == parts);
}

TEST_CASE("split spec validation") {
    SplitSpec bad;
    bad.train_fraction = 0.5;  // sums to 0.7
    CHECK_THROWS(bad.validate());
    SplitSpec zero;
    zero.train_fraction = 0.0;
    zero.val_fraction = 0.5;
    zero.test_fraction = 0.5;
    CHECK_THROWS(zero.validate());

    Dataset empty;
    empty.schema.fields = {{"f0", FieldRole::user, 8, 2}};
    CHECK_THROWS(split(empty, SplitSpec{}));
}
