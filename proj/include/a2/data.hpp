#pragma once

#include <optional>
#include <string>
#include <vector>

#include "a2/features.hpp"

namespace a2 {

// Synthetic multi-domain CTR benchmark. Each domain owns a sparse categorical
// distribution per field (Dirichlet-sampled) and a logit weight table; the
// label is Bernoulli(sigmoid(bias_d + sum_f w_d[f, value_f])).
//
// With `conflicting` on, the first `shared_fields` fields draw their values
// from one shared distribution and carry sign-flipped weights across domains
// (w_d = -w_0 for odd d); the remaining fields are domain-indicative and
// carry no label weight. Pooled CTR of a shared combo then approaches 0.5
// while per-domain CTRs stay apart.
struct SyntheticConfig {
    std::size_t domains = 4;         // K
    std::size_t fields = 8;          // F
    std::size_t vocab = 50;          // V values per field
    double concentration = 0.05;     // Dirichlet concentration c
    std::size_t samples = 20000;
    std::uint64_t seed = 1;
    double weight_scale = 1.0;       // stddev of w_d entries
    double bias_scale = 0.0;         // stddev of b_d
    std::optional<double> fixed_bias;  // overrides b_d for every domain
    bool conflicting = false;
    std::size_t shared_fields = 0;   // 0 -> fields/2 when conflicting
    // Concentration for the shared-field distribution; unset reuses
    // `concentration`. High values spread label mass over many value combos,
    // which blocks per-combo memorization and forces domain-aware routing.
    std::optional<double> shared_concentration;
    std::size_t hash_buckets = 0;    // 0 -> 4*vocab
    std::size_t embedding_dim = 32;

    void validate() const;
    std::size_t shared_fields_or_default() const {
        return shared_fields ? shared_fields : fields / 2;
    }
};

// Sampled generator internals, kept for oracle-style tests (true logits).
struct SyntheticTruth {
    // [domain][field][value] categorical probabilities and logit weights
    std::vector<std::vector<std::vector<double>>> probs;
    std::vector<std::vector<std::vector<double>>> weights;
    std::vector<double> bias;

    double logit(int domain, const std::vector<std::size_t>& values) const;
};

enum class Provenance { synthetic, csv };

struct Dataset {
    FeatureSchema schema;
    std::vector<FeatureRecord> records;
    Provenance provenance = Provenance::synthetic;
    std::optional<SyntheticTruth> truth;  // synthetic only

    bool has_truth_domains() const { return provenance == Provenance::synthetic; }
    std::size_t size() const { return records.size(); }
};

Dataset generate_synthetic(const SyntheticConfig& cfg);

// Schema the synthetic generator builds for a given config.
FeatureSchema synthetic_schema(const SyntheticConfig& cfg);

struct CsvOptions {
    std::string label_column = "label";
    std::size_t max_rows = 0;  // 0 = unlimited
};

// Header row required; label column must hold 0/1. Row-level failures report
// the 1-based line number.
Dataset load_csv(const std::string& path, const FeatureSchema& schema, const CsvOptions& opts);

void export_csv(const Dataset& ds, const std::string& path);

struct SplitSpec {
    double train_fraction = 0.8;
    double val_fraction = 0.1;
    double test_fraction = 0.1;
    std::uint64_t seed = 1;

    void validate() const;
};

struct Splits {
    Dataset train, val, test;
};

// Deterministic shuffled partition; floor allocations for val/test, the
// remainder goes to train.
Splits split(const Dataset& ds, const SplitSpec& spec);

}  // namespace a2
