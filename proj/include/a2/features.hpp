#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "a2/graph.hpp"
#include "a2/params.hpp"

namespace a2 {

enum class FieldRole { user, item };

struct Field {
    std::string name;
    FieldRole role = FieldRole::user;
    std::size_t hash_buckets = 0;
    std::size_t dim = 32;
};

struct FeatureSchema {
    std::vector<Field> fields;

    void validate() const;
    std::size_t total_dim() const;
    std::size_t field_index(std::string_view name) const;  // throws if unknown

    // Stable content hash; guards checkpoint/data compatibility.
    std::uint64_t content_hash() const;
};

// One raw record: one token per schema field, in schema order.
struct FeatureRecord {
    std::vector<std::string> tokens;
    double label = 0.0;
    int truth_domain = -1;  // >= 0 only for synthetic data
};

std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t seed = 0xcbf29ce484222325ull);

// FNV-1a 64 over (field_index as 4 LE bytes || token), modulo buckets.
// Pure and platform-independent.
std::size_t hash_feature(std::size_t field_index, std::string_view token,
                         std::size_t buckets);

// Pre-hashed batch handed to the model.
struct Batch {
    std::vector<std::vector<std::size_t>> field_rows;  // [field][sample]
    std::vector<double> labels;
    std::vector<int> truth;            // -1 when absent
    std::vector<std::size_t> sample_ids;

    std::size_t size() const { return labels.size(); }
};

Batch make_batch(const FeatureSchema& schema, const std::vector<FeatureRecord>& records,
                 std::size_t begin, std::size_t end, std::size_t id_offset = 0);

}  // namespace a2
