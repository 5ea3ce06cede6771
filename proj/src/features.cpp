#include "a2/features.hpp"

#include <set>
#include <stdexcept>

namespace a2 {

void FeatureSchema::validate() const {
    if (fields.empty()) throw std::invalid_argument("schema: no fields");
    std::set<std::string> seen;
    for (const Field& f : fields) {
        if (!seen.insert(f.name).second)
            throw std::invalid_argument("schema: duplicate field name " + f.name);
        if (f.hash_buckets < 2)
            throw std::invalid_argument("schema: field " + f.name + " needs hash_buckets >= 2");
        if (f.dim == 0)
            throw std::invalid_argument("schema: field " + f.name + " needs dim >= 1");
    }
}

std::size_t FeatureSchema::total_dim() const {
    std::size_t n = 0;
    for (const Field& f : fields) n += f.dim;
    return n;
}

std::size_t FeatureSchema::field_index(std::string_view name) const {
    for (std::size_t i = 0; i < fields.size(); ++i)
        if (fields[i].name == name) return i;
    throw std::invalid_argument("schema: unknown field " + std::string(name));
}

std::uint64_t FeatureSchema::content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const Field& f : fields) {
        h = fnv1a64(f.name.data(), f.name.size(), h);
        const std::uint64_t meta[3] = {f.role == FieldRole::user ? 0ull : 1ull,
                                       f.hash_buckets, f.dim};
        h = fnv1a64(meta, sizeof(meta), h);
    }
    return h;
}

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::size_t hash_feature(std::size_t field_index, std::string_view token,
                         std::size_t buckets) {
    if (buckets < 2) throw std::invalid_argument("hash_feature: buckets must be >= 2");
    const std::uint32_t fi = static_cast<std::uint32_t>(field_index);
    unsigned char salt[4] = {static_cast<unsigned char>(fi & 0xff),
                             static_cast<unsigned char>((fi >> 8) & 0xff),
                             static_cast<unsigned char>((fi >> 16) & 0xff),
                             static_cast<unsigned char>((fi >> 24) & 0xff)};
    std::uint64_t h = fnv1a64(salt, sizeof(salt));
    h = fnv1a64(token.data(), token.size(), h);
    return static_cast<std::size_t>(h % buckets);
}

Batch make_batch(const FeatureSchema& schema, const std::vector<FeatureRecord>& records,
                 std::size_t begin, std::size_t end, std::size_t id_offset) {
    const std::size_t nf = schema.fields.size();
    Batch b;
    b.field_rows.assign(nf, {});
    for (auto& v : b.field_rows) v.reserve(end - begin);
    for (std::size_t r = begin; r < end; ++r) {
        const FeatureRecord& rec = records[r];
        if (rec.tokens.size() != nf)
            throw std::invalid_argument("record has " + std::to_string(rec.tokens.size()) +
                                        " tokens, schema expects " + std::to_string(nf));
        for (std::size_t f = 0; f < nf; ++f)
            b.field_rows[f].push_back(
                hash_feature(f, rec.tokens[f], schema.fields[f].hash_buckets));
        b.labels.push_back(rec.label);
        b.truth.push_back(rec.truth_domain);
        b.sample_ids.push_back(id_offset + r);
    }
    return b;
}

}  // namespace a2
