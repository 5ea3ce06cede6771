#pragma once

#include <random>
#include <vector>

#include "a2/params.hpp"
#include "a2/tensor.hpp"

namespace a2 {

enum class QuantizeMetric { squared_euclidean, cosine };
enum class SoftSimilarity { neg_squared_distance, cosine };

struct QuantizeResult {
    std::vector<int> indices;  // k per sample
    Tensor codes;              // z_q, each row bitwise equal to a codebook row
};

// Nearest-codebook assignment. Ties resolve to the lowest index; a zero-norm
// sample under the cosine metric falls back to squared euclidean.
QuantizeResult quantize(const Tensor& latents, const Tensor& codebook, QuantizeMetric metric);

// Row-softmax over f(z_e, e_j) for soft routing. Zero-norm z_e under cosine
// similarity falls back to neg_squared_distance for that sample.
Tensor soft_routing_weights(const Tensor& latents, const Tensor& codebook,
                            SoftSimilarity similarity);

std::vector<std::size_t> usage_histogram(const std::vector<int>& assignments, std::size_t m);

// Per-code staleness: batches since the code was last selected. When
// rebalancing is enabled, a code stale past `patience` is reseeded from a
// random latent of the current batch.
class UsageTracker {
public:
    explicit UsageTracker(std::size_t m) : staleness_(m, 0) {}

    // Returns the batch histogram. Mutates `codebook` only when rebalance
    // is on and some code exceeded patience.
    std::vector<std::size_t> update(const std::vector<int>& assignments,
                                    const Tensor& latents, Parameter& codebook,
                                    bool rebalance, std::size_t patience,
                                    std::mt19937_64& rng);

    const std::vector<std::size_t>& staleness() const { return staleness_; }

private:
    std::vector<std::size_t> staleness_;
};

}  // namespace a2
