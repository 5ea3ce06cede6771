#pragma once

#include <optional>
#include <string>
#include <vector>

#include "a2/tensor.hpp"

namespace a2 {

struct MetricsReport {
    double auc = 0.0;
    double logloss = 0.0;
    std::optional<double> nmi;
    std::optional<double> cluster_accuracy;
    std::size_t samples = 0;
};

// Mann-Whitney AUC: probability a random positive outranks a random negative,
// ties counted one half. Throws if only one class is present.
double auc(const std::vector<double>& scores, const std::vector<double>& labels);

// Mean binary cross-entropy, probabilities clamped to [1e-7, 1-1e-7].
double logloss(const std::vector<double>& probs, const std::vector<double>& labels);

// Normalized mutual information with arithmetic-mean normalization; 0 when
// either partition is constant.
double nmi(const std::vector<int>& assignments, const std::vector<int>& truth);

// Best injective cluster-to-label matching accuracy; both sides limited to
// 16 distinct values.
double cluster_accuracy(const std::vector<int>& assignments, const std::vector<int>& truth);

struct ProjectionResult {
    Tensor coords;          // [n x out_dim]
    bool degenerate = false;  // all-identical input
};

// Centered projection onto the top principal axes. Deterministic sign: each
// axis has its first nonzero component positive.
ProjectionResult pca_project(const Tensor& vectors, std::size_t out_dim = 2);

std::string metrics_to_json(const MetricsReport& r);

}  // namespace a2
