#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "a2/features.hpp"
#include "a2/model.hpp"

namespace a2 {

struct CostItem {
    std::string module;
    std::int64_t flops = 0;   // forward pass, whole batch
    std::int64_t params = 0;  // learnable scalars
};

struct CostReport {
    std::vector<CostItem> items;
    std::int64_t total_flops = 0;
    std::int64_t total_params = 0;
    std::size_t batch_size = 0;
    std::string convention;

    const CostItem* find(const std::string& module) const;
};

// Analytical forward-pass cost under a fixed convention: dense = 2*in*out
// per sample (1 MAC = 2 FLOPs), elementwise ops = 1 per element,
// quantization = 3*m*d_c per sample, hard routing counts one specific map
// per sample, soft routing counts all N plus the weighting.
CostReport count_costs(const FeatureSchema& schema, const ModelConfig& cfg,
                       std::size_t batch_size);

// Width of a plain-MLP baseline whose total FLOPs is closest to the target
// model's at the given batch size.
std::size_t solve_matched_mlp_width(const FeatureSchema& schema, const ModelConfig& target,
                                    std::size_t batch_size);

ModelConfig matched_mlp_config(const FeatureSchema& schema, const ModelConfig& target,
                               std::size_t batch_size);

std::string cost_report_to_json(const CostReport& r);
std::string cost_report_to_table(const CostReport& r);

}  // namespace a2
