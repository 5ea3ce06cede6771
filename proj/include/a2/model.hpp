#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "a2/dmm.hpp"
#include "a2/features.hpp"
#include "a2/graph.hpp"
#include "a2/params.hpp"

namespace a2 {

enum class ModelType { adaptive2, mlp };
enum class RoutingMode { hard, soft };

// Where the per-sample domain index comes from. `mined` is the VQ-VAE path;
// the others exist for the ablation variants (hand-crafted field, ground
// truth, and a random-id control).
enum class RoutingSource { mined, hd_field, truth, random };

struct ModelConfig {
    ModelType type = ModelType::adaptive2;

    std::size_t hidden = 64;         // H
    std::size_t fusion_layers = 3;   // L
    std::size_t num_domains = 8;     // m = N (codebook size == specific nets)
    double beta = 0.25;              // commitment cost

    QuantizeMetric metric = QuantizeMetric::squared_euclidean;
    RoutingMode routing = RoutingMode::hard;
    SoftSimilarity similarity = SoftSimilarity::neg_squared_distance;
    RoutingSource routing_source = RoutingSource::mined;
    std::string hd_field;            // schema field for RoutingSource::hd_field

    bool specific_bias = true;
    bool straight_through = true;    // decoder sees z_e + sg(z_q - z_e)
    double dropout = 0.0;            // shared/specific blocks only

    // 0 means derived default: dmm_hidden = H/2, latent_dim = H/4.
    std::size_t dmm_hidden = 0;
    std::size_t latent_dim = 0;

    bool usage_rebalance = false;
    std::size_t rebalance_patience = 100;

    // The DMM chases a non-stationary target (the task-trained projection);
    // scaling its learning rate lets it converge without speeding up the rest
    // of the network. 1.0 recovers a single uniform learning rate.
    double dmm_lr_scale = 1.0;

    // Damps updates to the embedding tables and input projection so the
    // geometry the DMM clusters stays quasi-stationary while the fusion
    // stack and head train at full rate.
    double input_lr_scale = 1.0;

    // plain-MLP baseline settings (type == mlp)
    std::size_t mlp_width = 64;
    std::size_t mlp_layers = 3;

    std::size_t dmm_hidden_or_default() const { return dmm_hidden ? dmm_hidden : std::max<std::size_t>(1, hidden / 2); }
    std::size_t latent_dim_or_default() const { return latent_dim ? latent_dim : std::max<std::size_t>(1, hidden / 4); }

    void validate() const;
};

struct DmmLossParts {
    double reconstruction = 0.0;
    double codebook = 0.0;
    double commitment = 0.0;
};

struct ForwardResult {
    Node* prediction = nullptr;  // [B x 1], values in (0,1)
    Node* task_loss = nullptr;   // scalar
    Node* dmm_loss = nullptr;    // scalar; null when the model has no DMM
    std::vector<int> domains;    // k per sample (empty for plain MLP)
    Tensor projected;            // z  [B x H]
    Tensor latent;               // z_e [B x d_c] (empty without DMM)
    DmmLossParts dmm_parts;
};

// The full prediction network: embeddings, input projection, optional
// VQ-VAE domain miner, stacked shared+specific fusion layers, sigmoid head.
// A plain-MLP baseline shares the embedding and head plumbing.
class Model {
public:
    Model(FeatureSchema schema, ModelConfig cfg, std::uint64_t seed);

    ForwardResult forward(Graph& g, const Batch& batch, bool train,
                          std::mt19937_64* rng = nullptr, int forced_domain = -1);

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const ModelConfig& config() const { return cfg_; }
    const FeatureSchema& schema() const { return schema_; }
    UsageTracker& usage() { return usage_; }

    bool has_dmm() const;
    bool codebook_ready() const;

    // Names of the parameters owned by the DMM (encoder, decoder, codebook);
    // everything else belongs to the task network.
    bool is_dmm_param(const std::string& name) const;

    std::string meta_json() const;
    static Model from_checkpoint(const std::string& path);
    void save_checkpoint(const std::string& path) const;

private:
    void build_params(std::uint64_t seed);
    Node* ffn_block(Graph& g, Node* x, const std::string& prefix, bool train,
                    double dropout_rate, std::mt19937_64* rng);
    Node* encoder_forward(Graph& g, Node* x, bool train);
    Node* decoder_forward(Graph& g, Node* x, bool train);
    void init_codebook_from(const Tensor& latents, std::mt19937_64& rng);

    FeatureSchema schema_;
    ModelConfig cfg_;
    ParamStore params_;
    UsageTracker usage_;
};

std::string model_config_to_json(const ModelConfig& cfg, const FeatureSchema& schema);

}  // namespace a2
