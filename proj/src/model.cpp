#include "a2/model.hpp"

#include <cmath>
#include <stdexcept>

#include "a2/serialize.hpp"

namespace a2 {

using nlohmann::json;

void ModelConfig::validate() const {
    if (hidden < 4) throw std::invalid_argument("model: hidden must be >= 4");
    if (fusion_layers < 1) throw std::invalid_argument("model: fusion_layers must be >= 1");
    if (num_domains < 1) throw std::invalid_argument("model: num_domains must be >= 1");
    if (beta < 0.0) throw std::invalid_argument("model: beta must be >= 0");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("model: dropout out of [0,1)");
    if (dmm_lr_scale <= 0.0) throw std::invalid_argument("model: dmm_lr_scale must be > 0");
    if (input_lr_scale <= 0.0) throw std::invalid_argument("model: input_lr_scale must be > 0");
    if (routing == RoutingMode::soft && routing_source != RoutingSource::mined)
        throw std::invalid_argument("model: soft routing requires mined domains");
    if (routing_source == RoutingSource::hd_field && hd_field.empty())
        throw std::invalid_argument("model: hd_field routing needs a field name");
    if (type == ModelType::mlp && mlp_layers < 1)
        throw std::invalid_argument("model: mlp_layers must be >= 1");
}

Model::Model(FeatureSchema schema, ModelConfig cfg, std::uint64_t seed)
    : schema_(std::move(schema)), cfg_(cfg), usage_(cfg.num_domains) {
    schema_.validate();
    cfg_.validate();
    if (cfg_.routing_source == RoutingSource::hd_field)
        schema_.field_index(cfg_.hd_field);  // throws on unknown field
    build_params(seed);
}

bool Model::has_dmm() const {
    return cfg_.type == ModelType::adaptive2 && cfg_.routing_source == RoutingSource::mined;
}

bool Model::is_dmm_param(const std::string& name) const {
    return name.rfind("enc.", 0) == 0 || name.rfind("dec.", 0) == 0 ||
           name.rfind("dmm.", 0) == 0;
}

bool Model::codebook_ready() const {
    return params_.get("dmm.codebook_ready").value.values[0] != 0.0;
}

namespace {

Tensor randn(std::vector<std::size_t> shape, double stddev, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : t.values) v = dist(rng);
    return t;
}

Tensor full(std::vector<std::size_t> shape, double v) {
    Tensor t(std::move(shape));
    std::fill(t.values.begin(), t.values.end(), v);
    return t;
}

}  // namespace

void Model::build_params(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto dense_block = [&](const std::string& prefix, std::size_t in, std::size_t out,
                           bool with_norm) {
        params_.create(prefix + ".W", randn({in, out}, std::sqrt(2.0 / static_cast<double>(in)), rng));
        params_.create(prefix + ".b", Tensor({out}));
        if (with_norm) {
            params_.create(prefix + ".bn.gamma", full({out}, 1.0));
            params_.create(prefix + ".bn.beta", Tensor({out}));
            params_.create(prefix + ".bn.run_mean", Tensor({out}), /*learnable=*/false);
            params_.create(prefix + ".bn.run_var", full({out}, 1.0), /*learnable=*/false);
            params_.create(prefix + ".prelu", full({out}, 0.25));
        }
    };

    for (const Field& f : schema_.fields)
        params_.create("embed." + f.name, randn({f.hash_buckets, f.dim}, 0.1, rng));

    const std::size_t D = schema_.total_dim();

    if (cfg_.type == ModelType::mlp) {
        std::size_t in = D;
        for (std::size_t l = 0; l < cfg_.mlp_layers; ++l) {
            dense_block("mlp.l" + std::to_string(l), in, cfg_.mlp_width, true);
            in = cfg_.mlp_width;
        }
        dense_block("head", in, 1, false);
        return;
    }

    const std::size_t H = cfg_.hidden;
    const std::size_t Hm = cfg_.dmm_hidden_or_default();
    const std::size_t dc = cfg_.latent_dim_or_default();

    dense_block("proj", D, H, true);

    if (has_dmm()) {
        dense_block("enc.l0", H, H, true);
        dense_block("enc.l1", H, Hm, true);
        dense_block("enc.l2", Hm, dc, true);
        params_.create("dmm.codebook",
                       randn({cfg_.num_domains, dc}, 1.0 / std::sqrt(static_cast<double>(dc)), rng))
            .lr_scale = cfg_.dmm_lr_scale;
        params_.create("dmm.codebook_ready", Tensor({1}), /*learnable=*/false);
        dense_block("dec.l0", dc, Hm, true);
        dense_block("dec.l1", Hm, H, true);
        dense_block("dec.l2", H, H, false);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            const std::string& n = params_[i].name;
            if (n.rfind("enc.", 0) == 0 || n.rfind("dec.", 0) == 0)
                params_[i].lr_scale = cfg_.dmm_lr_scale;
        }
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const std::string& n = params_[i].name;
        if (n.rfind("embed.", 0) == 0 || n.rfind("proj.", 0) == 0)
            params_[i].lr_scale = cfg_.input_lr_scale;
    }

    for (std::size_t l = 0; l < cfg_.fusion_layers; ++l) {
        const std::string lp = "fusion.l" + std::to_string(l);
        dense_block(lp + ".shared", H, H, true);
        for (std::size_t j = 0; j < cfg_.num_domains; ++j) {
            const std::string sp = lp + ".spec" + std::to_string(j);
            params_.create(sp + ".W", randn({H, H}, std::sqrt(2.0 / static_cast<double>(H)), rng));
            if (cfg_.specific_bias) params_.create(sp + ".b", Tensor({H}));
        }
    }
    dense_block("head", H, 1, false);
}

Node* Model::ffn_block(Graph& g, Node* x, const std::string& prefix, bool train,
                       double dropout_rate, std::mt19937_64* rng) {
    Node* y = g.dense(x, g.param(params_.get(prefix + ".W")), g.param(params_.get(prefix + ".b")));
    y = g.batch_norm(y, g.param(params_.get(prefix + ".bn.gamma")),
                     g.param(params_.get(prefix + ".bn.beta")),
                     params_.get(prefix + ".bn.run_mean"), params_.get(prefix + ".bn.run_var"),
                     train);
    y = g.prelu(y, g.param(params_.get(prefix + ".prelu")));
    if (train && dropout_rate > 0.0) {
        if (!rng) throw std::invalid_argument("dropout requires an RNG in train mode");
        y = g.dropout(y, dropout_rate, *rng);
    }
    return y;
}

Node* Model::encoder_forward(Graph& g, Node* x, bool train) {
    Node* h = ffn_block(g, x, "enc.l0", train, 0.0, nullptr);
    h = ffn_block(g, h, "enc.l1", train, 0.0, nullptr);
    return ffn_block(g, h, "enc.l2", train, 0.0, nullptr);
}

Node* Model::decoder_forward(Graph& g, Node* x, bool train) {
    Node* h = ffn_block(g, x, "dec.l0", train, 0.0, nullptr);
    h = ffn_block(g, h, "dec.l1", train, 0.0, nullptr);
    return g.dense(h, g.param(params_.get("dec.l2.W")), g.param(params_.get("dec.l2.b")));
}

void Model::init_codebook_from(const Tensor& latents, std::mt19937_64& rng) {
    Parameter& cb = params_.get("dmm.codebook");
    const std::size_t m = cb.value.rows(), dc = cb.value.cols();
    const std::size_t B = latents.rows();
    std::vector<std::size_t> chosen;
    if (B > 0) {
        std::uniform_int_distribution<std::size_t> first(0, B - 1);
        chosen.push_back(first(rng));
        std::vector<double> d2(B);
        while (chosen.size() < m) {
            double total = 0.0;
            for (std::size_t i = 0; i < B; ++i) {
                double best = 0.0;
                for (std::size_t c = 0; c < chosen.size(); ++c) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < dc; ++j) {
                        const double d = latents.at(i, j) - latents.at(chosen[c], j);
                        s += d * d;
                    }
                    best = c == 0 ? s : std::min(best, s);
                }
                d2[i] = best;
                total += best;
            }
            if (total == 0.0) break;  // fewer distinct latents than codes
            std::uniform_real_distribution<double> u(0.0, total);
            double r = u(rng);
            std::size_t pick = B - 1;
            for (std::size_t i = 0; i < B; ++i) {
                r -= d2[i];
                if (r <= 0.0) {
                    pick = i;
                    break;
                }
            }
            chosen.push_back(pick);
        }
    }
    std::normal_distribution<double> fallback(0.0, 1.0 / std::sqrt(static_cast<double>(dc)));
    for (std::size_t j = 0; j < m; ++j) {
        if (j < chosen.size()) {
            for (std::size_t c = 0; c < dc; ++c) cb.value.at(j, c) = latents.at(chosen[j], c);
        } else {
            for (std::size_t c = 0; c < dc; ++c) cb.value.at(j, c) = fallback(rng);
        }
    }
    params_.get("dmm.codebook_ready").value.values[0] = 1.0;
}

ForwardResult Model::forward(Graph& g, const Batch& batch, bool train,
                             std::mt19937_64* rng, int forced_domain) {
    const std::size_t B = batch.size();
    if (B == 0) throw std::invalid_argument("forward: empty batch");
    ForwardResult res;

    std::vector<Node*> parts;
    parts.reserve(schema_.fields.size());
    for (std::size_t f = 0; f < schema_.fields.size(); ++f)
        parts.push_back(
            g.rows_lookup(params_.get("embed." + schema_.fields[f].name), batch.field_rows[f]));
    Node* x = g.concat_cols(parts);

    if (cfg_.type == ModelType::mlp) {
        Node* h = x;
        for (std::size_t l = 0; l < cfg_.mlp_layers; ++l)
            h = ffn_block(g, h, "mlp.l" + std::to_string(l), train, cfg_.dropout, rng);
        Node* logits = g.dense(h, g.param(params_.get("head.W")), g.param(params_.get("head.b")));
        res.prediction = g.sigmoid(logits);
        res.task_loss = g.ce_loss(res.prediction, batch.labels);
        return res;
    }

    Node* z = ffn_block(g, x, "proj", train, 0.0, nullptr);
    res.projected = z->value;

    Tensor alpha;  // soft-routing weights, constant w.r.t. the task graph
    if (has_dmm()) {
        Node* zs = g.stop_gradient(z);
        Node* ze = encoder_forward(g, zs, train);
        if (train && !codebook_ready()) {
            if (!rng) throw std::invalid_argument("codebook init requires an RNG");
            init_codebook_from(ze->value, *rng);
        }
        Parameter& cb = params_.get("dmm.codebook");
        QuantizeResult q = quantize(ze->value, cb.value, cfg_.metric);
        res.latent = ze->value;
        res.domains = q.indices;

        Node* dec_in = cfg_.straight_through ? g.straight_through(ze, q.codes)
                                             : g.leaf(q.codes);
        Node* zhat = decoder_forward(g, dec_in, train);
        Node* recon = g.mse_loss(zhat, zs);

        std::vector<std::size_t> sel(B);
        for (std::size_t i = 0; i < B; ++i) sel[i] = static_cast<std::size_t>(q.indices[i]);
        Node* cb_rows = g.rows_lookup(cb, sel);
        Node* cb_term = g.mse_loss(cb_rows, g.leaf(ze->value));
        Node* commit = g.scale(g.mse_loss(ze, g.leaf(q.codes)), cfg_.beta);
        res.dmm_loss = g.add(g.add(recon, cb_term), commit);
        res.dmm_parts = {recon->value.values[0], cb_term->value.values[0],
                         commit->value.values[0]};
        if (cfg_.routing == RoutingMode::soft)
            alpha = soft_routing_weights(res.latent, cb.value, cfg_.similarity);
    }

    std::vector<int> k(B, 0);
    const std::size_t N = cfg_.num_domains;
    if (forced_domain >= 0) {
        std::fill(k.begin(), k.end(), forced_domain);
    } else {
        switch (cfg_.routing_source) {
            case RoutingSource::mined:
                k = res.domains;
                break;
            case RoutingSource::hd_field: {
                const std::size_t fi = schema_.field_index(cfg_.hd_field);
                for (std::size_t i = 0; i < B; ++i)
                    k[i] = static_cast<int>(batch.field_rows[fi][i] % N);
                break;
            }
            case RoutingSource::truth:
                for (std::size_t i = 0; i < B; ++i) {
                    if (batch.truth[i] < 0)
                        throw std::invalid_argument("truth routing: record without truth_domain");
                    k[i] = batch.truth[i] % static_cast<int>(N);
                }
                break;
            case RoutingSource::random:
                for (std::size_t i = 0; i < B; ++i) {
                    const std::uint64_t sid = batch.sample_ids[i];
                    k[i] = static_cast<int>(fnv1a64(&sid, sizeof(sid)) % N);
                }
                break;
        }
    }
    if (res.domains.empty()) res.domains = k;

    Node* Z = z;
    for (std::size_t l = 0; l < cfg_.fusion_layers; ++l) {
        const std::string lp = "fusion.l" + std::to_string(l);
        Node* sh = ffn_block(g, Z, lp + ".shared", train, cfg_.dropout, rng);
        std::vector<Parameter*> Ws(N);
        std::vector<Parameter*> bs;
        for (std::size_t j = 0; j < N; ++j)
            Ws[j] = &params_.get(lp + ".spec" + std::to_string(j) + ".W");
        if (cfg_.specific_bias) {
            bs.resize(N);
            for (std::size_t j = 0; j < N; ++j)
                bs[j] = &params_.get(lp + ".spec" + std::to_string(j) + ".b");
        }
        Node* sp = cfg_.routing == RoutingMode::hard
                       ? g.routed_affine(Z, Ws, bs, k)
                       : g.soft_routed_affine(Z, Ws, bs, alpha);
        if (train && cfg_.dropout > 0.0) sp = g.dropout(sp, cfg_.dropout, *rng);
        Z = g.add(sh, sp);
    }

    Node* logits = g.dense(Z, g.param(params_.get("head.W")), g.param(params_.get("head.b")));
    res.prediction = g.sigmoid(logits);
    res.task_loss = g.ce_loss(res.prediction, batch.labels);
    return res;
}

namespace {

const char* to_str(ModelType t) { return t == ModelType::adaptive2 ? "adaptive2" : "mlp"; }
const char* to_str(QuantizeMetric m) {
    return m == QuantizeMetric::squared_euclidean ? "squared_euclidean" : "cosine";
}
const char* to_str(RoutingMode r) { return r == RoutingMode::hard ? "hard" : "soft"; }
const char* to_str(SoftSimilarity s) {
    return s == SoftSimilarity::neg_squared_distance ? "neg_squared_distance" : "cosine";
}
const char* to_str(RoutingSource s) {
    switch (s) {
        case RoutingSource::mined: return "mined";
        case RoutingSource::hd_field: return "hd_field";
        case RoutingSource::truth: return "truth";
        default: return "random";
    }
}

template <typename T>
T enum_from(const std::string& s, std::initializer_list<std::pair<const char*, T>> table,
            const std::string& what) {
    for (const auto& [name, v] : table)
        if (s == name) return v;
    throw std::invalid_argument("config: unknown " + what + " '" + s + "'");
}

}  // namespace

json model_config_json(const ModelConfig& c) {
    return json{{"type", to_str(c.type)},
                {"hidden", c.hidden},
                {"fusion_layers", c.fusion_layers},
                {"num_domains", c.num_domains},
                {"beta", c.beta},
                {"metric", to_str(c.metric)},
                {"routing", to_str(c.routing)},
                {"similarity", to_str(c.similarity)},
                {"routing_source", to_str(c.routing_source)},
                {"hd_field", c.hd_field},
                {"specific_bias", c.specific_bias},
                {"straight_through", c.straight_through},
                {"dropout", c.dropout},
                {"dmm_hidden", c.dmm_hidden},
                {"latent_dim", c.latent_dim},
                {"usage_rebalance", c.usage_rebalance},
                {"rebalance_patience", c.rebalance_patience},
                {"dmm_lr_scale", c.dmm_lr_scale},
                {"input_lr_scale", c.input_lr_scale},
                {"mlp_width", c.mlp_width},
                {"mlp_layers", c.mlp_layers}};
}

ModelConfig model_config_from(const json& j) {
    ModelConfig c;
    if (j.contains("type"))
        c.type = enum_from<ModelType>(j["type"].get<std::string>(), {{"adaptive2", ModelType::adaptive2},
                                                  {"mlp", ModelType::mlp}}, "model type");
    c.hidden = j.value("hidden", c.hidden);
    c.fusion_layers = j.value("fusion_layers", c.fusion_layers);
    c.num_domains = j.value("num_domains", c.num_domains);
    c.beta = j.value("beta", c.beta);
    if (j.contains("metric"))
        c.metric = enum_from<QuantizeMetric>(
            j["metric"].get<std::string>(), {{"squared_euclidean", QuantizeMetric::squared_euclidean},
                          {"cosine", QuantizeMetric::cosine}}, "metric");
    if (j.contains("routing"))
        c.routing = enum_from<RoutingMode>(
            j["routing"].get<std::string>(), {{"hard", RoutingMode::hard}, {"soft", RoutingMode::soft}}, "routing");
    if (j.contains("similarity"))
        c.similarity = enum_from<SoftSimilarity>(
            j["similarity"].get<std::string>(), {{"neg_squared_distance", SoftSimilarity::neg_squared_distance},
                              {"cosine", SoftSimilarity::cosine}}, "similarity");
    if (j.contains("routing_source"))
        c.routing_source = enum_from<RoutingSource>(
            j["routing_source"].get<std::string>(), {{"mined", RoutingSource::mined},
                                  {"hd_field", RoutingSource::hd_field},
                                  {"truth", RoutingSource::truth},
                                  {"random", RoutingSource::random}}, "routing_source");
    c.hd_field = j.value("hd_field", c.hd_field);
    c.specific_bias = j.value("specific_bias", c.specific_bias);
    c.straight_through = j.value("straight_through", c.straight_through);
    c.dropout = j.value("dropout", c.dropout);
    c.dmm_hidden = j.value("dmm_hidden", c.dmm_hidden);
    c.latent_dim = j.value("latent_dim", c.latent_dim);
    c.usage_rebalance = j.value("usage_rebalance", c.usage_rebalance);
    c.rebalance_patience = j.value("rebalance_patience", c.rebalance_patience);
    c.dmm_lr_scale = j.value("dmm_lr_scale", c.dmm_lr_scale);
    c.input_lr_scale = j.value("input_lr_scale", c.input_lr_scale);
    c.mlp_width = j.value("mlp_width", c.mlp_width);
    c.mlp_layers = j.value("mlp_layers", c.mlp_layers);
    return c;
}

json schema_json(const FeatureSchema& s) {
    json fields = json::array();
    for (const Field& f : s.fields)
        fields.push_back({{"name", f.name},
                          {"role", f.role == FieldRole::user ? "user" : "item"},
                          {"hash_buckets", f.hash_buckets},
                          {"dim", f.dim}});
    return json{{"fields", fields}};
}

FeatureSchema schema_from(const json& j) {
    FeatureSchema s;
    if (!j.contains("fields")) throw std::invalid_argument("config: schema.fields missing");
    for (const auto& fj : j["fields"]) {
        Field f;
        f.name = fj.at("name");
        const std::string role = fj.value("role", "user");
        if (role != "user" && role != "item")
            throw std::invalid_argument("config: field role must be user|item");
        f.role = role == "user" ? FieldRole::user : FieldRole::item;
        f.hash_buckets = fj.at("hash_buckets");
        f.dim = fj.value("dim", std::size_t{32});
        s.fields.push_back(f);
    }
    s.validate();
    return s;
}

std::string model_config_to_json(const ModelConfig& cfg, const FeatureSchema& schema) {
    json j{{"format", "a2-model"},
           {"model", model_config_json(cfg)},
           {"schema", schema_json(schema)},
           {"schema_hash", schema.content_hash()}};
    return j.dump();
}

std::string Model::meta_json() const { return model_config_to_json(cfg_, schema_); }

void Model::save_checkpoint(const std::string& path) const {
    params_.save(path, meta_json());
}

Model Model::from_checkpoint(const std::string& path) {
    ParamStore probe;
    const std::string meta = ParamStore::load(path, probe);
    json j = json::parse(meta);
    Model m(schema_from(j.at("schema")), model_config_from(j.at("model")), /*seed=*/0);
    ParamStore::load(path, m.params_);
    return m;
}

}  // namespace a2
