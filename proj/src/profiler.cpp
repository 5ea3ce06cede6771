#include "a2/profiler.hpp"

#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace a2 {

namespace {

using I64 = std::int64_t;

struct Acc {
    I64 flops = 0;  // per sample
    I64 params = 0;

    void dense(I64 in, I64 out) {
        flops += 2 * in * out;
        params += in * out + out;
    }
    void norm_act(I64 out) {  // batch norm + prelu on a width-out block
        flops += 2 * out;
        params += 3 * out;  // gamma, beta, slope; running stats are buffers
    }
    void elementwise(I64 n) { flops += n; }
};

}  // namespace

const CostItem* CostReport::find(const std::string& module) const {
    for (const CostItem& i : items)
        if (i.module == module) return &i;
    return nullptr;
}

CostReport count_costs(const FeatureSchema& schema, const ModelConfig& cfg,
                       std::size_t batch_size) {
    if (batch_size < 1) throw std::invalid_argument("count_costs: batch_size must be >= 1");
    schema.validate();
    cfg.validate();
    const I64 B = static_cast<I64>(batch_size);
    CostReport rep;
    rep.batch_size = batch_size;
    rep.convention =
        "forward pass only; 1 MAC = 2 FLOPs; dense = 2*in*out/sample; "
        "elementwise (activation, batch norm, fusion add) = 1/element; "
        "quantization = 3*m*d_c/sample; hard routing counts 1 specific map/sample";

    auto push = [&](const std::string& name, const Acc& a) {
        rep.items.push_back({name, a.flops * B, a.params});
    };

    {
        Acc emb;
        for (const Field& f : schema.fields)
            emb.params += static_cast<I64>(f.hash_buckets) * static_cast<I64>(f.dim);
        push("embeddings", emb);
    }
    const I64 D = static_cast<I64>(schema.total_dim());

    if (cfg.type == ModelType::mlp) {
        Acc hidden;
        I64 in = D;
        const I64 W = static_cast<I64>(cfg.mlp_width);
        for (std::size_t l = 0; l < cfg.mlp_layers; ++l) {
            hidden.dense(in, W);
            hidden.norm_act(W);
            in = W;
        }
        push("hidden", hidden);
        Acc head;
        head.dense(in, 1);
        head.elementwise(1);  // sigmoid
        push("head", head);
    } else {
        const I64 H = static_cast<I64>(cfg.hidden);
        const I64 Hm = static_cast<I64>(cfg.dmm_hidden_or_default());
        const I64 dc = static_cast<I64>(cfg.latent_dim_or_default());
        const I64 m = static_cast<I64>(cfg.num_domains);

        Acc proj;
        proj.dense(D, H);
        proj.norm_act(H);
        push("projection", proj);

        const bool dmm = cfg.routing_source == RoutingSource::mined;
        if (dmm) {
            Acc enc;
            enc.dense(H, H);
            enc.norm_act(H);
            enc.dense(H, Hm);
            enc.norm_act(Hm);
            enc.dense(Hm, dc);
            enc.norm_act(dc);
            push("encoder", enc);

            Acc quant;
            quant.elementwise(3 * m * dc);
            push("quantizer", quant);

            Acc cb;
            cb.params += m * dc;
            push("codebook", cb);

            Acc dec;
            dec.dense(dc, Hm);
            dec.norm_act(Hm);
            dec.dense(Hm, H);
            dec.norm_act(H);
            dec.dense(H, H);
            push("decoder", dec);
        }

        Acc fusion;
        for (std::size_t l = 0; l < cfg.fusion_layers; ++l) {
            fusion.dense(H, H);  // shared
            fusion.norm_act(H);
            // specific maps: all N hold parameters, routing decides the flops
            fusion.params += m * (H * H + (cfg.specific_bias ? H : 0));
            if (cfg.routing == RoutingMode::hard) {
                fusion.flops += 2 * H * H;
            } else {
                fusion.flops += m * 2 * H * H + m * H;  // all maps + weighting
                fusion.flops += 3 * m * dc + m;         // similarities + softmax
            }
            fusion.elementwise(H);  // fusion add
        }
        push("fusion", fusion);

        Acc head;
        head.dense(H, 1);
        head.elementwise(1);
        push("head", head);
    }

    for (const CostItem& i : rep.items) {
        rep.total_flops += i.flops;
        rep.total_params += i.params;
    }
    return rep;
}

std::size_t solve_matched_mlp_width(const FeatureSchema& schema, const ModelConfig& target,
                                    std::size_t batch_size) {
    const I64 want = count_costs(schema, target, batch_size).total_flops;
    ModelConfig mlp;
    mlp.type = ModelType::mlp;
    mlp.mlp_layers = 3;
    std::size_t best_w = 1;
    I64 best_err = std::numeric_limits<I64>::max();
    for (std::size_t w = 1; w <= 8192; ++w) {
        mlp.mlp_width = w;
        const I64 got = count_costs(schema, mlp, batch_size).total_flops;
        const I64 err = got > want ? got - want : want - got;
        if (err < best_err) {
            best_err = err;
            best_w = w;
        }
        if (got > 2 * want) break;
    }
    return best_w;
}

ModelConfig matched_mlp_config(const FeatureSchema& schema, const ModelConfig& target,
                               std::size_t batch_size) {
    ModelConfig mlp;
    mlp.type = ModelType::mlp;
    mlp.mlp_layers = 3;
    mlp.dropout = target.dropout;
    mlp.mlp_width = solve_matched_mlp_width(schema, target, batch_size);
    return mlp;
}

std::string cost_report_to_json(const CostReport& r) {
    nlohmann::json items = nlohmann::json::array();
    for (const CostItem& i : r.items)
        items.push_back({{"module", i.module}, {"flops", i.flops}, {"params", i.params}});
    nlohmann::json j{{"batch_size", r.batch_size},
                     {"convention", r.convention},
                     {"breakdown", items},
                     {"total_flops", r.total_flops},
                     {"total_params", r.total_params}};
    return j.dump(2);
}

std::string cost_report_to_table(const CostReport& r) {
    std::ostringstream os;
    os << "batch size: " << r.batch_size << "\n";
    os << "convention: " << r.convention << "\n";
    os << "module        flops            params\n";
    for (const CostItem& i : r.items) {
        os << i.module;
        for (std::size_t p = i.module.size(); p < 14; ++p) os << ' ';
        std::string f = std::to_string(i.flops);
        os << f;
        for (std::size_t p = f.size(); p < 17; ++p) os << ' ';
        os << i.params << "\n";
    }
    os << "total         " << r.total_flops;
    std::string f = std::to_string(r.total_flops);
    for (std::size_t p = f.size(); p < 17; ++p) os << ' ';
    os << r.total_params << "\n";
    return os.str();
}

}  // namespace a2
