#include "a2/runconfig.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "a2/serialize.hpp"

namespace a2 {

using nlohmann::json;

void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override '" + assignment + "' is not key.path=value");
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    json* cur = &j;
    std::stringstream ss(path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) throw ConfigError("override '" + assignment + "' has no key");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) cur = &(*cur)[parts[i]];

    // typed if it parses as JSON (number/bool/null), else a plain string
    json parsed = json::parse(value, nullptr, /*allow_exceptions=*/false);
    (*cur)[parts.back()] = parsed.is_discarded() || parsed.is_string() ? json(value) : parsed;
}

namespace {

SyntheticConfig synthetic_from(const json& j) {
    SyntheticConfig c;
    c.domains = j.value("domains", c.domains);
    c.fields = j.value("fields", c.fields);
    c.vocab = j.value("vocab", c.vocab);
    c.concentration = j.value("concentration", c.concentration);
    c.samples = j.value("samples", c.samples);
    c.seed = j.value("seed", c.seed);
    c.weight_scale = j.value("weight_scale", c.weight_scale);
    c.bias_scale = j.value("bias_scale", c.bias_scale);
    if (j.contains("fixed_bias")) c.fixed_bias = j["fixed_bias"].get<double>();
    c.conflicting = j.value("conflicting", c.conflicting);
    c.shared_fields = j.value("shared_fields", c.shared_fields);
    if (j.contains("shared_concentration"))
        c.shared_concentration = j["shared_concentration"].get<double>();
    c.hash_buckets = j.value("hash_buckets", c.hash_buckets);
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    return c;
}

TrainConfig training_from(const json& j) {
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
    c.deterministic = j.value("deterministic", c.deterministic);
    c.dmm_warmup_batches = j.value("dmm_warmup_batches", c.dmm_warmup_batches);
    c.task_loss_scale = j.value("task_loss_scale", c.task_loss_scale);
    c.dmm_loss_scale = j.value("dmm_loss_scale", c.dmm_loss_scale);
    c.optimizer.learning_rate = j.value("learning_rate", c.optimizer.learning_rate);
    c.optimizer.weight_decay = j.value("weight_decay", c.optimizer.weight_decay);
    c.optimizer.beta1 = j.value("beta1", c.optimizer.beta1);
    c.optimizer.beta2 = j.value("beta2", c.optimizer.beta2);
    c.optimizer.epsilon = j.value("epsilon", c.optimizer.epsilon);
    return c;
}

SplitSpec split_from(const json& j) {
    SplitSpec s;
    s.train_fraction = j.value("train", s.train_fraction);
    s.val_fraction = j.value("val", s.val_fraction);
    s.test_fraction = j.value("test", s.test_fraction);
    s.seed = j.value("seed", s.seed);
    return s;
}

}  // namespace

RunConfig parse_run_config(const json& j) {
    RunConfig cfg;
    cfg.resolved = j;
    try {
        if (!j.contains("data"))
            throw ConfigError("config: missing section 'data' (synthetic or csv source)");
        const json& data = j["data"];
        const bool has_syn = data.contains("synthetic");
        const bool has_csv = data.contains("csv");
        if (has_syn == has_csv)
            throw ConfigError("config: data must name exactly one source (synthetic | csv)");
        cfg.synthetic = has_syn;
        if (has_syn) {
            cfg.synthetic_cfg = synthetic_from(data["synthetic"]);
            cfg.synthetic_cfg.validate();
        } else {
            const json& cj = data["csv"];
            if (!cj.contains("path")) throw ConfigError("config: data.csv.path missing");
            cfg.csv_path = cj["path"].get<std::string>();
            cfg.csv_opts.label_column = cj.value("label_column", cfg.csv_opts.label_column);
            cfg.csv_opts.max_rows = cj.value("max_rows", cfg.csv_opts.max_rows);
            if (!cj.contains("schema"))
                throw ConfigError("config: data.csv.schema missing");
            cfg.csv_schema = schema_from(cj["schema"]);
        }
        if (j.contains("split")) cfg.split_spec = split_from(j["split"]);
        cfg.split_spec.validate();
        if (j.contains("model")) cfg.model = model_config_from(j["model"]);
        cfg.model.validate();
        if (j.contains("training")) cfg.training = training_from(j["training"]);
        cfg.training.validate();
        cfg.output_dir = j.value("output_dir", cfg.output_dir);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    json j = json::parse(is, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw ConfigError("config: " + path + " is not valid JSON");
    for (const std::string& o : overrides) apply_override(j, o);
    return parse_run_config(j);
}

Dataset load_data(const RunConfig& cfg) {
    if (cfg.synthetic) return generate_synthetic(cfg.synthetic_cfg);
    return load_csv(cfg.csv_path, cfg.csv_schema, cfg.csv_opts);
}

std::string config_hash(const json& resolved) {
    const std::string s = resolved.dump();
    const std::uint64_t h = fnv1a64(s.data(), s.size());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << content;
}

void write_manifest(const std::string& dir, const RunConfig& cfg,
                    const std::vector<std::string>& files, const json& metrics_summary) {
    json j{{"config", cfg.resolved},
           {"seed", cfg.training.seed},
           {"config_hash", config_hash(cfg.resolved)},
           {"files", files},
           {"metrics", metrics_summary}};
    // write then rename so the manifest appears atomically at run end
    const std::string tmp = dir + "/manifest.json.tmp";
    write_text_file(tmp, j.dump(2) + "\n");
    std::filesystem::rename(tmp, dir + "/manifest.json");
}

}  // namespace a2
