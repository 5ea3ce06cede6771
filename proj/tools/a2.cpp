#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "a2/data.hpp"
#include "a2/metrics.hpp"
#include "a2/model.hpp"
#include "a2/profiler.hpp"
#include "a2/runconfig.hpp"
#include "a2/serialize.hpp"
#include "a2/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitTraining = 3;

a2::MetricsReport eval_report(a2::Model& model, const a2::Dataset& split) {
    return a2::evaluate(model, split);
}

json report_json(const a2::MetricsReport& r) {
    return json::parse(a2::metrics_to_json(r));
}

const a2::Dataset& pick_split(const a2::Splits& s, const std::string& name) {
    if (name == "train") return s.train;
    if (name == "val") return s.val;
    if (name == "test") return s.test;
    throw a2::ConfigError("unknown split '" + name + "' (train|val|test)");
}

void require_schema_match(const a2::Model& model, const a2::Dataset& ds) {
    if (model.schema().content_hash() != ds.schema.content_hash())
        throw a2::ConfigError("checkpoint schema does not match the configured data schema");
}

double usage_entropy(const std::vector<std::size_t>& usage) {
    std::size_t total = 0;
    for (std::size_t u : usage) total += u;
    if (total == 0) return 0.0;
    double h = 0.0;
    for (std::size_t u : usage) {
        if (u == 0) continue;
        const double p = static_cast<double>(u) / static_cast<double>(total);
        h -= p * std::log(p);
    }
    return h;
}

struct TrainArtifacts {
    a2::TrainHistory history;
    a2::MetricsReport val, test;
    std::string checkpoint_path;
};

TrainArtifacts run_train(const a2::RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    a2::Dataset ds = a2::load_data(cfg);
    a2::Splits splits = a2::split(ds, cfg.split_spec);
    a2::Model model(ds.schema, cfg.model, cfg.training.seed);

    TrainArtifacts art;
    art.history = a2::train(model, splits.train, splits.val, cfg.training);
    art.val = eval_report(model, splits.val);
    art.test = eval_report(model, splits.test);

    art.checkpoint_path = out_dir + "/checkpoint.bin";
    model.save_checkpoint(art.checkpoint_path);
    a2::write_text_file(out_dir + "/history.csv", a2::history_to_csv(art.history));
    json metrics{{"val", report_json(art.val)}, {"test", report_json(art.test)}};
    a2::write_text_file(out_dir + "/metrics.json", metrics.dump(2) + "\n");
    a2::write_manifest(out_dir, cfg,
                       {"checkpoint.bin", "history.csv", "metrics.json", "manifest.json"},
                       metrics);
    return art;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out_override) {
    a2::RunConfig cfg = a2::load_run_config(config_path, overrides);
    const std::string out_dir = out_override.empty() ? cfg.output_dir : out_override;
    TrainArtifacts art = run_train(cfg, out_dir);
    std::cout << "train: best epoch " << art.history.best_epoch + 1 << "/"
              << art.history.epochs.size() << "  val auc " << art.val.auc
              << "  test auc " << art.test.auc << "\n"
              << "artifacts in " << out_dir << "\n";
    return 0;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& config_path,
                 const std::vector<std::string>& overrides, const std::string& split_name,
                 const std::string& out_path) {
    a2::RunConfig cfg = a2::load_run_config(config_path, overrides);
    a2::Model model = a2::Model::from_checkpoint(checkpoint);
    a2::Dataset ds = a2::load_data(cfg);
    require_schema_match(model, ds);
    a2::Splits splits = a2::split(ds, cfg.split_spec);
    a2::MetricsReport r = eval_report(model, pick_split(splits, split_name));
    const std::string text = a2::metrics_to_json(r);
    std::cout << text << "\n";
    if (!out_path.empty()) a2::write_text_file(out_path, text + "\n");
    return 0;
}

int cmd_export_domains(const std::string& checkpoint, const std::string& config_path,
                       const std::vector<std::string>& overrides, const std::string& stage,
                       const std::string& split_name, const std::string& out_dir) {
    if (stage != "pre" && stage != "post")
        throw a2::ConfigError("--stage must be pre or post");
    a2::RunConfig cfg = a2::load_run_config(config_path, overrides);
    a2::Model model = a2::Model::from_checkpoint(checkpoint);
    a2::Dataset ds = a2::load_data(cfg);
    require_schema_match(model, ds);
    a2::Splits splits = a2::split(ds, cfg.split_spec);
    const a2::Dataset& part = pick_split(splits, split_name);
    a2::AssignmentExport ex = a2::export_assignments(model, part);

    fs::create_directories(out_dir);
    const bool with_truth = part.has_truth_domains();

    std::ostringstream dom;
    dom << "sample_id,k" << (with_truth ? ",truth_domain" : "") << "\n";
    for (std::size_t i = 0; i < ex.domains.size(); ++i) {
        dom << i << ',' << ex.domains[i];
        if (with_truth) dom << ',' << ex.truth[i];
        dom << "\n";
    }
    a2::write_text_file(out_dir + "/domains.csv", dom.str());

    const a2::Tensor& source = stage == "post" ? ex.latent : ex.projected;
    a2::ProjectionResult proj = a2::pca_project(source, 2);
    std::ostringstream pc;
    pc << "x,y,k" << (with_truth ? ",truth_domain" : "") << "\n";
    for (std::size_t i = 0; i < proj.coords.rows(); ++i) {
        pc << proj.coords.at(i, 0) << ',' << proj.coords.at(i, 1) << ',' << ex.domains[i];
        if (with_truth) pc << ',' << ex.truth[i];
        pc << "\n";
    }
    a2::write_text_file(out_dir + "/projection_" + stage + ".csv", pc.str());

    a2::write_manifest(out_dir, cfg,
                       {"domains.csv", "projection_" + stage + ".csv", "manifest.json"},
                       json{{"samples", ex.domains.size()}, {"stage", stage}});
    std::cout << "exported " << ex.domains.size() << " samples to " << out_dir << "\n";
    return 0;
}

int cmd_profile(const std::string& config_path, const std::string& checkpoint,
                const std::vector<std::string>& overrides, std::size_t batch, bool as_json) {
    a2::FeatureSchema schema;
    a2::ModelConfig mc;
    if (!checkpoint.empty()) {
        a2::Model model = a2::Model::from_checkpoint(checkpoint);
        schema = model.schema();
        mc = model.config();
    } else if (!config_path.empty()) {
        a2::RunConfig cfg = a2::load_run_config(config_path, overrides);
        schema = cfg.synthetic ? a2::synthetic_schema(cfg.synthetic_cfg) : cfg.csv_schema;
        mc = cfg.model;
    } else {
        throw a2::ConfigError("profile needs --config or --checkpoint");
    }
    a2::CostReport main = a2::count_costs(schema, mc, batch);
    a2::ModelConfig matched = a2::matched_mlp_config(schema, mc, batch);
    a2::CostReport baseline = a2::count_costs(schema, matched, batch);
    if (as_json) {
        json j{{"batch_size", batch},
               {"model", json::parse(a2::cost_report_to_json(main))},
               {"matched_mlp", json::parse(a2::cost_report_to_json(baseline))},
               {"matched_mlp_width", matched.mlp_width}};
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "model (batch " << batch << ")\n"
                  << a2::cost_report_to_table(main) << "\n"
                  << "flops-matched mlp baseline (width " << matched.mlp_width << ")\n"
                  << a2::cost_report_to_table(baseline);
    }
    return 0;
}

int cmd_sweep_m(const std::string& config_path, const std::vector<std::string>& overrides,
                const std::vector<std::size_t>& m_values, const std::string& out_override) {
    if (m_values.empty()) throw a2::ConfigError("sweep-m needs at least one --m value");
    a2::RunConfig base = a2::load_run_config(config_path, overrides);
    const std::string out_dir = out_override.empty() ? base.output_dir : out_override;
    fs::create_directories(out_dir);

    struct Row {
        std::size_t m;
        double val_auc, nmi = std::nan(""), entropy;
    };
    std::vector<Row> rows;
    for (std::size_t m : m_values) {
        a2::RunConfig cfg = base;
        cfg.model.num_domains = m;
        cfg.resolved["model"]["num_domains"] = m;
        const std::string run_dir = out_dir + "/m" + std::to_string(m);
        TrainArtifacts art = run_train(cfg, run_dir);
        Row row{m, art.val.auc, std::nan(""), 0.0};
        if (art.val.nmi) row.nmi = *art.val.nmi;
        if (!art.history.epochs.empty())
            row.entropy = usage_entropy(art.history.epochs.back().codebook_usage);
        rows.push_back(row);
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].val_auc > rows[best].val_auc) best = i;

    std::ostringstream csv;
    csv << "m,val_auc,nmi,usage_entropy,best\n";
    std::cout << "   m   val_auc       nmi  usage_entropy\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Row& r = rows[i];
        csv << r.m << ',' << r.val_auc << ',' << r.nmi << ',' << r.entropy << ','
            << (i == best ? 1 : 0) << "\n";
        char line[128];
        std::snprintf(line, sizeof(line), "%4zu  %8.5f  %8.5f  %13.5f%s", r.m, r.val_auc,
                      r.nmi, r.entropy, i == best ? "  <- best" : "");
        std::cout << line << "\n";
    }
    a2::write_text_file(out_dir + "/sweep.csv", csv.str());
    json summary{{"best_m", rows[best].m}, {"base_seed", base.training.seed}};
    a2::write_manifest(out_dir, base, {"sweep.csv", "manifest.json"}, summary);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive domain mining CTR toolkit"};
    app.require_subcommand(1);

    std::string config_path, checkpoint, out_dir, out_path;
    std::string stage = "post", split_name = "test";
    std::vector<std::string> overrides;
    std::vector<std::size_t> m_values;
    std::size_t batch = 4096;
    bool as_json = false;

    auto* train = app.add_subcommand("train", "train a model from a config");
    train->add_option("--config", config_path, "run config JSON")->required();
    train->add_option("--override", overrides, "dotted key.path=value overrides");
    train->add_option("--output", out_dir, "output directory (overrides config)");

    auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint");
    evaluate->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    evaluate->add_option("--config", config_path, "run config JSON")->required();
    evaluate->add_option("--override", overrides, "dotted key.path=value overrides");
    evaluate->add_option("--split", split_name, "train|val|test (default test)");
    evaluate->add_option("--output", out_path, "also write metrics JSON here");

    auto* exportd = app.add_subcommand("export-domains", "export assignments + 2-D projection");
    exportd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    exportd->add_option("--config", config_path, "run config JSON")->required();
    exportd->add_option("--override", overrides, "dotted key.path=value overrides");
    exportd->add_option("--stage", stage, "pre (projected input) | post (latent)");
    exportd->add_option("--split", split_name, "train|val|test (default test)");
    exportd->add_option("--output", out_dir, "output directory")->required();

    auto* profile = app.add_subcommand("profile", "FLOPs/parameter report");
    profile->add_option("--config", config_path, "run config JSON");
    profile->add_option("--checkpoint", checkpoint, "checkpoint file");
    profile->add_option("--override", overrides, "dotted key.path=value overrides");
    profile->add_option("--batch", batch, "batch size (default 4096)");
    profile->add_flag("--json", as_json, "emit JSON instead of the text table");

    auto* sweep = app.add_subcommand("sweep-m", "train across codebook sizes");
    sweep->add_option("--config", config_path, "run config JSON")->required();
    sweep->add_option("--override", overrides, "dotted key.path=value overrides");
    sweep->add_option("--m", m_values, "codebook sizes to sweep")->required();
    sweep->add_option("--output", out_dir, "output directory (overrides config)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(config_path, overrides, out_dir);
        if (evaluate->parsed())
            return cmd_evaluate(checkpoint, config_path, overrides, split_name, out_path);
        if (exportd->parsed())
            return cmd_export_domains(checkpoint, config_path, overrides, stage, split_name,
                                      out_dir);
        if (profile->parsed()) return cmd_profile(config_path, checkpoint, overrides, batch, as_json);
        if (sweep->parsed()) return cmd_sweep_m(config_path, overrides, m_values, out_dir);
    } catch (const a2::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const a2::TrainError& e) {
        std::cerr << "training failure: " << e.what() << "\n";
        return kExitTraining;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
