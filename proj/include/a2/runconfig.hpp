#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "a2/data.hpp"
#include "a2/model.hpp"
#include "a2/trainer.hpp"

namespace a2 {

// Invalid or inconsistent configuration; maps to CLI exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    nlohmann::json resolved;  // full config after overrides, for the manifest

    bool synthetic = true;
    SyntheticConfig synthetic_cfg;
    std::string csv_path;
    CsvOptions csv_opts;
    FeatureSchema csv_schema;

    SplitSpec split_spec;
    ModelConfig model;
    TrainConfig training;
    std::string output_dir = "runs/out";
};

// `key.path=value` applied onto the raw JSON before parsing.
void apply_override(nlohmann::json& j, const std::string& assignment);

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& overrides);

Dataset load_data(const RunConfig& cfg);

std::string config_hash(const nlohmann::json& resolved);

void write_manifest(const std::string& dir, const RunConfig& cfg,
                    const std::vector<std::string>& files,
                    const nlohmann::json& metrics_summary);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace a2
