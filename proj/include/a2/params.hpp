#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "a2/tensor.hpp"

namespace a2 {

struct OptimizerConfig {
    double learning_rate = 1e-3;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

// One named parameter with its gradient and Adam moment slots. Buffers
// (running batch-norm statistics etc.) set learnable=false: they are
// checkpointed but never touched by the optimizer.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor moment1;
    Tensor moment2;
    bool learnable = true;
    double lr_scale = 1.0;  // per-parameter learning-rate multiplier

    Parameter(std::string n, Tensor v, bool learn)
        : name(std::move(n)),
          value(std::move(v)),
          grad(zeros_like(value)),
          moment1(zeros_like(value)),
          moment2(zeros_like(value)),
          learnable(learn) {}
};

// Ordered collection of parameters. Creation order is the iteration order,
// which keeps optimizer sweeps and checkpoints deterministic.
class ParamStore {
public:
    Parameter& create(const std::string& name, Tensor init, bool learnable = true);
    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;
    bool has(const std::string& name) const { return index_.count(name) > 0; }

    std::size_t size() const { return params_.size(); }
    Parameter& operator[](std::size_t i) { return *params_[i]; }
    const Parameter& operator[](std::size_t i) const { return *params_[i]; }

    std::int64_t step() const { return step_; }

    void zero_grad();
    void adamw_step(const OptimizerConfig& cfg);

    // Full value snapshot (parameters and buffers), used for best-epoch
    // checkpointing inside the trainer.
    std::vector<Tensor> snapshot_values() const;
    void restore_values(const std::vector<Tensor>& snap);

    // Versioned binary checkpoint; round-trips bitwise. `meta` is an opaque
    // UTF-8 header (model config JSON) stored alongside the arrays.
    void save(const std::string& path, const std::string& meta) const;
    static std::string load(const std::string& path, ParamStore& out);

private:
    std::vector<std::unique_ptr<Parameter>> params_;
    std::unordered_map<std::string, std::size_t> index_;
    std::int64_t step_ = 0;
};

}  // namespace a2
