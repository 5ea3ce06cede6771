#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "a2/data.hpp"
#include "a2/metrics.hpp"
#include "a2/model.hpp"
#include "a2/params.hpp"

namespace a2 {

struct TrainConfig {
    std::size_t epochs = 5;
    std::size_t batch_size = 256;
    OptimizerConfig optimizer;
    std::uint64_t seed = 42;
    std::size_t early_stop_patience = 1;
    bool deterministic = true;
    std::size_t dmm_warmup_batches = 0;  // route everything to domain 0 first

    // Loss-term switches used by the separation experiments; both default on.
    double task_loss_scale = 1.0;
    double dmm_loss_scale = 1.0;

    void validate() const;
};

struct EpochStats {
    double mean_dmm_loss = 0.0;
    double mean_task_loss = 0.0;
    double mean_total_loss = 0.0;
    double val_auc = 0.0;
    double val_logloss = 0.0;
    std::vector<std::size_t> codebook_usage;
    double wall_seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    double first_batch_dmm_loss = 0.0;
    std::size_t best_epoch = 0;  // 0-based index into epochs
};

// Raised on a non-finite loss; training never silently skips a batch.
struct TrainError : std::runtime_error {
    std::size_t epoch, batch;
    double dmm_loss, task_loss;
    TrainError(std::size_t e, std::size_t b, double ld, double lt);
};

// Streamed mini-batch co-training of the DMM loss and the task loss. The
// model is left at the best-validation-AUC snapshot.
TrainHistory train(Model& model, const Dataset& train_split, const Dataset& val_split,
                   const TrainConfig& cfg);

// Eval-mode metrics; never mutates the model. NMI and cluster accuracy are
// reported when the split carries truth domains and the model mines them.
MetricsReport evaluate(Model& model, const Dataset& split, std::size_t batch_size = 1024);

// Per-sample forward artifacts for the export command.
struct AssignmentExport {
    std::vector<int> domains;
    std::vector<int> truth;
    Tensor projected;  // z per sample
    Tensor latent;     // z_e per sample (empty without DMM)
};
AssignmentExport export_assignments(Model& model, const Dataset& split,
                                    std::size_t batch_size = 1024);

// True when validation AUC has not improved for `patience` consecutive
// epochs. Improvement means strictly exceeding the best AUC so far.
bool should_stop(const std::vector<double>& val_aucs, std::size_t patience);
std::size_t best_epoch(const std::vector<double>& val_aucs);

std::string history_to_csv(const TrainHistory& h);

}  // namespace a2
