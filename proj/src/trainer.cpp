#include "a2/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "a2/graph.hpp"

namespace a2 {

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("training: epochs must be >= 1");
    if (batch_size < 2) throw std::invalid_argument("training: batch_size must be >= 2");
    optimizer.validate();
}

TrainError::TrainError(std::size_t e, std::size_t b, double ld, double lt)
    : std::runtime_error("non-finite loss at epoch " + std::to_string(e) + " batch " +
                         std::to_string(b) + " (dmm=" + std::to_string(ld) +
                         ", task=" + std::to_string(lt) + ")"),
      epoch(e), batch(b), dmm_loss(ld), task_loss(lt) {}

bool should_stop(const std::vector<double>& val_aucs, std::size_t patience) {
    if (val_aucs.empty()) return false;
    double best = val_aucs[0];
    std::size_t since_best = 0;
    for (std::size_t i = 1; i < val_aucs.size(); ++i) {
        if (val_aucs[i] > best) {
            best = val_aucs[i];
            since_best = 0;
        } else {
            ++since_best;
        }
    }
    return since_best >= std::max<std::size_t>(patience, 1);
}

std::size_t best_epoch(const std::vector<double>& val_aucs) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < val_aucs.size(); ++i)
        if (val_aucs[i] > val_aucs[best]) best = i;  // ties keep the earliest
    return best;
}

TrainHistory train(Model& model, const Dataset& train_split, const Dataset& val_split,
                   const TrainConfig& cfg) {
    cfg.validate();
    if (train_split.records.empty()) throw std::invalid_argument("train: empty train split");

    TrainHistory hist;
    std::mt19937_64 shuffle_rng(cfg.seed);
    std::mt19937_64 model_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<double> val_aucs;
    std::vector<Tensor> best_snapshot;
    std::size_t global_batch = 0;
    bool first_batch = true;

    const std::size_t n = train_split.records.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double sum_ld = 0.0, sum_lt = 0.0;
        std::size_t n_batches = 0;
        std::vector<std::size_t> usage(model.config().num_domains, 0);

        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t end = std::min(n, start + cfg.batch_size);
            if (end - start < 2) break;  // batch norm needs >= 2 rows

            std::vector<FeatureRecord> recs;
            recs.reserve(end - start);
            for (std::size_t i = start; i < end; ++i)
                recs.push_back(train_split.records[order[i]]);
            Batch batch = make_batch(model.schema(), recs, 0, recs.size(), start);

            const int forced =
                global_batch < cfg.dmm_warmup_batches && model.has_dmm() ? 0 : -1;

            Graph g;
            ForwardResult fr = model.forward(g, batch, /*train=*/true, &model_rng, forced);

            Node* loss = g.scale(fr.task_loss, cfg.task_loss_scale);
            double ld = 0.0;
            if (fr.dmm_loss) {
                loss = g.add(loss, g.scale(fr.dmm_loss, cfg.dmm_loss_scale));
                ld = fr.dmm_loss->value.values[0];
            }
            const double lt = fr.task_loss->value.values[0];
            if (!std::isfinite(loss->value.values[0]))
                throw TrainError(epoch + 1, n_batches + 1, ld, lt);

            if (first_batch) {
                hist.first_batch_dmm_loss = ld;
                first_batch = false;
            }

            model.params().zero_grad();
            g.backward(loss);
            model.params().adamw_step(cfg.optimizer);

            if (model.has_dmm()) {
                std::vector<std::size_t> h = model.usage().update(
                    fr.domains, fr.latent, model.params().get("dmm.codebook"),
                    model.config().usage_rebalance, model.config().rebalance_patience,
                    model_rng);
                for (std::size_t j = 0; j < h.size(); ++j) usage[j] += h[j];
            }

            sum_ld += ld;
            sum_lt += lt;
            ++n_batches;
            ++global_batch;
        }

        EpochStats es;
        es.mean_dmm_loss = n_batches ? sum_ld / static_cast<double>(n_batches) : 0.0;
        es.mean_task_loss = n_batches ? sum_lt / static_cast<double>(n_batches) : 0.0;
        es.mean_total_loss = es.mean_dmm_loss + es.mean_task_loss;
        es.codebook_usage = usage;

        if (!val_split.records.empty()) {
            MetricsReport vr = evaluate(model, val_split, cfg.batch_size);
            es.val_auc = vr.auc;
            es.val_logloss = vr.logloss;
        }
        es.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        hist.epochs.push_back(es);
        val_aucs.push_back(es.val_auc);

        if (val_aucs.size() == 1 ||
            es.val_auc > *std::max_element(val_aucs.begin(), val_aucs.end() - 1))
            best_snapshot = model.params().snapshot_values();

        if (should_stop(val_aucs, cfg.early_stop_patience)) break;
    }

    hist.best_epoch = best_epoch(val_aucs);
    if (!best_snapshot.empty()) model.params().restore_values(best_snapshot);
    return hist;
}

MetricsReport evaluate(Model& model, const Dataset& split, std::size_t batch_size) {
    if (split.records.empty()) throw std::invalid_argument("evaluate: empty split");
    std::vector<double> scores, labels;
    std::vector<int> domains, truths;
    const std::size_t n = split.records.size();
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        Batch batch = make_batch(model.schema(), split.records, start, end, 0);
        Graph g;
        ForwardResult fr = model.forward(g, batch, /*train=*/false);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            scores.push_back(fr.prediction->value.values[i]);
            labels.push_back(batch.labels[i]);
            truths.push_back(batch.truth[i]);
        }
        for (int k : fr.domains) domains.push_back(k);
    }
    MetricsReport rep;
    rep.samples = n;
    rep.auc = auc(scores, labels);
    rep.logloss = logloss(scores, labels);
    if (split.has_truth_domains() && model.has_dmm()) {
        rep.nmi = nmi(domains, truths);
        rep.cluster_accuracy = cluster_accuracy(domains, truths);
    }
    return rep;
}

AssignmentExport export_assignments(Model& model, const Dataset& split,
                                    std::size_t batch_size) {
    if (split.records.empty()) throw std::invalid_argument("export: empty split");
    AssignmentExport out;
    const std::size_t n = split.records.size();
    std::vector<Tensor> z_parts, ze_parts;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        Batch batch = make_batch(model.schema(), split.records, start, end, 0);
        Graph g;
        ForwardResult fr = model.forward(g, batch, /*train=*/false);
        for (int k : fr.domains) out.domains.push_back(k);
        for (int t : batch.truth) out.truth.push_back(t);
        z_parts.push_back(fr.projected);
        if (fr.latent.numel()) ze_parts.push_back(fr.latent);
    }
    auto stack = [](const std::vector<Tensor>& parts) {
        if (parts.empty()) return Tensor();
        std::size_t rows = 0;
        for (const Tensor& t : parts) rows += t.rows();
        Tensor out({rows, parts[0].cols()});
        std::size_t r = 0;
        for (const Tensor& t : parts)
            for (std::size_t i = 0; i < t.rows(); ++i, ++r)
                for (std::size_t j = 0; j < t.cols(); ++j) out.at(r, j) = t.at(i, j);
        return out;
    };
    out.projected = stack(z_parts);
    out.latent = stack(ze_parts);
    return out;
}

std::string history_to_csv(const TrainHistory& h) {
    std::ostringstream os;
    os << "epoch,dmm_loss,task_loss,total_loss,val_auc,val_logloss\n";
    os.precision(17);
    for (std::size_t i = 0; i < h.epochs.size(); ++i) {
        const EpochStats& e = h.epochs[i];
        os << (i + 1) << ',' << e.mean_dmm_loss << ',' << e.mean_task_loss << ','
           << e.mean_total_loss << ',' << e.val_auc << ',' << e.val_logloss << '\n';
    }
    return os.str();
}

}  // namespace a2
