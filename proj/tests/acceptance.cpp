// Acceptance suite: one check per shipped claim, one PASS/FAIL line each.
// argv[1] is the path to the a2 command-line binary (used by criterion 9).
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "a2/data.hpp"
#include "a2/dmm.hpp"
#include "a2/metrics.hpp"
#include "a2/profiler.hpp"
#include "a2/trainer.hpp"
#include "test_util.hpp"

using namespace a2;
using test::max_rel_fd_error;
using test::random_tensor;

namespace {

double now_seconds() {
    static const auto t0 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int failures = 0;

void report(int id, const std::string& what, bool ok, const std::string& detail) {
    std::printf("criterion %2d (%s): %s  [%s]\n", id, what.c_str(), ok ? "PASS" : "FAIL",
                detail.c_str());
    if (!ok) ++failures;
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.values.size() == b.values.size() &&
           std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) == 0;
}

// ---------------------------------------------------------------- criterion 1

// Component-op finite differences, < 1e-5 worst relative error.
bool criterion1_ops(std::size_t& configs, double& worst, std::string& worst_op) {
    std::mt19937_64 rng(11);
    auto dims = [&](std::size_t lo, std::size_t hi) {
        return lo + rng() % (hi - lo + 1);
    };
    worst = 0.0;
    configs = 0;
    for (int t = 0; t < 8; ++t) {
        const std::size_t B = dims(2, 5), I = dims(2, 5), O = dims(2, 5), m = dims(2, 4);
        const Tensor X = random_tensor({B, I}, rng);
        const Tensor T1 = random_tensor({B, O}, rng);
        const Tensor T2 = random_tensor({B, I}, rng);
        std::vector<double> labels(B);
        for (double& l : labels) l = rng() % 2;
        std::vector<int> k(B);
        for (int& v : k) v = static_cast<int>(rng() % m);
        Tensor alpha({B, m});
        for (std::size_t r = 0; r < B; ++r) {
            double s = 0;
            for (std::size_t c = 0; c < m; ++c) {
                alpha.at(r, c) = 0.1 + (rng() % 10);
                s += alpha.at(r, c);
            }
            for (std::size_t c = 0; c < m; ++c) alpha.at(r, c) /= s;
        }

        struct OpCase {
            const char* name;
            std::function<void(ParamStore&)> setup;
            test::LossBuilder build;
        };
        std::vector<OpCase> cases;
        cases.push_back({"dense",
                         [&](ParamStore& s) {
                             s.create("W", random_tensor({I, O}, rng));
                             s.create("b", random_tensor({O}, rng));
                         },
                         [&, X, T1](Graph& g, ParamStore& s) {
                             return g.mse_loss(g.dense(g.leaf(X), g.param(s.get("W")),
                                                       g.param(s.get("b"))),
                                               g.leaf(T1));
                         }});
        cases.push_back({"add+scale",
                         [&](ParamStore& s) { s.create("A", random_tensor({B, I}, rng)); },
                         [&, X, T2](Graph& g, ParamStore& s) {
                             Node* a = g.param(s.get("A"));
                             return g.mse_loss(g.add(g.scale(a, 0.7), g.leaf(X)), g.leaf(T2));
                         }});
        cases.push_back({"prelu",
                         [&](ParamStore& s) {
                             s.create("A", random_tensor({B, I}, rng));
                             s.create("slope", random_tensor({I}, rng, 0.5));
                         },
                         [&, T2](Graph& g, ParamStore& s) {
                             return g.mse_loss(g.prelu(g.param(s.get("A")),
                                                       g.param(s.get("slope"))),
                                               g.leaf(T2));
                         }});
        cases.push_back({"sigmoid",
                         [&](ParamStore& s) { s.create("A", random_tensor({B, I}, rng)); },
                         [&, T2](Graph& g, ParamStore& s) {
                             return g.mse_loss(g.sigmoid(g.param(s.get("A"))), g.leaf(T2));
                         }});
        cases.push_back({"softmax",
                         [&](ParamStore& s) { s.create("A", random_tensor({B, I}, rng)); },
                         [&, T2](Graph& g, ParamStore& s) {
                             return g.mse_loss(g.softmax_rows(g.param(s.get("A"))), g.leaf(T2));
                         }});
        cases.push_back({"batch_norm",
                         [&](ParamStore& s) {
                             s.create("A", random_tensor({B, I}, rng));
                             s.create("gamma", random_tensor({I}, rng, 0.5));
                             s.create("beta", random_tensor({I}, rng, 0.5));
                             s.create("rm", Tensor({I}), false);
                             s.create("rv", Tensor({I}), false);
                         },
                         [&, T2](Graph& g, ParamStore& s) {
                             return g.mse_loss(
                                 g.batch_norm(g.param(s.get("A")), g.param(s.get("gamma")),
                                              g.param(s.get("beta")), s.get("rm"), s.get("rv"),
                                              /*train=*/true),
                                 g.leaf(T2));
                         }});
        cases.push_back({"stop_gradient",
                         [&](ParamStore& s) { s.create("A", random_tensor({B, I}, rng)); },
                         [&, X, T2](Graph& g, ParamStore& s) {
                             // blocked branch carries a constant, so the
                             // realized function stays smooth in A; the
                             // exact-zero backward contract is pinned by the
                             // separation criterion and the unit suites.
                             Node* a = g.param(s.get("A"));
                             Node* y = g.add(a, g.stop_gradient(g.leaf(X)));
                             return g.mse_loss(y, g.leaf(T2));
                         }});
        cases.push_back({"straight_through",
                         [&](ParamStore& s) { s.create("A", random_tensor({B, I}, rng)); },
                         [&, X, T2](Graph& g, ParamStore& s) {
                             // forward value A + X with pass-through gradient:
                             // the loss is smooth in A, so fd sees the same
                             // derivative the pass-through rule produces.
                             Node* a = g.param(s.get("A"));
                             Tensor fv = s.get("A").value;
                             for (std::size_t q = 0; q < fv.values.size(); ++q)
                                 fv.values[q] += X.values[q];
                             return g.mse_loss(g.straight_through(a, fv), g.leaf(T2));
                         }});
        cases.push_back({"routed_affine",
                         [&](ParamStore& s) {
                             s.create("A", random_tensor({B, I}, rng));
                             for (std::size_t j = 0; j < m; ++j) {
                                 s.create("W" + std::to_string(j), random_tensor({I, I}, rng));
                                 s.create("c" + std::to_string(j), random_tensor({I}, rng));
                             }
                         },
                         [&, T2, k, m](Graph& g, ParamStore& s) {
                             std::vector<Parameter*> Ws, bs;
                             for (std::size_t j = 0; j < m; ++j) {
                                 Ws.push_back(&s.get("W" + std::to_string(j)));
                                 bs.push_back(&s.get("c" + std::to_string(j)));
                             }
                             return g.mse_loss(g.routed_affine(g.param(s.get("A")), Ws, bs, k),
                                               g.leaf(T2));
                         }});
        cases.push_back({"soft_routed_affine",
                         [&](ParamStore& s) {
                             s.create("A", random_tensor({B, I}, rng));
                             for (std::size_t j = 0; j < m; ++j) {
                                 s.create("W" + std::to_string(j), random_tensor({I, I}, rng));
                                 s.create("c" + std::to_string(j), random_tensor({I}, rng));
                             }
                         },
                         [&, T2, alpha, m](Graph& g, ParamStore& s) {
                             std::vector<Parameter*> Ws, bs;
                             for (std::size_t j = 0; j < m; ++j) {
                                 Ws.push_back(&s.get("W" + std::to_string(j)));
                                 bs.push_back(&s.get("c" + std::to_string(j)));
                             }
                             return g.mse_loss(
                                 g.soft_routed_affine(g.param(s.get("A")), Ws, bs, alpha),
                                 g.leaf(T2));
                         }});
        cases.push_back({"ce_loss",
                         [&](ParamStore& s) { s.create("A", random_tensor({B, 1}, rng)); },
                         [&, labels](Graph& g, ParamStore& s) {
                             return g.ce_loss(g.sigmoid(g.param(s.get("A"))), labels);
                         }});
        const Tensor Tcat = random_tensor({B, I + O}, rng);
        cases.push_back({"concat_cols",
                         [&](ParamStore& s) {
                             s.create("A", random_tensor({B, I}, rng));
                             s.create("C", random_tensor({B, O}, rng));
                         },
                         [&, Tcat](Graph& g, ParamStore& s) {
                             Node* y = g.concat_cols({g.param(s.get("A")), g.param(s.get("C"))});
                             return g.mse_loss(y, g.leaf(Tcat));
                         }});
        cases.push_back({"rows_lookup",
                         [&](ParamStore& s) { s.create("E", random_tensor({6, I}, rng)); },
                         [&, T2, B, I](Graph& g, ParamStore& s) {
                             std::vector<std::size_t> rows(B);
                             for (std::size_t r = 0; r < B; ++r) rows[r] = r % 6;
                             return g.mse_loss(g.rows_lookup(s.get("E"), rows), g.leaf(T2));
                         }});

        for (auto& c : cases) {
            ParamStore ps;
            c.setup(ps);
            const double e = max_rel_fd_error(ps, c.build);
            if (e > worst) {
                worst = e;
                worst_op = c.name;
            }
            ++configs;
        }
    }
    return worst < 1e-5;
}

// End-to-end model finite differences, < 1e-4 worst relative error.
bool criterion1_model(std::size_t& configs, double& worst) {
    worst = 0.0;
    configs = 0;
    std::mt19937_64 rng(23);
    for (int t = 0; t < 100; ++t) {
        SyntheticConfig sc;
        sc.domains = 2;
        sc.fields = 2 + rng() % 2;
        sc.vocab = 5 + rng() % 4;
        sc.hash_buckets = 8;
        sc.embedding_dim = 2 + rng() % 3;
        sc.samples = 16;
        sc.seed = 1000 + t;
        Dataset ds = generate_synthetic(sc);

        ModelConfig mc;
        mc.hidden = 4 + 2 * (rng() % 3);
        mc.num_domains = 2 + rng() % 2;
        mc.fusion_layers = 1 + rng() % 2;
        mc.specific_bias = (rng() % 2) == 0;
        mc.metric = (rng() % 2) ? QuantizeMetric::cosine : QuantizeMetric::squared_euclidean;
        Model model(ds.schema, mc, 2000 + t);

        Batch batch = make_batch(ds.schema, ds.records, 0, 6);
        {
            // one training-mode pass initializes the codebook and batch-norm
            // running statistics; the check itself runs in eval mode, whose
            // forward is a pure function of the parameters.
            Graph g;
            std::mt19937_64 frng(7);
            model.forward(g, batch, /*train=*/true, &frng);
        }
        // The task loss is smooth in every parameter (the miner's branch is
        // isolated behind stop-gradients and correctly receives zero). The
        // self-supervised loss is fd-checkable only through the decoder: its
        // encoder/codebook gradients are *defined* via stop-gradient and
        // pass-through rules that central differences cannot observe; those
        // rules are pinned exactly by criterion 2 instead.
        auto build_task = [&](Graph& g, ParamStore&) {
            return model.forward(g, batch, /*train=*/false).task_loss;
        };
        worst = std::max(worst, max_rel_fd_error(model.params(), build_task));

        std::vector<bool> was(model.params().size());
        for (std::size_t i = 0; i < model.params().size(); ++i) {
            Parameter& p = model.params()[i];
            was[i] = p.learnable;
            if (p.name.rfind("dec.", 0) != 0) p.learnable = false;
        }
        auto build_dmm = [&](Graph& g, ParamStore&) {
            return model.forward(g, batch, /*train=*/false).dmm_loss;
        };
        worst = std::max(worst, max_rel_fd_error(model.params(), build_dmm));
        for (std::size_t i = 0; i < model.params().size(); ++i)
            model.params()[i].learnable = was[i];
        ++configs;
    }
    return worst < 1e-4;
}

// ---------------------------------------------------------------- criterion 2

bool criterion2(std::string& detail) {
    SyntheticConfig sc;
    sc.domains = 2;
    sc.fields = 4;
    sc.vocab = 12;
    sc.samples = 2000;  // 0.8 train split / batch 32 = exactly 50 batches
    sc.seed = 5;
    sc.embedding_dim = 4;
    Dataset ds = generate_synthetic(sc);
    Splits s = split(ds, SplitSpec{});

    bool ok = true;
    for (int zero_task = 0; zero_task < 2; ++zero_task) {
        ModelConfig mc;
        mc.hidden = 8;
        mc.num_domains = 2;
        mc.fusion_layers = 2;
        Model m(ds.schema, mc, 77);
        {
            Graph g;
            std::mt19937_64 frng(3);
            Batch b = make_batch(ds.schema, s.train.records, 0, 32);
            m.forward(g, b, /*train=*/true, &frng);  // pre-initialize the codebook
        }
        std::vector<std::string> names;
        std::vector<Tensor> before;
        for (std::size_t i = 0; i < m.params().size(); ++i) {
            names.push_back(m.params()[i].name);
            before.push_back(m.params()[i].value);
        }

        TrainConfig tc;
        tc.epochs = 1;
        tc.batch_size = 32;
        tc.optimizer.weight_decay = 0.0;  // decay would move zero-grad weights
        tc.task_loss_scale = zero_task ? 0.0 : 1.0;
        tc.dmm_loss_scale = zero_task ? 1.0 : 0.0;
        train(m, s.train, s.val, tc);

        for (std::size_t i = 0; i < m.params().size(); ++i) {
            const Parameter& p = m.params()[i];
            if (!p.learnable) continue;  // batch-norm buffers move in any forward
            const bool frozen_side = zero_task ? !m.is_dmm_param(names[i])
                                               : m.is_dmm_param(names[i]);
            if (frozen_side && !bitwise_equal(before[i], p.value)) {
                detail += (zero_task ? "task-off changed " : "dmm-off changed ") + names[i] + "; ";
                ok = false;
            }
        }
    }
    if (ok) detail = "50 batches each way, frozen side bitwise unchanged";
    return ok;
}

// ---------------------------------------------------------------- criterion 3

bool criterion3(std::string& detail) {
    std::mt19937_64 rng(31);
    std::size_t checked = 0;
    auto oracle = [](const Tensor& z, const Tensor& cb, QuantizeMetric metric) {
        std::vector<int> idx(z.rows());
        for (std::size_t i = 0; i < z.rows(); ++i) {
            double best = 0;
            int arg = -1;
            const double zn = [&] {
                double s = 0;
                for (std::size_t d = 0; d < z.cols(); ++d) s += z.at(i, d) * z.at(i, d);
                return std::sqrt(s);
            }();
            for (std::size_t j = 0; j < cb.rows(); ++j) {
                double score;
                if (metric == QuantizeMetric::cosine && zn != 0.0) {
                    double dot = 0, en = 0;
                    for (std::size_t d = 0; d < z.cols(); ++d) {
                        dot += z.at(i, d) * cb.at(j, d);
                        en += cb.at(j, d) * cb.at(j, d);
                    }
                    score = -dot / (zn * std::sqrt(en));  // lower is better
                } else {
                    score = 0;
                    for (std::size_t d = 0; d < z.cols(); ++d) {
                        const double diff = z.at(i, d) - cb.at(j, d);
                        score += diff * diff;
                    }
                }
                if (arg < 0 || score < best) {
                    best = score;
                    arg = static_cast<int>(j);
                }
            }
            idx[i] = arg;
        }
        return idx;
    };

    for (int t = 0; t < 500; ++t) {
        for (QuantizeMetric metric :
             {QuantizeMetric::squared_euclidean, QuantizeMetric::cosine}) {
            const std::size_t d = 2 + rng() % 4, m = 2 + rng() % 5, B = 1 + rng() % 6;
            Tensor cb = random_tensor({m, d}, rng);
            Tensor z = random_tensor({B, d}, rng);
            QuantizeResult qr = quantize(z, cb, metric);
            std::vector<int> want = oracle(z, cb, metric);
            for (std::size_t i = 0; i < B; ++i) {
                if (qr.indices[i] != want[i]) {
                    detail = "index mismatch";
                    return false;
                }
                if (std::memcmp(&qr.codes.at(i, 0), &cb.at(qr.indices[i], 0),
                                d * sizeof(double)) != 0) {
                    detail = "codes not bitwise codebook rows";
                    return false;
                }
            }
            ++checked;
        }
    }

    // forced ties resolve to the lowest index
    {
        Tensor cb({3, 2});
        cb.at(0, 0) = 1.0;
        cb.at(1, 0) = -1.0;
        cb.at(2, 0) = 1.0;  // duplicate direction of row 0
        cb.at(2, 1) = 0.0;
        Tensor z({1, 2});
        z.at(0, 1) = 0.7;  // equidistant from rows 0 and 1, duplicates row 2 vs 0
        if (quantize(z, cb, QuantizeMetric::squared_euclidean).indices[0] != 0) {
            detail = "euclidean tie not lowest index";
            return false;
        }
        Tensor cb2({2, 2});
        cb2.at(0, 0) = 0.3;
        cb2.at(0, 1) = 0.4;
        cb2.at(1, 0) = 0.6;  // same direction, twice the norm: identical cosine
        cb2.at(1, 1) = 0.8;
        Tensor z2({1, 2});
        z2.at(0, 0) = 1.0;
        z2.at(0, 1) = 1.0;
        if (quantize(z2, cb2, QuantizeMetric::cosine).indices[0] != 0) {
            detail = "cosine tie not lowest index";
            return false;
        }
        Tensor zz({1, 2});  // zero-norm sample falls back to euclidean
        if (quantize(zz, cb2, QuantizeMetric::cosine).indices[0] != 0) {
            detail = "zero-norm fallback wrong";
            return false;
        }
    }
    detail = std::to_string(checked) + " random pairs + ties exact";
    return true;
}

// ------------------------------------------------------- criteria 4 and 6

struct RecoveryRun {
    double nmi = 0, acc = 0, ld_ratio = 0;
};

std::vector<RecoveryRun> domain_recovery_runs() {
    std::vector<RecoveryRun> runs;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SyntheticConfig sc;
        sc.domains = 4;
        sc.fields = 8;
        sc.vocab = 50;
        sc.concentration = 0.05;
        sc.samples = 20000;
        sc.seed = seed;
        sc.embedding_dim = 32;
        sc.hash_buckets = 8192;
        Dataset ds = generate_synthetic(sc);
        Splits s = split(ds, SplitSpec{});

        ModelConfig mc;
        mc.hidden = 128;
        mc.num_domains = 4;
        mc.fusion_layers = 1;
        mc.dmm_lr_scale = 100;
        mc.usage_rebalance = true;
        mc.rebalance_patience = 20;
        Model m(ds.schema, mc, 100 + seed);

        TrainConfig tc;
        tc.epochs = 5;
        tc.batch_size = 128;
        tc.early_stop_patience = 5;
        tc.optimizer.learning_rate = 1e-4;
        TrainHistory h = train(m, s.train, s.val, tc);

        AssignmentExport ex = export_assignments(m, s.val);
        RecoveryRun r;
        r.nmi = nmi(ex.domains, ex.truth);
        r.acc = cluster_accuracy(ex.domains, ex.truth);
        r.ld_ratio = h.epochs.back().mean_dmm_loss / h.first_batch_dmm_loss;
        runs.push_back(r);
    }
    return runs;
}

// ---------------------------------------------------------------- criterion 5

bool criterion5(std::string& detail) {
    const double t_start = now_seconds();
    double sum_mined = 0, sum_truth = 0, sum_rnd = 0, sum_mlp = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SyntheticConfig sc;
        sc.domains = 4;
        sc.fields = 16;
        sc.shared_fields = 4;
        sc.vocab = 200;
        sc.concentration = 0.005;
        sc.shared_concentration = 5.0;
        sc.samples = 8000;
        sc.seed = seed;
        sc.weight_scale = 3.0;
        sc.embedding_dim = 32;
        sc.hash_buckets = 8192;
        sc.conflicting = true;
        Dataset ds = generate_synthetic(sc);
        Splits s = split(ds, SplitSpec{});

        ModelConfig base;
        base.hidden = 128;
        base.num_domains = 4;
        base.fusion_layers = 1;

        ModelConfig mined = base;
        mined.dmm_lr_scale = 33;
        mined.usage_rebalance = true;
        mined.rebalance_patience = 20;
        ModelConfig truth_cfg = base;
        truth_cfg.routing_source = RoutingSource::truth;
        ModelConfig rnd_cfg = base;
        rnd_cfg.routing_source = RoutingSource::random;
        ModelConfig mlp = matched_mlp_config(ds.schema, mined, 4096);

        // FLOPs parity guard for the baseline comparison
        const double ratio =
            static_cast<double>(count_costs(ds.schema, mlp, 4096).total_flops) /
            static_cast<double>(count_costs(ds.schema, mined, 4096).total_flops);
        if (ratio < 0.95 || ratio > 1.05) {
            detail = "baseline not FLOPs-matched";
            return false;
        }

        auto final_auc = [&](const ModelConfig& mc) {
            Model m(ds.schema, mc, 100 + seed);
            TrainConfig tc;
            tc.epochs = 7;
            tc.batch_size = 64;
            tc.early_stop_patience = 7;
            tc.optimizer.learning_rate = 3e-4;
            TrainHistory h = train(m, s.train, s.val, tc);
            return h.epochs.back().val_auc;
        };
        sum_mined += final_auc(mined);
        sum_truth += final_auc(truth_cfg);
        sum_rnd += final_auc(rnd_cfg);
        sum_mlp += final_auc(mlp);
    }
    const double mined = sum_mined / 5, truth = sum_truth / 5, rnd = sum_rnd / 5,
                 mlp = sum_mlp / 5;
    const double secs = now_seconds() - t_start;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "mined-mlp %+.4f (>=0.02) mined-rnd %+.4f (>=0.02) truth-mined %+.4f "
                  "(<=0.01), %.0fs (<600)",
                  mined - mlp, mined - rnd, truth - mined, secs);
    detail = buf;
    return mined - mlp >= 0.02 && mined - rnd >= 0.02 && truth - mined <= 0.01 && secs < 600;
}

// ---------------------------------------------------------------- criterion 7

bool criterion7(std::string& detail) {
    std::mt19937_64 rng(41);
    double worst_auc = 0, worst_ll = 0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 20 + rng() % 120;
        std::vector<double> scores(n), labels(n);
        std::uniform_real_distribution<double> ud(0.0, 1.0);
        bool pos = false, neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = (rng() % 4 == 0) ? 0.5 : ud(rng);  // deliberate ties at 0.5
            labels[i] = rng() % 2;
            (labels[i] > 0.5 ? pos : neg) = true;
        }
        if (!pos) labels[0] = 1;
        if (!neg) labels[1] = 0;

        double wins = 0, pairs = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] < 0.5) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (labels[j] > 0.5) continue;
                pairs += 1;
                if (scores[i] > scores[j]) wins += 1;
                else if (scores[i] == scores[j]) wins += 0.5;
            }
        }
        worst_auc = std::max(worst_auc, std::fabs(auc(scores, labels) - wins / pairs));

        double ll = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = std::clamp(scores[i], 1e-7, 1.0 - 1e-7);
            ll -= labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p);
        }
        worst_ll = std::max(worst_ll, std::fabs(logloss(scores, labels) - ll / n));
    }
    if (worst_auc > 1e-12 || worst_ll > 1e-12) {
        detail = "auc/logloss oracle divergence";
        return false;
    }

    // exhaustive contingency oracles for partitions of up to 4 clusters
    for (int t = 0; t < 300; ++t) {
        const std::size_t n = 8 + rng() % 50;
        const int R = 1 + rng() % 4, C = 1 + rng() % 4;
        std::vector<int> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = static_cast<int>(rng() % R);
            b[i] = static_cast<int>(rng() % C);
        }
        std::vector<std::vector<std::size_t>> cnt(R, std::vector<std::size_t>(C, 0));
        std::vector<std::size_t> rt(R, 0), ct(C, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++cnt[a[i]][b[i]];
            ++rt[a[i]];
            ++ct[b[i]];
        }
        auto H = [&](const std::vector<std::size_t>& tot) {
            double h = 0;
            for (std::size_t c : tot)
                if (c) h -= (double(c) / n) * std::log(double(c) / n);
            return h;
        };
        double mi = 0;
        for (int r = 0; r < R; ++r)
            for (int c = 0; c < C; ++c)
                if (cnt[r][c])
                    mi += (double(cnt[r][c]) / n) *
                          std::log(double(n) * cnt[r][c] / (double(rt[r]) * ct[c]));
        const double want_nmi =
            (H(rt) == 0.0 || H(ct) == 0.0) ? 0.0 : mi / ((H(rt) + H(ct)) / 2.0);
        if (std::fabs(nmi(a, b) - want_nmi) > 1e-12) {
            detail = "nmi oracle divergence";
            return false;
        }

        // exhaustive injective matching over permutations of padded columns
        const int cols = std::max(R, C);
        std::vector<int> perm(cols);
        std::iota(perm.begin(), perm.end(), 0);
        std::size_t best = 0;
        do {
            std::size_t s = 0;
            for (int r = 0; r < R; ++r)
                if (perm[r] < C) s += cnt[r][perm[r]];
            best = std::max(best, s);
        } while (std::next_permutation(perm.begin(), perm.end()));
        if (cluster_accuracy(a, b) != double(best) / double(n)) {
            detail = "cluster accuracy oracle divergence";
            return false;
        }
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "1000 auc/logloss sets (worst %.1e), 300 partitions exact",
                  std::max(worst_auc, worst_ll));
    detail = buf;
    return true;
}

// ---------------------------------------------------------------- criterion 8

bool criterion8(std::string& detail) {
    FeatureSchema s;
    s.fields = {{"user_id", FieldRole::user, 1000, 32},
                {"item_id", FieldRole::item, 1000, 32}};
    ModelConfig c;
    c.hidden = 64;
    c.fusion_layers = 3;
    c.num_domains = 8;
    for (std::size_t b : {std::size_t{1}, std::size_t{2}, std::size_t{4096}}) {
        CostReport r = count_costs(s, c, b);
        if (r.total_params != 195649 ||
            r.total_flops != 85601 * static_cast<std::int64_t>(b)) {
            detail = "reference counts off at batch " + std::to_string(b);
            return false;
        }
    }
    detail = "195649 params, 85601 flops/sample, linear at batch 1/2/4096";
    return true;
}

// ---------------------------------------------------------------- criterion 9

bool criterion9(const std::string& bin, std::string& detail) {
    std::ofstream os("/tmp/a2_accept_cfg.json");
    os << R"({
  "data": {"synthetic": {"domains": 4, "fields": 6, "vocab": 20, "samples": 4000,
                          "seed": 3, "embedding_dim": 8}},
  "split": {"train": 0.8, "val": 0.1, "test": 0.1, "seed": 9},
  "model": {"hidden": 16, "num_domains": 4, "fusion_layers": 2},
  "training": {"epochs": 2, "batch_size": 128, "seed": 42},
  "output_dir": "/tmp/a2_accept_run1"
})";
    os.close();
    const std::string base = bin + " train --config /tmp/a2_accept_cfg.json";
    if (std::system((base + " > /dev/null 2>&1").c_str()) != 0 ||
        std::system((base + " --output /tmp/a2_accept_run2 > /dev/null 2>&1").c_str()) != 0) {
        detail = "train invocation failed";
        return false;
    }
    for (const char* f : {"checkpoint.bin", "history.csv", "metrics.json"}) {
        const std::string a = slurp(std::string("/tmp/a2_accept_run1/") + f);
        const std::string b = slurp(std::string("/tmp/a2_accept_run2/") + f);
        if (a.empty() || a != b) {
            detail = std::string("artifact differs: ") + f;
            return false;
        }
    }
    detail = "two runs, checkpoint/history/metrics byte-identical";
    return true;
}

// --------------------------------------------------------------- criterion 10

bool criterion10(std::string& detail) {
    std::mt19937_64 rng(53);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t d = 2 + rng() % 6, m = 2 + rng() % 6, B = 1 + rng() % 16;
        Tensor cb = random_tensor({m, d}, rng);
        Tensor z = random_tensor({B, d}, rng);
        QuantizeResult qr = quantize(z, cb, QuantizeMetric::squared_euclidean);
        Tensor w = soft_routing_weights(z, cb, SoftSimilarity::neg_squared_distance);
        for (std::size_t i = 0; i < B; ++i) {
            std::size_t arg = 0;
            for (std::size_t j = 1; j < m; ++j)
                if (w.at(i, j) > w.at(i, arg)) arg = j;
            if (static_cast<int>(arg) != qr.indices[i]) {
                detail = "soft argmax != hard index";
                return false;
            }
        }
    }
    detail = "1000 batches, argmax agrees everywhere";
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: acceptance <a2-binary>\n");
        return 1;
    }
    const std::string bin = argv[1];
    std::string detail;

    {
        const double t0 = now_seconds();
        std::size_t ops_cfg = 0, model_cfg = 0;
        double ops_worst = 0, model_worst = 0;
        std::string worst_op;
        const bool ops_ok = criterion1_ops(ops_cfg, ops_worst, worst_op);
        const bool model_ok = criterion1_model(model_cfg, model_worst);
        const double secs = now_seconds() - t0;
        char buf[192];
        std::snprintf(buf, sizeof buf,
                      "%zu op configs worst %.1e at %s (<1e-5), %zu model configs worst "
                      "%.1e (<1e-4), %.1fs (<60)",
                      ops_cfg, ops_worst, worst_op.c_str(), model_cfg, model_worst, secs);
        report(1, "gradient oracle", ops_ok && model_ok && secs < 60, buf);
    }

    detail.clear();
    report(2, "stop-gradient separation", criterion2(detail), detail);

    detail.clear();
    report(3, "quantization oracle", criterion3(detail), detail);

    {
        const double t0 = now_seconds();
        std::vector<RecoveryRun> runs = domain_recovery_runs();
        const double secs = now_seconds() - t0;
        double mean_nmi = 0, mean_acc = 0, worst_ratio = 0;
        for (const RecoveryRun& r : runs) {
            mean_nmi += r.nmi / runs.size();
            mean_acc += r.acc / runs.size();
            worst_ratio = std::max(worst_ratio, r.ld_ratio);
        }
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "5 seeds: mean nmi %.3f (>=0.90) mean acc %.3f (>=0.95), %.0fs (<180)",
                      mean_nmi, mean_acc, secs);
        report(4, "synthetic domain recovery",
               mean_nmi >= 0.90 && mean_acc >= 0.95 && secs < 180, buf);

        std::snprintf(buf, sizeof buf, "worst final/first dmm-loss ratio %.2f (<=0.5)",
                      worst_ratio);
        report(6, "dmm self-supervision progress", worst_ratio <= 0.5, buf);
    }

    detail.clear();
    report(5, "conflicting-domain routing gains", criterion5(detail), detail);

    {
        detail.clear();
        const double t0 = now_seconds();
        const bool ok = criterion7(detail);
        const double secs = now_seconds() - t0;
        report(7, "metric oracles", ok && secs < 30, detail);
    }

    detail.clear();
    report(8, "profiler exactness", criterion8(detail), detail);

    detail.clear();
    report(9, "training determinism", criterion9(bin, detail), detail);

    detail.clear();
    report(10, "hard/soft routing consistency", criterion10(detail), detail);

    if (failures == 0) {
        std::printf("acceptance: all criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criteria failed\n", failures);
    return 1;
}
