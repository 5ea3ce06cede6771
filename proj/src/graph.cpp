#include "a2/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace a2 {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

Node* Graph::make(Tensor value) {
    nodes_.emplace_back();
    nodes_.back().value = std::move(value);
    return &nodes_.back();
}

Node* Graph::leaf(Tensor v) { return make(std::move(v)); }

Node* Graph::param(Parameter& p) {
    Node* n = make(p.value);
    Parameter* pp = &p;
    n->backward = [pp](Node& self) {
        for (std::size_t i = 0; i < self.grad.values.size(); ++i)
            pp->grad.values[i] += self.grad.values[i];
    };
    return n;
}

Node* Graph::rows_lookup(Parameter& table, const std::vector<std::size_t>& rows) {
    require(table.value.shape.size() == 2, "rows_lookup: table must be 2-D");
    const std::size_t d = table.value.cols();
    const std::size_t nrows = table.value.rows();
    Tensor out({rows.size(), d});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i] < nrows, "rows_lookup: row index out of range in " + table.name);
        for (std::size_t j = 0; j < d; ++j)
            out.at(i, j) = table.value.at(rows[i], j);
    }
    Node* n = make(std::move(out));
    Parameter* tp = &table;
    std::vector<std::size_t> idx = rows;
    n->backward = [tp, idx, d](Node& self) {
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < d; ++j)
                tp->grad.at(idx[i], j) += self.grad.at(i, j);
    };
    return n;
}

Node* Graph::concat_cols(const std::vector<Node*>& parts) {
    require(!parts.empty(), "concat_cols: no inputs");
    const std::size_t b = parts[0]->value.rows();
    std::size_t total = 0;
    for (Node* p : parts) {
        require(p->value.rows() == b, "concat_cols: batch size mismatch");
        total += p->value.cols();
    }
    Tensor out({b, total});
    std::size_t off = 0;
    for (Node* p : parts) {
        const std::size_t c = p->value.cols();
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < c; ++j)
                out.at(i, off + j) = p->value.at(i, j);
        off += c;
    }
    Node* n = make(std::move(out));
    std::vector<Node*> ps = parts;
    n->backward = [ps, b](Node& self) {
        std::size_t off = 0;
        for (Node* p : ps) {
            const std::size_t c = p->value.cols();
            Tensor& g = p->ensure_grad();
            for (std::size_t i = 0; i < b; ++i)
                for (std::size_t j = 0; j < c; ++j)
                    g.at(i, j) += self.grad.at(i, off + j);
            off += c;
        }
    };
    return n;
}

Node* Graph::dense(Node* x, Node* W, Node* b) {
    const std::size_t B = x->value.rows(), I = x->value.cols();
    require(W->value.shape.size() == 2 && W->value.rows() == I,
            "dense: weight " + shape_str(W->value) + " does not accept input " +
                shape_str(x->value));
    const std::size_t O = W->value.cols();
    require(b->value.numel() == O, "dense: bias " + shape_str(b->value) +
                                       " does not match output width " + std::to_string(O));
    Tensor out({B, O});
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t kk = 0; kk < I; ++kk) {
            const double xv = x->value.at(i, kk);
            for (std::size_t j = 0; j < O; ++j)
                out.at(i, j) += xv * W->value.at(kk, j);
        }
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < O; ++j)
            out.at(i, j) += b->value.values[j];
    Node* n = make(std::move(out));
    n->backward = [x, W, b, B, I, O](Node& self) {
        Tensor& gx = x->ensure_grad();
        Tensor& gW = W->ensure_grad();
        Tensor& gb = b->ensure_grad();
        for (std::size_t i = 0; i < B; ++i) {
            const double* gy = &self.grad.at(i, 0);
            for (std::size_t j = 0; j < O; ++j) gb.values[j] += gy[j];
            for (std::size_t kk = 0; kk < I; ++kk) {
                const double* wrow = &W->value.at(kk, 0);
                double acc = 0.0;
                for (std::size_t j = 0; j < O; ++j) acc += gy[j] * wrow[j];
                gx.at(i, kk) += acc;
                const double xv = x->value.at(i, kk);
                if (xv == 0.0) continue;
                double* gwrow = &gW.at(kk, 0);
                for (std::size_t j = 0; j < O; ++j) gwrow[j] += xv * gy[j];
            }
        }
    };
    return n;
}

Node* Graph::add(Node* a, Node* b) {
    require(a->value.same_shape(b->value),
            "add: shape mismatch " + shape_str(a->value) + " vs " + shape_str(b->value));
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out.values[i] += b->value.values[i];
    Node* n = make(std::move(out));
    n->backward = [a, b](Node& self) {
        Tensor& ga = a->ensure_grad();
        Tensor& gb = b->ensure_grad();
        for (std::size_t i = 0; i < self.grad.numel(); ++i) {
            ga.values[i] += self.grad.values[i];
            gb.values[i] += self.grad.values[i];
        }
    };
    return n;
}

Node* Graph::scale(Node* x, double c) {
    Tensor out = x->value;
    for (double& v : out.values) v *= c;
    Node* n = make(std::move(out));
    n->backward = [x, c](Node& self) {
        Tensor& gx = x->ensure_grad();
        for (std::size_t i = 0; i < self.grad.numel(); ++i)
            gx.values[i] += c * self.grad.values[i];
    };
    return n;
}

Node* Graph::prelu(Node* x, Node* slope) {
    const std::size_t C = x->value.cols();
    require(slope != nullptr, "prelu: missing slope parameter");
    require(slope->value.numel() == C,
            "prelu: slope width " + std::to_string(slope->value.numel()) +
                " vs channels " + std::to_string(C));
    const std::size_t B = x->value.rows();
    Tensor out({B, C});
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < C; ++j) {
            const double v = x->value.at(i, j);
            out.at(i, j) = v >= 0.0 ? v : slope->value.values[j] * v;
        }
    Node* n = make(std::move(out));
    n->backward = [x, slope, B, C](Node& self) {
        Tensor& gx = x->ensure_grad();
        Tensor& ga = slope->ensure_grad();
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t j = 0; j < C; ++j) {
                const double v = x->value.at(i, j);
                const double gy = self.grad.at(i, j);
                if (v >= 0.0) {
                    gx.at(i, j) += gy;
                } else {
                    gx.at(i, j) += slope->value.values[j] * gy;
                    ga.values[j] += v * gy;
                }
            }
    };
    return n;
}

Node* Graph::sigmoid(Node* x) {
    Tensor out = x->value;
    for (double& v : out.values) v = 1.0 / (1.0 + std::exp(-v));
    Node* n = make(std::move(out));
    n->backward = [x](Node& self) {
        Tensor& gx = x->ensure_grad();
        for (std::size_t i = 0; i < self.grad.numel(); ++i) {
            const double y = self.value.values[i];
            gx.values[i] += self.grad.values[i] * y * (1.0 - y);
        }
    };
    return n;
}

Node* Graph::softmax_rows(Node* x) {
    const std::size_t B = x->value.rows(), C = x->value.cols();
    Tensor out({B, C});
    for (std::size_t i = 0; i < B; ++i) {
        double mx = x->value.at(i, 0);
        for (std::size_t j = 1; j < C; ++j) mx = std::max(mx, x->value.at(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < C; ++j) {
            out.at(i, j) = std::exp(x->value.at(i, j) - mx);
            sum += out.at(i, j);
        }
        for (std::size_t j = 0; j < C; ++j) out.at(i, j) /= sum;
    }
    Node* n = make(std::move(out));
    n->backward = [x, B, C](Node& self) {
        Tensor& gx = x->ensure_grad();
        for (std::size_t i = 0; i < B; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < C; ++j)
                dot += self.grad.at(i, j) * self.value.at(i, j);
            for (std::size_t j = 0; j < C; ++j)
                gx.at(i, j) += self.value.at(i, j) * (self.grad.at(i, j) - dot);
        }
    };
    return n;
}

Node* Graph::batch_norm(Node* x, Node* gamma, Node* beta, Parameter& run_mean,
                        Parameter& run_var, bool train, double momentum, double eps) {
    const std::size_t B = x->value.rows(), C = x->value.cols();
    require(gamma->value.numel() == C && beta->value.numel() == C,
            "batch_norm: affine width mismatch");
    require(run_mean.value.numel() == C && run_var.value.numel() == C,
            "batch_norm: running stat width mismatch");
    if (train) {
        require(B >= 2, "batch_norm: train mode requires batch size >= 2");
        std::vector<double> mu(C, 0.0), var(C, 0.0);
        for (std::size_t j = 0; j < C; ++j) {
            for (std::size_t i = 0; i < B; ++i) mu[j] += x->value.at(i, j);
            mu[j] /= static_cast<double>(B);
            for (std::size_t i = 0; i < B; ++i) {
                const double d = x->value.at(i, j) - mu[j];
                var[j] += d * d;
            }
            var[j] /= static_cast<double>(B);
            run_mean.value.values[j] = momentum * run_mean.value.values[j] + (1.0 - momentum) * mu[j];
            run_var.value.values[j] = momentum * run_var.value.values[j] + (1.0 - momentum) * var[j];
        }
        Tensor xhat({B, C});
        Tensor out({B, C});
        std::vector<double> istd(C);
        for (std::size_t j = 0; j < C; ++j) istd[j] = 1.0 / std::sqrt(var[j] + eps);
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t j = 0; j < C; ++j) {
                xhat.at(i, j) = (x->value.at(i, j) - mu[j]) * istd[j];
                out.at(i, j) = gamma->value.values[j] * xhat.at(i, j) + beta->value.values[j];
            }
        Node* n = make(std::move(out));
        n->backward = [x, gamma, beta, xhat, istd, B, C](Node& self) {
            Tensor& gx = x->ensure_grad();
            Tensor& gg = gamma->ensure_grad();
            Tensor& gb = beta->ensure_grad();
            const double Bd = static_cast<double>(B);
            for (std::size_t j = 0; j < C; ++j) {
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (std::size_t i = 0; i < B; ++i) {
                    const double dy = self.grad.at(i, j);
                    sum_dy += dy;
                    sum_dy_xhat += dy * xhat.at(i, j);
                }
                gg.values[j] += sum_dy_xhat;
                gb.values[j] += sum_dy;
                const double g = gamma->value.values[j];
                for (std::size_t i = 0; i < B; ++i) {
                    const double dy = self.grad.at(i, j);
                    gx.at(i, j) += g * istd[j] *
                                   (dy - sum_dy / Bd - xhat.at(i, j) * sum_dy_xhat / Bd);
                }
            }
        };
        return n;
    }
    // eval: pure function of running stats
    Tensor out({B, C});
    std::vector<double> istd(C);
    for (std::size_t j = 0; j < C; ++j)
        istd[j] = 1.0 / std::sqrt(run_var.value.values[j] + eps);
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < C; ++j)
            out.at(i, j) = gamma->value.values[j] *
                               (x->value.at(i, j) - run_mean.value.values[j]) * istd[j] +
                           beta->value.values[j];
    Node* n = make(std::move(out));
    Tensor xv = x->value;
    std::vector<double> rm(run_mean.value.values);
    n->backward = [x, gamma, beta, xv, rm, istd, B, C](Node& self) {
        Tensor& gx = x->ensure_grad();
        Tensor& gg = gamma->ensure_grad();
        Tensor& gb = beta->ensure_grad();
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t j = 0; j < C; ++j) {
                const double dy = self.grad.at(i, j);
                gx.at(i, j) += dy * gamma->value.values[j] * istd[j];
                gg.values[j] += dy * (xv.at(i, j) - rm[j]) * istd[j];
                gb.values[j] += dy;
            }
    };
    return n;
}

Node* Graph::stop_gradient(Node* x) {
    return make(x->value);  // no backward: identity forward, zero upstream
}

Node* Graph::straight_through(Node* x, const Tensor& forward_value) {
    require(x->value.same_shape(forward_value),
            "straight_through: shape mismatch " + shape_str(x->value) + " vs " +
                shape_str(forward_value));
    Node* n = make(forward_value);
    n->backward = [x](Node& self) {
        Tensor& gx = x->ensure_grad();
        for (std::size_t i = 0; i < self.grad.numel(); ++i)
            gx.values[i] += self.grad.values[i];
    };
    return n;
}

Node* Graph::dropout(Node* x, double rate, std::mt19937_64& rng) {
    if (rate <= 0.0) return x;
    require(rate < 1.0, "dropout: rate must be < 1");
    std::bernoulli_distribution keep(1.0 - rate);
    std::vector<double> mask(x->value.numel());
    const double inv = 1.0 / (1.0 - rate);
    for (double& m : mask) m = keep(rng) ? inv : 0.0;
    Tensor out = x->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out.values[i] *= mask[i];
    Node* n = make(std::move(out));
    n->backward = [x, mask](Node& self) {
        Tensor& gx = x->ensure_grad();
        for (std::size_t i = 0; i < self.grad.numel(); ++i)
            gx.values[i] += self.grad.values[i] * mask[i];
    };
    return n;
}

Node* Graph::routed_affine(Node* x, const std::vector<Parameter*>& weights,
                           const std::vector<Parameter*>& biases,
                           const std::vector<int>& k) {
    const std::size_t B = x->value.rows(), H = x->value.cols();
    require(!weights.empty(), "routed_affine: no domain weights");
    require(k.size() == B, "routed_affine: one index per sample required");
    const std::size_t O = weights[0]->value.cols();
    const bool with_bias = !biases.empty();
    Tensor out({B, O});
    for (std::size_t i = 0; i < B; ++i) {
        require(k[i] >= 0 && static_cast<std::size_t>(k[i]) < weights.size(),
                "routed_affine: domain index out of range");
        const Tensor& W = weights[static_cast<std::size_t>(k[i])]->value;
        for (std::size_t kk = 0; kk < H; ++kk) {
            const double xv = x->value.at(i, kk);
            for (std::size_t j = 0; j < O; ++j) out.at(i, j) += xv * W.at(kk, j);
        }
        if (with_bias) {
            const Tensor& bb = biases[static_cast<std::size_t>(k[i])]->value;
            for (std::size_t j = 0; j < O; ++j) out.at(i, j) += bb.values[j];
        }
    }
    Node* n = make(std::move(out));
    std::vector<int> kk_copy = k;
    n->backward = [x, weights, biases, kk_copy, B, H, O, with_bias](Node& self) {
        Tensor& gx = x->ensure_grad();
        for (std::size_t i = 0; i < B; ++i) {
            const std::size_t d = static_cast<std::size_t>(kk_copy[i]);
            Parameter& W = *weights[d];
            for (std::size_t j = 0; j < O; ++j) {
                const double gy = self.grad.at(i, j);
                if (gy == 0.0) continue;
                if (with_bias) biases[d]->grad.values[j] += gy;
                for (std::size_t c = 0; c < H; ++c) {
                    gx.at(i, c) += gy * W.value.at(c, j);
                    W.grad.at(c, j) += gy * x->value.at(i, c);
                }
            }
        }
    };
    return n;
}

Node* Graph::soft_routed_affine(Node* x, const std::vector<Parameter*>& weights,
                                const std::vector<Parameter*>& biases,
                                const Tensor& alpha) {
    const std::size_t B = x->value.rows(), H = x->value.cols();
    const std::size_t N = weights.size();
    require(alpha.rows() == B && alpha.cols() == N,
            "soft_routed_affine: alpha must be [batch x domains]");
    const std::size_t O = weights[0]->value.cols();
    const bool with_bias = !biases.empty();
    Tensor out({B, O});
    for (std::size_t d = 0; d < N; ++d) {
        const Tensor& W = weights[d]->value;
        for (std::size_t i = 0; i < B; ++i) {
            const double a = alpha.at(i, d);
            if (a == 0.0) continue;
            for (std::size_t kk = 0; kk < H; ++kk) {
                const double xv = x->value.at(i, kk) * a;
                for (std::size_t j = 0; j < O; ++j) out.at(i, j) += xv * W.at(kk, j);
            }
            if (with_bias)
                for (std::size_t j = 0; j < O; ++j)
                    out.at(i, j) += a * biases[d]->value.values[j];
        }
    }
    Node* n = make(std::move(out));
    Tensor al = alpha;
    n->backward = [x, weights, biases, al, B, H, O, N, with_bias](Node& self) {
        Tensor& gx = x->ensure_grad();
        for (std::size_t d = 0; d < N; ++d) {
            Parameter& W = *weights[d];
            for (std::size_t i = 0; i < B; ++i) {
                const double a = al.at(i, d);
                if (a == 0.0) continue;
                for (std::size_t j = 0; j < O; ++j) {
                    const double gy = a * self.grad.at(i, j);
                    if (gy == 0.0) continue;
                    if (with_bias) biases[d]->grad.values[j] += gy;
                    for (std::size_t c = 0; c < H; ++c) {
                        gx.at(i, c) += gy * W.value.at(c, j);
                        W.grad.at(c, j) += gy * x->value.at(i, c);
                    }
                }
            }
        }
    };
    return n;
}

Node* Graph::mse_loss(Node* u, Node* v) {
    require(u->value.same_shape(v->value),
            "mse_loss: shape mismatch " + shape_str(u->value) + " vs " + shape_str(v->value));
    const std::size_t B = u->value.rows();
    double acc = 0.0;
    for (std::size_t i = 0; i < u->value.numel(); ++i) {
        const double d = u->value.values[i] - v->value.values[i];
        acc += d * d;
    }
    acc /= static_cast<double>(B);
    Node* n = make(Tensor({1}, {acc}));
    n->backward = [u, v, B](Node& self) {
        const double g = self.grad.values[0] * 2.0 / static_cast<double>(B);
        Tensor& gu = u->ensure_grad();
        Tensor& gv = v->ensure_grad();
        for (std::size_t i = 0; i < u->value.numel(); ++i) {
            const double d = u->value.values[i] - v->value.values[i];
            gu.values[i] += g * d;
            gv.values[i] -= g * d;
        }
    };
    return n;
}

Node* Graph::ce_loss(Node* p, const std::vector<double>& labels) {
    const std::size_t B = p->value.numel();
    require(B == labels.size(), "ce_loss: " + std::to_string(B) + " probabilities vs " +
                                    std::to_string(labels.size()) + " labels");
    constexpr double lo = 1e-7, hi = 1.0 - 1e-7;
    double acc = 0.0;
    std::vector<double> pc(B);
    for (std::size_t i = 0; i < B; ++i) {
        pc[i] = std::clamp(p->value.values[i], lo, hi);
        acc -= labels[i] * std::log(pc[i]) + (1.0 - labels[i]) * std::log(1.0 - pc[i]);
    }
    acc /= static_cast<double>(B);
    Node* n = make(Tensor({1}, {acc}));
    std::vector<double> y = labels;
    n->backward = [p, pc, y, B](Node& self) {
        const double g = self.grad.values[0] / static_cast<double>(B);
        Tensor& gp = p->ensure_grad();
        for (std::size_t i = 0; i < B; ++i) {
            if (p->value.values[i] != pc[i]) continue;  // clamped: flat
            gp.values[i] += g * (pc[i] - y[i]) / (pc[i] * (1.0 - pc[i]));
        }
    };
    return n;
}

void Graph::backward(Node* loss) {
    if (loss->value.numel() != 1)
        throw std::invalid_argument("backward: loss must be a scalar node");
    loss->ensure_grad().values[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->grad.values.empty()) continue;  // not reachable from loss
        if (it->backward) it->backward(*it);
    }
}

}  // namespace a2
