#pragma once

#include <deque>
#include <functional>
#include <random>
#include <vector>

#include "a2/params.hpp"
#include "a2/tensor.hpp"

namespace a2 {

// Define-by-run reverse-mode tape. A fresh Graph is built per batch; nodes
// live in creation (= topological) order and the backward pass walks them in
// reverse. One graph belongs to one execution context; no shared mutation.
struct Node {
    Tensor value;
    Tensor grad;  // lazily sized; empty means "not reached yet"
    std::function<void(Node&)> backward;

    Node() = default;
    Node(const Node&) = delete;
    Node& operator=(const Node&) = delete;
    Node(Node&&) = default;

    Tensor& ensure_grad() {
        if (grad.values.empty()) grad = zeros_like(value);
        return grad;
    }
};

class Graph {
public:
    // Constant input; receives no gradient.
    Node* leaf(Tensor v);

    // Leaf bound to a parameter: after backward its gradient is accumulated
    // into the parameter's grad slot.
    Node* param(Parameter& p);

    // Row gather from a parameter matrix; gradients scatter-add into exactly
    // the looked-up rows.
    Node* rows_lookup(Parameter& table, const std::vector<std::size_t>& rows);

    Node* concat_cols(const std::vector<Node*>& parts);

    // y = x W + b, x:[B x I], W:[I x O], b:[O]
    Node* dense(Node* x, Node* W, Node* b);

    Node* add(Node* a, Node* b);
    Node* scale(Node* x, double c);

    // prelu with one learnable slope per channel (last axis).
    Node* prelu(Node* x, Node* slope);
    Node* sigmoid(Node* x);
    Node* softmax_rows(Node* x);

    // Train mode normalizes by batch statistics (population variance) and
    // updates running stats in place; eval mode reads them. batch size 1 in
    // train mode is rejected.
    Node* batch_norm(Node* x, Node* gamma, Node* beta, Parameter& run_mean,
                     Parameter& run_var, bool train, double momentum = 0.99,
                     double eps = 1e-5);

    // Forward identity, backward contributes exactly zero upstream.
    Node* stop_gradient(Node* x);

    // Forward value is `forward_value`, gradient passes straight to x.
    // Realizes x + sg(forward_value - x).
    Node* straight_through(Node* x, const Tensor& forward_value);

    // Inverted dropout; identity when rate == 0.
    Node* dropout(Node* x, double rate, std::mt19937_64& rng);

    // Per-sample routed affine: row i uses weights[k[i]], biases[k[i]].
    // Pass empty biases to disable the bias term.
    Node* routed_affine(Node* x, const std::vector<Parameter*>& weights,
                        const std::vector<Parameter*>& biases,
                        const std::vector<int>& k);

    // Softmax-weighted fusion of all affine maps; alpha:[B x N] is a plain
    // tensor (no gradient flows into the weights' source).
    Node* soft_routed_affine(Node* x, const std::vector<Parameter*>& weights,
                             const std::vector<Parameter*>& biases,
                             const Tensor& alpha);

    // Mean over batch of the summed squared difference.
    Node* mse_loss(Node* u, Node* v);

    // Mean binary cross-entropy; p clamped to [1e-7, 1-1e-7] before log.
    Node* ce_loss(Node* p, const std::vector<double>& labels);

    void backward(Node* loss);

    std::size_t size() const { return nodes_.size(); }

private:
    Node* make(Tensor value);
    std::deque<Node> nodes_;
};

}  // namespace a2
