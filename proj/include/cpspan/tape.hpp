#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "cpspan/matrix.hpp"

namespace cpspan {

// Reverse-mode tape over matrix-valued nodes. A training step builds one tape,
// reduces to a 1x1 loss node and calls backward(); creation order is the
// topological order, so gradients run from the last node to the first.
//
// The op set is exactly what the losses in this project need; this is not a
// general autodiff library.
class Tape {
public:
    struct Var {
        int id = -1;
        bool valid() const { return id >= 0; }
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaves. Constants never receive gradients; variables do.
    Var constant(Matrix value);
    Var variable(Matrix value);

    const Matrix& value(Var v) const { return nodes_[v.id].value; }
    // Valid after backward(); zero matrix when the node does not reach the root.
    const Matrix& grad(Var v) const { return nodes_[v.id].grad; }

    // y = x * W^T + b   with x: B x in, W: out x in, b: 1 x out
    Var affine(Var x, Var w, Var b);
    Var relu(Var x);
    Var matmul(Var a, Var b);
    Var matmul_const(const Matrix& a, Var b);  // a is a fixed coefficient matrix
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var scale(Var a, double s);
    Var gather_rows(Var x, std::vector<std::size_t> rows);
    // Pairwise cosine similarities between rows of a and rows of b.
    // Throws DegenerateEmbedding when a row norm falls below 1e-12.
    Var cosine_rows(Var a, Var b);
    Var diagonal(Var square);
    Var sum(Var x);          // 1x1
    Var sum_squares(Var x);  // 1x1
    // InfoNCE-style objective over per-view embedding batches: positives are
    // the same row in other views, negatives are other rows in other views,
    // and each positive term keeps itself in its denominator.
    Var contrastive(const std::vector<Var>& views, double tau);

    void backward(Var scalar_root);

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool needs_grad = false;
        std::function<void(Tape&)> backprop;  // pushes this node's grad to its inputs
    };

    Var push(Matrix value, bool needs_grad, std::function<void(Tape&)> backprop);
    Matrix& grad_ref(int id) { return nodes_[id].grad; }
    bool needs(Var v) const { return nodes_[v.id].needs_grad; }

    std::vector<Node> nodes_;
};

}  // namespace cpspan
