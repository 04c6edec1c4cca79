#pragma once

#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "camel/matrix.hpp"

namespace camel {

// A learnable tensor. Gradients accumulate into `grad` during backward and
// are consumed (and zeroed) by the optimizer. Frozen parameters receive no
// gradient and are never stepped.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
    bool frozen = false;

    Parameter() = default;
    Parameter(std::string n, Matrix v)
        : name(std::move(n)), value(std::move(v)), grad(value.rows, value.cols) {}

    void reshape(Matrix new_value) {
        value = std::move(new_value);
        grad = Matrix(value.rows, value.cols);
    }
};

// Handle to a node recorded on a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Single-threaded reverse-mode tape. Every op records its inputs and a
// backward closure; backward() replays them in reverse and flushes the
// accumulated gradients into the unfrozen Parameters that were attached
// via param().
class Tape {
public:
    Var leaf(Matrix value);
    Var param(Parameter& p);  // idempotent per tape: same Parameter -> same node

    Var matmul(Var a, Var b);
    Var linear_op(Var x, Var w, Var b);  // x*w + bias row, fused
    Var add(Var a, Var b);
    Var add_row_broadcast(Var x, Var bias);  // bias is 1xN, broadcast over rows
    Var mul_colvec(Var x, Var col);          // col is Bx1, broadcast over columns
    Var relu(Var x);
    Var softmax_rows(Var x);
    Var scale(Var x, double s);
    Var slice_cols(Var x, int first, int count);
    Var concat_cols(std::span<const Var> xs);
    Var rowwise_dot(Var a, Var b);  // -> Bx1
    // Mean over the batch of -log softmax(logits)[label]; returns a 1x1 node.
    Var cross_entropy_mean(Var logits, const std::vector<int>& labels,
                           const std::string& context = {});

    const Matrix& value(Var v) const;
    Matrix& grad_of(Var v);  // valid during/after backward

    void backward(Var loss);
    void reset();
    int size() const { return static_cast<int>(nodes_.size()); }

    // Value-only mode: ops skip recording backward closures. Used by finite
    // difference probes, where only the forward value matters.
    void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }
    bool grad_enabled() const { return grad_enabled_; }

    // Number of strictly-positive relu inputs since the last reset. A finite
    // difference probe whose +-h evaluations disagree on this count crossed a
    // relu kink, so its central difference is not a valid oracle there.
    size_t relu_positive_count() const { return relu_positive_; }

private:
    struct Node {
        Matrix val;                  // owned value (ops)
        const Matrix* ext = nullptr; // external value (parameter leafs); avoids copying weights
        Matrix grad;
        std::function<void(Tape&)> back;
        Parameter* bound = nullptr;

        const Matrix& value() const { return ext ? *ext : val; }
    };

    Var push(Matrix val, std::function<void(Tape&)> back);
    void set_back(Var v, std::function<void(Tape&)> back);
    Node& node(Var v);
    const Node& node(Var v) const;
    void check(Var v) const;

    std::vector<Node> nodes_;
    std::vector<std::pair<Parameter*, int>> param_nodes_;
    std::unordered_map<const Parameter*, int> param_index_;
    bool grad_enabled_ = true;
    size_t relu_positive_ = 0;
};

// Y = X * W + b, broadcast over rows.
Var linear(Tape& t, Var x, Parameter& w, Parameter& b);

}  // namespace camel
