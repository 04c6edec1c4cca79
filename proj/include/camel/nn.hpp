#pragma once

#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "camel/tape.hpp"

namespace camel {

// Uniform init in +-sqrt(6 / (fan_in + fan_out)); biases start at zero.
Matrix glorot_uniform(int fan_in, int fan_out, std::mt19937_64& rng);

struct Linear {
    Parameter weight;  // in x out
    Parameter bias;    // 1 x out

    Linear() = default;
    Linear(int in, int out, std::mt19937_64& rng, const std::string& name);

    Var forward(Tape& t, Var x) { return linear(t, x, weight, bias); }
    int in_dim() const { return weight.value.rows; }
    int out_dim() const { return weight.value.cols; }
    void collect(std::vector<Parameter*>& out);
    void set_frozen(bool frozen);
};

// Linear blocks with ReLU between them (none after the last).
struct Mlp {
    std::vector<Linear> layers;

    Mlp() = default;
    Mlp(std::span<const int> dims, std::mt19937_64& rng, const std::string& prefix);

    Var forward(Tape& t, Var x);
    int in_dim() const { return layers.front().in_dim(); }
    int out_dim() const { return layers.back().out_dim(); }
    void collect(std::vector<Parameter*>& out);
    void set_frozen(bool frozen);
};

// Scaled dot-product attention with learned Q/K/V/O projections (dim x dim,
// split across heads). The query is one row per instance; the context is one
// token per other stream, paired with the query by row index.
struct MultiHeadAttention {
    int heads = 0;
    int dim = 0;
    Parameter wq, wk, wv, wo;

    MultiHeadAttention() = default;
    MultiHeadAttention(int dim, int heads, std::mt19937_64& rng, const std::string& prefix);

    struct Result {
        Var out;                        // B x dim
        std::vector<Var> head_weights;  // per head: B x M, rows sum to 1
    };
    Result forward(Tape& t, Var query, std::span<const Var> context);

    void collect(std::vector<Parameter*>& out);
};

struct AdamState {
    Matrix m;
    Matrix v;
    long step_count = 0;
};

// Adam with bias correction. State is kept per parameter; a parameter whose
// shape changed (router resize) restarts with fresh moments.
class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::span<Parameter* const> params);
    void forget(const Parameter* p) { states_.erase(p); }
    void clear() { states_.clear(); }

    const AdamState* state(const Parameter* p) const;
    AdamState& state_mutable(Parameter& p);  // checkpoint restore

    double lr() const { return lr_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::unordered_map<const Parameter*, AdamState> states_;
};

}  // namespace camel
