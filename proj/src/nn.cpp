#include "camel/nn.hpp"

#include <cmath>

namespace camel {

Matrix glorot_uniform(int fan_in, int fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix m(fan_in, fan_out);
    for (double& v : m.data) v = dist(rng);
    return m;
}

Linear::Linear(int in, int out, std::mt19937_64& rng, const std::string& name)
    : weight(name + ".W", glorot_uniform(in, out, rng)),
      bias(name + ".b", Matrix(1, out)) {}

void Linear::collect(std::vector<Parameter*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

void Linear::set_frozen(bool frozen) {
    weight.frozen = frozen;
    bias.frozen = frozen;
}

Mlp::Mlp(std::span<const int> dims, std::mt19937_64& rng, const std::string& prefix) {
    if (dims.size() < 2) throw std::invalid_argument("mlp needs at least one layer");
    for (size_t i = 0; i + 1 < dims.size(); ++i)
        layers.emplace_back(dims[i], dims[i + 1], rng, prefix + ".l" + std::to_string(i));
}

Var Mlp::forward(Tape& t, Var x) {
    for (size_t i = 0; i < layers.size(); ++i) {
        x = layers[i].forward(t, x);
        if (i + 1 < layers.size()) x = t.relu(x);
    }
    return x;
}

void Mlp::collect(std::vector<Parameter*>& out) {
    for (Linear& l : layers) l.collect(out);
}

void Mlp::set_frozen(bool frozen) {
    for (Linear& l : layers) l.set_frozen(frozen);
}

MultiHeadAttention::MultiHeadAttention(int dim, int heads, std::mt19937_64& rng,
                                       const std::string& prefix)
    : heads(heads), dim(dim) {
    if (heads < 1) throw std::invalid_argument("attention needs at least one head");
    if (dim % heads != 0)
        throw std::invalid_argument("attention dim " + std::to_string(dim) +
                                    " not divisible by " + std::to_string(heads) + " heads");
    wq = Parameter(prefix + ".Wq", glorot_uniform(dim, dim, rng));
    wk = Parameter(prefix + ".Wk", glorot_uniform(dim, dim, rng));
    wv = Parameter(prefix + ".Wv", glorot_uniform(dim, dim, rng));
    wo = Parameter(prefix + ".Wo", glorot_uniform(dim, dim, rng));
}

MultiHeadAttention::Result MultiHeadAttention::forward(Tape& t, Var query,
                                                       std::span<const Var> context) {
    if (context.empty()) throw std::invalid_argument("attention needs at least one context token");
    const int m = static_cast<int>(context.size());
    const int dk = dim / heads;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    Var q_proj = t.matmul(query, t.param(wq));
    std::vector<Var> k_proj(m), v_proj(m);
    for (int j = 0; j < m; ++j) {
        k_proj[j] = t.matmul(context[j], t.param(wk));
        v_proj[j] = t.matmul(context[j], t.param(wv));
    }

    Result res;
    std::vector<Var> head_out(heads);
    for (int h = 0; h < heads; ++h) {
        Var qh = t.slice_cols(q_proj, h * dk, dk);
        std::vector<Var> score_cols(m);
        for (int j = 0; j < m; ++j) {
            Var kh = t.slice_cols(k_proj[j], h * dk, dk);
            score_cols[j] = t.scale(t.rowwise_dot(qh, kh), inv_sqrt_dk);
        }
        Var weights = t.softmax_rows(t.concat_cols(score_cols));
        res.head_weights.push_back(weights);
        Var acc;
        for (int j = 0; j < m; ++j) {
            Var vh = t.slice_cols(v_proj[j], h * dk, dk);
            Var term = t.mul_colvec(vh, t.slice_cols(weights, j, 1));
            acc = (j == 0) ? term : t.add(acc, term);
        }
        head_out[h] = acc;
    }
    Var merged = t.concat_cols(head_out);
    res.out = t.matmul(merged, t.param(wo));
    return res;
}

void MultiHeadAttention::collect(std::vector<Parameter*>& out) {
    out.push_back(&wq);
    out.push_back(&wk);
    out.push_back(&wv);
    out.push_back(&wo);
}

void Adam::step(std::span<Parameter* const> params) {
    for (Parameter* p : params) {
        if (p->frozen) continue;
        AdamState& s = states_[p];
        if (!s.m.same_shape(p->value)) {
            s.m = Matrix(p->value.rows, p->value.cols);
            s.v = Matrix(p->value.rows, p->value.cols);
            s.step_count = 0;
        }
        ++s.step_count;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(s.step_count));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(s.step_count));
        for (size_t i = 0; i < p->value.size(); ++i) {
            const double g = p->grad.data[i];
            s.m.data[i] = beta1_ * s.m.data[i] + (1.0 - beta1_) * g;
            s.v.data[i] = beta2_ * s.v.data[i] + (1.0 - beta2_) * g * g;
            const double mhat = s.m.data[i] / bc1;
            const double vhat = s.v.data[i] / bc2;
            p->value.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
        p->grad.zero();
    }
}

const AdamState* Adam::state(const Parameter* p) const {
    auto it = states_.find(p);
    return it == states_.end() ? nullptr : &it->second;
}

AdamState& Adam::state_mutable(Parameter& p) { return states_[&p]; }

}  // namespace camel
