#include "camel/moe.hpp"

#include <algorithm>

namespace camel {

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    // splitmix64 over seed ^ salt
    uint64_t z = seed ^ (salt + 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

StreamSystem::StreamSystem(StreamSpec spec, ModelDims dims, uint64_t seed)
    : spec_(spec), dims_(dims), seed_(seed) {
    if (spec_.input_dim < 1) throw std::invalid_argument("stream input_dim must be >= 1");
    if (spec_.num_classes < 2) throw std::invalid_argument("stream num_classes must be >= 2");
    std::mt19937_64 rng(mix_seed(seed_, 0x5153u));
    const std::string sid = "s" + std::to_string(spec_.stream_id);
    const int fe_dims[] = {spec_.input_dim, dims_.hidden, dims_.hidden, dims_.latent};
    fe_ = Mlp(fe_dims, rng, sid + ".fe");
    ae_.attn = MultiHeadAttention(dims_.latent, dims_.heads, rng, sid + ".ae");
    const int ae_dims[] = {2 * dims_.latent, dims_.hidden, dims_.expert};
    ae_.net = Mlp(ae_dims, rng, sid + ".ae.mlp");
    const int rn_dims[] = {dims_.latent, dims_.hidden, dims_.hidden, 2};  // 1 expert + assistance
    rn_ = Mlp(rn_dims, rng, sid + ".rn");
    ch_ = Linear(dims_.expert, spec_.num_classes, rng, sid + ".ch");

    auto expert = std::make_unique<PrivateExpert>();
    expert->id = next_expert_id_++;
    expert->net = make_expert_net(expert->id);
    expert->utilization = 0.5;  // uniform share of a 2-slot router
    pool_.push_back(std::move(expert));
}

Mlp StreamSystem::make_expert_net(int expert_id) {
    std::mt19937_64 rng(mix_seed(seed_, 0xe060ull + static_cast<uint64_t>(expert_id)));
    const int dims[] = {dims_.latent, dims_.hidden, dims_.hidden, dims_.expert};
    return Mlp(dims, rng,
               "s" + std::to_string(spec_.stream_id) + ".pe" + std::to_string(expert_id));
}

Var StreamSystem::align(Tape& t, Var x) {
    const Matrix& xv = t.value(x);
    if (xv.cols != spec_.input_dim)
        throw std::runtime_error("stream " + std::to_string(spec_.stream_id) + ": input has " +
                                 std::to_string(xv.cols) + " features, expected " +
                                 std::to_string(spec_.input_dim));
    return fe_.forward(t, x);
}

ForwardResult StreamSystem::forward(Tape& t, Var h_self, std::span<const Var> h_others,
                                    const ForwardOptions& opts) {
    // note: tape growth invalidates value() references, so keep plain ints
    const int batch = t.value(h_self).rows;
    if (t.value(h_self).cols != dims_.latent)
        throw std::invalid_argument("aligned features must have width " +
                                    std::to_string(dims_.latent));
    const int k = pool_size();

    ForwardResult res;
    res.router_logits = rn_.forward(t, h_self);

    // Context from the other streams; a lone stream gets a zero context and
    // the assistance expert degenerates to MLP([h; 0]).
    if (h_others.empty()) {
        res.context = t.leaf(Matrix(batch, dims_.latent));
    } else {
        auto attn = ae_.attn.forward(t, h_self, h_others);
        res.context = attn.out;
    }
    const Var hc[] = {h_self, res.context};
    res.assist_out = ae_.net.forward(t, t.concat_cols(hc));

    res.expert_out.reserve(k);
    for (auto& pe : pool_) res.expert_out.push_back(pe->net.forward(t, h_self));

    Var fused;
    if (opts.use_assistance) {
        res.routing = t.softmax_rows(res.router_logits);
        fused = t.mul_colvec(res.assist_out, t.slice_cols(res.routing, 0, 1));
        for (int j = 0; j < k; ++j)
            fused = t.add(fused, t.mul_colvec(res.expert_out[j], t.slice_cols(res.routing, j + 1, 1)));
    } else {
        // Softmax over the private slots only; slot 0 reports weight 0.
        Var priv = t.softmax_rows(t.slice_cols(res.router_logits, 1, k));
        const Var parts[] = {t.leaf(Matrix(batch, 1)), priv};
        res.routing = t.concat_cols(parts);
        for (int j = 0; j < k; ++j) {
            Var term = t.mul_colvec(res.expert_out[j], t.slice_cols(priv, j, 1));
            fused = (j == 0) ? term : t.add(fused, term);
        }
    }
    res.fused = fused;
    res.logits = ch_.forward(t, fused);
    return res;
}

void StreamSystem::grow_router_slot() {
    Linear& last = rn_.layers.back();
    const Matrix& w = last.weight.value;
    const Matrix& b = last.bias.value;
    const int new_out = w.cols + 1;
    std::mt19937_64 rng(mix_seed(seed_, 0x514eull + static_cast<uint64_t>(next_expert_id_)));
    Matrix fresh = glorot_uniform(w.rows, new_out, rng);
    Matrix nw(w.rows, new_out);
    for (int r = 0; r < w.rows; ++r) {
        for (int c = 0; c < w.cols; ++c) nw.at(r, c) = w.at(r, c);
        nw.at(r, new_out - 1) = fresh.at(r, new_out - 1);
    }
    Matrix nb(1, new_out);
    for (int c = 0; c < b.cols; ++c) nb.at(0, c) = b.at(0, c);
    last.weight.reshape(std::move(nw));
    last.bias.reshape(std::move(nb));
}

void StreamSystem::shrink_router_slot(int slot) {
    Linear& last = rn_.layers.back();
    const Matrix& w = last.weight.value;
    const Matrix& b = last.bias.value;
    Matrix nw(w.rows, w.cols - 1);
    Matrix nb(1, b.cols - 1);
    for (int r = 0; r < w.rows; ++r) {
        int out = 0;
        for (int c = 0; c < w.cols; ++c) {
            if (c == slot) continue;
            nw.at(r, out++) = w.at(r, c);
        }
    }
    int out = 0;
    for (int c = 0; c < b.cols; ++c) {
        if (c == slot) continue;
        nb.at(0, out++) = b.at(0, c);
    }
    last.weight.reshape(std::move(nw));
    last.bias.reshape(std::move(nb));
}

int StreamSystem::add_private_expert(int birth_window) {
    for (auto& pe : pool_) {
        pe->frozen = true;
        pe->net.set_frozen(true);
    }
    auto expert = std::make_unique<PrivateExpert>();
    expert->id = next_expert_id_++;
    expert->birth_window = birth_window;
    expert->net = make_expert_net(expert->id);
    expert->utilization = 1.0 / (pool_size() + 2.0);  // uniform share until first update
    const int id = expert->id;
    pool_.push_back(std::move(expert));
    grow_router_slot();
    return id;
}

void StreamSystem::prune_private_expert(int expert_id) {
    if (pool_size() < 2)
        throw std::runtime_error("stream " + std::to_string(spec_.stream_id) +
                                 ": cannot prune the last private expert");
    auto it = std::find_if(pool_.begin(), pool_.end(),
                           [&](const auto& pe) { return pe->id == expert_id; });
    if (it == pool_.end())
        throw std::runtime_error("stream " + std::to_string(spec_.stream_id) + ": no expert with id " +
                                 std::to_string(expert_id));
    const int slot = static_cast<int>(it - pool_.begin()) + 1;
    pool_.erase(it);
    shrink_router_slot(slot);
}

PrivateExpert* StreamSystem::find_expert(int id) {
    for (auto& pe : pool_)
        if (pe->id == id) return pe.get();
    return nullptr;
}

std::vector<Parameter*> StreamSystem::parameters() {
    std::vector<Parameter*> out;
    fe_.collect(out);
    for (auto& pe : pool_) pe->net.collect(out);
    ae_.attn.collect(out);
    ae_.net.collect(out);
    rn_.collect(out);
    ch_.collect(out);
    return out;
}

std::vector<Parameter*> StreamSystem::expert_parameters(int expert_id) {
    std::vector<Parameter*> out;
    if (PrivateExpert* pe = find_expert(expert_id)) pe->net.collect(out);
    return out;
}

PrivateExpert& StreamSystem::append_expert_for_restore(int id) {
    auto expert = std::make_unique<PrivateExpert>();
    expert->id = id;
    expert->net = make_expert_net(id);
    pool_.push_back(std::move(expert));
    if (router_width() != pool_size() + 1) grow_router_slot();
    return *pool_.back();
}

JointForward total_loss(Tape& t, std::span<StreamSystem* const> systems,
                        std::span<const Matrix> inputs,
                        std::span<const std::vector<int>> labels,
                        const ForwardOptions& opts) {
    const size_t n = systems.size();
    if (inputs.size() != n || labels.size() != n)
        throw std::invalid_argument("total_loss: systems, inputs and labels must align");
    if (n == 0) throw std::invalid_argument("total_loss: no streams");
    const int batch = inputs[0].rows;
    for (size_t i = 0; i < n; ++i) {
        if (inputs[i].rows != batch)
            throw std::runtime_error("window batches are unequal: stream 0 has " +
                                     std::to_string(batch) + " rows, stream " + std::to_string(i) +
                                     " has " + std::to_string(inputs[i].rows));
        if (static_cast<int>(labels[i].size()) != batch)
            throw std::runtime_error("stream " + std::to_string(i) + ": " +
                                     std::to_string(labels[i].size()) + " labels for " +
                                     std::to_string(batch) + " rows");
    }

    JointForward jf;
    jf.aligned.reserve(n);
    for (size_t i = 0; i < n; ++i)
        jf.aligned.push_back(systems[i]->align(t, t.leaf(inputs[i])));

    for (size_t i = 0; i < n; ++i) {
        std::vector<Var> others;
        others.reserve(n - 1);
        for (size_t j = 0; j < n; ++j)
            if (j != i) others.push_back(jf.aligned[j]);
        ForwardResult fr = systems[i]->forward(t, jf.aligned[i], others, opts);
        Var ce = t.cross_entropy_mean(fr.logits, labels[i],
                                      "stream " + std::to_string(systems[i]->spec().stream_id));
        jf.stream_loss.push_back(ce);
        jf.per_stream.push_back(std::move(fr));
        jf.loss = (i == 0) ? ce : t.add(jf.loss, ce);
    }
    return jf;
}

}  // namespace camel
