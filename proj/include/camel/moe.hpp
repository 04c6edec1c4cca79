#pragma once

#include <memory>
#include <span>
#include <vector>

#include "camel/nn.hpp"

namespace camel {

struct StreamSpec {
    int stream_id = 0;
    int input_dim = 0;
    int num_classes = 0;
};

struct ModelDims {
    int latent = 8;   // shared latent width all streams align to
    int expert = 8;   // expert output width
    int heads = 2;
    int hidden = 50;  // hidden width of every internal MLP
};

struct PrivateExpert {
    int id = 0;
    bool frozen = false;
    int birth_window = 0;
    double utilization = 0.0;  // running mean of per-window mean routing weight
    long util_windows = 0;     // windows folded into the mean; 0 -> utilization is the initial placeholder
    Mlp net;                   // latent -> hidden -> hidden -> expert
};

struct AssistanceExpert {
    MultiHeadAttention attn;
    Mlp net;  // [h; c] (2*latent) -> hidden -> expert
};

struct ForwardOptions {
    // When false the assistance expert is masked out: routing is a softmax
    // over the private slots only and slot 0 reports weight 0.
    bool use_assistance = true;
};

struct ForwardResult {
    Var logits;         // B x C_i
    Var routing;        // B x (K+1), rows sum to 1; slot 0 = assistance expert
    Var fused;          // B x expert_dim
    Var context;        // B x latent (zeros when there are no other streams)
    Var router_logits;  // B x (K+1), pre-softmax
    Var assist_out;     // B x expert_dim (unused when masked)
    std::vector<Var> expert_out;
};

// One stream's full learnable stack: feature extractor, private expert pool,
// assistance expert, routing network and classification head. The router's
// output width tracks the pool: slot 0 is the assistance expert, slots 1..K
// the private experts in pool order.
class StreamSystem {
public:
    StreamSystem(StreamSpec spec, ModelDims dims, uint64_t seed);

    Var align(Tape& t, Var x);
    ForwardResult forward(Tape& t, Var h_self, std::span<const Var> h_others,
                          const ForwardOptions& opts = {});

    // Freezes every existing private expert, appends a fresh trainable one and
    // grows the router by one slot. Returns the new expert's id.
    int add_private_expert(int birth_window);
    // Removes the expert and its router slot; retained slots keep their
    // weights verbatim. Refuses to empty the pool.
    void prune_private_expert(int expert_id);

    const StreamSpec& spec() const { return spec_; }
    const ModelDims& dims() const { return dims_; }
    uint64_t seed() const { return seed_; }
    int pool_size() const { return static_cast<int>(pool_.size()); }
    int router_width() const { return rn_.out_dim(); }
    int next_expert_id() const { return next_expert_id_; }

    std::vector<std::unique_ptr<PrivateExpert>>& pool() { return pool_; }
    const std::vector<std::unique_ptr<PrivateExpert>>& pool() const { return pool_; }
    PrivateExpert* find_expert(int id);

    Mlp& feature_extractor() { return fe_; }
    AssistanceExpert& assistance_expert() { return ae_; }
    Mlp& routing_network() { return rn_; }
    Linear& classification_head() { return ch_; }

    std::vector<Parameter*> parameters();
    std::vector<Parameter*> expert_parameters(int expert_id);

    // checkpoint restore helpers
    void set_next_expert_id(int id) { next_expert_id_ = id; }
    PrivateExpert& append_expert_for_restore(int id);

private:
    StreamSpec spec_;
    ModelDims dims_;
    uint64_t seed_;
    Mlp fe_;
    std::vector<std::unique_ptr<PrivateExpert>> pool_;
    AssistanceExpert ae_;
    Mlp rn_;  // latent -> hidden -> hidden -> (K+1)
    Linear ch_;
    int next_expert_id_ = 0;

    Mlp make_expert_net(int expert_id);
    void grow_router_slot();
    void shrink_router_slot(int slot);
};

struct JointForward {
    Var loss;  // 1x1: sum over streams of mean cross-entropy
    std::vector<Var> aligned;
    std::vector<Var> stream_loss;
    std::vector<ForwardResult> per_stream;
};

// Eq-style joint objective: mean cross-entropy inside each stream, summed
// across streams. All batches must have the same number of rows.
JointForward total_loss(Tape& t, std::span<StreamSystem* const> systems,
                        std::span<const Matrix> inputs,
                        std::span<const std::vector<int>> labels,
                        const ForwardOptions& opts = {});

}  // namespace camel
