#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "camel/aet.hpp"
#include "camel/moe.hpp"
#include "test_util.hpp"

using namespace camel;
using testutil::get_row;
using testutil::max_abs_diff;
using testutil::random_matrix;
using testutil::vecmat;

namespace {

ModelDims tiny_dims(int latent = 4, int expert = 4, int hidden = 6) {
    return ModelDims{latent, expert, 2, hidden};
}

std::vector<StreamSystem*> raw(std::vector<std::unique_ptr<StreamSystem>>& v) {
    std::vector<StreamSystem*> out;
    for (auto& s : v) out.push_back(s.get());
    return out;
}

// make a linear layer pass its input through unchanged (for positive inputs)
void set_identity(Linear& layer) {
    layer.weight.value.zero();
    layer.bias.value.zero();
    const int d = std::min(layer.weight.value.rows, layer.weight.value.cols);
    for (int i = 0; i < d; ++i) layer.weight.value.at(i, i) = 1.0;
}

Matrix snapshot(const std::vector<Parameter*>& params) {
    Matrix flat(1, 0);
    for (const Parameter* p : params)
        flat.data.insert(flat.data.end(), p->value.data.begin(), p->value.data.end());
    flat.cols = static_cast<int>(flat.data.size());
    return flat;
}

// straight-line single-instance reimplementation of the whole stream forward
std::vector<double> unbatched_mlp(const Mlp& mlp, std::vector<double> x) {
    for (size_t l = 0; l < mlp.layers.size(); ++l) {
        const Linear& lin = mlp.layers[l];
        std::vector<double> y = vecmat(x, lin.weight.value);
        for (size_t j = 0; j < y.size(); ++j) y[j] += lin.bias.value.at(0, static_cast<int>(j));
        if (l + 1 < mlp.layers.size())
            for (double& v : y) v = std::max(v, 0.0);
        x = std::move(y);
    }
    return x;
}

std::vector<double> unbatched_softmax(std::vector<double> v) {
    double mx = v[0];
    for (double x : v) mx = std::max(mx, x);
    double sum = 0.0;
    for (double& x : v) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (double& x : v) x /= sum;
    return v;
}

}  // namespace

TEST_CASE("align: empty batch gives an empty output with latent columns") {
    StreamSystem sys({0, 3, 2}, tiny_dims(), 1);
    Tape t;
    Var h = sys.align(t, t.leaf(Matrix(0, 3)));
    CHECK(t.value(h).rows == 0);
    CHECK(t.value(h).cols == 4);
}

TEST_CASE("align: output width is the latent dimension") {
    StreamSystem sys({0, 7, 3}, tiny_dims(6, 4), 2);
    std::mt19937_64 rng(1);
    Tape t;
    Var h = sys.align(t, t.leaf(random_matrix(5, 7, rng)));
    CHECK(t.value(h).rows == 5);
    CHECK(t.value(h).cols == 6);
    CHECK(all_finite(t.value(h)));
    CHECK_THROWS_AS(sys.align(t, t.leaf(Matrix(2, 4))), std::runtime_error);
}

TEST_CASE("align: identity-initialized extractor reproduces a hand computation") {
    StreamSystem sys({0, 2, 2}, tiny_dims(2, 2, 4), 3);
    for (Linear& l : sys.feature_extractor().layers) set_identity(l);
    Matrix x = Matrix::from_rows({{1.0, 2.0}, {0.5, 3.0}});
    Tape t;
    Var h = sys.align(t, t.leaf(x));
    CHECK(max_abs_diff(t.value(h), x) == 0.0);
}

TEST_CASE("forward: one-hot routing lands exactly on that expert's output") {
    StreamSystem sys({0, 3, 2}, tiny_dims(), 4);
    sys.add_private_expert(0);  // K = 2
    // pin the router to slot 2 (second private expert)
    Linear& last = sys.routing_network().layers.back();
    last.weight.value.zero();
    last.bias.value.zero();
    for (int c = 0; c < last.bias.value.cols; ++c) last.bias.value.at(0, c) = -2000.0;
    last.bias.value.at(0, 2) = 2000.0;

    std::mt19937_64 rng(2);
    Tape t;
    Var h = sys.align(t, t.leaf(random_matrix(3, 3, rng)));
    std::vector<Var> others = {t.leaf(random_matrix(3, 4, rng))};
    ForwardResult fr = sys.forward(t, h, others);
    CHECK(max_abs_diff(t.value(fr.fused), t.value(fr.expert_out[1])) == 0.0);
}

TEST_CASE("forward: a lone stream runs against a zero context") {
    StreamSystem sys({0, 3, 2}, tiny_dims(), 5);
    std::mt19937_64 rng(3);
    Tape t;
    Var h = sys.align(t, t.leaf(random_matrix(4, 3, rng)));
    ForwardResult fr = sys.forward(t, h, {});
    CHECK(t.value(fr.context).rows == 4);
    for (double v : t.value(fr.context).data) CHECK(v == 0.0);
    CHECK(t.value(fr.logits).rows == 4);
    CHECK(t.value(fr.logits).cols == 2);
    CHECK(all_finite(t.value(fr.logits)));
}

TEST_CASE("forward: two-stream single-instance case matches an unbatched reference") {
    const ModelDims dims{2, 2, 2, 5};
    StreamSystem a({0, 3, 2}, dims, 6);
    StreamSystem b({1, 4, 3}, dims, 7);
    std::mt19937_64 rng(4);
    Matrix xa = random_matrix(1, 3, rng);
    Matrix xb = random_matrix(1, 4, rng);

    Tape t;
    Var ha = a.align(t, t.leaf(xa));
    Var hb = b.align(t, t.leaf(xb));
    std::vector<Var> others = {hb};
    ForwardResult fr = a.forward(t, ha, others);

    // reference: h -> attention (single token) -> ae mlp, private expert, routing, fusion, head
    const std::vector<double> h = unbatched_mlp(a.feature_extractor(), get_row(xa, 0));
    const std::vector<double> hj = unbatched_mlp(b.feature_extractor(), get_row(xb, 0));

    // single-token attention: weights are 1, context = (hj Wv) Wo
    const MultiHeadAttention& attn = a.assistance_expert().attn;
    const std::vector<double> ctx = vecmat(vecmat(hj, attn.wv.value), attn.wo.value);
    std::vector<double> hc = h;
    hc.insert(hc.end(), ctx.begin(), ctx.end());
    const std::vector<double> f_ae = unbatched_mlp(a.assistance_expert().net, hc);
    const std::vector<double> f_pe = unbatched_mlp(a.pool()[0]->net, h);
    const std::vector<double> routing = unbatched_softmax(unbatched_mlp(a.routing_network(), h));
    REQUIRE(routing.size() == 2);
    std::vector<double> fused(2);
    for (int d = 0; d < 2; ++d) fused[d] = routing[0] * f_ae[d] + routing[1] * f_pe[d];
    std::vector<double> logits = vecmat(fused, a.classification_head().weight.value);
    for (size_t j = 0; j < logits.size(); ++j)
        logits[j] += a.classification_head().bias.value.at(0, static_cast<int>(j));

    for (int c = 0; c < 2; ++c) {
        CHECK(t.value(fr.routing).at(0, c) == doctest::Approx(routing[c]).epsilon(1e-12));
        CHECK(t.value(fr.logits).at(0, c) == doctest::Approx(logits[c]).epsilon(1e-12));
    }
    CHECK(t.value(fr.context).at(0, 0) == doctest::Approx(ctx[0]).epsilon(1e-12));
}

TEST_CASE("total_loss: single stream reduces to plain cross entropy") {
    auto sys = std::make_unique<StreamSystem>(StreamSpec{0, 3, 2}, tiny_dims(), 8);
    std::mt19937_64 rng(5);
    std::vector<std::unique_ptr<StreamSystem>> systems;
    systems.push_back(std::move(sys));
    std::vector<Matrix> inputs = {random_matrix(4, 3, rng)};
    std::vector<std::vector<int>> labels = {{0, 1, 1, 0}};

    Tape t;
    JointForward jf = total_loss(t, raw(systems), inputs, labels);
    Tape t2;
    Var h = systems[0]->align(t2, t2.leaf(inputs[0]));
    ForwardResult fr = systems[0]->forward(t2, h, {});
    Var ce = t2.cross_entropy_mean(fr.logits, labels[0]);
    CHECK(t.value(jf.loss).data[0] == doctest::Approx(t2.value(ce).data[0]).epsilon(1e-14));
}

TEST_CASE("total_loss: uniform logits sum the per-stream entropies") {
    std::vector<std::unique_ptr<StreamSystem>> systems;
    systems.push_back(std::make_unique<StreamSystem>(StreamSpec{0, 2, 2}, tiny_dims(), 9));
    systems.push_back(std::make_unique<StreamSystem>(StreamSpec{1, 2, 3}, tiny_dims(), 10));
    for (auto& s : systems) {
        s->classification_head().weight.value.zero();
        s->classification_head().bias.value.zero();
    }
    std::mt19937_64 rng(6);
    std::vector<Matrix> inputs = {random_matrix(5, 2, rng), random_matrix(5, 2, rng)};
    std::vector<std::vector<int>> labels = {{0, 1, 0, 1, 0}, {2, 1, 0, 2, 1}};
    Tape t;
    JointForward jf = total_loss(t, raw(systems), inputs, labels);
    CHECK(t.value(jf.loss).data[0] ==
          doctest::Approx(std::log(2.0) + std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("total_loss: unequal batch sizes are a data error") {
    std::vector<std::unique_ptr<StreamSystem>> systems;
    systems.push_back(std::make_unique<StreamSystem>(StreamSpec{0, 2, 2}, tiny_dims(), 11));
    systems.push_back(std::make_unique<StreamSystem>(StreamSpec{1, 2, 2}, tiny_dims(), 12));
    std::mt19937_64 rng(7);
    std::vector<Matrix> inputs = {random_matrix(4, 2, rng), random_matrix(3, 2, rng)};
    std::vector<std::vector<int>> labels = {{0, 1, 0, 1}, {0, 1, 0}};
    Tape t;
    CHECK_THROWS_AS(total_loss(t, raw(systems), inputs, labels), std::runtime_error);
}

TEST_CASE("add_private_expert freezes the old pool and grows the router") {
    StreamSystem sys({0, 3, 2}, tiny_dims(), 13);
    CHECK(sys.pool_size() == 1);
    CHECK(sys.router_width() == 2);
    const int first_id = sys.pool()[0]->id;
    const int new_id = sys.add_private_expert(7);
    CHECK(sys.pool_size() == 2);
    CHECK(sys.router_width() == 3);
    CHECK(new_id != first_id);
    CHECK(sys.pool()[0]->frozen);
    CHECK_FALSE(sys.pool()[1]->frozen);
    CHECK(sys.pool()[1]->birth_window == 7);
    CHECK(sys.pool()[1]->utilization == doctest::Approx(1.0 / 3));
    for (Parameter* p : sys.expert_parameters(first_id)) CHECK(p->frozen);

    sys.add_private_expert(9);
    CHECK(sys.pool_size() == 3);
    CHECK(sys.router_width() == 4);
    CHECK(sys.pool()[1]->frozen);
}

TEST_CASE("router resize keeps retained slots' pre-softmax logits") {
    StreamSystem sys({0, 3, 2}, tiny_dims(), 14);
    std::mt19937_64 rng(8);
    Matrix x = random_matrix(4, 3, rng);

    auto router_logits = [&]() {
        Tape t;
        Var h = sys.align(t, t.leaf(x));
        ForwardResult fr = sys.forward(t, h, {});
        return t.value(fr.router_logits);
    };

    const Matrix before = router_logits();
    sys.add_private_expert(1);
    const Matrix grown = router_logits();
    REQUIRE(grown.cols == 3);
    for (int r = 0; r < before.rows; ++r)
        for (int c = 0; c < before.cols; ++c) CHECK(grown.at(r, c) == before.at(r, c));

    // prune the older expert: slot 1 disappears, slot 2 shifts into it
    const int old_id = sys.pool()[0]->id;
    sys.prune_private_expert(old_id);
    const Matrix shrunk = router_logits();
    REQUIRE(shrunk.cols == 2);
    for (int r = 0; r < before.rows; ++r) {
        CHECK(shrunk.at(r, 0) == grown.at(r, 0));
        CHECK(shrunk.at(r, 1) == grown.at(r, 2));
    }
}

TEST_CASE("prune guards: unknown id and the last expert") {
    StreamSystem sys({0, 3, 2}, tiny_dims(), 15);
    CHECK_THROWS_AS(sys.prune_private_expert(sys.pool()[0]->id), std::runtime_error);
    sys.add_private_expert(1);
    CHECK_THROWS_AS(sys.prune_private_expert(12345), std::runtime_error);
    sys.prune_private_expert(sys.pool()[0]->id);
    CHECK(sys.pool_size() == 1);
    CHECK(sys.router_width() == 2);
}

TEST_CASE("routing rows are simplexes and fused output stays in the experts' hull") {
    StreamSystem sys({0, 3, 2}, tiny_dims(), 16);
    sys.add_private_expert(0);
    std::mt19937_64 rng(9);
    Tape t;
    Var h = sys.align(t, t.leaf(random_matrix(6, 3, rng, -2, 2)));
    std::vector<Var> others = {t.leaf(random_matrix(6, 4, rng))};
    ForwardResult fr = sys.forward(t, h, others);

    const Matrix& routing = t.value(fr.routing);
    for (int r = 0; r < routing.rows; ++r) {
        double sum = 0.0;
        for (int c = 0; c < routing.cols; ++c) {
            CHECK(routing.at(r, c) >= 0.0);
            sum += routing.at(r, c);
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }

    const Matrix& fused = t.value(fr.fused);
    std::vector<const Matrix*> outs = {&t.value(fr.assist_out)};
    for (const Var& v : fr.expert_out) outs.push_back(&t.value(v));
    for (int r = 0; r < fused.rows; ++r)
        for (int c = 0; c < fused.cols; ++c) {
            double lo = outs[0]->at(r, c), hi = outs[0]->at(r, c);
            for (const Matrix* m : outs) {
                lo = std::min(lo, m->at(r, c));
                hi = std::max(hi, m->at(r, c));
            }
            CHECK(fused.at(r, c) >= lo - 1e-9);
            CHECK(fused.at(r, c) <= hi + 1e-9);
        }
}

TEST_CASE("frozen experts stay bitwise identical across training epochs") {
    std::vector<std::unique_ptr<StreamSystem>> systems;
    systems.push_back(std::make_unique<StreamSystem>(StreamSpec{0, 3, 2}, tiny_dims(), 17));
    StreamSystem& sys = *systems[0];
    const int frozen_id = sys.pool()[0]->id;
    sys.add_private_expert(1);
    const Matrix before = snapshot(sys.expert_parameters(frozen_id));

    std::mt19937_64 rng(10);
    std::vector<Matrix> inputs = {random_matrix(8, 3, rng)};
    std::vector<std::vector<int>> labels = {testutil::random_labels(8, 2, rng)};
    Adam adam(1e-2);
    auto params = sys.parameters();
    Tape t;
    for (int epoch = 0; epoch < 5; ++epoch) {
        t.reset();
        JointForward jf = total_loss(t, raw(systems), inputs, labels);
        t.backward(jf.loss);
        adam.step(params);
    }
    const Matrix after = snapshot(sys.expert_parameters(frozen_id));
    CHECK(max_abs_diff(before, after) == 0.0);
}

TEST_CASE("gradients flow across streams through the assistance attention") {
    const ModelDims dims{4, 4, 2, 5};
    std::vector<std::unique_ptr<StreamSystem>> systems;
    systems.push_back(std::make_unique<StreamSystem>(StreamSpec{0, 3, 2}, dims, 18));
    systems.push_back(std::make_unique<StreamSystem>(StreamSpec{1, 2, 2}, dims, 19));
    std::mt19937_64 rng(11);
    std::vector<Matrix> inputs = {random_matrix(3, 3, rng), random_matrix(3, 2, rng)};
    std::vector<std::vector<int>> labels = {{0, 1, 0}, {1, 0, 1}};

    // loss of stream 0 only; differentiate wrt stream 1's feature extractor
    Tape t;
    JointForward jf = total_loss(t, raw(systems), inputs, labels);
    t.backward(jf.stream_loss[0]);

    Parameter& foreign = systems[1]->feature_extractor().layers[0].weight;
    double magnitude = 0.0;
    for (double g : foreign.grad.data) magnitude += std::abs(g);
    CHECK(magnitude > 0.0);

    // finite-difference check on the largest coordinate
    size_t idx = 0;
    for (size_t i = 0; i < foreign.grad.size(); ++i)
        if (std::abs(foreign.grad.data[i]) > std::abs(foreign.grad.data[idx])) idx = i;
    const double bp = foreign.grad.data[idx];
    const double h = 1e-5;
    auto stream0_loss = [&]() {
        Tape tt;
        JointForward probe = total_loss(tt, raw(systems), inputs, labels);
        return tt.value(probe.stream_loss[0]).data[0];
    };
    const double saved = foreign.value.data[idx];
    foreign.value.data[idx] = saved + h;
    const double up = stream0_loss();
    foreign.value.data[idx] = saved - h;
    const double down = stream0_loss();
    foreign.value.data[idx] = saved;
    const double fd = (up - down) / (2.0 * h);
    CHECK(bp == doctest::Approx(fd).epsilon(1e-4));
}

TEST_CASE("masked forward reports zero assistance weight and fuses private experts only") {
    StreamSystem sys({0, 3, 2}, tiny_dims(), 20);
    std::mt19937_64 rng(12);
    Tape t;
    Var h = sys.align(t, t.leaf(random_matrix(4, 3, rng)));
    std::vector<Var> others = {t.leaf(random_matrix(4, 4, rng))};
    ForwardOptions masked;
    masked.use_assistance = false;
    ForwardResult fr = sys.forward(t, h, others, masked);
    const Matrix& routing = t.value(fr.routing);
    REQUIRE(routing.cols == 2);
    for (int r = 0; r < routing.rows; ++r) {
        CHECK(routing.at(r, 0) == 0.0);
        CHECK(routing.at(r, 1) == doctest::Approx(1.0));
    }
    // with a single private expert the fused output is exactly its output
    CHECK(max_abs_diff(t.value(fr.fused), t.value(fr.expert_out[0])) == 0.0);
}
