#include "camel/selfcheck.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "camel/aet.hpp"
#include "camel/drift.hpp"
#include "camel/moe.hpp"

namespace camel {

namespace {

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix m(rows, cols);
    for (double& v : m.data) v = dist(rng);
    return m;
}

struct TinyModel {
    std::vector<std::unique_ptr<StreamSystem>> systems;
    std::vector<Matrix> inputs;
    std::vector<std::vector<int>> labels;

    explicit TinyModel(uint64_t seed) {
        ModelDims dims{4, 4, 2, 6};
        systems.push_back(std::make_unique<StreamSystem>(StreamSpec{0, 3, 2}, dims, seed));
        systems.push_back(std::make_unique<StreamSystem>(StreamSpec{1, 3, 3}, dims, seed + 1));
        std::mt19937_64 rng(seed + 7);
        inputs.push_back(random_matrix(3, 3, rng));
        inputs.push_back(random_matrix(3, 3, rng));
        labels.push_back({0, 1, 0});
        labels.push_back({2, 0, 1});
    }

    std::vector<StreamSystem*> raw() {
        std::vector<StreamSystem*> out;
        for (auto& s : systems) out.push_back(s.get());
        return out;
    }

    double loss_value() {
        Tape t;
        return t.value(total_loss(t, raw(), inputs, labels).loss).data[0];
    }
};

CheckResult check_gradients() {
    CheckResult res{"gradient finite differences", true, ""};
    TinyModel model(11);
    auto sys = model.raw();
    Tape tape;
    JointForward jf = total_loss(tape, sys, model.inputs, model.labels);
    tape.backward(jf.loss);

    const double h = 1e-5;
    double worst = 0.0;
    std::mt19937_64 pick(3);
    for (auto& s : model.systems) {
        for (Parameter* p : s->parameters()) {
            // spot-check a few coordinates per parameter
            for (int trial = 0; trial < 3; ++trial) {
                const size_t idx = pick() % p->value.size();
                const double saved = p->value.data[idx];
                p->value.data[idx] = saved + h;
                const double up = model.loss_value();
                p->value.data[idx] = saved - h;
                const double down = model.loss_value();
                p->value.data[idx] = saved;
                const double fd = (up - down) / (2.0 * h);
                const double bp = p->grad.data[idx];
                const double rel = std::abs(fd - bp) / std::max({std::abs(fd), std::abs(bp), 1e-4});
                worst = std::max(worst, rel);
            }
        }
    }
    std::ostringstream d;
    d << "max relative error " << worst;
    res.detail = d.str();
    res.passed = worst < 1e-4;
    return res;
}

CheckResult check_mmd() {
    CheckResult res{"mmd brute-force oracle", true, ""};
    std::mt19937_64 rng(5);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const int a = 2 + static_cast<int>(rng() % 20);
        const int b = 2 + static_cast<int>(rng() % 20);
        const int d = 1 + static_cast<int>(rng() % 6);
        Matrix A = random_matrix(a, d, rng);
        Matrix B = random_matrix(b, d, rng);
        const double sigma = 0.5;
        double kaa = 0.0, kbb = 0.0, kab = 0.0;
        auto k = [&](const double* x, const double* y) {
            double d2 = 0.0;
            for (int c = 0; c < d; ++c) d2 += (x[c] - y[c]) * (x[c] - y[c]);
            return std::exp(-d2 / (2.0 * sigma * sigma));
        };
        for (int p = 0; p < a; ++p)
            for (int q = 0; q < a; ++q) kaa += k(A.row(p), A.row(q));
        for (int p = 0; p < b; ++p)
            for (int q = 0; q < b; ++q) kbb += k(B.row(p), B.row(q));
        for (int p = 0; p < a; ++p)
            for (int q = 0; q < b; ++q) kab += k(A.row(p), B.row(q));
        const double oracle = kaa / (double(a) * a) + kbb / (double(b) * b) - 2.0 * kab / (double(a) * b);
        worst = std::max(worst, std::abs(mmd2(A, B, sigma) - std::max(oracle, 0.0)));
        worst = std::max(worst, mmd2(A, A, sigma));
        worst = std::max(worst, std::abs(mmd2(A, B, sigma) - mmd2(B, A, sigma)));
    }
    std::ostringstream d;
    d << "max deviation " << worst;
    res.detail = d.str();
    res.passed = worst <= 1e-12;
    return res;
}

CheckResult check_simplexes() {
    CheckResult res{"routing and attention simplexes", true, ""};
    TinyModel model(23);
    auto sys = model.raw();
    Tape tape;
    JointForward jf = total_loss(tape, sys, model.inputs, model.labels);
    double worst = 0.0;
    for (const ForwardResult& fr : jf.per_stream) {
        const Matrix& routing = tape.value(fr.routing);
        for (int r = 0; r < routing.rows; ++r) {
            double sum = 0.0;
            for (int c = 0; c < routing.cols; ++c) {
                sum += routing.at(r, c);
                if (routing.at(r, c) < 0.0) worst = std::max(worst, -routing.at(r, c));
            }
            worst = std::max(worst, std::abs(sum - 1.0));
        }
    }
    std::ostringstream d;
    d << "max simplex violation " << worst;
    res.detail = d.str();
    res.passed = worst < 1e-12;
    return res;
}

CheckResult check_add_gate() {
    CheckResult res{"tuner conjunctive add gate", true, ""};
    for (int drift = 0; drift < 2; ++drift) {
        for (int degraded = 0; degraded < 2; ++degraded) {
            TunerState tuner;
            for (int i = 0; i < tuner.lookback; ++i) tuner.push_accuracy(0.9);
            const double acc = degraded ? 0.5 : 0.9;
            ExpertUtilization utils[] = {{0, 0.5, 10}};
            const AdaptAction action = decide(tuner, drift != 0, acc, utils);
            const bool expect_add = drift && degraded;
            if ((action.kind == ActionKind::AddPrivate) != expect_add) {
                res.passed = false;
                res.detail = "gate failed at drift=" + std::to_string(drift) +
                             " degraded=" + std::to_string(degraded);
                return res;
            }
        }
    }
    res.detail = "all 4 cases";
    return res;
}

}  // namespace

std::vector<CheckResult> run_self_checks() {
    return {check_gradients(), check_mmd(), check_simplexes(), check_add_gate()};
}

}  // namespace camel
