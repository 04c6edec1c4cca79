#include "camel/streamgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace camel {

uint64_t mix64(uint64_t seed, uint64_t salt) {
    uint64_t z = seed ^ (salt + 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

constexpr uint64_t kWindowSalt = 0x77494eULL;
constexpr uint64_t kConceptSalt = 0xc04ceULL;

int flip_label(int label, int classes, std::mt19937_64& rng) {
    if (classes == 2) return 1 - label;
    int other = static_cast<int>(rng() % (classes - 1));
    return other >= label ? other + 1 : other;
}

// Number of completed concept switches at instance m, plus a gradual-phase
// blend decided per instance. Events are interpreted in window units.
struct ConceptTimeline {
    struct Phase {
        long start = 0;  // instance index
        DriftEvent::Kind kind = DriftEvent::Kind::Sudden;
    };
    std::vector<Phase> phases;
    long span = 1000;

    ConceptTimeline(const std::vector<DriftEvent>& events, int window_rows, long gradual_span)
        : span(gradual_span) {
        for (const DriftEvent& e : events)
            phases.push_back({static_cast<long>(e.window) * window_rows, e.kind});
        std::sort(phases.begin(), phases.end(),
                  [](const Phase& a, const Phase& b) { return a.start < b.start; });
    }

    int concept_at(long m, std::mt19937_64& rng) const {
        int concept_idx = 0;
        for (const Phase& p : phases) {
            if (m < p.start) break;
            if (p.kind == DriftEvent::Kind::Sudden) {
                ++concept_idx;
            } else if (m >= p.start + span) {
                ++concept_idx;
            } else {
                const double frac = static_cast<double>(m - p.start) / static_cast<double>(span);
                std::uniform_real_distribution<double> u(0.0, 1.0);
                if (u(rng) < frac) ++concept_idx;
                break;
            }
        }
        return concept_idx;
    }

    // concept index ignoring any in-progress gradual blend
    int settled_concept_at(long m) const {
        int concept_idx = 0;
        for (const Phase& p : phases) {
            if (m < p.start) break;
            if (p.kind == DriftEvent::Kind::Sudden || m >= p.start + span) ++concept_idx;
        }
        return concept_idx;
    }
};

class SeaGenerator : public StreamGenerator {
public:
    SeaGenerator(GeneratorSpec spec, uint64_t base) : StreamGenerator(std::move(spec)), base_(base) {}

    bool window(int t, int rows, Matrix& x, std::vector<int>& y) override {
        if (spec_.samples >= 0 && static_cast<long>(t + 1) * rows > spec_.samples) return false;
        std::mt19937_64 rng(mix64(base_, mix64(kWindowSalt, static_cast<uint64_t>(t))));
        std::uniform_real_distribution<double> u(0.0, 10.0);
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        ConceptTimeline timeline(spec_.drifts, rows, spec_.gradual_span);
        x = Matrix(rows, spec_.features);
        y.assign(rows, 0);
        for (int r = 0; r < rows; ++r) {
            const long m = static_cast<long>(t) * rows + r;
            for (int c = 0; c < spec_.features; ++c) x.at(r, c) = u(rng);
            const int concept_idx = timeline.concept_at(m, rng);
            const double theta = spec_.sea_thetas[concept_idx % spec_.sea_thetas.size()];
            int label = (x.at(r, 0) + x.at(r, 1) <= theta) ? 1 : 0;
            if (spec_.noise > 0.0 && coin(rng) < spec_.noise) label = flip_label(label, 2, rng);
            y[r] = label;
        }
        return true;
    }

private:
    uint64_t base_;
};

class LedGenerator : public StreamGenerator {
public:
    LedGenerator(GeneratorSpec spec, uint64_t base) : StreamGenerator(std::move(spec)), base_(base) {}

    static constexpr int kSegments[10][7] = {
        {1, 1, 1, 1, 1, 1, 0}, {0, 1, 1, 0, 0, 0, 0}, {1, 1, 0, 1, 1, 0, 1},
        {1, 1, 1, 1, 0, 0, 1}, {0, 1, 1, 0, 0, 1, 1}, {1, 0, 1, 1, 0, 1, 1},
        {1, 0, 1, 1, 1, 1, 1}, {1, 1, 1, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 1, 1},
        {1, 1, 1, 1, 0, 1, 1}};

    bool window(int t, int rows, Matrix& x, std::vector<int>& y) override {
        if (spec_.samples >= 0 && static_cast<long>(t + 1) * rows > spec_.samples) return false;
        std::mt19937_64 rng(mix64(base_, mix64(kWindowSalt, static_cast<uint64_t>(t))));
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        ConceptTimeline timeline(spec_.drifts, rows, spec_.gradual_span);
        x = Matrix(rows, spec_.features);
        y.assign(rows, 0);
        std::vector<double> feat(spec_.features);
        for (int r = 0; r < rows; ++r) {
            const long m = static_cast<long>(t) * rows + r;
            const int digit = static_cast<int>(rng() % 10);
            for (int c = 0; c < 7; ++c) {
                double bit = kSegments[digit][c];
                if (spec_.noise > 0.0 && coin(rng) < spec_.noise) bit = 1.0 - bit;
                feat[c] = bit;
            }
            for (int c = 7; c < spec_.features; ++c) feat[c] = static_cast<double>(rng() % 2);
            const auto& perm = permutation(timeline.concept_at(m, rng));
            for (int c = 0; c < spec_.features; ++c) x.at(r, perm[c]) = feat[c];
            y[r] = digit;
        }
        return true;
    }

private:
    uint64_t base_;
    std::vector<std::vector<int>> perms_;

    // Concept k relocates the informative segments: a seeded shuffle of the
    // attribute positions. Concept 0 is the identity layout.
    const std::vector<int>& permutation(int concept_idx) {
        while (static_cast<int>(perms_.size()) <= concept_idx) {
            const int k = static_cast<int>(perms_.size());
            std::vector<int> p(spec_.features);
            for (int i = 0; i < spec_.features; ++i) p[i] = i;
            if (k > 0) {
                std::mt19937_64 rng(mix64(base_, mix64(kConceptSalt, static_cast<uint64_t>(k))));
                std::shuffle(p.begin(), p.end(), rng);
            }
            perms_.push_back(std::move(p));
        }
        return perms_[concept_idx];
    }
};

class WaveformGenerator : public StreamGenerator {
public:
    WaveformGenerator(GeneratorSpec spec, uint64_t base)
        : StreamGenerator(std::move(spec)), base_(base) {}

    bool window(int t, int rows, Matrix& x, std::vector<int>& y) override {
        if (spec_.samples >= 0 && static_cast<long>(t + 1) * rows > spec_.samples) return false;
        std::mt19937_64 rng(mix64(base_, mix64(kWindowSalt, static_cast<uint64_t>(t))));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);
        static constexpr int centers[3] = {6, 14, 10};
        static constexpr int pair_a[3] = {0, 0, 1};
        static constexpr int pair_b[3] = {1, 2, 2};
        x = Matrix(rows, spec_.features);
        y.assign(rows, 0);
        for (int r = 0; r < rows; ++r) {
            const int cls = static_cast<int>(rng() % 3);
            const double mix = u(rng);
            for (int c = 0; c < spec_.features; ++c) {
                double v = gauss(rng);
                if (c < 21) {
                    const double wa = std::max(0.0, 6.0 - std::abs(c - centers[pair_a[cls]]));
                    const double wb = std::max(0.0, 6.0 - std::abs(c - centers[pair_b[cls]]));
                    v += mix * wa + (1.0 - mix) * wb;
                }
                x.at(r, c) = v;
            }
            int label = cls;
            if (spec_.noise > 0.0 && u(rng) < spec_.noise) label = flip_label(label, 3, rng);
            y[r] = label;
        }
        return true;
    }

private:
    uint64_t base_;
};

class RandomTreeGenerator : public StreamGenerator {
public:
    RandomTreeGenerator(GeneratorSpec spec, uint64_t base)
        : StreamGenerator(std::move(spec)), base_(base) {}

    bool window(int t, int rows, Matrix& x, std::vector<int>& y) override {
        if (spec_.samples >= 0 && static_cast<long>(t + 1) * rows > spec_.samples) return false;
        std::mt19937_64 rng(mix64(base_, mix64(kWindowSalt, static_cast<uint64_t>(t))));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        ConceptTimeline timeline(spec_.drifts, rows, spec_.gradual_span);
        x = Matrix(rows, spec_.features);
        y.assign(rows, 0);
        for (int r = 0; r < rows; ++r) {
            const long m = static_cast<long>(t) * rows + r;
            for (int c = 0; c < spec_.features; ++c) x.at(r, c) = u(rng);
            const Tree& tree = concept_tree(timeline.concept_at(m, rng));
            int label = tree.classify(x.row(r));
            if (spec_.noise > 0.0 && u(rng) < spec_.noise)
                label = flip_label(label, spec_.classes, rng);
            y[r] = label;
        }
        return true;
    }

private:
    struct Tree {
        struct Node {
            int feature = -1;
            double threshold = 0.0;
            int left = -1, right = -1;
            int label = 0;
        };
        std::vector<Node> nodes;

        int classify(const double* row) const {
            int i = 0;
            while (nodes[i].feature >= 0)
                i = row[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
            return nodes[i].label;
        }
    };

    uint64_t base_;
    std::vector<Tree> trees_;

    int build_node(Tree& tree, std::mt19937_64& rng, int depth, std::vector<double>& lo,
                   std::vector<double>& hi) {
        Tree::Node node;
        const int idx = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(node);
        if (depth >= spec_.tree_depth) {
            tree.nodes[idx].label = static_cast<int>(rng() % spec_.classes);
            return idx;
        }
        const int f = static_cast<int>(rng() % spec_.features);
        std::uniform_real_distribution<double> u(lo[f], hi[f]);
        const double threshold = u(rng);
        tree.nodes[idx].feature = f;
        tree.nodes[idx].threshold = threshold;
        const double saved_hi = hi[f];
        hi[f] = threshold;
        tree.nodes[idx].left = build_node(tree, rng, depth + 1, lo, hi);
        hi[f] = saved_hi;
        const double saved_lo = lo[f];
        lo[f] = threshold;
        tree.nodes[idx].right = build_node(tree, rng, depth + 1, lo, hi);
        lo[f] = saved_lo;
        return idx;
    }

    const Tree& concept_tree(int concept_idx) {
        while (static_cast<int>(trees_.size()) <= concept_idx) {
            const int k = static_cast<int>(trees_.size());
            std::mt19937_64 rng(mix64(base_, mix64(kConceptSalt, static_cast<uint64_t>(k))));
            Tree tree;
            std::vector<double> lo(spec_.features, 0.0), hi(spec_.features, 1.0);
            build_node(tree, rng, 0, lo, hi);
            // guard against a single-class tree
            int first = -1;
            bool varied = false;
            for (const auto& n : tree.nodes) {
                if (n.feature >= 0) continue;
                if (first < 0) first = n.label;
                else if (n.label != first) varied = true;
            }
            if (!varied)
                for (auto& n : tree.nodes)
                    if (n.feature < 0) {
                        n.label = (first + 1) % spec_.classes;
                        break;
                    }
            trees_.push_back(std::move(tree));
        }
        return trees_[concept_idx];
    }
};

class RbfGenerator : public StreamGenerator {
public:
    RbfGenerator(GeneratorSpec spec, uint64_t base) : StreamGenerator(std::move(spec)), base_(base) {
        std::mt19937_64 rng(mix64(base_, 0x4bfULL));
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::uniform_real_distribution<double> us(0.05, 0.15);
        std::normal_distribution<double> gauss(0.0, 1.0);
        const int k = spec_.rbf_centroids;
        centers_.assign(k, std::vector<double>(spec_.features));
        dirs_.assign(k, std::vector<double>(spec_.features));
        sigmas_.resize(k);
        labels_.resize(k);
        cum_weights_.resize(k);
        double total = 0.0;
        for (int i = 0; i < k; ++i) {
            for (double& v : centers_[i]) v = u01(rng);
            double norm = 0.0;
            for (double& v : dirs_[i]) {
                v = gauss(rng);
                norm += v * v;
            }
            norm = std::sqrt(norm);
            for (double& v : dirs_[i]) v /= norm;
            sigmas_[i] = us(rng);
            labels_[i] = i < spec_.classes ? i : static_cast<int>(rng() % spec_.classes);
            total += u01(rng) + 0.1;
            cum_weights_[i] = total;
        }
        for (double& w : cum_weights_) w /= total;
    }

    bool window(int t, int rows, Matrix& x, std::vector<int>& y) override {
        if (spec_.samples >= 0 && static_cast<long>(t + 1) * rows > spec_.samples) return false;
        std::mt19937_64 rng(mix64(base_, mix64(kWindowSalt, static_cast<uint64_t>(t))));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);
        const double speed = spec_.incremental ? spec_.rbf_speed : 0.0;
        x = Matrix(rows, spec_.features);
        y.assign(rows, 0);
        for (int r = 0; r < rows; ++r) {
            const long m = static_cast<long>(t) * rows + r;
            const double pick = u(rng);
            int c = 0;
            while (c + 1 < spec_.rbf_centroids && pick > cum_weights_[c]) ++c;
            for (int d = 0; d < spec_.features; ++d) {
                const double center = centers_[c][d] + speed * static_cast<double>(m) * dirs_[c][d];
                x.at(r, d) = center + sigmas_[c] * gauss(rng);
            }
            int label = labels_[c];
            if (spec_.noise > 0.0 && u(rng) < spec_.noise)
                label = flip_label(label, spec_.classes, rng);
            y[r] = label;
        }
        return true;
    }

private:
    uint64_t base_;
    std::vector<std::vector<double>> centers_, dirs_;
    std::vector<double> sigmas_, cum_weights_;
    std::vector<int> labels_;
};

class HyperplaneGenerator : public StreamGenerator {
public:
    HyperplaneGenerator(GeneratorSpec spec, uint64_t base)
        : StreamGenerator(std::move(spec)), base_(base) {
        reset_state();
    }

    bool window(int t, int rows, Matrix& x, std::vector<int>& y) override {
        if (spec_.samples >= 0 && static_cast<long>(t + 1) * rows > spec_.samples) return false;
        const long target = static_cast<long>(t) * rows;
        if (target < pos_) reset_state();
        advance_to(target);
        std::mt19937_64 rng(mix64(base_, mix64(kWindowSalt, static_cast<uint64_t>(t))));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        x = Matrix(rows, spec_.features);
        y.assign(rows, 0);
        for (int r = 0; r < rows; ++r) {
            double dot = 0.0, wsum = 0.0;
            for (int c = 0; c < spec_.features; ++c) {
                x.at(r, c) = u(rng);
                dot += weights_[c] * x.at(r, c);
                wsum += weights_[c];
            }
            int label = dot >= 0.5 * wsum ? 1 : 0;
            if (spec_.noise > 0.0 && u(rng) < spec_.noise) label = flip_label(label, 2, rng);
            y[r] = label;
            advance_to(pos_ + 1);
        }
        return true;
    }

private:
    uint64_t base_;
    std::vector<double> weights_;
    std::vector<int> dirs_;
    std::mt19937_64 drift_rng_;
    long pos_ = 0;

    void reset_state() {
        std::mt19937_64 rng(mix64(base_, 0x417ULL));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        weights_.resize(spec_.features);
        for (double& w : weights_) w = u(rng);
        dirs_.assign(spec_.features, 1);
        drift_rng_.seed(mix64(base_, 0xd21f7ULL));
        pos_ = 0;
    }

    void advance_to(long target) {
        if (!spec_.incremental) {
            pos_ = target;
            return;
        }
        std::uniform_real_distribution<double> u(0.0, 1.0);
        while (pos_ < target) {
            for (int c = 0; c < spec_.features; ++c) {
                weights_[c] += dirs_[c] * spec_.hyp_magnitude;
                if (u(drift_rng_) < spec_.hyp_flip_prob) dirs_[c] = -dirs_[c];
            }
            ++pos_;
        }
    }
};

class CsvGenerator : public StreamGenerator {
public:
    CsvGenerator(GeneratorSpec spec) : StreamGenerator(std::move(spec)) { load(); }

    bool window(int t, int rows, Matrix& x, std::vector<int>& y) override {
        const long first = static_cast<long>(t) * rows;
        if (first + rows > static_cast<long>(labels_.size())) return false;
        x = Matrix(rows, spec_.features);
        y.assign(rows, 0);
        for (int r = 0; r < rows; ++r) {
            const long src = first + r;
            for (int c = 0; c < spec_.features; ++c)
                x.at(r, c) = values_[src * spec_.features + c];
            y[r] = labels_[src];
        }
        return true;
    }

private:
    std::vector<double> values_;
    std::vector<int> labels_;

    [[noreturn]] void fail(long line, const std::string& what) {
        throw std::runtime_error(spec_.csv_path + ":" + std::to_string(line) + ": " + what);
    }

    void load() {
        std::ifstream in(spec_.csv_path);
        if (!in) throw std::runtime_error("cannot open csv file: " + spec_.csv_path);
        std::string line;
        long line_no = 0;
        std::vector<double> mean(spec_.features, 0.0), m2(spec_.features, 0.0);
        long seen = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line_no == 1 && spec_.csv_header) continue;
            if (line.empty()) continue;
            std::vector<double> cells;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) {
                const char* begin = cell.c_str();
                char* end = nullptr;
                const double v = std::strtod(begin, &end);
                while (end && *end == ' ') ++end;
                if (end == begin || (end && *end != '\0'))
                    fail(line_no, "non-numeric cell '" + cell + "'");
                cells.push_back(v);
            }
            if (static_cast<int>(cells.size()) != spec_.features + 1)
                fail(line_no, "expected " + std::to_string(spec_.features + 1) + " columns, got " +
                                  std::to_string(cells.size()));
            const double raw_label = cells.back();
            const int label = static_cast<int>(raw_label);
            if (raw_label != label || label < 0 || label >= spec_.classes)
                fail(line_no, "label " + std::to_string(raw_label) + " outside [0, " +
                                  std::to_string(spec_.classes) + ")");
            cells.pop_back();
            if (spec_.csv_standardize) {
                ++seen;
                for (int c = 0; c < spec_.features; ++c) {
                    const double delta = cells[c] - mean[c];
                    mean[c] += delta / seen;
                    m2[c] += delta * (cells[c] - mean[c]);
                    const double var = m2[c] / seen;
                    cells[c] = (cells[c] - mean[c]) / std::sqrt(var + 1e-8);
                }
            }
            values_.insert(values_.end(), cells.begin(), cells.end());
            labels_.push_back(label);
        }
    }
};

int default_features(GeneratorKind kind) {
    switch (kind) {
        case GeneratorKind::Sea: return 3;
        case GeneratorKind::Hyperplane: return 4;
        case GeneratorKind::RandomTree: return 10;
        case GeneratorKind::Rbf: return 10;
        case GeneratorKind::Led: return 7;
        case GeneratorKind::Waveform: return 21;
        case GeneratorKind::CsvFile: return 0;
    }
    return 0;
}

int default_classes(GeneratorKind kind) {
    switch (kind) {
        case GeneratorKind::Sea: return 2;
        case GeneratorKind::Hyperplane: return 2;
        case GeneratorKind::RandomTree: return 2;
        case GeneratorKind::Rbf: return 2;
        case GeneratorKind::Led: return 10;
        case GeneratorKind::Waveform: return 3;
        case GeneratorKind::CsvFile: return 0;
    }
    return 0;
}

}  // namespace

GeneratorSpec finalize_spec(GeneratorSpec spec) {
    if (spec.features == 0) spec.features = default_features(spec.kind);
    if (spec.classes == 0) spec.classes = default_classes(spec.kind);
    if (spec.kind == GeneratorKind::CsvFile) {
        if (spec.csv_path.empty()) throw std::invalid_argument("csv stream needs a path");
        if (spec.features < 1 || spec.classes < 2)
            throw std::invalid_argument("csv stream needs explicit features and classes");
    }
    if (spec.features < 1) throw std::invalid_argument("stream needs at least one feature");
    if (spec.kind == GeneratorKind::Led && spec.features < 7)
        throw std::invalid_argument("led stream needs at least the 7 segment features");
    if (spec.kind == GeneratorKind::Waveform && spec.features < 21)
        throw std::invalid_argument("waveform stream needs at least 21 features");
    if (spec.classes < 2) throw std::invalid_argument("stream needs at least two classes");
    if (spec.noise < 0.0 || spec.noise > 1.0)
        throw std::invalid_argument("noise rate must lie in [0, 1]");
    return spec;
}

std::unique_ptr<StreamGenerator> make_generator(const GeneratorSpec& raw, uint64_t run_seed,
                                                int stream_index) {
    GeneratorSpec spec = finalize_spec(raw);
    const uint64_t base = mix64(run_seed, 0x57ULL + static_cast<uint64_t>(stream_index));
    switch (spec.kind) {
        case GeneratorKind::Sea: return std::make_unique<SeaGenerator>(std::move(spec), base);
        case GeneratorKind::Hyperplane:
            return std::make_unique<HyperplaneGenerator>(std::move(spec), base);
        case GeneratorKind::RandomTree:
            return std::make_unique<RandomTreeGenerator>(std::move(spec), base);
        case GeneratorKind::Rbf: return std::make_unique<RbfGenerator>(std::move(spec), base);
        case GeneratorKind::Led: return std::make_unique<LedGenerator>(std::move(spec), base);
        case GeneratorKind::Waveform:
            return std::make_unique<WaveformGenerator>(std::move(spec), base);
        case GeneratorKind::CsvFile: return std::make_unique<CsvGenerator>(std::move(spec));
    }
    throw std::invalid_argument("unknown generator kind");
}

}  // namespace camel
