#pragma once

#include <memory>
#include <string>
#include <vector>

#include "camel/matrix.hpp"

namespace camel {

enum class GeneratorKind { Sea, Hyperplane, RandomTree, Rbf, Led, Waveform, CsvFile };

struct DriftEvent {
    enum class Kind { Sudden, Gradual };
    Kind kind = Kind::Sudden;
    int window = 0;
};

struct GeneratorSpec {
    std::string name;
    GeneratorKind kind = GeneratorKind::Sea;
    int features = 0;  // 0 -> the kind's classic default
    int classes = 0;   // 0 -> the kind's classic default
    double noise = 0.0;
    long samples = -1;  // -1 = unbounded
    std::vector<DriftEvent> drifts;
    bool incremental = false;  // continuous parameter drift (hyperplane, rbf)

    // sea: threshold on f0 + f1, cycled by sudden events
    std::vector<double> sea_thetas = {8.0, 9.0, 7.0, 9.5};
    // hyperplane
    double hyp_magnitude = 0.001;
    double hyp_flip_prob = 0.1;
    // random tree
    int tree_depth = 5;
    int gradual_span = 1000;  // instances to blend between concepts
    // rbf
    int rbf_centroids = 15;
    double rbf_speed = 1e-4;
    // csv
    std::string csv_path;
    bool csv_header = false;
    bool csv_standardize = false;
};

// Fills in features/classes defaults and validates the spec.
GeneratorSpec finalize_spec(GeneratorSpec spec);

// A window source. Every implementation is a deterministic function of
// (seed, t): regenerating a window yields bit-identical data regardless of
// the order windows were requested in.
class StreamGenerator {
public:
    virtual ~StreamGenerator() = default;

    // Returns false once the stream cannot fill a further window.
    virtual bool window(int t, int rows, Matrix& x, std::vector<int>& y) = 0;

    int features() const { return spec_.features; }
    int classes() const { return spec_.classes; }
    const GeneratorSpec& spec() const { return spec_; }

protected:
    explicit StreamGenerator(GeneratorSpec spec) : spec_(std::move(spec)) {}
    GeneratorSpec spec_;
};

std::unique_ptr<StreamGenerator> make_generator(const GeneratorSpec& spec, uint64_t run_seed,
                                                int stream_index);

uint64_t mix64(uint64_t seed, uint64_t salt);

}  // namespace camel
