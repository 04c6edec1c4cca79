#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "camel/aet.hpp"
#include "camel/config.hpp"
#include "camel/drift.hpp"
#include "camel/moe.hpp"
#include "camel/streamgen.hpp"

namespace camel {

struct StreamWindowMetrics {
    int stream = 0;
    std::string name;
    double accuracy = 0.0;
    double loss = 0.0;
    int experts = 0;  // pool size after this window's adaptation
    bool drift = false;
    double mmd = 0.0;
    std::string action = "none";  // none | add_private | prune_private
    int action_expert = -1;
    std::vector<double> routing_means;  // slot 0 = assistance expert
};

struct WindowMetrics {
    int t = 0;
    std::vector<StreamWindowMetrics> streams;
};

struct RunSummary {
    std::vector<std::string> stream_names;
    std::vector<double> per_stream_accuracy;  // prequential mean over t >= 1
    double mean_accuracy = 0.0;
    int windows_evaluated = 0;
    int adds = 0;
    int prunes = 0;
    double wall_clock_sec = 0.0;
};

double evaluate_accuracy(const Matrix& logits, const std::vector<int>& labels);
RunSummary summarize(const std::vector<WindowMetrics>& metrics);

// Drives the window-based prequential loop: evaluate the carried-over model
// on the incoming window, diagnose drift and decide on structural changes,
// then adapt and train. One window per step() call.
class Runner {
public:
    explicit Runner(RunConfig config);

    // Builds and trains the initial model on window 0 and seeds the drift
    // detectors. Returns false when window 0 cannot be filled.
    bool initialize();
    // Processes the next window; false once data ran out or max_windows done.
    bool step();
    void run_all();

    const RunConfig& config() const { return config_; }
    const std::vector<WindowMetrics>& metrics() const { return metrics_; }
    RunSummary summary() const;

    std::vector<std::unique_ptr<StreamSystem>>& systems() { return systems_; }
    const std::vector<std::unique_ptr<StreamSystem>>& systems() const { return systems_; }
    std::vector<MmdDetector>& detectors() { return detectors_; }
    std::vector<TunerState>& tuners() { return tuners_; }
    Adam& optimizer() { return adam_; }
    int next_window() const { return next_window_; }
    void set_next_window(int t) { next_window_ = t; }

    bool fetch_window(int t, std::vector<Matrix>& inputs,
                      std::vector<std::vector<int>>& labels);

private:
    RunConfig config_;
    ForwardOptions fwd_opts_;
    bool aet_enabled_ = false;
    std::vector<std::unique_ptr<StreamGenerator>> generators_;
    std::vector<std::unique_ptr<StreamSystem>> systems_;
    std::vector<MmdDetector> detectors_;
    std::vector<TunerState> tuners_;
    Adam adam_;
    std::vector<WindowMetrics> metrics_;
    int next_window_ = 0;
    bool exhausted_ = false;
    bool initialized_ = false;
    double wall_clock_ = 0.0;

    void build_systems(uint64_t salt);
    std::vector<Parameter*> all_parameters();
    // Full-batch joint training; returns the final epoch's per-stream mean
    // routing weights.
    std::vector<std::vector<double>> train_epochs(const std::vector<Matrix>& inputs,
                                                  const std::vector<std::vector<int>>& labels,
                                                  int epochs);
};

struct RunResult {
    RunSummary summary;
    std::vector<WindowMetrics> metrics;
};

RunResult run(const RunConfig& config);

void write_metrics_jsonl(const std::vector<WindowMetrics>& metrics, const std::string& path);
void write_summary_json(const RunSummary& summary, const std::string& path);
// metrics.jsonl + summary.json + config.txt under `dir`
void write_run_artifacts(const RunConfig& config, const RunResult& result, const std::string& dir);

}  // namespace camel
