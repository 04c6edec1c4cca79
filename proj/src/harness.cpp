#include "camel/harness.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "camel/log.hpp"

namespace camel {

using ordered_json = nlohmann::ordered_json;

double evaluate_accuracy(const Matrix& logits, const std::vector<int>& labels) {
    if (logits.rows == 0) return 0.0;
    int correct = 0;
    for (int r = 0; r < logits.rows; ++r) {
        const double* row = logits.row(r);
        int best = 0;
        for (int c = 1; c < logits.cols; ++c)
            if (row[c] > row[best]) best = c;  // ties resolve to the lowest index
        if (best == labels[r]) ++correct;
    }
    return static_cast<double>(correct) / logits.rows;
}

RunSummary summarize(const std::vector<WindowMetrics>& metrics) {
    RunSummary s;
    if (metrics.empty()) return s;
    const size_t n = metrics.front().streams.size();
    s.stream_names.resize(n);
    s.per_stream_accuracy.assign(n, 0.0);
    for (size_t i = 0; i < n; ++i) s.stream_names[i] = metrics.front().streams[i].name;
    for (const WindowMetrics& w : metrics) {
        for (size_t i = 0; i < n; ++i) {
            s.per_stream_accuracy[i] += w.streams[i].accuracy;
            if (w.streams[i].action == "add_private") ++s.adds;
            if (w.streams[i].action == "prune_private") ++s.prunes;
        }
    }
    s.windows_evaluated = static_cast<int>(metrics.size());
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        s.per_stream_accuracy[i] /= metrics.size();
        total += s.per_stream_accuracy[i];
    }
    s.mean_accuracy = total / n;
    return s;
}

Runner::Runner(RunConfig config) : config_(std::move(config)), adam_(config_.lr) {
    config_.validate();
    fwd_opts_.use_assistance = config_.ablation == Ablation::Full;
    aet_enabled_ = config_.ablation == Ablation::Full || config_.ablation == Ablation::BaseIDp;
    for (size_t i = 0; i < config_.streams.size(); ++i)
        generators_.push_back(make_generator(config_.streams[i], config_.seed, static_cast<int>(i)));
    build_systems(0);
    for (size_t i = 0; i < config_.streams.size(); ++i) {
        detectors_.emplace_back(config_.mmd_sigma, config_.mmd_threshold,
                                config_.effective_ref_size());
        TunerState tuner;
        tuner.lookback = config_.lookback;
        tuner.drop_factor = config_.drop_factor;
        tuner.tau_util = config_.util_threshold;
        tuner.cooldown_length = config_.cooldown;
        tuner.grace_windows = config_.cooldown;
        tuners_.push_back(std::move(tuner));
    }
}

void Runner::build_systems(uint64_t salt) {
    systems_.clear();
    for (size_t i = 0; i < config_.streams.size(); ++i) {
        const GeneratorSpec spec = finalize_spec(config_.streams[i]);
        StreamSpec ss{static_cast<int>(i), spec.features, spec.classes};
        ModelDims dims{config_.latent_dim, config_.expert_dim, config_.heads, config_.hidden_dim};
        systems_.push_back(std::make_unique<StreamSystem>(
            ss, dims, mix64(config_.seed, 0x5705ULL + salt * 0x10001ULL + i)));
    }
}

std::vector<Parameter*> Runner::all_parameters() {
    std::vector<Parameter*> params;
    for (auto& sys : systems_) {
        auto p = sys->parameters();
        params.insert(params.end(), p.begin(), p.end());
    }
    return params;
}

bool Runner::fetch_window(int t, std::vector<Matrix>& inputs,
                          std::vector<std::vector<int>>& labels) {
    inputs.assign(generators_.size(), Matrix());
    labels.assign(generators_.size(), {});
    for (size_t i = 0; i < generators_.size(); ++i)
        if (!generators_[i]->window(t, config_.window_size, inputs[i], labels[i])) return false;
    return true;
}

std::vector<std::vector<double>> Runner::train_epochs(const std::vector<Matrix>& inputs,
                                                      const std::vector<std::vector<int>>& labels,
                                                      int epochs) {
    std::vector<StreamSystem*> sys;
    for (auto& s : systems_) sys.push_back(s.get());
    const auto params = all_parameters();
    std::vector<std::vector<double>> routing_means(systems_.size());
    Tape tape;
    for (int e = 0; e < epochs; ++e) {
        tape.reset();
        JointForward jf = total_loss(tape, sys, inputs, labels, fwd_opts_);
        tape.backward(jf.loss);
        adam_.step(params);
        if (e + 1 == epochs) {
            for (size_t i = 0; i < systems_.size(); ++i) {
                const Matrix& routing = tape.value(jf.per_stream[i].routing);
                std::vector<double> means(routing.cols, 0.0);
                for (int r = 0; r < routing.rows; ++r)
                    for (int c = 0; c < routing.cols; ++c) means[c] += routing.at(r, c);
                for (double& m : means) m /= std::max(routing.rows, 1);
                routing_means[i] = std::move(means);
            }
        }
    }
    return routing_means;
}

bool Runner::initialize() {
    if (initialized_) throw std::logic_error("runner already initialized");
    const auto start = std::chrono::steady_clock::now();
    std::vector<Matrix> inputs;
    std::vector<std::vector<int>> labels;
    if (!fetch_window(0, inputs, labels)) {
        exhausted_ = true;
        initialized_ = true;
        next_window_ = 1;
        return false;
    }
    train_epochs(inputs, labels, config_.init_epochs);
    // Seed each detector's reference from the freshly trained model's view of
    // window 0, so window 1 can already be tested for drift.
    Tape tape;
    for (size_t i = 0; i < systems_.size(); ++i) {
        Var h = systems_[i]->align(tape, tape.leaf(inputs[i]));
        detectors_[i].detect_and_update(tape.value(h));
    }
    initialized_ = true;
    next_window_ = 1;
    wall_clock_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    LOG_DEBUG("initial training done (%d epochs on window 0)", config_.init_epochs);
    return true;
}

bool Runner::step() {
    if (!initialized_) throw std::logic_error("step() before initialize()");
    if (exhausted_ || next_window_ > config_.max_windows) return false;
    const int t = next_window_;
    const auto start = std::chrono::steady_clock::now();

    std::vector<Matrix> inputs;
    std::vector<std::vector<int>> labels;
    if (!fetch_window(t, inputs, labels)) {
        exhausted_ = true;
        return false;
    }

    const size_t n = systems_.size();
    WindowMetrics wm;
    wm.t = t;
    wm.streams.resize(n);

    // Phase 1: test the carried-over model on the new window.
    std::vector<Matrix> aligned(n);
    {
        Tape tape;
        std::vector<StreamSystem*> sys;
        for (auto& s : systems_) sys.push_back(s.get());
        JointForward jf = total_loss(tape, sys, inputs, labels, fwd_opts_);
        for (size_t i = 0; i < n; ++i) {
            wm.streams[i].stream = static_cast<int>(i);
            wm.streams[i].name = config_.streams[i].name.empty()
                                     ? "stream" + std::to_string(i)
                                     : config_.streams[i].name;
            wm.streams[i].accuracy =
                evaluate_accuracy(tape.value(jf.per_stream[i].logits), labels[i]);
            wm.streams[i].loss = tape.value(jf.stream_loss[i]).data[0];
            aligned[i] = tape.value(jf.aligned[i]);
        }
    }

    // Phase 2: diagnose each stream and decide on structural changes.
    std::vector<AdaptAction> actions(n);
    for (size_t i = 0; i < n; ++i) {
        const bool drift = detectors_[i].detect_and_update(aligned[i]);
        wm.streams[i].drift = drift;
        wm.streams[i].mmd = detectors_[i].last_mmd2();
        if (aet_enabled_) {
            std::vector<ExpertUtilization> utils;
            for (const auto& pe : systems_[i]->pool())
                utils.push_back({pe->id, pe->utilization, t - pe->birth_window});
            actions[i] = decide(tuners_[i], drift, wm.streams[i].accuracy, utils);
        }
    }

    // Phase 3: adapt the architecture, then train on the window.
    if (config_.ablation == Ablation::Base) {
        build_systems(static_cast<uint64_t>(t));
        adam_.clear();
    } else {
        for (size_t i = 0; i < n; ++i) {
            switch (actions[i].kind) {
                case ActionKind::AddPrivate: {
                    const int id = systems_[i]->add_private_expert(t);
                    wm.streams[i].action = "add_private";
                    wm.streams[i].action_expert = id;
                    LOG_INFO("window %d stream %zu: added private expert %d", t, i, id);
                    break;
                }
                case ActionKind::PrunePrivate: {
                    for (Parameter* p : systems_[i]->expert_parameters(actions[i].expert_id))
                        adam_.forget(p);
                    systems_[i]->prune_private_expert(actions[i].expert_id);
                    wm.streams[i].action = "prune_private";
                    wm.streams[i].action_expert = actions[i].expert_id;
                    LOG_INFO("window %d stream %zu: pruned private expert %d", t, i,
                             actions[i].expert_id);
                    break;
                }
                case ActionKind::None: break;
            }
        }
    }

    const auto routing_means = train_epochs(inputs, labels, config_.window_epochs);
    for (size_t i = 0; i < n; ++i) {
        update_utilization(systems_[i]->pool(), routing_means[i]);
        wm.streams[i].routing_means = routing_means[i];
        wm.streams[i].experts = systems_[i]->pool_size();
    }

    metrics_.push_back(std::move(wm));
    ++next_window_;
    wall_clock_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return true;
}

void Runner::run_all() {
    if (!initialized_) initialize();
    while (step()) {
    }
}

RunSummary Runner::summary() const {
    RunSummary s = summarize(metrics_);
    if (s.stream_names.empty()) {
        for (size_t i = 0; i < config_.streams.size(); ++i)
            s.stream_names.push_back(config_.streams[i].name.empty()
                                         ? "stream" + std::to_string(i)
                                         : config_.streams[i].name);
        s.per_stream_accuracy.assign(config_.streams.size(), 0.0);
    }
    s.wall_clock_sec = wall_clock_;
    return s;
}

RunResult run(const RunConfig& config) {
    Runner runner(config);
    runner.run_all();
    return {runner.summary(), runner.metrics()};
}

namespace {

ordered_json stream_record(const StreamWindowMetrics& s) {
    ordered_json j;
    j["stream"] = s.stream;
    j["name"] = s.name;
    j["accuracy"] = s.accuracy;
    j["loss"] = s.loss;
    j["experts"] = s.experts;
    j["drift"] = s.drift;
    j["mmd"] = s.mmd;
    j["action"] = s.action;
    j["action_expert"] = s.action_expert;
    j["routing_means"] = s.routing_means;
    return j;
}

}  // namespace

void write_metrics_jsonl(const std::vector<WindowMetrics>& metrics, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const WindowMetrics& w : metrics) {
        ordered_json j;
        j["t"] = w.t;
        j["streams"] = ordered_json::array();
        for (const StreamWindowMetrics& s : w.streams) j["streams"].push_back(stream_record(s));
        out << j.dump() << "\n";
    }
}

void write_summary_json(const RunSummary& summary, const std::string& path) {
    ordered_json j;
    j["stream_names"] = summary.stream_names;
    j["per_stream_accuracy"] = summary.per_stream_accuracy;
    j["mean_accuracy"] = summary.mean_accuracy;
    j["windows_evaluated"] = summary.windows_evaluated;
    j["adds"] = summary.adds;
    j["prunes"] = summary.prunes;
    j["wall_clock_sec"] = summary.wall_clock_sec;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

void write_run_artifacts(const RunConfig& config, const RunResult& result, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path base(dir);
    std::ofstream cfg(base / "config.txt");
    if (!cfg) throw std::runtime_error("cannot write " + (base / "config.txt").string());
    cfg << config_to_text(config);
    write_metrics_jsonl(result.metrics, (base / "metrics.jsonl").string());
    write_summary_json(result.summary, (base / "summary.json").string());
}

}  // namespace camel
