#pragma once

#include <deque>
#include <memory>
#include <span>
#include <vector>

#include "camel/moe.hpp"

namespace camel {

enum class ActionKind { None, AddPrivate, PrunePrivate };

struct AdaptAction {
    ActionKind kind = ActionKind::None;
    int expert_id = -1;  // target for PrunePrivate

    bool structural() const { return kind != ActionKind::None; }
};

struct ExpertUtilization {
    int id = 0;
    double utilization = 0.0;
    int age = 0;  // windows since birth
};

// Per-stream controller state. Expansion requires drift AND a significant
// performance drop; pruning targets chronically under-routed experts. Any
// structural change starts a cooldown during which the tuner stays quiet.
struct TunerState {
    int lookback = 5;
    double drop_factor = 0.95;
    double tau_util = 0.1;
    int cooldown_length = 2;
    int grace_windows = 2;  // newborn experts are exempt from pruning
    int cooldown_remaining = 0;
    std::deque<double> perf_history;

    // True iff the history is full and acc sits below drop_factor times its mean.
    bool significant_degradation(double acc) const;
    void push_accuracy(double acc);
};

// One decision per stream per window, evaluated in priority order:
// cooldown -> add (drift && degradation) -> prune (util < tau, aged, pool > 1)
// -> none. The accuracy is folded into the history afterwards.
AdaptAction decide(TunerState& state, bool drift, double acc,
                   std::span<const ExpertUtilization> utilizations);

// Folds one window's mean routing weights into each private expert's
// long-term utilization. Slot 0 (the assistance expert) is ignored.
void update_utilization(std::vector<std::unique_ptr<PrivateExpert>>& pool,
                        std::span<const double> routing_means);

}  // namespace camel
