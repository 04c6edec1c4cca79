#include "camel/aet.hpp"

#include <stdexcept>

namespace camel {

bool TunerState::significant_degradation(double acc) const {
    if (static_cast<int>(perf_history.size()) < lookback) return false;
    double mean = 0.0;
    for (double a : perf_history) mean += a;
    mean /= perf_history.size();
    return acc < drop_factor * mean;
}

void TunerState::push_accuracy(double acc) {
    perf_history.push_back(acc);
    while (static_cast<int>(perf_history.size()) > lookback) perf_history.pop_front();
}

AdaptAction decide(TunerState& state, bool drift, double acc,
                   std::span<const ExpertUtilization> utilizations) {
    if (utilizations.empty()) throw std::invalid_argument("decide: empty expert pool");

    AdaptAction action;
    if (state.cooldown_remaining > 0) {
        --state.cooldown_remaining;
    } else if (drift && state.significant_degradation(acc)) {
        action.kind = ActionKind::AddPrivate;
        state.cooldown_remaining = state.cooldown_length;
    } else if (utilizations.size() > 1) {
        const ExpertUtilization* victim = nullptr;
        for (const ExpertUtilization& u : utilizations) {
            if (u.age < state.grace_windows || u.utilization >= state.tau_util) continue;
            if (!victim || u.utilization < victim->utilization ||
                (u.utilization == victim->utilization && u.age > victim->age))
                victim = &u;
        }
        if (victim) {
            action.kind = ActionKind::PrunePrivate;
            action.expert_id = victim->id;
            state.cooldown_remaining = state.cooldown_length;
        }
    }
    state.push_accuracy(acc);
    return action;
}

void update_utilization(std::vector<std::unique_ptr<PrivateExpert>>& pool,
                        std::span<const double> routing_means) {
    if (routing_means.size() != pool.size() + 1)
        throw std::invalid_argument("routing means must cover assistance slot plus " +
                                    std::to_string(pool.size()) + " experts");
    for (size_t j = 0; j < pool.size(); ++j) {
        PrivateExpert& pe = *pool[j];
        const double w = routing_means[j + 1];
        if (pe.util_windows == 0)
            pe.utilization = w;
        else
            pe.utilization = (pe.utilization * pe.util_windows + w) / (pe.util_windows + 1);
        ++pe.util_windows;
    }
}

}  // namespace camel
