#include "ctp/samplers.hpp"

#include <algorithm>

namespace ctp {

Schedule make_schedule(std::size_t length, std::size_t steps) {
    if (steps < 1 || steps > length) {
        throw InvalidSchedule("step count must be in [1, L]");
    }
    const std::size_t base = length / steps;
    const std::size_t extra = length % steps;
    Schedule schedule;
    schedule.per_step_counts.assign(steps, base);
    for (std::size_t i = 0; i < extra; ++i) schedule.per_step_counts[i] = base + 1;
    return schedule;
}

std::vector<Categorical> composed_step_logits(const ConditionalTokenModel& model,
                                              const LatentState& state,
                                              std::span<const WeightedCondition> wconds) {
    const std::vector<Categorical> prior = model.predict(state, std::nullopt);
    std::vector<std::vector<Categorical>> cond_dists;
    cond_dists.reserve(wconds.size());
    for (const WeightedCondition& wc : wconds) {
        cond_dists.push_back(model.predict(state, wc.cond));
    }

    const std::size_t length = state.size();
    std::vector<Categorical> out;
    out.reserve(length);
    std::vector<WeightedDist> slot_conds(wconds.size());
    for (std::size_t slot = 0; slot < length; ++slot) {
        if (!state.is_masked(slot)) {
            out.push_back(prior[slot]); // point mass by the predict contract
            continue;
        }
        for (std::size_t i = 0; i < wconds.size(); ++i) {
            slot_conds[i] = {cond_dists[i][slot], wconds[i].weight};
        }
        out.push_back(compose(prior[slot], slot_conds));
    }
    return out;
}

std::pair<LatentState, SamplerTrace> sample_parallel(const ConditionalTokenModel& model,
                                                     std::span<const WeightedCondition> wconds,
                                                     const Schedule& schedule, double temperature,
                                                     Rng& rng) {
    const std::size_t length = model.shape().length;
    if (schedule.total() != length) {
        throw InvalidSchedule("schedule does not sum to sequence length");
    }
    for (std::size_t c : schedule.per_step_counts) {
        if (c < 1) throw InvalidSchedule("schedule step unmasks no tokens");
    }

    LatentState state(length);
    SamplerTrace trace;
    trace.steps.reserve(schedule.steps());
    for (std::size_t t = 0; t < schedule.steps(); ++t) {
        const std::vector<Categorical> dists = composed_step_logits(model, state, wconds);

        const std::vector<std::size_t> masked = state.masked_slots();
        const std::size_t count = schedule.per_step_counts[t];
        std::vector<std::size_t> chosen;
        chosen.reserve(count);
        for (std::size_t idx : sample_without_replacement(rng, masked.size(), count)) {
            chosen.push_back(masked[idx]);
        }
        std::sort(chosen.begin(), chosen.end());

        StepRecord record;
        record.step = t;
        record.model_evaluations = wconds.size() + 1;
        for (std::size_t slot : chosen) {
            const auto tok = static_cast<std::int32_t>(sample_token(dists[slot], temperature, rng));
            state.set_token(slot, tok);
            record.slots.push_back(slot);
            record.tokens.push_back(tok);
        }
        trace.steps.push_back(std::move(record));
    }
    return {std::move(state), std::move(trace)};
}

std::pair<LatentState, SamplerTrace> sample_autoregressive(const ConditionalTokenModel& model,
                                                           std::span<const WeightedCondition> wconds,
                                                           double temperature, Rng& rng) {
    const std::size_t length = model.shape().length;
    LatentState state(length);
    SamplerTrace trace;
    trace.steps.reserve(length);
    for (std::size_t slot = 0; slot < length; ++slot) {
        const std::vector<Categorical> dists = composed_step_logits(model, state, wconds);
        const auto tok = static_cast<std::int32_t>(sample_token(dists[slot], temperature, rng));
        state.set_token(slot, tok);
        StepRecord record;
        record.step = slot;
        record.slots = {slot};
        record.tokens = {tok};
        record.model_evaluations = wconds.size() + 1;
        trace.steps.push_back(std::move(record));
    }
    return {std::move(state), std::move(trace)};
}

} // namespace ctp
