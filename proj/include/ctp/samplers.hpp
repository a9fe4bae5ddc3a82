#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "ctp/categorical.hpp"
#include "ctp/models.hpp"

namespace ctp {

inline constexpr double kDefaultConceptWeight = 3.0;
inline constexpr double kDefaultTemperature = 0.9;

struct WeightedCondition {
    Condition cond;
    double weight = kDefaultConceptWeight;
};

// Per-step unmask counts; counts sum to the sequence length and each is >= 1.
struct Schedule {
    std::vector<std::size_t> per_step_counts;

    std::size_t steps() const { return per_step_counts.size(); }
    std::size_t total() const {
        std::size_t n = 0;
        for (std::size_t c : per_step_counts) n += c;
        return n;
    }
};

// Counts differ by at most one: the first (L mod T) steps unmask ceil(L/T)
// tokens, the rest floor(L/T).
Schedule make_schedule(std::size_t length, std::size_t steps);

struct StepRecord {
    std::size_t step = 0;
    std::vector<std::size_t> slots;       // slots unmasked this step
    std::vector<std::int32_t> tokens;     // tokens written, same order
    std::size_t model_evaluations = 0;    // always n + 1
};

struct SamplerTrace {
    std::vector<StepRecord> steps;

    std::size_t total_model_evaluations() const {
        std::size_t n = 0;
        for (const StepRecord& s : steps) n += s.model_evaluations;
        return n;
    }
};

// One unconditional predict plus one predict per condition, composed per slot.
// Unmasked slots stay point masses.
std::vector<Categorical> composed_step_logits(const ConditionalTokenModel& model,
                                              const LatentState& state,
                                              std::span<const WeightedCondition> wconds);

// Parallel token prediction: start all-masked, per step unmask a uniformly
// random selection of masked slots with tokens drawn from the composed
// distributions. Written tokens are absorbing. Rng consumption order is
// fixed: selection draws first, then token draws in ascending slot order.
std::pair<LatentState, SamplerTrace> sample_parallel(const ConditionalTokenModel& model,
                                                     std::span<const WeightedCondition> wconds,
                                                     const Schedule& schedule, double temperature,
                                                     Rng& rng);

// Next-token prediction in raster order (slot 0..L-1), one slot per step.
std::pair<LatentState, SamplerTrace> sample_autoregressive(const ConditionalTokenModel& model,
                                                           std::span<const WeightedCondition> wconds,
                                                           double temperature, Rng& rng);

} // namespace ctp
