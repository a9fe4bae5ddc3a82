#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "ctp/categorical.hpp"
#include "ctp/samplers.hpp"

namespace ctp {

// Brute-force references for the composition operator and the samplers.
// Everything here works in probability space with extended-precision
// accumulation so it does not share the log-space implementation's failure
// modes.

// q(x) proportional to p(x) * prod_i (p_i(x)/p(x))^{w_i}, evaluated with
// long doubles and the same support floor as compose().
Categorical compose_direct(const Categorical& prior, std::span<const WeightedDist> conds);

// Exact distribution over fully unmasked output states.
struct ExactDistribution {
    std::map<std::vector<std::int32_t>, double> probs;

    double total() const;
    // Marginal P(slot == token).
    double marginal(std::size_t slot, std::int32_t token) const;
};

// Half the L1 distance between the exact distribution and an empirical
// histogram of `n` samples.
double total_variation(const ExactDistribution& exact,
                       const std::map<std::vector<std::int32_t>, std::size_t>& histogram,
                       std::size_t n);

inline constexpr std::size_t kMaxOracleLength = 4;
inline constexpr std::size_t kMaxOracleVocab = 5;

// Enumerates every slot-selection ordering with its uniform selection
// probability and every token assignment for the parallel sampler.
// Instances above the caps are rejected outright.
ExactDistribution exact_parallel_distribution(const ConditionalTokenModel& model,
                                              std::span<const WeightedCondition> wconds,
                                              const Schedule& schedule, double temperature);

// Chain enumeration for the raster-order autoregressive sampler.
ExactDistribution exact_autoregressive_distribution(const ConditionalTokenModel& model,
                                                    std::span<const WeightedCondition> wconds,
                                                    double temperature);

} // namespace ctp
