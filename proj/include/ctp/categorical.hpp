#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ctp/errors.hpp"
#include "ctp/rng.hpp"

namespace ctp {

// Log-probabilities below this floor are clamped before composition. Negative
// concept weights divide by the conditional probability, so exact zeros would
// otherwise produce +inf logits.
inline constexpr double kSupportFloorProb = 1e-10;

double logsumexp(std::span<const double> v);

// Normalized categorical distribution over K tokens, stored as natural-log
// probabilities. logsumexp(log_probs) == 0 within 1e-12; entries are finite or
// -inf with at least one finite entry.
class Categorical {
public:
    Categorical() = default; // empty placeholder; factories produce valid distributions

    static Categorical from_logits(std::span<const double> logits);
    static Categorical from_probs(std::span<const double> probs);
    static Categorical point_mass(std::size_t k, std::size_t index);
    static Categorical uniform(std::size_t k);

    std::size_t size() const { return log_probs_.size(); }
    double log_prob(std::size_t i) const { return log_probs_[i]; }
    double prob(std::size_t i) const;
    std::span<const double> log_probs() const { return log_probs_; }
    std::vector<double> probs() const;

    // Lowest index attaining the maximum log-probability.
    std::size_t argmax() const;

private:
    std::vector<double> log_probs_;
};

struct WeightedDist {
    Categorical dist;
    double weight = 1.0;
};

// log-space normalization: log_probs = logits - logsumexp(logits).
Categorical normalize(std::span<const double> logits);

// Weighted product-of-experts composition:
//   q(x) = normalize( log p(x) + sum_i w_i * (log p_i(x) - log p(x)) )
// All log-probabilities are clamped to >= ln(kSupportFloorProb) first.
// Empty conds returns the prior unchanged.
Categorical compose(const Categorical& prior, std::span<const WeightedDist> conds);

// Draws one token from normalize(log_probs / temperature). Consumes exactly
// one draw from the generator stream.
std::size_t sample_token(const Categorical& dist, double temperature, Rng& rng);

} // namespace ctp
