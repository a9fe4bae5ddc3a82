#include "ctp/categorical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ctp {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double logsumexp(std::span<const double> v) {
    double m = kNegInf;
    for (double x : v) m = std::max(m, x);
    if (m == kNegInf) return kNegInf;
    double sum = 0.0;
    for (double x : v) {
        if (x != kNegInf) sum += std::exp(x - m);
    }
    return m + std::log(sum);
}

Categorical Categorical::from_logits(std::span<const double> logits) {
    if (logits.empty()) throw InvalidDistribution("empty logit vector");
    bool any_finite = false;
    for (double x : logits) {
        if (std::isnan(x) || x == std::numeric_limits<double>::infinity()) {
            throw InvalidDistribution("logits contain NaN or +inf");
        }
        if (x != kNegInf) any_finite = true;
    }
    if (!any_finite) throw InvalidDistribution("all logits are -inf");
    Categorical c;
    c.log_probs_.assign(logits.begin(), logits.end());
    const double lse = logsumexp(c.log_probs_);
    for (double& x : c.log_probs_) {
        if (x != kNegInf) x -= lse;
    }
    return c;
}

Categorical Categorical::from_probs(std::span<const double> probs) {
    std::vector<double> logits(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (std::isnan(probs[i]) || probs[i] < 0.0) {
            throw InvalidDistribution("probabilities must be non-negative");
        }
        logits[i] = probs[i] > 0.0 ? std::log(probs[i]) : kNegInf;
    }
    return from_logits(logits);
}

Categorical Categorical::point_mass(std::size_t k, std::size_t index) {
    if (index >= k) throw InvalidDistribution("point mass index out of range");
    std::vector<double> logits(k, kNegInf);
    logits[index] = 0.0;
    return from_logits(logits);
}

Categorical Categorical::uniform(std::size_t k) {
    if (k == 0) throw InvalidDistribution("empty support");
    std::vector<double> logits(k, 0.0);
    return from_logits(logits);
}

double Categorical::prob(std::size_t i) const {
    const double lp = log_probs_[i];
    return lp == kNegInf ? 0.0 : std::exp(lp);
}

std::vector<double> Categorical::probs() const {
    std::vector<double> p(log_probs_.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = prob(i);
    return p;
}

std::size_t Categorical::argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < log_probs_.size(); ++i) {
        if (log_probs_[i] > log_probs_[best]) best = i;
    }
    return best;
}

Categorical normalize(std::span<const double> logits) {
    return Categorical::from_logits(logits);
}

Categorical compose(const Categorical& prior, std::span<const WeightedDist> conds) {
    if (conds.empty()) return prior;
    const std::size_t k = prior.size();
    const double floor = std::log(kSupportFloorProb);

    std::vector<double> logits(k);
    for (std::size_t x = 0; x < k; ++x) {
        logits[x] = std::max(prior.log_prob(x), floor);
    }
    for (const WeightedDist& wd : conds) {
        if (wd.dist.size() != k) {
            throw DimensionMismatch("compose: conditional has mismatched support size");
        }
        if (!std::isfinite(wd.weight)) {
            throw InvalidDistribution("compose: non-finite weight");
        }
        for (std::size_t x = 0; x < k; ++x) {
            const double lp = std::max(prior.log_prob(x), floor);
            const double lpc = std::max(wd.dist.log_prob(x), floor);
            logits[x] += wd.weight * (lpc - lp);
        }
    }
    for (double x : logits) {
        if (std::isnan(x)) throw EmptyIntersection("compose: result has no valid support");
    }
    if (logsumexp(logits) == kNegInf) {
        throw EmptyIntersection("compose: result has no finite entry");
    }
    return normalize(logits);
}

std::size_t sample_token(const Categorical& dist, double temperature, Rng& rng) {
    if (!(temperature > 0.0)) throw InvalidTemperature("temperature must be > 0");
    std::vector<double> scaled(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i) {
        scaled[i] = dist.log_prob(i) / temperature;
    }
    const Categorical d = normalize(scaled);

    const double u = canonical(rng);
    double cum = 0.0;
    std::size_t last_support = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double p = d.prob(i);
        if (p <= 0.0) continue;
        cum += p;
        last_support = i;
        if (u < cum) return i;
    }
    // u landed in the rounding slack past the accumulated mass
    return last_support;
}

} // namespace ctp
