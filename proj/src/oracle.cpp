#include "ctp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace ctp {

Categorical compose_direct(const Categorical& prior, std::span<const WeightedDist> conds) {
    if (conds.empty()) return prior;
    const std::size_t k = prior.size();
    std::vector<long double> q(k);
    for (std::size_t x = 0; x < k; ++x) {
        const long double p = std::max<long double>(prior.prob(x), kSupportFloorProb);
        long double acc = p;
        for (const WeightedDist& wd : conds) {
            if (wd.dist.size() != k) {
                throw DimensionMismatch("compose_direct: mismatched support size");
            }
            const long double pc = std::max<long double>(wd.dist.prob(x), kSupportFloorProb);
            acc *= powl(pc / p, static_cast<long double>(wd.weight));
        }
        if (std::isnan(static_cast<double>(acc))) {
            throw InvalidDistribution("compose_direct: NaN in probability accumulation");
        }
        q[x] = acc;
    }
    long double total = 0.0L;
    for (long double v : q) total += v;
    if (!(total > 0.0L) || std::isinf(static_cast<double>(total))) {
        throw EmptyIntersection("compose_direct: degenerate normalizer");
    }
    std::vector<double> probs(k);
    for (std::size_t x = 0; x < k; ++x) probs[x] = static_cast<double>(q[x] / total);
    return Categorical::from_probs(probs);
}

double ExactDistribution::total() const {
    double t = 0.0;
    for (const auto& [state, p] : probs) t += p;
    return t;
}

double ExactDistribution::marginal(std::size_t slot, std::int32_t token) const {
    double t = 0.0;
    for (const auto& [state, p] : probs) {
        if (state[slot] == token) t += p;
    }
    return t;
}

double total_variation(const ExactDistribution& exact,
                       const std::map<std::vector<std::int32_t>, std::size_t>& histogram,
                       std::size_t n) {
    double l1 = 0.0;
    for (const auto& [state, p] : exact.probs) {
        const auto it = histogram.find(state);
        const double emp = it == histogram.end()
                               ? 0.0
                               : static_cast<double>(it->second) / static_cast<double>(n);
        l1 += std::fabs(p - emp);
    }
    for (const auto& [state, count] : histogram) {
        if (exact.probs.contains(state)) continue;
        l1 += static_cast<double>(count) / static_cast<double>(n);
    }
    return 0.5 * l1;
}

namespace {

void enforce_caps(const ConditionalTokenModel& model) {
    if (model.shape().length > kMaxOracleLength || model.shape().vocab > kMaxOracleVocab) {
        throw InstanceTooLarge("oracle enumeration capped at L <= 4, K <= 5");
    }
}

// Per-slot token probabilities the sampler actually draws from: composed via
// compose_direct, then temperature-sharpened in probability space.
std::vector<std::vector<long double>> step_token_probs(const ConditionalTokenModel& model,
                                                       const LatentState& state,
                                                       std::span<const WeightedCondition> wconds,
                                                       double temperature) {
    if (!(temperature > 0.0)) throw InvalidTemperature("temperature must be > 0");
    const std::vector<Categorical> prior = model.predict(state, std::nullopt);
    std::vector<std::vector<Categorical>> cond_dists;
    for (const WeightedCondition& wc : wconds) {
        cond_dists.push_back(model.predict(state, wc.cond));
    }
    const std::size_t k = model.shape().vocab;
    std::vector<std::vector<long double>> out(state.size());
    std::vector<WeightedDist> slot_conds(wconds.size());
    for (std::size_t slot = 0; slot < state.size(); ++slot) {
        if (!state.is_masked(slot)) continue;
        for (std::size_t i = 0; i < wconds.size(); ++i) {
            slot_conds[i] = {cond_dists[i][slot], wconds[i].weight};
        }
        const Categorical composed = compose_direct(prior[slot], slot_conds);
        std::vector<long double> p(k);
        long double total = 0.0L;
        for (std::size_t t = 0; t < k; ++t) {
            p[t] = powl(static_cast<long double>(composed.prob(t)),
                        1.0L / static_cast<long double>(temperature));
            total += p[t];
        }
        for (std::size_t t = 0; t < k; ++t) p[t] /= total;
        out[slot] = std::move(p);
    }
    return out;
}

void enumerate_subsets(const std::vector<std::size_t>& pool, std::size_t count,
                       std::vector<std::size_t>& current, std::size_t begin,
                       const std::function<void(const std::vector<std::size_t>&)>& visit) {
    if (current.size() == count) {
        visit(current);
        return;
    }
    for (std::size_t i = begin; i < pool.size(); ++i) {
        current.push_back(pool[i]);
        enumerate_subsets(pool, count, current, i + 1, visit);
        current.pop_back();
    }
}

long double binomial(std::size_t n, std::size_t k) {
    long double r = 1.0L;
    for (std::size_t i = 0; i < k; ++i) {
        r = r * static_cast<long double>(n - i) / static_cast<long double>(i + 1);
    }
    return r;
}

struct ParallelEnumerator {
    const ConditionalTokenModel& model;
    std::span<const WeightedCondition> wconds;
    const Schedule& schedule;
    double temperature;
    std::map<std::vector<std::int32_t>, long double> acc;

    void run() {
        LatentState state(model.shape().length);
        recurse(state, 0, 1.0L);
    }

    void recurse(LatentState& state, std::size_t step, long double prob) {
        if (step == schedule.steps()) {
            acc[state.slots] += prob;
            return;
        }
        const auto token_probs = step_token_probs(model, state, wconds, temperature);
        const std::vector<std::size_t> masked = state.masked_slots();
        const std::size_t count = schedule.per_step_counts[step];
        const long double p_subset = 1.0L / binomial(masked.size(), count);

        std::vector<std::size_t> subset;
        enumerate_subsets(masked, count, subset, 0, [&](const std::vector<std::size_t>& slots) {
            assign_tokens(state, slots, 0, step, prob * p_subset, token_probs);
        });
    }

    void assign_tokens(LatentState& state, const std::vector<std::size_t>& slots, std::size_t pos,
                       std::size_t step, long double prob,
                       const std::vector<std::vector<long double>>& token_probs) {
        if (pos == slots.size()) {
            recurse(state, step + 1, prob);
            return;
        }
        const std::size_t slot = slots[pos];
        for (std::size_t t = 0; t < model.shape().vocab; ++t) {
            const long double pt = token_probs[slot][t];
            if (pt <= 0.0L) continue;
            state.slots[slot] = static_cast<std::int32_t>(t);
            assign_tokens(state, slots, pos + 1, step, prob * pt, token_probs);
            state.slots[slot] = LatentState::kMasked;
        }
    }
};

} // namespace

ExactDistribution exact_parallel_distribution(const ConditionalTokenModel& model,
                                              std::span<const WeightedCondition> wconds,
                                              const Schedule& schedule, double temperature) {
    enforce_caps(model);
    if (schedule.total() != model.shape().length) {
        throw InvalidSchedule("schedule does not sum to sequence length");
    }
    ParallelEnumerator e{model, wconds, schedule, temperature, {}};
    e.run();
    ExactDistribution out;
    for (const auto& [state, p] : e.acc) out.probs[state] = static_cast<double>(p);
    return out;
}

ExactDistribution exact_autoregressive_distribution(const ConditionalTokenModel& model,
                                                    std::span<const WeightedCondition> wconds,
                                                    double temperature) {
    enforce_caps(model);
    const std::size_t length = model.shape().length;
    const std::size_t vocab = model.shape().vocab;

    std::map<std::vector<std::int32_t>, long double> acc;
    LatentState state(length);
    auto recurse = [&](auto&& self, std::size_t slot, long double prob) -> void {
        if (slot == length) {
            acc[state.slots] += prob;
            return;
        }
        const auto token_probs = step_token_probs(model, state, wconds, temperature);
        for (std::size_t t = 0; t < vocab; ++t) {
            const long double pt = token_probs[slot][t];
            if (pt <= 0.0L) continue;
            state.slots[slot] = static_cast<std::int32_t>(t);
            self(self, slot + 1, prob * pt);
            state.slots[slot] = LatentState::kMasked;
        }
    };
    recurse(recurse, 0, 1.0L);

    ExactDistribution out;
    for (const auto& [s, p] : acc) out.probs[s] = static_cast<double>(p);
    return out;
}

} // namespace ctp
