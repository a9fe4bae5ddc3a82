#include "ctp/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace ctp {

double two_sigma(double p, std::size_t n) {
    if (p < 0.0 || p > 1.0) throw Error("proportion outside [0, 1]");
    if (n < 1) throw Error("sample count must be >= 1");
    const double raw = 2.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    return std::min({raw, p, 1.0 - p});
}

std::string format_accuracy(const AccuracyReport& report) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f±%.2f", report.p * 100.0, report.two_sigma * 100.0);
    return buf;
}

AccuracyReport accuracy(std::span<const LatentState> samples,
                        std::span<const std::vector<Condition>> condition_sets,
                        std::size_t grid_cols) {
    if (samples.empty()) throw EmptyEvaluation("no samples to evaluate");
    if (samples.size() != condition_sets.size()) {
        throw DimensionMismatch("sample and condition-set counts differ");
    }
    AccuracyReport report;
    report.n = samples.size();
    std::size_t max_set = 0;
    for (const auto& set : condition_sets) max_set = std::max(max_set, set.size());
    std::vector<std::size_t> per_cond_hits(max_set, 0);
    std::vector<std::size_t> per_cond_n(max_set, 0);

    for (std::size_t i = 0; i < samples.size(); ++i) {
        bool all = true;
        for (std::size_t c = 0; c < condition_sets[i].size(); ++c) {
            const bool ok = check_condition(samples[i], condition_sets[i][c], grid_cols);
            per_cond_n[c]++;
            per_cond_hits[c] += ok;
            all = all && ok;
        }
        report.successes += all;
    }
    report.p = static_cast<double>(report.successes) / static_cast<double>(report.n);
    report.two_sigma = two_sigma(report.p, report.n);
    for (std::size_t c = 0; c < max_set; ++c) {
        report.per_condition.push_back(static_cast<double>(per_cond_hits[c]) /
                                       static_cast<double>(per_cond_n[c]));
    }
    return report;
}

namespace {

struct Timing {
    double mean = 0.0;
    double sd = 0.0;
};

Timing mean_sd(const std::vector<double>& xs) {
    Timing t;
    t.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - t.mean) * (x - t.mean);
    if (xs.size() > 1) var /= static_cast<double>(xs.size() - 1);
    t.sd = std::sqrt(var);
    return t;
}

} // namespace

std::vector<BenchReport> bench_sampling(const ConditionalTokenModel& model,
                                        std::span<const WeightedCondition> wconds,
                                        const BenchConfig& config) {
    if (config.repeats < 3) throw Error("bench requires repeats >= 3");
    const std::size_t length = model.shape().length;
    const Schedule schedule = make_schedule(length, config.steps);
    const std::size_t n = wconds.size();

    std::vector<BenchReport> reports;
    for (const bool parallel : {true, false}) {
        std::vector<double> times;
        std::size_t evals_per_sample = 0;
        for (std::size_t r = 0; r < config.repeats; ++r) {
            Rng rng(config.seed + r);
            const auto start = std::chrono::steady_clock::now();
            for (std::size_t b = 0; b < config.batch; ++b) {
                const auto [state, trace] =
                    parallel
                        ? sample_parallel(model, wconds, schedule, config.temperature, rng)
                        : sample_autoregressive(model, wconds, config.temperature, rng);
                evals_per_sample = trace.total_model_evaluations();
            }
            const auto stop = std::chrono::steady_clock::now();
            times.push_back(std::chrono::duration<double>(stop - start).count());
        }
        const Timing t = mean_sd(times);
        BenchReport report;
        report.method = parallel ? "parallel" : "autoregressive";
        report.conditions = n;
        report.evaluations_per_sample = evals_per_sample;
        report.batch = config.batch;
        report.repeats = config.repeats;
        report.wall_mean_s = t.mean;
        report.wall_sd_s = t.sd;
        reports.push_back(report);
    }
    return reports;
}

std::vector<Neighbour> nearest_training_neighbours(const Image& sample,
                                                   std::span<const Image> training,
                                                   std::size_t k) {
    if (k > training.size()) throw Error("k exceeds training set size");
    std::vector<Neighbour> all(training.size());
    for (std::size_t i = 0; i < training.size(); ++i) {
        const Image& t = training[i];
        if (t.width != sample.width || t.height != sample.height ||
            t.channels != sample.channels) {
            throw ShapeError("training image shape mismatch");
        }
        double d = 0.0;
        for (std::size_t e = 0; e < sample.pixels.size(); ++e) {
            const double diff = sample.pixels[e] - t.pixels[e];
            d += diff * diff;
        }
        all[i] = {i, std::sqrt(d)};
    }
    std::sort(all.begin(), all.end(), [](const Neighbour& a, const Neighbour& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.index < b.index;
    });
    all.resize(k);
    return all;
}

void save_accuracy_report(const AccuracyReport& report, std::size_t components,
                          const std::filesystem::path& path) {
    nlohmann::json j;
    j["version"] = 1;
    j["components"] = components;
    j["n"] = report.n;
    j["successes"] = report.successes;
    j["p"] = report.p;
    j["two_sigma"] = report.two_sigma;
    j["per_condition"] = report.per_condition;
    j["formatted"] = format_accuracy(report);
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << j.dump(1) << "\n";
}

void save_bench_reports(std::span<const BenchReport> reports, const std::filesystem::path& path) {
    nlohmann::json j;
    j["version"] = 1;
    auto& arr = j["reports"] = nlohmann::json::array();
    for (const BenchReport& r : reports) {
        arr.push_back({{"method", r.method},
                       {"conditions", r.conditions},
                       {"evaluations_per_sample", r.evaluations_per_sample},
                       {"batch", r.batch},
                       {"repeats", r.repeats},
                       {"wall_mean_s", r.wall_mean_s},
                       {"wall_sd_s", r.wall_sd_s},
                       {"threads", r.threads}});
    }
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << j.dump(1) << "\n";
}

} // namespace ctp
