#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ctp/samplers.hpp"
#include "ctp/synthdata.hpp"
#include "ctp/vq.hpp"

namespace ctp {

// Two binomial standard deviations of a proportion, clipped so the error bar
// never leaves [0, 1]: min(2*sqrt(p(1-p)/n), p, 1-p).
double two_sigma(double p, std::size_t n);

struct AccuracyReport {
    std::size_t n = 0;
    std::size_t successes = 0;
    double p = 0.0;
    double two_sigma = 0.0;
    // breakdown[i]: fraction of samples whose i-th condition held
    std::vector<double> per_condition;
};

// "99.30±0.24" (percentage points, two decimals).
std::string format_accuracy(const AccuracyReport& report);

// A sample succeeds iff every condition in its set holds.
AccuracyReport accuracy(std::span<const LatentState> samples,
                        std::span<const std::vector<Condition>> condition_sets,
                        std::size_t grid_cols);

struct BenchConfig {
    std::size_t steps = 30;
    double temperature = kDefaultTemperature;
    std::size_t repeats = 3;
    std::size_t batch = 25;
    std::uint64_t seed = 0;
};

struct BenchReport {
    std::string method;
    std::size_t conditions = 0;
    std::size_t evaluations_per_sample = 0;
    std::size_t batch = 0;
    std::size_t repeats = 0;
    double wall_mean_s = 0.0;
    double wall_sd_s = 0.0;
    std::size_t threads = 1; // timed sections are pinned to one logical thread
};

// Runs the parallel and autoregressive samplers under identical conditions
// and reports wall-clock mean +/- sd per batch along with the exact
// model-evaluation counts.
std::vector<BenchReport> bench_sampling(const ConditionalTokenModel& model,
                                        std::span<const WeightedCondition> wconds,
                                        const BenchConfig& config);

struct Neighbour {
    std::size_t index = 0;
    double distance = 0.0;
};

// k smallest Euclidean distances, ascending, ties by lowest index.
std::vector<Neighbour> nearest_training_neighbours(const Image& sample,
                                                   std::span<const Image> training,
                                                   std::size_t k);

inline constexpr std::size_t kDefaultNeighbourCount = 8;
inline constexpr std::size_t kDefaultEvalSamples = 5000;

void save_accuracy_report(const AccuracyReport& report, std::size_t components,
                          const std::filesystem::path& path);
void save_bench_reports(std::span<const BenchReport> reports, const std::filesystem::path& path);

} // namespace ctp
