#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ctp/eval.hpp"
#include "ctp/models.hpp"
#include "ctp/oracle.hpp"
#include "ctp/samplers.hpp"
#include "ctp/synthdata.hpp"
#include "ctp/vq.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Condition flag grammar: "ROW,COL=COLOR[:wWEIGHT]", weight defaults to 3.0.
// Negative weights express NOT.
ctp::WeightedCondition parse_cond(const std::string& text) {
    const auto eq = text.find('=');
    const auto comma = text.find(',');
    if (eq == std::string::npos || comma == std::string::npos || comma > eq ||
        text.find('-') < eq) {
        throw UsageError("bad --cond '" + text + "' (expected ROW,COL=COLOR[:wWEIGHT])");
    }
    ctp::WeightedCondition wc;
    try {
        wc.cond.row = std::stoul(text.substr(0, comma));
        wc.cond.col = std::stoul(text.substr(comma + 1, eq - comma - 1));
        std::string rest = text.substr(eq + 1);
        const auto colon = rest.find(":w");
        if (colon != std::string::npos) {
            wc.weight = std::stod(rest.substr(colon + 2));
            rest = rest.substr(0, colon);
        }
        if (rest.empty() || rest[0] == '-') throw std::invalid_argument("negative color");
        wc.cond.color_id = std::stoul(rest);
    } catch (const std::exception&) {
        throw UsageError("bad --cond '" + text + "' (expected ROW,COL=COLOR[:wWEIGHT])");
    }
    if (!std::isfinite(wc.weight)) throw UsageError("non-finite condition weight");
    return wc;
}

std::vector<ctp::WeightedCondition> parse_conds(const std::vector<std::string>& texts) {
    std::vector<ctp::WeightedCondition> out;
    for (const auto& t : texts) out.push_back(parse_cond(t));
    return out;
}

void write_manifest(const fs::path& path, const std::string& command, const json& config) {
    json j;
    j["version"] = 1;
    j["command"] = command;
    j["config"] = config;
    std::ofstream out(path);
    if (!out) throw ctp::Error("cannot write manifest " + path.string());
    out << j.dump(1) << "\n";
}

std::size_t default_steps(std::size_t length, std::size_t requested) {
    if (requested != 0) return requested;
    // aim for roughly 8.5 tokens per step
    const auto t = static_cast<std::size_t>(std::llround(static_cast<double>(length) / 8.533));
    return std::clamp<std::size_t>(t, 1, length);
}

std::string sample_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%05zu.ppm", i);
    return buf;
}

// Places same-sized images on a grid, row-major, with a 1px light separator.
ctp::Image montage(const std::vector<ctp::Image>& images, std::size_t cols) {
    if (images.empty() || cols == 0) throw ctp::Error("montage needs at least one image");
    const std::size_t n = images.size();
    const std::size_t rows = (n + cols - 1) / cols;
    const std::size_t w = images[0].width;
    const std::size_t h = images[0].height;
    ctp::Image out(cols * w + (cols - 1), rows * h + (rows - 1), images[0].channels);
    std::fill(out.pixels.begin(), out.pixels.end(), 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t gx = (i % cols) * (w + 1);
        const std::size_t gy = (i / cols) * (h + 1);
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                for (std::size_t c = 0; c < out.channels; ++c) {
                    out.at(gx + x, gy + y, c) = images[i].at(x, y, c);
                }
            }
        }
    }
    return out;
}

// Runs fn(i) for i in [0, n) across `threads` workers. Work is index-sliced,
// so results depend only on i, never on scheduling.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += threads) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

struct SampleRun {
    ctp::LatentState state;
    ctp::SamplerTrace trace;
};

// Per-sample seeds are seed + index, so fan-out across threads cannot change
// any output.
std::vector<SampleRun> run_sampler(const ctp::ConditionalTokenModel& model,
                                   const std::vector<ctp::WeightedCondition>& wconds,
                                   const std::string& sampler, std::size_t steps,
                                   double temperature, std::size_t n, std::uint64_t seed,
                                   std::size_t threads) {
    const ctp::Schedule schedule = ctp::make_schedule(model.shape().length, steps);
    std::vector<SampleRun> runs(n);
    parallel_for(n, threads, [&](std::size_t i) {
        ctp::Rng rng(seed + i);
        auto [state, trace] =
            sampler == "ar"
                ? ctp::sample_autoregressive(model, wconds, temperature, rng)
                : ctp::sample_parallel(model, wconds, schedule, temperature, rng);
        runs[i] = {std::move(state), std::move(trace)};
    });
    return runs;
}

json trace_to_json(const ctp::SamplerTrace& trace) {
    json steps = json::array();
    for (const auto& s : trace.steps) {
        steps.push_back({{"step", s.step},
                         {"slots", s.slots},
                         {"tokens", s.tokens},
                         {"model_evaluations", s.model_evaluations}});
    }
    return {{"total_model_evaluations", trace.total_model_evaluations()}, {"steps", steps}};
}

int cmd_gen_data(const std::string& out, std::size_t grid, std::size_t colors,
                 std::size_t max_objects, std::size_t n, std::uint64_t seed) {
    ctp::DatasetMeta meta;
    meta.grid_size = grid;
    meta.num_colors = colors;
    meta.max_objects = max_objects;
    meta.num_samples = n;
    ctp::Rng rng(seed);
    const ctp::Dataset ds = ctp::generate_dataset(meta, rng);
    ctp::save_dataset(ds, out);
    write_manifest(fs::path(out) / "manifest.json", "gen-data",
                   {{"grid", grid},
                    {"colors", colors},
                    {"max_objects", max_objects},
                    {"n", n},
                    {"seed", seed},
                    {"out", out}});
    std::cout << "wrote " << ds.records.size() << " records to " << out << "\n";
    return 0;
}

int cmd_learn_codebook(const std::string& data, const std::string& images, std::size_t k,
                       std::size_t iters, std::size_t patch, std::size_t limit,
                       std::uint64_t seed, const std::string& out) {
    if (data.empty() == images.empty()) {
        throw UsageError("learn-codebook needs exactly one of --data or --images");
    }
    std::vector<std::vector<double>> patches;
    std::size_t channels = 3;
    if (!data.empty()) {
        const ctp::Dataset ds = ctp::load_dataset(data);
        if (k == 0) k = ds.meta.vocab();
        const ctp::Codebook palette = ctp::make_palette_codebook(ds.meta.num_colors, patch);
        const std::size_t count = std::min<std::size_t>(limit, ds.records.size());
        for (std::size_t i = 0; i < count; ++i) {
            const ctp::LatentState state(std::vector<std::int32_t>(ds.records[i].tokens));
            const ctp::Image img = ctp::render_tokens(state, ds.meta.grid_size, palette);
            for (auto& p : ctp::extract_patches(img, patch)) patches.push_back(std::move(p));
        }
    } else {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(images)) {
            if (entry.path().extension() == ".ppm") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) throw ctp::Error("no .ppm files in " + images);
        for (const auto& f : files) {
            const ctp::Image img = ctp::read_ppm(f);
            for (auto& p : ctp::extract_patches(img, patch)) patches.push_back(std::move(p));
        }
        if (k == 0) k = ctp::kDefaultCodebookSize;
    }
    ctp::Rng rng(seed);
    const ctp::KMeansResult result = ctp::learn_codebook(patches, k, iters, rng, patch, channels);
    ctp::save_codebook(result.codebook, out);
    write_manifest(out + ".manifest.json", "learn-codebook",
                   {{"data", data},
                    {"images", images},
                    {"K", k},
                    {"iters", iters},
                    {"patch", patch},
                    {"limit", limit},
                    {"seed", seed},
                    {"out", out}});
    std::cout << "codebook K=" << k << " from " << patches.size()
              << " patches, final distortion " << result.distortion_per_iteration.back() << "\n";
    return 0;
}

int cmd_train_tabular(const std::string& data, double alpha, const std::string& out) {
    const ctp::Dataset ds = ctp::load_dataset(data);
    const ctp::TabularModel model = ctp::fit_tabular(ds, ctp::all_conditions(ds.meta), alpha);
    ctp::save_model(model, ds.meta, out);
    write_manifest(out + ".manifest.json", "train tabular",
                   {{"data", data}, {"alpha", alpha}, {"out", out}});
    std::cout << "tabular model over " << ds.records.size() << " records -> " << out << "\n";
    return 0;
}

int cmd_train_mlp(const std::string& data, const ctp::MlpConfig& config, const std::string& out) {
    const ctp::Dataset ds = ctp::load_dataset(data);
    const auto [model, stats] = ctp::train_mlp(ds, config);
    ctp::save_model(model, ds.meta, out);
    write_manifest(out + ".manifest.json", "train mlp",
                   {{"data", data},
                    {"embed_dim", config.embed_dim},
                    {"hidden_dim", config.hidden_dim},
                    {"steps", config.steps},
                    {"lr", config.learning_rate},
                    {"dropout", config.dropout_p},
                    {"seed", config.seed},
                    {"out", out}});
    double tail = 0.0;
    const std::size_t window = std::min<std::size_t>(100, stats.losses.size());
    for (std::size_t i = stats.losses.size() - window; i < stats.losses.size(); ++i) {
        tail += stats.losses[i];
    }
    std::cout << "mlp trained " << stats.steps << " steps, null-cond fraction "
              << static_cast<double>(stats.null_condition_steps) / static_cast<double>(stats.steps)
              << ", mean loss (last " << window << ") " << tail / static_cast<double>(window)
              << " -> " << out << "\n";
    return 0;
}

int cmd_sample(const std::string& model_path, const std::vector<std::string>& cond_texts,
               const std::string& sampler, std::size_t steps, double temperature, std::size_t n,
               std::uint64_t seed, const std::string& out, std::size_t patch,
               std::size_t threads) {
    const ctp::LoadedModel loaded = ctp::load_model(model_path);
    const auto wconds = parse_conds(cond_texts);
    const std::size_t length = loaded.model->shape().length;
    steps = sampler == "ar" ? length : default_steps(length, steps);

    const auto runs =
        run_sampler(*loaded.model, wconds, sampler, steps, temperature, n, seed, threads);

    fs::create_directories(out);
    const ctp::Codebook palette = ctp::make_palette_codebook(loaded.meta.num_colors, patch);
    json traces = json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const ctp::Image img =
            ctp::render_tokens(runs[i].state, loaded.meta.grid_size, palette);
        ctp::write_ppm(img, fs::path(out) / sample_name(i));
        traces.push_back(trace_to_json(runs[i].trace));
    }
    {
        json j;
        j["version"] = 1;
        j["traces"] = traces;
        std::ofstream tf(fs::path(out) / "trace.json");
        tf << j.dump(1) << "\n";
    }
    write_manifest(fs::path(out) / "manifest.json", "sample",
                   {{"model", model_path},
                    {"cond", cond_texts},
                    {"sampler", sampler},
                    {"steps", steps},
                    {"temp", temperature},
                    {"n", n},
                    {"seed", seed},
                    {"patch", patch},
                    {"threads", threads},
                    {"out", out}});
    std::cout << "wrote " << n << " samples to " << out << "\n";
    return 0;
}

int cmd_eval(const std::string& model_path, std::size_t components, std::size_t n, double weight,
             std::size_t steps, double temperature, std::uint64_t seed, const std::string& out,
             std::size_t threads) {
    const ctp::LoadedModel loaded = ctp::load_model(model_path);
    const std::size_t length = loaded.model->shape().length;
    steps = default_steps(length, steps);
    const ctp::Schedule schedule = ctp::make_schedule(length, steps);

    std::vector<ctp::LatentState> samples(n);
    std::vector<std::vector<ctp::Condition>> sets(n);
    parallel_for(n, threads, [&](std::size_t i) {
        ctp::Rng rng(seed + i);
        const auto conds = ctp::draw_condition_set(loaded.meta, components, rng);
        std::vector<ctp::WeightedCondition> wconds;
        for (const auto& c : conds) wconds.push_back({c, weight});
        samples[i] =
            ctp::sample_parallel(*loaded.model, wconds, schedule, temperature, rng).first;
        sets[i] = conds;
    });

    const ctp::AccuracyReport report = ctp::accuracy(samples, sets, loaded.meta.grid_size);
    std::cout << "components  n      accuracy\n";
    std::cout << components << "           " << n << "   " << ctp::format_accuracy(report)
              << "\n";
    for (std::size_t c = 0; c < report.per_condition.size(); ++c) {
        std::printf("  condition %zu satisfied: %.4f\n", c, report.per_condition[c]);
    }
    fs::create_directories(out);
    ctp::save_accuracy_report(report, components, fs::path(out) / "accuracy.json");
    write_manifest(fs::path(out) / "manifest.json", "eval",
                   {{"model", model_path},
                    {"components", components},
                    {"n", n},
                    {"weight", weight},
                    {"steps", steps},
                    {"temp", temperature},
                    {"seed", seed},
                    {"threads", threads},
                    {"out", out}});
    return 0;
}

int cmd_bench(const std::string& model_path, std::size_t components, std::size_t steps,
              double temperature, std::size_t repeats, std::size_t batch, double weight,
              std::uint64_t seed, const std::string& out) {
    const ctp::LoadedModel loaded = ctp::load_model(model_path);
    ctp::Rng rng(seed);
    const auto conds = ctp::draw_condition_set(loaded.meta, components, rng);
    std::vector<ctp::WeightedCondition> wconds;
    for (const auto& c : conds) wconds.push_back({c, weight});

    ctp::BenchConfig config;
    config.steps = default_steps(loaded.model->shape().length, steps);
    config.temperature = temperature;
    config.repeats = repeats;
    config.batch = batch;
    config.seed = seed;
    const auto reports = ctp::bench_sampling(*loaded.model, wconds, config);

    std::printf("%-16s %5s %12s %16s %16s\n", "method", "conds", "evals/sample", "wall mean (s)",
                "wall sd (s)");
    for (const auto& r : reports) {
        std::printf("%-16s %5zu %12zu %16.4f %16.4f\n", r.method.c_str(), r.conditions,
                    r.evaluations_per_sample, r.wall_mean_s, r.wall_sd_s);
    }
    fs::create_directories(out);
    ctp::save_bench_reports(reports, fs::path(out) / "bench.json");
    write_manifest(fs::path(out) / "manifest.json", "bench",
                   {{"model", model_path},
                    {"components", components},
                    {"steps", config.steps},
                    {"temp", temperature},
                    {"repeats", repeats},
                    {"batch", batch},
                    {"weight", weight},
                    {"seed", seed},
                    {"out", out}});
    return 0;
}

int cmd_sweep(const std::string& model_path, const std::vector<std::string>& cond_texts,
              const std::string& weights_csv, std::size_t n, std::size_t steps,
              double temperature, std::uint64_t seed, const std::string& out, std::size_t patch,
              std::size_t threads) {
    const ctp::LoadedModel loaded = ctp::load_model(model_path);
    auto wconds = parse_conds(cond_texts);
    if (wconds.empty()) throw UsageError("sweep requires at least one --cond");

    std::vector<double> weights;
    {
        std::string tok;
        std::stringstream ss(weights_csv);
        while (std::getline(ss, tok, ',')) {
            try {
                weights.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw UsageError("bad --weights entry '" + tok + "'");
            }
        }
    }
    if (weights.empty()) throw UsageError("empty --weights list");

    const std::size_t length = loaded.model->shape().length;
    steps = default_steps(length, steps);
    fs::create_directories(out);
    const ctp::Codebook palette = ctp::make_palette_codebook(loaded.meta.num_colors, patch);
    const auto cols = static_cast<std::size_t>(
        std::ceil(std::sqrt(static_cast<double>(n))));

    for (const double w : weights) {
        wconds[0].weight = w; // sweep varies the first condition's weight
        const auto runs = run_sampler(*loaded.model, wconds, "parallel", steps, temperature, n,
                                      seed, threads);
        std::vector<ctp::Image> images;
        for (const auto& run : runs) {
            images.push_back(ctp::render_tokens(run.state, loaded.meta.grid_size, palette));
        }
        char name[64];
        std::snprintf(name, sizeof(name), "sweep_w%+.1f.ppm", w);
        ctp::write_ppm(montage(images, cols), fs::path(out) / name);
    }
    write_manifest(fs::path(out) / "manifest.json", "sweep",
                   {{"model", model_path},
                    {"cond", cond_texts},
                    {"weights", weights},
                    {"n", n},
                    {"steps", steps},
                    {"temp", temperature},
                    {"seed", seed},
                    {"patch", patch},
                    {"threads", threads},
                    {"out", out}});
    std::cout << "wrote " << weights.size() << " weight grids to " << out << "\n";
    return 0;
}

int cmd_neighbours(const std::string& model_path, const std::string& data,
                   std::size_t components, std::size_t n, std::size_t k, double weight,
                   std::size_t steps, double temperature, std::uint64_t seed,
                   const std::string& out, std::size_t limit, std::size_t patch) {
    const ctp::LoadedModel loaded = ctp::load_model(model_path);
    const ctp::Dataset ds = ctp::load_dataset(data);
    const std::size_t length = loaded.model->shape().length;
    steps = default_steps(length, steps);
    const ctp::Schedule schedule = ctp::make_schedule(length, steps);
    const ctp::Codebook palette = ctp::make_palette_codebook(loaded.meta.num_colors, patch);

    std::vector<ctp::Image> training;
    const std::size_t count = std::min<std::size_t>(limit, ds.records.size());
    training.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const ctp::LatentState state(std::vector<std::int32_t>(ds.records[i].tokens));
        training.push_back(ctp::render_tokens(state, ds.meta.grid_size, palette));
    }

    fs::create_directories(out);
    json report = json::array();
    for (std::size_t i = 0; i < n; ++i) {
        ctp::Rng rng(seed + i);
        const auto conds = ctp::draw_condition_set(loaded.meta, components, rng);
        std::vector<ctp::WeightedCondition> wconds;
        for (const auto& c : conds) wconds.push_back({c, weight});
        const auto [state, trace] =
            ctp::sample_parallel(*loaded.model, wconds, schedule, temperature, rng);
        const ctp::Image sample = ctp::render_tokens(state, loaded.meta.grid_size, palette);
        const auto nn = ctp::nearest_training_neighbours(sample, training, k);

        std::vector<ctp::Image> row{sample};
        json entry;
        entry["sample"] = i;
        auto& list = entry["neighbours"] = json::array();
        for (const auto& nb : nn) {
            row.push_back(training[nb.index]);
            list.push_back({{"index", nb.index}, {"distance", nb.distance}});
        }
        char name[64];
        std::snprintf(name, sizeof(name), "neighbours_%02zu.ppm", i);
        ctp::write_ppm(montage(row, row.size()), fs::path(out) / name);
        report.push_back(entry);
    }
    {
        json j;
        j["version"] = 1;
        j["k"] = k;
        j["training_size"] = training.size();
        j["samples"] = report;
        std::ofstream rf(fs::path(out) / "neighbours.json");
        rf << j.dump(1) << "\n";
    }
    write_manifest(fs::path(out) / "manifest.json", "neighbours",
                   {{"model", model_path},
                    {"data", data},
                    {"components", components},
                    {"n", n},
                    {"k", k},
                    {"weight", weight},
                    {"steps", steps},
                    {"temp", temperature},
                    {"seed", seed},
                    {"limit", limit},
                    {"patch", patch},
                    {"out", out}});
    std::cout << "wrote " << n << " neighbour rows to " << out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Composed discrete token generation: weighted conjunction and negation of "
                 "conditions over parallel and autoregressive token samplers"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic token-grid dataset");
    std::size_t grid = 4, colors = 4, max_objects = 3, gen_n = 20000;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    gen->add_option("--grid", grid, "Grid side length G");
    gen->add_option("--colors", colors, "Number of object colors");
    gen->add_option("--max-objects", max_objects, "Maximum objects per scene");
    gen->add_option("--n", gen_n, "Number of records");
    gen->add_option("--seed", gen_seed, "Random seed")->required();
    gen->add_option("--out", gen_out, "Output directory")->required();

    // learn-codebook
    auto* lcb = app.add_subcommand("learn-codebook", "Learn a k-means codebook from patches");
    std::string lcb_data, lcb_images, lcb_out;
    std::size_t lcb_k = 0, lcb_iters = 20, lcb_patch = ctp::kDefaultPatchSize, lcb_limit = 2000;
    std::uint64_t lcb_seed = 0;
    lcb->add_option("--data", lcb_data, "Dataset directory (renders records for patches)");
    lcb->add_option("--images", lcb_images, "Directory of .ppm images");
    lcb->add_option("--K", lcb_k, "Codebook size (0 = auto: vocab for --data, 256 for --images)");
    lcb->add_option("--iters", lcb_iters, "k-means iterations");
    lcb->add_option("--patch", lcb_patch, "Patch side length");
    lcb->add_option("--limit", lcb_limit, "Max records rendered from --data");
    lcb->add_option("--seed", lcb_seed, "Random seed")->required();
    lcb->add_option("--out", lcb_out, "Output codebook file")->required();

    // train
    auto* train = app.add_subcommand("train", "Fit a conditional token model");
    train->require_subcommand(1);
    auto* ttab = train->add_subcommand("tabular", "Exact smoothed count tables");
    std::string ttab_data, ttab_out;
    double ttab_alpha = 0.1;
    ttab->add_option("--data", ttab_data, "Dataset directory")->required();
    ttab->add_option("--alpha", ttab_alpha, "Additive smoothing");
    ttab->add_option("--out", ttab_out, "Output checkpoint")->required();

    auto* tmlp = train->add_subcommand("mlp", "One-hidden-layer network with condition dropout");
    std::string tmlp_data, tmlp_out;
    ctp::MlpConfig mlp_config;
    tmlp->add_option("--data", tmlp_data, "Dataset directory")->required();
    tmlp->add_option("--embed-dim", mlp_config.embed_dim, "Embedding dimension");
    tmlp->add_option("--hidden-dim", mlp_config.hidden_dim, "Hidden layer width");
    tmlp->add_option("--steps", mlp_config.steps, "SGD steps");
    tmlp->add_option("--lr", mlp_config.learning_rate, "Learning rate");
    tmlp->add_option("--dropout", mlp_config.dropout_p, "Condition dropout probability");
    tmlp->add_option("--seed", mlp_config.seed, "Random seed")->required();
    tmlp->add_option("--out", tmlp_out, "Output checkpoint")->required();

    // sample
    auto* sample = app.add_subcommand("sample", "Generate samples and render them as PPM images");
    std::string s_model, s_out, s_sampler = "parallel";
    std::vector<std::string> s_conds;
    std::size_t s_steps = 0, s_n = 16, s_patch = ctp::kDefaultPatchSize, s_threads = 1;
    double s_temp = ctp::kDefaultTemperature;
    std::uint64_t s_seed = 0;
    sample->add_option("--model", s_model, "Model checkpoint")->required();
    sample->add_option("--cond", s_conds, "Condition ROW,COL=COLOR[:wWEIGHT] (repeatable)");
    sample->add_option("--sampler", s_sampler, "parallel | ar")
        ->check(CLI::IsMember({"parallel", "ar"}));
    sample->add_option("--steps", s_steps, "Unmasking steps (0 = auto, ~8.5 tokens/step)");
    sample->add_option("--temp", s_temp, "Sampling temperature");
    sample->add_option("--n", s_n, "Number of samples");
    sample->add_option("--seed", s_seed, "Random seed")->required();
    sample->add_option("--patch", s_patch, "Rendering patch side length");
    sample->add_option("--threads", s_threads, "Worker threads (per-sample derived seeds)");
    sample->add_option("--out", s_out, "Output directory")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "Joint-condition accuracy with 2-sigma uncertainty");
    std::string e_model, e_out;
    std::size_t e_components = 1, e_n = ctp::kDefaultEvalSamples, e_steps = 0, e_threads = 1;
    double e_weight = ctp::kDefaultConceptWeight, e_temp = ctp::kDefaultTemperature;
    std::uint64_t e_seed = 0;
    eval->add_option("--model", e_model, "Model checkpoint")->required();
    eval->add_option("--components", e_components, "Conditions per sample (distinct cells)");
    eval->add_option("--n", e_n, "Samples to generate");
    eval->add_option("--weight", e_weight, "Concept weight for every condition");
    eval->add_option("--steps", e_steps, "Unmasking steps (0 = auto)");
    eval->add_option("--temp", e_temp, "Sampling temperature");
    eval->add_option("--seed", e_seed, "Random seed")->required();
    eval->add_option("--threads", e_threads, "Worker threads");
    eval->add_option("--out", e_out, "Output directory")->required();

    // bench
    auto* bench = app.add_subcommand("bench", "Wall-clock and evaluation-count comparison");
    std::string b_model, b_out;
    std::size_t b_components = 3, b_steps = 0, b_repeats = 5, b_batch = 25;
    double b_temp = ctp::kDefaultTemperature, b_weight = ctp::kDefaultConceptWeight;
    std::uint64_t b_seed = 0;
    bench->add_option("--model", b_model, "Model checkpoint")->required();
    bench->add_option("--components", b_components, "Number of conditions");
    bench->add_option("--steps", b_steps, "Parallel unmasking steps (0 = auto)");
    bench->add_option("--temp", b_temp, "Sampling temperature");
    bench->add_option("--repeats", b_repeats, "Timing repeats (>= 3)");
    bench->add_option("--batch", b_batch, "Samples per timed batch");
    bench->add_option("--weight", b_weight, "Concept weight");
    bench->add_option("--seed", b_seed, "Random seed")->required();
    bench->add_option("--out", b_out, "Output directory")->required();

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Concept-weight sweep, one image grid per weight");
    std::string w_model, w_out, w_weights = "-3.0,-2.0,-1.0,0.0,1.0,2.0,3.0";
    std::vector<std::string> w_conds;
    std::size_t w_n = 16, w_steps = 0, w_patch = ctp::kDefaultPatchSize, w_threads = 1;
    double w_temp = ctp::kDefaultTemperature;
    std::uint64_t w_seed = 0;
    sweep->add_option("--model", w_model, "Model checkpoint")->required();
    sweep->add_option("--cond", w_conds, "Conditions; the first one's weight is swept")
        ->required();
    sweep->add_option("--weights", w_weights, "Comma-separated weight values");
    sweep->add_option("--n", w_n, "Samples per grid");
    sweep->add_option("--steps", w_steps, "Unmasking steps (0 = auto)");
    sweep->add_option("--temp", w_temp, "Sampling temperature");
    sweep->add_option("--seed", w_seed, "Random seed")->required();
    sweep->add_option("--patch", w_patch, "Rendering patch side length");
    sweep->add_option("--threads", w_threads, "Worker threads");
    sweep->add_option("--out", w_out, "Output directory")->required();

    // neighbours
    auto* nb = app.add_subcommand("neighbours",
                                  "Nearest training neighbours of generated samples");
    std::string n_model, n_data, n_out;
    std::size_t n_components = 3, n_n = 8, n_k = ctp::kDefaultNeighbourCount, n_steps = 0,
                n_limit = 5000, n_patch = ctp::kDefaultPatchSize;
    double n_weight = ctp::kDefaultConceptWeight, n_temp = ctp::kDefaultTemperature;
    std::uint64_t n_seed = 0;
    nb->add_option("--model", n_model, "Model checkpoint")->required();
    nb->add_option("--data", n_data, "Training dataset directory")->required();
    nb->add_option("--components", n_components, "Conditions per sample");
    nb->add_option("--n", n_n, "Generated samples");
    nb->add_option("--k", n_k, "Neighbours per sample");
    nb->add_option("--weight", n_weight, "Concept weight");
    nb->add_option("--steps", n_steps, "Unmasking steps (0 = auto)");
    nb->add_option("--temp", n_temp, "Sampling temperature");
    nb->add_option("--seed", n_seed, "Random seed")->required();
    nb->add_option("--limit", n_limit, "Training records considered");
    nb->add_option("--patch", n_patch, "Rendering patch side length");
    nb->add_option("--out", n_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            return cmd_gen_data(gen_out, grid, colors, max_objects, gen_n, gen_seed);
        }
        if (lcb->parsed()) {
            return cmd_learn_codebook(lcb_data, lcb_images, lcb_k, lcb_iters, lcb_patch,
                                      lcb_limit, lcb_seed, lcb_out);
        }
        if (train->parsed()) {
            if (ttab->parsed()) return cmd_train_tabular(ttab_data, ttab_alpha, ttab_out);
            return cmd_train_mlp(tmlp_data, mlp_config, tmlp_out);
        }
        if (sample->parsed()) {
            return cmd_sample(s_model, s_conds, s_sampler, s_steps, s_temp, s_n, s_seed, s_out,
                              s_patch, s_threads);
        }
        if (eval->parsed()) {
            return cmd_eval(e_model, e_components, e_n, e_weight, e_steps, e_temp, e_seed, e_out,
                            e_threads);
        }
        if (bench->parsed()) {
            return cmd_bench(b_model, b_components, b_steps, b_temp, b_repeats, b_batch, b_weight,
                             b_seed, b_out);
        }
        if (sweep->parsed()) {
            return cmd_sweep(w_model, w_conds, w_weights, w_n, w_steps, w_temp, w_seed, w_out,
                             w_patch, w_threads);
        }
        if (nb->parsed()) {
            return cmd_neighbours(n_model, n_data, n_components, n_n, n_k, n_weight, n_steps,
                                  n_temp, n_seed, n_out, n_limit, n_patch);
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
