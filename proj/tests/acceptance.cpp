// Acceptance suite: runs every release criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exits nonzero if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ctp/eval.hpp"
#include "ctp/models.hpp"
#include "ctp/oracle.hpp"
#include "ctp/samplers.hpp"
#include "ctp/synthdata.hpp"
#include "ctp/vq.hpp"
#include "test_util.hpp"

using namespace ctp;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] %-28s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    if (!pass) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Categorical random_full_support(Rng& rng, std::size_t k) {
    std::vector<double> logits(k);
    for (double& x : logits) x = (canonical(rng) * 2.0 - 1.0) * 8.0;
    return normalize(logits);
}

// --- composition correctness: compose vs compose_direct, 1000+ instances ---
void criterion_composition() {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(1001);
    double worst = 0.0;
    const std::size_t trials = 1000;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const std::size_t k = 2 + uniform_below(rng, 15);   // K <= 16
        const std::size_t n = uniform_below(rng, 5);        // n <= 4
        const Categorical prior = random_full_support(rng, k);
        std::vector<WeightedDist> conds;
        for (std::size_t i = 0; i < n; ++i) {
            conds.push_back({random_full_support(rng, k), -2.0 + canonical(rng) * 5.0});
        }
        const Categorical fast = compose(prior, conds);
        const Categorical exact = compose_direct(prior, conds);
        worst = std::max(worst, test::max_abs_prob_diff(fast, exact));
    }
    const double elapsed = seconds_since(start);
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "max |dp| = %.3e over %zu instances (tol 1e-9), %.2f s (budget 5 s)", worst,
                  trials, elapsed);
    report("composition-correctness", worst < 1e-9 && elapsed < 5.0, detail);
}

// --- closed-form spot checks ---
void criterion_closed_form() {
    const Categorical conj = compose(
        Categorical::uniform(2),
        std::vector<WeightedDist>{{Categorical::from_probs(std::vector<double>{0.8, 0.2}), 1.0},
                                  {Categorical::from_probs(std::vector<double>{0.6, 0.4}), 1.0}});
    const double conj_err =
        std::max(std::fabs(conj.prob(0) - 6.0 / 7.0), std::fabs(conj.prob(1) - 1.0 / 7.0));

    const Categorical neg = compose(
        Categorical::uniform(3),
        std::vector<WeightedDist>{{Categorical::from_probs(std::vector<double>{0.6, 0.3, 0.1}),
                                   -1.0}});
    const double neg_err = std::max({std::fabs(neg.prob(0) - 1.0 / 9.0),
                                     std::fabs(neg.prob(1) - 2.0 / 9.0),
                                     std::fabs(neg.prob(2) - 6.0 / 9.0)});
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "conjunction err %.3e (tol 1e-12), negation err %.3e (tol 1e-9)", conj_err,
                  neg_err);
    report("closed-form-spot-checks", conj_err < 1e-12 && neg_err < 1e-9, detail);
}

// --- uncertainty formatting matches the reference table row ---
void criterion_uncertainty() {
    AccuracyReport r;
    r.n = 5000;
    r.p = 0.9930;
    r.two_sigma = two_sigma(r.p, r.n);
    const std::string got = format_accuracy(r);
    report("uncertainty-math", got == "99.30±0.24", "two_sigma(0.9930, 5000) -> \"" + got + "\"");
}

// --- sampler vs enumeration oracle at L=2, K=3 ---
void criterion_sampler_oracle() {
    const auto start = std::chrono::steady_clock::now();
    const test::TinyTabularSetup setup;
    const TabularModel model = setup.fit();
    const std::vector<WeightedCondition> wconds{{setup.conditions[1], 3.0}};
    const Schedule schedule = make_schedule(2, 2);
    const double temperature = 0.9;
    const std::size_t n = 100000;

    const ExactDistribution exact_par =
        exact_parallel_distribution(model, wconds, schedule, temperature);
    std::map<std::vector<std::int32_t>, std::size_t> hist_par;
    Rng rng_par(1002);
    for (std::size_t i = 0; i < n; ++i) {
        hist_par[sample_parallel(model, wconds, schedule, temperature, rng_par).first.slots]++;
    }
    const double tv_par = total_variation(exact_par, hist_par, n);

    const ExactDistribution exact_ar =
        exact_autoregressive_distribution(model, wconds, temperature);
    std::map<std::vector<std::int32_t>, std::size_t> hist_ar;
    Rng rng_ar(1003);
    for (std::size_t i = 0; i < n; ++i) {
        hist_ar[sample_autoregressive(model, wconds, temperature, rng_ar).first.slots]++;
    }
    const double tv_ar = total_variation(exact_ar, hist_ar, n);

    const double elapsed = seconds_since(start);
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "TV parallel %.4f, autoregressive %.4f (tol 0.02), %.1f s (budget 60 s)",
                  tv_par, tv_ar, elapsed);
    report("sampler-oracle-equivalence", tv_par < 0.02 && tv_ar < 0.02 && elapsed < 60.0, detail);
}

// --- desk-scale accuracy analog + out-of-distribution composition ---
void criterion_accuracy_and_ood() {
    const auto start = std::chrono::steady_clock::now();
    DatasetMeta meta; // G=4, C=4, max_objects=3, 20000 samples
    Rng data_rng(1004);
    const Dataset ds = generate_dataset(meta, data_rng);
    const TabularModel model = fit_tabular(ds, all_conditions(meta), 0.1);
    const Schedule schedule = make_schedule(16, 4);
    const double temperature = 0.9;
    const double weight = 3.0;
    const std::size_t n = 5000;

    auto joint_rate = [&](std::size_t components, std::uint64_t seed) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < n; ++i) {
            Rng rng(seed + i);
            const auto conds = draw_condition_set(meta, components, rng);
            std::vector<WeightedCondition> wconds;
            for (const auto& c : conds) wconds.push_back({c, weight});
            const auto [state, trace] =
                sample_parallel(model, wconds, schedule, temperature, rng);
            bool all = true;
            for (const auto& c : conds) all = all && check_condition(state, c, meta.grid_size);
            hits += all;
        }
        return static_cast<double>(hits) / static_cast<double>(n);
    };

    const double acc1 = joint_rate(1, 2000);
    const double acc2 = joint_rate(2, 3000);
    const double acc3 = joint_rate(3, 4000);
    const double elapsed = seconds_since(start);
    {
        char detail[200];
        std::snprintf(detail, sizeof(detail),
                      "joint accuracy %.2f%%/%.2f%%/%.2f%% for 1/2/3 conditions "
                      "(thresholds 99/97/95), %.1f s (budget 300 s)",
                      acc1 * 100.0, acc2 * 100.0, acc3 * 100.0, elapsed);
        report("desk-scale-accuracy",
               acc1 >= 0.99 && acc2 >= 0.97 && acc3 >= 0.95 && elapsed < 300.0, detail);
    }

    const double acc4 = joint_rate(4, 5000); // exceeds the 3-object training cap
    char detail[120];
    std::snprintf(detail, sizeof(detail), "4-condition joint rate %.2f%% (threshold 90%%)",
                  acc4 * 100.0);
    report("ood-composition", acc4 >= 0.90, detail);
}

// --- cost properties: evaluation counts and wall-clock ratio ---
void criterion_cost() {
    // exact counts on the default-size tabular model
    DatasetMeta meta;
    meta.num_samples = 500;
    Rng data_rng(1005);
    const Dataset ds = generate_dataset(meta, data_rng);
    const TabularModel tab = fit_tabular(ds, all_conditions(meta), 0.1);
    const test::CountingModel counting(tab);
    const std::vector<WeightedCondition> wconds{
        {{0, 0, 0}, 3.0}, {{1, 1, 1}, 3.0}, {{2, 2, 2}, 3.0}};
    Rng rng(1006);
    const auto [pstate, ptrace] = sample_parallel(counting, wconds, make_schedule(16, 8), 0.9, rng);
    bool per_step_ok = true;
    for (const auto& s : ptrace.steps) per_step_ok = per_step_ok && s.model_evaluations == 4;
    const bool par_total_ok =
        ptrace.total_model_evaluations() == 4 * 8 && counting.calls() == 4 * 8;
    const auto [astate, atrace] = sample_autoregressive(counting, wconds, 0.9, rng);
    const bool ar_total_ok = atrace.total_model_evaluations() == 4 * 16;

    // T=30, L=256: exact count ratio and measured wall clock on the MLP
    DatasetMeta big;
    big.grid_size = 16; // L = 256
    MlpConfig config;
    config.embed_dim = 16;
    config.hidden_dim = 64;
    Rng init_rng(1007);
    const MlpModel mlp(ModelShape::from_meta(big), config, init_rng);
    std::vector<WeightedCondition> big_conds{
        {{0, 0, 0}, 3.0}, {{5, 5, 1}, 3.0}, {{10, 10, 2}, 3.0}};
    BenchConfig bench;
    bench.steps = 30;
    bench.repeats = 3;
    bench.batch = 2;
    bench.seed = 1008;
    const auto reports = bench_sampling(mlp, big_conds, bench);
    const std::size_t par_evals = reports[0].evaluations_per_sample;  // (n+1) * 30
    const std::size_t ar_evals = reports[1].evaluations_per_sample;   // (n+1) * 256
    const bool count_ratio_ok = ar_evals * 30 == par_evals * 256;     // ratio exactly 256/30
    const double wall_ratio = reports[1].wall_mean_s / reports[0].wall_mean_s;

    char detail[220];
    std::snprintf(detail, sizeof(detail),
                  "per-step evals n+1: %s; totals %zu/%zu; T=30,L=256 counts %zu vs %zu "
                  "(ratio 256/30: %s); wall ratio %.1fx (must exceed 2)",
                  per_step_ok ? "yes" : "NO", ptrace.total_model_evaluations(),
                  atrace.total_model_evaluations(), par_evals, ar_evals,
                  count_ratio_ok ? "yes" : "NO", wall_ratio);
    report("cost-properties",
           per_step_ok && par_total_ok && ar_total_ok && count_ratio_ok && wall_ratio > 2.0,
           detail);
}

// --- gradient check on >= 100 random coordinates ---
void criterion_gradient() {
    DatasetMeta meta;
    meta.num_samples = 100;
    Rng data_rng(1009);
    const Dataset ds = generate_dataset(meta, data_rng);
    MlpConfig config;
    config.embed_dim = 8;
    config.hidden_dim = 16;
    Rng rng(1010);
    MlpModel model(ModelShape::from_meta(meta), config, rng);

    const Record& rec = ds.records[0];
    LatentState state(std::vector<std::int32_t>(rec.tokens));
    for (std::size_t s = 0; s < state.size(); s += 2) state.slots[s] = LatentState::kMasked;
    const std::optional<Condition> cond =
        Condition{rec.objects[0].row, rec.objects[0].col, rec.objects[0].color_id};

    const std::vector<double> grad = model.example_gradient(state, rec.tokens, cond);
    auto& params = model.parameters();
    const double h = 1e-5;
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::size_t trial = 0; trial < 150; ++trial) {
        const std::size_t i = uniform_below(rng, params.size());
        const double saved = params[i];
        params[i] = saved + h;
        const double up = model.example_loss(state, rec.tokens, cond);
        params[i] = saved - h;
        const double down = model.example_loss(state, rec.tokens, cond);
        params[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        const double denom = std::max({std::fabs(fd), std::fabs(grad[i]), 1e-8});
        worst = std::max(worst, std::fabs(fd - grad[i]) / denom);
        ++checked;
    }
    char detail[120];
    std::snprintf(detail, sizeof(detail), "max relative error %.3e over %zu coordinates (tol 1e-4)",
                  worst, checked);
    report("gradient-check", worst < 1e-4 && checked >= 100, detail);
}

// --- CLI determinism: identical flags -> byte-identical images ---
std::string find_cli() {
    if (const char* env = std::getenv("CTP_CLI")) return env;
    for (const char* guess : {"tools/ctp", "./ctp", "build/tools/ctp", "../tools/ctp"}) {
        if (fs::exists(guess)) return guess;
    }
    return "";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_determinism() {
    const std::string cli = find_cli();
    if (cli.empty()) {
        report("cli-determinism", false, "ctp binary not found (set CTP_CLI)");
        return;
    }
    const fs::path work = fs::temp_directory_path() / "ctp_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);
    const std::string data = (work / "data").string();
    const std::string ckpt = (work / "tab.ckpt").string();
    const std::string out = (work / "out").string();

    auto run = [&](const std::string& cmd) {
        const std::string full = cli + " " + cmd + " >/dev/null 2>&1";
        return std::system(full.c_str()) == 0;
    };
    bool ok = run("gen-data --grid 4 --colors 4 --max-objects 3 --n 2000 --seed 1 --out " + data);
    ok = ok && run("train tabular --data " + data + " --alpha 0.1 --out " + ckpt);
    const std::string sample_cmd = "sample --model " + ckpt +
                                   " --cond 1,1=2:w3.0 --cond 0,3=1:w3.0 --steps 4 --temp 0.9 "
                                   "--n 12 --seed 7 --out " + out;
    ok = ok && run(sample_cmd);
    std::map<std::string, std::string> first;
    if (ok) {
        for (const auto& entry : fs::directory_iterator(out)) {
            first[entry.path().filename().string()] = slurp(entry.path());
        }
        ok = run(sample_cmd); // same flags, same directory
    }
    std::size_t compared = 0;
    bool identical = ok && !first.empty();
    if (identical) {
        for (const auto& entry : fs::directory_iterator(out)) {
            const auto name = entry.path().filename().string();
            identical = identical && first.count(name) && first[name] == slurp(entry.path());
            ++compared;
        }
        identical = identical && compared == first.size();
    }
    char detail[120];
    std::snprintf(detail, sizeof(detail), "%zu output files byte-identical across two runs",
                  compared);
    report("cli-determinism", identical, ok ? detail : "pipeline command failed");
}

// --- vq properties on 1000 randomized cases each ---
void criterion_vq() {
    Rng rng(1011);
    bool ties_ok = true;
    for (std::size_t trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 2 + uniform_below(rng, 6);
        Codebook cb;
        cb.patch_size = 1;
        cb.channels = 2;
        cb.entries.resize(k);
        for (auto& e : cb.entries) e = {canonical(rng), canonical(rng)};
        const std::size_t a = uniform_below(rng, k);
        const std::size_t b = uniform_below(rng, k);
        cb.entries[b] = cb.entries[a];
        ties_ok = ties_ok && quantize(cb.entries[a], cb) == std::min(a, b);
    }

    bool idemp_ok = true;
    for (std::size_t trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 3 + uniform_below(rng, 8);
        Codebook cb;
        cb.patch_size = 2;
        cb.channels = 3;
        cb.entries.resize(k);
        for (auto& e : cb.entries) {
            e.resize(cb.dim());
            for (double& v : e) v = canonical(rng);
        }
        std::vector<std::int32_t> tokens(4);
        for (auto& t : tokens) t = static_cast<std::int32_t>(uniform_below(rng, k));
        const LatentState s(tokens);
        const Image img = decode(s, cb, 4, 4);
        idemp_ok = idemp_ok && encode(img, cb).slots == s.slots;
    }

    bool mono_ok = true;
    std::size_t mono_cases = 0;
    for (std::size_t trial = 0; trial < 120; ++trial) {
        std::vector<std::vector<double>> patches(50);
        for (auto& p : patches) p = {canonical(rng), canonical(rng), canonical(rng)};
        const KMeansResult res = learn_codebook(patches, 2 + uniform_below(rng, 5), 10, rng, 1, 3);
        const auto& d = res.distortion_per_iteration;
        for (std::size_t i = 1; i < d.size(); ++i) {
            mono_ok = mono_ok && d[i] <= d[i - 1] + 1e-12 * std::max(1.0, d[i - 1]);
            ++mono_cases;
        }
    }

    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "tie-break 1000 cases %s; idempotence 1000 cases %s; monotonicity %zu steps %s",
                  ties_ok ? "ok" : "FAIL", idemp_ok ? "ok" : "FAIL", mono_cases,
                  mono_ok ? "ok" : "FAIL");
    report("vq-properties", ties_ok && idemp_ok && mono_ok && mono_cases >= 1000, detail);
}

} // namespace

int main() {
    criterion_composition();
    criterion_closed_form();
    criterion_uncertainty();
    criterion_sampler_oracle();
    criterion_accuracy_and_ood();
    criterion_cost();
    criterion_gradient();
    criterion_determinism();
    criterion_vq();
    if (g_failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d criteria FAILED\n", g_failures);
    return 1;
}
