#include <doctest.h>

#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

std::string cli_binary() {
    if (const char* env = std::getenv("CTP_CLI")) return env;
    return "";
}

int run(const std::string& args, const std::string& redirect = ">/dev/null 2>&1") {
    const std::string cmd = cli_binary() + " " + args + " " + redirect;
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Workspace {
    fs::path root;
    Workspace() {
        root = fs::temp_directory_path() / "ctp_cli_tests";
        fs::remove_all(root);
        fs::create_directories(root);
    }
    std::string path(const std::string& name) const { return (root / name).string(); }
};

} // namespace

TEST_CASE("cli: end-to-end pipeline, files, exit codes") {
    if (cli_binary().empty()) {
        MESSAGE("CTP_CLI not set; skipping CLI tests");
        return;
    }
    Workspace ws;

    SUBCASE("usage errors exit 1, runtime errors exit 2") {
        CHECK(run("no-such-command") == 1);
        CHECK(run("sample --model nothing.ckpt --seed 1 --out " + ws.path("x")) == 2);
        CHECK(run("--help") == 0);
    }

    SUBCASE("pipeline") {
        REQUIRE(run("gen-data --grid 4 --colors 4 --max-objects 3 --n 1000 --seed 1 --out " +
                    ws.path("data")) == 0);
        CHECK(fs::exists(ws.root / "data" / "dataset.jsonl"));
        CHECK(fs::exists(ws.root / "data" / "meta.json"));
        CHECK(fs::exists(ws.root / "data" / "manifest.json"));

        REQUIRE(run("train tabular --data " + ws.path("data") + " --alpha 0.1 --out " +
                    ws.path("tab.ckpt")) == 0);
        CHECK(fs::exists(ws.root / "tab.ckpt"));
        CHECK(fs::exists(ws.root / "tab.ckpt.manifest.json"));

        REQUIRE(run("train mlp --data " + ws.path("data") +
                    " --embed-dim 4 --hidden-dim 8 --steps 200 --seed 0 --out " +
                    ws.path("mlp.ckpt")) == 0);
        CHECK(fs::exists(ws.root / "mlp.ckpt"));

        // bad condition grammar is a usage error
        CHECK(run("sample --model " + ws.path("tab.ckpt") + " --cond bogus --seed 1 --out " +
                  ws.path("bad")) == 1);

        REQUIRE(run("sample --model " + ws.path("tab.ckpt") +
                    " --cond 1,1=2:w3.0 --cond 0,3=1 --steps 4 --n 5 --seed 7 --out " +
                    ws.path("samples")) == 0);
        for (int i = 0; i < 5; ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "sample_%05d.ppm", i);
            CHECK(fs::exists(ws.root / "samples" / name));
        }
        CHECK(fs::exists(ws.root / "samples" / "trace.json"));
        const auto trace = nlohmann::json::parse(slurp(ws.root / "samples" / "trace.json"));
        REQUIRE(trace.at("traces").size() == 5);
        // 2 conditions, 4 steps -> 12 evaluations per sample
        CHECK(trace["traces"][0]["total_model_evaluations"].get<int>() == 12);

        // sample fan-out must not depend on the worker count
        REQUIRE(run("sample --model " + ws.path("tab.ckpt") +
                    " --cond 1,1=2:w3.0 --n 6 --steps 4 --seed 3 --threads 1 --out " +
                    ws.path("t1")) == 0);
        REQUIRE(run("sample --model " + ws.path("tab.ckpt") +
                    " --cond 1,1=2:w3.0 --n 6 --steps 4 --seed 3 --threads 3 --out " +
                    ws.path("t3")) == 0);
        for (int i = 0; i < 6; ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "sample_%05d.ppm", i);
            CHECK(slurp(ws.root / "t1" / name) == slurp(ws.root / "t3" / name));
        }

        // eval prints the accuracy table with a +/- column
        REQUIRE(run("eval --model " + ws.path("tab.ckpt") +
                        " --components 2 --n 200 --steps 4 --seed 3 --out " + ws.path("eval"),
                    "> " + ws.path("eval_stdout.txt") + " 2>&1") == 0);
        const std::string eval_out = slurp(ws.root / "eval_stdout.txt");
        CHECK(eval_out.find("±") != std::string::npos);
        CHECK(fs::exists(ws.root / "eval" / "accuracy.json"));
        const auto report = nlohmann::json::parse(slurp(ws.root / "eval" / "accuracy.json"));
        CHECK(report.at("version") == 1);
        CHECK(report.at("n") == 200);

        REQUIRE(run("bench --model " + ws.path("mlp.ckpt") +
                    " --components 2 --steps 4 --repeats 3 --batch 2 --seed 5 --out " +
                    ws.path("bench")) == 0);
        const auto bench = nlohmann::json::parse(slurp(ws.root / "bench" / "bench.json"));
        REQUIRE(bench.at("reports").size() == 2);
        CHECK(bench["reports"][0]["evaluations_per_sample"].get<int>() == 3 * 4);   // (n+1)*T
        CHECK(bench["reports"][1]["evaluations_per_sample"].get<int>() == 3 * 16);  // (n+1)*L

        REQUIRE(run("sweep --model " + ws.path("tab.ckpt") +
                    " --cond 1,1=2 --n 4 --steps 4 --seed 9 --out " + ws.path("sweep")) == 0);
        for (const char* name : {"sweep_w-3.0.ppm", "sweep_w-2.0.ppm", "sweep_w-1.0.ppm",
                                 "sweep_w+0.0.ppm", "sweep_w+1.0.ppm", "sweep_w+2.0.ppm",
                                 "sweep_w+3.0.ppm"}) {
            CHECK(fs::exists(ws.root / "sweep" / name));
        }

        REQUIRE(run("neighbours --model " + ws.path("tab.ckpt") + " --data " + ws.path("data") +
                    " --n 2 --k 4 --steps 4 --seed 11 --limit 100 --out " +
                    ws.path("nb")) == 0);
        CHECK(fs::exists(ws.root / "nb" / "neighbours_00.ppm"));
        const auto nb = nlohmann::json::parse(slurp(ws.root / "nb" / "neighbours.json"));
        CHECK(nb.at("samples").size() == 2);
        CHECK(nb["samples"][0]["neighbours"].size() == 4);

        REQUIRE(run("learn-codebook --data " + ws.path("data") +
                    " --iters 8 --limit 100 --seed 2 --out " + ws.path("cb.json")) == 0);
        const auto cb = nlohmann::json::parse(slurp(ws.root / "cb.json"));
        CHECK(cb.at("K") == 5); // auto K = vocab for dataset input
    }
}
