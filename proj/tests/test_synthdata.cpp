#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ctp/synthdata.hpp"
#include "test_util.hpp"

using namespace ctp;

TEST_CASE("generate_scene: ranges and distinctness") {
    DatasetMeta meta;
    meta.grid_size = 3;
    meta.num_colors = 4;
    meta.max_objects = 2;
    Rng rng(40);
    for (int trial = 0; trial < 500; ++trial) {
        const Scene s = generate_scene(meta, rng);
        CHECK(s.objects.size() >= 1);
        CHECK(s.objects.size() <= 2);
        std::set<std::pair<std::size_t, std::size_t>> cells;
        for (const SceneObject& o : s.objects) {
            CHECK(o.row < 3);
            CHECK(o.col < 3);
            CHECK(o.color_id < 4);
            CHECK(cells.insert({o.row, o.col}).second);
        }
    }
}

TEST_CASE("generate_scene: deterministic per seed, forced singleton grid") {
    DatasetMeta meta;
    Rng a(41), b(41);
    CHECK(generate_scene(meta, a) == generate_scene(meta, b));

    DatasetMeta one;
    one.grid_size = 1;
    one.max_objects = 1;
    Rng rng(42);
    const Scene s = generate_scene(one, rng);
    REQUIRE(s.objects.size() == 1);
    CHECK(s.objects[0].row == 0);
    CHECK(s.objects[0].col == 0);
}

TEST_CASE("scene_to_tokens: definition and placement count") {
    const Scene s = make_scene(3, {{1, 1, 2}}, 4, 3);
    const LatentState tokens = scene_to_tokens(s);
    CHECK(tokens.slots == std::vector<std::int32_t>{0, 0, 0, 0, 3, 0, 0, 0, 0});

    Rng rng(43);
    DatasetMeta meta;
    for (int trial = 0; trial < 200; ++trial) {
        const Scene scene = generate_scene(meta, rng);
        const LatentState t = scene_to_tokens(scene);
        std::size_t nonzero = 0;
        for (auto tok : t.slots) nonzero += tok != 0;
        CHECK(nonzero == scene.objects.size());
    }
}

TEST_CASE("make_scene rejects invalid scenes") {
    CHECK_THROWS_AS(make_scene(3, {}, 4, 3), InvalidScene);
    CHECK_THROWS_AS(make_scene(3, {{0, 0, 0}, {0, 0, 1}}, 4, 3), InvalidScene);
    CHECK_THROWS_AS(make_scene(3, {{3, 0, 0}}, 4, 3), InvalidScene);
    CHECK_THROWS_AS(make_scene(3, {{0, 0, 4}}, 4, 3), InvalidScene);
    CHECK_THROWS_AS(make_scene(3, {{0, 0, 0}, {0, 1, 1}, {1, 0, 2}, {1, 1, 3}}, 4, 3),
                    InvalidScene);
}

TEST_CASE("tokens_to_scene inverts scene_to_tokens") {
    Rng rng(44);
    DatasetMeta meta;
    for (int trial = 0; trial < 300; ++trial) {
        const Scene scene = generate_scene(meta, rng);
        Scene back = tokens_to_scene(scene_to_tokens(scene), meta.grid_size);
        // object order is canonical (raster) after the round trip
        auto sorted = scene.objects;
        std::sort(sorted.begin(), sorted.end(), [](const SceneObject& a, const SceneObject& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        CHECK(back.objects == sorted);
    }
}

TEST_CASE("check_condition: match, mismatch, masked") {
    LatentState state(std::vector<std::int32_t>{0, 0, 0, 0, 3, 0, 0, 0, 0});
    CHECK(check_condition(state, {1, 1, 2}, 3));
    CHECK_FALSE(check_condition(state, {1, 1, 1}, 3));
    CHECK_FALSE(check_condition(state, {0, 0, 2}, 3));

    state.slots[4] = LatentState::kMasked;
    CHECK_FALSE(check_condition(state, {1, 1, 2}, 3));
}

TEST_CASE("every generated sample satisfies its own object conditions") {
    DatasetMeta meta;
    meta.num_samples = 500;
    Rng rng(45);
    const Dataset ds = generate_dataset(meta, rng);
    for (const Record& rec : ds.records) {
        const LatentState state(std::vector<std::int32_t>(rec.tokens));
        for (const SceneObject& o : rec.objects) {
            CHECK(check_condition(state, {o.row, o.col, o.color_id}, meta.grid_size));
        }
    }
}

TEST_CASE("dataset serialization round-trips bit-exactly") {
    DatasetMeta meta;
    meta.num_samples = 200;
    Rng rng(46);
    const Dataset ds = generate_dataset(meta, rng);
    const auto dir = std::filesystem::temp_directory_path() / "ctp_test_dataset";
    save_dataset(ds, dir);
    const Dataset back = load_dataset(dir);
    CHECK(back.meta.grid_size == meta.grid_size);
    CHECK(back.records == ds.records);

    // byte-exact re-serialization
    const auto dir2 = std::filesystem::temp_directory_path() / "ctp_test_dataset2";
    save_dataset(back, dir2);
    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    CHECK(slurp(dir / "dataset.jsonl") == slurp(dir2 / "dataset.jsonl"));
    CHECK(slurp(dir / "meta.json") == slurp(dir2 / "meta.json"));
}

TEST_CASE("load_dataset rejects unknown versions and inconsistent records") {
    DatasetMeta meta;
    meta.num_samples = 5;
    Rng rng(47);
    const Dataset ds = generate_dataset(meta, rng);
    const auto dir = std::filesystem::temp_directory_path() / "ctp_test_dataset_bad";
    save_dataset(ds, dir);

    {
        std::ofstream out(dir / "meta.json");
        out << R"({"version":9,"grid_size":4,"num_colors":4,"vocab":5,"max_objects":3,"num_samples":5})";
    }
    CHECK_THROWS_AS(load_dataset(dir), FormatError);
}

TEST_CASE("draw_condition_set: distinct cells, valid colors") {
    DatasetMeta meta;
    Rng rng(48);
    for (int trial = 0; trial < 200; ++trial) {
        const auto conds = draw_condition_set(meta, 4, rng);
        REQUIRE(conds.size() == 4);
        std::set<std::pair<std::size_t, std::size_t>> cells;
        for (const Condition& c : conds) {
            CHECK(c.row < meta.grid_size);
            CHECK(c.col < meta.grid_size);
            CHECK(c.color_id < meta.num_colors);
            CHECK(cells.insert({c.row, c.col}).second);
        }
    }
}

TEST_CASE("palette rendering round-trips through encode") {
    DatasetMeta meta;
    const Codebook palette = make_palette_codebook(meta.num_colors, 4);
    REQUIRE(palette.size() == meta.vocab());
    Rng rng(49);
    for (int trial = 0; trial < 50; ++trial) {
        const Scene scene = generate_scene(meta, rng);
        const LatentState tokens = scene_to_tokens(scene);
        const Image img = render_tokens(tokens, meta.grid_size, palette);
        CHECK(encode(img, palette).slots == tokens.slots);
    }
}
