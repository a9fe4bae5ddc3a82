#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ctp/errors.hpp"
#include "ctp/latent.hpp"
#include "ctp/rng.hpp"
#include "ctp/vq.hpp"

namespace ctp {

// Mini-CLEVR: colored objects on a G x G grid. Token 0 is the empty cell;
// token k+1 is color k.

struct SceneObject {
    std::size_t row = 0;
    std::size_t col = 0;
    std::size_t color_id = 0;

    bool operator==(const SceneObject&) const = default;
};

struct Condition {
    std::size_t row = 0;
    std::size_t col = 0;
    std::size_t color_id = 0;

    bool operator==(const Condition&) const = default;
    auto operator<=>(const Condition&) const = default;
};

struct DatasetMeta {
    std::size_t grid_size = 4;
    std::size_t num_colors = 4;
    std::size_t max_objects = 3;
    std::size_t num_samples = 20000;
    int version = 1;

    std::size_t vocab() const { return num_colors + 1; }
    std::size_t sequence_length() const { return grid_size * grid_size; }
};

struct Scene {
    std::size_t grid_size = 0;
    std::vector<SceneObject> objects;

    bool operator==(const Scene&) const = default;
};

// Validates cell ranges, color range, distinct cells, 1 <= count <= max_objects.
Scene make_scene(std::size_t grid_size, std::vector<SceneObject> objects,
                 std::size_t num_colors, std::size_t max_objects);

// Object count uniform on [1, max_objects]; cells uniform without
// replacement; colors uniform on [0, C).
Scene generate_scene(const DatasetMeta& meta, Rng& rng);

LatentState scene_to_tokens(const Scene& scene);
Scene tokens_to_scene(const LatentState& state, std::size_t grid_size);

// True iff the slot at (row, col) is unmasked and holds color_id + 1.
// Masked slots fail the check.
bool check_condition(const LatentState& state, const Condition& cond, std::size_t grid_cols);

struct Record {
    std::vector<std::int32_t> tokens;
    std::vector<SceneObject> objects;

    bool operator==(const Record&) const = default;
};

struct Dataset {
    DatasetMeta meta;
    std::vector<Record> records;
};

Dataset generate_dataset(const DatasetMeta& meta, Rng& rng);

// dataset.jsonl (one record per line) plus meta.json sidecar in `dir`.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

// All (cell, color) conditions for the grid.
std::vector<Condition> all_conditions(const DatasetMeta& meta);

// n conditions at distinct cells, colors uniform.
std::vector<Condition> draw_condition_set(const DatasetMeta& meta, std::size_t n, Rng& rng);

// Fixed rendering palette: token 0 maps to the background color, token k+1 to
// a hue-spaced color for color k. Entries are constant patch_size^2 tiles, so
// decode() renders a token grid directly.
Codebook make_palette_codebook(std::size_t num_colors, std::size_t patch_size = kDefaultPatchSize);

Image render_tokens(const LatentState& state, std::size_t grid_size, const Codebook& palette);

} // namespace ctp
