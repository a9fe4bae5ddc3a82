#include "ctp/synthdata.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "meta_json.hpp"

namespace ctp {

Scene make_scene(std::size_t grid_size, std::vector<SceneObject> objects,
                 std::size_t num_colors, std::size_t max_objects) {
    if (objects.empty()) throw InvalidScene("scene must contain at least one object");
    if (objects.size() > max_objects) throw InvalidScene("scene exceeds max_objects");
    std::set<std::pair<std::size_t, std::size_t>> cells;
    for (const SceneObject& o : objects) {
        if (o.row >= grid_size || o.col >= grid_size) throw InvalidScene("object cell out of grid");
        if (o.color_id >= num_colors) throw InvalidScene("object color out of range");
        if (!cells.insert({o.row, o.col}).second) throw InvalidScene("two objects share a cell");
    }
    return Scene{grid_size, std::move(objects)};
}

Scene generate_scene(const DatasetMeta& meta, Rng& rng) {
    const std::size_t cells = meta.grid_size * meta.grid_size;
    if (meta.max_objects > cells) throw InvalidScene("max_objects exceeds grid capacity");
    const std::size_t count =
        static_cast<std::size_t>(uniform_int(rng, 1, static_cast<std::int64_t>(meta.max_objects)));
    const std::vector<std::size_t> picked = sample_without_replacement(rng, cells, count);
    std::vector<SceneObject> objects(count);
    for (std::size_t i = 0; i < count; ++i) {
        objects[i].row = picked[i] / meta.grid_size;
        objects[i].col = picked[i] % meta.grid_size;
        objects[i].color_id = uniform_below(rng, meta.num_colors);
    }
    return make_scene(meta.grid_size, std::move(objects), meta.num_colors, meta.max_objects);
}

LatentState scene_to_tokens(const Scene& scene) {
    LatentState state(scene.grid_size * scene.grid_size);
    for (auto& s : state.slots) s = 0;
    for (const SceneObject& o : scene.objects) {
        state.slots[o.row * scene.grid_size + o.col] = static_cast<std::int32_t>(o.color_id + 1);
    }
    return state;
}

Scene tokens_to_scene(const LatentState& state, std::size_t grid_size) {
    if (state.size() != grid_size * grid_size) throw ShapeError("state length is not grid_size^2");
    if (!state.fully_unmasked()) throw MaskedStateError("cannot rebuild a scene from a masked state");
    std::vector<SceneObject> objects;
    for (std::size_t i = 0; i < state.size(); ++i) {
        const std::int32_t tok = state.token(i);
        if (tok == 0) continue;
        objects.push_back({i / grid_size, i % grid_size, static_cast<std::size_t>(tok - 1)});
    }
    if (objects.empty()) throw InvalidScene("state contains no objects");
    return Scene{grid_size, std::move(objects)};
}

bool check_condition(const LatentState& state, const Condition& cond, std::size_t grid_cols) {
    const std::size_t slot = cond.row * grid_cols + cond.col;
    if (slot >= state.size()) throw ShapeError("condition cell outside state");
    if (state.is_masked(slot)) return false;
    return state.token(slot) == static_cast<std::int32_t>(cond.color_id + 1);
}

Dataset generate_dataset(const DatasetMeta& meta, Rng& rng) {
    Dataset ds;
    ds.meta = meta;
    ds.records.reserve(meta.num_samples);
    for (std::size_t i = 0; i < meta.num_samples; ++i) {
        const Scene scene = generate_scene(meta, rng);
        Record rec;
        rec.tokens = scene_to_tokens(scene).slots;
        rec.objects = scene.objects;
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "meta.json");
        if (!out) throw Error("cannot write dataset meta");
        out << meta_to_json(dataset.meta).dump(1) << "\n";
    }
    std::ofstream out(dir / "dataset.jsonl");
    if (!out) throw Error("cannot write dataset records");
    for (const Record& rec : dataset.records) {
        nlohmann::json j;
        j["tokens"] = rec.tokens;
        auto& objs = j["objects"] = nlohmann::json::array();
        for (const SceneObject& o : rec.objects) {
            objs.push_back({{"r", o.row}, {"c", o.col}, {"color", o.color_id}});
        }
        out << j.dump() << "\n";
    }
}

Dataset load_dataset(const std::filesystem::path& dir) {
    Dataset ds;
    {
        std::ifstream in(dir / "meta.json");
        if (!in) throw Error("cannot open dataset meta in " + dir.string());
        nlohmann::json j;
        in >> j;
        ds.meta = meta_from_json(j);
    }
    std::ifstream in(dir / "dataset.jsonl");
    if (!in) throw Error("cannot open dataset records in " + dir.string());
    std::string line;
    const std::size_t length = ds.meta.sequence_length();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        Record rec;
        rec.tokens = j["tokens"].get<std::vector<std::int32_t>>();
        if (rec.tokens.size() != length) throw FormatError("record token length mismatch");
        for (const auto& o : j["objects"]) {
            rec.objects.push_back({o["r"].get<std::size_t>(), o["c"].get<std::size_t>(),
                                   o["color"].get<std::size_t>()});
        }
        // integrity: tokens must be the rendering of the object list
        const Scene scene = make_scene(ds.meta.grid_size, rec.objects, ds.meta.num_colors,
                                       ds.meta.max_objects);
        if (scene_to_tokens(scene).slots != rec.tokens) {
            throw FormatError("record tokens inconsistent with object list");
        }
        ds.records.push_back(std::move(rec));
    }
    if (ds.records.size() != ds.meta.num_samples) {
        throw FormatError("record count does not match dataset meta");
    }
    return ds;
}

std::vector<Condition> all_conditions(const DatasetMeta& meta) {
    std::vector<Condition> conds;
    conds.reserve(meta.grid_size * meta.grid_size * meta.num_colors);
    for (std::size_t r = 0; r < meta.grid_size; ++r) {
        for (std::size_t c = 0; c < meta.grid_size; ++c) {
            for (std::size_t k = 0; k < meta.num_colors; ++k) {
                conds.push_back({r, c, k});
            }
        }
    }
    return conds;
}

std::vector<Condition> draw_condition_set(const DatasetMeta& meta, std::size_t n, Rng& rng) {
    const std::size_t cells = meta.grid_size * meta.grid_size;
    if (n > cells) throw InvalidScene("more conditions than grid cells");
    const std::vector<std::size_t> picked = sample_without_replacement(rng, cells, n);
    std::vector<Condition> conds(n);
    for (std::size_t i = 0; i < n; ++i) {
        conds[i].row = picked[i] / meta.grid_size;
        conds[i].col = picked[i] % meta.grid_size;
        conds[i].color_id = uniform_below(rng, meta.num_colors);
    }
    return conds;
}

namespace {

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
    const double c = v * s;
    const double hp = h * 6.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1)      { r = c; g = x; }
    else if (hp < 2) { r = x; g = c; }
    else if (hp < 3) { g = c; b = x; }
    else if (hp < 4) { g = x; b = c; }
    else if (hp < 5) { r = x; b = c; }
    else             { r = c; b = x; }
    const double m = v - c;
    return {r + m, g + m, b + m};
}

} // namespace

Codebook make_palette_codebook(std::size_t num_colors, std::size_t patch_size) {
    Codebook cb;
    cb.patch_size = patch_size;
    cb.channels = 3;
    cb.entries.resize(num_colors + 1);
    auto fill = [&](std::size_t idx, const std::array<double, 3>& rgb) {
        auto& entry = cb.entries[idx];
        entry.resize(cb.dim());
        for (std::size_t i = 0; i < patch_size * patch_size; ++i) {
            entry[i * 3 + 0] = rgb[0];
            entry[i * 3 + 1] = rgb[1];
            entry[i * 3 + 2] = rgb[2];
        }
    };
    fill(0, {0.12, 0.12, 0.12});
    for (std::size_t k = 0; k < num_colors; ++k) {
        fill(k + 1, hsv_to_rgb(static_cast<double>(k) / static_cast<double>(num_colors), 0.85, 0.95));
    }
    return cb;
}

Image render_tokens(const LatentState& state, std::size_t grid_size, const Codebook& palette) {
    const std::size_t side = grid_size * palette.patch_size;
    return decode(state, palette, side, side);
}

} // namespace ctp
