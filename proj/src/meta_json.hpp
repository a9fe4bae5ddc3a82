#pragma once

#include <json.hpp>

#include "ctp/errors.hpp"
#include "ctp/synthdata.hpp"

namespace ctp {

inline nlohmann::json meta_to_json(const DatasetMeta& meta) {
    return nlohmann::json{
        {"version", meta.version},
        {"grid_size", meta.grid_size},
        {"num_colors", meta.num_colors},
        {"vocab", meta.vocab()},
        {"max_objects", meta.max_objects},
        {"num_samples", meta.num_samples},
    };
}

inline DatasetMeta meta_from_json(const nlohmann::json& j) {
    if (!j.contains("version") || j["version"].get<int>() != 1) {
        throw FormatError("unsupported dataset meta version");
    }
    DatasetMeta meta;
    meta.version = 1;
    meta.grid_size = j["grid_size"].get<std::size_t>();
    meta.num_colors = j["num_colors"].get<std::size_t>();
    meta.max_objects = j["max_objects"].get<std::size_t>();
    meta.num_samples = j["num_samples"].get<std::size_t>();
    if (j["vocab"].get<std::size_t>() != meta.vocab()) {
        throw FormatError("dataset meta vocab must equal num_colors + 1");
    }
    return meta;
}

} // namespace ctp
