#include "ctp/vq.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <set>

#include <json.hpp>

namespace ctp {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        d += diff * diff;
    }
    return d;
}

} // namespace

std::size_t quantize(std::span<const double> v, const Codebook& codebook) {
    if (codebook.entries.empty()) throw DimensionMismatch("empty codebook");
    if (v.size() != codebook.dim()) {
        throw DimensionMismatch("vector dimension does not match codebook");
    }
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < codebook.entries.size(); ++j) {
        const double d = squared_distance(v, codebook.entries[j]);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

std::vector<std::vector<double>> extract_patches(const Image& img, std::size_t patch_size) {
    if (patch_size == 0 || img.width % patch_size != 0 || img.height % patch_size != 0) {
        throw ShapeError("image dimensions not divisible by patch size");
    }
    const std::size_t px = img.width / patch_size;
    const std::size_t py = img.height / patch_size;
    std::vector<std::vector<double>> patches;
    patches.reserve(px * py);
    for (std::size_t gy = 0; gy < py; ++gy) {
        for (std::size_t gx = 0; gx < px; ++gx) {
            std::vector<double> patch;
            patch.reserve(patch_size * patch_size * img.channels);
            for (std::size_t y = 0; y < patch_size; ++y) {
                for (std::size_t x = 0; x < patch_size; ++x) {
                    for (std::size_t c = 0; c < img.channels; ++c) {
                        patch.push_back(img.at(gx * patch_size + x, gy * patch_size + y, c));
                    }
                }
            }
            patches.push_back(std::move(patch));
        }
    }
    return patches;
}

LatentState encode(const Image& img, const Codebook& codebook) {
    if (img.channels != codebook.channels) {
        throw ShapeError("image channels do not match codebook");
    }
    const auto patches = extract_patches(img, codebook.patch_size);
    LatentState state(patches.size());
    for (std::size_t i = 0; i < patches.size(); ++i) {
        state.slots[i] = static_cast<std::int32_t>(quantize(patches[i], codebook));
    }
    return state;
}

Image decode(const LatentState& state, const Codebook& codebook,
             std::size_t width, std::size_t height) {
    if (!state.fully_unmasked()) throw MaskedStateError("cannot decode a masked state");
    const std::size_t p = codebook.patch_size;
    if (p == 0 || width % p != 0 || height % p != 0) {
        throw ShapeError("image dimensions not divisible by patch size");
    }
    const std::size_t px = width / p;
    const std::size_t py = height / p;
    if (state.size() != px * py) {
        throw ShapeError("token count does not match image dimensions");
    }
    Image img(width, height, codebook.channels);
    for (std::size_t i = 0; i < state.size(); ++i) {
        const std::int32_t tok = state.token(i);
        if (tok < 0 || static_cast<std::size_t>(tok) >= codebook.size()) {
            throw ShapeError("token index out of codebook range");
        }
        const auto& entry = codebook.entries[static_cast<std::size_t>(tok)];
        const std::size_t gx = i % px;
        const std::size_t gy = i / px;
        std::size_t e = 0;
        for (std::size_t y = 0; y < p; ++y) {
            for (std::size_t x = 0; x < p; ++x) {
                for (std::size_t c = 0; c < codebook.channels; ++c) {
                    img.at(gx * p + x, gy * p + y, c) = entry[e++];
                }
            }
        }
    }
    return img;
}

KMeansResult learn_codebook(const std::vector<std::vector<double>>& patches,
                            std::size_t k, std::size_t iterations, Rng& rng,
                            std::size_t patch_size, std::size_t channels) {
    if (k == 0) throw InsufficientData("codebook size must be positive");
    if (iterations == 0) throw Error("iterations must be >= 1");
    const std::size_t n = patches.size();
    if (n == 0) throw InsufficientData("no patches");
    const std::size_t d = patches[0].size();
    for (const auto& p : patches) {
        if (p.size() != d) throw DimensionMismatch("patches have inconsistent dimension");
    }
    {
        std::set<std::vector<double>> distinct(patches.begin(), patches.end());
        if (distinct.size() < k) {
            throw InsufficientData("fewer distinct patches than codebook entries");
        }
    }

    // Seeding: first centroid uniform, the rest proportional to squared
    // distance to the nearest chosen centroid.
    std::vector<std::vector<double>> centroids;
    centroids.reserve(k);
    std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
    centroids.push_back(patches[uniform_below(rng, n)]);
    while (centroids.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            min_d[i] = std::min(min_d[i], squared_distance(patches[i], centroids.back()));
            total += min_d[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            const double u = canonical(rng) * total;
            double cum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                cum += min_d[i];
                pick = i;
                if (u < cum) break;
            }
        } else {
            // all remaining mass at distance zero; fall back to uniform among
            // points (distinct-count precondition guarantees progress)
            pick = uniform_below(rng, n);
        }
        centroids.push_back(patches[pick]);
    }

    KMeansResult result;
    std::vector<std::size_t> assignment(n, 0);
    for (std::size_t it = 0; it < iterations; ++it) {
        // assignment step
        double distortion = 0.0;
        std::vector<double> point_d(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < k; ++j) {
                const double dist = squared_distance(patches[i], centroids[j]);
                if (dist < best_d) {
                    best_d = dist;
                    best = j;
                }
            }
            assignment[i] = best;
            point_d[i] = best_d;
            distortion += best_d;
        }
        result.distortion_per_iteration.push_back(distortion);

        // update step
        std::vector<std::vector<double>> sums(k, std::vector<double>(d, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            counts[assignment[i]]++;
            for (std::size_t e = 0; e < d; ++e) sums[assignment[i]][e] += patches[i][e];
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] == 0) continue;
            for (std::size_t e = 0; e < d; ++e) centroids[j][e] = sums[j][e] / counts[j];
        }
        // re-seed empty clusters from the farthest point
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] != 0) continue;
            std::size_t far = 0;
            for (std::size_t i = 1; i < n; ++i) {
                if (point_d[i] > point_d[far]) far = i;
            }
            centroids[j] = patches[far];
            point_d[far] = 0.0;
        }
    }

    result.codebook.patch_size = patch_size;
    result.codebook.channels = channels;
    result.codebook.entries = std::move(centroids);
    return result;
}

void save_codebook(const Codebook& codebook, const std::filesystem::path& path) {
    nlohmann::json j;
    j["version"] = 1;
    j["K"] = codebook.size();
    j["patch_size"] = codebook.patch_size;
    j["channels"] = codebook.channels;
    j["entries"] = codebook.entries;
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << j.dump(1) << "\n";
}

Codebook load_codebook(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    if (!j.contains("version") || j["version"].get<int>() != 1) {
        throw FormatError("unsupported codebook version");
    }
    Codebook cb;
    cb.patch_size = j["patch_size"].get<std::size_t>();
    cb.channels = j["channels"].get<std::size_t>();
    cb.entries = j["entries"].get<std::vector<std::vector<double>>>();
    if (cb.entries.size() != j["K"].get<std::size_t>()) {
        throw FormatError("codebook entry count does not match K");
    }
    for (const auto& e : cb.entries) {
        if (e.size() != cb.dim()) throw FormatError("codebook entry dimension mismatch");
        for (double v : e) {
            if (!std::isfinite(v)) throw FormatError("codebook entry not finite");
        }
    }
    return cb;
}

void write_ppm(const Image& img, const std::filesystem::path& path) {
    if (img.channels != 3) throw ShapeError("PPM output requires 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> row(img.width * 3);
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = std::floor(img.at(x, y, c) * 255.0 + 0.5);
                row[x * 3 + c] = static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
}

Image read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P6") throw FormatError("not a binary PPM (P6) file");
    auto next_token = [&in]() {
        // skips whitespace and '#' comments
        std::string tok;
        for (;;) {
            in >> tok;
            if (!in) throw FormatError("truncated PPM header");
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
    };
    const std::size_t w = std::stoul(next_token());
    const std::size_t h = std::stoul(next_token());
    const std::size_t maxval = std::stoul(next_token());
    if (maxval != 255) throw FormatError("unsupported PPM maxval");
    in.get();
    std::vector<unsigned char> data(w * h * 3);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (static_cast<std::size_t>(in.gcount()) != data.size()) {
        throw FormatError("truncated PPM pixel data");
    }
    Image img(w, h, 3);
    for (std::size_t i = 0; i < data.size(); ++i) {
        img.pixels[i] = static_cast<double>(data[i]) / 255.0;
    }
    return img;
}

} // namespace ctp
