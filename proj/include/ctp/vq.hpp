#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ctp/errors.hpp"
#include "ctp/latent.hpp"
#include "ctp/rng.hpp"

namespace ctp {

inline constexpr std::size_t kDefaultPatchSize = 4;
inline constexpr std::size_t kDefaultChannels = 3;
inline constexpr std::size_t kDefaultCodebookSize = 256;

// Row-major interleaved pixels in [0, 1].
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;
    std::vector<double> pixels;

    Image() = default;
    Image(std::size_t w, std::size_t h, std::size_t c)
        : width(w), height(h), channels(c), pixels(w * h * c, 0.0) {}

    double& at(std::size_t x, std::size_t y, std::size_t c) {
        return pixels[(y * width + x) * channels + c];
    }
    double at(std::size_t x, std::size_t y, std::size_t c) const {
        return pixels[(y * width + x) * channels + c];
    }
};

// K vectors of dimension patch_size^2 * channels, pixel units in [0, 1].
struct Codebook {
    std::size_t patch_size = kDefaultPatchSize;
    std::size_t channels = kDefaultChannels;
    std::vector<std::vector<double>> entries;

    std::size_t size() const { return entries.size(); }
    std::size_t dim() const { return patch_size * patch_size * channels; }
};

// Index of the nearest codebook entry in Euclidean distance, ties broken by
// lowest index.
std::size_t quantize(std::span<const double> v, const Codebook& codebook);

// Non-overlapping patch_size x patch_size tiles, row-major over the patch
// grid; each patch flattened row-major with channel varying fastest.
std::vector<std::vector<double>> extract_patches(const Image& img, std::size_t patch_size);

LatentState encode(const Image& img, const Codebook& codebook);

Image decode(const LatentState& state, const Codebook& codebook,
             std::size_t width, std::size_t height);

struct KMeansResult {
    Codebook codebook;
    // Total squared distortion measured after each assignment step.
    std::vector<double> distortion_per_iteration;
};

// Lloyd's k-means with distance-proportional seeding. Empty clusters are
// re-seeded from the point farthest from its assigned centroid.
KMeansResult learn_codebook(const std::vector<std::vector<double>>& patches,
                            std::size_t k, std::size_t iterations, Rng& rng,
                            std::size_t patch_size = kDefaultPatchSize,
                            std::size_t channels = kDefaultChannels);

// Codebook file: {"version":1, "K", "patch_size", "channels", "entries"}.
void save_codebook(const Codebook& codebook, const std::filesystem::path& path);
Codebook load_codebook(const std::filesystem::path& path);

// Binary PPM (P6, maxval 255). Pixels are rounded half-up from [0,1]*255.
void write_ppm(const Image& img, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

} // namespace ctp
