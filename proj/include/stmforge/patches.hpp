#pragma once

#include "stmforge/image.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace stmforge {

struct PatchSource {
    int image_id = 0;
    int row = 0;
    int col = 0;
    bool operator==(const PatchSource&) const = default;
};

struct Patch {
    int size = 0;              // P; values are P*P, row-major
    std::vector<float> values; // in [-1, 1] after normalization
    PatchSource source;
};

// Maps the image range [x_min, x_max] affinely onto [-1, 1]. Throws
// DataError on a constant image.
std::vector<float> normalize(const std::vector<float>& values);

// All patches with full PxP coverage at offsets (i*stride, j*stride).
std::vector<Patch> extract_patches(const std::vector<float>& img, int img_size,
                                   int patch_size, int stride, int image_id = 0);

// One of the eight dihedral symmetries: rotation from {0,90,180,270} then
// independent coin-flip horizontal and vertical flips.
Patch augment(const Patch& patch, std::uint64_t seed);

struct DatasetSplit {
    std::vector<Patch> train;
    std::vector<Patch> val;
    double split_fraction = 0.9;
    std::uint64_t seed = 0;
};

// Subsamples patches_per_image patches per image without replacement, then
// splits by patch. Deterministic given seed.
DatasetSplit build_dataset(const std::vector<SimImage>& images, int patch_size,
                           int stride, int patches_per_image, double split_fraction,
                           std::uint64_t seed);

// Patch archive: "STMP1" magic, P and count as 32-bit LE, then row-major
// 32-bit LE floats.
void write_patch_archive(const std::vector<Patch>& patches,
                         const std::filesystem::path& path);
std::vector<Patch> read_patch_archive(const std::filesystem::path& path);

} // namespace stmforge
