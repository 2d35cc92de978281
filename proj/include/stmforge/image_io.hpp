#pragma once

#include "stmforge/image.hpp"

#include <filesystem>

namespace stmforge {

// 8-bit binary PGM (P5, maxval 255, row-major); intensities scaled by 255.
void write_pgm(const SimImage& img, const std::filesystem::path& path);
SimImage read_pgm(const std::filesystem::path& path);

// Raw 32-bit little-endian floats, row-major.
void write_f32(const SimImage& img, const std::filesystem::path& path);
std::vector<float> read_f32(const std::filesystem::path& path);

// JSON sidecar of generation metadata (lattice, angles, seed, noise).
void write_sidecar(const SimImage& img, const std::filesystem::path& path);
ImageMeta read_sidecar(const std::filesystem::path& path);

} // namespace stmforge
