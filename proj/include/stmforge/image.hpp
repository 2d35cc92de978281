#pragma once

#include "stmforge/lattice.hpp"
#include "stmforge/noise.hpp"

#include <string>
#include <vector>

namespace stmforge {

constexpr int kCanvas = 256;

struct ImageMeta {
    LatticeSpec spec;
    NoiseParams noise;
    double psf_sigma = 3.0;
    double brightness_falloff = 0.5; // b0 in exp(-dist^2 / (2 b0^2))
    bool use_floor = true;
    bool empty_atoms = false;
};

// Intensity image in [0,1], row-major.
struct SimImage {
    int width = kCanvas;
    int height = kCanvas;
    std::vector<float> pixels; // height * width
    ImageMeta meta;

    static SimImage zeros(int w = kCanvas, int h = kCanvas);
    float& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
    float at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
};

} // namespace stmforge
