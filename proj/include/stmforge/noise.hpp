#pragma once

#include "stmforge/lattice.hpp"

#include <cstdint>
#include <vector>

namespace stmforge {

struct SimImage;

struct NoiseParams {
    double gaussian_strength = 0.0;   // additive intensity std-dev
    double poisson_strength = 0.0;    // larger = noisier; 0 disables
    double striation_strength = 0.0;  // row-offset amplitude
    double pos_jitter = 0.0;          // positional std-dev, image units
    double brightness_jitter = 0.0;   // multiplicative std-dev
    std::uint64_t seed = 0;
};

// Perturbs atom positions by N(0, pos_jitter^2) and scales brightness by
// max(0, 1 + N(0, brightness_jitter^2)).
std::vector<ProjectedAtom> jitter_atoms(const std::vector<ProjectedAtom>& atoms,
                                        const NoiseParams& params);

SimImage gaussian_noise(const SimImage& img, const NoiseParams& params);

// pixel' = Poisson(pixel * S) / S with S = 255 / poisson_strength.
SimImage poisson_noise(const SimImage& img, const NoiseParams& params);

// Row-constant offsets from a moving-average-smoothed (window 8)
// unit-variance Gaussian sequence, scaled by striation_strength.
SimImage striation_noise(const SimImage& img, const NoiseParams& params);

// Row offsets used by striation_noise, exposed for statistical checks.
std::vector<double> striation_offsets(int rows, const NoiseParams& params);

// poisson -> gaussian -> striation, each on its own (seed, stage) substream.
SimImage apply_noise_pipeline(const SimImage& img, const NoiseParams& params);

} // namespace stmforge
