#pragma once

#include "stmforge/image.hpp"

#include <vector>

namespace stmforge {

struct RenderConfig {
    double psf_sigma = 3.0;          // Gaussian blob width, pixels
    double brightness_falloff = -1.0; // b0 in exp(-dist^2/(2 b0^2)); <=0 means a/2
    int canvas = kCanvas;
};

// Scales (u,v) by spread_for(lattice), centers the pattern on the canvas
// and splats Gaussian blobs. Overlaps combine by max; the result is
// clamped to [0,1]; off-canvas atoms are cropped.
SimImage render(const std::vector<ProjectedAtom>& atoms, LatticeType lattice,
                const RenderConfig& config);

// Full pipeline: grid -> tilt -> projection -> in-plane rotation -> jitter
// -> render -> noise. Orientation angles are drawn from the spec seed when
// draw_angles is set, otherwise spec.angles is used verbatim.
SimImage simulate_image(LatticeSpec spec, const NoiseParams& noise,
                        const RenderConfig& config, bool use_floor = true,
                        bool draw_angles = true);

} // namespace stmforge
