#pragma once

#include "stmforge/models.hpp"

#include <array>
#include <string>
#include <vector>

namespace stmforge {

double mse_metric(const Patch& a, const Patch& b);

// Mean local SSIM over 11x11 Gaussian windows (sigma 1.5), reflected at
// the borders, C1=(0.01L)^2 and C2=(0.03L)^2 with L=1. Both inputs are
// first mapped onto [0,1] by one shared affine transform of their joint
// range, so simultaneous rescaling of the pair leaves the score unchanged.
double ssim_metric(const Patch& a, const Patch& b);

struct MetricRecord {
    std::string lattice;
    std::string config;
    double avg_mse = 0.0;
    double avg_ssim = 0.0;
};

// Averages mse/ssim of (input, reconstruction) over all patches.
MetricRecord evaluate(Network& net, const ModelSpec& spec,
                      const std::vector<Patch>& patches, const std::string& lattice,
                      const std::string& config_name);

struct PcaProjection {
    std::array<std::array<double, 10>, 3> components{};
    std::array<double, 3> explained_variance{};
    std::vector<std::array<double, 3>> points;
};

// Mean-centers, eigen-decomposes the 10x10 covariance and projects every
// latent onto the top-3 principal directions. Needs at least 4 vectors.
PcaProjection pca_project(const std::vector<std::vector<float>>& latents);

} // namespace stmforge
