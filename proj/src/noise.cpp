#include "stmforge/noise.hpp"

#include "stmforge/image.hpp"
#include "stmforge/rng.hpp"

#include <algorithm>
#include <cmath>

namespace stmforge {

std::vector<ProjectedAtom> jitter_atoms(const std::vector<ProjectedAtom>& atoms,
                                        const NoiseParams& params) {
    if (params.pos_jitter == 0.0 && params.brightness_jitter == 0.0) return atoms;
    Rng rng(params.seed, "jitter");
    std::vector<ProjectedAtom> out = atoms;
    for (auto& a : out) {
        if (params.pos_jitter > 0.0) {
            a.u += params.pos_jitter * rng.normal();
            a.v += params.pos_jitter * rng.normal();
        }
        if (params.brightness_jitter > 0.0) {
            a.brightness *= std::max(0.0, 1.0 + params.brightness_jitter * rng.normal());
        }
    }
    return out;
}

SimImage gaussian_noise(const SimImage& img, const NoiseParams& params) {
    if (params.gaussian_strength == 0.0) return img;
    Rng rng(params.seed, "gaussian");
    SimImage out = img;
    for (auto& p : out.pixels) {
        p = std::clamp(p + static_cast<float>(params.gaussian_strength * rng.normal()),
                       0.0f, 1.0f);
    }
    return out;
}

SimImage poisson_noise(const SimImage& img, const NoiseParams& params) {
    if (params.poisson_strength == 0.0) return img;
    Rng rng(params.seed, "poisson");
    const double scale = 255.0 / params.poisson_strength;
    SimImage out = img;
    for (auto& p : out.pixels) {
        const double counts = static_cast<double>(rng.poisson(p * scale));
        p = std::clamp(static_cast<float>(counts / scale), 0.0f, 1.0f);
    }
    return out;
}

std::vector<double> striation_offsets(int rows, const NoiseParams& params) {
    Rng rng(params.seed, "striation");
    std::vector<double> raw(static_cast<std::size_t>(rows));
    for (auto& g : raw) g = rng.normal();
    // Moving average over an 8-row window shrinks the variance by the
    // window size; rescale so the smoothed sequence stays unit-variance.
    constexpr int kWindow = 8;
    std::vector<double> smooth(raw.size());
    for (int r = 0; r < rows; ++r) {
        double sum = 0.0;
        int n = 0;
        for (int k = r - kWindow / 2; k < r - kWindow / 2 + kWindow; ++k) {
            if (k < 0 || k >= rows) continue;
            sum += raw[static_cast<std::size_t>(k)];
            ++n;
        }
        smooth[static_cast<std::size_t>(r)] =
            params.striation_strength * (sum / n) * std::sqrt(static_cast<double>(n));
    }
    return smooth;
}

SimImage striation_noise(const SimImage& img, const NoiseParams& params) {
    if (params.striation_strength == 0.0) return img;
    const auto offsets = striation_offsets(img.height, params);
    SimImage out = img;
    for (int r = 0; r < out.height; ++r) {
        const float o = static_cast<float>(offsets[static_cast<std::size_t>(r)]);
        for (int c = 0; c < out.width; ++c) {
            out.at(r, c) = std::clamp(out.at(r, c) + o, 0.0f, 1.0f);
        }
    }
    return out;
}

SimImage apply_noise_pipeline(const SimImage& img, const NoiseParams& params) {
    SimImage out = poisson_noise(img, params);
    out = gaussian_noise(out, params);
    out = striation_noise(out, params);
    out.meta.noise = params;
    return out;
}

} // namespace stmforge
