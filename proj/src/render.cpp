#include "stmforge/render.hpp"

#include "stmforge/errors.hpp"
#include "stmforge/rng.hpp"

#include <algorithm>
#include <cmath>

namespace stmforge {

SimImage SimImage::zeros(int w, int h) {
    SimImage img;
    img.width = w;
    img.height = h;
    img.pixels.assign(static_cast<std::size_t>(w) * h, 0.0f);
    return img;
}

SimImage render(const std::vector<ProjectedAtom>& atoms, LatticeType lattice,
                const RenderConfig& config) {
    if (config.psf_sigma <= 0.0) throw ConfigError("psf_sigma must be positive");
    if (config.brightness_falloff <= 0.0) throw ConfigError("brightness_falloff must be positive");
    SimImage img = SimImage::zeros(config.canvas, config.canvas);
    img.meta.spec.lattice = lattice;
    img.meta.psf_sigma = config.psf_sigma;
    img.meta.brightness_falloff = config.brightness_falloff;
    if (atoms.empty()) {
        img.meta.empty_atoms = true;
        return img;
    }

    const double spread = spread_for(lattice);
    double cu = 0.0, cv = 0.0;
    for (const auto& a : atoms) {
        cu += a.u;
        cv += a.v;
    }
    cu /= static_cast<double>(atoms.size());
    cv /= static_cast<double>(atoms.size());

    const double center = config.canvas / 2.0;
    const double b0 = config.brightness_falloff;
    const int radius = static_cast<int>(std::ceil(4.0 * config.psf_sigma));
    const double inv2s2 = 1.0 / (2.0 * config.psf_sigma * config.psf_sigma);

    for (const auto& a : atoms) {
        const double px = (a.u - cu) * spread + center;
        const double py = (a.v - cv) * spread + center;
        double peak = std::exp(-a.dist * a.dist / (2.0 * b0 * b0)) * a.brightness;
        peak = std::clamp(peak, 0.0, 1.0);
        if (peak <= 0.0) continue;

        const int c0 = std::max(0, static_cast<int>(std::floor(px)) - radius);
        const int c1 = std::min(config.canvas - 1, static_cast<int>(std::ceil(px)) + radius);
        const int r0 = std::max(0, static_cast<int>(std::floor(py)) - radius);
        const int r1 = std::min(config.canvas - 1, static_cast<int>(std::ceil(py)) + radius);
        for (int r = r0; r <= r1; ++r) {
            const double dy = r - py;
            for (int c = c0; c <= c1; ++c) {
                const double dx = c - px;
                const double value = peak * std::exp(-(dx * dx + dy * dy) * inv2s2);
                float& pix = img.at(r, c);
                pix = std::max(pix, static_cast<float>(value));
            }
        }
    }
    for (auto& p : img.pixels) p = std::clamp(p, 0.0f, 1.0f);
    return img;
}

SimImage simulate_image(LatticeSpec spec, const NoiseParams& noise,
                        const RenderConfig& config, bool use_floor, bool draw_angles) {
    if (spec.a <= 0.0) throw ConfigError("lattice constant must be positive");
    if (draw_angles) {
        Rng rng(spec.seed, "angles");
        spec.angles.alpha_raw = rng.uniform();
        spec.angles.theta_raw = rng.uniform();
        spec.angles.phi_raw = rng.uniform();
    }

    std::vector<AtomSite> sites;
    switch (spec.lattice) {
        case LatticeType::Hex1: sites = hex1_grid(spec.a, spec.extent); break;
        case LatticeType::Hex2: sites = hex2_grid(spec.a, spec.extent); break;
        default: sites = cubic_grid(spec.lattice, spec.a, spec.extent); break;
    }

    std::vector<ProjectedAtom> atoms;
    atoms.reserve(sites.size());
    for (auto site : sites) {
        // Basis offsets (cubic z) ride on top of the tilt-plane height.
        site.z += tilt_height(site.x, site.y, spec.angles);
        ProjectedAtom p = project_to_plane(site, spec.angles, use_floor);
        auto [u, v] = rotate2d(p.u, p.v, spec.angles.phi_raw);
        p.u = u;
        p.v = v;
        atoms.push_back(p);
    }

    NoiseParams keyed = noise;
    keyed.seed = mix_seed(spec.seed, hash_tag("noise"));
    atoms = jitter_atoms(atoms, keyed);

    RenderConfig rc = config;
    if (rc.brightness_falloff <= 0.0) rc.brightness_falloff = spec.a / 2.0;
    SimImage img = render(atoms, spec.lattice, rc);
    img.meta.spec = spec;
    img.meta.use_floor = use_floor;
    img.meta.noise = keyed;
    return apply_noise_pipeline(img, keyed);
}

} // namespace stmforge
