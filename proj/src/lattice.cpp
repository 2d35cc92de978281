#include "stmforge/lattice.hpp"

#include "stmforge/errors.hpp"

#include <cmath>

namespace stmforge {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::string lattice_name(LatticeType t) {
    switch (t) {
        case LatticeType::SimpleCubic: return "sc";
        case LatticeType::BCC: return "bcc";
        case LatticeType::FCC: return "fcc";
        case LatticeType::Hex1: return "hex1";
        case LatticeType::Hex2: return "hex2";
    }
    throw ConfigError("unknown lattice variant");
}

LatticeType lattice_from_name(const std::string& name) {
    if (name == "sc" || name == "cubic" || name == "simple-cubic") return LatticeType::SimpleCubic;
    if (name == "bcc") return LatticeType::BCC;
    if (name == "fcc") return LatticeType::FCC;
    if (name == "hex1") return LatticeType::Hex1;
    if (name == "hex2") return LatticeType::Hex2;
    throw ConfigError("unknown lattice name: " + name);
}

double spread_for(LatticeType t) {
    switch (t) {
        case LatticeType::SimpleCubic: return 10.0;
        case LatticeType::BCC: return 13.0;
        case LatticeType::FCC: return 18.0;
        case LatticeType::Hex1: return 14.0;
        case LatticeType::Hex2: return 10.0;
    }
    throw ConfigError("unknown lattice variant");
}

double OrientationAngles::alpha_eff() const { return alpha_raw * kPi / 3.0; }
double OrientationAngles::theta_eff() const { return theta_raw * kPi / 3.0; }
double OrientationAngles::phi_eff() const { return phi_raw * kPi; }

static void check_grid_args(double a, int extent) {
    if (a <= 0.0) throw ConfigError("lattice constant must be positive");
    if (extent < 0) throw ConfigError("extent must be non-negative");
}

static std::vector<AtomSite> hex_rows(double a, int extent, double row_spacing) {
    check_grid_args(a, extent);
    std::vector<AtomSite> sites;
    sites.reserve(static_cast<std::size_t>(2 * extent + 1) * static_cast<std::size_t>(2 * extent + 1));
    for (int k = -extent; k <= extent; ++k) {
        const double y = k * row_spacing;
        const double shift = (k % 2 != 0) ? a / 2.0 : 0.0;
        for (int j = -extent; j <= extent; ++j) {
            sites.push_back({j * a + shift, y, 0.0});
        }
    }
    return sites;
}

std::vector<AtomSite> hex1_grid(double a, int extent) {
    return hex_rows(a, extent, 3.0 * a / 2.0);
}

std::vector<AtomSite> hex2_grid(double a, int extent) {
    return hex_rows(a, extent, 2.0 * a);
}

std::vector<AtomSite> cubic_grid(LatticeType lattice, double a, int extent) {
    check_grid_args(a, extent);
    if (lattice != LatticeType::SimpleCubic && lattice != LatticeType::BCC &&
        lattice != LatticeType::FCC) {
        throw ConfigError("cubic_grid requires a cubic lattice variant");
    }
    std::vector<AtomSite> sites;
    // Shared corners of the cell grid, on both slab faces.
    for (int i = -extent; i <= extent; ++i) {
        for (int j = -extent; j <= extent; ++j) {
            sites.push_back({i * a, j * a, 0.0});
            sites.push_back({i * a, j * a, a});
        }
    }
    // Per-cell basis sites; cells indexed by their lower corner.
    for (int i = -extent; i < extent; ++i) {
        for (int j = -extent; j < extent; ++j) {
            const double x0 = i * a;
            const double y0 = j * a;
            if (lattice == LatticeType::BCC) {
                sites.push_back({x0 + a / 2.0, y0 + a / 2.0, a / 2.0});
            } else if (lattice == LatticeType::FCC) {
                sites.push_back({x0 + a / 2.0, y0 + a / 2.0, 0.0});
                sites.push_back({x0 + a / 2.0, y0 + a / 2.0, a});
                sites.push_back({x0 + a / 2.0, y0, a / 2.0});
                sites.push_back({x0, y0 + a / 2.0, a / 2.0});
            }
        }
    }
    return sites;
}

double tilt_height(double x, double y, const OrientationAngles& angles) {
    return std::tan(angles.alpha_eff()) *
           (x * std::cos(angles.theta_eff()) + y * std::sin(angles.theta_eff()));
}

std::array<double, 3> plane_normal(const OrientationAngles& angles) {
    const double ta = std::tan(angles.alpha_eff());
    return {ta * std::cos(angles.theta_eff()), ta * std::sin(angles.theta_eff()), -1.0};
}

ProjectedAtom project_to_plane(const AtomSite& site, const OrientationAngles& angles,
                               bool use_floor) {
    const auto n = plane_normal(angles);
    const double zc = use_floor ? std::floor(site.z) : site.z;
    const std::array<double, 3> points = {-site.x, -site.y, -zc};

    const double nn = n[0] * n[0] + n[1] * n[1] + n[2] * n[2];
    const double pn = points[0] * n[0] + points[1] * n[1] + points[2] * n[2];
    const double c = pn / nn;
    const std::array<double, 3> proj = {c * n[0], c * n[1], c * n[2]};
    const double dist =
        std::sqrt(proj[0] * proj[0] + proj[1] * proj[1] + proj[2] * proj[2]);

    // In-plane remainder expressed in a fixed orthonormal basis:
    // e1 along (cos t, sin t, tan a), which lies in the plane, e2 = N x e1.
    const double ct = std::cos(angles.theta_eff());
    const double st = std::sin(angles.theta_eff());
    const double ta = std::tan(angles.alpha_eff());
    std::array<double, 3> e1 = {ct, st, ta};
    const double e1n = std::sqrt(e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]);
    for (auto& c1 : e1) c1 /= e1n;
    std::array<double, 3> e2 = {n[1] * e1[2] - n[2] * e1[1],
                                n[2] * e1[0] - n[0] * e1[2],
                                n[0] * e1[1] - n[1] * e1[0]};
    const double e2n = std::sqrt(e2[0] * e2[0] + e2[1] * e2[1] + e2[2] * e2[2]);
    for (auto& c2 : e2) c2 /= e2n;

    const std::array<double, 3> in_plane = {points[0] - proj[0], points[1] - proj[1],
                                            points[2] - proj[2]};
    ProjectedAtom out;
    out.u = in_plane[0] * e1[0] + in_plane[1] * e1[1] + in_plane[2] * e1[2];
    out.v = in_plane[0] * e2[0] + in_plane[1] * e2[1] + in_plane[2] * e2[2];
    out.dist = dist;
    out.brightness = 1.0;
    return out;
}

std::array<double, 3> projection_vector(const AtomSite& site, const OrientationAngles& angles,
                                        bool use_floor) {
    const auto n = plane_normal(angles);
    const double zc = use_floor ? std::floor(site.z) : site.z;
    const std::array<double, 3> points = {-site.x, -site.y, -zc};
    const double nn = n[0] * n[0] + n[1] * n[1] + n[2] * n[2];
    const double c = (points[0] * n[0] + points[1] * n[1] + points[2] * n[2]) / nn;
    return {c * n[0], c * n[1], c * n[2]};
}

std::pair<double, double> rotate2d(double proj_x, double proj_y, double phi_raw) {
    const double phi = phi_raw * kPi;
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    return {c * proj_x + s * proj_y, -s * proj_x + c * proj_y};
}

} // namespace stmforge
