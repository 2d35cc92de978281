#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace stmforge {

enum class LatticeType {
    SimpleCubic,
    BCC,
    FCC,
    Hex1,
    Hex2,
};

constexpr std::array<LatticeType, 5> kAllLattices = {
    LatticeType::SimpleCubic, LatticeType::BCC, LatticeType::FCC,
    LatticeType::Hex1, LatticeType::Hex2};

std::string lattice_name(LatticeType t);
LatticeType lattice_from_name(const std::string& name); // throws ConfigError

// Per-lattice scale factor applied to projected 2D coordinates.
double spread_for(LatticeType t);

// Raw orientation draws in [0,1]. Effective angles: tilt and rotation are
// scaled by pi/3, the in-plane rotation by pi.
struct OrientationAngles {
    double alpha_raw = 0.0;
    double theta_raw = 0.0;
    double phi_raw = 0.0;

    double alpha_eff() const;
    double theta_eff() const;
    double phi_eff() const;
};

struct LatticeSpec {
    LatticeType lattice = LatticeType::SimpleCubic;
    double a = 1.0;       // lattice constant, image units
    OrientationAngles angles;
    int extent = 20;      // site-count half-width
    std::uint64_t seed = 0;
};

struct AtomSite {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0; // tilt-plane height (plus any basis offset) at (x, y)
};

struct ProjectedAtom {
    double u = 0.0;
    double v = 0.0;
    double dist = 0.0;         // distance from the intersection plane
    double brightness = 1.0;   // multiplicative scale, jittered by noise
};

// Hexagonal grid: rows at y = k*(3a/2), sites along x at intervals a,
// odd rows shifted by a/2. Returns (2*extent+1)^2 sites.
std::vector<AtomSite> hex1_grid(double a, int extent);

// Same row construction with row spacing 2a (spaced-out rows).
std::vector<AtomSite> hex2_grid(double a, int extent);

// Conventional-cell cubic slabs, one cell thick in z. SC: corners only;
// BCC adds the body center; FCC adds the three face centers per cell.
std::vector<AtomSite> cubic_grid(LatticeType lattice, double a, int extent);

// Tilt-plane height z = tan(alpha)*(x cos(theta) + y sin(theta)).
double tilt_height(double x, double y, const OrientationAngles& angles);

// Normal of the tilt plane: (tan a cos t, tan a sin t, -1).
std::array<double, 3> plane_normal(const OrientationAngles& angles);

// Projects a site onto the plane normal and expresses the in-plane
// remainder in a fixed orthonormal basis. When use_floor is set the point
// vector uses floor(z) for its z component.
ProjectedAtom project_to_plane(const AtomSite& site, const OrientationAngles& angles,
                               bool use_floor = true);

// The projection of the point vector onto the plane normal, before the
// in-plane basis change. dist above is the magnitude of this vector.
std::array<double, 3> projection_vector(const AtomSite& site, const OrientationAngles& angles,
                                        bool use_floor = true);

// In-plane rotation by phi_raw*pi with the row convention
// [[cos, sin], [-sin, cos]].
std::pair<double, double> rotate2d(double proj_x, double proj_y, double phi_raw);

} // namespace stmforge
