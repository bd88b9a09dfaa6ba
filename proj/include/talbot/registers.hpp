#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "talbot/analysis.hpp"
#include "talbot/geometry.hpp"
#include "talbot/optics.hpp"

namespace talbot::registers {

using analysis::PlaneLabel;

struct RegisterSite {
    SiteIndex index;
    Vec2 position_m;
};

// Ordered site set of one Talbot plane, forming an addressable lattice.
// Sites are stored in lexicographic (i, j) order and sit at
// origin_offset + pitch * (i, j).
struct Register {
    std::string name;
    std::vector<RegisterSite> sites;
    PlaneLabel plane;
    double pitch_m = 0.0;
    int sublattice_id = 0;
    Vec2 origin_offset_m;

    int site_ordinal(SiteIndex index) const; // -1 when absent
    const RegisterSite* find(SiteIndex index) const;
};

// Quadratic grid at the reimaged pitch. Half-integer principal planes are
// offset by (a/2, a/2); fractional (denominator-4) planes are analysis-only
// and rejected here.
Register build_register(const optics::OpticalConfig& config, PlaneLabel plane, int rows, int cols);

struct InterleaveSpec {
    double tilt_theta_rad = 0.0;
    double lenslet_focal_f0_m = 0.0;
    PlaneLabel plane;
    double z_talbot_pre_m = 0.0;    // Talbot length before reimaging
    double demagnification_M = 1.0;
    double frequency_offset_hz = 0.0; // must be > 0: beams combine incoherently
    Vec2 azimuth{0.7071067811865476, 0.7071067811865476};
};

// Lateral displacement of the tilted beam's sublattice:
// M * theta * (f0 + |plane fraction| * z_T_pre) along the tilt azimuth.
// The focal length is effectively enlarged by the plane's axial separation
// from the focal plane before reimaging.
Vec2 interleave_displacement(const InterleaveSpec& spec);

struct InterleaveResult {
    Register sublattice;
    Vec2 displacement_m;   // as applied (possibly wrapped)
    Vec2 raw_displacement_m;
    bool wrapped = false;  // displacement exceeded the pitch and was reduced
};

// Displaced copy of `base` for a second illumination beam sharing the plane.
InterleaveResult interleave(const Register& base, const InterleaveSpec& spec);

struct SeparationViolation {
    std::size_t register_a = 0;
    std::size_t register_b = 0;
    SiteIndex site_a;
    SiteIndex site_b;
    double distance_m = 0.0;
};

// All cross-register site pairs with distance < min_sep (strict: a pair at
// exactly min_sep does not violate). Empty result means the composite
// register keeps its traps independent.
std::vector<SeparationViolation> validate_separation(const std::vector<Register>& registers,
                                                     double min_sep_m = 3e-6);

// Minimal nearest-neighbor distance over the union of all sites.
double composite_pitch(const std::vector<Register>& registers);

nlohmann::json register_to_json(const Register& reg);
Register register_from_json(const nlohmann::json& j);

}  // namespace talbot::registers
