#pragma once

#include <string>
#include <vector>

#include "talbot/geometry.hpp"
#include "talbot/optics.hpp"

namespace talbot::analysis {

// Talbot plane label: the axial position normalized to the Talbot length,
// as a signed fraction in lowest terms with denominator 1, 2 or 4.
struct PlaneLabel {
    int numerator = 0;
    int denominator = 1;

    static PlaneLabel make(int numerator, int denominator);
    static PlaneLabel parse(const std::string& text);

    double fraction() const { return static_cast<double>(numerator) / denominator; }
    bool is_integer() const { return denominator == 1; }
    bool is_half_integer() const { return denominator == 2; }
    std::string str() const; // "0", "1/2", "-3/4"

    auto operator<=>(const PlaneLabel&) const = default;
};

// Nearest fraction n/d of z / z_T with d in {1, 2, 4} limited by
// max_denominator; ties resolve toward the smaller denominator.
PlaneLabel classify_plane(double z_m, double z_talbot_m, int max_denominator = 4);

struct TrapSite {
    Vec2 position_m;
    double z_m = 0.0;
    double waist_m = 0.0;
    double rel_depth = 0.0; // peak intensity normalized to the slice maximum
    PlaneLabel plane;
    SiteIndex site_index{-1, -1}; // filled by assign_site_indices
};

struct ExtractOptions {
    double min_rel_depth = 0.1;
    double expected_waist_m = 0.0;  // 0 = estimate per peak from the 1/e^2 radius
    double talbot_length_m = 0.0;   // 0 = leave plane labels at T_0
    int max_denominator = 4;
};

// Local intensity maxima above min_rel_depth * slice maximum, refined to
// sub-sample precision by per-axis log-parabola interpolation (exact for
// Gaussian peaks); waist from a radial Gaussian fit on a patch of radius
// 2.5 expected waists. No maxima above threshold yields an empty list.
std::vector<TrapSite> extract_traps(const optics::ScalarField& slice, const ExtractOptions& options);
std::vector<TrapSite> extract_traps(const optics::ScalarField& slice, double min_rel_depth);

struct PitchFit {
    double pitch_x_m = 0.0;
    double pitch_y_m = 0.0;
    // Lattice origin reduced into [0, pitch) per axis.
    Vec2 offset_m;
};

// Least-squares lattice-vector fit of a near-regular axis-aligned grid.
PitchFit estimate_pitch(const std::vector<TrapSite>& sites);

// Circular difference a - b reduced into [-period/2, period/2).
double wrap_to_period(double value, double period);

struct FidelityResult {
    double fidelity = 0.0;
    Vec2 shift_m; // translation that maps `a` onto `b`
};

// Maximum normalized cross-correlation of the two intensity patterns over
// cyclic lateral shifts, with the maximizing shift at sub-sample precision.
FidelityResult self_image_fidelity(const optics::ScalarField& a, const optics::ScalarField& b);

// Central crop retaining `fraction` of the extent per axis.
optics::ScalarField central_region(const optics::ScalarField& field, double fraction = 0.5);

// Assigns lattice indices by rounding positions against a pitch fit.
void assign_site_indices(std::vector<TrapSite>& sites, const PitchFit& fit);

// CSV with header x_m,y_m,z_m,waist_m,rel_depth,plane,i,j.
std::string traps_to_csv(const std::vector<TrapSite>& sites);

}  // namespace talbot::analysis
