#pragma once

#include <complex>
#include <vector>

#include "talbot/geometry.hpp"

namespace talbot::optics {

// Geometric and optical parameters of the microlens source and its relay.
// All lengths in meters, angles in radians. Zero means "not specified" for
// the optional members; validate() enforces the required ones.
struct OpticalConfig {
    double wavelength_m = 0.0;
    double pitch_a_m = 0.0;            // lattice pitch after reimaging
    double mla_pitch_m = 0.0;          // generating lenslet pitch before reimaging
    double lenslet_focal_f0_m = 0.0;   // lenslet focal length (0 = unknown)
    double lenslet_diameter_m = 0.0;   // 0 = equal to mla_pitch
    double illumination_waist_m = 0.0; // beam waist at the MLA (0 = uniform illumination)
    double demagnification_M = 1.0;
    double tilt_theta_rad = 0.0;       // incidence tilt step between successive beams
    int beam_count = 1;
    double interspace_transmission = 0.0; // amplitude transmission between lenslets

    // Throws ConfigError on invalid or mutually inconsistent values.
    void validate() const;

    // Pitch after reimaging, derived from mla_pitch when pitch_a is unset.
    double effective_pitch_m() const;
};

// Axial self-imaging period 2 a^2 / lambda.
double talbot_length(double pitch_a_m, double wavelength_m);

// Uniform sampling grid in a transverse plane. Row-major storage with x as
// the fast axis; pixel (ix, iy) sits at (x_at(ix), y_at(iy)).
struct GridSpec {
    int nx = 0;
    int ny = 0;
    double dx_m = 0.0;
    double dy_m = 0.0;
    double center_x_m = 0.0;
    double center_y_m = 0.0;

    double x_at(int ix) const { return center_x_m + (ix - 0.5 * (nx - 1)) * dx_m; }
    double y_at(int iy) const { return center_y_m + (iy - 0.5 * (ny - 1)) * dy_m; }
    double extent_x_m() const { return nx * dx_m; }
    double extent_y_m() const { return ny * dy_m; }
    std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
    bool same_geometry(const GridSpec& o, double rel_tol = 1e-12) const;

    void validate() const;
};

// Sampled complex amplitude at an axial position z (relative to the
// reimaged focal plane for carpet slices).
struct ScalarField {
    GridSpec grid;
    double z_m = 0.0;
    std::vector<std::complex<double>> amplitude;

    std::complex<double>& at(int ix, int iy) { return amplitude[static_cast<std::size_t>(iy) * grid.nx + ix]; }
    const std::complex<double>& at(int ix, int iy) const {
        return amplitude[static_cast<std::size_t>(iy) * grid.nx + ix];
    }

    // Total power sum |A|^2 dx dy.
    double power() const;
    std::vector<double> intensity() const;
};

// One focus of the generating array, modeled as a paraxial Gaussian beam.
// A nonzero tilt drifts the beam center linearly in (z - focus_z) and adds
// the corresponding transverse wavefront tilt.
struct GaussianBeamlet {
    Vec2 center_m;
    double waist_w0_m = 0.0;
    double focus_z_m = 0.0;
    double amplitude = 1.0;
    double phase_rad = 0.0;
    Vec2 tilt_rad;
};

struct TalbotCarpet {
    OpticalConfig config;
    std::vector<ScalarField> slices; // monotonically increasing z, shared grid
};

// Centered rows x cols beamlet array for one illumination beam.
// Beam index 0 is the untilted reference beam; beam k is tilted by
// k * tilt_theta along `tilt_azimuth`, which displaces the reimaged foci by
// M * theta_k * f0 and tilts the beamlet axes by theta_k / M.
// Amplitudes carry the illumination envelope sampled at the lenslet centers.
std::vector<GaussianBeamlet> make_beamlet_array(const OpticalConfig& config, int rows, int cols,
                                                double trap_waist_w0_m, int beam_index = 0,
                                                Vec2 tilt_azimuth = {0.7071067811865476, 0.7071067811865476});

// Power-of-two grid covering the array span plus a guard band on each side.
GridSpec make_grid(const OpticalConfig& config, int rows, int cols, double trap_waist_w0_m,
                   double samples_per_waist = 16.0, double guard_pitches = 8.0);

// Coherent superposition of the beamlets evaluated at plane z.
// Requires the grid to resolve the smallest waist with >= 8 samples.
ScalarField beam_array_field(const std::vector<GaussianBeamlet>& beamlets, const GridSpec& grid,
                             double wavelength_m, double z_m, int threads = 1);

// Complex transmission of the lenslet array: thin-lens quadratic phase
// exp(-i pi r^2 / (lambda f0)) inside each aperture, flat
// interspace_transmission outside. Grid coordinates are in the MLA plane.
ScalarField mla_phase_mask(const OpticalConfig& config, const GridSpec& grid);

struct PropagationOptions {
    // Maximum tolerated fraction of spectral power beyond the propagating
    // band. More than this indicates an undersampled (aliased) field.
    double evanescent_power_tolerance = 1e-6;
};

// Exact scalar propagation by the angular-spectrum transfer function
// H = exp(i 2 pi dz sqrt(1/lambda^2 - fx^2 - fy^2)); evanescent components
// are truncated. Negative dz propagates backward.
ScalarField propagate_angular_spectrum(const ScalarField& field, double wavelength_m, double delta_z_m,
                                       const PropagationOptions& options = {});

// Relay reimaging: lateral coordinates scale by M, axial by M^2; amplitude
// rescales to conserve power.
ScalarField apply_reimaging(const ScalarField& field, double magnification);
std::vector<GaussianBeamlet> apply_reimaging(const std::vector<GaussianBeamlet>& beamlets, double magnification);
TalbotCarpet apply_reimaging(const TalbotCarpet& carpet, double magnification);
// Fills pitch_a from mla_pitch and records M.
OpticalConfig apply_reimaging(const OpticalConfig& config, double magnification);

enum class CarpetModel {
    beamlets,         // analytic Gaussian-beamlet superposition (default)
    mask_propagation, // MLA mask + angular-spectrum propagation
};

struct CarpetOptions {
    CarpetModel model = CarpetModel::beamlets;
    int array_rows = 8;
    int array_cols = 8;
    double trap_waist_w0_m = 0.0; // focus waist in reimaged space; required for the beamlet model
    double samples_per_waist = 16.0;
    double guard_pitches = 8.0;
    int beam_index = 0;
    Vec2 tilt_azimuth{0.7071067811865476, 0.7071067811865476};
    int threads = 1;
    // Lenslet apertures are broadband; the mask model tolerates (and
    // truncates) their evanescent edge content.
    PropagationOptions propagation{0.05};
};

// Slices of the (reimaged) carpet at the requested z positions, which must
// be sorted ascending. All slices share one grid.
TalbotCarpet compute_carpet(const OpticalConfig& config, const std::vector<double>& z_samples_m,
                            const CarpetOptions& options);

}  // namespace talbot::optics
