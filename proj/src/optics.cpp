#include "talbot/optics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include "talbot/errors.hpp"
#include "talbot/parallel.hpp"

namespace talbot::optics {

namespace {

constexpr double kPi = std::numbers::pi;

int next_pow2(double n) {
    int p = 1;
    while (p < n && p < (1 << 24)) p *= 2;
    return p;
}

}  // namespace

void OpticalConfig::validate() const {
    if (wavelength_m <= 0.0) throw ConfigError("wavelength must be positive");
    if (pitch_a_m <= 0.0 && mla_pitch_m <= 0.0) throw ConfigError("either pitch_a or mla_pitch must be given");
    if (pitch_a_m < 0.0 || mla_pitch_m < 0.0) throw ConfigError("pitches must be non-negative");
    if (demagnification_M <= 0.0) throw ConfigError("demagnification M must be positive");
    if (pitch_a_m > 0.0 && mla_pitch_m > 0.0) {
        const double derived = demagnification_M * mla_pitch_m;
        if (std::abs(derived - pitch_a_m) > 1e-9 + 1e-6 * pitch_a_m)
            throw ConfigError("pitch_a inconsistent with demagnification_M * mla_pitch");
    }
    if (lenslet_diameter_m > 0.0 && mla_pitch_m > 0.0 && lenslet_diameter_m > mla_pitch_m + 1e-12)
        throw ConfigError("lenslet diameter exceeds MLA pitch");
    if (beam_count < 1) throw ConfigError("beam_count must be >= 1");
    if (interspace_transmission < 0.0 || interspace_transmission > 1.0)
        throw ConfigError("interspace_transmission must be in [0, 1]");
    if (illumination_waist_m < 0.0) throw ConfigError("illumination waist must be non-negative");
}

double OpticalConfig::effective_pitch_m() const {
    if (pitch_a_m > 0.0) return pitch_a_m;
    return demagnification_M * mla_pitch_m;
}

double talbot_length(double pitch_a_m, double wavelength_m) {
    if (pitch_a_m <= 0.0 || wavelength_m <= 0.0)
        throw std::domain_error("talbot_length requires positive pitch and wavelength");
    return 2.0 * pitch_a_m * pitch_a_m / wavelength_m;
}

void GridSpec::validate() const {
    if (nx < 2 || ny < 2) throw ConfigError("grid needs at least 2x2 samples");
    if (dx_m <= 0.0 || dy_m <= 0.0) throw ConfigError("grid spacing must be positive");
}

bool GridSpec::same_geometry(const GridSpec& o, double rel_tol) const {
    auto close = [rel_tol](double a, double b) { return std::abs(a - b) <= rel_tol * std::max(1.0, std::abs(a)); };
    return nx == o.nx && ny == o.ny && close(dx_m, o.dx_m) && close(dy_m, o.dy_m) &&
           close(center_x_m, o.center_x_m) && close(center_y_m, o.center_y_m);
}

double ScalarField::power() const {
    double s = 0.0;
    for (const auto& a : amplitude) s += std::norm(a);
    return s * grid.dx_m * grid.dy_m;
}

std::vector<double> ScalarField::intensity() const {
    std::vector<double> out(amplitude.size());
    for (std::size_t k = 0; k < amplitude.size(); ++k) out[k] = std::norm(amplitude[k]);
    return out;
}

std::vector<GaussianBeamlet> make_beamlet_array(const OpticalConfig& config, int rows, int cols,
                                                double trap_waist_w0_m, int beam_index, Vec2 tilt_azimuth) {
    config.validate();
    if (rows < 1 || cols < 1) throw ConfigError("beamlet array needs at least one row and column");
    if (trap_waist_w0_m <= 0.0) throw ConfigError("trap waist must be positive");
    if (beam_index < 0 || beam_index >= config.beam_count) throw ConfigError("beam index out of range");

    const double pitch = config.effective_pitch_m();
    const double pre_pitch = config.mla_pitch_m > 0.0 ? config.mla_pitch_m : pitch / config.demagnification_M;
    const double theta = beam_index * config.tilt_theta_rad;

    Vec2 focus_shift{0.0, 0.0};
    Vec2 tilt{0.0, 0.0};
    if (theta != 0.0) {
        if (config.lenslet_focal_f0_m <= 0.0)
            throw ConfigError("tilted beams require the lenslet focal length f0");
        const double az = tilt_azimuth.norm();
        if (az <= 0.0) throw ConfigError("tilt azimuth must be a nonzero vector");
        const Vec2 u = tilt_azimuth / az;
        focus_shift = config.demagnification_M * theta * config.lenslet_focal_f0_m * u;
        tilt = (theta / config.demagnification_M) * u;
    }

    std::vector<GaussianBeamlet> beamlets;
    beamlets.reserve(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const double gi = c - 0.5 * (cols - 1);
            const double gj = r - 0.5 * (rows - 1);
            GaussianBeamlet b;
            b.center_m = Vec2{gi * pitch, gj * pitch} + focus_shift;
            b.waist_w0_m = trap_waist_w0_m;
            b.focus_z_m = 0.0;
            b.tilt_rad = tilt;
            if (config.illumination_waist_m > 0.0) {
                const double rho2 = (gi * gi + gj * gj) * pre_pitch * pre_pitch;
                b.amplitude = std::exp(-rho2 / (config.illumination_waist_m * config.illumination_waist_m));
            }
            beamlets.push_back(b);
        }
    }
    return beamlets;
}

GridSpec make_grid(const OpticalConfig& config, int rows, int cols, double trap_waist_w0_m,
                   double samples_per_waist, double guard_pitches) {
    config.validate();
    if (trap_waist_w0_m <= 0.0) throw ConfigError("trap waist must be positive");
    if (samples_per_waist < 8.0) throw SamplingError("fewer than 8 samples per waist requested");
    const double pitch = config.effective_pitch_m();
    const double span = (std::max(rows, cols) - 1) * pitch + 2.0 * guard_pitches * pitch;
    const double dx = trap_waist_w0_m / samples_per_waist;
    const int n = next_pow2(span / dx);
    GridSpec grid;
    grid.nx = n;
    grid.ny = n;
    grid.dx_m = dx;
    grid.dy_m = dx;
    return grid;
}

ScalarField beam_array_field(const std::vector<GaussianBeamlet>& beamlets, const GridSpec& grid,
                             double wavelength_m, double z_m, int threads) {
    grid.validate();
    if (wavelength_m <= 0.0) throw std::domain_error("wavelength must be positive");
    if (beamlets.empty()) throw ConfigError("beamlet list is empty");

    double w_min = beamlets.front().waist_w0_m;
    for (const auto& b : beamlets) {
        if (b.waist_w0_m <= 0.0) throw ConfigError("beamlet waist must be positive");
        w_min = std::min(w_min, b.waist_w0_m);
    }
    if (grid.dx_m > w_min / 8.0 || grid.dy_m > w_min / 8.0)
        throw SamplingError("grid undersamples the smallest beamlet waist (< 8 samples per waist)");

    const double k = 2.0 * kPi / wavelength_m;
    const int nx = grid.nx;
    const int ny = grid.ny;

    // Per-beamlet separable factors: field = scale * gx(x) * gy(y).
    struct Separable {
        std::complex<double> scale;
        std::vector<std::complex<double>> gx, gy;
    };
    std::vector<Separable> parts(beamlets.size());

    parallel_for(beamlets.size(), threads, [&](std::size_t bi) {
        const GaussianBeamlet& b = beamlets[bi];
        const double zeta = z_m - b.focus_z_m;
        const double zr = kPi * b.waist_w0_m * b.waist_w0_m / wavelength_m;
        const double w = b.waist_w0_m * std::sqrt(1.0 + (zeta / zr) * (zeta / zr));
        const double inv_w2 = 1.0 / (w * w);
        const double half_k_curv = 0.5 * k * zeta / (zeta * zeta + zr * zr);
        const double gouy = std::atan2(zeta, zr);
        const double cx = b.center_m.x + b.tilt_rad.x * zeta;
        const double cy = b.center_m.y + b.tilt_rad.y * zeta;

        Separable& p = parts[bi];
        p.scale = b.amplitude * (b.waist_w0_m / w) *
                  std::exp(std::complex<double>(0.0, k * zeta - gouy + b.phase_rad));
        p.gx.resize(nx);
        p.gy.resize(ny);
        for (int ix = 0; ix < nx; ++ix) {
            const double x = grid.x_at(ix);
            const double u = x - cx;
            p.gx[ix] = std::exp(std::complex<double>(-u * u * inv_w2, half_k_curv * u * u + k * b.tilt_rad.x * x));
        }
        for (int iy = 0; iy < ny; ++iy) {
            const double y = grid.y_at(iy);
            const double v = y - cy;
            p.gy[iy] = std::exp(std::complex<double>(-v * v * inv_w2, half_k_curv * v * v + k * b.tilt_rad.y * y));
        }
    });

    ScalarField field;
    field.grid = grid;
    field.z_m = z_m;
    field.amplitude.assign(grid.size(), {0.0, 0.0});

    parallel_for(static_cast<std::size_t>(ny), threads, [&](std::size_t iy) {
        std::complex<double>* row = field.amplitude.data() + iy * nx;
        for (const Separable& p : parts) {
            const std::complex<double> row_scale = p.scale * p.gy[iy];
            if (std::norm(row_scale) < 1e-60) continue;
            const std::complex<double>* gx = p.gx.data();
            for (int ix = 0; ix < nx; ++ix) row[ix] += row_scale * gx[ix];
        }
    });
    return field;
}

ScalarField mla_phase_mask(const OpticalConfig& config, const GridSpec& grid) {
    config.validate();
    grid.validate();
    if (config.mla_pitch_m <= 0.0) throw ConfigError("mla_pitch is required for the lenslet mask");
    const double pitch = config.mla_pitch_m;
    const double diameter = config.lenslet_diameter_m > 0.0 ? config.lenslet_diameter_m : pitch;
    const double radius2 = 0.25 * diameter * diameter;
    const double f0 = config.lenslet_focal_f0_m;
    const bool flat = !(f0 > 0.0) || std::isinf(f0);
    if (!flat && f0 <= 0.0) throw ConfigError("lenslet focal length must be positive");

    ScalarField mask;
    mask.grid = grid;
    mask.z_m = 0.0;
    mask.amplitude.assign(grid.size(), {0.0, 0.0});
    const std::complex<double> interspace(config.interspace_transmission, 0.0);
    for (int iy = 0; iy < grid.ny; ++iy) {
        const double y = grid.y_at(iy);
        const double vy = y - pitch * std::round(y / pitch);
        for (int ix = 0; ix < grid.nx; ++ix) {
            const double x = grid.x_at(ix);
            const double vx = x - pitch * std::round(x / pitch);
            const double r2 = vx * vx + vy * vy;
            if (r2 <= radius2) {
                const double phase = flat ? 0.0 : -kPi * r2 / (config.wavelength_m * f0);
                mask.at(ix, iy) = std::polar(1.0, phase);
            } else {
                mask.at(ix, iy) = interspace;
            }
        }
    }
    return mask;
}

namespace {

std::mutex g_fftw_mutex;

void fft2_inplace(std::vector<std::complex<double>>& data, int nx, int ny, int sign) {
    fftw_complex* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        plan = fftw_plan_dft_2d(ny, nx, ptr, ptr, sign, FFTW_ESTIMATE);
    }
    if (!plan) throw SamplingError("FFT planning failed");
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        fftw_destroy_plan(plan);
    }
}

double wrapped_frequency(int index, int n, double d) {
    const int k = index <= n / 2 ? index : index - n;
    return k / (n * d);
}

// Multiplies a centered-origin spectrum by the angular-spectrum transfer
// function, truncating the evanescent band. Returns the fraction of
// spectral power that was truncated.
double apply_transfer(std::vector<std::complex<double>>& spectrum, const GridSpec& grid, double wavelength_m,
                      double delta_z_m) {
    const double inv_l2 = 1.0 / (wavelength_m * wavelength_m);
    double total = 0.0;
    double truncated = 0.0;
    for (int iy = 0; iy < grid.ny; ++iy) {
        const double fy = wrapped_frequency(iy, grid.ny, grid.dy_m);
        for (int ix = 0; ix < grid.nx; ++ix) {
            const double fx = wrapped_frequency(ix, grid.nx, grid.dx_m);
            auto& c = spectrum[static_cast<std::size_t>(iy) * grid.nx + ix];
            const double p = std::norm(c);
            total += p;
            const double arg = inv_l2 - fx * fx - fy * fy;
            if (arg > 0.0) {
                c *= std::polar(1.0, 2.0 * kPi * delta_z_m * std::sqrt(arg));
            } else {
                truncated += p;
                c = 0.0;
            }
        }
    }
    return total > 0.0 ? truncated / total : 0.0;
}

}  // namespace

ScalarField propagate_angular_spectrum(const ScalarField& field, double wavelength_m, double delta_z_m,
                                       const PropagationOptions& options) {
    field.grid.validate();
    if (wavelength_m <= 0.0) throw std::domain_error("wavelength must be positive");
    const double p = field.power();
    if (!(p > 0.0) || !std::isfinite(p)) throw std::domain_error("field power must be finite and positive");
    if (delta_z_m == 0.0) return field;

    ScalarField out = field;
    fft2_inplace(out.amplitude, out.grid.nx, out.grid.ny, FFTW_FORWARD);
    const double lost = apply_transfer(out.amplitude, out.grid, wavelength_m, delta_z_m);
    if (lost > options.evanescent_power_tolerance)
        throw SamplingError("field has " + std::to_string(lost) +
                            " of its spectral power in the evanescent band; grid is undersampled");
    fft2_inplace(out.amplitude, out.grid.nx, out.grid.ny, FFTW_BACKWARD);
    const double scale = 1.0 / static_cast<double>(out.grid.size());
    for (auto& a : out.amplitude) a *= scale;
    out.z_m = field.z_m + delta_z_m;
    return out;
}

ScalarField apply_reimaging(const ScalarField& field, double magnification) {
    if (magnification <= 0.0) throw ConfigError("magnification must be positive");
    ScalarField out = field;
    out.grid.dx_m *= magnification;
    out.grid.dy_m *= magnification;
    out.grid.center_x_m *= magnification;
    out.grid.center_y_m *= magnification;
    out.z_m = field.z_m * magnification * magnification;
    const double scale = 1.0 / magnification;
    for (auto& a : out.amplitude) a *= scale;
    return out;
}

std::vector<GaussianBeamlet> apply_reimaging(const std::vector<GaussianBeamlet>& beamlets, double magnification) {
    if (magnification <= 0.0) throw ConfigError("magnification must be positive");
    std::vector<GaussianBeamlet> out = beamlets;
    for (auto& b : out) {
        b.center_m = b.center_m * magnification;
        b.waist_w0_m *= magnification;
        b.focus_z_m *= magnification * magnification;
        b.tilt_rad = b.tilt_rad / magnification;
        b.amplitude /= magnification;
    }
    return out;
}

TalbotCarpet apply_reimaging(const TalbotCarpet& carpet, double magnification) {
    TalbotCarpet out;
    out.config = apply_reimaging(carpet.config, magnification);
    out.slices.reserve(carpet.slices.size());
    for (const auto& s : carpet.slices) out.slices.push_back(apply_reimaging(s, magnification));
    return out;
}

OpticalConfig apply_reimaging(const OpticalConfig& config, double magnification) {
    if (magnification <= 0.0) throw ConfigError("magnification must be positive");
    OpticalConfig out = config;
    out.demagnification_M = magnification;
    if (out.mla_pitch_m > 0.0) out.pitch_a_m = magnification * out.mla_pitch_m;
    out.validate();
    return out;
}

namespace {

TalbotCarpet carpet_from_beamlets(const OpticalConfig& config, const std::vector<double>& z_samples_m,
                                  const CarpetOptions& options) {
    if (options.trap_waist_w0_m <= 0.0) throw ConfigError("beamlet carpet model requires trap_waist_w0");
    const auto beamlets = make_beamlet_array(config, options.array_rows, options.array_cols,
                                             options.trap_waist_w0_m, options.beam_index, options.tilt_azimuth);
    const GridSpec grid = make_grid(config, options.array_rows, options.array_cols, options.trap_waist_w0_m,
                                    options.samples_per_waist, options.guard_pitches);

    TalbotCarpet carpet;
    carpet.config = config;
    carpet.slices.resize(z_samples_m.size());
    parallel_for(z_samples_m.size(), options.threads, [&](std::size_t k) {
        carpet.slices[k] = beam_array_field(beamlets, grid, config.wavelength_m, z_samples_m[k]);
    });
    return carpet;
}

TalbotCarpet carpet_from_mask(const OpticalConfig& config, const std::vector<double>& z_samples_m,
                              const CarpetOptions& options) {
    if (config.mla_pitch_m <= 0.0 || config.lenslet_focal_f0_m <= 0.0)
        throw ConfigError("mask carpet model requires mla_pitch and lenslet focal length");
    if (options.beam_index != 0)
        throw ConfigError("mask carpet model supports only the untilted reference beam");
    const double m = config.demagnification_M;

    // Focus waist before reimaging sets the sampling; fall back to the
    // diffraction scale of the lenslet aperture when no hint is given.
    const double diameter = config.lenslet_diameter_m > 0.0 ? config.lenslet_diameter_m : config.mla_pitch_m;
    double w0_pre = options.trap_waist_w0_m > 0.0 ? options.trap_waist_w0_m / m
                                                  : config.wavelength_m * config.lenslet_focal_f0_m / diameter;
    // Keep the whole propagating band representable so the transfer
    // function stays unitary over the grid.
    const double dx = std::max(w0_pre / options.samples_per_waist, 0.50001 * config.wavelength_m);
    const double span =
        (std::max(options.array_rows, options.array_cols) - 1 + 2.0 * options.guard_pitches) * config.mla_pitch_m;
    GridSpec grid;
    grid.nx = grid.ny = next_pow2(span / dx);
    grid.dx_m = grid.dy_m = dx;

    ScalarField source = mla_phase_mask(config, grid);
    if (config.illumination_waist_m > 0.0) {
        const double inv_w2 = 1.0 / (config.illumination_waist_m * config.illumination_waist_m);
        for (int iy = 0; iy < grid.ny; ++iy) {
            const double y = grid.y_at(iy);
            for (int ix = 0; ix < grid.nx; ++ix) {
                const double x = grid.x_at(ix);
                source.at(ix, iy) *= std::exp(-(x * x + y * y) * inv_w2);
            }
        }
    }

    // Focal plane of the lenslets = carpet origin before reimaging.
    ScalarField focal =
        propagate_angular_spectrum(source, config.wavelength_m, config.lenslet_focal_f0_m, options.propagation);
    focal.z_m = 0.0;

    TalbotCarpet carpet;
    carpet.config = config;
    carpet.slices.resize(z_samples_m.size());
    parallel_for(z_samples_m.size(), options.threads, [&](std::size_t k) {
        const double dz_pre = z_samples_m[k] / (m * m);
        ScalarField pre = dz_pre == 0.0
                              ? focal
                              : propagate_angular_spectrum(focal, config.wavelength_m, dz_pre, options.propagation);
        ScalarField post = apply_reimaging(pre, m);
        post.z_m = z_samples_m[k];
        carpet.slices[k] = std::move(post);
    });
    return carpet;
}

}  // namespace

TalbotCarpet compute_carpet(const OpticalConfig& config, const std::vector<double>& z_samples_m,
                            const CarpetOptions& options) {
    config.validate();
    if (z_samples_m.empty()) throw ConfigError("carpet needs at least one z sample");
    if (!std::is_sorted(z_samples_m.begin(), z_samples_m.end()))
        throw ConfigError("carpet z samples must be sorted ascending");
    switch (options.model) {
        case CarpetModel::beamlets:
            return carpet_from_beamlets(config, z_samples_m, options);
        case CarpetModel::mask_propagation:
            return carpet_from_mask(config, z_samples_m, options);
    }
    throw ConfigError("unknown carpet model");
}

}  // namespace talbot::optics
