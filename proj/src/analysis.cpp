#include "talbot/analysis.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <stdexcept>

#include "talbot/errors.hpp"
#include "talbot/io.hpp"

namespace talbot::analysis {

namespace {

int gcd_int(int a, int b) {
    a = std::abs(a);
    b = std::abs(b);
    while (b != 0) {
        const int t = a % b;
        a = b;
        b = t;
    }
    return a;
}

}  // namespace

PlaneLabel PlaneLabel::make(int numerator, int denominator) {
    if (denominator <= 0) throw std::invalid_argument("plane denominator must be positive");
    const int g = numerator == 0 ? denominator : gcd_int(numerator, denominator);
    PlaneLabel label{numerator / g, denominator / g};
    if (label.denominator != 1 && label.denominator != 2 && label.denominator != 4)
        throw std::invalid_argument("plane denominator must reduce to 1, 2 or 4");
    return label;
}

std::string PlaneLabel::str() const {
    if (denominator == 1) return std::to_string(numerator);
    return std::to_string(numerator) + "/" + std::to_string(denominator);
}

PlaneLabel PlaneLabel::parse(const std::string& text) {
    const auto slash = text.find('/');
    try {
        if (slash == std::string::npos) return make(std::stoi(text), 1);
        return make(std::stoi(text.substr(0, slash)), std::stoi(text.substr(slash + 1)));
    } catch (const std::invalid_argument&) {
        throw std::invalid_argument("cannot parse plane label '" + text + "'");
    }
}

PlaneLabel classify_plane(double z_m, double z_talbot_m, int max_denominator) {
    if (z_talbot_m <= 0.0) throw std::domain_error("Talbot length must be positive");
    if (max_denominator < 1) throw std::domain_error("max_denominator must be >= 1");
    const double q = z_m / z_talbot_m;
    int best_num = 0;
    int best_den = 1;
    double best_err = std::abs(q - std::llround(q));
    best_num = static_cast<int>(std::llround(q));
    for (int d : {2, 4}) {
        if (d > max_denominator) break;
        const auto n = std::llround(q * d);
        const double err = std::abs(q - static_cast<double>(n) / d);
        if (err < best_err - 1e-15) {
            best_err = err;
            best_num = static_cast<int>(n);
            best_den = d;
        }
    }
    return PlaneLabel::make(best_num, best_den);
}

namespace {

// Log-parabola vertex offset through three samples, clamped to half a pixel.
double subpixel_offset(double left, double center, double right) {
    const double floor_value = center * 1e-12;
    const double l = std::log(std::max(left, floor_value));
    const double c = std::log(center);
    const double r = std::log(std::max(right, floor_value));
    const double denom = l - 2.0 * c + r;
    if (denom >= 0.0) return 0.0;
    const double offset = 0.5 * (l - r) / denom;
    return std::clamp(offset, -0.5, 0.5);
}

// 1/e^2 intensity radius along +x from the peak, in pixels.
double waist_estimate_px(const std::vector<double>& intensity, int nx, int px, int py) {
    const double target = intensity[static_cast<std::size_t>(py) * nx + px] * std::exp(-2.0);
    for (int ix = px + 1; ix < nx; ++ix) {
        const double v = intensity[static_cast<std::size_t>(py) * nx + ix];
        if (v <= target) {
            const double prev = intensity[static_cast<std::size_t>(py) * nx + ix - 1];
            // Linear interpolation of the crossing in log space.
            const double lp = std::log(std::max(prev, target * 1e-12));
            const double lv = std::log(std::max(v, target * 1e-12));
            const double lt = std::log(target);
            const double frac = lp == lv ? 0.0 : (lp - lt) / (lp - lv);
            return (ix - 1 - px) + std::clamp(frac, 0.0, 1.0);
        }
    }
    return nx - 1 - px;
}

// Weighted linear fit of ln I = a + b r^2 over a disc; waist = sqrt(-2/b).
double fit_radial_waist(const std::vector<double>& intensity, const optics::GridSpec& grid, double cx, double cy,
                        double patch_radius_m, double peak) {
    const double r2max = patch_radius_m * patch_radius_m;
    const int ix0 = std::max(0, static_cast<int>(std::floor((cx - patch_radius_m - grid.x_at(0)) / grid.dx_m)));
    const int ix1 = std::min(grid.nx - 1, static_cast<int>(std::ceil((cx + patch_radius_m - grid.x_at(0)) / grid.dx_m)));
    const int iy0 = std::max(0, static_cast<int>(std::floor((cy - patch_radius_m - grid.y_at(0)) / grid.dy_m)));
    const int iy1 = std::min(grid.ny - 1, static_cast<int>(std::ceil((cy + patch_radius_m - grid.y_at(0)) / grid.dy_m)));

    double sw = 0.0, swx = 0.0, swy = 0.0, swxx = 0.0, swxy = 0.0;
    for (int iy = iy0; iy <= iy1; ++iy) {
        const double dy = grid.y_at(iy) - cy;
        for (int ix = ix0; ix <= ix1; ++ix) {
            const double dx = grid.x_at(ix) - cx;
            const double r2 = dx * dx + dy * dy;
            if (r2 > r2max) continue;
            const double v = intensity[static_cast<std::size_t>(iy) * grid.nx + ix];
            if (v <= peak * 1e-6) continue;
            const double w = v; // weight by intensity to favor the core
            const double y = std::log(v);
            sw += w;
            swx += w * r2;
            swy += w * y;
            swxx += w * r2 * r2;
            swxy += w * r2 * y;
        }
    }
    const double denom = sw * swxx - swx * swx;
    if (denom <= 0.0) return 0.0;
    const double slope = (sw * swxy - swx * swy) / denom;
    if (slope >= 0.0) return 0.0;
    return std::sqrt(-2.0 / slope);
}

}  // namespace

std::vector<TrapSite> extract_traps(const optics::ScalarField& slice, const ExtractOptions& options) {
    slice.grid.validate();
    if (options.min_rel_depth <= 0.0) throw std::domain_error("min_rel_depth must be positive");
    const int nx = slice.grid.nx;
    const int ny = slice.grid.ny;
    const std::vector<double> intensity = slice.intensity();
    const double peak_global = *std::max_element(intensity.begin(), intensity.end());
    std::vector<TrapSite> traps;
    if (peak_global <= 0.0) return traps;
    const double threshold = options.min_rel_depth * peak_global;

    PlaneLabel plane;
    if (options.talbot_length_m > 0.0)
        plane = classify_plane(slice.z_m, options.talbot_length_m, options.max_denominator);

    auto value = [&](int ix, int iy) { return intensity[static_cast<std::size_t>(iy) * nx + ix]; };

    for (int iy = 1; iy + 1 < ny; ++iy) {
        for (int ix = 1; ix + 1 < nx; ++ix) {
            const double v = value(ix, iy);
            if (v < threshold) continue;
            // Local maximum with first-of-equals tie-breaking, so a plateau
            // of samples straddling a symmetric peak yields exactly one site.
            bool is_max = true;
            for (int dy = -1; dy <= 1 && is_max; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const double vn = value(ix + dx, iy + dy);
                    const bool earlier = dy < 0 || (dy == 0 && dx < 0);
                    if (vn > v || (vn == v && earlier)) {
                        is_max = false;
                        break;
                    }
                }
            if (!is_max) continue;

            const double off_x = subpixel_offset(value(ix - 1, iy), v, value(ix + 1, iy));
            const double off_y = subpixel_offset(value(ix, iy - 1), v, value(ix, iy + 1));

            TrapSite trap;
            trap.position_m = {slice.grid.x_at(ix) + off_x * slice.grid.dx_m,
                               slice.grid.y_at(iy) + off_y * slice.grid.dy_m};
            trap.z_m = slice.z_m;
            trap.rel_depth = v / peak_global;
            trap.plane = plane;

            double expected = options.expected_waist_m;
            if (expected <= 0.0) expected = waist_estimate_px(intensity, nx, ix, iy) * slice.grid.dx_m;
            expected = std::max(expected, 2.0 * slice.grid.dx_m);
            trap.waist_m = fit_radial_waist(intensity, slice.grid, trap.position_m.x, trap.position_m.y,
                                            2.5 * expected, v);
            if (trap.waist_m <= 0.0) trap.waist_m = expected;
            traps.push_back(trap);
        }
    }
    return traps;
}

std::vector<TrapSite> extract_traps(const optics::ScalarField& slice, double min_rel_depth) {
    ExtractOptions options;
    options.min_rel_depth = min_rel_depth;
    return extract_traps(slice, options);
}

double wrap_to_period(double value, double period) {
    if (period <= 0.0) throw std::domain_error("period must be positive");
    double r = std::fmod(value, period);
    if (r < -0.5 * period) r += period;
    if (r >= 0.5 * period) r -= period;
    return r;
}

namespace {

struct AxisFit {
    double pitch = 0.0;
    double origin = 0.0;
};

AxisFit fit_axis(const std::vector<double>& coords, double pitch0, double origin0) {
    AxisFit fit{pitch0, origin0};
    for (int iter = 0; iter < 3; ++iter) {
        double si = 0.0, sx = 0.0, sii = 0.0, six = 0.0;
        const double n = static_cast<double>(coords.size());
        std::vector<double> idx(coords.size());
        for (std::size_t k = 0; k < coords.size(); ++k) {
            idx[k] = std::round((coords[k] - fit.origin) / fit.pitch);
            si += idx[k];
            sx += coords[k];
            sii += idx[k] * idx[k];
            six += idx[k] * coords[k];
        }
        const double denom = n * sii - si * si;
        if (denom <= 1e-12 * n * std::max(1.0, sii))
            throw FitError("degenerate lattice fit: sites are collinear along one axis");
        fit.pitch = (n * six - si * sx) / denom;
        if (fit.pitch <= 0.0) throw FitError("lattice fit produced a non-positive pitch");
        fit.origin = (sx - fit.pitch * si) / n;
    }
    return fit;
}

}  // namespace

PitchFit estimate_pitch(const std::vector<TrapSite>& sites) {
    if (sites.size() < 4) throw FitError("pitch fit needs at least a 2x2 grid of sites");

    // Initial scale from the median nearest-neighbor distance.
    std::vector<double> nn(sites.size(), 0.0);
    for (std::size_t a = 0; a < sites.size(); ++a) {
        double best = 0.0;
        for (std::size_t b = 0; b < sites.size(); ++b) {
            if (a == b) continue;
            const double d = distance(sites[a].position_m, sites[b].position_m);
            if (best == 0.0 || d < best) best = d;
        }
        nn[a] = best;
    }
    std::nth_element(nn.begin(), nn.begin() + nn.size() / 2, nn.end());
    const double d0 = nn[nn.size() / 2];
    if (d0 <= 0.0) throw FitError("coincident sites cannot define a lattice");

    Vec2 centroid;
    for (const auto& s : sites) centroid = centroid + s.position_m;
    centroid = centroid / static_cast<double>(sites.size());
    const auto anchor = std::min_element(sites.begin(), sites.end(), [&](const TrapSite& a, const TrapSite& b) {
        return distance(a.position_m, centroid) < distance(b.position_m, centroid);
    });

    std::vector<double> xs(sites.size()), ys(sites.size());
    for (std::size_t k = 0; k < sites.size(); ++k) {
        xs[k] = sites[k].position_m.x;
        ys[k] = sites[k].position_m.y;
    }
    const AxisFit fx = fit_axis(xs, d0, anchor->position_m.x);
    const AxisFit fy = fit_axis(ys, d0, anchor->position_m.y);

    PitchFit fit;
    fit.pitch_x_m = fx.pitch;
    fit.pitch_y_m = fy.pitch;
    fit.offset_m = {fx.origin - fx.pitch * std::floor(fx.origin / fx.pitch),
                    fy.origin - fy.pitch * std::floor(fy.origin / fy.pitch)};
    return fit;
}

namespace {

std::mutex g_fftw_mutex;

void fft2(std::vector<std::complex<double>>& data, int nx, int ny, int sign) {
    fftw_complex* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        plan = fftw_plan_dft_2d(ny, nx, ptr, ptr, sign, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        fftw_destroy_plan(plan);
    }
}

double corr_at(const std::vector<std::complex<double>>& c, int nx, int ny, int sx, int sy) {
    const int ix = ((sx % nx) + nx) % nx;
    const int iy = ((sy % ny) + ny) % ny;
    return c[static_cast<std::size_t>(iy) * nx + ix].real();
}

}  // namespace

FidelityResult self_image_fidelity(const optics::ScalarField& a, const optics::ScalarField& b) {
    if (!a.grid.same_geometry(b.grid))
        throw std::invalid_argument("fidelity requires identical grid geometry");
    const int nx = a.grid.nx;
    const int ny = a.grid.ny;
    const std::size_t n = a.grid.size();

    std::vector<std::complex<double>> fa(n), fb(n);
    double norm_a = 0.0, norm_b = 0.0;
    const auto ia = a.intensity();
    const auto ib = b.intensity();
    for (std::size_t k = 0; k < n; ++k) {
        fa[k] = ia[k];
        fb[k] = ib[k];
        norm_a += ia[k] * ia[k];
        norm_b += ib[k] * ib[k];
    }
    if (norm_a <= 0.0 || norm_b <= 0.0) throw std::domain_error("fidelity of a zero-power field");

    fft2(fa, nx, ny, FFTW_FORWARD);
    fft2(fb, nx, ny, FFTW_FORWARD);
    for (std::size_t k = 0; k < n; ++k) fa[k] = std::conj(fa[k]) * fb[k];
    fft2(fa, nx, ny, FFTW_BACKWARD);
    const double scale = 1.0 / (static_cast<double>(n) * std::sqrt(norm_a * norm_b));

    int best_x = 0, best_y = 0;
    double best = -1.0;
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            const double v = fa[static_cast<std::size_t>(iy) * nx + ix].real();
            if (v > best) {
                best = v;
                best_x = ix;
                best_y = iy;
            }
        }

    auto refine = [&](double left, double center, double right) {
        const double denom = left - 2.0 * center + right;
        if (denom >= 0.0) return 0.0;
        return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
    };
    const double off_x = refine(corr_at(fa, nx, ny, best_x - 1, best_y), best, corr_at(fa, nx, ny, best_x + 1, best_y));
    const double off_y = refine(corr_at(fa, nx, ny, best_x, best_y - 1), best, corr_at(fa, nx, ny, best_x, best_y + 1));

    const int wrap_x = best_x <= nx / 2 ? best_x : best_x - nx;
    const int wrap_y = best_y <= ny / 2 ? best_y : best_y - ny;

    FidelityResult result;
    result.fidelity = std::min(1.0, best * scale);
    result.shift_m = {(wrap_x + off_x) * a.grid.dx_m, (wrap_y + off_y) * a.grid.dy_m};
    return result;
}

optics::ScalarField central_region(const optics::ScalarField& field, double fraction) {
    if (fraction <= 0.0 || fraction > 1.0) throw std::domain_error("crop fraction must be in (0, 1]");
    const int cnx = std::max(2, static_cast<int>(std::lround(field.grid.nx * fraction)));
    const int cny = std::max(2, static_cast<int>(std::lround(field.grid.ny * fraction)));
    const int ix0 = (field.grid.nx - cnx) / 2;
    const int iy0 = (field.grid.ny - cny) / 2;

    optics::ScalarField out;
    out.grid = field.grid;
    out.grid.nx = cnx;
    out.grid.ny = cny;
    out.grid.center_x_m = 0.5 * (field.grid.x_at(ix0) + field.grid.x_at(ix0 + cnx - 1));
    out.grid.center_y_m = 0.5 * (field.grid.y_at(iy0) + field.grid.y_at(iy0 + cny - 1));
    out.z_m = field.z_m;
    out.amplitude.resize(out.grid.size());
    for (int iy = 0; iy < cny; ++iy)
        for (int ix = 0; ix < cnx; ++ix) out.at(ix, iy) = field.at(ix0 + ix, iy0 + iy);
    return out;
}

void assign_site_indices(std::vector<TrapSite>& sites, const PitchFit& fit) {
    for (auto& s : sites) {
        s.site_index.i = static_cast<int>(std::lround((s.position_m.x - fit.offset_m.x) / fit.pitch_x_m));
        s.site_index.j = static_cast<int>(std::lround((s.position_m.y - fit.offset_m.y) / fit.pitch_y_m));
    }
}

std::string traps_to_csv(const std::vector<TrapSite>& sites) {
    std::string out = "x_m,y_m,z_m,waist_m,rel_depth,plane,i,j\n";
    for (const auto& s : sites) {
        out += io::format_double(s.position_m.x) + ',' + io::format_double(s.position_m.y) + ',' +
               io::format_double(s.z_m) + ',' + io::format_double(s.waist_m) + ',' +
               io::format_double(s.rel_depth) + ',' + s.plane.str() + ',' + std::to_string(s.site_index.i) +
               ',' + std::to_string(s.site_index.j) + '\n';
    }
    return out;
}

}  // namespace talbot::analysis
