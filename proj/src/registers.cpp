#include "talbot/registers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "talbot/errors.hpp"

namespace talbot::registers {

int Register::site_ordinal(SiteIndex index) const {
    const auto it = std::lower_bound(sites.begin(), sites.end(), index,
                                     [](const RegisterSite& s, SiteIndex key) { return s.index < key; });
    if (it == sites.end() || it->index != index) return -1;
    return static_cast<int>(it - sites.begin());
}

const RegisterSite* Register::find(SiteIndex index) const {
    const int ordinal = site_ordinal(index);
    return ordinal < 0 ? nullptr : &sites[static_cast<std::size_t>(ordinal)];
}

Register build_register(const optics::OpticalConfig& config, PlaneLabel plane, int rows, int cols) {
    config.validate();
    if (rows < 1 || cols < 1) throw ConfigError("register needs at least one row and column");
    if (plane.denominator == 4)
        throw ConfigError("fractional (quarter) planes are analysis-only; registers are unsupported there");

    Register reg;
    reg.plane = plane;
    reg.pitch_m = config.effective_pitch_m();
    reg.origin_offset_m = plane.is_half_integer() ? Vec2{0.5 * reg.pitch_m, 0.5 * reg.pitch_m} : Vec2{0.0, 0.0};
    reg.name = "T" + plane.str() + "-" + std::to_string(rows) + "x" + std::to_string(cols) + "-s0";
    reg.sites.reserve(static_cast<std::size_t>(rows) * cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            reg.sites.push_back({SiteIndex{i, j},
                                 reg.origin_offset_m + Vec2{i * reg.pitch_m, j * reg.pitch_m}});
    return reg;
}

Vec2 interleave_displacement(const InterleaveSpec& spec) {
    if (spec.demagnification_M <= 0.0) throw ConfigError("demagnification M must be positive");
    if (spec.lenslet_focal_f0_m <= 0.0) throw ConfigError("interleaving requires the lenslet focal length");
    if (spec.z_talbot_pre_m < 0.0) throw ConfigError("pre-reimaging Talbot length must be non-negative");
    const double az = spec.azimuth.norm();
    if (az <= 0.0) throw ConfigError("tilt azimuth must be a nonzero vector");

    const double effective_focal =
        spec.lenslet_focal_f0_m + std::abs(spec.plane.fraction()) * spec.z_talbot_pre_m;
    const double magnitude = spec.demagnification_M * spec.tilt_theta_rad * effective_focal;
    return (spec.azimuth / az) * magnitude;
}

InterleaveResult interleave(const Register& base, const InterleaveSpec& spec) {
    if (spec.plane != base.plane) throw ConfigError("interleave spec plane differs from the base register plane");
    if (spec.frequency_offset_hz <= 0.0)
        throw ConfigError("beams sharing a plane need a positive frequency offset to stay incoherent");

    InterleaveResult result;
    result.raw_displacement_m = interleave_displacement(spec);
    result.displacement_m = result.raw_displacement_m;

    // Wrap into the fundamental cell when the offset leaves it.
    auto wrap = [&](double v) {
        if (std::abs(v) < base.pitch_m) return v;
        result.wrapped = true;
        return v - base.pitch_m * std::floor(v / base.pitch_m);
    };
    result.displacement_m.x = wrap(result.displacement_m.x);
    result.displacement_m.y = wrap(result.displacement_m.y);

    Register sub = base;
    sub.sublattice_id = base.sublattice_id + 1;
    sub.origin_offset_m = base.origin_offset_m + result.displacement_m;
    for (auto& site : sub.sites) site.position_m = site.position_m + result.displacement_m;
    const auto stem = sub.name.find("-s");
    sub.name = (stem == std::string::npos ? sub.name : sub.name.substr(0, stem)) + "-s" +
               std::to_string(sub.sublattice_id);
    result.sublattice = std::move(sub);
    return result;
}

std::vector<SeparationViolation> validate_separation(const std::vector<Register>& registers, double min_sep_m) {
    if (min_sep_m < 0.0) throw ConfigError("minimum separation must be non-negative");
    for (std::size_t k = 1; k < registers.size(); ++k)
        if (registers[k].plane != registers[0].plane)
            throw std::invalid_argument("separation check requires all registers in one plane");

    std::vector<SeparationViolation> violations;
    for (std::size_t a = 0; a < registers.size(); ++a) {
        for (std::size_t b = a + 1; b < registers.size(); ++b) {
            for (const auto& sa : registers[a].sites) {
                for (const auto& sb : registers[b].sites) {
                    const double d = distance(sa.position_m, sb.position_m);
                    if (d < min_sep_m) violations.push_back({a, b, sa.index, sb.index, d});
                }
            }
        }
    }
    return violations;
}

double composite_pitch(const std::vector<Register>& registers) {
    std::vector<Vec2> all;
    for (const auto& r : registers)
        for (const auto& s : r.sites) all.push_back(s.position_m);
    if (all.empty()) throw std::invalid_argument("composite pitch of an empty register set");
    if (all.size() == 1) return 0.0;

    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < all.size(); ++a)
        for (std::size_t b = a + 1; b < all.size(); ++b) best = std::min(best, distance(all[a], all[b]));
    return best;
}

nlohmann::json register_to_json(const Register& reg) {
    nlohmann::json sites = nlohmann::json::array();
    for (const auto& s : reg.sites)
        sites.push_back({{"i", s.index.i}, {"j", s.index.j}, {"x_m", s.position_m.x}, {"y_m", s.position_m.y}});
    return nlohmann::json{{"name", reg.name},
                          {"plane", reg.plane.str()},
                          {"pitch_m", reg.pitch_m},
                          {"sublattice_id", reg.sublattice_id},
                          {"origin_offset_m", {reg.origin_offset_m.x, reg.origin_offset_m.y}},
                          {"sites", std::move(sites)}};
}

Register register_from_json(const nlohmann::json& j) {
    Register reg;
    reg.name = j.value("name", std::string{});
    reg.plane = PlaneLabel::parse(j.at("plane").get<std::string>());
    reg.pitch_m = j.at("pitch_m").get<double>();
    reg.sublattice_id = j.value("sublattice_id", 0);
    const auto& offset = j.at("origin_offset_m");
    reg.origin_offset_m = {offset.at(0).get<double>(), offset.at(1).get<double>()};
    for (const auto& s : j.at("sites"))
        reg.sites.push_back({SiteIndex{s.at("i").get<int>(), s.at("j").get<int>()},
                             Vec2{s.at("x_m").get<double>(), s.at("y_m").get<double>()}});
    std::sort(reg.sites.begin(), reg.sites.end(),
              [](const RegisterSite& a, const RegisterSite& b) { return a.index < b.index; });
    return reg;
}

}  // namespace talbot::registers
