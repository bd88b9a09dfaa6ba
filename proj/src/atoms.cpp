#include "talbot/atoms.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "talbot/errors.hpp"
#include "talbot/rng.hpp"
#include "talbot/stats.hpp"

namespace talbot::atoms {

const char* spin_name(Spin spin) {
    switch (spin) {
        case Spin::none: return "none";
        case Spin::f2: return "F2";
        case Spin::f3: return "F3";
    }
    return "none";
}

Spin spin_from_name(const std::string& name) {
    if (name == "none") return Spin::none;
    if (name == "F2") return Spin::f2;
    if (name == "F3") return Spin::f3;
    throw std::invalid_argument("unknown spin label '" + name + "'");
}

int AtomState::atom_count() const {
    int n = 0;
    for (const auto o : occupied) n += o ? 1 : 0;
    return n;
}

void AtomState::check() const {
    if (!reg) throw std::logic_error("atom state without a register");
    if (occupied.size() != reg->sites.size() || spin.size() != reg->sites.size())
        throw std::logic_error("atom state size does not match its register");
    for (std::size_t k = 0; k < occupied.size(); ++k)
        if ((spin[k] == Spin::none) == static_cast<bool>(occupied[k]))
            throw std::logic_error("spin label inconsistent with occupancy");
}

AtomState empty_state(std::shared_ptr<const registers::Register> reg) {
    if (!reg) throw std::invalid_argument("null register");
    AtomState state;
    state.reg = std::move(reg);
    state.occupied.assign(state.reg->sites.size(), 0);
    state.spin.assign(state.reg->sites.size(), Spin::none);
    return state;
}

void LoadingModel::validate() const {
    if (p_max < 0.0 || p_max > 1.0) throw ConfigError("p_max must be in [0, 1]");
    if (depth_exponent < 0.0) throw ConfigError("depth exponent must be non-negative");
    if (depth_cutoff < 0.0 || depth_cutoff >= 1.0) throw ConfigError("depth cutoff must be in [0, 1)");
}

double loading_probability(const LoadingModel& model, double rel_depth) {
    if (rel_depth < model.depth_cutoff) return 0.0;
    if (model.depth_exponent == 0.0) return model.p_max;
    return model.p_max * std::pow(rel_depth, model.depth_exponent);
}

namespace {

// rel_depth per register site, from the nearest trap within half a pitch.
std::vector<double> site_depths(const registers::Register& reg, const std::vector<analysis::TrapSite>& traps) {
    std::vector<double> depth(reg.sites.size(), 1.0);
    if (traps.empty()) return depth;
    const double max_dist = 0.5 * reg.pitch_m;
    for (std::size_t k = 0; k < reg.sites.size(); ++k) {
        double best = -1.0;
        double best_depth = 0.0;
        for (const auto& t : traps) {
            const double d = distance(reg.sites[k].position_m, t.position_m);
            if (best < 0.0 || d < best) {
                best = d;
                best_depth = t.rel_depth;
            }
        }
        if (best > max_dist)
            throw std::invalid_argument("traps do not cover the register: site " +
                                        std::to_string(reg.sites[k].index.i) + "," +
                                        std::to_string(reg.sites[k].index.j) + " has no trap nearby");
        depth[k] = best_depth;
    }
    return depth;
}

}  // namespace

AtomState load_atoms(std::shared_ptr<const registers::Register> reg,
                     const std::vector<analysis::TrapSite>& traps, const LoadingModel& model,
                     std::uint64_t seed) {
    if (!reg) throw std::invalid_argument("null register");
    model.validate();
    const auto depth = site_depths(*reg, traps);

    AtomState state = empty_state(std::move(reg));
    state.seed = seed;
    rng::Stream stream(seed);
    for (std::size_t k = 0; k < state.occupied.size(); ++k) {
        if (stream.bernoulli(loading_probability(model, depth[k]))) {
            state.occupied[k] = 1;
            state.spin[k] = Spin::f2;
        }
    }
    return state;
}

AtomState load_atoms(std::shared_ptr<const registers::Register> reg, const LoadingModel& model,
                     std::uint64_t seed) {
    return load_atoms(std::move(reg), {}, model, seed);
}

PlaneStack push_out(const PlaneStack& stack, analysis::PlaneLabel keep_plane) {
    bool found = false;
    for (const auto& state : stack)
        if (state.reg && state.reg->plane == keep_plane) found = true;
    if (!found) throw std::domain_error("push-out: plane T" + keep_plane.str() + " not present in the stack");

    PlaneStack out = stack;
    for (auto& state : out) {
        if (state.reg->plane == keep_plane) continue;
        std::fill(state.occupied.begin(), state.occupied.end(), 0);
        std::fill(state.spin.begin(), state.spin.end(), Spin::none);
    }
    return out;
}

const AtomState& find_plane(const PlaneStack& stack, analysis::PlaneLabel plane) {
    for (const auto& state : stack)
        if (state.reg && state.reg->plane == plane) return state;
    throw std::domain_error("plane T" + plane.str() + " not present in the stack");
}

AtomState initialize_spins(AtomState state, Spin target) {
    if (target == Spin::none) throw std::invalid_argument("cannot initialize spins to 'none'");
    for (std::size_t k = 0; k < state.occupied.size(); ++k)
        if (state.occupied[k]) state.spin[k] = target;
    return state;
}

void AddressingModel::validate() const {
    if (transfer_prob < 0.0 || transfer_prob > 1.0) throw ConfigError("transfer probability must be in [0, 1]");
    if (crosstalk_floor < 0.0 || crosstalk_floor > 1.0) throw ConfigError("crosstalk floor must be in [0, 1]");
    for (const double v : site_intensity)
        if (v < 0.0) throw ConfigError("addressing intensities must be non-negative");
}

AtomState address_subregister(const AtomState& state, const registers::Register& addressed,
                              const AddressingModel& model, std::uint64_t seed) {
    state.check();
    model.validate();
    if (!model.site_intensity.empty() && model.site_intensity.size() != addressed.sites.size())
        throw ConfigError("addressing intensity list does not match the addressed register");

    // Match addressed sites to the state's register by position.
    const auto& reg = *state.reg;
    const double tol = 0.25 * std::min(reg.pitch_m, addressed.pitch_m);
    std::vector<double> transfer(reg.sites.size(), model.crosstalk_floor);
    for (std::size_t a = 0; a < addressed.sites.size(); ++a) {
        int match = -1;
        for (std::size_t k = 0; k < reg.sites.size(); ++k) {
            if (distance(reg.sites[k].position_m, addressed.sites[a].position_m) <= tol) {
                match = static_cast<int>(k);
                break;
            }
        }
        if (match < 0)
            throw std::invalid_argument("addressed register is not a subset of the state's site universe");
        const double intensity = model.site_intensity.empty() ? 1.0 : model.site_intensity[a];
        transfer[static_cast<std::size_t>(match)] = std::min(1.0, model.transfer_prob * intensity);
    }

    AtomState out = state;
    rng::Stream stream(seed);
    for (std::size_t k = 0; k < out.occupied.size(); ++k) {
        if (!out.occupied[k] || out.spin[k] != Spin::f2) continue;
        if (stream.bernoulli(transfer[k])) out.spin[k] = Spin::f3;
    }
    return out;
}

std::vector<std::uint8_t> state_selective_detect(const AtomState& state) {
    std::vector<std::uint8_t> detected(state.occupied.size(), 0);
    for (std::size_t k = 0; k < state.occupied.size(); ++k)
        detected[k] = (state.occupied[k] && state.spin[k] == Spin::f2) ? 1 : 0;
    return detected;
}

EnsembleStats occupancy_stats(const std::vector<AtomState>& ensemble) {
    if (ensemble.empty()) throw std::domain_error("occupancy statistics of an empty ensemble");
    const auto& reg = ensemble.front().reg;
    for (const auto& state : ensemble)
        if (!state.reg || state.occupied.size() != reg->sites.size())
            throw std::invalid_argument("ensemble states use different registers");

    EnsembleStats stats;
    stats.site_frequency.assign(reg->sites.size(), 0.0);
    std::vector<double> counts;
    counts.reserve(ensemble.size());
    for (const auto& state : ensemble) {
        counts.push_back(static_cast<double>(state.atom_count()));
        for (std::size_t k = 0; k < state.occupied.size(); ++k)
            if (state.occupied[k]) stats.site_frequency[k] += 1.0;
    }
    for (auto& f : stats.site_frequency) f /= static_cast<double>(ensemble.size());
    stats.mean_atoms = stats::mean(counts);
    stats.std_atoms = stats::stddev(counts);
    return stats;
}

nlohmann::json state_to_json(const AtomState& state) {
    state.check();
    nlohmann::json sites = nlohmann::json::array();
    for (std::size_t k = 0; k < state.occupied.size(); ++k) {
        const auto& site = state.reg->sites[k];
        sites.push_back({{"i", site.index.i},
                         {"j", site.index.j},
                         {"occupied", static_cast<bool>(state.occupied[k])},
                         {"spin", spin_name(state.spin[k])}});
    }
    return nlohmann::json{{"register_ref", state.reg->name}, {"seed", state.seed}, {"sites", std::move(sites)}};
}

}  // namespace talbot::atoms
