#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "talbot/analysis.hpp"
#include "talbot/registers.hpp"

namespace talbot::atoms {

enum class Spin : std::uint8_t { none = 0, f2 = 2, f3 = 3 };

const char* spin_name(Spin spin);
Spin spin_from_name(const std::string& name);

// Per-site occupancy and spin of one register. Collisional blockade holds by
// construction: a site is a boolean, never a count.
struct AtomState {
    std::shared_ptr<const registers::Register> reg;
    std::vector<std::uint8_t> occupied;
    std::vector<Spin> spin; // Spin::none exactly where unoccupied
    std::uint64_t seed = 0;

    int atom_count() const;
    std::size_t size() const { return occupied.size(); }
    void check() const; // throws std::logic_error on a broken invariant
};

AtomState empty_state(std::shared_ptr<const registers::Register> reg);

// Loading probability p(site) = p_max * rel_depth^gamma, gated by the depth
// cutoff. gamma = 0 gives the uniform model.
struct LoadingModel {
    double p_max = 0.6;
    double depth_exponent = 2.0;
    double depth_cutoff = 0.0;

    void validate() const;
};

double loading_probability(const LoadingModel& model, double rel_depth);

// Single-shot stochastic loading: independent Bernoulli per site with the
// depth-dependent probability; loaded atoms start in F=2. Traps are matched
// to register sites by position and must cover the register.
AtomState load_atoms(std::shared_ptr<const registers::Register> reg,
                     const std::vector<analysis::TrapSite>& traps, const LoadingModel& model,
                     std::uint64_t seed);
// Uniform-depth variant (every site at rel_depth = 1).
AtomState load_atoms(std::shared_ptr<const registers::Register> reg, const LoadingModel& model,
                     std::uint64_t seed);

using PlaneStack = std::vector<AtomState>;

// Plane-selective detection prepares by removing every other plane; the kept
// plane is untouched.
PlaneStack push_out(const PlaneStack& stack, analysis::PlaneLabel keep_plane);
const AtomState& find_plane(const PlaneStack& stack, analysis::PlaneLabel plane);

// Sets every occupied site to the target spin.
AtomState initialize_spins(AtomState state, Spin target);

struct AddressingModel {
    double transfer_prob = 1.0;               // F2->F3 probability at unit intensity
    std::vector<double> site_intensity;       // aligned with the addressed register; empty = all 1
    double crosstalk_floor = 0.02;            // residual transfer on unaddressed sites

    void validate() const;
};

// Subregister-exclusive spin transfer: occupied sites of `addressed` flip
// F2->F3 with transfer_prob * local intensity, all other occupied sites with
// crosstalk_floor. Occupancy never changes.
AtomState address_subregister(const AtomState& state, const registers::Register& addressed,
                              const AddressingModel& model, std::uint64_t seed);

// Fluorescence proxy: true iff occupied and in F=2 (F=3 is removed before
// detection).
std::vector<std::uint8_t> state_selective_detect(const AtomState& state);

struct EnsembleStats {
    double mean_atoms = 0.0;
    double std_atoms = 0.0; // unbiased
    std::vector<double> site_frequency;
};

EnsembleStats occupancy_stats(const std::vector<AtomState>& ensemble);

nlohmann::json state_to_json(const AtomState& state);

}  // namespace talbot::atoms
