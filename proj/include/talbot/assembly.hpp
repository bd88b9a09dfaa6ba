#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "talbot/atoms.hpp"
#include "talbot/geometry.hpp"
#include "talbot/registers.hpp"

namespace talbot::assembly {

// Site subset of a register to be filled without defects.
struct TargetPattern {
    std::vector<SiteIndex> sites; // sorted lexicographic

    static TargetPattern centered_block(const registers::Register& reg, int rows, int cols);
    bool contains(SiteIndex index) const;
    void validate(const registers::Register& reg) const; // non-empty, subset of the register
};

struct MoveOp {
    SiteIndex source;
    SiteIndex dest;
    double path_length_m = 0.0;
};

// Transport losses. A move succeeds with
// alpha_pickup * alpha_release * exp(-alpha_per_length * path length);
// after each cycle every atom survives with cycle_survival.
struct LossModel {
    double alpha_pickup = 1.0;
    double alpha_release = 1.0;
    double alpha_per_length_per_m = 0.0;
    double cycle_survival = 1.0;

    void validate() const;
    double move_success_prob(double path_length_m) const;
};

inline LossModel lossless() { return LossModel{}; }

enum class CostMetric { squared_distance, distance };

// Pairing of target sites with source atoms. Atoms already on target sites
// are matched to themselves at zero cost and appear as self-pairs.
struct Assignment {
    std::vector<std::pair<SiteIndex, SiteIndex>> pairs; // (source, target)
    double total_cost = 0.0;
    bool complete = false; // every target site covered
};

// Minimum-total-cost matching of occupied sites onto unfilled target sites
// (exact cubic-time solver). With fewer atoms than targets the matching is
// partial but still covers the maximum number of targets at minimum cost.
Assignment plan_assignment(const registers::Register& reg, const std::vector<std::uint8_t>& occupied,
                           const TargetPattern& target, CostMetric metric = CostMetric::squared_distance);

// Cheap nearest-first heuristic, for benchmarking against the exact solver.
Assignment plan_assignment_greedy(const registers::Register& reg, const std::vector<std::uint8_t>& occupied,
                                  const TargetPattern& target, CostMetric metric = CostMetric::squared_distance);

// Orders the matching so no move ever deposits onto an occupied site.
// Dependency chains run sink-first; cycles are broken by relocating one atom
// to the nearest free non-target buffer site (one extra move).
std::vector<MoveOp> sequence_moves(const registers::Register& reg, const Assignment& assignment,
                                   const std::vector<std::uint8_t>& occupied, const TargetPattern& target);

// Applies the moves with stochastic losses; failed moves lose the atom.
atoms::AtomState execute_plan(atoms::AtomState state, const std::vector<MoveOp>& moves, const LossModel& loss,
                              std::uint64_t seed);

struct AssemblyResult {
    bool success = false;
    int cycles_used = 0;
    int moves_total = 0;
    atoms::AtomState final_state;
};

// Repeats detect -> plan -> sequence -> execute until the target is filled,
// atoms run out, or max_cycles detections have happened. A cycle is one
// detection pass plus the rearrangement it triggers, so repairing any defect
// needs max_cycles >= 2 to leave room for the closing verification.
// move_log, when given, records every executed move with its cycle number.
AssemblyResult assemble(atoms::AtomState state, const TargetPattern& target, const LossModel& loss,
                        int max_cycles, std::uint64_t seed,
                        std::vector<std::pair<int, MoveOp>>* move_log = nullptr);

struct AssemblyScenario {
    std::shared_ptr<const registers::Register> reg;
    std::vector<analysis::TrapSite> traps; // empty = uniform loading depth
    atoms::LoadingModel loading;
    TargetPattern target;
    LossModel loss;
    int max_cycles = 10;
};

struct SuccessEstimate {
    double rate = 0.0;
    double ci_low = 0.0;  // Wilson 95% interval
    double ci_high = 0.0;
    int trials = 0;
    int successes = 0;
};

// End-to-end Monte Carlo (load then assemble) with per-trial random streams;
// the result is independent of the number of worker threads.
SuccessEstimate estimate_success_rate(const AssemblyScenario& scenario, int trials, std::uint64_t master_seed,
                                      int threads = 1);

// Moves with cycle annotations.
nlohmann::json plan_to_json(const std::vector<std::pair<int, MoveOp>>& annotated_moves);

}  // namespace talbot::assembly
