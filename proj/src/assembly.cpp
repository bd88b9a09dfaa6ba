#include "talbot/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "talbot/errors.hpp"
#include "talbot/parallel.hpp"
#include "talbot/rng.hpp"
#include "talbot/stats.hpp"

namespace talbot::assembly {

TargetPattern TargetPattern::centered_block(const registers::Register& reg, int rows, int cols) {
    if (rows < 1 || cols < 1) throw ConfigError("target block needs at least one row and column");
    int min_i = reg.sites.front().index.i, max_i = min_i;
    int min_j = reg.sites.front().index.j, max_j = min_j;
    for (const auto& s : reg.sites) {
        min_i = std::min(min_i, s.index.i);
        max_i = std::max(max_i, s.index.i);
        min_j = std::min(min_j, s.index.j);
        max_j = std::max(max_j, s.index.j);
    }
    const int i0 = min_i + (max_i - min_i + 1 - rows) / 2;
    const int j0 = min_j + (max_j - min_j + 1 - cols) / 2;

    TargetPattern target;
    for (int i = i0; i < i0 + rows; ++i)
        for (int j = j0; j < j0 + cols; ++j) {
            if (reg.site_ordinal({i, j}) < 0) throw ConfigError("target block does not fit inside the register");
            target.sites.push_back({i, j});
        }
    std::sort(target.sites.begin(), target.sites.end());
    return target;
}

bool TargetPattern::contains(SiteIndex index) const {
    return std::binary_search(sites.begin(), sites.end(), index);
}

void TargetPattern::validate(const registers::Register& reg) const {
    if (sites.empty()) throw std::domain_error("target pattern is empty");
    for (const auto& s : sites)
        if (reg.site_ordinal(s) < 0) throw std::domain_error("target pattern is not a subset of the register");
}

void LossModel::validate() const {
    if (alpha_pickup < 0.0 || alpha_pickup > 1.0) throw ConfigError("alpha_pickup must be in [0, 1]");
    if (alpha_release < 0.0 || alpha_release > 1.0) throw ConfigError("alpha_release must be in [0, 1]");
    if (alpha_per_length_per_m < 0.0) throw ConfigError("alpha_per_length must be non-negative");
    if (cycle_survival < 0.0 || cycle_survival > 1.0) throw ConfigError("cycle_survival must be in [0, 1]");
}

double LossModel::move_success_prob(double path_length_m) const {
    return alpha_pickup * alpha_release * std::exp(-alpha_per_length_per_m * path_length_m);
}

namespace {

double site_cost(const Vec2& a, const Vec2& b, CostMetric metric) {
    const double d2 = (a - b).norm_sq();
    return metric == CostMetric::squared_distance ? d2 : std::sqrt(d2);
}

// Jonker-Volgenant style shortest augmenting path assignment on a dense
// square matrix. Returns row -> column.
std::vector<int> min_cost_square_assignment(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> match(n + 1, 0), way(n + 1, 0);
    constexpr double inf = std::numeric_limits<double>::infinity();

    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = match[j0];
            int j1 = 0;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0);
    }

    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j)
        if (match[j] > 0) row_to_col[match[j] - 1] = j - 1;
    return row_to_col;
}

struct ProblemSites {
    std::vector<SiteIndex> sources; // occupied, off target or on it
    std::vector<SiteIndex> sinks;   // unfilled target sites
    std::vector<std::pair<SiteIndex, SiteIndex>> self_pairs;
};

ProblemSites split_problem(const registers::Register& reg, const std::vector<std::uint8_t>& occupied,
                           const TargetPattern& target) {
    if (occupied.size() != reg.sites.size())
        throw std::invalid_argument("occupancy vector does not match the register");
    target.validate(reg);

    ProblemSites p;
    for (std::size_t k = 0; k < reg.sites.size(); ++k) {
        const SiteIndex idx = reg.sites[k].index;
        if (occupied[k]) {
            if (target.contains(idx))
                p.self_pairs.emplace_back(idx, idx);
            else
                p.sources.push_back(idx);
        }
    }
    for (const auto& t : target.sites) {
        const int ord = reg.site_ordinal(t);
        if (!occupied[static_cast<std::size_t>(ord)]) p.sinks.push_back(t);
    }
    return p;
}

}  // namespace

Assignment plan_assignment(const registers::Register& reg, const std::vector<std::uint8_t>& occupied,
                           const TargetPattern& target, CostMetric metric) {
    const ProblemSites p = split_problem(reg, occupied, target);

    Assignment result;
    result.pairs = p.self_pairs;
    if (p.sinks.empty()) {
        result.complete = true;
        return result;
    }
    if (p.sources.empty()) {
        result.complete = false;
        return result;
    }

    // Square matrix padded with zero-cost dummies on the smaller side; the
    // solver then also picks which sinks stay unfilled when atoms are short.
    const int ns = static_cast<int>(p.sources.size());
    const int nt = static_cast<int>(p.sinks.size());
    const int n = std::max(ns, nt);
    std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
    for (int a = 0; a < ns; ++a) {
        const Vec2 pa = reg.find(p.sources[static_cast<std::size_t>(a)])->position_m;
        for (int b = 0; b < nt; ++b) {
            const Vec2 pb = reg.find(p.sinks[static_cast<std::size_t>(b)])->position_m;
            cost[a][b] = site_cost(pa, pb, metric);
        }
    }

    const auto row_to_col = min_cost_square_assignment(cost);
    for (int a = 0; a < ns; ++a) {
        const int b = row_to_col[a];
        if (b < 0 || b >= nt) continue; // matched to a dummy sink: atom stays put
        result.pairs.emplace_back(p.sources[static_cast<std::size_t>(a)], p.sinks[static_cast<std::size_t>(b)]);
        result.total_cost += cost[a][b];
    }

    // Each pair (self or move) covers exactly one target site.
    result.complete = result.pairs.size() == target.sites.size();
    return result;
}

Assignment plan_assignment_greedy(const registers::Register& reg, const std::vector<std::uint8_t>& occupied,
                                  const TargetPattern& target, CostMetric metric) {
    const ProblemSites p = split_problem(reg, occupied, target);

    Assignment result;
    result.pairs = p.self_pairs;
    std::vector<char> source_used(p.sources.size(), 0);
    std::vector<char> sink_used(p.sinks.size(), 0);
    const std::size_t matches = std::min(p.sources.size(), p.sinks.size());
    for (std::size_t m = 0; m < matches; ++m) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_a = 0, best_b = 0;
        for (std::size_t a = 0; a < p.sources.size(); ++a) {
            if (source_used[a]) continue;
            const Vec2 pa = reg.find(p.sources[a])->position_m;
            for (std::size_t b = 0; b < p.sinks.size(); ++b) {
                if (sink_used[b]) continue;
                const double c = site_cost(pa, reg.find(p.sinks[b])->position_m, metric);
                if (c < best) {
                    best = c;
                    best_a = a;
                    best_b = b;
                }
            }
        }
        source_used[best_a] = 1;
        sink_used[best_b] = 1;
        result.pairs.emplace_back(p.sources[best_a], p.sinks[best_b]);
        result.total_cost += best;
    }
    result.complete = result.pairs.size() == target.sites.size();
    return result;
}

namespace {

double path_length(const registers::Register& reg, SiteIndex a, SiteIndex b) {
    return distance(reg.find(a)->position_m, reg.find(b)->position_m);
}

}  // namespace

std::vector<MoveOp> sequence_moves(const registers::Register& reg, const Assignment& assignment,
                                   const std::vector<std::uint8_t>& occupied, const TargetPattern& target) {
    if (occupied.size() != reg.sites.size())
        throw std::invalid_argument("occupancy vector does not match the register");

    std::vector<std::uint8_t> occ = occupied;
    std::vector<std::pair<SiteIndex, SiteIndex>> pending;
    for (const auto& [src, dst] : assignment.pairs) {
        if (src == dst) continue;
        const int src_ord = reg.site_ordinal(src);
        const int dst_ord = reg.site_ordinal(dst);
        if (src_ord < 0 || dst_ord < 0) throw std::invalid_argument("matching references unknown sites");
        if (!occ[static_cast<std::size_t>(src_ord)])
            throw std::invalid_argument("matching moves an atom from an empty site");
        pending.emplace_back(src, dst);
    }
    // Destinations must be distinct, and an occupied destination must itself
    // be vacated by another pending move, otherwise the plan is unsatisfiable.
    {
        std::vector<SiteIndex> dests, sources;
        for (const auto& [src, dst] : pending) {
            dests.push_back(dst);
            sources.push_back(src);
        }
        std::sort(dests.begin(), dests.end());
        if (std::adjacent_find(dests.begin(), dests.end()) != dests.end())
            throw std::invalid_argument("matching assigns two atoms to one destination");
        std::sort(sources.begin(), sources.end());
        if (std::adjacent_find(sources.begin(), sources.end()) != sources.end())
            throw std::invalid_argument("matching moves one atom twice");
        for (const auto& [src, dst] : pending) {
            (void)src;
            const int ord = reg.site_ordinal(dst);
            if (occ[static_cast<std::size_t>(ord)] && !std::binary_search(sources.begin(), sources.end(), dst))
                throw std::invalid_argument("matching deposits onto an occupied site that never moves away");
        }
    }

    std::vector<MoveOp> ordered;
    ordered.reserve(pending.size() + 4);

    auto emit = [&](SiteIndex src, SiteIndex dst) {
        const int src_ord = reg.site_ordinal(src);
        const int dst_ord = reg.site_ordinal(dst);
        occ[static_cast<std::size_t>(src_ord)] = 0;
        occ[static_cast<std::size_t>(dst_ord)] = 1;
        ordered.push_back({src, dst, path_length(reg, src, dst)});
    };

    while (!pending.empty()) {
        // Deterministic pass order: by destination index.
        std::sort(pending.begin(), pending.end(),
                  [](const auto& a, const auto& b) { return a.second < b.second; });
        bool progress = false;
        for (std::size_t k = 0; k < pending.size();) {
            const auto [src, dst] = pending[k];
            if (!occ[static_cast<std::size_t>(reg.site_ordinal(dst))]) {
                emit(src, dst);
                pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(k));
                progress = true;
            } else {
                ++k;
            }
        }
        if (progress || pending.empty()) continue;

        // Every pending destination is occupied: pure cycles remain. Break
        // the one containing the smallest source by parking that atom on the
        // nearest free buffer site outside the target.
        const auto cycle_move = std::min_element(pending.begin(), pending.end());
        const SiteIndex parked_src = cycle_move->first;
        const Vec2 from = reg.find(parked_src)->position_m;

        int buffer_ord = -1;
        double buffer_dist = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < reg.sites.size(); ++k) {
            if (occ[k]) continue;
            const SiteIndex idx = reg.sites[k].index;
            if (target.contains(idx)) continue;
            bool is_pending_dest = false;
            for (const auto& [s, d] : pending) {
                (void)s;
                if (d == idx) {
                    is_pending_dest = true;
                    break;
                }
            }
            if (is_pending_dest) continue;
            const double d = distance(from, reg.sites[k].position_m);
            if (d < buffer_dist) {
                buffer_dist = d;
                buffer_ord = static_cast<int>(k);
            }
        }
        if (buffer_ord < 0)
            throw PlanningError("dependency cycle with no free buffer site available");

        const SiteIndex buffer = reg.sites[static_cast<std::size_t>(buffer_ord)].index;
        const SiteIndex final_dst = cycle_move->second;
        pending.erase(cycle_move);
        emit(parked_src, buffer);
        pending.emplace_back(buffer, final_dst);
    }
    return ordered;
}

atoms::AtomState execute_plan(atoms::AtomState state, const std::vector<MoveOp>& moves, const LossModel& loss,
                              std::uint64_t seed) {
    state.check();
    loss.validate();
    rng::Stream stream(seed);

    for (const auto& move : moves) {
        const int src = state.reg->site_ordinal(move.source);
        const int dst = state.reg->site_ordinal(move.dest);
        if (src < 0 || dst < 0) throw std::invalid_argument("move references a site outside the register");
        if (!state.occupied[static_cast<std::size_t>(src)])
            throw std::invalid_argument("move picks up from an empty site");
        if (state.occupied[static_cast<std::size_t>(dst)])
            throw std::invalid_argument("move deposits onto an occupied site");

        const auto spin = state.spin[static_cast<std::size_t>(src)];
        state.occupied[static_cast<std::size_t>(src)] = 0;
        state.spin[static_cast<std::size_t>(src)] = atoms::Spin::none;
        if (stream.bernoulli(loss.move_success_prob(move.path_length_m))) {
            state.occupied[static_cast<std::size_t>(dst)] = 1;
            state.spin[static_cast<std::size_t>(dst)] = spin;
        }
    }

    if (loss.cycle_survival < 1.0) {
        for (std::size_t k = 0; k < state.occupied.size(); ++k) {
            if (!state.occupied[k]) continue;
            if (!stream.bernoulli(loss.cycle_survival)) {
                state.occupied[k] = 0;
                state.spin[k] = atoms::Spin::none;
            }
        }
    }
    return state;
}

AssemblyResult assemble(atoms::AtomState state, const TargetPattern& target, const LossModel& loss,
                        int max_cycles, std::uint64_t seed,
                        std::vector<std::pair<int, MoveOp>>* move_log) {
    if (max_cycles < 1) throw std::domain_error("max_cycles must be >= 1");
    state.check();
    target.validate(*state.reg);
    loss.validate();
    rng::Stream stream(seed);

    AssemblyResult result;
    for (int cycle = 1; cycle <= max_cycles; ++cycle) {
        result.cycles_used = cycle;

        // Detection pass.
        bool complete = true;
        for (const auto& t : target.sites) {
            const int ord = state.reg->site_ordinal(t);
            if (!state.occupied[static_cast<std::size_t>(ord)]) {
                complete = false;
                break;
            }
        }
        if (complete) {
            result.success = true;
            break;
        }
        if (cycle == max_cycles) break; // defects found but no rearrangement budget left
        if (static_cast<std::size_t>(state.atom_count()) < target.sites.size()) break;

        const Assignment plan = plan_assignment(*state.reg, state.occupied, target);
        const auto moves = sequence_moves(*state.reg, plan, state.occupied, target);
        result.moves_total += static_cast<int>(moves.size());
        if (move_log)
            for (const auto& m : moves) move_log->emplace_back(cycle, m);
        state = execute_plan(std::move(state), moves, loss, stream.next_u64());
    }
    result.final_state = std::move(state);
    return result;
}

SuccessEstimate estimate_success_rate(const AssemblyScenario& scenario, int trials, std::uint64_t master_seed,
                                      int threads) {
    if (trials < 1) throw std::domain_error("at least one trial is required");
    if (!scenario.reg) throw std::invalid_argument("scenario without a register");
    scenario.target.validate(*scenario.reg);

    std::vector<std::uint8_t> success(static_cast<std::size_t>(trials), 0);
    parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t trial) {
        const std::uint64_t load_seed = rng::stream_seed(master_seed, 2 * trial);
        const std::uint64_t assemble_seed = rng::stream_seed(master_seed, 2 * trial + 1);
        auto state = atoms::load_atoms(scenario.reg, scenario.traps, scenario.loading, load_seed);
        const auto result = assemble(std::move(state), scenario.target, scenario.loss, scenario.max_cycles,
                                     assemble_seed);
        success[trial] = result.success ? 1 : 0;
    });

    SuccessEstimate estimate;
    estimate.trials = trials;
    for (const auto s : success) estimate.successes += s;
    estimate.rate = static_cast<double>(estimate.successes) / trials;
    const auto interval = stats::wilson_interval(static_cast<std::size_t>(estimate.successes),
                                                 static_cast<std::size_t>(trials));
    estimate.ci_low = interval.low;
    estimate.ci_high = interval.high;
    return estimate;
}

nlohmann::json plan_to_json(const std::vector<std::pair<int, MoveOp>>& annotated_moves) {
    nlohmann::json moves = nlohmann::json::array();
    for (const auto& [cycle, move] : annotated_moves) {
        moves.push_back({{"cycle", cycle},
                         {"src_i", move.source.i},
                         {"src_j", move.source.j},
                         {"dst_i", move.dest.i},
                         {"dst_j", move.dest.j},
                         {"path_length_m", move.path_length_m}});
    }
    return moves;
}

}  // namespace talbot::assembly
