#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "talbot/assembly.hpp"
#include "talbot/errors.hpp"
#include "talbot/rng.hpp"
#include "test_helpers.hpp"

using namespace talbot;
using namespace talbot::assembly;
using doctest::Approx;

namespace {

std::shared_ptr<const registers::Register> grid_register(int rows, int cols) {
    auto config = testutil::optics_b();
    return std::make_shared<registers::Register>(
        registers::build_register(config, analysis::PlaneLabel{0, 1}, rows, cols));
}

std::vector<std::uint8_t> occupancy_of(const registers::Register& reg, const std::vector<SiteIndex>& atoms) {
    std::vector<std::uint8_t> occ(reg.sites.size(), 0);
    for (const auto& a : atoms) occ[static_cast<std::size_t>(reg.site_ordinal(a))] = 1;
    return occ;
}

atoms::AtomState state_of(std::shared_ptr<const registers::Register> reg, const std::vector<SiteIndex>& sites) {
    auto state = atoms::empty_state(reg);
    for (const auto& s : sites) {
        const auto ord = static_cast<std::size_t>(reg->site_ordinal(s));
        state.occupied[ord] = 1;
        state.spin[ord] = atoms::Spin::f2;
    }
    return state;
}

// Exhaustive minimum assignment cost: fixes on-target atoms in place, then
// enumerates every maximum matching of the unfilled targets onto the free
// atoms. When atoms are short, the enumeration also chooses which targets
// stay unfilled.
double brute_force_cost(const registers::Register& reg, const std::vector<std::uint8_t>& occupied,
                        const TargetPattern& target, CostMetric metric) {
    std::vector<SiteIndex> sources;
    std::vector<SiteIndex> sinks;
    for (std::size_t k = 0; k < reg.sites.size(); ++k) {
        const auto idx = reg.sites[k].index;
        if (occupied[k] && !target.contains(idx)) sources.push_back(idx);
        if (!occupied[k] && target.contains(idx)) sinks.push_back(idx);
    }
    const std::size_t want = std::min(sources.size(), sinks.size());
    if (want == 0) return 0.0;
    const std::size_t skips_total = sinks.size() - want;

    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, std::uint64_t, std::size_t, double)> recurse =
        [&](std::size_t sink, std::uint64_t used, std::size_t skips_left, double cost) {
            if (sink == sinks.size()) {
                best = std::min(best, cost);
                return;
            }
            if (skips_left > 0) recurse(sink + 1, used, skips_left - 1, cost);
            const Vec2 pb = reg.find(sinks[sink])->position_m;
            for (std::size_t s = 0; s < sources.size(); ++s) {
                if (used & (1ULL << s)) continue;
                const double d2 = (reg.find(sources[s])->position_m - pb).norm_sq();
                const double c = metric == CostMetric::squared_distance ? d2 : std::sqrt(d2);
                recurse(sink + 1, used | (1ULL << s), skips_left, cost + c);
            }
        };
    recurse(0, 0, skips_total, 0.0);
    return best;
}

// Replays moves on a copy of the occupancy, asserting the safety contract.
void check_trace(const registers::Register& reg, std::vector<std::uint8_t> occ,
                 const std::vector<MoveOp>& moves, const Assignment& assignment) {
    for (const auto& m : moves) {
        const auto src = static_cast<std::size_t>(reg.site_ordinal(m.source));
        const auto dst = static_cast<std::size_t>(reg.site_ordinal(m.dest));
        REQUIRE(occ[src] == 1);
        REQUIRE(occ[dst] == 0);
        occ[src] = 0;
        occ[dst] = 1;
    }
    // Lossless execution realizes exactly the matching image.
    std::vector<std::uint8_t> expect(reg.sites.size(), 0);
    std::vector<std::uint8_t> moved(reg.sites.size(), 0);
    for (const auto& [s, d] : assignment.pairs) {
        expect[static_cast<std::size_t>(reg.site_ordinal(d))] = 1;
        moved[static_cast<std::size_t>(reg.site_ordinal(s))] = 1;
    }
    for (std::size_t k = 0; k < occ.size(); ++k) {
        if (expect[k]) CHECK(occ[k] == 1);
    }
}

}  // namespace

TEST_CASE("assignment trivial cases") {
    const auto reg = grid_register(4, 4);
    const auto target = TargetPattern::centered_block(*reg, 2, 2);

    SUBCASE("already-complete pattern matches itself at zero cost") {
        const auto occ = occupancy_of(*reg, target.sites);
        const auto plan = plan_assignment(*reg, occ, target);
        CHECK(plan.complete);
        CHECK(plan.total_cost == 0.0);
        REQUIRE(plan.pairs.size() == 4);
        for (const auto& [s, d] : plan.pairs) CHECK(s == d);
    }

    SUBCASE("one atom, one empty target") {
        const auto occ = occupancy_of(*reg, {SiteIndex{0, 0}});
        TargetPattern single;
        single.sites = {SiteIndex{0, 3}};
        const auto plan = plan_assignment(*reg, occ, single);
        REQUIRE(plan.pairs.size() == 1);
        CHECK(plan.pairs[0].first == SiteIndex{0, 0});
        CHECK(plan.pairs[0].second == SiteIndex{0, 3});
        const auto moves = sequence_moves(*reg, plan, occ, single);
        REQUIRE(moves.size() == 1);
        CHECK(moves[0].path_length_m == Approx(3 * reg->pitch_m));
    }

    SUBCASE("empty target is a domain error") {
        TargetPattern empty;
        CHECK_THROWS_AS(plan_assignment(*reg, occupancy_of(*reg, {}), empty), std::domain_error);
    }
}

TEST_CASE("assignment solver equals the exhaustive oracle") {
    const auto reg = grid_register(6, 6);
    rng::Stream pick(555, 0);

    for (int instance = 0; instance < 120; ++instance) {
        const auto metric = instance % 2 == 0 ? CostMetric::squared_distance : CostMetric::distance;
        // Up to 8 occupied sites and up to 6 targets, overlapping freely.
        std::vector<std::uint8_t> occ(reg->sites.size(), 0);
        const int n_atoms = 1 + static_cast<int>(pick.uniform_int(8));
        for (int a = 0; a < n_atoms; ++a) occ[pick.uniform_int(occ.size())] = 1;

        TargetPattern target;
        const int n_target = 1 + static_cast<int>(pick.uniform_int(6));
        while (static_cast<int>(target.sites.size()) < n_target) {
            const auto idx = reg->sites[pick.uniform_int(reg->sites.size())].index;
            if (!target.contains(idx)) {
                target.sites.push_back(idx);
                std::sort(target.sites.begin(), target.sites.end());
            }
        }

        const auto plan = plan_assignment(*reg, occ, target, metric);
        const double oracle = brute_force_cost(*reg, occ, target, metric);
        CHECK(plan.total_cost == Approx(oracle).epsilon(1e-9));

        const auto greedy = plan_assignment_greedy(*reg, occ, target, metric);
        CHECK(greedy.total_cost >= plan.total_cost - 1e-12);
        CHECK(greedy.complete == plan.complete);
    }
}

TEST_CASE("move sequencing handles chains and cycles") {
    const auto reg = grid_register(2, 3);
    const SiteIndex a{0, 0}, b{0, 1}, c{0, 2};

    SUBCASE("chains run sink-first") {
        Assignment plan;
        plan.pairs = {{a, b}, {b, c}};
        const auto occ = occupancy_of(*reg, {a, b});
        TargetPattern target;
        target.sites = {b, c};
        const auto moves = sequence_moves(*reg, plan, occ, target);
        REQUIRE(moves.size() == 2);
        CHECK(moves[0].source == b);
        CHECK(moves[0].dest == c);
        CHECK(moves[1].source == a);
        CHECK(moves[1].dest == b);
    }

    SUBCASE("a two-cycle costs one buffer move") {
        Assignment plan;
        plan.pairs = {{a, b}, {b, a}};
        const auto occ = occupancy_of(*reg, {a, b});
        TargetPattern target;
        target.sites = {a, b};
        const auto moves = sequence_moves(*reg, plan, occ, target);
        REQUIRE(moves.size() == 3);
        // Atom at a parks on the nearest free non-target site, here (1,0).
        CHECK(moves[0].source == a);
        CHECK(moves[0].dest == SiteIndex{1, 0});
        CHECK(moves[1].source == b);
        CHECK(moves[1].dest == a);
        CHECK(moves[2].source == SiteIndex{1, 0});
        CHECK(moves[2].dest == b);
    }

    SUBCASE("a cycle with no free buffer is a planning error") {
        const auto tiny = grid_register(1, 2);
        const SiteIndex u{0, 0}, v{0, 1};
        Assignment plan;
        plan.pairs = {{u, v}, {v, u}};
        TargetPattern target;
        target.sites = {u, v};
        CHECK_THROWS_AS(sequence_moves(*tiny, plan, occupancy_of(*tiny, {u, v}), target), PlanningError);
    }

    SUBCASE("invalid matchings are rejected") {
        Assignment plan;
        plan.pairs = {{a, c}, {b, c}};
        TargetPattern target;
        target.sites = {c};
        CHECK_THROWS_AS(sequence_moves(*reg, plan, occupancy_of(*reg, {a, b}), target), std::invalid_argument);
    }
}

TEST_CASE("random sequencing instances never deposit onto an occupied site") {
    const auto reg = grid_register(7, 7);
    rng::Stream pick(777, 0);
    TargetPattern token;
    token.sites = {SiteIndex{3, 3}};

    for (int instance = 0; instance < 120; ++instance) {
        std::vector<std::uint8_t> occ(reg->sites.size(), 0);
        const int n_atoms = 5 + static_cast<int>(pick.uniform_int(20));
        for (int a = 0; a < n_atoms; ++a) occ[pick.uniform_int(occ.size())] = 1;

        // Random valid matching: moving atoms relocate onto free sites or
        // onto sites vacated by other moving atoms (chains and cycles).
        std::vector<SiteIndex> movers;
        for (std::size_t k = 0; k < occ.size(); ++k)
            if (occ[k] && pick.bernoulli(0.6)) movers.push_back(reg->sites[k].index);

        std::vector<SiteIndex> pool = movers;
        for (std::size_t k = 0; k < occ.size(); ++k)
            if (!occ[k]) pool.push_back(reg->sites[k].index);

        Assignment plan;
        std::vector<char> used(pool.size(), 0);
        for (const auto& m : movers) {
            // Pick a random unused destination different from the source.
            std::size_t d;
            int guard = 0;
            do {
                d = pick.uniform_int(pool.size());
            } while ((used[d] || pool[d] == m) && ++guard < 200);
            if (used[d] || pool[d] == m) continue;
            used[d] = 1;
            plan.pairs.emplace_back(m, pool[d]);
        }

        const auto moves = sequence_moves(*reg, plan, occ, token);
        check_trace(*reg, occ, moves, plan);
    }
}

TEST_CASE("stochastic execution matches independent Bernoulli oracles") {
    const auto reg = grid_register(2, 8);

    SUBCASE("lossless execution realizes the plan exactly") {
        auto state = state_of(reg, {SiteIndex{0, 0}, SiteIndex{0, 1}});
        std::vector<MoveOp> moves{{SiteIndex{0, 0}, SiteIndex{1, 0}, 10e-6}};
        const auto out = execute_plan(state, moves, lossless(), 5);
        CHECK(out.atom_count() == 2);
        CHECK(out.occupied[static_cast<std::size_t>(reg->site_ordinal({1, 0}))] == 1);
        CHECK(out.occupied[static_cast<std::size_t>(reg->site_ordinal({0, 0}))] == 0);
    }

    SUBCASE("single-move success frequency tracks alpha_pickup") {
        LossModel loss;
        loss.alpha_pickup = 0.9;
        const int trials = 10000;
        int hits = 0;
        for (int t = 0; t < trials; ++t) {
            auto state = state_of(reg, {SiteIndex{0, 0}});
            std::vector<MoveOp> moves{{SiteIndex{0, 0}, SiteIndex{1, 0}, 10e-6}};
            const auto out = execute_plan(state, moves, loss, rng::stream_seed(13, static_cast<std::uint64_t>(t)));
            hits += out.occupied[static_cast<std::size_t>(reg->site_ordinal({1, 0}))];
        }
        CHECK(std::abs(hits / static_cast<double>(trials) - 0.9) < 0.01);
    }

    SUBCASE("a k-move chain succeeds with probability q^k") {
        // Atoms at (0,0..k-1) march one column right. The chain matching is
        // built by hand (the planner would keep on-target atoms in place);
        // sequencing orders it sink-first and every pickup is independent,
        // so full occupation factorizes into q^k.
        const int k = 5;
        const double q = 0.9;
        LossModel loss;
        loss.alpha_pickup = q;

        Assignment chain;
        TargetPattern target;
        std::vector<SiteIndex> atoms;
        for (int j = 0; j < k; ++j) {
            atoms.push_back({0, j});
            chain.pairs.emplace_back(SiteIndex{0, j}, SiteIndex{0, j + 1});
            target.sites.push_back({0, j + 1});
        }
        std::sort(target.sites.begin(), target.sites.end());

        const auto occ = occupancy_of(*reg, atoms);
        const auto moves = sequence_moves(*reg, chain, occ, target);
        REQUIRE(moves.size() == static_cast<std::size_t>(k));
        CHECK(moves.front().source == SiteIndex{0, k - 1}); // sink-first order

        const int trials = 10000;
        int all_ok = 0;
        for (int t = 0; t < trials; ++t) {
            auto state = state_of(reg, atoms);
            const auto out = execute_plan(state, moves, loss, rng::stream_seed(29, static_cast<std::uint64_t>(t)));
            bool ok = true;
            for (const auto& site : target.sites)
                ok = ok && out.occupied[static_cast<std::size_t>(reg->site_ordinal(site))];
            all_ok += ok ? 1 : 0;
        }
        const double expect = std::pow(q, k);
        const double sigma = std::sqrt(expect * (1.0 - expect) / trials);
        CHECK(std::abs(all_ok / static_cast<double>(trials) - expect) < 3.0 * sigma);
    }

    SUBCASE("path-length loss applies exponentially") {
        LossModel loss;
        loss.alpha_per_length_per_m = 5e4; // exp(-0.5) at 10 um
        CHECK(loss.move_success_prob(10e-6) == Approx(std::exp(-0.5)));
    }
}

TEST_CASE("assembly loop repairs defects and reports cycles") {
    const auto reg = grid_register(4, 4);
    const auto target = TargetPattern::centered_block(*reg, 2, 2);

    SUBCASE("an already-complete state verifies in one cycle with zero moves") {
        const auto state = state_of(reg, target.sites);
        const auto result = assemble(state, target, lossless(), 5, 1);
        CHECK(result.success);
        CHECK(result.cycles_used == 1);
        CHECK(result.moves_total == 0);
    }

    SUBCASE("lossless assembly succeeds exactly when atoms suffice") {
        // All occupancies of a 3x3 register against a 2x2 target.
        const auto small = grid_register(3, 3);
        const auto block = TargetPattern::centered_block(*small, 2, 2);
        for (int mask = 0; mask < (1 << 9); ++mask) {
            std::vector<SiteIndex> atoms;
            for (int b = 0; b < 9; ++b)
                if (mask & (1 << b)) atoms.push_back(small->sites[static_cast<std::size_t>(b)].index);
            const auto result = assemble(state_of(small, atoms), block, lossless(), 3, 99);
            CHECK(result.success == (atoms.size() >= block.sites.size()));
            if (result.success) {
                for (const auto& t : block.sites)
                    CHECK(result.final_state.occupied[static_cast<std::size_t>(small->site_ordinal(t))] == 1);
                CHECK(result.final_state.atom_count() == static_cast<int>(atoms.size()));
            }
        }
    }

    SUBCASE("move log carries cycle annotations") {
        std::vector<std::pair<int, MoveOp>> log;
        const auto state = state_of(reg, {SiteIndex{0, 0}, SiteIndex{0, 1}, SiteIndex{3, 3}, SiteIndex{3, 0}});
        const auto result = assemble(state, target, lossless(), 5, 7, &log);
        CHECK(result.success);
        CHECK(result.moves_total == static_cast<int>(log.size()));
        for (const auto& [cycle, move] : log) {
            CHECK(cycle >= 1);
            CHECK(move.path_length_m > 0.0);
        }
        const auto j = plan_to_json(log);
        CHECK(j.size() == log.size());
    }
}

TEST_CASE("success-rate estimation with exact enumeration oracles") {
    SUBCASE("guaranteed-success scenario reports rate one") {
        AssemblyScenario scenario;
        scenario.reg = grid_register(3, 3);
        scenario.loading.p_max = 1.0;
        scenario.loading.depth_exponent = 0.0;
        scenario.target = TargetPattern::centered_block(*scenario.reg, 2, 2);
        scenario.loss = lossless();
        scenario.max_cycles = 3;
        const auto estimate = estimate_success_rate(scenario, 200, 42);
        CHECK(estimate.rate == 1.0);
        CHECK(estimate.ci_high == Approx(1.0));
    }

    SUBCASE("two-site register with one target fills iff any atom loads") {
        AssemblyScenario scenario;
        scenario.reg = grid_register(1, 2);
        scenario.loading.p_max = 0.5;
        scenario.loading.depth_exponent = 0.0;
        scenario.target = TargetPattern::centered_block(*scenario.reg, 1, 1);
        scenario.loss = lossless();
        scenario.max_cycles = 3;
        const int trials = 10000;
        const auto estimate = estimate_success_rate(scenario, trials, 4242);
        // Exact enumeration: success iff at least one of two sites loads.
        const double expect = 0.75;
        const double sigma = std::sqrt(expect * (1.0 - expect) / trials);
        CHECK(std::abs(estimate.rate - expect) < 3.0 * sigma);
        CHECK(estimate.ci_low < expect);
        CHECK(estimate.ci_high > expect);
    }

    SUBCASE("rates respond monotonically to loss and cycle budget") {
        AssemblyScenario scenario;
        scenario.reg = grid_register(4, 4);
        scenario.loading.p_max = 0.6;
        scenario.loading.depth_exponent = 0.0;
        scenario.target = TargetPattern::centered_block(*scenario.reg, 2, 2);
        scenario.max_cycles = 5;

        auto lossy = scenario;
        lossy.loss.alpha_pickup = 0.8;
        const auto clean = estimate_success_rate(scenario, 2000, 99);
        const auto rough = estimate_success_rate(lossy, 2000, 99);
        CHECK(rough.rate <= clean.rate);

        auto one_shot = lossy;
        one_shot.max_cycles = 2;
        const auto fewer = estimate_success_rate(one_shot, 2000, 99);
        CHECK(fewer.rate <= rough.rate);
    }

    SUBCASE("results are independent of the thread count") {
        AssemblyScenario scenario;
        scenario.reg = grid_register(3, 3);
        scenario.loading.p_max = 0.5;
        scenario.loading.depth_exponent = 0.0;
        scenario.target = TargetPattern::centered_block(*scenario.reg, 2, 2);
        scenario.loss.alpha_pickup = 0.9;
        scenario.max_cycles = 4;
        const auto serial = estimate_success_rate(scenario, 500, 7, 1);
        const auto threaded = estimate_success_rate(scenario, 500, 7, 4);
        CHECK(serial.successes == threaded.successes);
    }
}
