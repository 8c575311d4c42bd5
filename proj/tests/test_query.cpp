#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "conveyor/preprocess.hpp"
#include "conveyor/query.hpp"
#include "helpers.hpp"

using namespace conveyor;

namespace {

struct QueryFixture {
    Config cfg = test::desk_config();
    Lattice lat = cfg.make_lattice();
    Planner planner{lat, cfg.search};
    Artifact artifact;
    std::unique_ptr<QueryEngine> engine;

    QueryFixture() {
        PreprocessParams pp;
        pp.root_budget = cfg.budgets.root_expansions;
        pp.bounded_budget = cfg.budgets.bounded_expansions;
        pp.seed = cfg.seed;
        pp.latching = true;
        pp.cover_home_wait = true;
        pp.workers = 4;
        Preprocessor prep(lat, planner, pp);
        PreprocessResult result = prep.run(cfg.home_state(lat));
        artifact.config = cfg;
        artifact.s_home = cfg.home_state(lat);
        artifact.bounded_budget = cfg.budgets.bounded_expansions;
        artifact.root_paths = std::move(result.root_paths);
        artifact.map = std::move(result.map);
        artifact.rebuild_runtime_index();
        engine = std::make_unique<QueryEngine>(artifact, lat, planner);
    }

    /// A root path annotated with its own provenance, as execution would see.
    Path annotated(const RootPath& rp) const {
        Path path = rp.path;
        path.backing.assign(path.states.size(), static_cast<std::int32_t>(rp.id));
        if (path.terminal_grasp) path.backing.back() = -1;
        return path;
    }

    const RootPath& home_path() const {
        return artifact.root_paths[artifact.map.home_path_ids.front()];
    }
};

const QueryFixture& fixture() {
    static QueryFixture f;
    return f;
}

}  // namespace

TEST_CASE("query: unchanged goal returns the current path untouched") {
    const QueryFixture& f = fixture();
    const RootPath& rp = f.home_path();
    const Path curr = f.annotated(rp);
    const State s_start = curr.states[1];
    const QueryResult r = f.engine->query(rp.path.goal, curr, s_start);
    REQUIRE(r.success());
    CHECK(r.stats.outcome == QueryOutcome::kReplanned);
    CHECK(r.stats.planner_calls == 0);
    CHECK(r.stats.map_lookups == 0);
    CHECK(r.path->states.size() == curr.states.size());
    for (std::size_t i = 0; i < curr.states.size(); ++i)
        CHECK(r.path->states[i] == curr.states[i]);
}

TEST_CASE("query: direct hit at the first scanned state costs one lookup") {
    const QueryFixture& f = fixture();
    // Find a coverage entry whose state sits on a stored root path at the
    // cutoff tick; scanning from it hits the map immediately.
    for (const RootPath& rp : f.artifact.root_paths) {
        for (const State& s : rp.path.states) {
            if (s.t != f.lat.t_rc_ticks()) continue;
            const std::uint64_t skey = f.lat.state_key(s);
            for (const auto& [pair, id] : f.artifact.map.entries) {
                if (pair.a != skey) continue;
                const GoalPose g = f.lat.region().from_key(pair.b);
                if (rp.path.has_goal && rp.path.goal == g) continue;
                const Path curr = f.annotated(rp);
                const QueryResult r = f.engine->query(g, curr, s);
                REQUIRE(r.success());
                CHECK(r.stats.map_lookups == 1);
                CHECK(r.stats.planner_calls == 1);
                CHECK(r.stats.outcome == QueryOutcome::kReplanned);
                return;
            }
        }
    }
    FAIL("no cutoff-tick coverage entry found on a stored path");
}

TEST_CASE("query: backward scan order is observable and monotone") {
    const QueryFixture& f = fixture();
    const RootPath& rp = f.home_path();
    const Path curr = f.annotated(rp);
    const State s_start = curr.states[1];
    // A goal unreachable everywhere gives the full scan.
    const auto& unreachable = f.artifact.map.unreachable;
    std::uint64_t home_key = f.lat.state_key(f.artifact.s_home);
    const auto it = unreachable.find(home_key);
    if (it == unreachable.end() || it->second.empty()) return;  // nothing unreachable
    const GoalPose g = f.lat.region().from_key(it->second.front());
    const QueryResult r = f.engine->query(g, curr, s_start);
    CHECK_FALSE(r.success());
    CHECK(r.stats.outcome == QueryOutcome::kFailureUnreachable);
    REQUIRE_FALSE(r.stats.scan_ticks.empty());
    for (std::size_t i = 1; i < r.stats.scan_ticks.size(); ++i)
        CHECK(r.stats.scan_ticks[i] < r.stats.scan_ticks[i - 1]);
    CHECK(r.stats.scan_ticks.front() <= f.lat.t_rc_ticks());
    CHECK(r.stats.scan_ticks.back() == s_start.t);
}

TEST_CASE("query: accounting bounds hold over random covered goals") {
    const QueryFixture& f = fixture();
    const std::int32_t ell = f.lat.t_rc_ticks();
    std::mt19937_64 rng(11);
    int ran = 0;
    for (int i = 0; i < 400 && ran < 200; ++i) {
        const RootPath& rp = f.artifact.root_paths[rng() % f.artifact.root_paths.size()];
        std::vector<std::int32_t> candidates;
        for (std::int32_t k = 0; k < static_cast<std::int32_t>(rp.path.states.size()); ++k) {
            if (rp.path.states[k].t <= ell) candidates.push_back(k);
        }
        if (candidates.empty()) continue;
        const State s_start = rp.path.states[candidates[rng() % candidates.size()]];
        const GoalPose g = f.lat.region().from_key(rng() % f.lat.region().size());
        const Path curr = f.annotated(rp);
        QueryResult r = f.engine->query(g, curr, s_start);
        ++ran;
        CHECK(r.stats.map_lookups <= ell + 1);
        CHECK(r.stats.latch_checks <=
              (ell + 1) * static_cast<std::int64_t>(f.artifact.map.home_path_ids.size()));
        CHECK(r.stats.planner_calls <= 1);
        CHECK(r.stats.plan_expansions <= f.artifact.bounded_budget);
        if (r.success()) {
            std::string why;
            CHECK_MESSAGE(f.lat.replay_valid(*r.path, &why), why);
            std::int32_t idx = -1;
            for (std::size_t k = 0; k < curr.states.size(); ++k)
                if (curr.states[k] == s_start) idx = static_cast<std::int32_t>(k);
            for (std::int32_t k = 0; k <= idx; ++k) CHECK(r.path->states[k] == curr.states[k]);
        }
    }
    CHECK(ran > 100);
}

TEST_CASE("merge: next path starting at the current start returns next") {
    const QueryFixture& f = fixture();
    const RootPath& rp = f.home_path();
    const Path curr = f.annotated(rp);
    const Path merged = merge_paths(curr, rp.path, rp.path.states.front());
    CHECK(merged.states.size() == rp.path.states.size());
}

TEST_CASE("merge: transition at the last state is pure concatenation") {
    const QueryFixture& f = fixture();
    const RootPath& rp = f.home_path();
    Path prefix;
    prefix.states.assign(rp.path.states.begin(), rp.path.states.begin() + 3);
    prefix.primitives.assign(rp.path.primitives.begin(), rp.path.primitives.begin() + 2);
    Path tail;
    tail.states.assign(rp.path.states.begin() + 2, rp.path.states.end());
    tail.primitives.assign(rp.path.primitives.begin() + 2, rp.path.primitives.end());
    tail.goal = rp.path.goal;
    tail.has_goal = rp.path.has_goal;
    tail.terminal_grasp = rp.path.terminal_grasp;
    const Path merged = merge_paths(prefix, tail, prefix.states.back());
    CHECK(merged.states.size() == rp.path.states.size());
    std::string why;
    CHECK_MESSAGE(f.lat.replay_valid(merged, &why), why);
}

TEST_CASE("merge: contract violations are rejected") {
    const QueryFixture& f = fixture();
    const RootPath& rp = f.home_path();
    const Path curr = f.annotated(rp);
    Path bogus = rp.path;
    CHECK_THROWS_AS(merge_paths(curr, bogus, curr.states[1]), ContractViolation);
    State off = curr.states[0];
    off.t = 999;
    Path next;
    next.states = {off};
    CHECK_THROWS_AS(merge_paths(curr, next, off), ContractViolation);
}

TEST_CASE("merge by latching: joint-limit-violating latch rejected") {
    const QueryFixture& f = fixture();
    const RootPath& rp = f.home_path();
    const Path curr = f.annotated(rp);
    const State s = curr.states[1];
    State target = s;
    target.t = s.t + 1;
    target.q[0] = static_cast<std::int16_t>((target.q[0] + f.lat.angle_values() / 2) %
                                            f.lat.angle_values());
    Path home;
    home.states = {target};
    CHECK_THROWS_AS(merge_paths_by_latching(f.lat, curr, home, s), ContractViolation);
}

TEST_CASE("merge by latching: recorded latch pair produces a replay-valid path") {
    const QueryFixture& f = fixture();
    if (f.artifact.map.latch_entries.empty()) return;
    for (const auto& [pair, target] : f.artifact.map.latch_entries) {
        const RootPath* on_path = nullptr;
        std::int32_t idx = -1;
        for (const RootPath& rp : f.artifact.root_paths) {
            for (std::size_t k = 0; k < rp.path.states.size(); ++k) {
                if (f.lat.state_key(rp.path.states[k]) == pair.a) {
                    on_path = &rp;
                    idx = static_cast<std::int32_t>(k);
                    break;
                }
            }
            if (on_path != nullptr) break;
        }
        if (on_path == nullptr) continue;
        const RootPath& home_rp = f.artifact.root_paths[pair.b];
        const State s = on_path->path.states[idx];
        const GoalPose g = home_rp.path.goal;
        const std::int32_t sc = f.artifact.shortcut_index_for(home_rp.id, f.lat.region().key(g));
        if (sc < home_rp.path.index_at_tick(target.t)) continue;
        const PlanResult tail =
            f.planner.plan_with_experience(target, g, home_rp.path, {f.artifact.bounded_budget});
        if (!tail.success()) continue;
        Path curr = f.annotated(*on_path);
        const Path merged = merge_paths_by_latching(f.lat, curr, *tail.path, s);
        int latches = 0;
        for (const Primitive& prim : merged.primitives)
            latches += prim.kind == PrimitiveKind::kLatch ? 1 : 0;
        CHECK(latches == 1);
        std::string why;
        CHECK_MESSAGE(f.lat.replay_valid(merged, &why), why);
        return;
    }
}

TEST_CASE("query: goal outside the region is a contract violation") {
    const QueryFixture& f = fixture();
    const RootPath& rp = f.home_path();
    const Path curr = f.annotated(rp);
    GoalPose g{};
    CHECK_THROWS_AS(f.engine->query(g, curr, curr.states[1]), ContractViolation);
}
