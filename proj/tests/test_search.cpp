#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "conveyor/search.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace conveyor;

namespace {

struct Fixture {
    Config cfg = test::desk_config();
    Lattice lat = cfg.make_lattice();
    Planner planner{lat, cfg.search};
    State home = cfg.home_state(lat);
    GoalPose mid = lat.region().snap({{-1.20, 0.33}, -30.0 * M_PI / 180.0});
};

/// Bisection on the intercept inequality, independent of the closed form.
double intercept_bisection(const Lattice& lat, const State& s, const GoalPose& g) {
    const EEPose ee = lat.ee_pose(s);
    const auto gap = [&](double tau) {
        const Pose2 obj = lat.goal_pose_at(g, s.t * lat.params().dt + tau);
        return distance(obj.position, ee.position) - lat.arm().max_ee_speed() * tau;
    };
    if (gap(0.0) <= 0.0) return 0.0;
    double hi = 1e-3;
    while (gap(hi) > 0.0) {
        hi *= 2.0;
        if (hi > 1e6) return kNoIntercept;
    }
    double lo = hi / 2.0;
    for (int i = 0; i < 200; ++i) {
        const double midpoint = 0.5 * (lo + hi);
        (gap(midpoint) > 0.0 ? lo : hi) = midpoint;
    }
    return hi;
}

}  // namespace

TEST_CASE("heuristic: near zero at the grasp pose") {
    Fixture f;
    const std::int32_t tick = 9;
    const Pose2 target = f.lat.grasp_target_at(f.mid, tick * f.lat.params().dt);
    std::vector<double> q = {2.3, -2.4, -3.0};
    REQUIRE(test::ik_to_pose(f.lat.arm(), target, q));
    // The quantized lattice state lands within a few centimetres of the ideal
    // pose, so the heuristic is tiny rather than exactly zero.
    const State s = f.lat.make_state(q, tick);
    const double h = f.planner.heuristic(s, f.mid);
    CHECK(h >= 0.0);
    CHECK(h < 0.2);
}

TEST_CASE("heuristic: receding object maps to the sentinel") {
    Config cfg = test::desk_config();
    cfg.arm.link_lengths = {0.06, 0.05, 0.04};
    cfg.arm.joint_velocity_limits = {0.5, 0.5, 0.5};
    cfg.arm.gripper_reach = 0.02;
    cfg.arm.link_radius = 0.005;
    cfg.home_q = {0, 0, 0};
    cfg.world.conveyor_y = {0.0, 0.01};
    cfg.goal.x_exec = 0.30;
    const Lattice lat = cfg.make_lattice();
    const Planner planner(lat, cfg.search);
    REQUIRE(lat.arm().max_ee_speed() < cfg.world.conveyor_speed);
    const GoalPose g = lat.region().snap({{0.30, 0.005}, 0.0});
    const State s = lat.make_state(std::vector<double>{0, 0, 0}, 0);
    CHECK(planner.heuristic(s, g) == kNoIntercept);
}

TEST_CASE("heuristic: intercept time matches the bisection oracle") {
    Fixture f;
    std::mt19937_64 rng(41);
    for (int i = 0; i < 300; ++i) {
        const State s =
            f.lat.make_state(test::random_q(rng, 3), static_cast<std::int32_t>(rng() % 12));
        const GoalPose g = f.lat.region().from_key(rng() % f.lat.region().size());
        const double analytic = f.planner.intercept_time(s, g);
        const double oracle = intercept_bisection(f.lat, s, g);
        if (analytic >= kNoIntercept) {
            CHECK(oracle >= kNoIntercept);
        } else {
            CHECK(std::abs(analytic - oracle) < 1e-9);
        }
    }
}

TEST_CASE("plan: goal graspable in one dynamic primitive gives a 2-state path") {
    Fixture f;
    const std::int32_t tick = 9;
    State s{};
    bool found = false;
    for (double dx : {0.10, 0.12, 0.08, 0.14}) {
        for (double dy : {-0.04, -0.06, -0.02, -0.08}) {
            const Pose2 target = f.lat.grasp_target_at(f.mid, tick * f.lat.params().dt);
            const Pose2 pre{{target.position.x + dx, target.position.y + dy}, target.yaw};
            std::vector<double> q = {2.3, -2.4, -3.0};
            if (!test::ik_to_pose(f.lat.arm(), pre, q)) continue;
            const State cand = f.lat.make_state(q, tick);
            if (!f.lat.trigger_dynamic(cand, f.mid)) continue;
            if (!f.lat.dynamic_grasp(cand, f.mid).success) continue;
            s = cand;
            found = true;
            break;
        }
        if (found) break;
    }
    REQUIRE(found);
    const PlanResult r = f.planner.plan(s, f.mid, {1});
    REQUIRE(r.success());
    CHECK(r.path->states.size() == 2);
    CHECK(r.path->terminal_grasp);
    CHECK(r.expansions <= 1);
}

TEST_CASE("plan: budget one and a distant goal fails with one expansion") {
    Fixture f;
    const PlanResult r = f.planner.plan(f.home, f.mid, {1});
    CHECK_FALSE(r.success());
    CHECK(r.expansions == 1);
}

TEST_CASE("plan: budget law holds across budgets") {
    Fixture f;
    for (std::int64_t budget : {1, 5, 17, 100, 100000}) {
        const PlanResult r = f.planner.plan(f.home, f.mid, {budget});
        CHECK(r.expansions <= budget);
    }
}

TEST_CASE("plan: found path replays and costs near the Dijkstra optimum") {
    Fixture f;
    const PlanResult r = f.planner.plan(f.home, f.mid, {1000000});
    REQUIRE(r.success());
    std::string why;
    CHECK_MESSAGE(f.lat.replay_valid(*r.path, &why), why);

    const std::int64_t optimal = test::dijkstra_cost_oracle(f.lat, f.home, f.mid, 14);
    REQUIRE(optimal > 0);
    const std::int64_t cost = r.path->end_tick() - r.path->start_tick();
    CHECK(static_cast<double>(cost) <= optimal * 1.1 + 1e-9);

    // Unit weight with the admissible configuration matches the optimum.
    SearchParams admissible;
    admissible.lambda = 1.0;
    admissible.weight = 1.0;
    const Planner exact(f.lat, admissible);
    const PlanResult opt = exact.plan(f.home, f.mid, {4000000});
    REQUIRE(opt.success());
    CHECK(opt.path->end_tick() - opt.path->start_tick() == optimal);
}

TEST_CASE("plan: deterministic across runs") {
    Fixture f;
    const PlanResult a = f.planner.plan(f.home, f.mid, {100000});
    const PlanResult b = f.planner.plan(f.home, f.mid, {100000});
    REQUIRE(a.success());
    REQUIRE(b.success());
    CHECK(a.expansions == b.expansions);
    REQUIRE(a.path->states.size() == b.path->states.size());
    for (std::size_t i = 0; i < a.path->states.size(); ++i)
        CHECK(a.path->states[i] == b.path->states[i]);
}

TEST_CASE("shortcut state: argmin with earliest tie and scan oracle") {
    Fixture f;
    const PlanResult r = f.planner.plan(f.home, f.mid, {1000000});
    REQUIRE(r.success());
    const Path& pi = *r.path;

    // Own goal: the shortcut lands at or before the grasp-begin state.
    const std::int32_t sc_own = f.planner.shortcut_index(pi, f.mid);
    CHECK(sc_own <= static_cast<std::int32_t>(pi.states.size()) - 2);

    std::mt19937_64 rng(43);
    for (int i = 0; i < 100; ++i) {
        const GoalPose g = f.lat.region().from_key(rng() % f.lat.region().size());
        const std::int32_t got = f.planner.shortcut_index(pi, g);
        std::int32_t best = 0;
        double best_h = f.planner.heuristic(pi.states[0], g);
        const std::size_t count = pi.states.size() - 1;  // grasp terminal excluded
        for (std::size_t k = 1; k < count; ++k) {
            const double h = f.planner.heuristic(pi.states[k], g);
            if (h < best_h) {
                best_h = h;
                best = static_cast<std::int32_t>(k);
            }
        }
        CHECK(got == best);
    }

    Path single;
    single.states = {f.home};
    CHECK(f.planner.shortcut_index(single, f.mid) == 0);
}

TEST_CASE("experience: own goal from the origin replans within the bounded budget") {
    Fixture f;
    const PlanResult root = f.planner.plan(f.home, f.mid, {1000000});
    REQUIRE(root.success());
    const PlanResult replay = f.planner.plan_with_experience(f.home, f.mid, *root.path,
                                                             {f.cfg.budgets.bounded_expansions});
    REQUIRE(replay.success());
    CHECK(replay.expansions <= f.cfg.budgets.bounded_expansions);
    std::string why;
    CHECK_MESSAGE(f.lat.replay_valid(*replay.path, &why), why);
}

TEST_CASE("experience: adjacent goal covered within the bounded budget") {
    Fixture f;
    const PlanResult root = f.planner.plan(f.home, f.mid, {1000000});
    REQUIRE(root.success());
    GoalPose adjacent = f.mid;
    adjacent.x_idx += 1;  // one discretization cell along the belt
    REQUIRE(f.lat.region().contains(adjacent));
    const PlanResult r = f.planner.plan_with_experience(f.home, adjacent, *root.path,
                                                        {f.cfg.budgets.bounded_expansions});
    CHECK(r.success());
    CHECK(r.expansions <= f.cfg.budgets.bounded_expansions);
}

TEST_CASE("experience: irrelevant path degrades to plain search behavior") {
    Fixture f;
    const PlanResult root = f.planner.plan(f.home, f.mid, {1000000});
    REQUIRE(root.success());
    const GoalPose awkward = f.lat.region().snap({{-1.24, 0.32}, -50.0 * M_PI / 180.0});
    const PlanResult with_exp = f.planner.plan_with_experience(f.home, awkward, *root.path, {5000});
    const PlanResult plain = f.planner.plan(f.home, awkward, {5000});
    CHECK(with_exp.expansions <= 5000);
    CHECK(plain.expansions <= 5000);
}

TEST_CASE("experience: shortcut segment expands into real primitives") {
    Fixture f;
    const PlanResult root = f.planner.plan(f.home, f.mid, {1000000});
    REQUIRE(root.success());
    const PlanResult r = f.planner.plan_with_experience(f.home, f.mid, *root.path, {250});
    REQUIRE(r.success());
    for (const Primitive& prim : r.path->primitives)
        CHECK(prim.kind != PrimitiveKind::kShortcut);
}
