#include "conveyor/preprocess.hpp"

#include <algorithm>
#include <cstdio>
#include <queue>
#include <stdexcept>
#include <unordered_set>

#include "conveyor/parallel.hpp"

namespace conveyor {

Preprocessor::Preprocessor(const Lattice& lattice, const Planner& planner, PreprocessParams params)
    : lat_(lattice), planner_(planner), params_(params), rng_(params.seed) {
    if (params_.root_budget <= 0 || params_.bounded_budget <= 0)
        throw ContractViolation("budgets must be positive");
    const GoalRegion& region = lat_.region();
    goal_centers_.reserve(region.size());
    for (std::size_t k = 0; k < region.size(); ++k)
        goal_centers_.push_back(region.center(region.from_key(k)));
}

const GoalSet& Preprocessor::reachable_from(const State& s) {
    const std::uint64_t skey = lat_.state_key(s);
    const auto hit = reachable_memo_.find(skey);
    if (hit != reachable_memo_.end()) return hit->second;

    const GoalRegion& region = lat_.region();
    GoalSet reach(region.size());
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(1 << 16);
    std::queue<State> frontier;
    frontier.push(s);
    seen.insert(skey);
    std::vector<Successor> succs;

    const double dt = lat_.params().dt;
    const double d_trig = lat_.params().d_trigger;
    const double alpha = lat_.params().alpha_trigger;
    const double speed = lat_.world().conveyor_speed;

    while (!frontier.empty()) {
        const State x = frontier.front();
        frontier.pop();
        ++stats_.closure_states;
        const EEPose ee = lat_.ee_pose(x);
        const double t = x.t * dt;
        // Only goals whose advected pose falls in the trigger disc can start
        // a grasp here.
        for (std::size_t gkey = 0; gkey < goal_centers_.size(); ++gkey) {
            if (reach.contains(gkey)) continue;
            const Pose2& c = goal_centers_[gkey];
            const double dx = c.position.x + speed * t - ee.position.x;
            if (dx < -d_trig || dx > d_trig) continue;
            const double dy = c.position.y - ee.position.y;
            if (dx * dx + dy * dy >= d_trig * d_trig) continue;
            if (std::abs(wrap_angle(c.yaw + M_PI - ee.yaw)) >= alpha) continue;
            const PairKey memo_key{lat_.state_key(x), gkey};
            auto it = grasp_memo_.find(memo_key);
            bool ok;
            if (it != grasp_memo_.end()) {
                ok = it->second;
            } else {
                ok = lat_.dynamic_grasp(x, region.from_key(gkey)).success;
                grasp_memo_.emplace(memo_key, ok);
            }
            if (ok) reach.insert(gkey);
        }
        succs.clear();
        lat_.static_successors(x, succs);
        for (const Successor& nxt : succs) {
            if (seen.insert(lat_.state_key(nxt.state)).second) frontier.push(nxt.state);
        }
    }
    return reachable_memo_.emplace(skey, std::move(reach)).first->second;
}

std::pair<std::vector<std::uint32_t>, GoalSet> Preprocessor::plan_root_paths(
    const State& s, const GoalSet& uncov_in, std::int32_t parent_id, std::int32_t parent_index) {
    const GoalRegion& region = lat_.region();
    std::vector<std::uint32_t> ids;
    GoalSet uncov = uncov_in;
    const std::uint64_t skey = lat_.state_key(s);
    map_.states_with_records.emplace(skey, s);

    // Goals outside the closure prefilter cannot be planned to; classify them
    // up front instead of exhausting the graph once per sampled goal.
    GoalSet unreachable = uncov;
    unreachable.erase_all(reachable_from(s));
    uncov.erase_all(unreachable);
    stats_.root_plan_failures += static_cast<std::int64_t>(unreachable.count());

    while (!uncov.empty()) {
        const std::size_t count = uncov.count();
        const std::uint64_t gkey = uncov.nth(static_cast<std::size_t>(rng_() % count));
        uncov.erase(gkey);
        const GoalPose g = region.from_key(gkey);

        ++stats_.root_plans;
        PlanResult res = planner_.plan(s, g, {params_.root_budget});
        if (!res.success()) {
            // The prefilter overapproximates (it ignores object-blocked
            // motions); the complete planner's exhaustion is authoritative.
            if (params_.verbosity >= 2) {
                std::fprintf(stderr, "[root-plan miss] tick %d goal %llu exp %lld exhausted %d\n",
                             s.t, static_cast<unsigned long long>(gkey),
                             static_cast<long long>(res.expansions), res.exhausted ? 1 : 0);
            }
            ++stats_.prefilter_mismatches;
            ++stats_.root_plan_failures;
            unreachable.insert(gkey);
            continue;
        }

        const auto id = static_cast<std::uint32_t>(root_paths_.size());
        RootPath rp;
        rp.id = id;
        rp.path = std::move(*res.path);
        rp.origin = s;
        rp.parent_id = parent_id;
        rp.parent_index = parent_index;

        // The sampled goal's own bounded certificate must hold: ride the path
        // to its shortcut state and regenerate the grasp.
        PlanResult own = planner_.plan_with_experience(s, g, rp.path, {params_.bounded_budget});
        ++stats_.experience_plans;
        if (!own.success())
            throw std::runtime_error(
                "bounded replan along a fresh root path failed (state tick " +
                std::to_string(s.t) + ", q " + [&]{ std::string r; for (std::uint8_t i = 0; i < s.n; ++i) r += std::to_string(s.q[i]) + ","; return r; }() + " goal key " + std::to_string(region.key(g)) +
                ", shortcut index " + std::to_string(planner_.shortcut_index(rp.path, g)) + "/" +
                std::to_string(rp.path.states.size()) + " states, expansions " +
                std::to_string(own.expansions) + "); increase the bounded budget");

        std::vector<std::pair<std::uint64_t, std::int32_t>> covered;
        covered.emplace_back(gkey, planner_.shortcut_index(rp.path, g));

        const std::vector<std::uint64_t> rest = uncov.keys();
        std::vector<std::uint8_t> ok(rest.size(), 0);
        std::vector<std::int32_t> sc(rest.size(), -1);
        parallel_for(rest.size(), params_.workers, [&](std::size_t i) {
            const GoalPose gj = region.from_key(rest[i]);
            const PlanResult r =
                planner_.plan_with_experience(s, gj, rp.path, {params_.bounded_budget});
            if (r.success()) {
                ok[i] = 1;
                sc[i] = planner_.shortcut_index(rp.path, gj);
            }
        });
        stats_.experience_plans += static_cast<std::int64_t>(rest.size());
        for (std::size_t i = 0; i < rest.size(); ++i) {
            if (!ok[i]) continue;
            covered.emplace_back(rest[i], sc[i]);
            uncov.erase(rest[i]);
        }
        std::sort(covered.begin(), covered.end());
        rp.covered_goal_keys.reserve(covered.size());
        rp.shortcut_indices.reserve(covered.size());
        for (const auto& [key, sc_idx] : covered) {
            rp.covered_goal_keys.push_back(key);
            rp.shortcut_indices.push_back(sc_idx);
            map_.entries.emplace(PairKey{skey, key}, id);
        }
        root_paths_.push_back(std::move(rp));
        ids.push_back(id);
    }

    if (!unreachable.empty()) {
        std::vector<std::uint64_t>& rec = map_.unreachable[skey];
        std::vector<std::uint64_t> merged = rec;
        for (std::uint64_t k : unreachable.keys()) merged.push_back(k);
        std::sort(merged.begin(), merged.end());
        merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
        rec = std::move(merged);
    }
    return {std::move(ids), std::move(unreachable)};
}

void Preprocessor::try_latching(const State& s, GoalSet& uncov, GoalSet& cov) {
    if (!params_.latching) return;
    const GoalRegion& region = lat_.region();
    const std::size_t n = lat_.arm().joint_count();
    const std::uint64_t skey = lat_.state_key(s);

    for (std::uint32_t id : map_.home_path_ids) {
        const RootPath& rp = root_paths_[id];
        ++stats_.latch_checks;
        const LatchResult latch = lat_.can_latch(s, rp.path, nullptr);
        if (!latch.ok) continue;
        const std::int32_t target_idx = rp.path.index_at_tick(s.t + 1);
        const bool crosses_cutoff = s.t + 1 > lat_.t_rc_ticks();

        std::array<double, kMaxJoints> q_from{}, q_to{};
        if (crosses_cutoff) {
            lat_.joint_angles(s, std::span<double>(q_from.data(), n));
            lat_.joint_angles(latch.target, std::span<double>(q_to.data(), n));
        }
        for (std::size_t k = 0; k < rp.covered_goal_keys.size(); ++k) {
            const std::uint64_t gkey = rp.covered_goal_keys[k];
            if (!uncov.contains(gkey)) continue;
            // The replan after latching rides the path from the latch target,
            // so the shortcut state must not lie behind it.
            if (rp.shortcut_indices[k] < target_idx) continue;
            if (crosses_cutoff) {
                const GoalPose g = region.from_key(gkey);
                if (lat_.motion_collides_object_part(std::span<const double>(q_from.data(), n),
                                                     std::span<const double>(q_to.data(), n),
                                                     s.t * lat_.params().dt, lat_.params().dt, g))
                    continue;
            }
            uncov.erase(gkey);
            cov.insert(gkey);
        }
        map_.latch_entries.emplace(PairKey{skey, id}, latch.target);
    }
}

std::pair<GoalSet, GoalSet> Preprocessor::preprocess(const State& s, GoalSet uncov, GoalSet cov,
                                                     std::int32_t parent_id,
                                                     std::int32_t parent_index) {
    ++stats_.recursion_calls;
    if (params_.verbosity >= 1) {
        std::fprintf(stderr, "[preprocess] tick %d: %zu uncovered, %zu paths so far\n", s.t,
                     uncov.count(), root_paths_.size());
    }
    auto [ids, unreachable] = plan_root_paths(s, uncov, parent_id, parent_index);
    if (!home_ids_set_) {
        map_.home_path_ids = ids;
        home_ids_set_ = true;
    }
    GoalSet covered = std::move(cov);
    {
        GoalSet newly = std::move(uncov);
        newly.erase_all(unreachable);
        covered.insert_all(newly);
    }

    if (s.t <= lat_.t_rc_ticks()) {
        for (std::uint32_t id : ids) {
            GoalSet g_i(lat_.region().size());
            for (std::uint64_t k : root_paths_[id].covered_goal_keys) g_i.insert(k);
            GoalSet gi_cov = g_i;
            GoalSet gi_uncov = covered;
            gi_uncov.erase_all(g_i);

            // States on the path after the origin, up to the cutoff, walked
            // backward; the copy keeps iteration safe while recursion grows
            // the root-path store.
            std::vector<std::pair<State, std::int32_t>> states;
            for (std::size_t i = 1; i < root_paths_[id].path.states.size(); ++i) {
                const State& x = root_paths_[id].path.states[i];
                if (x.t <= lat_.t_rc_ticks())
                    states.emplace_back(x, static_cast<std::int32_t>(i));
            }
            for (auto it = states.rbegin(); it != states.rend(); ++it) {
                try_latching(it->first, gi_uncov, gi_cov);
                if (gi_uncov.empty()) break;
                std::tie(gi_uncov, gi_cov) =
                    preprocess(it->first, std::move(gi_uncov), std::move(gi_cov),
                               static_cast<std::int32_t>(id), it->second);
                if (gi_uncov.empty()) break;
            }
        }
    }
    return {std::move(unreachable), std::move(covered)};
}

PreprocessResult Preprocessor::run(const State& s_home) {
    if (s_home.t != 0) throw ContractViolation("home state must be at tick 0");
    GoalSet full(lat_.region().size());
    for (std::size_t k = 0; k < lat_.region().size(); ++k) full.insert(k);

    auto [unreachable_home, covered_home] = preprocess(s_home, full, GoalSet(lat_.region().size()));

    if (params_.cover_home_wait && !covered_home.empty()) {
        // The robot waits at home until the first estimate, so the waiting
        // states must cover their reachable goals like any on-path state.
        GoalSet uncov = covered_home;
        GoalSet cov(lat_.region().size());
        for (std::int32_t k = lat_.t_rc_ticks(); k >= 1; --k) {
            State x = s_home;
            x.t = k;
            try_latching(x, uncov, cov);
            if (uncov.empty()) break;
            std::tie(uncov, cov) =
                preprocess(x, std::move(uncov), std::move(cov), kLineageWaitPath, k);
            if (uncov.empty()) break;
        }
    }

    PreprocessResult result;
    result.map = std::move(map_);
    result.root_paths = std::move(root_paths_);
    result.covered_from_home = std::move(covered_home);
    result.unreachable_from_home = std::move(unreachable_home);
    result.stats = stats_;
    return result;
}

}  // namespace conveyor
