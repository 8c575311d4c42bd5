#include "conveyor/query.hpp"

#include <algorithm>
#include <chrono>
#include <unordered_map>

namespace conveyor {

namespace {

const char* outcome_name(QueryOutcome o) {
    switch (o) {
        case QueryOutcome::kReplanned: return "replanned";
        case QueryOutcome::kLatched: return "latched";
        case QueryOutcome::kFailureUnreachable: return "failure-unreachable";
    }
    return "?";
}

/// Tags every state of `path` that lies on the given root path with its id.
void annotate_backing(Path& path, const Lattice& lat, const RootPath& rp) {
    std::unordered_map<std::uint64_t, std::int8_t> on_path;
    std::size_t count = rp.path.states.size();
    if (rp.path.terminal_grasp && count > 1) --count;
    for (std::size_t i = 0; i < count; ++i) on_path.emplace(lat.state_key(rp.path.states[i]), 1);
    if (path.backing.size() != path.states.size()) path.backing.assign(path.states.size(), -1);
    for (std::size_t i = 0; i < path.states.size(); ++i) {
        if (on_path.count(lat.state_key(path.states[i])))
            path.backing[i] = static_cast<std::int32_t>(rp.id);
    }
}

}  // namespace

nlohmann::json QueryStats::to_json() const {
    return {{"map_lookups", map_lookups},
            {"latch_checks", latch_checks},
            {"reuse_checks", reuse_checks},
            {"plan_expansions", plan_expansions},
            {"planner_calls", planner_calls},
            {"wall_time_s", wall_time},
            {"outcome", outcome_name(outcome)},
            {"scan_ticks", scan_ticks}};
}

Path merge_paths(const Path& curr, const Path& next, const State& s) {
    if (next.states.empty() || !(next.states.front() == s))
        throw ContractViolation("merge: next path must start at the transition state");
    std::int32_t idx = -1;
    for (std::size_t i = 0; i < curr.states.size(); ++i) {
        if (curr.states[i] == s) {
            idx = static_cast<std::int32_t>(i);
            break;
        }
    }
    if (idx < 0) throw ContractViolation("merge: transition state not on the current path");

    Path merged;
    merged.goal = next.goal;
    merged.has_goal = next.has_goal;
    merged.terminal_grasp = next.terminal_grasp;
    merged.states.assign(curr.states.begin(), curr.states.begin() + idx);
    merged.primitives.assign(curr.primitives.begin(), curr.primitives.begin() + idx);
    merged.states.insert(merged.states.end(), next.states.begin(), next.states.end());
    merged.primitives.insert(merged.primitives.end(), next.primitives.begin(),
                             next.primitives.end());

    const auto backing_of = [](const Path& p, std::size_t i) {
        return p.backing.size() == p.states.size() ? p.backing[i] : -1;
    };
    merged.backing.reserve(merged.states.size());
    for (std::int32_t i = 0; i < idx; ++i) merged.backing.push_back(backing_of(curr, i));
    for (std::size_t i = 0; i < next.states.size(); ++i)
        merged.backing.push_back(backing_of(next, i));
    return merged;
}

Path merge_paths_by_latching(const Lattice& lattice, const Path& curr, const Path& home,
                             const State& s) {
    if (home.states.empty()) throw ContractViolation("latch merge: empty home path");
    const State& target = home.states.front();
    if (target.t != s.t + 1)
        throw ContractViolation("latch merge: home path must start one tick after s");
    // Re-verify the latch motion.
    Path target_only;
    target_only.states = {target};
    const GoalPose* goal = home.has_goal ? &home.goal : nullptr;
    const LatchResult latch = lattice.can_latch(s, target_only, goal);
    if (!latch.ok) throw ContractViolation("latch merge: latch motion invalid");

    Path latch_step;
    latch_step.states = {s, target};
    Primitive prim;
    prim.kind = PrimitiveKind::kLatch;
    prim.ticks = 1;
    prim.q_to = target.q;
    latch_step.primitives = {prim};
    latch_step.goal = home.goal;
    latch_step.has_goal = home.has_goal;

    Path merged = merge_paths(curr, latch_step, s);
    // Append the home path from the latch target.
    merged.states.pop_back();
    merged.backing.pop_back();
    merged.states.insert(merged.states.end(), home.states.begin(), home.states.end());
    merged.primitives.insert(merged.primitives.end(), home.primitives.begin(),
                             home.primitives.end());
    const auto backing_of = [](const Path& p, std::size_t i) {
        return p.backing.size() == p.states.size() ? p.backing[i] : -1;
    };
    for (std::size_t i = 0; i < home.states.size(); ++i)
        merged.backing.push_back(backing_of(home, i));
    merged.terminal_grasp = home.terminal_grasp;
    return merged;
}

QueryEngine::QueryEngine(const Artifact& artifact, const Lattice& lattice, const Planner& planner)
    : artifact_(artifact), lat_(lattice), planner_(planner) {
    home_key_ = lat_.state_key(artifact_.s_home);
}

QueryResult QueryEngine::query(const GoalPose& g, const Path& curr, const State& s_start) const {
    const auto t0 = std::chrono::steady_clock::now();
    QueryResult result;
    QueryStats& stats = result.stats;
    const auto finish = [&](QueryOutcome outcome) -> QueryResult& {
        stats.outcome = outcome;
        stats.wall_time =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return result;
    };

    if (!lat_.region().contains(g)) throw ContractViolation("query goal outside the goal region");
    const std::uint64_t gkey = lat_.region().key(g);
    const SearchBudget budget{artifact_.bounded_budget};

    // Self-coverage fast path: the goal did not change.
    if (curr.has_goal && curr.goal == g && curr.terminal_grasp) {
        result.path = curr;
        return finish(QueryOutcome::kReplanned);
    }

    std::int32_t start_idx = -1;
    for (std::size_t i = 0; i < curr.states.size(); ++i) {
        if (curr.states[i] == s_start) {
            start_idx = static_cast<std::int32_t>(i);
            break;
        }
    }
    if (start_idx < 0) throw ContractViolation("s_start is not on the current path");
    if (s_start.t > lat_.t_rc_ticks())
        throw ContractViolation("s_start lies beyond the replan cutoff");

    // The home lookup feeding the latch fallback is state-independent; it is
    // resolved lazily, once, so the per-query lookup count stays within
    // ell + 1 while a first-scan direct hit costs exactly one lookup.
    bool home_resolved = false;
    const std::uint32_t* home_id = nullptr;
    const auto resolve_home = [&]() {
        if (!home_resolved) {
            home_resolved = true;
            ++stats.map_lookups;
            home_id = artifact_.map.find(home_key_, gkey);
        }
        return home_id;
    };

    std::int32_t end_idx = start_idx;
    while (end_idx + 1 < static_cast<std::int32_t>(curr.states.size()) &&
           curr.states[end_idx + 1].t <= lat_.t_rc_ticks())
        ++end_idx;

    const auto run_bounded = [&](const State& from, const Path& experience) {
        ++stats.planner_calls;
        PlanResult r = planner_.plan_with_experience(from, g, experience, budget);
        stats.plan_expansions += r.expansions;
        return r;
    };

    for (std::int32_t i = end_idx; i >= start_idx; --i) {
        const State& s = curr.states[i];
        stats.scan_ticks.push_back(s.t);
        const std::uint64_t skey = lat_.state_key(s);

        ++stats.map_lookups;
        if (const std::uint32_t* id = artifact_.map.find(skey, gkey)) {
            const RootPath& rp = artifact_.root_paths[*id];
            PlanResult r = run_bounded(s, rp.path);
            if (!r.success())
                throw IntegrityError("certified coverage entry failed to replay for state key " +
                                     std::to_string(skey) + ", goal key " + std::to_string(gkey));
            annotate_backing(*r.path, lat_, rp);
            result.path = merge_paths(curr, *r.path, s);
            return finish(QueryOutcome::kReplanned);
        }

        // Reuse the experience backing the current path: if s lies on a stored
        // root path whose covered set contains g, that path still serves.
        if (curr.backing.size() == curr.states.size() && curr.backing[i] >= 0) {
            ++stats.reuse_checks;
            const auto rid = static_cast<std::uint32_t>(curr.backing[i]);
            if (artifact_.covered_bits[rid].contains(gkey)) {
                const RootPath& rp = artifact_.root_paths[rid];
                const std::int32_t here = rp.path.index_at_tick(s.t);
                const std::int32_t sc = artifact_.shortcut_index_for(rid, gkey);
                if (here >= 0 && rp.path.states[here] == s && sc >= here) {
                    PlanResult r = run_bounded(s, rp.path);
                    if (!r.success())
                        throw IntegrityError("experience reuse failed to replay for state key " +
                                             std::to_string(skey));
                    annotate_backing(*r.path, lat_, rp);
                    result.path = merge_paths(curr, *r.path, s);
                    return finish(QueryOutcome::kReplanned);
                }
            }
        }

        if (resolve_home() != nullptr) {
            const RootPath& home_rp = artifact_.root_paths[*home_id];
            ++stats.latch_checks;
            const LatchResult latch = lat_.can_latch(s, home_rp.path, &g);
            if (latch.ok) {
                const std::int32_t target_idx = home_rp.path.index_at_tick(s.t + 1);
                const std::int32_t sc = artifact_.shortcut_index_for(*home_id, gkey);
                if (sc >= target_idx) {
                    PlanResult r = run_bounded(latch.target, home_rp.path);
                    if (!r.success())
                        throw IntegrityError("latch replan failed for state key " +
                                             std::to_string(skey));
                    annotate_backing(*r.path, lat_, home_rp);
                    result.path = merge_paths_by_latching(lat_, curr, *r.path, s);
                    return finish(QueryOutcome::kLatched);
                }
            }
        }
    }

    // Nothing in the scan window covers g. For a certified artifact this only
    // happens when g is unreachable; the earliest keyed state decides (goals
    // unreachable from it stay unreachable at every later state on the path).
    for (std::int32_t i = start_idx; i <= end_idx; ++i) {
        const std::uint64_t skey = lat_.state_key(curr.states[i]);
        if (artifact_.map.states_with_records.count(skey) == 0) continue;
        if (artifact_.map.is_unreachable(skey, gkey)) return finish(QueryOutcome::kFailureUnreachable);
        throw IntegrityError("goal key " + std::to_string(gkey) +
                             " has no record at scanned state key " + std::to_string(skey) +
                             "; artifact does not certify this instance");
    }
    throw IntegrityError("no scanned state carries coverage records; artifact mismatch");
}

}  // namespace conveyor
