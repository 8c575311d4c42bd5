#pragma once

#include <cstdint>
#include <random>
#include <utility>

#include "conveyor/coverage.hpp"
#include "conveyor/goalset.hpp"
#include "conveyor/search.hpp"

namespace conveyor {

struct PreprocessParams {
    std::int64_t root_budget = 5'000'000;  // effectively exhaustive at desk scale
    std::int64_t bounded_budget = 250;     // certified per-query expansion budget
    std::uint64_t seed = 1;
    bool latching = true;
    bool cover_home_wait = true;  // run the backward loop over the waiting path too
    int workers = 4;
    int verbosity = 0;  // >= 1: recursion progress on stderr
};

struct PreprocessStats {
    std::int64_t root_plans = 0;
    std::int64_t root_plan_failures = 0;
    std::int64_t experience_plans = 0;
    std::int64_t latch_checks = 0;
    std::int64_t recursion_calls = 0;
    std::int64_t closure_states = 0;     // states visited by reachability prefilters
    std::int64_t prefilter_mismatches = 0;  // prefilter said reachable, planner exhausted
};

struct PreprocessResult {
    CoverageMap map;
    std::vector<RootPath> root_paths;
    GoalSet covered_from_home;
    GoalSet unreachable_from_home;
    PreprocessStats stats;
};

/// Offline stage: computes root paths and the coverage map so that every
/// replannable state covers all of its reachable goals within the bounded
/// budget. Construction is recursive; the resulting map is flat.
class Preprocessor {
public:
    Preprocessor(const Lattice& lattice, const Planner& planner, PreprocessParams params);

    /// Full pipeline from the home state (tick 0). Consumes this object.
    PreprocessResult run(const State& s_home);

    // The individual stages, exposed for targeted tests. They mutate the
    // in-progress map/root-path store inside this object.

    /// Samples goals (seeded, uniform, without replacement) and plans root
    /// paths from s until every goal in uncov is covered or unreachable.
    /// Returns the new root-path ids and the goals unreachable from s.
    /// parent_id/parent_index record the lineage of the new paths.
    std::pair<std::vector<std::uint32_t>, GoalSet> plan_root_paths(
        const State& s, const GoalSet& uncov, std::int32_t parent_id = kLineageHome,
        std::int32_t parent_index = 0);

    /// Moves goals covered by latching onto home root paths from uncov to cov
    /// and records the latch targets.
    void try_latching(const State& s, GoalSet& uncov, GoalSet& cov);

    /// One recursion of the offline stage: returns (unreachable-from-s,
    /// covered-by-s); covered accumulates the incoming cov set.
    std::pair<GoalSet, GoalSet> preprocess(const State& s, GoalSet uncov, GoalSet cov,
                                           std::int32_t parent_id = kLineageHome,
                                           std::int32_t parent_index = 0);

    const CoverageMap& map() const { return map_; }
    const std::vector<RootPath>& root_paths() const { return root_paths_; }
    const PreprocessStats& stats() const { return stats_; }

    /// Goals graspable from anywhere in the static/wait closure of s. Ignoring
    /// the object's own geometry makes this a superset of the true reachable
    /// set, so a negative answer is final; positives are confirmed by the
    /// (complete) root planner.
    const GoalSet& reachable_from(const State& s);

private:
    const Lattice& lat_;
    const Planner& planner_;
    PreprocessParams params_;
    std::mt19937_64 rng_;
    CoverageMap map_;
    std::vector<RootPath> root_paths_;
    PreprocessStats stats_;
    bool home_ids_set_ = false;
    std::unordered_map<std::uint64_t, GoalSet> reachable_memo_;
    std::unordered_map<PairKey, bool, PairKeyHash> grasp_memo_;
    std::vector<Pose2> goal_centers_;  // indexed by goal key
};

}  // namespace conveyor
