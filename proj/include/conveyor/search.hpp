#pragma once

#include <cstdint>
#include <optional>

#include "conveyor/lattice.hpp"

namespace conveyor {

struct SearchBudget {
    std::int64_t max_expansions = 0;
};

struct SearchParams {
    double lambda = 1.0;  // intercept-time weight inside the heuristic
    double weight = 50.0; // heuristic inflation for weighted A*
};

/// Sentinel heuristic value when no intercept exists.
inline constexpr double kNoIntercept = 1e9;

struct PlanResult {
    std::optional<Path> path;
    std::int64_t expansions = 0;
    bool exhausted = false;  // open list emptied before the budget ran out

    bool success() const { return path.has_value(); }
};

/// Weighted A* over the lattice with optional experience reuse.
class Planner {
public:
    Planner(const Lattice& lattice, SearchParams params) : lat_(lattice), params_(params) {}

    const SearchParams& search_params() const { return params_; }

    /// max(lambda * intercept_time, |yaw difference|); intercept time is the
    /// smallest tau >= 0 with ||ee - obj(t + tau)|| <= v_ee_max * tau.
    double heuristic(const State& s, const GoalPose& g) const;

    /// Analytic intercept time used by the heuristic (kNoIntercept if none).
    double intercept_time(const State& s, const GoalPose& g) const;

    PlanResult plan(const State& start, const GoalPose& g, const SearchBudget& budget) const;

    /// Index on the path of the earliest state minimizing the heuristic to g.
    std::int32_t shortcut_index(const Path& root_path, const GoalPose& g) const;
    State shortcut_state(const Path& root_path, const GoalPose& g) const;

    /// plan() with one extra successor for states on root_path: the shortcut
    /// state, at the cost of traversing the path segment, valid only while
    /// that segment stays collision-free for this goal.
    PlanResult plan_with_experience(const State& start, const GoalPose& g, const Path& root_path,
                                    const SearchBudget& budget) const;

private:
    PlanResult run(const State& start, const GoalPose& g, const SearchBudget& budget,
                   const Path* experience) const;

    const Lattice& lat_;
    SearchParams params_;
};

}  // namespace conveyor
