#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "conveyor/artifact.hpp"
#include "conveyor/search.hpp"

namespace conveyor {

/// Raised when the coverage map's own certificates fail to replay — a
/// corrupted or foreign artifact, never a domain outcome.
struct IntegrityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class QueryOutcome : std::uint8_t {
    kReplanned,
    kLatched,
    kFailureUnreachable,
};

struct QueryStats {
    std::int64_t map_lookups = 0;
    std::int64_t latch_checks = 0;
    std::int64_t reuse_checks = 0;  // current-experience provenance tests
    std::int64_t plan_expansions = 0;
    std::int64_t planner_calls = 0;
    double wall_time = 0.0;  // seconds, measured
    QueryOutcome outcome = QueryOutcome::kFailureUnreachable;
    std::vector<std::int32_t> scan_ticks;  // backward scan order, observable

    nlohmann::json to_json() const;
};

struct QueryResult {
    std::optional<Path> path;
    QueryStats stats;
    bool success() const { return path.has_value(); }
};

/// Execution bookkeeping for one simulated pickup.
struct ExecutionState {
    Path current_path;
    std::int32_t state_index = 0;
    double elapsed = 0.0;
};

/// Prefix of curr up to s, then next (which starts at s).
Path merge_paths(const Path& curr, const Path& next, const State& s);

/// Prefix of curr up to s, the delta_t latch primitive s -> s', then home
/// (which starts at s'). The latch feasibility is re-verified.
Path merge_paths_by_latching(const Lattice& lattice, const Path& curr, const Path& home,
                             const State& s);

/// Online stage: constant-time replanning against a preprocessed artifact.
/// Immutable after construction; concurrent queries are safe.
class QueryEngine {
public:
    QueryEngine(const Artifact& artifact, const Lattice& lattice, const Planner& planner);

    /// Replans toward g from the scan window [s_start, cutoff] of curr.
    /// Exactly one bounded planner call happens on the success paths; failure
    /// means g is recorded unreachable from the scanned states.
    QueryResult query(const GoalPose& g, const Path& curr, const State& s_start) const;

    const Artifact& artifact() const { return artifact_; }

private:
    const Artifact& artifact_;
    const Lattice& lat_;
    const Planner& planner_;
    std::uint64_t home_key_ = 0;
};

}  // namespace conveyor
