#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "conveyor/config.hpp"
#include "conveyor/coverage.hpp"
#include "conveyor/goalset.hpp"

namespace conveyor {

struct ArtifactError : std::runtime_error {
    enum class Kind { kBadMagic, kVersion, kCorrupt, kTruncated, kConfigHash, kInvalid };
    Kind kind;
    ArtifactError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

/// Everything the query stage needs, produced offline and persisted as a
/// versioned binary container. Loading is fail-closed: any mismatch or
/// corruption raises ArtifactError before a partial map can be observed.
struct Artifact {
    Config config;
    State s_home;
    std::int64_t bounded_budget = 0;
    std::vector<RootPath> root_paths;
    CoverageMap map;

    /// Per-root-path covered-goal bitsets; rebuilt after deserialization.
    std::vector<GoalSet> covered_bits;

    void rebuild_runtime_index();
    /// Shortcut index cached for (path id, goal key), or -1 when the goal is
    /// not covered by that path.
    std::int32_t shortcut_index_for(std::uint32_t path_id, std::uint64_t goal_key) const;
};

std::vector<std::uint8_t> serialize_artifact(const Artifact& artifact);
Artifact deserialize_artifact(std::span<const std::uint8_t> bytes);

void save_artifact(const std::string& path, const Artifact& artifact);
Artifact load_artifact(const std::string& path);

}  // namespace conveyor
