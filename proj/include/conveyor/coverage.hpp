#pragma once

#include <algorithm>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "conveyor/lattice.hpp"

namespace conveyor {

/// A precomputed path from its origin (a replannable state) to one goal,
/// stored together with the set of goals it certifiably serves as an
/// experience for within the bounded budget.
/// Lineage markers: how a root path's origin was reached during construction.
inline constexpr std::int32_t kLineageHome = -1;      // rooted at s_home directly
inline constexpr std::int32_t kLineageWaitPath = -2;  // rooted on the waiting path

struct RootPath {
    std::uint32_t id = 0;
    Path path;
    State origin;
    std::vector<std::uint64_t> covered_goal_keys;  // sorted, includes own goal
    /// Shortcut index on `path` per covered goal, aligned with
    /// covered_goal_keys; cached at preprocessing time.
    std::vector<std::int32_t> shortcut_indices;
    /// Parent root path this one branched from (or a lineage marker), plus
    /// the index of `origin` on the parent. Lets a full execution history
    /// from s_home be reconstructed for any stored path.
    std::int32_t parent_id = kLineageHome;
    std::int32_t parent_index = 0;
};

struct PairKey {
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    bool operator==(const PairKey& o) const { return a == o.a && b == o.b; }
};

struct PairKeyHash {
    std::size_t operator()(const PairKey& k) const {
        std::uint64_t h = k.a * 0x9e3779b97f4a7c15ULL;
        h ^= k.b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        return static_cast<std::size_t>(h);
    }
};

/// O(1)-lookup certificates produced by preprocessing.
///   entries:       (state key, goal key) -> root path id, meaning
///                  plan_with_experience(state, goal, path) succeeded within
///                  the bounded budget.
///   latch_entries: (state key, root path id) -> latch target state.
///   unreachable:   state key -> goals proven unreachable from that state.
struct CoverageMap {
    std::unordered_map<PairKey, std::uint32_t, PairKeyHash> entries;
    std::unordered_map<PairKey, State, PairKeyHash> latch_entries;
    std::vector<std::uint32_t> home_path_ids;
    std::unordered_map<std::uint64_t, std::vector<std::uint64_t>> unreachable;  // sorted values

    const std::uint32_t* find(std::uint64_t state_key, std::uint64_t goal_key) const {
        const auto it = entries.find({state_key, goal_key});
        return it == entries.end() ? nullptr : &it->second;
    }

    bool is_unreachable(std::uint64_t state_key, std::uint64_t goal_key) const {
        const auto it = unreachable.find(state_key);
        if (it == unreachable.end()) return false;
        return std::binary_search(it->second.begin(), it->second.end(), goal_key);
    }

    bool has_state(std::uint64_t state_key) const { return states_with_records.count(state_key) > 0; }

    /// Keys of all states where planning certificates or unreachability
    /// records were produced (the map's replannable states).
    std::unordered_map<std::uint64_t, State> states_with_records;
};

}  // namespace conveyor
