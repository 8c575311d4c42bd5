#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "conveyor/lattice.hpp"
#include "conveyor/search.hpp"

namespace conveyor {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::uint64_t fnv1a(const void* data, std::size_t len,
                           std::uint64_t h = 1469598103934665603ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

struct GoalRegionConfig {
    double x_exec = -1.20;
    double eps_p = 0.025;
    double yaw_min = -50.0 * M_PI / 180.0;
    double yaw_max = -10.0 * M_PI / 180.0;
    double res_xy = 0.01;
    double res_yaw = 10.0 * M_PI / 180.0;
};

struct BudgetConfig {
    std::int64_t root_expansions = 5'000'000;
    /// Certified per-query expansion budget; 0 means calibrate at preprocess
    /// time (rho * t_bound / measured cost, floored to a power of two).
    std::int64_t bounded_expansions = 250;
    double rho = 0.5;
    /// Pinned model cost of one expansion (s); converts time budgets into
    /// expansion budgets deterministically.
    double model_cost_per_expansion = 4.0e-4;
};

struct PreprocessConfig {
    double t_rc = 3.5;
    double t_bound = 0.2;
    bool latching = true;
    bool cover_home_wait = true;
    int workers = 4;
};

struct PerceptionConfig {
    Vec2 camera{0.25, 0.30};
    double period = 0.5;
    double accuracy_distance = 1.0;  // estimates are accurate once closer than this
    double eps_near = 0.002;
    double eps_far = 0.022;
    double dist_near = 0.85;
    double dist_far = 1.45;
    double yaw_err_near = 1.5 * M_PI / 180.0;
    double yaw_err_far = 12.0 * M_PI / 180.0;
};

struct BenchmarkConfig {
    int episodes = 100;
    std::vector<double> baseline_budgets{0.2, 0.5, 1.0, 2.0};
    double grasp_tol_pos = 0.01;
    double grasp_tol_yaw = 10.0 * M_PI / 180.0;
    int workers = 4;
};

struct Config {
    std::uint64_t seed = 1;
    ArmModel arm;
    std::vector<double> home_q;  // radians, must lie on the joint lattice
    WorldModel world;
    GoalRegionConfig goal;
    LatticeParams lattice;  // t_rc is taken from preprocess
    SearchParams search;
    BudgetConfig budgets;
    PreprocessConfig preprocess;
    PerceptionConfig perception;
    BenchmarkConfig benchmark;

    static Config desk_default();
    static Config from_json(const nlohmann::json& j);
    static Config load_file(const std::string& path, bool apply_env = true);

    void validate() const;
    void apply_env_overrides();
    nlohmann::json to_json() const;
    std::string canonical_dump() const;
    std::uint64_t hash() const;

    GoalRegion make_goal_region() const;
    Lattice make_lattice() const;
    State home_state(const Lattice& lattice) const;
    std::int32_t cutoff_ticks() const;  // ell = t_rc / dt
};

}  // namespace conveyor
