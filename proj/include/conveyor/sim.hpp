#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "conveyor/query.hpp"

namespace conveyor {

enum class Strategy : std::uint8_t { kE1ReplanAlways, kE2FirstPose, kE3BestPose };
enum class Method : std::uint8_t { kOurs, kWastarScratch, kRrt };

const char* strategy_name(Strategy s);
const char* method_name(Method m);
Strategy strategy_from_name(const std::string& name);
Method method_from_name(const std::string& name);

/// Raised when a scenario breaks the static-until-cutoff assumption (the
/// object touched the arm before t_rc); a config defect, not an outcome.
struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Converging-noise perception: error magnitude decreases linearly with the
/// object's distance to the camera; every emitted estimate stays within eps_p
/// of the true pose (asserted).
class PerceptionModel {
public:
    PerceptionModel(const PerceptionConfig& cfg, double eps_p, std::uint64_t seed);

    Pose2 estimate(const Pose2& true_at_0, double conveyor_speed, double t);
    double position_error_bound(double camera_distance) const;
    double yaw_error_bound(double camera_distance) const;
    bool is_accurate_range(const Pose2& estimated_current) const;

private:
    PerceptionConfig cfg_;
    double eps_p_;
    std::mt19937_64 rng_;
};

/// Shifts a later estimate back along the belt so it lands in the goal
/// region's time frame, snapping to the goal grid and clamping to the region.
GoalPose back_project(const GoalRegion& region, const Pose2& estimate, double dt, double speed,
                      bool* clamped = nullptr);

enum class EpisodeOutcome : std::uint8_t { kPickupSuccess, kMiss, kPlannerFailure };

const char* outcome_name(EpisodeOutcome o);

struct ReplanEvent {
    double t = 0.0;
    GoalPose goal;
    bool clamped = false;
    bool success = false;
    QueryStats stats;          // ours; zeroed wall time in traces
    std::int64_t expansions = 0;
    double model_plan_time = 0.0;  // deterministic: expansions x pinned cost
};

struct Episode {
    Strategy strategy = Strategy::kE1ReplanAlways;
    Method method = Method::kOurs;
    double budget_s = 0.0;
    std::uint64_t seed = 0;
    Pose2 true_initial;
    std::vector<double> estimate_times;
    std::vector<Pose2> estimates;
    std::vector<ReplanEvent> replans;
    EpisodeOutcome outcome = EpisodeOutcome::kPlannerFailure;
    double grasp_pos_error = 0.0;
    double grasp_yaw_error = 0.0;
    double path_cost_s = 0.0;
    int replan_cycles = 0;
    bool plan_success_after_mark = false;  // per-episode planning-success label

    nlohmann::json to_json() const;
};

struct SimContext {
    const Config& config;
    const Lattice& lattice;
    const Planner& planner;
    const Artifact* artifact = nullptr;     // required for Method::kOurs
    const QueryEngine* engine = nullptr;    // required for Method::kOurs
};

Path make_wait_path(const Lattice& lattice, const State& home, std::int32_t ticks);

Episode run_episode(const SimContext& ctx, Strategy strategy, Method method, double budget_s,
                    std::uint64_t seed);

/// Baseline entry point: wA*-from-scratch or kinodynamic RRT under the given
/// time budget, run through the same sense-plan-act loop.
Episode run_baseline(const SimContext& ctx, Method method, Strategy strategy, double budget_s,
                     std::uint64_t seed);

struct BenchmarkCell {
    Method method;
    double budget_s = 0.0;
    int episodes = 0;
    double pickup_pct = 0.0;
    double plan_success_pct = 0.0;         // per planning query
    double episode_plan_success_pct = 0.0; // per episode, after the accuracy mark
    double mean_plan_time_s = 0.0;
    std::int64_t max_lookups = 0;
    double mean_cycles = 0.0;
    double mean_cost_s = 0.0;
};

struct BenchmarkReport {
    std::vector<BenchmarkCell> cells;
    std::vector<Episode> episodes;

    std::string to_csv() const;  // fixed header, deterministic bytes
    std::string to_jsonl() const;
};

BenchmarkReport run_benchmark(const SimContext& ctx, int episodes_per_cell,
                              const std::vector<double>& baseline_budgets, int workers,
                              std::uint64_t base_seed);

}  // namespace conveyor
