#pragma once

#include <cmath>
#include <cstdint>
#include <mutex>
#include <optional>
#include <unordered_set>
#include <vector>

#include "conveyor/geometry.hpp"

#ifndef M_PI
#define M_PI 3.14159265358979323846
#endif

namespace conveyor {

/// Lattice node: discretized joint configuration plus a time index on the
/// delta_t grid. Joint indices are wrapped into [0, angle_values).
struct State {
    std::array<std::int16_t, kMaxJoints> q{};
    std::int32_t t = 0;
    std::uint8_t n = 0;

    bool operator==(const State& o) const {
        if (n != o.n || t != o.t) return false;
        for (std::uint8_t i = 0; i < n; ++i)
            if (q[i] != o.q[i]) return false;
        return true;
    }
};

/// Discretized object pose (x, y, yaw) at its reference time t = 0.
struct GoalPose {
    std::int32_t x_idx = 0;
    std::int32_t y_idx = 0;
    std::int32_t yaw_idx = 0;

    bool operator==(const GoalPose& o) const {
        return x_idx == o.x_idx && y_idx == o.y_idx && yaw_idx == o.yaw_idx;
    }
};

/// Finite goal region G_full: x in [x_exec - 2 eps_p, x_exec + 2 eps_p],
/// y spanning the belt width, yaw in [yaw_min, yaw_max].
class GoalRegion {
public:
    GoalRegion() = default;
    GoalRegion(double x_exec, double eps_p, Interval y_range, double yaw_min, double yaw_max,
               double res_xy, double res_yaw);

    bool contains(const GoalPose& g) const;
    std::uint64_t key(const GoalPose& g) const;
    GoalPose from_key(std::uint64_t key) const;
    /// Snaps a continuous pose onto the region grid, clamping to the bounds.
    /// Sets clamped when the pose fell outside the region.
    GoalPose snap(const Pose2& pose, bool* clamped = nullptr) const;
    Pose2 center(const GoalPose& g) const;
    std::vector<GoalPose> enumerate() const;
    std::size_t size() const { return static_cast<std::size_t>(nx_) * ny_ * nyaw_; }

    double x_exec() const { return x_exec_; }
    double eps_p() const { return eps_p_; }
    double res_xy() const { return res_xy_; }
    double res_yaw() const { return res_yaw_; }

private:
    double x_exec_ = 0.0, eps_p_ = 0.0;
    double res_xy_ = 0.01, res_yaw_ = 10.0 * M_PI / 180.0;
    std::int32_t x_lo_ = 0, y_lo_ = 0, yaw_lo_ = 0;
    std::int32_t nx_ = 0, ny_ = 0, nyaw_ = 0;
};

enum class PrimitiveKind : std::uint8_t {
    kStaticJoint,
    kWait,
    kDynamicGrasp,
    kLatch,
    kShortcut,  // search-internal; expanded before a path is returned
};

struct TrajectorySample {
    std::array<double, kMaxJoints> q{};
    double t_rel = 0.0;  // seconds since primitive start
};

struct Primitive {
    PrimitiveKind kind = PrimitiveKind::kWait;
    std::int8_t joint = -1;     // static-joint only
    std::int8_t direction = 0;  // static-joint only: +1 / -1
    std::int32_t ticks = 1;     // duration in delta_t units, > 0
    std::array<std::int16_t, kMaxJoints> q_to{};       // latch target configuration
    std::vector<TrajectorySample> trajectory;          // dynamic-grasp only
};

/// Time-ordered path through the lattice. primitives[i] connects
/// states[i] -> states[i+1].
struct Path {
    std::vector<State> states;
    std::vector<Primitive> primitives;
    GoalPose goal{};
    bool has_goal = false;
    bool terminal_grasp = false;
    /// Root path id backing each state (experience provenance), -1 for states
    /// not on a stored root path. Empty means no provenance at all.
    std::vector<std::int32_t> backing;

    std::int32_t start_tick() const { return states.empty() ? 0 : states.front().t; }
    std::int32_t end_tick() const { return states.empty() ? 0 : states.back().t; }
    double cost_seconds(double dt) const { return (end_tick() - start_tick()) * dt; }
    /// Index of the state at the given tick, or -1 (states are tick-sorted).
    std::int32_t index_at_tick(std::int32_t tick) const;
};

struct LatticeParams {
    double dtheta = 6.0 * M_PI / 180.0;  // joint resolution, must divide 2*pi
    double dt = 0.5;                     // time resolution (s)
    double t_rc = 3.5;                   // replan cutoff (s)
    double d_trigger = 0.15;             // grasp trigger distance (m)
    double alpha_trigger = 45.0 * M_PI / 180.0;
    double grasp_gain = 12.0;      // proportional gain (1/s)
    double grasp_dt_int = 0.05;    // integration step (s)
    double grasp_t_close = 0.5;    // gripper-close tracking time (s)
    double grasp_t_max = 3.0;      // approach timeout (s)
    double enclose_pos_tol = 0.01;
    double enclose_yaw_tol = 10.0 * M_PI / 180.0;
    double collision_dt = 0.25;    // motion-sampling step (s)
    std::int32_t horizon_ticks = 0;  // 0 = derive from world/arm
};

struct Successor {
    State state;
    Primitive primitive;
    std::int32_t cost_ticks = 0;
    bool terminal = false;  // successful dynamic grasp
};

struct GraspResult {
    bool success = false;
    State terminal;
    Primitive primitive;  // kDynamicGrasp with trajectory
};

struct LatchResult {
    bool ok = false;
    State target;
};

/// The implicit time-augmented graph over (q, t). Owns the models and all
/// primitive generation; all methods are pure and safe to call concurrently.
class Lattice {
public:
    Lattice(ArmModel arm, WorldModel world, GoalRegion region, LatticeParams params);

    const ArmModel& arm() const { return arm_; }
    const WorldModel& world() const { return world_; }
    const GoalRegion& region() const { return region_; }
    const LatticeParams& params() const { return params_; }
    std::int32_t horizon_ticks() const { return horizon_ticks_; }
    std::int32_t t_rc_ticks() const { return t_rc_ticks_; }
    std::int32_t angle_values() const { return angle_values_; }

    State make_state(std::span<const double> q, std::int32_t tick) const;
    void joint_angles(const State& s, std::span<double> out) const;
    double angle_of(std::int16_t idx) const;
    std::uint64_t state_key(const State& s) const;
    EEPose ee_pose(const State& s) const;
    /// Object pose advected to time t (object frame; collision geometry).
    Pose2 goal_pose_at(const GoalPose& g, double t) const;
    /// End-effector target for grasping at time t: the object position with
    /// the gripper facing the incoming object (yaw flipped by pi), so the
    /// box meets the fingers instead of sliding through the forearm.
    Pose2 grasp_target_at(const GoalPose& g, double t) const;

    /// Static-joint and wait successors only (goal-independent).
    void static_successors(const State& s, std::vector<Successor>& out) const;
    /// Full successor set: 2n joint moves + wait, each collision-checked,
    /// plus one terminal dynamic-grasp successor when triggered.
    void successors(const State& s, const GoalPose& g, std::vector<Successor>& out) const;

    bool trigger_dynamic(const State& s, const GoalPose& g) const;
    GraspResult dynamic_grasp(const State& s, const GoalPose& g) const;

    /// Latch feasibility from s onto root_path at t(s) + delta_t. When goal is
    /// given, the object-collision part of the motion check uses it.
    LatchResult can_latch(const State& s, const Path& root_path, const GoalPose* goal) const;

    /// Collision check of the linear joint-space motion from (q_from, t_from)
    /// over dur seconds, sampled every collision_dt.
    bool motion_collides(std::span<const double> q_from, std::span<const double> q_to,
                         double t_from, double dur, const GoalPose* goal) const;
    /// Same check restricted to sample times strictly greater than t_rc
    /// (the object-dependent part of a motion's validity).
    bool motion_collides_object_part(std::span<const double> q_from, std::span<const double> q_to,
                                     double t_from, double dur, const GoalPose& goal) const;

    /// Replays a path primitive by primitive: connectivity, strictly
    /// increasing time, collision-free motion, grasp terminal consistency.
    bool replay_valid(const Path& path, std::string* why = nullptr) const;

private:
    bool state_collides(std::span<const double> q, double t, const GoalPose* goal) const;
    bool motion_collides_impl(std::span<const double> q_from, std::span<const double> q_to,
                              double t_from, double dur, const GoalPose* goal,
                              bool object_part_only) const;
    GraspResult dynamic_grasp_uncached(const State& s, const GoalPose& g) const;

    ArmModel arm_;
    WorldModel world_;
    GoalRegion region_;
    LatticeParams params_;
    std::int32_t angle_values_ = 0;
    std::int32_t t_rc_ticks_ = 0;
    std::int32_t horizon_ticks_ = 0;
    std::int32_t static_move_ticks_ = 1;

    // Memo of failed grasp attempts by exact (state, goal) key; grasping is a
    // pure function, so the cache only skips recomputation. Successes are not
    // cached (their trajectories would dominate memory).
    struct StateGoalKey {
        std::uint64_t state;
        std::uint64_t goal;
        bool operator==(const StateGoalKey& o) const {
            return state == o.state && goal == o.goal;
        }
    };
    struct StateGoalHash {
        std::size_t operator()(const StateGoalKey& k) const {
            std::uint64_t h = k.state * 0x9e3779b97f4a7c15ULL;
            h ^= k.goal + 0x517cc1b727220a95ULL + (h << 6) + (h >> 2);
            return static_cast<std::size_t>(h);
        }
    };
    mutable std::unordered_set<StateGoalKey, StateGoalHash> failed_grasps_;
    mutable std::mutex grasp_mutex_;
};

}  // namespace conveyor
