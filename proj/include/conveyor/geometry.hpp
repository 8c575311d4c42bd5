#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace conveyor {

// Hard cap on arm joints; keeps states fixed-size and keys packable in 64 bits.
inline constexpr std::size_t kMaxJoints = 8;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const;
};

double distance(const Vec2& a, const Vec2& b);

/// Normalizes an angle into (-pi, pi].
double wrap_angle(double a);

/// Planar pose: position plus yaw in (-pi, pi].
struct Pose2 {
    Vec2 position;
    double yaw = 0.0;
};

using EEPose = Pose2;

/// Advects a pose along +x at the given speed for dt seconds.
Pose2 advect(const Pose2& p, double speed, double dt);

/// Convex polygon, counter-clockwise vertex order.
struct Polygon {
    std::vector<Vec2> vertices;

    bool contains(const Vec2& p) const;
    /// Minimum distance from p to the polygon (0 if inside).
    double distance_to(const Vec2& p) const;
    Polygon transformed(const Pose2& pose) const;
    double circumradius() const;
};

/// Distance between two segments [a0,a1] and [b0,b1].
double segment_segment_distance(const Vec2& a0, const Vec2& a1, const Vec2& b0, const Vec2& b1);

/// Distance from segment [a0,a1] to a convex polygon (0 if they intersect).
double segment_polygon_distance(const Vec2& a0, const Vec2& a1, const Polygon& poly);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double length() const { return hi - lo; }
    bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Planar n-link revolute arm with swept-disc (capsule) link geometry.
/// The distal gripper_reach meters of the last link form the gripper; that
/// portion is exempt from object-collision tests so it can enclose the target.
struct ArmModel {
    std::vector<double> link_lengths;           // m
    std::vector<double> joint_velocity_limits;  // rad/s, nominal constant-velocity profile
    Vec2 base_position;
    double gripper_reach = 0.05;  // m
    double link_radius = 0.02;    // m
    bool self_collision = false;  // reserved; must stay false

    std::size_t joint_count() const { return link_lengths.size(); }
    double reach() const;
    /// Max end-effector speed at full extension, all joints at their limits.
    double max_ee_speed() const;
    void validate() const;
};

struct WorldModel {
    double conveyor_speed = 0.2;  // m/s along +x
    Interval conveyor_x;          // belt surface x-extent
    Interval conveyor_y;          // belt surface y-extent (belt width)
    std::vector<Polygon> static_obstacles;
    Polygon object_shape;  // convex, in object frame

    void validate() const;
};

struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

/// Joint positions of the arm: base, joint 1, ..., end effector (n+1 points).
void chain_points(const ArmModel& arm, std::span<const double> q, std::span<Vec2> out);

EEPose forward_kinematics(const ArmModel& arm, std::span<const double> q);

/// Analytic Jacobian of (x, y, yaw) w.r.t. the joint angles, column-major per joint.
struct Jacobian {
    std::size_t n = 0;
    std::array<double, 3 * kMaxJoints> data{};  // data[row * n + col]
    double at(std::size_t row, std::size_t col) const { return data[row * n + col]; }
    double& at(std::size_t row, std::size_t col) { return data[row * n + col]; }
};

Jacobian jacobian(const ArmModel& arm, std::span<const double> q);

/// Damped least-squares resolved-rate step: qdot = J^T (J J^T + damping^2 I)^-1 v.
void resolved_rate(const Jacobian& jac, const std::array<double, 3>& v, double damping,
                   std::span<double> qdot_out);

/// True iff the arm at q collides with a static obstacle, or — only when
/// t > t_rc and an object pose is given — with the object advected to time t.
/// object_pose_at_0 is the object pose at t = 0.
bool collides(const ArmModel& arm, const WorldModel& world, std::span<const double> q, double t,
              const Pose2* object_pose_at_0, double t_rc);

}  // namespace conveyor
