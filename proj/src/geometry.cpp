#include "conveyor/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace conveyor {

double Vec2::norm() const { return std::hypot(x, y); }

double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

double wrap_angle(double a) {
    a = std::fmod(a, 2.0 * M_PI);
    if (a <= -M_PI) a += 2.0 * M_PI;
    if (a > M_PI) a -= 2.0 * M_PI;
    return a;
}

Pose2 advect(const Pose2& p, double speed, double dt) {
    return {{p.position.x + speed * dt, p.position.y}, p.yaw};
}

bool Polygon::contains(const Vec2& p) const {
    // Convex, CCW: inside iff p is on the left of every edge.
    const std::size_t m = vertices.size();
    for (std::size_t i = 0; i < m; ++i) {
        const Vec2& a = vertices[i];
        const Vec2& b = vertices[(i + 1) % m];
        const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        if (cross < 0.0) return false;
    }
    return true;
}

namespace {

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.dot(ab);
    if (len2 <= 0.0) return distance(p, a);
    const double u = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return distance(p, a + ab * u);
}

}  // namespace

double Polygon::distance_to(const Vec2& p) const {
    if (contains(p)) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    const std::size_t m = vertices.size();
    for (std::size_t i = 0; i < m; ++i) {
        best = std::min(best, point_segment_distance(p, vertices[i], vertices[(i + 1) % m]));
    }
    return best;
}

Polygon Polygon::transformed(const Pose2& pose) const {
    Polygon out;
    out.vertices.reserve(vertices.size());
    const double c = std::cos(pose.yaw);
    const double s = std::sin(pose.yaw);
    for (const Vec2& v : vertices) {
        out.vertices.push_back(
            {pose.position.x + c * v.x - s * v.y, pose.position.y + s * v.x + c * v.y});
    }
    return out;
}

double Polygon::circumradius() const {
    double r = 0.0;
    for (const Vec2& v : vertices) r = std::max(r, v.norm());
    return r;
}

double segment_segment_distance(const Vec2& a0, const Vec2& a1, const Vec2& b0, const Vec2& b1) {
    // Planar segments: either they intersect (distance 0) or the minimum is
    // attained at an endpoint.
    const auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
        const double v = (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
        if (v > 0.0) return 1;
        if (v < 0.0) return -1;
        return 0;
    };
    const int o1 = orient(a0, a1, b0);
    const int o2 = orient(a0, a1, b1);
    const int o3 = orient(b0, b1, a0);
    const int o4 = orient(b0, b1, a1);
    if (o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) return 0.0;
    double best = point_segment_distance(b0, a0, a1);
    best = std::min(best, point_segment_distance(b1, a0, a1));
    best = std::min(best, point_segment_distance(a0, b0, b1));
    best = std::min(best, point_segment_distance(a1, b0, b1));
    return best;
}

double segment_polygon_distance(const Vec2& a0, const Vec2& a1, const Polygon& poly) {
    if (poly.contains(a0) || poly.contains(a1)) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    const std::size_t m = poly.vertices.size();
    for (std::size_t i = 0; i < m; ++i) {
        best = std::min(best, segment_segment_distance(a0, a1, poly.vertices[i],
                                                       poly.vertices[(i + 1) % m]));
        if (best == 0.0) return 0.0;
    }
    return best;
}

double ArmModel::reach() const {
    double r = 0.0;
    for (double l : link_lengths) r += l;
    return r;
}

double ArmModel::max_ee_speed() const {
    // Rotating joint j sweeps the end effector at v_j times the distance from
    // joint j to the tip; at full extension the contributions align.
    double v = 0.0;
    double tail = reach();
    for (std::size_t j = 0; j < link_lengths.size(); ++j) {
        v += joint_velocity_limits[j] * tail;
        tail -= link_lengths[j];
    }
    return v;
}

void ArmModel::validate() const {
    if (link_lengths.size() < 2) throw ContractViolation("arm needs at least 2 links");
    if (link_lengths.size() > kMaxJoints) throw ContractViolation("arm exceeds max joint count");
    if (joint_velocity_limits.size() != link_lengths.size())
        throw ContractViolation("joint_velocity_limits size must equal link count");
    for (double l : link_lengths)
        if (l <= 0.0) throw ContractViolation("link lengths must be positive");
    for (double v : joint_velocity_limits)
        if (v <= 0.0) throw ContractViolation("joint velocity limits must be positive");
    if (gripper_reach <= 0.0 || gripper_reach >= link_lengths.back())
        throw ContractViolation("gripper_reach must be in (0, last link length)");
    if (link_radius <= 0.0) throw ContractViolation("link_radius must be positive");
    if (self_collision) throw ContractViolation("self-collision checking is not implemented");
}

void WorldModel::validate() const {
    if (conveyor_speed <= 0.0) throw ContractViolation("conveyor_speed must be positive");
    if (conveyor_x.length() <= 0.0 || conveyor_y.length() < 0.0)
        throw ContractViolation("conveyor band extents are degenerate");
    if (object_shape.vertices.size() < 3)
        throw ContractViolation("object_shape must be a non-degenerate polygon");
    for (const Polygon& p : static_obstacles)
        if (p.vertices.size() < 3) throw ContractViolation("static obstacle polygon degenerate");
}

void chain_points(const ArmModel& arm, std::span<const double> q, std::span<Vec2> out) {
    const std::size_t n = arm.joint_count();
    if (q.size() != n) throw ContractViolation("joint vector size mismatch");
    if (out.size() != n + 1) throw ContractViolation("chain output size mismatch");
    Vec2 p = arm.base_position;
    double heading = 0.0;
    out[0] = p;
    for (std::size_t i = 0; i < n; ++i) {
        heading += q[i];
        p = p + Vec2{std::cos(heading), std::sin(heading)} * arm.link_lengths[i];
        out[i + 1] = p;
    }
}

EEPose forward_kinematics(const ArmModel& arm, std::span<const double> q) {
    const std::size_t n = arm.joint_count();
    if (q.size() != n) throw ContractViolation("joint vector size mismatch");
    Vec2 p = arm.base_position;
    double heading = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        heading += q[i];
        p = p + Vec2{std::cos(heading), std::sin(heading)} * arm.link_lengths[i];
    }
    return {p, wrap_angle(heading)};
}

Jacobian jacobian(const ArmModel& arm, std::span<const double> q) {
    const std::size_t n = arm.joint_count();
    if (q.size() != n) throw ContractViolation("joint vector size mismatch");
    std::array<Vec2, kMaxJoints + 1> pts;
    chain_points(arm, q, std::span<Vec2>(pts.data(), n + 1));
    const Vec2 ee = pts[n];
    Jacobian jac;
    jac.n = n;
    for (std::size_t j = 0; j < n; ++j) {
        // Column j: cross(z, ee - joint_j) for a planar revolute joint.
        const Vec2 r = ee - pts[j];
        jac.at(0, j) = -r.y;
        jac.at(1, j) = r.x;
        jac.at(2, j) = 1.0;
    }
    return jac;
}

void resolved_rate(const Jacobian& jac, const std::array<double, 3>& v, double damping,
                   std::span<double> qdot_out) {
    const std::size_t n = jac.n;
    if (qdot_out.size() != n) throw ContractViolation("qdot output size mismatch");
    // A = J J^T + damping^2 I  (3x3, symmetric positive definite)
    double A[3][3];
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += jac.at(r, j) * jac.at(c, j);
            A[r][c] = s + (r == c ? damping * damping : 0.0);
        }
    }
    // Solve A y = v by Cramer's rule.
    const auto det3 = [](const double m[3][3]) {
        return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
               m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    };
    const double det = det3(A);
    std::array<double, 3> y{};
    for (int k = 0; k < 3; ++k) {
        double B[3][3];
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) B[r][c] = (c == k) ? v[r] : A[r][c];
        y[k] = det3(B) / det;
    }
    for (std::size_t j = 0; j < n; ++j) {
        qdot_out[j] = jac.at(0, j) * y[0] + jac.at(1, j) * y[1] + jac.at(2, j) * y[2];
    }
}

bool collides(const ArmModel& arm, const WorldModel& world, std::span<const double> q, double t,
              const Pose2* object_pose_at_0, double t_rc) {
    const std::size_t n = arm.joint_count();
    if (q.size() != n) throw ContractViolation("joint vector size mismatch");
    if (t < 0.0) throw ContractViolation("time must be nonnegative");
    const bool object_applies = object_pose_at_0 != nullptr && t > t_rc;
    if (world.static_obstacles.empty() && !object_applies) return false;
    std::array<Vec2, kMaxJoints + 1> pts;
    chain_points(arm, q, std::span<Vec2>(pts.data(), n + 1));

    for (const Polygon& obs : world.static_obstacles) {
        for (std::size_t i = 0; i < n; ++i) {
            if (segment_polygon_distance(pts[i], pts[i + 1], obs) <= arm.link_radius) return true;
        }
    }

    if (object_applies) {
        const Pose2 obj = advect(*object_pose_at_0, world.conveyor_speed, t);
        // Cheap reject on the bounding circle before any polygon work.
        const double threshold = world.object_shape.circumradius() + arm.link_radius;
        bool close = false;
        for (std::size_t i = 0; i < n && !close; ++i) {
            close = point_segment_distance(obj.position, pts[i], pts[i + 1]) <= threshold;
        }
        if (!close) return false;
        const Polygon poly = world.object_shape.transformed(obj);
        for (std::size_t i = 0; i < n; ++i) {
            Vec2 a = pts[i];
            Vec2 b = pts[i + 1];
            if (i + 1 == n) {
                // The gripper portion of the last link may overlap the object.
                const double len = arm.link_lengths[i];
                const double keep = std::max(0.0, len - arm.gripper_reach) / len;
                b = a + (b - a) * keep;
            }
            if (segment_polygon_distance(a, b, poly) <= arm.link_radius) return true;
        }
    }
    return false;
}

}  // namespace conveyor
