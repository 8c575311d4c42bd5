#include "conveyor/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace conveyor {

namespace {

std::int32_t round_index(double value, double resolution) {
    return static_cast<std::int32_t>(std::llround(value / resolution));
}

}  // namespace

GoalRegion::GoalRegion(double x_exec, double eps_p, Interval y_range, double yaw_min,
                       double yaw_max, double res_xy, double res_yaw)
    : x_exec_(x_exec), eps_p_(eps_p), res_xy_(res_xy), res_yaw_(res_yaw) {
    if (eps_p <= 0.0 || res_xy <= 0.0 || res_yaw <= 0.0)
        throw ContractViolation("goal region resolutions and eps_p must be positive");
    if (yaw_max < yaw_min) throw ContractViolation("yaw range inverted");
    // x range is fixed to [x_exec - 2 eps_p, x_exec + 2 eps_p].
    x_lo_ = static_cast<std::int32_t>(std::ceil((x_exec - 2.0 * eps_p) / res_xy - 1e-9));
    const std::int32_t x_hi = static_cast<std::int32_t>(std::floor((x_exec + 2.0 * eps_p) / res_xy + 1e-9));
    y_lo_ = static_cast<std::int32_t>(std::ceil(y_range.lo / res_xy - 1e-9));
    const std::int32_t y_hi = static_cast<std::int32_t>(std::floor(y_range.hi / res_xy + 1e-9));
    yaw_lo_ = static_cast<std::int32_t>(std::ceil(yaw_min / res_yaw - 1e-9));
    const std::int32_t yaw_hi = static_cast<std::int32_t>(std::floor(yaw_max / res_yaw + 1e-9));
    nx_ = x_hi - x_lo_ + 1;
    ny_ = y_hi - y_lo_ + 1;
    nyaw_ = yaw_hi - yaw_lo_ + 1;
    if (nx_ <= 0 || ny_ <= 0 || nyaw_ <= 0) throw ContractViolation("goal region is empty");
}

bool GoalRegion::contains(const GoalPose& g) const {
    return g.x_idx >= x_lo_ && g.x_idx < x_lo_ + nx_ && g.y_idx >= y_lo_ &&
           g.y_idx < y_lo_ + ny_ && g.yaw_idx >= yaw_lo_ && g.yaw_idx < yaw_lo_ + nyaw_;
}

std::uint64_t GoalRegion::key(const GoalPose& g) const {
    if (!contains(g)) throw ContractViolation("goal pose outside region");
    const std::uint64_t xi = static_cast<std::uint64_t>(g.x_idx - x_lo_);
    const std::uint64_t yi = static_cast<std::uint64_t>(g.y_idx - y_lo_);
    const std::uint64_t wi = static_cast<std::uint64_t>(g.yaw_idx - yaw_lo_);
    return (xi * ny_ + yi) * nyaw_ + wi;
}

GoalPose GoalRegion::from_key(std::uint64_t key) const {
    if (key >= size()) throw ContractViolation("goal key out of range");
    GoalPose g;
    g.yaw_idx = yaw_lo_ + static_cast<std::int32_t>(key % nyaw_);
    key /= nyaw_;
    g.y_idx = y_lo_ + static_cast<std::int32_t>(key % ny_);
    g.x_idx = x_lo_ + static_cast<std::int32_t>(key / ny_);
    return g;
}

GoalPose GoalRegion::snap(const Pose2& pose, bool* clamped) const {
    GoalPose g;
    g.x_idx = round_index(pose.position.x, res_xy_);
    g.y_idx = round_index(pose.position.y, res_xy_);
    g.yaw_idx = round_index(wrap_angle(pose.yaw), res_yaw_);
    bool c = false;
    const auto clamp_idx = [&c](std::int32_t v, std::int32_t lo, std::int32_t count) {
        if (v < lo) {
            c = true;
            return lo;
        }
        if (v > lo + count - 1) {
            c = true;
            return lo + count - 1;
        }
        return v;
    };
    g.x_idx = clamp_idx(g.x_idx, x_lo_, nx_);
    g.y_idx = clamp_idx(g.y_idx, y_lo_, ny_);
    g.yaw_idx = clamp_idx(g.yaw_idx, yaw_lo_, nyaw_);
    if (clamped != nullptr) *clamped = c;
    return g;
}

Pose2 GoalRegion::center(const GoalPose& g) const {
    return {{g.x_idx * res_xy_, g.y_idx * res_xy_}, wrap_angle(g.yaw_idx * res_yaw_)};
}

std::vector<GoalPose> GoalRegion::enumerate() const {
    std::vector<GoalPose> out;
    out.reserve(size());
    for (std::int32_t xi = 0; xi < nx_; ++xi)
        for (std::int32_t yi = 0; yi < ny_; ++yi)
            for (std::int32_t wi = 0; wi < nyaw_; ++wi)
                out.push_back({x_lo_ + xi, y_lo_ + yi, yaw_lo_ + wi});
    return out;
}

std::int32_t Path::index_at_tick(std::int32_t tick) const {
    auto it = std::lower_bound(states.begin(), states.end(), tick,
                               [](const State& s, std::int32_t t) { return s.t < t; });
    if (it == states.end() || it->t != tick) return -1;
    return static_cast<std::int32_t>(it - states.begin());
}

Lattice::Lattice(ArmModel arm, WorldModel world, GoalRegion region, LatticeParams params)
    : arm_(std::move(arm)), world_(std::move(world)), region_(region), params_(params) {
    arm_.validate();
    world_.validate();
    if (params_.dt <= 0.0) throw ContractViolation("dt must be positive");
    const double circle = 2.0 * M_PI / params_.dtheta;
    angle_values_ = static_cast<std::int32_t>(std::llround(circle));
    if (angle_values_ < 4 || std::abs(circle - angle_values_) > 1e-9)
        throw ContractViolation("dtheta must evenly divide the full circle");
    const double ell = params_.t_rc / params_.dt;
    t_rc_ticks_ = static_cast<std::int32_t>(std::llround(ell));
    if (std::abs(ell - t_rc_ticks_) > 1e-9 || t_rc_ticks_ < 0)
        throw ContractViolation("t_rc must be a nonnegative multiple of dt");

    if (params_.horizon_ticks > 0) {
        horizon_ticks_ = params_.horizon_ticks;
    } else {
        // Past this time the object is beyond reach forever, so the graph can
        // be truncated without losing any grasp.
        const double x_min = region_.x_exec() - 2.0 * region_.eps_p();
        const double exit_x = arm_.base_position.x + arm_.reach() + params_.d_trigger +
                              world_.object_shape.circumradius();
        const double t_exit = (exit_x - x_min) / world_.conveyor_speed;
        const double t_total = std::max(0.0, t_exit) + params_.grasp_t_max + params_.grasp_t_close;
        horizon_ticks_ = static_cast<std::int32_t>(std::ceil(t_total / params_.dt)) + 2;
    }
    horizon_ticks_ = std::max(horizon_ticks_, t_rc_ticks_ + 4);

    // Key packing must fit: (max_t + 1) * angle_values^n < 2^62.
    const std::int32_t max_t =
        horizon_ticks_ +
        static_cast<std::int32_t>(
            std::ceil((params_.grasp_t_max + params_.grasp_t_close) / params_.dt)) +
        2;
    unsigned __int128 span = static_cast<unsigned __int128>(max_t) + 1;
    for (std::size_t i = 0; i < arm_.joint_count(); ++i) {
        span *= static_cast<unsigned __int128>(angle_values_);
        if (span >= (static_cast<unsigned __int128>(1) << 62))
            throw ContractViolation(
                "state key space overflows 64 bits; coarsen dtheta or reduce joints");
    }
}

State Lattice::make_state(std::span<const double> q, std::int32_t tick) const {
    const std::size_t n = arm_.joint_count();
    if (q.size() != n) throw ContractViolation("joint vector size mismatch");
    if (tick < 0) throw ContractViolation("tick must be nonnegative");
    State s;
    s.n = static_cast<std::uint8_t>(n);
    s.t = tick;
    for (std::size_t i = 0; i < n; ++i) {
        std::int64_t idx = std::llround(q[i] / params_.dtheta) % angle_values_;
        if (idx < 0) idx += angle_values_;
        s.q[i] = static_cast<std::int16_t>(idx);
    }
    return s;
}

double Lattice::angle_of(std::int16_t idx) const { return wrap_angle(idx * params_.dtheta); }

void Lattice::joint_angles(const State& s, std::span<double> out) const {
    for (std::uint8_t i = 0; i < s.n; ++i) out[i] = angle_of(s.q[i]);
}

std::uint64_t Lattice::state_key(const State& s) const {
    std::uint64_t key = static_cast<std::uint64_t>(s.t);
    for (std::uint8_t i = 0; i < s.n; ++i) {
        key = key * static_cast<std::uint64_t>(angle_values_) + static_cast<std::uint64_t>(s.q[i]);
    }
    return key;
}

EEPose Lattice::ee_pose(const State& s) const {
    std::array<double, kMaxJoints> q;
    joint_angles(s, std::span<double>(q.data(), s.n));
    return forward_kinematics(arm_, std::span<const double>(q.data(), s.n));
}

Pose2 Lattice::goal_pose_at(const GoalPose& g, double t) const {
    return advect(region_.center(g), world_.conveyor_speed, t);
}

Pose2 Lattice::grasp_target_at(const GoalPose& g, double t) const {
    Pose2 p = goal_pose_at(g, t);
    p.yaw = wrap_angle(p.yaw + M_PI);
    return p;
}

bool Lattice::state_collides(std::span<const double> q, double t, const GoalPose* goal) const {
    if (goal == nullptr) return collides(arm_, world_, q, t, nullptr, params_.t_rc);
    const Pose2 obj = region_.center(*goal);
    return collides(arm_, world_, q, t, &obj, params_.t_rc);
}

bool Lattice::motion_collides_impl(std::span<const double> q_from, std::span<const double> q_to,
                                   double t_from, double dur, const GoalPose* goal,
                                   bool object_part_only) const {
    const std::size_t n = arm_.joint_count();
    const bool any_static = !object_part_only && !world_.static_obstacles.empty();
    const bool any_object = goal != nullptr && t_from + dur > params_.t_rc;
    if (!any_static && !any_object) return false;
    const int steps = std::max(1, static_cast<int>(std::ceil(dur / params_.collision_dt)));
    std::array<double, kMaxJoints> q;
    WorldModel object_only;
    if (object_part_only) {
        object_only = world_;
        object_only.static_obstacles.clear();
    }
    for (int k = 0; k <= steps; ++k) {
        const double u = static_cast<double>(k) / steps;
        const double t = t_from + u * dur;
        if (!any_static && t <= params_.t_rc) continue;
        if (object_part_only && t <= params_.t_rc) continue;
        for (std::size_t i = 0; i < n; ++i) {
            // Interpolate along the shortest angular route.
            q[i] = q_from[i] + u * wrap_angle(q_to[i] - q_from[i]);
        }
        const std::span<const double> qs(q.data(), n);
        if (object_part_only) {
            // Same object test as collides(), without the static part.
            const Pose2 obj = region_.center(*goal);
            if (collides(arm_, object_only, qs, t, &obj, params_.t_rc)) return true;
        } else if (state_collides(qs, t, goal)) {
            return true;
        }
    }
    return false;
}

bool Lattice::motion_collides(std::span<const double> q_from, std::span<const double> q_to,
                              double t_from, double dur, const GoalPose* goal) const {
    return motion_collides_impl(q_from, q_to, t_from, dur, goal, false);
}

bool Lattice::motion_collides_object_part(std::span<const double> q_from,
                                          std::span<const double> q_to, double t_from, double dur,
                                          const GoalPose& goal) const {
    return motion_collides_impl(q_from, q_to, t_from, dur, &goal, true);
}

void Lattice::static_successors(const State& s, std::vector<Successor>& out) const {
    const std::size_t n = arm_.joint_count();
    if (s.t >= horizon_ticks_) return;
    std::array<double, kMaxJoints> q_from;
    joint_angles(s, std::span<double>(q_from.data(), n));
    std::array<double, kMaxJoints> q_to = q_from;

    for (std::size_t j = 0; j < n; ++j) {
        // Duration from the nominal joint velocity, rounded up to the grid.
        const double move_s = params_.dtheta / arm_.joint_velocity_limits[j];
        const std::int32_t ticks =
            std::max<std::int32_t>(1, static_cast<std::int32_t>(std::ceil(move_s / params_.dt - 1e-9)));
        for (int dir = +1; dir >= -1; dir -= 2) {
            if (s.t + ticks > horizon_ticks_) continue;
            State next = s;
            std::int32_t idx = (s.q[j] + dir) % angle_values_;
            if (idx < 0) idx += angle_values_;
            next.q[j] = static_cast<std::int16_t>(idx);
            next.t = s.t + ticks;
            q_to[j] = q_from[j] + dir * params_.dtheta;
            const bool hit = motion_collides(std::span<const double>(q_from.data(), n),
                                             std::span<const double>(q_to.data(), n),
                                             s.t * params_.dt, ticks * params_.dt, nullptr);
            q_to[j] = q_from[j];
            if (hit) continue;
            Primitive prim;
            prim.kind = PrimitiveKind::kStaticJoint;
            prim.joint = static_cast<std::int8_t>(j);
            prim.direction = static_cast<std::int8_t>(dir);
            prim.ticks = ticks;
            out.push_back({next, prim, ticks, false});
        }
    }
    if (s.t + 1 <= horizon_ticks_) {
        State next = s;
        next.t = s.t + 1;
        Primitive prim;
        prim.kind = PrimitiveKind::kWait;
        prim.ticks = 1;
        out.push_back({next, prim, 1, false});
    }
}

void Lattice::successors(const State& s, const GoalPose& g, std::vector<Successor>& out) const {
    const std::size_t n = arm_.joint_count();
    if (s.t >= horizon_ticks_) return;
    std::array<double, kMaxJoints> q_from;
    joint_angles(s, std::span<double>(q_from.data(), n));

    std::vector<Successor> statics;
    static_successors(s, statics);
    out.reserve(out.size() + statics.size() + 1);
    for (Successor& succ : statics) {
        // Re-check the object-dependent part for this goal; the static part
        // was already verified by static_successors.
        std::array<double, kMaxJoints> q_to;
        joint_angles(succ.state, std::span<double>(q_to.data(), n));
        const double t0 = s.t * params_.dt;
        const double dur = succ.primitive.ticks * params_.dt;
        if (t0 + dur > params_.t_rc &&
            motion_collides_object_part(std::span<const double>(q_from.data(), n),
                                        std::span<const double>(q_to.data(), n), t0, dur, g)) {
            continue;
        }
        out.push_back(std::move(succ));
    }

    if (trigger_dynamic(s, g)) {
        GraspResult grasp = dynamic_grasp(s, g);
        if (grasp.success) {
            const std::int32_t ticks = grasp.primitive.ticks;
            out.push_back({grasp.terminal, std::move(grasp.primitive), ticks, true});
        }
    }
}

bool Lattice::trigger_dynamic(const State& s, const GoalPose& g) const {
    const EEPose ee = ee_pose(s);
    const Pose2 target = grasp_target_at(g, s.t * params_.dt);
    const double d = distance(ee.position, target.position);
    const double a = std::abs(wrap_angle(target.yaw - ee.yaw));
    return d < params_.d_trigger && a < params_.alpha_trigger;
}

GraspResult Lattice::dynamic_grasp(const State& s, const GoalPose& g) const {
    const StateGoalKey memo_key{state_key(s), region_.key(g)};
    {
        std::lock_guard<std::mutex> lock(grasp_mutex_);
        if (failed_grasps_.count(memo_key)) {
            if (!trigger_dynamic(s, g))
                throw ContractViolation("dynamic_grasp requires trigger_dynamic");
            return GraspResult{};
        }
    }
    GraspResult result = dynamic_grasp_uncached(s, g);
    if (!result.success) {
        std::lock_guard<std::mutex> lock(grasp_mutex_);
        failed_grasps_.insert(memo_key);
    }
    return result;
}

GraspResult Lattice::dynamic_grasp_uncached(const State& s, const GoalPose& g) const {
    if (!trigger_dynamic(s, g)) throw ContractViolation("dynamic_grasp requires trigger_dynamic");
    const std::size_t n = arm_.joint_count();
    const double t0 = s.t * params_.dt;
    const double dt_int = params_.grasp_dt_int;

    std::array<double, kMaxJoints> q;
    joint_angles(s, std::span<double>(q.data(), n));

    GraspResult result;
    Primitive prim;
    prim.kind = PrimitiveKind::kDynamicGrasp;

    const auto record = [&](double t_rel) {
        TrajectorySample sample;
        sample.q = q;
        sample.t_rel = t_rel;
        prim.trajectory.push_back(sample);
    };
    record(0.0);

    const auto pose_error = [&](double t_abs, std::array<double, 3>& err) {
        const EEPose ee = forward_kinematics(arm_, std::span<const double>(q.data(), n));
        const Pose2 target = grasp_target_at(g, t_abs);
        err[0] = target.position.x - ee.position.x;
        err[1] = target.position.y - ee.position.y;
        err[2] = wrap_angle(target.yaw - ee.yaw);
    };
    const auto enclosed = [&](const std::array<double, 3>& err) {
        return std::hypot(err[0], err[1]) < params_.enclose_pos_tol &&
               std::abs(err[2]) < params_.enclose_yaw_tol;
    };

    std::array<double, kMaxJoints> qdot;
    std::array<double, 3> err{};
    double t_rel = 0.0;
    bool reached = false;

    // Proportional twist toward the advected pose, with the translational and
    // rotational parts capped separately so neither starves the other in the
    // resolved-rate solve.
    const double v_cap = 0.6 * arm_.max_ee_speed();
    const double w_cap = 1.5;
    const auto capped_twist = [&](const std::array<double, 3>& e, double feedforward_x) {
        std::array<double, 3> v = {params_.grasp_gain * e[0], params_.grasp_gain * e[1],
                                   params_.grasp_gain * e[2]};
        const double speed = std::hypot(v[0], v[1]);
        if (speed > v_cap) {
            v[0] *= v_cap / speed;
            v[1] *= v_cap / speed;
        }
        v[2] = std::clamp(v[2], -w_cap, w_cap);
        v[0] += feedforward_x;
        return v;
    };

    // Approach: chase the grasp pose with belt feedforward (pure pursuit
    // stalls at a lag of speed/gain, which can exceed the enclosure
    // tolerance); velocities scale uniformly into the joint limits.
    while (t_rel <= params_.grasp_t_max + 1e-12) {
        pose_error(t0 + t_rel, err);
        if (enclosed(err)) {
            reached = true;
            break;
        }
        if (t_rel >= params_.grasp_t_max) break;
        const Jacobian jac = jacobian(arm_, std::span<const double>(q.data(), n));
        const std::array<double, 3> v_des = capped_twist(err, world_.conveyor_speed);
        resolved_rate(jac, v_des, 1e-4, std::span<double>(qdot.data(), n));
        double scale = 1.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double lim = arm_.joint_velocity_limits[j];
            if (std::abs(qdot[j]) > lim) scale = std::min(scale, lim / std::abs(qdot[j]));
        }
        const double step = std::min(dt_int, params_.grasp_t_max - t_rel);
        for (std::size_t j = 0; j < n; ++j) q[j] += qdot[j] * scale * step;
        t_rel += step;
        if (state_collides(std::span<const double>(q.data(), n), t0 + t_rel, &g)) return result;
        record(t_rel);
    }
    if (!reached) return result;  // timeout

    // Track the object while the gripper closes; total duration lands on the
    // time grid. Exceeding a joint limit here is a failure, not a clamp.
    const double dur_raw = t_rel + params_.grasp_t_close;
    const std::int32_t total_ticks =
        std::max<std::int32_t>(1, static_cast<std::int32_t>(std::ceil(dur_raw / params_.dt - 1e-9)));
    const double dur = total_ticks * params_.dt;
    while (t_rel < dur - 1e-12) {
        pose_error(t0 + t_rel, err);
        const Jacobian jac = jacobian(arm_, std::span<const double>(q.data(), n));
        const std::array<double, 3> v_des = capped_twist(err, world_.conveyor_speed);
        resolved_rate(jac, v_des, 1e-4, std::span<double>(qdot.data(), n));
        for (std::size_t j = 0; j < n; ++j) {
            if (std::abs(qdot[j]) > arm_.joint_velocity_limits[j] * (1.0 + 1e-9)) return result;
        }
        const double step = std::min(dt_int, dur - t_rel);
        for (std::size_t j = 0; j < n; ++j) q[j] += qdot[j] * step;
        t_rel += step;
        if (state_collides(std::span<const double>(q.data(), n), t0 + t_rel, &g)) return result;
        record(t_rel);
    }
    pose_error(t0 + dur, err);
    if (!enclosed(err)) return result;

    prim.ticks = total_ticks;
    result.terminal = make_state(std::span<const double>(q.data(), n), s.t + total_ticks);
    result.primitive = std::move(prim);
    result.success = true;
    return result;
}

LatchResult Lattice::can_latch(const State& s, const Path& root_path, const GoalPose* goal) const {
    LatchResult res;
    const std::int32_t idx = root_path.index_at_tick(s.t + 1);
    if (idx < 0) return res;
    const State& target = root_path.states[idx];
    if (target.n != s.n) return res;
    const std::size_t n = arm_.joint_count();
    std::array<double, kMaxJoints> q_from, q_to;
    joint_angles(s, std::span<double>(q_from.data(), n));
    joint_angles(target, std::span<double>(q_to.data(), n));
    for (std::size_t j = 0; j < n; ++j) {
        const double dq = std::abs(wrap_angle(q_to[j] - q_from[j]));
        if (dq > arm_.joint_velocity_limits[j] * params_.dt + 1e-9) return res;
    }
    if (motion_collides(std::span<const double>(q_from.data(), n),
                        std::span<const double>(q_to.data(), n), s.t * params_.dt, params_.dt,
                        goal)) {
        return res;
    }
    res.ok = true;
    res.target = target;
    return res;
}

bool Lattice::replay_valid(const Path& path, std::string* why) const {
    const auto fail = [&](const std::string& msg) {
        if (why != nullptr) *why = msg;
        return false;
    };
    if (path.states.empty()) return fail("empty path");
    if (path.primitives.size() + 1 != path.states.size()) return fail("state/primitive count");
    const std::size_t n = arm_.joint_count();
    std::array<double, kMaxJoints> q_a, q_b;

    for (std::size_t i = 0; i < path.primitives.size(); ++i) {
        const State& a = path.states[i];
        const State& b = path.states[i + 1];
        const Primitive& prim = path.primitives[i];
        if (b.t <= a.t) return fail("time not strictly increasing");
        if (b.t - a.t != prim.ticks) return fail("primitive duration mismatch");
        joint_angles(a, std::span<double>(q_a.data(), n));
        joint_angles(b, std::span<double>(q_b.data(), n));
        const double t0 = a.t * params_.dt;
        const double dur = prim.ticks * params_.dt;
        const GoalPose* goal = path.has_goal ? &path.goal : nullptr;

        switch (prim.kind) {
            case PrimitiveKind::kStaticJoint: {
                int changed = 0;
                for (std::size_t j = 0; j < n; ++j) {
                    std::int32_t d = (b.q[j] - a.q[j]) % angle_values_;
                    if (d < 0) d += angle_values_;
                    if (d == 0) continue;
                    if (d != 1 && d != angle_values_ - 1) return fail("static move not one step");
                    ++changed;
                }
                if (changed != 1) return fail("static move must change exactly one joint");
                if (motion_collides(std::span<const double>(q_a.data(), n),
                                    std::span<const double>(q_b.data(), n), t0, dur, goal))
                    return fail("collision on static move");
                break;
            }
            case PrimitiveKind::kWait: {
                if (!(a.q == b.q)) return fail("wait changed configuration");
                if (motion_collides(std::span<const double>(q_a.data(), n),
                                    std::span<const double>(q_b.data(), n), t0, dur, goal))
                    return fail("collision while waiting");
                break;
            }
            case PrimitiveKind::kLatch: {
                for (std::size_t j = 0; j < n; ++j) {
                    if (prim.q_to[j] != b.q[j]) return fail("latch target mismatch");
                    const double dq = std::abs(wrap_angle(q_b[j] - q_a[j]));
                    if (dq > arm_.joint_velocity_limits[j] * params_.dt + 1e-9)
                        return fail("latch exceeds joint velocity");
                }
                if (motion_collides(std::span<const double>(q_a.data(), n),
                                    std::span<const double>(q_b.data(), n), t0, dur, goal))
                    return fail("collision on latch");
                break;
            }
            case PrimitiveKind::kDynamicGrasp: {
                if (i + 1 != path.primitives.size()) return fail("grasp must be terminal");
                if (!path.has_goal) return fail("grasp without goal");
                if (prim.trajectory.size() < 2) return fail("grasp trajectory missing");
                for (const TrajectorySample& sample : prim.trajectory) {
                    if (state_collides(std::span<const double>(sample.q.data(), n),
                                       t0 + sample.t_rel, &path.goal))
                        return fail("collision on grasp trajectory");
                }
                const TrajectorySample& last = prim.trajectory.back();
                const EEPose ee =
                    forward_kinematics(arm_, std::span<const double>(last.q.data(), n));
                const Pose2 target = grasp_target_at(path.goal, t0 + dur);
                if (distance(ee.position, target.position) >= params_.enclose_pos_tol ||
                    std::abs(wrap_angle(target.yaw - ee.yaw)) >= params_.enclose_yaw_tol)
                    return fail("grasp terminal pose outside enclosure tolerance");
                break;
            }
            case PrimitiveKind::kShortcut:
                return fail("shortcut primitive in a final path");
        }
    }
    if (path.terminal_grasp &&
        (path.primitives.empty() || path.primitives.back().kind != PrimitiveKind::kDynamicGrasp))
        return fail("terminal_grasp without grasp primitive");
    return true;
}

}  // namespace conveyor
