#pragma once

#include <random>

#include "conveyor/config.hpp"

namespace conveyor::test {

inline double u01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

/// The shipped desk scenario.
inline Config desk_config() { return Config::desk_default(); }

/// A deliberately small scenario for fast unit tests: 2-link arm, a handful
/// of goals, short horizon.
inline Config tiny_config() {
    Config c = Config::desk_default();
    c.arm.link_lengths = {0.30, 0.25};
    c.arm.joint_velocity_limits = {0.84, 0.84};
    c.arm.gripper_reach = 0.06;
    c.home_q = {90.0 * M_PI / 180.0, -42.0 * M_PI / 180.0};
    c.world.conveyor_y = {0.24, 0.25};
    c.world.static_obstacles.clear();
    c.goal.x_exec = -0.55;
    c.goal.eps_p = 0.015;
    c.goal.yaw_min = 0.0;
    c.goal.yaw_max = 0.0;
    c.goal.res_xy = 0.01;
    c.lattice.dtheta = 6.0 * M_PI / 180.0;
    c.preprocess.t_rc = 2.0;
    c.preprocess.workers = 2;
    c.budgets.bounded_expansions = 400;
    return c;
}

inline std::vector<double> random_q(std::mt19937_64& rng, std::size_t n) {
    std::vector<double> q(n);
    for (double& v : q) v = (u01(rng) * 2.0 - 1.0) * M_PI;
    return q;
}

/// Iterative inverse kinematics for building test states near a pose.
inline bool ik_to_pose(const ArmModel& arm, const Pose2& target, std::vector<double>& q) {
    const std::size_t n = arm.joint_count();
    std::vector<double> step(n);
    for (int iter = 0; iter < 200; ++iter) {
        const EEPose ee = forward_kinematics(arm, q);
        const std::array<double, 3> err = {target.position.x - ee.position.x,
                                           target.position.y - ee.position.y,
                                           wrap_angle(target.yaw - ee.yaw)};
        if (std::hypot(err[0], err[1]) < 1e-5 && std::abs(err[2]) < 1e-4) return true;
        const Jacobian jac = jacobian(arm, q);
        resolved_rate(jac, err, 1e-3, step);
        for (std::size_t j = 0; j < n; ++j) q[j] += 0.5 * step[j];
    }
    return false;
}

}  // namespace conveyor::test
