#include "conveyor/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "conveyor/parallel.hpp"

namespace conveyor {

namespace {

double u01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

double lerp_clamped(double lo_val, double hi_val, double u) {
    u = std::clamp(u, 0.0, 1.0);
    return lo_val + (hi_val - lo_val) * u;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::kE1ReplanAlways: return "e1";
        case Strategy::kE2FirstPose: return "e2";
        case Strategy::kE3BestPose: return "e3";
    }
    return "?";
}

const char* method_name(Method m) {
    switch (m) {
        case Method::kOurs: return "ours";
        case Method::kWastarScratch: return "wastar";
        case Method::kRrt: return "rrt";
    }
    return "?";
}

Strategy strategy_from_name(const std::string& name) {
    if (name == "e1") return Strategy::kE1ReplanAlways;
    if (name == "e2") return Strategy::kE2FirstPose;
    if (name == "e3") return Strategy::kE3BestPose;
    throw ConfigError("unknown strategy: " + name);
}

Method method_from_name(const std::string& name) {
    if (name == "ours") return Method::kOurs;
    if (name == "wastar") return Method::kWastarScratch;
    if (name == "rrt") return Method::kRrt;
    throw ConfigError("unknown method: " + name);
}

const char* outcome_name(EpisodeOutcome o) {
    switch (o) {
        case EpisodeOutcome::kPickupSuccess: return "pickup-success";
        case EpisodeOutcome::kMiss: return "miss";
        case EpisodeOutcome::kPlannerFailure: return "planner-failure";
    }
    return "?";
}

PerceptionModel::PerceptionModel(const PerceptionConfig& cfg, double eps_p, std::uint64_t seed)
    : cfg_(cfg), eps_p_(eps_p), rng_(seed) {}

double PerceptionModel::position_error_bound(double camera_distance) const {
    const double u = (camera_distance - cfg_.dist_near) / (cfg_.dist_far - cfg_.dist_near);
    return lerp_clamped(cfg_.eps_near, cfg_.eps_far, u);
}

double PerceptionModel::yaw_error_bound(double camera_distance) const {
    const double u = (camera_distance - cfg_.dist_near) / (cfg_.dist_far - cfg_.dist_near);
    return lerp_clamped(cfg_.yaw_err_near, cfg_.yaw_err_far, u);
}

bool PerceptionModel::is_accurate_range(const Pose2& estimated_current) const {
    return distance(estimated_current.position, cfg_.camera) < cfg_.accuracy_distance;
}

Pose2 PerceptionModel::estimate(const Pose2& true_at_0, double conveyor_speed, double t) {
    const Pose2 truth = advect(true_at_0, conveyor_speed, t);
    const double d = distance(truth.position, cfg_.camera);
    const double eps = position_error_bound(d);
    const double yaw_eps = yaw_error_bound(d);
    const double angle = u01(rng_) * 2.0 * M_PI;
    const double mag = u01(rng_) * eps;
    const double yaw_noise = (2.0 * u01(rng_) - 1.0) * yaw_eps;
    Pose2 est;
    est.position = {truth.position.x + mag * std::cos(angle),
                    truth.position.y + mag * std::sin(angle)};
    est.yaw = wrap_angle(truth.yaw + yaw_noise);
    // The bounded-error assumption is enforced here, not just hoped for.
    if (distance(est.position, truth.position) > eps_p_ + 1e-12)
        throw ScenarioError("perception noise exceeded its eps_p bound");
    return est;
}

GoalPose back_project(const GoalRegion& region, const Pose2& estimate, double dt, double speed,
                      bool* clamped) {
    if (dt < 0.0) throw ContractViolation("back_project needs dt >= 0");
    Pose2 at_zero = estimate;
    at_zero.position.x -= speed * dt;
    return region.snap(at_zero, clamped);
}

Path make_wait_path(const Lattice& lattice, const State& home, std::int32_t ticks) {
    Path path;
    path.states.reserve(ticks + 1);
    State s = home;
    for (std::int32_t k = 0; k <= ticks; ++k) {
        s.t = home.t + k;
        path.states.push_back(s);
        if (k < ticks) {
            Primitive wait;
            wait.kind = PrimitiveKind::kWait;
            wait.ticks = 1;
            path.primitives.push_back(wait);
        }
    }
    (void)lattice;
    return path;
}

namespace {

/// Damped least-squares inverse kinematics toward a planar pose.
bool ik_solve(const ArmModel& arm, const Pose2& target, std::span<double> q) {
    const std::size_t n = arm.joint_count();
    std::array<double, kMaxJoints> step;
    for (int iter = 0; iter < 120; ++iter) {
        const EEPose ee = forward_kinematics(arm, std::span<const double>(q.data(), n));
        const std::array<double, 3> err = {target.position.x - ee.position.x,
                                           target.position.y - ee.position.y,
                                           wrap_angle(target.yaw - ee.yaw)};
        if (std::hypot(err[0], err[1]) < 5e-4 && std::abs(err[2]) < 2e-3) return true;
        const Jacobian jac = jacobian(arm, std::span<const double>(q.data(), n));
        resolved_rate(jac, err, 1e-2, std::span<double>(step.data(), n));
        for (std::size_t j = 0; j < n; ++j) q[j] += 0.5 * step[j];
    }
    return false;
}

struct RrtPlanOutcome {
    std::optional<Path> path;
    std::int64_t iterations = 0;
};

/// Kinodynamic RRT over (q, t): nodes on the joint lattice and time grid,
/// tree edges are one-tick interpolated motions within the velocity limits
/// (wait edges included), goal-biased toward IK pre-grasp configurations,
/// with the terminal dynamic-grasp primitive attempted near the object.
RrtPlanOutcome rrt_plan(const Lattice& lat, const State& start, const GoalPose& g,
                        std::int64_t max_iterations, std::uint64_t seed) {
    RrtPlanOutcome out;
    const std::size_t n = lat.arm().joint_count();
    const double dt = lat.params().dt;
    std::mt19937_64 rng(seed);

    struct Node {
        State state;
        std::int32_t parent = -1;
    };
    std::vector<Node> nodes{{start, -1}};

    // Per-joint max lattice steps per tick.
    std::array<std::int32_t, kMaxJoints> max_step{};
    for (std::size_t j = 0; j < n; ++j) {
        max_step[j] = std::max<std::int32_t>(
            1, static_cast<std::int32_t>(
                   std::floor(lat.arm().joint_velocity_limits[j] * dt / lat.params().dtheta + 1e-9)));
    }

    // Pre-grasp goal configurations from IK along the object's future track.
    struct GoalConfig {
        State state;  // configuration with the tick the object arrives there
    };
    std::vector<GoalConfig> goals;
    std::array<double, kMaxJoints> q_seed;
    lat.joint_angles(start, std::span<double>(q_seed.data(), n));
    for (std::int32_t tick = start.t + 1; tick <= lat.horizon_ticks(); ++tick) {
        const Pose2 obj = lat.goal_pose_at(g, tick * dt);
        std::array<double, kMaxJoints> q = q_seed;
        for (int attempt = 0; attempt < 3; ++attempt) {
            if (attempt > 0) {
                for (std::size_t j = 0; j < n; ++j)
                    q[j] = wrap_angle(q_seed[j] + (u01(rng) - 0.5) * 2.0);
            }
            if (ik_solve(lat.arm(), obj, std::span<double>(q.data(), n))) {
                goals.push_back({lat.make_state(std::span<const double>(q.data(), n), tick)});
                break;
            }
        }
    }

    const std::int32_t angle_values = lat.angle_values();
    const auto wrapped_step_delta = [&](std::int16_t from, std::int16_t to) {
        std::int32_t d = (to - from) % angle_values;
        if (d < 0) d += angle_values;
        if (d > angle_values / 2) d -= angle_values;
        return d;  // shortest signed lattice distance
    };

    std::array<double, kMaxJoints> q_from, q_to;
    std::vector<Successor> grasp_succ;
    for (out.iterations = 0; out.iterations < max_iterations; ++out.iterations) {
        // Sample a target configuration and tick.
        State target{};
        target.n = static_cast<std::uint8_t>(n);
        const bool bias = !goals.empty() && u01(rng) < 0.3;
        if (bias) {
            target = goals[rng() % goals.size()].state;
        } else {
            for (std::size_t j = 0; j < n; ++j)
                target.q[j] = static_cast<std::int16_t>(rng() % angle_values);
            target.t = start.t + 1 +
                       static_cast<std::int32_t>(rng() % std::max(1, lat.horizon_ticks() - start.t));
        }

        // Nearest node strictly earlier than the target tick.
        std::int32_t best = -1;
        double best_cost = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const State& s = nodes[i].state;
            if (s.t >= target.t || s.t >= lat.horizon_ticks()) continue;
            double cost = 0.4 * std::abs(s.t - target.t);
            for (std::size_t j = 0; j < n; ++j)
                cost += std::abs(wrapped_step_delta(s.q[j], target.q[j]));
            if (best < 0 || cost < best_cost) {
                best = static_cast<std::int32_t>(i);
                best_cost = cost;
            }
        }
        if (best < 0) continue;

        const State& from = nodes[best].state;
        State next = from;
        next.t = from.t + 1;
        for (std::size_t j = 0; j < n; ++j) {
            const std::int32_t d = wrapped_step_delta(from.q[j], target.q[j]);
            const std::int32_t step = std::clamp(d, -max_step[j], max_step[j]);
            std::int32_t idx = (from.q[j] + step) % angle_values;
            if (idx < 0) idx += angle_values;
            next.q[j] = static_cast<std::int16_t>(idx);
        }

        lat.joint_angles(from, std::span<double>(q_from.data(), n));
        lat.joint_angles(next, std::span<double>(q_to.data(), n));
        if (lat.motion_collides(std::span<const double>(q_from.data(), n),
                                std::span<const double>(q_to.data(), n), from.t * dt, dt, &g))
            continue;

        nodes.push_back({next, best});

        if (lat.trigger_dynamic(next, g)) {
            GraspResult grasp = lat.dynamic_grasp(next, g);
            if (grasp.success) {
                Path path;
                path.goal = g;
                path.has_goal = true;
                path.terminal_grasp = true;
                std::vector<std::int32_t> chain;
                for (std::int32_t i = static_cast<std::int32_t>(nodes.size()) - 1; i >= 0;
                     i = nodes[i].parent)
                    chain.push_back(i);
                std::reverse(chain.begin(), chain.end());
                for (std::size_t c = 0; c < chain.size(); ++c) {
                    path.states.push_back(nodes[chain[c]].state);
                    if (c + 1 < chain.size()) {
                        const State& a = nodes[chain[c]].state;
                        const State& b = nodes[chain[c + 1]].state;
                        Primitive prim;
                        prim.ticks = 1;
                        if (a.q == b.q) {
                            prim.kind = PrimitiveKind::kWait;
                        } else {
                            prim.kind = PrimitiveKind::kLatch;
                            prim.q_to = b.q;
                        }
                        path.primitives.push_back(prim);
                    }
                }
                path.states.push_back(grasp.terminal);
                path.primitives.push_back(std::move(grasp.primitive));
                out.path = std::move(path);
                ++out.iterations;
                return out;
            }
        }
    }
    return out;
}

/// The static-until-cutoff audit: the executed motion must not touch the TRUE
/// object before t_rc (collision checking legitimately skips it there).
void audit_until_cutoff(const Lattice& lat, const Path& path, const Pose2& true_at_0) {
    const double t_rc = lat.params().t_rc;
    const double dt = lat.params().dt;
    const std::size_t n = lat.arm().joint_count();
    const WorldModel& world = lat.world();
    std::array<double, kMaxJoints> qa, qb, q;
    std::array<Vec2, kMaxJoints + 1> pts;

    for (std::size_t i = 0; i < path.primitives.size(); ++i) {
        const State& a = path.states[i];
        const double t0 = a.t * dt;
        if (t0 > t_rc) break;
        const Primitive& prim = path.primitives[i];
        const double dur = prim.ticks * dt;

        const auto check_config = [&](std::span<const double> qs, double t) {
            if (t > t_rc) return;
            const Pose2 obj = advect(true_at_0, world.conveyor_speed, t);
            const Polygon poly = world.object_shape.transformed(obj);
            chain_points(lat.arm(), qs, std::span<Vec2>(pts.data(), n + 1));
            for (std::size_t l = 0; l < n; ++l) {
                if (segment_polygon_distance(pts[l], pts[l + 1], poly) <= lat.arm().link_radius)
                    throw ScenarioError(
                        "object touched the arm before t_rc; scenario violates the static-window "
                        "assumption");
            }
        };

        if (prim.kind == PrimitiveKind::kDynamicGrasp) {
            for (const TrajectorySample& s : prim.trajectory)
                check_config(std::span<const double>(s.q.data(), n), t0 + s.t_rel);
        } else {
            lat.joint_angles(a, std::span<double>(qa.data(), n));
            lat.joint_angles(path.states[i + 1], std::span<double>(qb.data(), n));
            const int steps = std::max(1, static_cast<int>(std::ceil(dur / lat.params().collision_dt)));
            for (int k = 0; k <= steps; ++k) {
                const double u = static_cast<double>(k) / steps;
                for (std::size_t j = 0; j < n; ++j)
                    q[j] = qa[j] + u * wrap_angle(qb[j] - qa[j]);
                check_config(std::span<const double>(q.data(), n), t0 + u * dur);
            }
        }
    }
}

}  // namespace

nlohmann::json Episode::to_json() const {
    nlohmann::json replan_arr = nlohmann::json::array();
    for (const ReplanEvent& ev : replans) {
        QueryStats stats = ev.stats;
        stats.wall_time = 0.0;  // traces stay byte-deterministic
        replan_arr.push_back({{"t", ev.t},
                              {"goal", {ev.goal.x_idx, ev.goal.y_idx, ev.goal.yaw_idx}},
                              {"clamped", ev.clamped},
                              {"success", ev.success},
                              {"expansions", ev.expansions},
                              {"model_plan_time_s", ev.model_plan_time},
                              {"stats", stats.to_json()}});
    }
    nlohmann::json est_arr = nlohmann::json::array();
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        est_arr.push_back({{"t", estimate_times[i]},
                           {"x", estimates[i].position.x},
                           {"y", estimates[i].position.y},
                           {"yaw", estimates[i].yaw}});
    }
    return {{"strategy", strategy_name(strategy)},
            {"method", method_name(method)},
            {"budget_s", budget_s},
            {"seed", seed},
            {"true_initial",
             {{"x", true_initial.position.x}, {"y", true_initial.position.y}, {"yaw", true_initial.yaw}}},
            {"estimates", est_arr},
            {"replans", replan_arr},
            {"outcome", outcome_name(outcome)},
            {"grasp_pos_error", grasp_pos_error},
            {"grasp_yaw_error", grasp_yaw_error},
            {"path_cost_s", path_cost_s},
            {"replan_cycles", replan_cycles},
            {"plan_success_after_mark", plan_success_after_mark}};
}

Episode run_episode(const SimContext& ctx, Strategy strategy, Method method, double budget_s,
                    std::uint64_t seed) {
    const Config& cfg = ctx.config;
    const Lattice& lat = ctx.lattice;
    const GoalRegion& region = lat.region();
    const double dt = lat.params().dt;
    const double t_rc = cfg.preprocess.t_rc;
    const double speed = cfg.world.conveyor_speed;
    const double model_cost = cfg.budgets.model_cost_per_expansion;
    const double latency = (method == Method::kOurs) ? cfg.preprocess.t_bound : budget_s;

    if (method == Method::kOurs && (ctx.artifact == nullptr || ctx.engine == nullptr))
        throw ContractViolation("run_episode needs an artifact for the preprocessed method");

    Episode ep;
    ep.strategy = strategy;
    ep.method = method;
    ep.budget_s = budget_s;
    ep.seed = seed;

    std::mt19937_64 rng(seed);
    PerceptionModel perception(cfg.perception, cfg.goal.eps_p, seed ^ 0x9e3779b97f4a7c15ULL);

    // True initial pose: perceived at x_exec at t = 0, so the truth lies
    // within the t = 0 noise bound of it.
    const double y_true =
        cfg.world.conveyor_y.lo + u01(rng) * (cfg.world.conveyor_y.hi - cfg.world.conveyor_y.lo);
    const double yaw_true = cfg.goal.yaw_min + u01(rng) * (cfg.goal.yaw_max - cfg.goal.yaw_min);
    const double d0 = distance({cfg.goal.x_exec, y_true}, cfg.perception.camera);
    const double eps0 = perception.position_error_bound(d0);
    const double x_true = cfg.goal.x_exec - (2.0 * u01(rng) - 1.0) * eps0;
    ep.true_initial = {{x_true, y_true}, wrap_angle(yaw_true)};

    const State home = cfg.home_state(lat);
    Path current = make_wait_path(lat, home, lat.t_rc_ticks() + 2);

    double busy_until = 0.0;
    bool e3_done = false;
    bool e2_done = false;

    for (int k = 0;; ++k) {
        const double t_k = k * cfg.perception.period;
        if (t_k >= t_rc) break;
        const Pose2 est = perception.estimate(ep.true_initial, speed, t_k);
        ep.estimate_times.push_back(t_k);
        ep.estimates.push_back(est);

        bool want = false;
        switch (strategy) {
            case Strategy::kE1ReplanAlways:
                want = t_k >= busy_until - 1e-9;
                break;
            case Strategy::kE2FirstPose:
                want = !e2_done;
                e2_done = true;
                break;
            case Strategy::kE3BestPose:
                if (!e3_done && perception.is_accurate_range(est)) {
                    want = true;
                    e3_done = true;
                }
                break;
        }
        if (!want) continue;

        ReplanEvent ev;
        ev.t = t_k;
        ev.goal = back_project(region, est, t_k, speed, &ev.clamped);

        const auto start_tick = static_cast<std::int32_t>(std::ceil((t_k + latency) / dt - 1e-9));
        if (start_tick > lat.t_rc_ticks()) {
            ep.replans.push_back(ev);
            continue;  // no replanning once the cutoff would be passed
        }
        const std::int32_t idx = current.index_at_tick(start_tick);
        if (idx < 0) {
            ep.replans.push_back(ev);
            continue;
        }
        const State s_start = current.states[idx];
        busy_until = t_k + latency;

        if (method == Method::kOurs) {
            QueryResult qr = ctx.engine->query(ev.goal, current, s_start);
            ev.stats = qr.stats;
            ev.expansions = qr.stats.plan_expansions;
            ev.model_plan_time = static_cast<double>(ev.expansions) * model_cost;
            if (qr.success()) {
                for (std::int32_t i = 0; i <= idx; ++i) {
                    if (!(qr.path->states[i] == current.states[i]))
                        throw IntegrityError("replanned path rewrote the executed prefix");
                }
                current = std::move(*qr.path);
                ev.success = true;
            }
        } else {
            const auto budget_exp =
                std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(budget_s / model_cost)));
            if (method == Method::kWastarScratch) {
                PlanResult r = ctx.planner.plan(s_start, ev.goal, {budget_exp});
                ev.expansions = r.expansions;
                if (r.success()) {
                    current = merge_paths(current, *r.path, s_start);
                    ev.success = true;
                }
            } else {
                RrtPlanOutcome r = rrt_plan(lat, s_start, ev.goal, budget_exp,
                                            seed ^ (0xc2b2ae3d27d4eb4fULL + k));
                ev.expansions = r.iterations;
                if (r.path.has_value()) {
                    current = merge_paths(current, *r.path, s_start);
                    ev.success = true;
                }
            }
            ev.model_plan_time =
                ev.success ? static_cast<double>(ev.expansions) * model_cost : budget_s;
        }
        if (ev.success) {
            ++ep.replan_cycles;
            if (perception.is_accurate_range(est)) ep.plan_success_after_mark = true;
        }
        ep.replans.push_back(ev);
    }

    if (!current.terminal_grasp) {
        ep.outcome = EpisodeOutcome::kPlannerFailure;
        return ep;
    }

    audit_until_cutoff(lat, current, ep.true_initial);

    const Primitive& grasp = current.primitives.back();
    const double t_end = current.end_tick() * dt;
    const TrajectorySample& last = grasp.trajectory.back();
    const EEPose ee = forward_kinematics(
        lat.arm(), std::span<const double>(last.q.data(), lat.arm().joint_count()));
    const Pose2 truth = advect(ep.true_initial, speed, t_end);
    ep.grasp_pos_error = distance(ee.position, truth.position);
    ep.grasp_yaw_error = std::abs(wrap_angle(truth.yaw - ee.yaw));
    ep.path_cost_s = current.cost_seconds(dt);
    ep.outcome = (ep.grasp_pos_error <= cfg.benchmark.grasp_tol_pos &&
                  ep.grasp_yaw_error <= cfg.benchmark.grasp_tol_yaw)
                     ? EpisodeOutcome::kPickupSuccess
                     : EpisodeOutcome::kMiss;
    return ep;
}

Episode run_baseline(const SimContext& ctx, Method method, Strategy strategy, double budget_s,
                     std::uint64_t seed) {
    if (method == Method::kOurs) throw ContractViolation("run_baseline is for baseline methods");
    return run_episode(ctx, strategy, method, budget_s, seed);
}

std::string BenchmarkReport::to_csv() const {
    std::string csv =
        "method,budget_s,pickup_pct,plan_success_pct,mean_plan_time_s,max_lookups,mean_cycles,"
        "mean_cost_s\n";
    for (const BenchmarkCell& cell : cells) {
        csv += method_name(cell.method);
        csv += ',';
        csv += format_double(cell.budget_s);
        csv += ',';
        csv += format_double(cell.pickup_pct);
        csv += ',';
        csv += format_double(cell.plan_success_pct);
        csv += ',';
        csv += format_double(cell.mean_plan_time_s);
        csv += ',';
        csv += std::to_string(cell.max_lookups);
        csv += ',';
        csv += format_double(cell.mean_cycles);
        csv += ',';
        csv += format_double(cell.mean_cost_s);
        csv += '\n';
    }
    return csv;
}

std::string BenchmarkReport::to_jsonl() const {
    std::string out;
    for (const Episode& ep : episodes) {
        out += ep.to_json().dump();
        out += '\n';
    }
    return out;
}

BenchmarkReport run_benchmark(const SimContext& ctx, int episodes_per_cell,
                              const std::vector<double>& baseline_budgets, int workers,
                              std::uint64_t base_seed) {
    BenchmarkReport report;
    struct CellSpec {
        Method method;
        double budget;
    };
    std::vector<CellSpec> specs;
    specs.push_back({Method::kOurs, ctx.config.preprocess.t_bound});
    for (Method m : {Method::kWastarScratch, Method::kRrt})
        for (double b : baseline_budgets) specs.push_back({m, b});

    for (const CellSpec& spec : specs) {
        std::vector<Episode> episodes(static_cast<std::size_t>(episodes_per_cell));
        parallel_for(episodes.size(), workers, [&](std::size_t i) {
            episodes[i] = run_episode(ctx, Strategy::kE1ReplanAlways, spec.method, spec.budget,
                                      base_seed + i);
        });

        BenchmarkCell cell;
        cell.method = spec.method;
        cell.budget_s = spec.budget;
        cell.episodes = episodes_per_cell;
        std::int64_t queries = 0, query_successes = 0;
        std::int64_t pickups = 0, episode_plan_success = 0;
        double plan_time_sum = 0.0, cycles_sum = 0.0, cost_sum = 0.0;
        std::int64_t cost_count = 0;
        for (const Episode& ep : episodes) {
            if (ep.outcome == EpisodeOutcome::kPickupSuccess) {
                ++pickups;
                cost_sum += ep.path_cost_s;
                ++cost_count;
            }
            if (ep.plan_success_after_mark) ++episode_plan_success;
            cycles_sum += ep.replan_cycles;
            for (const ReplanEvent& ev : ep.replans) {
                ++queries;
                query_successes += ev.success ? 1 : 0;
                plan_time_sum += ev.model_plan_time;
                cell.max_lookups = std::max(cell.max_lookups, ev.stats.map_lookups);
            }
        }
        const double nq = std::max<std::int64_t>(1, queries);
        const double ne = std::max(1, episodes_per_cell);
        cell.pickup_pct = 100.0 * pickups / ne;
        cell.plan_success_pct = 100.0 * query_successes / nq;
        cell.episode_plan_success_pct = 100.0 * episode_plan_success / ne;
        cell.mean_plan_time_s = plan_time_sum / nq;
        cell.mean_cycles = cycles_sum / ne;
        cell.mean_cost_s =
            cost_count > 0 ? cost_sum / cost_count : std::numeric_limits<double>::quiet_NaN();
        report.cells.push_back(cell);
        for (Episode& ep : episodes) report.episodes.push_back(std::move(ep));
    }
    return report;
}

}  // namespace conveyor
