#include "conveyor/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

namespace conveyor {

namespace {

constexpr double kDeg = M_PI / 180.0;

double get_num(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number())
        throw ConfigError(std::string("missing or non-numeric field: ") + key);
    return j[key].get<double>();
}

bool get_bool(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_boolean())
        throw ConfigError(std::string("missing or non-boolean field: ") + key);
    return j[key].get<bool>();
}

std::vector<double> get_vec(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_array())
        throw ConfigError(std::string("missing or non-array field: ") + key);
    std::vector<double> out;
    for (const auto& v : j[key]) {
        if (!v.is_number()) throw ConfigError(std::string("non-numeric entry in ") + key);
        out.push_back(v.get<double>());
    }
    return out;
}

Vec2 get_vec2(const nlohmann::json& j, const char* key) {
    const std::vector<double> v = get_vec(j, key);
    if (v.size() != 2) throw ConfigError(std::string(key) + " must be [x, y]");
    return {v[0], v[1]};
}

Polygon get_polygon(const nlohmann::json& arr, const char* what) {
    Polygon p;
    for (const auto& v : arr) {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            throw ConfigError(std::string(what) + " vertices must be [x, y] pairs");
        p.vertices.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    if (p.vertices.size() < 3) throw ConfigError(std::string(what) + " needs >= 3 vertices");
    return p;
}

nlohmann::json polygon_json(const Polygon& p) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Vec2& v : p.vertices) arr.push_back({v.x, v.y});
    return arr;
}

}  // namespace

Config Config::desk_default() {
    Config c;
    c.seed = 1;

    c.arm.base_position = {0.0, 0.0};
    c.arm.link_lengths = {0.32, 0.26, 0.20};
    c.arm.joint_velocity_limits = {1.0, 1.0, 1.0};
    c.arm.gripper_reach = 0.10;
    c.arm.link_radius = 0.018;
    c.home_q = {132.0 * kDeg, -138.0 * kDeg, -174.0 * kDeg};

    c.world.conveyor_speed = 0.2;
    c.world.conveyor_x = {-1.6, 0.9};
    c.world.conveyor_y = {0.32, 0.35};
    c.world.object_shape.vertices = {{-0.015, -0.015}, {0.015, -0.015}, {0.015, 0.015}, {-0.015, 0.015}};

    c.goal = GoalRegionConfig{};
    c.lattice = LatticeParams{};
    // A short approach window and a tight alignment gate keep the grasp a
    // local maneuver, so stored paths carry the approach states experience
    // replay rides on, and grasp-begin states minimize the heuristic.
    c.lattice.grasp_t_max = 1.0;
    c.lattice.alpha_trigger = 15.0 * M_PI / 180.0;
    c.search = SearchParams{};
    // The intercept term is continuous along a path while the angle term
    // plateaus on the coarse yaw grid; weighting it up keeps shortcut states
    // deep and experience replays short.
    c.search.lambda = 2.0;
    c.budgets = BudgetConfig{};
    c.preprocess = PreprocessConfig{};
    c.perception = PerceptionConfig{};
    c.benchmark = BenchmarkConfig{};
    return c;
}

void Config::validate() const {
    arm.validate();
    world.validate();
    if (home_q.size() != arm.joint_count())
        throw ConfigError("home_q size must equal the joint count");
    if (lattice.dt <= 0.0) throw ConfigError("lattice.dt must be positive");
    const double ell = preprocess.t_rc / lattice.dt;
    if (std::abs(ell - std::llround(ell)) > 1e-9 || preprocess.t_rc < 0.0)
        throw ConfigError("t_rc must be a nonnegative multiple of dt");
    if (preprocess.t_bound <= 0.0 || preprocess.t_bound >= lattice.dt)
        throw ConfigError("t_bound must lie in (0, dt)");
    if (preprocess.workers < 1) throw ConfigError("preprocess.workers must be >= 1");
    if (goal.eps_p <= 0.0) throw ConfigError("eps_p must be positive");
    if (perception.eps_far > goal.eps_p + 1e-12)
        throw ConfigError("perception eps_far exceeds the eps_p bound");
    if (perception.eps_near < 0.0 || perception.eps_near > perception.eps_far)
        throw ConfigError("perception noise schedule inverted");
    if (perception.dist_near >= perception.dist_far)
        throw ConfigError("perception distance schedule inverted");
    if (perception.period <= 0.0) throw ConfigError("perception period must be positive");
    if (budgets.rho <= 0.0 || budgets.rho > 1.0) throw ConfigError("rho must be in (0, 1]");
    if (budgets.model_cost_per_expansion <= 0.0)
        throw ConfigError("model_cost_per_expansion must be positive");
    if (budgets.root_expansions <= 0) throw ConfigError("root_expansions must be positive");
    if (budgets.bounded_expansions < 0) throw ConfigError("bounded_expansions must be >= 0");
    if (benchmark.episodes < 0) throw ConfigError("episodes must be >= 0");
    if (benchmark.workers < 1) throw ConfigError("benchmark.workers must be >= 1");
    // home_q must land exactly on the joint lattice.
    for (double q : home_q) {
        const double idx = q / lattice.dtheta;
        if (std::abs(idx - std::llround(idx)) > 1e-9)
            throw ConfigError("home_q must be a multiple of dtheta");
    }
}

void Config::apply_env_overrides() {
    if (const char* s = std::getenv("CONVEYOR_SEED")) {
        seed = std::strtoull(s, nullptr, 10);
    }
    if (const char* w = std::getenv("CONVEYOR_WORKERS")) {
        const int v = std::atoi(w);
        if (v >= 1) {
            preprocess.workers = v;
            benchmark.workers = v;
        }
    }
}

Config Config::from_json(const nlohmann::json& j) {
    Config c = desk_default();
    try {
        c.seed = static_cast<std::uint64_t>(get_num(j, "seed"));

        const auto& arm = j.at("arm");
        c.arm.base_position = get_vec2(arm, "base_position");
        c.arm.link_lengths = get_vec(arm, "link_lengths");
        c.arm.joint_velocity_limits = get_vec(arm, "joint_velocity_limits");
        c.arm.gripper_reach = get_num(arm, "gripper_reach");
        c.arm.link_radius = get_num(arm, "link_radius");
        c.home_q.clear();
        for (double d : get_vec(arm, "home_q_deg")) c.home_q.push_back(d * kDeg);

        const auto& world = j.at("world");
        c.world.conveyor_speed = get_num(world, "conveyor_speed");
        const auto cx = get_vec(world, "conveyor_x");
        const auto cy = get_vec(world, "conveyor_y");
        if (cx.size() != 2 || cy.size() != 2) throw ConfigError("conveyor extents must be [lo, hi]");
        c.world.conveyor_x = {cx[0], cx[1]};
        c.world.conveyor_y = {cy[0], cy[1]};
        c.world.object_shape = get_polygon(world.at("object_shape"), "object_shape");
        c.world.static_obstacles.clear();
        if (world.contains("static_obstacles")) {
            for (const auto& poly : world.at("static_obstacles"))
                c.world.static_obstacles.push_back(get_polygon(poly, "static obstacle"));
        }

        const auto& goal = j.at("goal_region");
        c.goal.x_exec = get_num(goal, "x_exec");
        c.goal.eps_p = get_num(goal, "eps_p");
        c.goal.yaw_min = get_num(goal, "yaw_min_deg") * kDeg;
        c.goal.yaw_max = get_num(goal, "yaw_max_deg") * kDeg;
        c.goal.res_xy = get_num(goal, "res_xy");
        c.goal.res_yaw = get_num(goal, "res_yaw_deg") * kDeg;

        const auto& lat = j.at("lattice");
        c.lattice.dtheta = get_num(lat, "dtheta_deg") * kDeg;
        c.lattice.dt = get_num(lat, "dt");
        c.lattice.d_trigger = get_num(lat, "d_trigger");
        c.lattice.alpha_trigger = get_num(lat, "alpha_trigger_deg") * kDeg;
        c.lattice.grasp_gain = get_num(lat, "grasp_gain");
        c.lattice.grasp_dt_int = get_num(lat, "grasp_dt_int");
        c.lattice.grasp_t_close = get_num(lat, "grasp_t_close");
        c.lattice.grasp_t_max = get_num(lat, "grasp_t_max");
        c.lattice.enclose_pos_tol = get_num(lat, "enclose_pos_tol");
        c.lattice.enclose_yaw_tol = get_num(lat, "enclose_yaw_tol_deg") * kDeg;
        c.lattice.collision_dt = get_num(lat, "collision_dt");
        c.lattice.horizon_ticks = static_cast<std::int32_t>(get_num(lat, "horizon_ticks"));

        const auto& search = j.at("search");
        c.search.lambda = get_num(search, "lambda");
        c.search.weight = get_num(search, "weight");

        const auto& budgets = j.at("budgets");
        c.budgets.root_expansions = static_cast<std::int64_t>(get_num(budgets, "root_expansions"));
        c.budgets.bounded_expansions =
            static_cast<std::int64_t>(get_num(budgets, "bounded_expansions"));
        c.budgets.rho = get_num(budgets, "rho");
        c.budgets.model_cost_per_expansion = get_num(budgets, "model_cost_per_expansion");

        const auto& pre = j.at("preprocess");
        c.preprocess.t_rc = get_num(pre, "t_rc");
        c.preprocess.t_bound = get_num(pre, "t_bound");
        c.preprocess.latching = get_bool(pre, "latching");
        c.preprocess.cover_home_wait = get_bool(pre, "cover_home_wait");
        c.preprocess.workers = static_cast<int>(get_num(pre, "workers"));

        const auto& per = j.at("perception");
        c.perception.camera = get_vec2(per, "camera");
        c.perception.period = get_num(per, "period");
        c.perception.accuracy_distance = get_num(per, "accuracy_distance");
        c.perception.eps_near = get_num(per, "eps_near");
        c.perception.eps_far = get_num(per, "eps_far");
        c.perception.dist_near = get_num(per, "dist_near");
        c.perception.dist_far = get_num(per, "dist_far");
        c.perception.yaw_err_near = get_num(per, "yaw_err_near_deg") * kDeg;
        c.perception.yaw_err_far = get_num(per, "yaw_err_far_deg") * kDeg;

        const auto& bench = j.at("benchmark");
        c.benchmark.episodes = static_cast<int>(get_num(bench, "episodes"));
        c.benchmark.baseline_budgets = get_vec(bench, "baseline_budgets");
        c.benchmark.grasp_tol_pos = get_num(bench, "grasp_tol_pos");
        c.benchmark.grasp_tol_yaw = get_num(bench, "grasp_tol_yaw_deg") * kDeg;
        c.benchmark.workers = static_cast<int>(get_num(bench, "workers"));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    c.validate();
    return c;
}

Config Config::load_file(const std::string& path, bool apply_env) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    Config c = from_json(j);
    if (apply_env) {
        c.apply_env_overrides();
        c.validate();
    }
    return c;
}

nlohmann::json Config::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["arm"] = {{"base_position", {arm.base_position.x, arm.base_position.y}},
                {"link_lengths", arm.link_lengths},
                {"joint_velocity_limits", arm.joint_velocity_limits},
                {"gripper_reach", arm.gripper_reach},
                {"link_radius", arm.link_radius},
                {"home_q_deg", [&] {
                     std::vector<double> v;
                     for (double q : home_q) v.push_back(q / kDeg);
                     return v;
                 }()}};
    nlohmann::json obstacles = nlohmann::json::array();
    for (const Polygon& p : world.static_obstacles) obstacles.push_back(polygon_json(p));
    j["world"] = {{"conveyor_speed", world.conveyor_speed},
                  {"conveyor_x", {world.conveyor_x.lo, world.conveyor_x.hi}},
                  {"conveyor_y", {world.conveyor_y.lo, world.conveyor_y.hi}},
                  {"object_shape", polygon_json(world.object_shape)},
                  {"static_obstacles", obstacles}};
    j["goal_region"] = {{"x_exec", goal.x_exec},       {"eps_p", goal.eps_p},
                        {"yaw_min_deg", goal.yaw_min / kDeg}, {"yaw_max_deg", goal.yaw_max / kDeg},
                        {"res_xy", goal.res_xy},       {"res_yaw_deg", goal.res_yaw / kDeg}};
    j["lattice"] = {{"dtheta_deg", lattice.dtheta / kDeg},
                    {"dt", lattice.dt},
                    {"d_trigger", lattice.d_trigger},
                    {"alpha_trigger_deg", lattice.alpha_trigger / kDeg},
                    {"grasp_gain", lattice.grasp_gain},
                    {"grasp_dt_int", lattice.grasp_dt_int},
                    {"grasp_t_close", lattice.grasp_t_close},
                    {"grasp_t_max", lattice.grasp_t_max},
                    {"enclose_pos_tol", lattice.enclose_pos_tol},
                    {"enclose_yaw_tol_deg", lattice.enclose_yaw_tol / kDeg},
                    {"collision_dt", lattice.collision_dt},
                    {"horizon_ticks", lattice.horizon_ticks}};
    j["search"] = {{"lambda", search.lambda}, {"weight", search.weight}};
    j["budgets"] = {{"root_expansions", budgets.root_expansions},
                    {"bounded_expansions", budgets.bounded_expansions},
                    {"rho", budgets.rho},
                    {"model_cost_per_expansion", budgets.model_cost_per_expansion}};
    j["preprocess"] = {{"t_rc", preprocess.t_rc},
                       {"t_bound", preprocess.t_bound},
                       {"latching", preprocess.latching},
                       {"cover_home_wait", preprocess.cover_home_wait},
                       {"workers", preprocess.workers}};
    j["perception"] = {{"camera", {perception.camera.x, perception.camera.y}},
                       {"period", perception.period},
                       {"accuracy_distance", perception.accuracy_distance},
                       {"eps_near", perception.eps_near},
                       {"eps_far", perception.eps_far},
                       {"dist_near", perception.dist_near},
                       {"dist_far", perception.dist_far},
                       {"yaw_err_near_deg", perception.yaw_err_near / kDeg},
                       {"yaw_err_far_deg", perception.yaw_err_far / kDeg}};
    j["benchmark"] = {{"episodes", benchmark.episodes},
                      {"baseline_budgets", benchmark.baseline_budgets},
                      {"grasp_tol_pos", benchmark.grasp_tol_pos},
                      {"grasp_tol_yaw_deg", benchmark.grasp_tol_yaw / kDeg},
                      {"workers", benchmark.workers}};
    return j;
}

std::string Config::canonical_dump() const {
    // nlohmann objects iterate in sorted key order, so this is canonical.
    return to_json().dump();
}

std::uint64_t Config::hash() const {
    const std::string dump = canonical_dump();
    return fnv1a(dump.data(), dump.size());
}

GoalRegion Config::make_goal_region() const {
    return GoalRegion(goal.x_exec, goal.eps_p, world.conveyor_y, goal.yaw_min, goal.yaw_max,
                      goal.res_xy, goal.res_yaw);
}

Lattice Config::make_lattice() const {
    LatticeParams p = lattice;
    p.t_rc = preprocess.t_rc;
    return Lattice(arm, world, make_goal_region(), p);
}

State Config::home_state(const Lattice& lattice_ref) const {
    return lattice_ref.make_state(std::span<const double>(home_q.data(), home_q.size()), 0);
}

std::int32_t Config::cutoff_ticks() const {
    return static_cast<std::int32_t>(std::llround(preprocess.t_rc / lattice.dt));
}

}  // namespace conveyor
