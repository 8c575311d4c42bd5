#include "conveyor/search.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <queue>
#include <unordered_map>

namespace conveyor {

namespace {

constexpr std::uint64_t kTerminalBit = 1ULL << 63;

struct Node {
    State state;
    std::int64_t g = 0;
    std::uint64_t parent = 0;
    Primitive prim;
    std::int32_t sc_from = -1;  // experience segment, when reached via shortcut
    std::int32_t sc_to = -1;
    bool has_parent = false;
    bool closed = false;
    bool terminal = false;
};

struct OpenEntry {
    double f = 0.0;
    std::int64_t g = 0;
    std::uint64_t key = 0;
    std::int64_t seq = 0;
};

struct OpenCompare {
    // Min f first; ties: larger g, then smaller key, then insertion order.
    bool operator()(const OpenEntry& a, const OpenEntry& b) const {
        if (a.f != b.f) return a.f > b.f;
        if (a.g != b.g) return a.g < b.g;
        if (a.key != b.key) return a.key > b.key;
        return a.seq > b.seq;
    }
};

// Lazily evaluated per-goal validity of the experience path's edges. The
// stored path is collision-free against static geometry by construction, so
// only the object-dependent part needs rechecking for this goal.
class SegmentValidity {
public:
    SegmentValidity(const Lattice& lat, const Path& path, const GoalPose& goal)
        : lat_(lat), path_(path), goal_(goal), edge_state_(path.primitives.size(), 0) {}

    bool segment_ok(std::int32_t from, std::int32_t to) {
        for (std::int32_t k = from; k < to; ++k) {
            if (!edge_ok(k)) return false;
        }
        return true;
    }

private:
    bool edge_ok(std::int32_t k) {
        if (edge_state_[k] == 0) {
            const State& a = path_.states[k];
            const State& b = path_.states[k + 1];
            const double t0 = a.t * lat_.params().dt;
            const double dur = (b.t - a.t) * lat_.params().dt;
            bool ok = true;
            if (t0 + dur > lat_.params().t_rc) {
                const std::size_t n = lat_.arm().joint_count();
                std::array<double, kMaxJoints> qa, qb;
                lat_.joint_angles(a, std::span<double>(qa.data(), n));
                lat_.joint_angles(b, std::span<double>(qb.data(), n));
                ok = !lat_.motion_collides_object_part(std::span<const double>(qa.data(), n),
                                                       std::span<const double>(qb.data(), n), t0,
                                                       dur, goal_);
            }
            edge_state_[k] = ok ? 1 : 2;
        }
        return edge_state_[k] == 1;
    }

    const Lattice& lat_;
    const Path& path_;
    const GoalPose& goal_;
    std::vector<std::uint8_t> edge_state_;
};

}  // namespace

double Planner::intercept_time(const State& s, const GoalPose& g) const {
    const EEPose ee = lat_.ee_pose(s);
    const Pose2 obj = lat_.goal_pose_at(g, s.t * lat_.params().dt);
    const double dx = obj.position.x - ee.position.x;
    const double dy = obj.position.y - ee.position.y;
    const double v = lat_.world().conveyor_speed;
    const double vmax = lat_.arm().max_ee_speed();

    const double c = dx * dx + dy * dy;
    if (c == 0.0) return 0.0;
    const double a = v * v - vmax * vmax;
    const double b = 2.0 * dx * v;
    if (a == 0.0) {
        if (b >= 0.0) return kNoIntercept;
        return -c / b;
    }
    const double disc = b * b - 4.0 * a * c;
    if (a < 0.0) {
        // End effector outruns the belt: exactly one nonnegative root.
        return (-b - std::sqrt(disc)) / (2.0 * a);
    }
    // Object faster than the end effector: intercept only while approaching.
    if (b >= 0.0 || disc < 0.0) return kNoIntercept;
    return (-b - std::sqrt(disc)) / (2.0 * a);
}

double Planner::heuristic(const State& s, const GoalPose& g) const {
    const double tau = intercept_time(s, g);
    if (tau >= kNoIntercept) return kNoIntercept;
    const EEPose ee = lat_.ee_pose(s);
    const Pose2 target = lat_.grasp_target_at(g, s.t * lat_.params().dt);
    const double angle = std::abs(wrap_angle(target.yaw - ee.yaw));
    return std::max(params_.lambda * tau, angle);
}

std::int32_t Planner::shortcut_index(const Path& root_path, const GoalPose& g) const {
    if (root_path.states.empty()) throw ContractViolation("shortcut on empty path");
    // Grasp terminal states are not lattice states; exclude them.
    std::size_t count = root_path.states.size();
    if (root_path.terminal_grasp && count > 1) --count;
    std::int32_t best = 0;
    double best_h = heuristic(root_path.states[0], g);
    for (std::size_t i = 1; i < count; ++i) {
        const double h = heuristic(root_path.states[i], g);
        if (h < best_h) {
            best_h = h;
            best = static_cast<std::int32_t>(i);
        }
    }
    return best;
}

State Planner::shortcut_state(const Path& root_path, const GoalPose& g) const {
    return root_path.states[shortcut_index(root_path, g)];
}

PlanResult Planner::plan(const State& start, const GoalPose& g, const SearchBudget& budget) const {
    return run(start, g, budget, nullptr);
}

PlanResult Planner::plan_with_experience(const State& start, const GoalPose& g,
                                         const Path& root_path, const SearchBudget& budget) const {
    return run(start, g, budget, &root_path);
}

PlanResult Planner::run(const State& start, const GoalPose& g, const SearchBudget& budget,
                        const Path* experience) const {
    if (budget.max_expansions <= 0) throw ContractViolation("budget must be positive");
    const double dt = lat_.params().dt;
    const double w = params_.weight;

    std::unordered_map<std::uint64_t, std::int32_t> on_path;
    std::int32_t sc_idx = -1;
    std::unique_ptr<SegmentValidity> segment;
    if (experience != nullptr && !experience->states.empty()) {
        sc_idx = shortcut_index(*experience, g);
        std::size_t count = experience->states.size();
        if (experience->terminal_grasp && count > 1) --count;
        for (std::size_t i = 0; i < count; ++i) {
            on_path.emplace(lat_.state_key(experience->states[i]), static_cast<std::int32_t>(i));
        }
        segment = std::make_unique<SegmentValidity>(lat_, *experience, g);
    }

    std::unordered_map<std::uint64_t, Node> nodes;
    std::priority_queue<OpenEntry, std::vector<OpenEntry>, OpenCompare> open;
    std::int64_t seq = 0;

    const std::uint64_t start_key = lat_.state_key(start);
    {
        Node node;
        node.state = start;
        node.g = 0;
        nodes.emplace(start_key, std::move(node));
        open.push({w * heuristic(start, g), 0, start_key, seq++});
    }

    PlanResult result;
    std::vector<Successor> succs;

    const auto relax = [&](std::uint64_t key, Node&& cand, double h) {
        auto [it, inserted] = nodes.try_emplace(key);
        if (!inserted) {
            if (it->second.closed || cand.g >= it->second.g) return;
        }
        const double f = cand.g * dt + w * h;
        it->second = std::move(cand);
        open.push({f, it->second.g, key, seq++});
    };

    while (!open.empty()) {
        const OpenEntry top = open.top();
        open.pop();
        auto it = nodes.find(top.key);
        if (it == nodes.end()) continue;
        Node& node = it->second;
        if (node.closed || top.g != node.g) continue;

        if (node.terminal) {
            // Reconstruct, expanding shortcut edges into their segments.
            Path path;
            path.goal = g;
            path.has_goal = true;
            path.terminal_grasp = true;
            std::vector<std::uint64_t> chain;
            std::uint64_t key = top.key;
            while (true) {
                chain.push_back(key);
                const Node& cur = nodes.at(key);
                if (!cur.has_parent) break;
                key = cur.parent;
            }
            std::reverse(chain.begin(), chain.end());
            path.states.push_back(nodes.at(chain.front()).state);
            for (std::size_t i = 1; i < chain.size(); ++i) {
                const Node& cur = nodes.at(chain[i]);
                if (cur.sc_from >= 0) {
                    for (std::int32_t k = cur.sc_from; k < cur.sc_to; ++k) {
                        path.states.push_back(experience->states[k + 1]);
                        path.primitives.push_back(experience->primitives[k]);
                    }
                } else {
                    path.states.push_back(cur.state);
                    path.primitives.push_back(cur.prim);
                }
            }
            result.path = std::move(path);
            return result;
        }

        if (result.expansions >= budget.max_expansions) {
            return result;  // budget exhausted, failure
        }
        node.closed = true;
        ++result.expansions;
        const State state = node.state;       // copy: nodes may rehash below
        const std::int64_t node_g = node.g;

        succs.clear();
        lat_.successors(state, g, succs);
        for (Successor& succ : succs) {
            std::uint64_t key = lat_.state_key(succ.state);
            if (succ.terminal) key |= kTerminalBit;
            Node cand;
            cand.state = succ.state;
            cand.g = node_g + succ.cost_ticks;
            cand.parent = top.key;
            cand.has_parent = true;
            cand.prim = std::move(succ.primitive);
            cand.terminal = succ.terminal;
            const double h = succ.terminal ? 0.0 : heuristic(succ.state, g);
            relax(key, std::move(cand), h);
        }

        if (sc_idx >= 0) {
            const auto at = on_path.find(lat_.state_key(state));
            if (at != on_path.end() && at->second < sc_idx &&
                segment->segment_ok(at->second, sc_idx)) {
                const State& target = experience->states[sc_idx];
                Node cand;
                cand.state = target;
                cand.g = node_g + (target.t - state.t);
                cand.parent = top.key;
                cand.has_parent = true;
                cand.sc_from = at->second;
                cand.sc_to = sc_idx;
                relax(lat_.state_key(target), std::move(cand), heuristic(target, g));
            }
        }
    }
    result.exhausted = true;
    return result;
}

}  // namespace conveyor
