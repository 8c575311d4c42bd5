#include "conveyor/artifact.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace conveyor {

static_assert(std::endian::native == std::endian::little,
              "artifact serialization assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'C', 'T', 'P', 'A'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    template <typename T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        const std::size_t at = buf_.size();
        buf_.resize(at + sizeof(T));
        std::memcpy(buf_.data() + at, &v, sizeof(T));
    }
    void put_bytes(const void* data, std::size_t len) {
        const std::size_t at = buf_.size();
        buf_.resize(at + len);
        std::memcpy(buf_.data() + at, data, len);
    }
    std::vector<std::uint8_t>& buffer() { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        static_assert(std::is_trivially_copyable_v<T>);
        if (pos_ + sizeof(T) > bytes_.size())
            throw ArtifactError(ArtifactError::Kind::kTruncated, "artifact truncated");
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string get_string(std::size_t len) {
        if (pos_ + len > bytes_.size())
            throw ArtifactError(ArtifactError::Kind::kTruncated, "artifact truncated");
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
        pos_ += len;
        return s;
    }
    std::size_t pos() const { return pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

void put_state(Writer& w, const State& s) {
    w.put<std::uint8_t>(s.n);
    w.put<std::int32_t>(s.t);
    for (std::uint8_t i = 0; i < s.n; ++i) w.put<std::int16_t>(s.q[i]);
}

State get_state(Reader& r) {
    State s;
    s.n = r.get<std::uint8_t>();
    if (s.n > kMaxJoints)
        throw ArtifactError(ArtifactError::Kind::kCorrupt, "state joint count out of range");
    s.t = r.get<std::int32_t>();
    for (std::uint8_t i = 0; i < s.n; ++i) s.q[i] = r.get<std::int16_t>();
    return s;
}

void put_primitive(Writer& w, const Primitive& p, std::size_t n) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(p.kind));
    w.put<std::int8_t>(p.joint);
    w.put<std::int8_t>(p.direction);
    w.put<std::int32_t>(p.ticks);
    for (std::size_t i = 0; i < n; ++i) w.put<std::int16_t>(p.q_to[i]);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.trajectory.size()));
    for (const TrajectorySample& s : p.trajectory) {
        w.put<double>(s.t_rel);
        for (std::size_t i = 0; i < n; ++i) w.put<double>(s.q[i]);
    }
}

Primitive get_primitive(Reader& r, std::size_t n) {
    Primitive p;
    p.kind = static_cast<PrimitiveKind>(r.get<std::uint8_t>());
    if (p.kind == PrimitiveKind::kShortcut)
        throw ArtifactError(ArtifactError::Kind::kCorrupt, "shortcut primitive in artifact");
    p.joint = r.get<std::int8_t>();
    p.direction = r.get<std::int8_t>();
    p.ticks = r.get<std::int32_t>();
    if (p.ticks <= 0) throw ArtifactError(ArtifactError::Kind::kCorrupt, "nonpositive duration");
    for (std::size_t i = 0; i < n; ++i) p.q_to[i] = r.get<std::int16_t>();
    const std::uint32_t samples = r.get<std::uint32_t>();
    p.trajectory.reserve(samples);
    for (std::uint32_t i = 0; i < samples; ++i) {
        TrajectorySample s;
        s.t_rel = r.get<double>();
        for (std::size_t j = 0; j < n; ++j) s.q[j] = r.get<double>();
        p.trajectory.push_back(s);
    }
    return p;
}

void put_path(Writer& w, const Path& path, std::size_t n) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(path.states.size()));
    for (const State& s : path.states) put_state(w, s);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(path.primitives.size()));
    for (const Primitive& p : path.primitives) put_primitive(w, p, n);
    w.put<std::uint8_t>(path.has_goal ? 1 : 0);
    w.put<std::int32_t>(path.goal.x_idx);
    w.put<std::int32_t>(path.goal.y_idx);
    w.put<std::int32_t>(path.goal.yaw_idx);
    w.put<std::uint8_t>(path.terminal_grasp ? 1 : 0);
}

Path get_path(Reader& r, std::size_t n) {
    Path path;
    const std::uint32_t states = r.get<std::uint32_t>();
    path.states.reserve(states);
    for (std::uint32_t i = 0; i < states; ++i) path.states.push_back(get_state(r));
    const std::uint32_t prims = r.get<std::uint32_t>();
    if (states == 0 || prims + 1 != states)
        throw ArtifactError(ArtifactError::Kind::kCorrupt, "path state/primitive count mismatch");
    path.primitives.reserve(prims);
    for (std::uint32_t i = 0; i < prims; ++i) path.primitives.push_back(get_primitive(r, n));
    path.has_goal = r.get<std::uint8_t>() != 0;
    path.goal.x_idx = r.get<std::int32_t>();
    path.goal.y_idx = r.get<std::int32_t>();
    path.goal.yaw_idx = r.get<std::int32_t>();
    path.terminal_grasp = r.get<std::uint8_t>() != 0;
    return path;
}

}  // namespace

void Artifact::rebuild_runtime_index() {
    const GoalRegion region = config.make_goal_region();
    covered_bits.clear();
    covered_bits.reserve(root_paths.size());
    for (const RootPath& rp : root_paths) {
        GoalSet bits(region.size());
        for (std::uint64_t k : rp.covered_goal_keys) {
            if (k >= region.size())
                throw ArtifactError(ArtifactError::Kind::kInvalid, "goal key outside region");
            bits.insert(k);
        }
        covered_bits.push_back(std::move(bits));
    }
    for (const auto& [pair, id] : map.entries) {
        if (id >= root_paths.size())
            throw ArtifactError(ArtifactError::Kind::kInvalid, "coverage entry references a missing root path");
    }
    for (const auto& [pair, target] : map.latch_entries) {
        if (pair.b >= root_paths.size())
            throw ArtifactError(ArtifactError::Kind::kInvalid, "latch entry references a missing root path");
    }
    for (std::uint32_t id : map.home_path_ids) {
        if (id >= root_paths.size())
            throw ArtifactError(ArtifactError::Kind::kInvalid, "home path id out of range");
    }
}

std::int32_t Artifact::shortcut_index_for(std::uint32_t path_id, std::uint64_t goal_key) const {
    const RootPath& rp = root_paths[path_id];
    const auto it =
        std::lower_bound(rp.covered_goal_keys.begin(), rp.covered_goal_keys.end(), goal_key);
    if (it == rp.covered_goal_keys.end() || *it != goal_key) return -1;
    return rp.shortcut_indices[it - rp.covered_goal_keys.begin()];
}

std::vector<std::uint8_t> serialize_artifact(const Artifact& artifact) {
    Writer w;
    w.put_bytes(kMagic, 4);
    w.put<std::uint32_t>(kVersion);

    const std::string cfg = artifact.config.canonical_dump();
    w.put<std::uint64_t>(cfg.size());
    w.put_bytes(cfg.data(), cfg.size());
    w.put<std::uint64_t>(fnv1a(cfg.data(), cfg.size()));

    put_state(w, artifact.s_home);
    w.put<std::int64_t>(artifact.bounded_budget);

    const std::size_t n = artifact.config.arm.joint_count();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(artifact.root_paths.size()));
    for (const RootPath& rp : artifact.root_paths) {
        w.put<std::uint32_t>(rp.id);
        put_state(w, rp.origin);
        w.put<std::int32_t>(rp.parent_id);
        w.put<std::int32_t>(rp.parent_index);
        put_path(w, rp.path, n);
        w.put<std::uint64_t>(rp.covered_goal_keys.size());
        for (std::size_t i = 0; i < rp.covered_goal_keys.size(); ++i) {
            w.put<std::uint64_t>(rp.covered_goal_keys[i]);
            w.put<std::int32_t>(rp.shortcut_indices[i]);
        }
    }

    // Hash maps are dumped in sorted key order so identical maps give
    // identical bytes.
    std::vector<std::pair<PairKey, std::uint32_t>> entries(artifact.map.entries.begin(),
                                                           artifact.map.entries.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        return std::tie(a.first.a, a.first.b) < std::tie(b.first.a, b.first.b);
    });
    w.put<std::uint64_t>(entries.size());
    for (const auto& [key, id] : entries) {
        w.put<std::uint64_t>(key.a);
        w.put<std::uint64_t>(key.b);
        w.put<std::uint32_t>(id);
    }

    std::vector<std::pair<PairKey, State>> latches(artifact.map.latch_entries.begin(),
                                                   artifact.map.latch_entries.end());
    std::sort(latches.begin(), latches.end(), [](const auto& a, const auto& b) {
        return std::tie(a.first.a, a.first.b) < std::tie(b.first.a, b.first.b);
    });
    w.put<std::uint64_t>(latches.size());
    for (const auto& [key, target] : latches) {
        w.put<std::uint64_t>(key.a);
        w.put<std::uint64_t>(key.b);
        put_state(w, target);
    }

    w.put<std::uint32_t>(static_cast<std::uint32_t>(artifact.map.home_path_ids.size()));
    for (std::uint32_t id : artifact.map.home_path_ids) w.put<std::uint32_t>(id);

    std::vector<std::pair<std::uint64_t, const std::vector<std::uint64_t>*>> unreachable;
    for (const auto& [skey, goals] : artifact.map.unreachable) unreachable.emplace_back(skey, &goals);
    std::sort(unreachable.begin(), unreachable.end());
    w.put<std::uint64_t>(unreachable.size());
    for (const auto& [skey, goals] : unreachable) {
        w.put<std::uint64_t>(skey);
        w.put<std::uint64_t>(goals->size());
        for (std::uint64_t g : *goals) w.put<std::uint64_t>(g);
    }

    std::vector<std::pair<std::uint64_t, State>> states(artifact.map.states_with_records.begin(),
                                                        artifact.map.states_with_records.end());
    std::sort(states.begin(), states.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    w.put<std::uint64_t>(states.size());
    for (const auto& [skey, s] : states) {
        w.put<std::uint64_t>(skey);
        put_state(w, s);
    }

    const std::uint64_t checksum = fnv1a(w.buffer().data(), w.buffer().size());
    w.put<std::uint64_t>(checksum);
    return std::move(w.buffer());
}

Artifact deserialize_artifact(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 + 4 + 8)
        throw ArtifactError(ArtifactError::Kind::kTruncated, "artifact too small");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw ArtifactError(ArtifactError::Kind::kBadMagic, "not a planner artifact");

    Reader header(bytes.subspan(4));
    const std::uint32_t version = header.get<std::uint32_t>();
    if (version != kVersion)
        throw ArtifactError(ArtifactError::Kind::kVersion,
                            "unsupported artifact version " + std::to_string(version));

    std::uint64_t stored_checksum;
    std::memcpy(&stored_checksum, bytes.data() + bytes.size() - 8, 8);
    const std::uint64_t actual = fnv1a(bytes.data(), bytes.size() - 8);
    if (stored_checksum != actual)
        throw ArtifactError(ArtifactError::Kind::kCorrupt, "artifact checksum mismatch");

    Reader r(bytes.subspan(8, bytes.size() - 16));
    Artifact artifact;

    const std::uint64_t cfg_len = r.get<std::uint64_t>();
    const std::string cfg = r.get_string(cfg_len);
    const std::uint64_t cfg_hash = r.get<std::uint64_t>();
    if (cfg_hash != fnv1a(cfg.data(), cfg.size()))
        throw ArtifactError(ArtifactError::Kind::kConfigHash, "embedded config hash mismatch");
    try {
        artifact.config = Config::from_json(nlohmann::json::parse(cfg));
    } catch (const std::exception& e) {
        throw ArtifactError(ArtifactError::Kind::kCorrupt,
                            std::string("embedded config unusable: ") + e.what());
    }

    artifact.s_home = get_state(r);
    artifact.bounded_budget = r.get<std::int64_t>();
    if (artifact.bounded_budget <= 0)
        throw ArtifactError(ArtifactError::Kind::kCorrupt, "nonpositive bounded budget");

    const std::size_t n = artifact.config.arm.joint_count();
    const std::uint32_t path_count = r.get<std::uint32_t>();
    artifact.root_paths.reserve(path_count);
    for (std::uint32_t i = 0; i < path_count; ++i) {
        RootPath rp;
        rp.id = r.get<std::uint32_t>();
        if (rp.id != i)
            throw ArtifactError(ArtifactError::Kind::kCorrupt, "root path ids not contiguous");
        rp.origin = get_state(r);
        rp.parent_id = r.get<std::int32_t>();
        rp.parent_index = r.get<std::int32_t>();
        rp.path = get_path(r, n);
        const std::uint64_t covered = r.get<std::uint64_t>();
        rp.covered_goal_keys.reserve(covered);
        rp.shortcut_indices.reserve(covered);
        for (std::uint64_t k = 0; k < covered; ++k) {
            rp.covered_goal_keys.push_back(r.get<std::uint64_t>());
            rp.shortcut_indices.push_back(r.get<std::int32_t>());
        }
        artifact.root_paths.push_back(std::move(rp));
    }

    const std::uint64_t entry_count = r.get<std::uint64_t>();
    artifact.map.entries.reserve(entry_count);
    for (std::uint64_t i = 0; i < entry_count; ++i) {
        PairKey key;
        key.a = r.get<std::uint64_t>();
        key.b = r.get<std::uint64_t>();
        artifact.map.entries.emplace(key, r.get<std::uint32_t>());
    }

    const std::uint64_t latch_count = r.get<std::uint64_t>();
    artifact.map.latch_entries.reserve(latch_count);
    for (std::uint64_t i = 0; i < latch_count; ++i) {
        PairKey key;
        key.a = r.get<std::uint64_t>();
        key.b = r.get<std::uint64_t>();
        artifact.map.latch_entries.emplace(key, get_state(r));
    }

    const std::uint32_t home_count = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < home_count; ++i)
        artifact.map.home_path_ids.push_back(r.get<std::uint32_t>());

    const std::uint64_t unreachable_count = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < unreachable_count; ++i) {
        const std::uint64_t skey = r.get<std::uint64_t>();
        const std::uint64_t goals = r.get<std::uint64_t>();
        std::vector<std::uint64_t> keys;
        keys.reserve(goals);
        for (std::uint64_t k = 0; k < goals; ++k) keys.push_back(r.get<std::uint64_t>());
        artifact.map.unreachable.emplace(skey, std::move(keys));
    }

    const std::uint64_t state_count = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < state_count; ++i) {
        const std::uint64_t skey = r.get<std::uint64_t>();
        artifact.map.states_with_records.emplace(skey, get_state(r));
    }

    artifact.rebuild_runtime_index();
    return artifact;
}

void save_artifact(const std::string& path, const Artifact& artifact) {
    const std::vector<std::uint8_t> bytes = serialize_artifact(artifact);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

Artifact load_artifact(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArtifactError(ArtifactError::Kind::kTruncated, "cannot open artifact: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize_artifact(bytes);
}

}  // namespace conveyor
