#pragma once

#include <cstdint>
#include <vector>

namespace conveyor {

/// Fixed-universe bitset over goal keys [0, universe). Set operations are the
/// hot path of preprocessing; iteration order is always ascending key order,
/// which keeps every consumer deterministic.
class GoalSet {
public:
    GoalSet() = default;
    explicit GoalSet(std::size_t universe) : universe_(universe), bits_((universe + 63) / 64, 0) {}

    std::size_t universe() const { return universe_; }

    void insert(std::uint64_t key) { bits_[key >> 6] |= (1ULL << (key & 63)); }
    void erase(std::uint64_t key) { bits_[key >> 6] &= ~(1ULL << (key & 63)); }
    bool contains(std::uint64_t key) const { return (bits_[key >> 6] >> (key & 63)) & 1ULL; }

    bool empty() const {
        for (std::uint64_t w : bits_)
            if (w != 0) return false;
        return true;
    }

    std::size_t count() const {
        std::size_t c = 0;
        for (std::uint64_t w : bits_) c += static_cast<std::size_t>(__builtin_popcountll(w));
        return c;
    }

    void insert_all(const GoalSet& o) {
        for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] |= o.bits_[i];
    }
    void erase_all(const GoalSet& o) {
        for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] &= ~o.bits_[i];
    }
    bool intersects(const GoalSet& o) const {
        for (std::size_t i = 0; i < bits_.size(); ++i)
            if ((bits_[i] & o.bits_[i]) != 0) return true;
        return false;
    }

    std::vector<std::uint64_t> keys() const {
        std::vector<std::uint64_t> out;
        out.reserve(count());
        for (std::size_t i = 0; i < bits_.size(); ++i) {
            std::uint64_t w = bits_[i];
            while (w != 0) {
                const int b = __builtin_ctzll(w);
                out.push_back(static_cast<std::uint64_t>(i) * 64 + b);
                w &= w - 1;
            }
        }
        return out;
    }

    /// k-th set bit in ascending order (k < count()).
    std::uint64_t nth(std::size_t k) const {
        for (std::size_t i = 0; i < bits_.size(); ++i) {
            std::uint64_t w = bits_[i];
            const std::size_t c = static_cast<std::size_t>(__builtin_popcountll(w));
            if (k >= c) {
                k -= c;
                continue;
            }
            while (true) {
                const int b = __builtin_ctzll(w);
                if (k == 0) return static_cast<std::uint64_t>(i) * 64 + b;
                --k;
                w &= w - 1;
            }
        }
        return universe_;  // unreachable when k < count()
    }

    bool operator==(const GoalSet& o) const { return bits_ == o.bits_ && universe_ == o.universe_; }

private:
    std::size_t universe_ = 0;
    std::vector<std::uint64_t> bits_;
};

}  // namespace conveyor
