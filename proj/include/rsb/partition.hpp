#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "rsb/errors.hpp"
#include "rsb/state_set.hpp"

namespace rsb {

/// Equivalence relation on 0..n-1 stored as a block assignment plus the
/// member set of every block. Blocks are nonempty, disjoint and cover the
/// universe. `generation` is bumped on every split.
class Partition {
public:
    Partition() = default;

    /// Builds from an arbitrary block assignment; block ids are renumbered
    /// canonically (ascending smallest member).
    static Partition from_assignment(const std::vector<std::uint32_t>& key) {
        const auto n = key.size();
        std::map<std::uint32_t, BlockId> renumber;
        Partition p;
        p.block_of_.resize(n);
        for (StateId s = 0; s < n; ++s) {
            auto [it, fresh] = renumber.emplace(key[s], static_cast<BlockId>(p.blocks_.size()));
            if (fresh) p.blocks_.emplace_back(n);
            p.block_of_[s] = it->second;
            p.blocks_[it->second].insert(s);
        }
        return p;
    }
    /// Builds from a block assignment keeping the given ids, which must be
    /// exactly 0..k-1 with every block nonempty.
    static Partition with_ids(const std::vector<BlockId>& key) {
        Partition p;
        p.block_of_ = key;
        const auto n = key.size();
        for (StateId s = 0; s < n; ++s) {
            if (key[s] >= n) throw PreconditionError("block id out of range");
            if (key[s] >= p.blocks_.size()) p.blocks_.resize(key[s] + 1, StateSet(n));
            p.blocks_[key[s]].insert(s);
        }
        for (const auto& b : p.blocks_)
            if (b.empty()) throw PreconditionError("block ids are not dense");
        return p;
    }
    static Partition from_blocks(std::size_t n, const std::vector<StateSet>& blocks) {
        std::vector<std::uint32_t> key(n, UINT32_MAX);
        for (std::uint32_t b = 0; b < blocks.size(); ++b)
            for (auto s : blocks[b]) {
                if (s >= n || key[s] != UINT32_MAX) throw PreconditionError("blocks overlap or exceed the universe");
                key[s] = b;
            }
        if (std::find(key.begin(), key.end(), UINT32_MAX) != key.end()) throw PreconditionError("blocks do not cover the universe");
        return from_assignment(key);
    }
    static Partition identity(std::size_t n) {
        std::vector<std::uint32_t> key(n);
        std::iota(key.begin(), key.end(), 0u);
        return from_assignment(key);
    }
    static Partition single_block(std::size_t n) { return from_assignment(std::vector<std::uint32_t>(n, 0)); }

    std::size_t universe() const { return block_of_.size(); }
    std::size_t num_blocks() const { return blocks_.size(); }
    BlockId block_of(StateId s) const { return block_of_.at(s); }
    const StateSet& block(BlockId b) const { return blocks_.at(b); }
    const std::vector<StateSet>& blocks() const { return blocks_; }
    std::uint64_t generation() const { return generation_; }

    bool related(StateId a, StateId b) const { return block_of_.at(a) == block_of_.at(b); }

    /// Union of the given blocks.
    template <typename Range>
    StateSet superblock(const Range& ids) const {
        StateSet r(universe());
        for (auto b : ids) r |= blocks_.at(b);
        return r;
    }
    /// Blocks intersecting X.
    std::vector<BlockId> blocks_touching(const StateSet& x) const {
        std::vector<BlockId> r;
        std::vector<bool> seen(blocks_.size(), false);
        for (auto s : x)
            if (!seen[block_of_[s]]) seen[block_of_[s]] = true;
        for (BlockId b = 0; b < blocks_.size(); ++b)
            if (seen[b]) r.push_back(b);
        return r;
    }
    /// True iff X is a union of blocks.
    bool is_superblock(const StateSet& x) const {
        for (auto s : x)
            if (!blocks_[block_of_[s]].is_subset_of(x)) return false;
        return true;
    }

    /// Replaces block b by (b & inside) keeping id b and (b - inside) under a
    /// fresh id, which is returned. Both parts must be nonempty.
    BlockId split(BlockId b, const StateSet& inside) {
        StateSet in = blocks_.at(b) & inside;
        StateSet out = blocks_.at(b) - inside;
        if (in.empty() || out.empty()) throw PreconditionError("split would leave an empty block");
        const auto fresh = static_cast<BlockId>(blocks_.size());
        for (auto s : out) block_of_[s] = fresh;
        blocks_[b] = std::move(in);
        blocks_.push_back(std::move(out));
        ++generation_;
        return fresh;
    }

    /// Same relation with blocks renumbered by ascending smallest member.
    Partition canonical() const {
        Partition p = from_assignment(block_of_);
        p.generation_ = generation_;
        return p;
    }

    /// Relation inclusion: every pair related here is related in `coarser`.
    bool refines(const Partition& coarser) const {
        for (const auto& blk : blocks_) {
            const auto c = coarser.block_of(blk.first());
            for (auto s : blk)
                if (coarser.block_of(s) != c) return false;
        }
        return true;
    }

    /// Same relation (block numbering ignored).
    bool same_relation(const Partition& o) const {
        return universe() == o.universe() && num_blocks() == o.num_blocks() && refines(o) && o.refines(*this);
    }

private:
    std::vector<BlockId> block_of_;
    std::vector<StateSet> blocks_;
    std::uint64_t generation_ = 0;
};

/// Lazy enumeration of all 2^k superblocks (unions of blocks) of a
/// partition, in binary-counter order over block ids; the empty set first.
class SuperblockRange {
public:
    explicit SuperblockRange(const Partition& r) : r_(&r) {
        if (r.num_blocks() >= 63) throw PreconditionError("too many blocks to enumerate superblocks");
    }

    class iterator {
    public:
        using value_type = StateSet;
        using difference_type = std::ptrdiff_t;
        iterator() = default;
        iterator(const Partition* r, std::uint64_t mask) : r_(r), mask_(mask) {}
        StateSet operator*() const {
            StateSet s(r_->universe());
            for (BlockId b = 0; b < r_->num_blocks(); ++b)
                if (mask_ >> b & 1u) s |= r_->block(b);
            return s;
        }
        iterator& operator++() {
            ++mask_;
            return *this;
        }
        iterator operator++(int) {
            auto t = *this;
            ++mask_;
            return t;
        }
        friend bool operator==(const iterator& a, const iterator& b) { return a.mask_ == b.mask_; }
        std::uint64_t mask() const { return mask_; }

    private:
        const Partition* r_ = nullptr;
        std::uint64_t mask_ = 0;
    };

    iterator begin() const { return {r_, 0}; }
    iterator end() const { return {r_, std::uint64_t{1} << r_->num_blocks()}; }
    std::uint64_t size() const { return std::uint64_t{1} << r_->num_blocks(); }

private:
    const Partition* r_;
};

inline SuperblockRange superblocks_of(const Partition& r) { return SuperblockRange(r); }

}  // namespace rsb
