#pragma once

#include <algorithm>
#include <bit>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

namespace rsb {

using StateId = std::uint32_t;
using LabelId = std::uint32_t;
using PropId = std::uint32_t;
using BlockId = std::uint32_t;

/// Dense bitset over 0..n-1. All set algebra in the library goes through
/// this type; operands of binary operations must have the same universe size.
class StateSet {
public:
    using word_type = std::uint64_t;
    static constexpr std::size_t word_bits = 64;

    StateSet() = default;
    explicit StateSet(std::size_t universe) : size_(universe), words_((universe + word_bits - 1) / word_bits, 0) {}
    StateSet(std::size_t universe, std::initializer_list<StateId> members) : StateSet(universe) {
        for (auto s : members) insert(s);
    }

    static StateSet full(std::size_t universe) {
        StateSet r(universe);
        r.fill();
        return r;
    }

    template <typename Range>
    static StateSet of(std::size_t universe, const Range& members) {
        StateSet r(universe);
        for (auto s : members) r.insert(static_cast<StateId>(s));
        return r;
    }

    std::size_t universe() const { return size_; }

    bool contains(StateId s) const {
        assert(s < size_);
        return (words_[s / word_bits] >> (s % word_bits)) & 1u;
    }
    void insert(StateId s) {
        assert(s < size_);
        words_[s / word_bits] |= word_type{1} << (s % word_bits);
    }
    void erase(StateId s) {
        assert(s < size_);
        words_[s / word_bits] &= ~(word_type{1} << (s % word_bits));
    }
    void fill() {
        std::fill(words_.begin(), words_.end(), ~word_type{0});
        trim();
    }
    void clear() { std::fill(words_.begin(), words_.end(), 0); }

    std::size_t count() const {
        std::size_t c = 0;
        for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
        return c;
    }
    bool empty() const {
        return std::all_of(words_.begin(), words_.end(), [](word_type w) { return w == 0; });
    }

    bool is_subset_of(const StateSet& o) const {
        assert(size_ == o.size_);
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (words_[i] & ~o.words_[i]) return false;
        return true;
    }
    bool intersects(const StateSet& o) const {
        assert(size_ == o.size_);
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (words_[i] & o.words_[i]) return true;
        return false;
    }

    StateSet& operator|=(const StateSet& o) {
        assert(size_ == o.size_);
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= o.words_[i];
        return *this;
    }
    StateSet& operator&=(const StateSet& o) {
        assert(size_ == o.size_);
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= o.words_[i];
        return *this;
    }
    StateSet& operator-=(const StateSet& o) {
        assert(size_ == o.size_);
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= ~o.words_[i];
        return *this;
    }
    friend StateSet operator|(StateSet a, const StateSet& b) { return a |= b; }
    friend StateSet operator&(StateSet a, const StateSet& b) { return a &= b; }
    friend StateSet operator-(StateSet a, const StateSet& b) { return a -= b; }
    StateSet complement() const {
        StateSet r(*this);
        for (auto& w : r.words_) w = ~w;
        r.trim();
        return r;
    }

    friend bool operator==(const StateSet&, const StateSet&) = default;

    /// Orders by universe size, then by the ascending member sequence.
    friend bool operator<(const StateSet& a, const StateSet& b) {
        if (a.size_ != b.size_) return a.size_ < b.size_;
        auto ia = a.begin(), ib = b.begin();
        for (; ia != a.end() && ib != b.end(); ++ia, ++ib)
            if (*ia != *ib) return *ia < *ib;
        return ia == a.end() && ib != b.end();
    }

    std::size_t hash() const {
        std::size_t h = size_ * 0x9e3779b97f4a7c15ull;
        for (auto w : words_) h ^= std::hash<word_type>{}(w) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        return h;
    }

    /// Smallest member >= from, or universe() if none.
    StateId next(StateId from) const {
        if (from >= size_) return static_cast<StateId>(size_);
        std::size_t wi = from / word_bits;
        word_type w = words_[wi] & (~word_type{0} << (from % word_bits));
        while (true) {
            if (w) return static_cast<StateId>(wi * word_bits + static_cast<std::size_t>(std::countr_zero(w)));
            if (++wi >= words_.size()) return static_cast<StateId>(size_);
            w = words_[wi];
        }
    }
    StateId first() const { return next(0); }

    class iterator {
    public:
        using value_type = StateId;
        using difference_type = std::ptrdiff_t;
        iterator() = default;
        iterator(const StateSet* set, StateId pos) : set_(set), pos_(pos) {}
        StateId operator*() const { return pos_; }
        iterator& operator++() {
            pos_ = set_->next(pos_ + 1);
            return *this;
        }
        iterator operator++(int) {
            auto t = *this;
            ++*this;
            return t;
        }
        friend bool operator==(const iterator& a, const iterator& b) { return a.pos_ == b.pos_; }

    private:
        const StateSet* set_ = nullptr;
        StateId pos_ = 0;
    };
    iterator begin() const { return iterator(this, first()); }
    iterator end() const { return iterator(this, static_cast<StateId>(size_)); }

    std::vector<StateId> to_vector() const { return {begin(), end()}; }

private:
    void trim() {
        if (size_ % word_bits && !words_.empty()) words_.back() &= (word_type{1} << (size_ % word_bits)) - 1;
    }

    std::size_t size_ = 0;
    std::vector<word_type> words_;
};

struct StateSetHash {
    std::size_t operator()(const StateSet& s) const { return s.hash(); }
};

}  // namespace rsb
