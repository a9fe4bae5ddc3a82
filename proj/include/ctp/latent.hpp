#pragma once

#include <cstdint>
#include <vector>

#include "ctp/errors.hpp"

namespace ctp {

// Fixed-length sequence of slots, each Masked or a token index. Masked is the
// absorbing state of parallel token prediction: once a slot is written it is
// never changed.
struct LatentState {
    static constexpr std::int32_t kMasked = -1;

    std::vector<std::int32_t> slots;

    LatentState() = default;
    explicit LatentState(std::size_t length) : slots(length, kMasked) {}
    explicit LatentState(std::vector<std::int32_t> s) : slots(std::move(s)) {}

    std::size_t size() const { return slots.size(); }
    bool is_masked(std::size_t i) const { return slots[i] == kMasked; }
    std::int32_t token(std::size_t i) const { return slots[i]; }

    void set_token(std::size_t i, std::int32_t tok) {
        if (!is_masked(i)) throw MaskedStateError("slot already unmasked");
        slots[i] = tok;
    }

    std::size_t masked_count() const {
        std::size_t n = 0;
        for (std::int32_t s : slots) n += (s == kMasked);
        return n;
    }

    std::vector<std::size_t> masked_slots() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < slots.size(); ++i) {
            if (slots[i] == kMasked) out.push_back(i);
        }
        return out;
    }

    bool fully_unmasked() const { return masked_count() == 0; }

    bool operator==(const LatentState&) const = default;
};

} // namespace ctp
