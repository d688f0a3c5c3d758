#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

namespace strata {

// Distance-to-stride lookup. s(d) = strides[min(d, len-1)], total for d >= 0.
struct StrideSchedule {
    std::vector<int> strides;

    static StrideSchedule make(std::vector<int> strides) {
        if (strides.empty()) {
            throw std::invalid_argument("StrideSchedule: empty schedule");
        }
        for (int s : strides) {
            if (s < 1) {
                throw std::invalid_argument("StrideSchedule: strides must be >= 1, got " +
                                            std::to_string(s));
            }
        }
        return StrideSchedule{std::move(strides)};
    }

    int at(int distance) const {
        if (distance < 0) {
            throw std::invalid_argument("StrideSchedule: negative frame distance");
        }
        const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(distance), strides.size() - 1);
        return strides[i];
    }

    bool operator==(const StrideSchedule&) const = default;
};

inline int stride_of(const StrideSchedule& schedule, int distance) { return schedule.at(distance); }

inline StrideSchedule default_schedule() { return StrideSchedule::make({1, 1, 2, 4, 8, 16}); }
inline StrideSchedule aggressive_schedule() { return StrideSchedule::make({1, 2, 4, 8, 16, 32}); }
inline StrideSchedule conservative_schedule() { return StrideSchedule::make({1, 1, 2, 2, 4, 4}); }

// Mask family selector. The anchored variants keep the dense first-frame
// column; FixedStride applies a constant stride beyond d=0; TemporalOnly
// admits only matching spatial blocks across frames.
struct MaskVariant {
    enum class Kind {
        Ours,
        NoAnchor,
        FixedStride,
        AggressiveDecay,
        ConservativeDecay,
        TemporalOnly,
        FullAttention,
    };

    Kind kind = Kind::Ours;
    StrideSchedule schedule = default_schedule();
    int stride = 4;

    static MaskVariant ours(StrideSchedule s = default_schedule()) {
        return MaskVariant{Kind::Ours, std::move(s), 4};
    }
    static MaskVariant no_anchor(StrideSchedule s = default_schedule()) {
        return MaskVariant{Kind::NoAnchor, std::move(s), 4};
    }
    static MaskVariant fixed_stride(int s = 4) {
        if (s < 1) throw std::invalid_argument("MaskVariant: fixed stride must be >= 1");
        return MaskVariant{Kind::FixedStride, default_schedule(), s};
    }
    static MaskVariant aggressive_decay() {
        return MaskVariant{Kind::AggressiveDecay, aggressive_schedule(), 4};
    }
    static MaskVariant conservative_decay() {
        return MaskVariant{Kind::ConservativeDecay, conservative_schedule(), 4};
    }
    static MaskVariant temporal_only() {
        return MaskVariant{Kind::TemporalOnly, default_schedule(), 4};
    }
    static MaskVariant full_attention() {
        return MaskVariant{Kind::FullAttention, default_schedule(), 4};
    }

    bool anchored() const {
        switch (kind) {
            case Kind::Ours:
            case Kind::AggressiveDecay:
            case Kind::ConservativeDecay:
                return true;
            default:
                return false;
        }
    }

    // stride governing the (u mod s == v mod s) rule at frame distance d;
    // meaningless for TemporalOnly/FullAttention
    int stride_at(int distance) const {
        switch (kind) {
            case Kind::FixedStride:
                return distance == 0 ? 1 : stride;
            default:
                return schedule.at(distance);
        }
    }

    std::string name() const {
        switch (kind) {
            case Kind::Ours: return "ours";
            case Kind::NoAnchor: return "no-anchor";
            case Kind::FixedStride: return "fixed:" + std::to_string(stride);
            case Kind::AggressiveDecay: return "aggressive";
            case Kind::ConservativeDecay: return "conservative";
            case Kind::TemporalOnly: return "temporal";
            case Kind::FullAttention: return "full";
        }
        return "?";
    }

    // Parses "ours|no-anchor|fixed:s|aggressive|conservative|temporal|full".
    static MaskVariant parse(const std::string& text) {
        if (text == "ours") return ours();
        if (text == "no-anchor") return no_anchor();
        if (text == "aggressive") return aggressive_decay();
        if (text == "conservative") return conservative_decay();
        if (text == "temporal") return temporal_only();
        if (text == "full") return full_attention();
        if (text == "fixed") return fixed_stride();
        if (text.rfind("fixed:", 0) == 0) {
            const std::string arg = text.substr(6);
            std::size_t pos = 0;
            int s = 0;
            try {
                s = std::stoi(arg, &pos);
            } catch (const std::exception&) {
                throw std::invalid_argument("MaskVariant: bad fixed stride '" + arg + "'");
            }
            if (pos != arg.size()) {
                throw std::invalid_argument("MaskVariant: bad fixed stride '" + arg + "'");
            }
            return fixed_stride(s);
        }
        throw std::invalid_argument("MaskVariant: unknown variant '" + text + "'");
    }

    // Replaces the schedule on schedule-driven variants; presets and
    // schedule-free variants are left alone.
    MaskVariant with_schedule(StrideSchedule s) const {
        MaskVariant v = *this;
        if (kind == Kind::Ours || kind == Kind::NoAnchor) {
            v.schedule = std::move(s);
        }
        return v;
    }
};

} // namespace strata
