#pragma once

// Point memory: the most recent prompt points and amodal mask per instance,
// used to carry instances the visible segmenter stops reporting.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "samodal/error.hpp"
#include "samodal/mask.hpp"
#include "samodal/rle.hpp"
#include "samodal/sampling.hpp"
#include "samodal/types.hpp"

namespace samodal {

struct MemoryEntry
{
    InstanceId instance;
    /// Last frame this entry was updated (visible or tracked).
    FrameIndex last_frame = 0;
    /// Frame the stored points and mask describe.
    FrameIndex anchor_frame = 0;
    PointTuple points;
    BinaryMask amodal;
    /// Frames since the instance was last reported visible.
    int occluded_streak = 0;
    /// Score and class of the last visible detection, carried onto tracked output.
    double score = 1.0;
    std::optional<int> class_label;
};

/// What the tracking fallback needs for one missing instance.
struct MissingInstance
{
    InstanceId instance;
    FrameIndex anchor_frame = 0;
    PointTuple points;
    BinaryMask amodal;
    double score = 1.0;
    std::optional<int> class_label;
};

class PointMemory
{
public:
    explicit PointMemory(std::optional<int> max_occlusion = std::nullopt) : max_occlusion_(max_occlusion)
    {
        if (max_occlusion && *max_occlusion < 1)
            throw InvalidArgument("max_occlusion must be positive");
    }

    void store_visible(FrameIndex t, InstanceId id, PointTuple points, BinaryMask amodal, double score = 1.0,
                       std::optional<int> class_label = std::nullopt)
    {
        auto it = entries_.find(id);
        if (it != entries_.end() && t < it->second.last_frame)
            throw InvalidArgument("memory: instance " + to_string(id) + " stored at frame " + std::to_string(t) +
                                  " after frame " + std::to_string(it->second.last_frame));
        entries_[id] = MemoryEntry{id, t, t, std::move(points), std::move(amodal), 0, score, class_label};
    }

    /// Previously seen instances that are not in `visible` at frame t and
    /// have not exceeded `max_occlusion` consecutive missing frames.
    std::vector<MissingInstance> retrieve_missing(FrameIndex t, const std::set<InstanceId>& visible) const
    {
        std::vector<MissingInstance> out;
        for (const auto& [id, e] : entries_) {
            if (visible.contains(id) || e.last_frame >= t)
                continue;
            if (max_occlusion_ && e.occluded_streak >= *max_occlusion_)
                continue;
            out.push_back({id, e.anchor_frame, e.points, e.amodal, e.score, e.class_label});
        }
        return out;
    }

    /// Replace the entry with tracked state so the next frame chains from it.
    void store_tracked(FrameIndex t, InstanceId id, PointTuple predicted, BinaryMask shifted)
    {
        auto& e = existing(t, id, "store_tracked");
        e.last_frame = t;
        e.anchor_frame = t;
        e.points = std::move(predicted);
        e.amodal = std::move(shifted);
        ++e.occluded_streak;
    }

    /// Count a tracked frame but keep the anchored (last visible) state.
    void note_tracked(FrameIndex t, InstanceId id)
    {
        auto& e = existing(t, id, "note_tracked");
        e.last_frame = t;
        ++e.occluded_streak;
    }

    const MemoryEntry* find(InstanceId id) const
    {
        auto it = entries_.find(id);
        return it == entries_.end() ? nullptr : &it->second;
    }

    std::size_t size() const noexcept { return entries_.size(); }
    std::optional<int> max_occlusion() const noexcept { return max_occlusion_; }

    /// One line per entry: `id last_frame streak p1 .. pK H W c0 c1 ..`.
    std::string dump() const
    {
        std::string out;
        for (const auto& [id, e] : entries_) {
            out += to_string(id) + " " + std::to_string(e.last_frame) + " " + std::to_string(e.occluded_streak);
            for (auto p : e.points.points)
                out += " " + std::to_string(p.value);
            out += " " + mask_to_text(e.amodal) + "\n";
        }
        return out;
    }

private:
    MemoryEntry& existing(FrameIndex t, InstanceId id, const char* op)
    {
        auto it = entries_.find(id);
        if (it == entries_.end())
            throw InvalidArgument(std::string("memory: ") + op + " for unknown instance " + to_string(id));
        if (t < it->second.last_frame)
            throw InvalidArgument(std::string("memory: ") + op + " at frame " + std::to_string(t) +
                                  " regresses from frame " + std::to_string(it->second.last_frame));
        return it->second;
    }

    std::map<InstanceId, MemoryEntry> entries_;
    std::optional<int> max_occlusion_;
};

}  // namespace samodal
