#pragma once

// The three model roles the pipeline drives, and reference implementations
// answering from synthetic ground truth:
//
//   VisibleSegmenter  online VIS: visible masks with stable ids per frame
//   AmodalSegmenter   point-prompted amodal segmentation (image + points)
//   PointTracker      moves query points from an earlier frame to frame t
//
// Oracle backends read only the ground truth of the frame being queried, so
// they honour the online contract as long as the caller does.

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "samodal/error.hpp"
#include "samodal/mask.hpp"
#include "samodal/rng.hpp"
#include "samodal/sampling.hpp"
#include "samodal/scenegen.hpp"
#include "samodal/types.hpp"

namespace samodal {

struct VisiblePrediction
{
    InstanceId id;
    BinaryMask mask;
    double score = 1.0;
    std::optional<int> class_label;

    friend bool operator==(const VisiblePrediction&, const VisiblePrediction&) = default;
};

struct TrackResult
{
    std::vector<PixelIndex> points;
    /// 1 = the tracker believes the point is occluded at frame t.
    std::vector<std::uint8_t> occluded;
    /// 1 = the raw prediction left the grid and was clamped back onto it.
    std::vector<std::uint8_t> clipped;

    friend bool operator==(const TrackResult&, const TrackResult&) = default;
};

class VisibleSegmenter
{
public:
    virtual ~VisibleSegmenter() = default;
    virtual void begin_video(const GridDims&, int /*frames*/) {}
    virtual std::vector<VisiblePrediction> predict(FrameIndex t, const LabelGrid& frame) = 0;
};

class AmodalSegmenter
{
public:
    virtual ~AmodalSegmenter() = default;
    virtual void begin_video(const GridDims&, int /*frames*/) {}
    /// `declared` is the instance the caller is prompting for. Only
    /// in-process oracles may look at it; external models see image + points.
    virtual BinaryMask predict(FrameIndex t, const LabelGrid& frame, const PointTuple& prompt,
                               std::optional<InstanceId> declared) = 0;
};

class PointTracker
{
public:
    virtual ~PointTracker() = default;
    virtual void begin_video(const GridDims&, int /*frames*/) {}
    /// `history` holds frames 1..t. Query points are positions at `query_frame`.
    virtual TrackResult track(FrameIndex t, std::span<const LabelGrid> history, FrameIndex query_frame,
                              std::span<const PixelIndex> query, InstanceId owner) = 0;
};

struct BackendSet
{
    std::shared_ptr<VisibleSegmenter> visible;
    std::shared_ptr<AmodalSegmenter> amodal;
    std::shared_ptr<PointTracker> tracker;

    void require_complete() const
    {
        if (!visible || !amodal || !tracker)
            throw InvalidArgument("backend set incomplete: visible, amodal and tracker are all required");
    }
};

// ---------------------------------------------------------------------------
// Visible segmenters
// ---------------------------------------------------------------------------

/// Ground-truth visible masks. Instances whose visible/amodal area ratio is
/// at most `min_visibility` are suppressed, as a detector would miss them.
class OracleVisible : public VisibleSegmenter
{
public:
    explicit OracleVisible(const SyntheticVideo& video, double min_visibility = 0.0)
        : video_(&video), min_visibility_(min_visibility)
    {
        if (!(min_visibility >= 0.0 && min_visibility < 1.0))
            throw InvalidArgument("oracle visibility threshold must lie in [0, 1)");
    }

    std::vector<VisiblePrediction> predict(FrameIndex t, const LabelGrid&) override
    {
        std::vector<VisiblePrediction> out;
        for (const auto& inst : video_->frame(t).instances) {
            const auto seen = inst.visible.area();
            const auto total = inst.amodal.area();
            if (seen == 0 || total == 0)
                continue;
            if (static_cast<double>(seen) / static_cast<double>(total) <= min_visibility_)
                continue;
            out.push_back({inst.id, inst.visible, 1.0, inst.class_label});
        }
        return out;
    }

private:
    const SyntheticVideo* video_;
    double min_visibility_;
};

/// Oracle visible masks degraded in two ways: each detection is dropped
/// with probability `drop_rate` (from frame `from_frame` on), and surviving
/// masks are dilated by `dilate_radius` pixels so their boundary bleeds into
/// neighbouring instances and background.
class NoisyVisible : public VisibleSegmenter
{
public:
    NoisyVisible(const SyntheticVideo& video, double drop_rate, int dilate_radius, FrameIndex from_frame,
                 std::uint64_t seed, double min_visibility = 0.0)
        : oracle_(video, min_visibility), drop_rate_(drop_rate), dilate_radius_(dilate_radius),
          from_frame_(from_frame), seed_(seed)
    {
        if (!(drop_rate >= 0.0 && drop_rate <= 1.0))
            throw InvalidArgument("drop rate must lie in [0, 1]");
        if (dilate_radius < 0)
            throw InvalidArgument("dilation radius must be >= 0");
    }

    std::vector<VisiblePrediction> predict(FrameIndex t, const LabelGrid& frame) override
    {
        std::vector<VisiblePrediction> out;
        for (auto& p : oracle_.predict(t, frame)) {
            if (t >= from_frame_) {
                SplitMix64 rng(derive_seed(seed_, static_cast<std::uint64_t>(t), p.id.value));
                if (rng.uniform() < drop_rate_)
                    continue;
            }
            if (dilate_radius_ > 0)
                p.mask = dilate(p.mask, 2 * dilate_radius_ + 1);
            out.push_back(std::move(p));
        }
        return out;
    }

private:
    OracleVisible oracle_;
    double drop_rate_;
    int dilate_radius_;
    FrameIndex from_frame_;
    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Amodal segmenters
// ---------------------------------------------------------------------------

namespace detail {

// Majority owner of the prompt pixels (0 = background); ties go to the owner
// that appears first in prompt order.
inline std::uint32_t prompt_owner(const LabelGrid& frame, const PointTuple& prompt)
{
    std::map<std::uint32_t, std::size_t> votes;
    std::vector<std::uint32_t> order;
    for (auto p : prompt.points) {
        const auto owner = frame.at(p);
        if (votes[owner]++ == 0)
            order.push_back(owner);
    }
    std::uint32_t best = 0;
    std::size_t best_votes = 0;
    for (auto owner : order)
        if (votes[owner] > best_votes) {
            best = owner;
            best_votes = votes[owner];
        }
    return best;
}

inline void require_prompt(const LabelGrid& frame, const PointTuple& prompt)
{
    if (prompt.points.empty())
        throw InvalidArgument("amodal prompt is empty");
    for (auto p : prompt.points)
        if (!in_grid(frame.dims, p))
            throw InvalidArgument("amodal prompt point " + std::to_string(p.value) + " outside " +
                                  to_string(frame.dims));
}

inline BinaryMask amodal_of(const SyntheticVideo& video, FrameIndex t, std::uint32_t owner)
{
    if (owner == 0)
        return BinaryMask(video.dims);
    const auto* inst = video.frame(t).find(InstanceId{owner});
    return inst ? inst->amodal : BinaryMask(video.dims);
}

}  // namespace detail

/// Returns the declared instance's ground-truth amodal mask. Without a
/// declared id it resolves the prompt's owner like ConfusableOracleAmodal.
class OracleAmodal : public AmodalSegmenter
{
public:
    explicit OracleAmodal(const SyntheticVideo& video) : video_(&video) {}

    BinaryMask predict(FrameIndex t, const LabelGrid& frame, const PointTuple& prompt,
                       std::optional<InstanceId> declared) override
    {
        detail::require_prompt(frame, prompt);
        const auto owner = declared ? declared->value : detail::prompt_owner(frame, prompt);
        return detail::amodal_of(*video_, t, owner);
    }

private:
    const SyntheticVideo* video_;
};

/// Answers with the amodal mask of whichever instance is on top at the
/// prompt pixels, ignoring the declared id. A prompt that lands on a
/// neighbour yields the neighbour's mask; one on background yields nothing.
class ConfusableOracleAmodal : public AmodalSegmenter
{
public:
    explicit ConfusableOracleAmodal(const SyntheticVideo& video) : video_(&video) {}

    BinaryMask predict(FrameIndex t, const LabelGrid& frame, const PointTuple& prompt,
                       std::optional<InstanceId>) override
    {
        detail::require_prompt(frame, prompt);
        return detail::amodal_of(*video_, t, detail::prompt_owner(frame, prompt));
    }

private:
    const SyntheticVideo* video_;
};

// ---------------------------------------------------------------------------
// Point trackers
// ---------------------------------------------------------------------------

/// Moves points by the owner's ground-truth translation between the query
/// frame and t. A landing pixel not topped by the owner is flagged occluded.
class OracleTracker : public PointTracker
{
public:
    explicit OracleTracker(const SyntheticVideo& video) : video_(&video) {}

    TrackResult track(FrameIndex t, std::span<const LabelGrid> history, FrameIndex query_frame,
                      std::span<const PixelIndex> query, InstanceId owner) override
    {
        return track_with_noise(t, history, query_frame, query, owner, nullptr, 0.0);
    }

protected:
    TrackResult track_with_noise(FrameIndex t, std::span<const LabelGrid> history, FrameIndex query_frame,
                                 std::span<const PixelIndex> query, InstanceId owner, SplitMix64* rng,
                                 double sigma)
    {
        const auto& dims = video_->dims;
        if (static_cast<int>(history.size()) < t)
            throw InvalidArgument("tracker history shorter than the current frame");
        const LabelGrid& current = history[static_cast<std::size_t>(t - 1)];
        const auto* now = video_->frame(t).find(owner);
        const auto* then = video_->frame(query_frame).find(owner);
        Coord motion{0, 0};
        if (now && then)
            motion = {now->anchor.h - then->anchor.h, now->anchor.w - then->anchor.w};

        TrackResult out;
        for (auto p : query) {
            Coord c = to_coord(dims, p);
            c.h += motion.h;
            c.w += motion.w;
            if (rng) {
                c.h += round_pixel(sigma * rng->normal());
                c.w += round_pixel(sigma * rng->normal());
            }
            const bool clipped = clamp_to_grid(dims, c);
            const auto landing = to_index(dims, c);
            out.points.push_back(landing);
            out.occluded.push_back(current.at(landing) != owner.value);
            out.clipped.push_back(clipped);
        }
        return out;
    }

    const SyntheticVideo* video_;
};

/// Oracle motion plus independent Gaussian jitter (std `sigma` pixels) per
/// point coordinate, rounded to whole pixels.
class NoisyTracker : public OracleTracker
{
public:
    NoisyTracker(const SyntheticVideo& video, double sigma, std::uint64_t seed)
        : OracleTracker(video), sigma_(sigma), seed_(seed)
    {
        if (!(sigma >= 0.0) || !std::isfinite(sigma))
            throw InvalidArgument("tracker noise sigma must be finite and >= 0");
    }

    TrackResult track(FrameIndex t, std::span<const LabelGrid> history, FrameIndex query_frame,
                      std::span<const PixelIndex> query, InstanceId owner) override
    {
        SplitMix64 rng(derive_seed(seed_, static_cast<std::uint64_t>(t), owner.value));
        return track_with_noise(t, history, query_frame, query, owner, &rng, sigma_);
    }

private:
    double sigma_;
    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Command-line backend selectors
// ---------------------------------------------------------------------------

struct VisibleChoice
{
    enum class Kind { Oracle, Noisy, Bridge } kind = Kind::Oracle;
    double min_visibility = 0.0;
    double drop_rate = 0.0;
    int dilate_radius = 0;
    FrameIndex from_frame = 1;
};

struct AmodalChoice
{
    enum class Kind { Oracle, Confusable, Bridge } kind = Kind::Oracle;
};

struct TrackerChoice
{
    enum class Kind { Oracle, Noisy, Bridge } kind = Kind::Oracle;
    double sigma = 0.0;
};

namespace detail {

inline std::vector<std::string> split(std::string_view s, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos)
            return out;
        start = pos + 1;
    }
}

inline double parse_real(const std::string& s, const char* what)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (s.empty() || used != s.size() || !std::isfinite(v))
        throw InvalidArgument(std::string("bad ") + what + " \"" + s + "\"");
    return v;
}

inline int parse_int(const std::string& s, const char* what)
{
    std::size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (s.empty() || used != s.size())
        throw InvalidArgument(std::string("bad ") + what + " \"" + s + "\"");
    return v;
}

}  // namespace detail

/// oracle[:v] | noisy:<drop>[:<dilate>[:<from>]] | bridge
inline VisibleChoice parse_visible_choice(std::string_view s)
{
    const auto parts = detail::split(s, ':');
    VisibleChoice c;
    if (parts[0] == "oracle" && parts.size() <= 2) {
        c.kind = VisibleChoice::Kind::Oracle;
        if (parts.size() == 2)
            c.min_visibility = detail::parse_real(parts[1], "visibility threshold");
        if (!(c.min_visibility >= 0.0 && c.min_visibility < 1.0))
            throw InvalidArgument("visibility threshold must lie in [0, 1)");
        return c;
    }
    if (parts[0] == "noisy" && parts.size() >= 2 && parts.size() <= 4) {
        c.kind = VisibleChoice::Kind::Noisy;
        c.drop_rate = detail::parse_real(parts[1], "drop rate");
        if (parts.size() >= 3)
            c.dilate_radius = detail::parse_int(parts[2], "dilation radius");
        if (parts.size() == 4)
            c.from_frame = detail::parse_int(parts[3], "start frame");
        if (!(c.drop_rate >= 0.0 && c.drop_rate <= 1.0) || c.dilate_radius < 0)
            throw InvalidArgument("noisy visible: drop in [0, 1], dilation >= 0");
        return c;
    }
    if (parts[0] == "bridge" && parts.size() == 1) {
        c.kind = VisibleChoice::Kind::Bridge;
        return c;
    }
    throw InvalidArgument("bad --vis \"" + std::string(s) + "\" (oracle[:v]|noisy:<drop>[:<dilate>[:<from>]]|bridge)");
}

/// oracle | confusable | bridge
inline AmodalChoice parse_amodal_choice(std::string_view s)
{
    if (s == "oracle")
        return {AmodalChoice::Kind::Oracle};
    if (s == "confusable")
        return {AmodalChoice::Kind::Confusable};
    if (s == "bridge")
        return {AmodalChoice::Kind::Bridge};
    throw InvalidArgument("bad --amodal \"" + std::string(s) + "\" (oracle|confusable|bridge)");
}

/// oracle | noisy:<sigma> | bridge
inline TrackerChoice parse_tracker_choice(std::string_view s)
{
    const auto parts = detail::split(s, ':');
    if (parts[0] == "oracle" && parts.size() == 1)
        return {TrackerChoice::Kind::Oracle, 0.0};
    if (parts[0] == "noisy" && parts.size() == 2) {
        const double sigma = detail::parse_real(parts[1], "tracker sigma");
        if (sigma < 0.0)
            throw InvalidArgument("tracker sigma must be >= 0");
        return {TrackerChoice::Kind::Noisy, sigma};
    }
    if (parts[0] == "bridge" && parts.size() == 1)
        return {TrackerChoice::Kind::Bridge, 0.0};
    throw InvalidArgument("bad --tracker \"" + std::string(s) + "\" (oracle|noisy:<sigma>|bridge)");
}

/// In-process backends for a scene. Roles chosen as `bridge` are left empty
/// for the caller to attach (see bridge.hpp).
inline BackendSet make_reference_backends(const SyntheticVideo& video, const VisibleChoice& vis,
                                          const AmodalChoice& amodal, const TrackerChoice& tracker,
                                          std::uint64_t seed)
{
    BackendSet set;
    switch (vis.kind) {
    case VisibleChoice::Kind::Oracle:
        set.visible = std::make_shared<OracleVisible>(video, vis.min_visibility);
        break;
    case VisibleChoice::Kind::Noisy:
        set.visible = std::make_shared<NoisyVisible>(video, vis.drop_rate, vis.dilate_radius, vis.from_frame,
                                                     mix64(seed ^ 0x7669736962ULL), vis.min_visibility);
        break;
    case VisibleChoice::Kind::Bridge: break;
    }
    switch (amodal.kind) {
    case AmodalChoice::Kind::Oracle: set.amodal = std::make_shared<OracleAmodal>(video); break;
    case AmodalChoice::Kind::Confusable: set.amodal = std::make_shared<ConfusableOracleAmodal>(video); break;
    case AmodalChoice::Kind::Bridge: break;
    }
    switch (tracker.kind) {
    case TrackerChoice::Kind::Oracle: set.tracker = std::make_shared<OracleTracker>(video); break;
    case TrackerChoice::Kind::Noisy:
        set.tracker = std::make_shared<NoisyTracker>(video, tracker.sigma, mix64(seed ^ 0x747261636bULL));
        break;
    case TrackerChoice::Kind::Bridge: break;
    }
    return set;
}

}  // namespace samodal
