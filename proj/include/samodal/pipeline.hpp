#pragma once

// Online amodal video instance segmentation.
//
// Per frame t:
//   1. the visible segmenter reports visible masks with instance ids;
//   2. each visible mask yields K point prompts, the amodal segmenter turns
//      them into an amodal mask, and points + mask go to the point memory;
//   3. every remembered instance the segmenter did not report is handed to
//      the point tracker; its stored amodal mask is shifted by the mean
//      displacement of the tracked points and emitted as a tracked prediction.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "samodal/backends.hpp"
#include "samodal/error.hpp"
#include "samodal/mask.hpp"
#include "samodal/memory.hpp"
#include "samodal/rng.hpp"
#include "samodal/sampling.hpp"
#include "samodal/scenegen.hpp"
#include "samodal/types.hpp"

namespace samodal {

enum class Source { Visible, Tracked };

inline const char* to_string(Source s) { return s == Source::Visible ? "visible" : "tracked"; }

struct InstancePrediction
{
    InstanceId id;
    BinaryMask mask;
    Source source = Source::Visible;
    double score = 1.0;
    std::optional<int> class_label;

    friend bool operator==(const InstancePrediction&, const InstancePrediction&) = default;
};

struct FrameOutput
{
    FrameIndex t = 1;
    std::vector<InstancePrediction> predictions;

    friend bool operator==(const FrameOutput&, const FrameOutput&) = default;
};

/// Where the tracking fallback starts from on consecutive missing frames.
enum class TrackFrom {
    /// Chain from the previous frame's tracked state.
    Tracked,
    /// Always track from the last frame the instance was visible.
    LastVisible,
};

struct PipelineConfig
{
    int k = 1;
    SamplingStrategy strategy = SamplingStrategy::random();
    std::uint64_t seed = 0;
    std::optional<int> max_occlusion;
    TrackFrom track_from = TrackFrom::Tracked;
    /// Keep the stored mask unshifted when the tracker says every point is visible.
    bool require_occluded_flag = false;

    void validate() const
    {
        if (k < 1)
            throw InvalidArgument("K must be >= 1");
        if (max_occlusion && *max_occlusion < 1)
            throw InvalidArgument("max_occlusion must be positive");
    }
};

/// One tracking-fallback decision, recorded for inspection.
struct TrackEvent
{
    FrameIndex t = 1;
    InstanceId id;
    FrameIndex query_frame = 0;
    Displacement displacement;
    std::vector<std::uint8_t> occluded;
    /// Some predicted point left the grid and was clamped.
    bool clipped = false;
    bool shift_skipped = false;
};

struct RunMetadata
{
    std::vector<TrackEvent> track_events;
    /// (frame, id) pairs whose amodal prompt came back empty and fell back to the visible mask.
    std::vector<std::pair<FrameIndex, InstanceId>> empty_amodal_fallbacks;
};

struct RunResult
{
    std::vector<FrameOutput> frames;
    RunMetadata metadata;
};

class Pipeline
{
public:
    Pipeline(BackendSet backends, PipelineConfig cfg, GridDims dims, int frames)
        : backends_(std::move(backends)), cfg_(cfg), dims_(dims), memory_(cfg.max_occlusion)
    {
        backends_.require_complete();
        cfg_.validate();
        require_valid(dims);
        if (frames < 1)
            throw InvalidArgument("video must have at least one frame");
        backends_.visible->begin_video(dims, frames);
        backends_.amodal->begin_video(dims, frames);
        backends_.tracker->begin_video(dims, frames);
    }

    /// Frames must arrive in order 1, 2, ...
    FrameOutput process_frame(FrameIndex t, const LabelGrid& frame)
    {
        if (t != static_cast<FrameIndex>(history_.size()) + 1)
            throw InvalidArgument("frame " + std::to_string(t) + " out of order, expected " +
                                  std::to_string(history_.size() + 1));
        if (!(frame.dims == dims_))
            throw DimensionMismatch("frame " + std::to_string(t) + ": " + to_string(frame.dims) + " vs video " +
                                    to_string(dims_));
        history_.push_back(frame);

        FrameOutput out{t, {}};
        const auto visible_ids = visible_branch(t, frame, out);
        tracking_branch(t, visible_ids, out);
        return out;
    }

    const PointMemory& memory() const noexcept { return memory_; }
    const RunMetadata& metadata() const noexcept { return meta_; }
    RunMetadata take_metadata() { return std::move(meta_); }

private:
    template <typename Fn>
    auto call_backend(FrameIndex t, const char* role, Fn&& fn)
    {
        try {
            return fn();
        } catch (const BackendError&) {
            throw;
        } catch (const DimensionMismatch& e) {
            throw DimensionMismatch("frame " + std::to_string(t) + ": " + role + ": " + e.what());
        } catch (const std::exception& e) {
            throw BackendError(static_cast<std::size_t>(t), std::string(role) + ": " + e.what());
        }
    }

    void require_dims(FrameIndex t, const BinaryMask& m, const char* what, InstanceId id) const
    {
        if (!(m.dims() == dims_))
            throw DimensionMismatch("frame " + std::to_string(t) + ", instance " + to_string(id) + ": " + what +
                                    " is " + to_string(m.dims()) + ", video is " + to_string(dims_));
    }

    std::set<InstanceId> visible_branch(FrameIndex t, const LabelGrid& frame, FrameOutput& out)
    {
        auto detections = call_backend(t, "visible segmenter", [&] { return backends_.visible->predict(t, frame); });
        std::set<InstanceId> ids;
        for (auto& det : detections) {
            if (!ids.insert(det.id).second)
                throw BackendError(static_cast<std::size_t>(t),
                                   "visible segmenter reported instance " + to_string(det.id) + " twice");
            require_dims(t, det.mask, "visible mask", det.id);
            if (det.mask.empty())
                throw BackendError(static_cast<std::size_t>(t),
                                   "visible segmenter returned an empty mask for instance " + to_string(det.id));

            auto prompt = sample_points(det.mask, cfg_.k, cfg_.strategy,
                                        derive_seed(cfg_.seed, static_cast<std::uint64_t>(t), det.id.value));
            auto amodal = call_backend(t, "amodal segmenter", [&] {
                return backends_.amodal->predict(t, frame, prompt, det.id);
            });
            require_dims(t, amodal, "amodal mask", det.id);
            if (amodal.empty()) {
                amodal = det.mask;
                meta_.empty_amodal_fallbacks.emplace_back(t, det.id);
            }
            out.predictions.push_back({det.id, amodal, Source::Visible, det.score, det.class_label});
            memory_.store_visible(t, det.id, std::move(prompt), std::move(amodal), det.score, det.class_label);
        }
        return ids;
    }

    void tracking_branch(FrameIndex t, const std::set<InstanceId>& visible_ids, FrameOutput& out)
    {
        for (auto& missing : memory_.retrieve_missing(t, visible_ids)) {
            const auto& query = missing.points.points;
            auto result = call_backend(t, "point tracker", [&] {
                return backends_.tracker->track(t, history_, missing.anchor_frame, query, missing.instance);
            });
            if (result.points.size() != query.size() || result.occluded.size() != query.size())
                throw BackendError(static_cast<std::size_t>(t), "point tracker returned " +
                                                                    std::to_string(result.points.size()) +
                                                                    " points for " + std::to_string(query.size()));

            TrackEvent event{t, missing.instance, missing.anchor_frame, {}, result.occluded, false, false};
            event.clipped = std::any_of(result.clipped.begin(), result.clipped.end(), [](auto c) { return c != 0; });
            double sum_h = 0.0;
            double sum_w = 0.0;
            for (std::size_t k = 0; k < query.size(); ++k) {
                if (!in_grid(dims_, result.points[k]))
                    throw BackendError(static_cast<std::size_t>(t), "point tracker returned an off-grid point");
                const Coord from = to_coord(dims_, query[k]);
                const Coord to = to_coord(dims_, result.points[k]);
                sum_h += to.h - from.h;
                sum_w += to.w - from.w;
            }
            const double n = static_cast<double>(query.size());
            event.displacement = {sum_h / n, sum_w / n};
            if (cfg_.require_occluded_flag &&
                std::all_of(result.occluded.begin(), result.occluded.end(), [](auto o) { return o == 0; })) {
                event.displacement = {};
                event.shift_skipped = true;
            }

            auto shifted = shift(missing.amodal, event.displacement);
            out.predictions.push_back({missing.instance, shifted, Source::Tracked, missing.score, missing.class_label});
            if (cfg_.track_from == TrackFrom::Tracked)
                memory_.store_tracked(t, missing.instance, PointTuple::positive(std::move(result.points)),
                                      std::move(shifted));
            else
                memory_.note_tracked(t, missing.instance);
            meta_.track_events.push_back(std::move(event));
        }
    }

    BackendSet backends_;
    PipelineConfig cfg_;
    GridDims dims_;
    PointMemory memory_;
    std::vector<LabelGrid> history_;
    RunMetadata meta_;
};

inline RunResult run_sequence(std::span<const LabelGrid> frames, const BackendSet& backends, const PipelineConfig& cfg)
{
    if (frames.empty())
        throw InvalidArgument("run_sequence: empty video");
    Pipeline pipeline(backends, cfg, frames.front().dims, static_cast<int>(frames.size()));
    RunResult result;
    for (std::size_t i = 0; i < frames.size(); ++i)
        result.frames.push_back(pipeline.process_frame(static_cast<FrameIndex>(i + 1), frames[i]));
    result.metadata = pipeline.take_metadata();
    return result;
}

inline std::vector<LabelGrid> images_of(const SyntheticVideo& video)
{
    std::vector<LabelGrid> images;
    images.reserve(video.frames.size());
    for (const auto& f : video.frames)
        images.push_back(f.image);
    return images;
}

inline RunResult run_sequence(const SyntheticVideo& video, const BackendSet& backends, const PipelineConfig& cfg)
{
    const auto images = images_of(video);
    return run_sequence(std::span<const LabelGrid>(images), backends, cfg);
}

}  // namespace samodal
