#pragma once

// Glue between pipeline output, scene ground truth and the metric core.

#include <map>
#include <span>
#include <vector>

#include "samodal/metrics.hpp"
#include "samodal/pipeline.hpp"
#include "samodal/scenegen.hpp"

namespace samodal {

/// Pipeline output for one video next to its ground truth.
struct VideoResult
{
    const SyntheticVideo* truth = nullptr;
    std::vector<FrameOutput> frames;
};

namespace detail {

inline void require_alignment(const SyntheticVideo& truth, std::span<const FrameOutput> frames)
{
    if (frames.size() > truth.frames.size())
        throw InvalidArgument("eval: video " + truth.video_id + " has predictions for " +
                              std::to_string(frames.size()) + " frames, ground truth has " +
                              std::to_string(truth.frames.size()));
    for (const auto& f : frames) {
        if (f.t < 1 || f.t > truth.length())
            throw InvalidArgument("eval: video " + truth.video_id + ": frame " + std::to_string(f.t) + " out of range");
        for (const auto& p : f.predictions)
            if (!(p.mask.dims() == truth.dims))
                throw DimensionMismatch("eval: video " + truth.video_id + ", frame " + std::to_string(f.t) +
                                        ", instance " + to_string(p.id) + ": mask is " + to_string(p.mask.dims()));
    }
}

}  // namespace detail

/// One sample per ground-truth frame. GT instances that are off-canvas in a
/// frame do not count there.
inline std::vector<FrameSample> frame_samples(const SyntheticVideo& truth, std::span<const FrameOutput> frames)
{
    detail::require_alignment(truth, frames);
    std::vector<FrameSample> out(truth.frames.size());
    for (std::size_t i = 0; i < truth.frames.size(); ++i)
        for (const auto& inst : truth.frames[i].instances) {
            if (inst.amodal.empty())
                continue;
            out[i].ground_truth.push_back(
                {inst.amodal, occlusion_rate(inst.visible, inst.amodal), inst.class_label});
        }
    for (const auto& f : frames)
        for (const auto& p : f.predictions)
            out[static_cast<std::size_t>(f.t - 1)].predictions.push_back({p.mask, p.score, p.class_label});
    return out;
}

/// Ground-truth tracks: every object on-canvas in at least one frame.
inline std::vector<InstanceTrack> ground_truth_tracks(const SyntheticVideo& truth)
{
    std::map<InstanceId, InstanceTrack> tracks;
    const auto length = truth.frames.size();
    for (std::size_t i = 0; i < length; ++i)
        for (const auto& inst : truth.frames[i].instances) {
            if (inst.amodal.empty())
                continue;
            auto& track = tracks[inst.id];
            if (track.masks.empty()) {
                track.id = inst.id;
                track.class_label = inst.class_label;
                track.masks.resize(length);
                track.occlusion.resize(length);
            }
            track.masks[i] = inst.amodal;
            track.occlusion[i] = occlusion_rate(inst.visible, inst.amodal);
        }
    std::vector<InstanceTrack> out;
    for (auto& [id, t] : tracks)
        out.push_back(std::move(t));
    return out;
}

/// Predicted tracks grouped by instance id. A track's score and class come
/// from its last visible prediction (its last prediction if never visible).
inline std::vector<InstanceTrack> predicted_tracks(std::span<const FrameOutput> frames, std::size_t length)
{
    std::map<InstanceId, InstanceTrack> tracks;
    std::map<InstanceId, bool> seen_visible;
    for (const auto& f : frames)
        for (const auto& p : f.predictions) {
            auto& track = tracks[p.id];
            if (track.masks.empty()) {
                track.id = p.id;
                track.masks.resize(length);
            }
            track.masks[static_cast<std::size_t>(f.t - 1)] = p.mask;
            if (p.source == Source::Visible || !seen_visible[p.id]) {
                track.score = p.score;
                track.class_label = p.class_label;
            }
            if (p.source == Source::Visible)
                seen_visible[p.id] = true;
        }
    std::vector<InstanceTrack> out;
    for (auto& [id, t] : tracks)
        out.push_back(std::move(t));
    return out;
}

inline EvalReport evaluate(std::span<const VideoResult> videos, const EvalConfig& cfg)
{
    cfg.validate();
    std::vector<FrameSample> images;
    std::vector<VideoSample> tracks;
    for (const auto& v : videos) {
        if (!v.truth)
            throw InvalidArgument("eval: video without ground truth");
        auto frames = frame_samples(*v.truth, v.frames);
        images.insert(images.end(), std::make_move_iterator(frames.begin()), std::make_move_iterator(frames.end()));
        tracks.push_back({predicted_tracks(v.frames, v.truth->frames.size()), ground_truth_tracks(*v.truth)});
    }
    return {evaluate_image_level(images, cfg), evaluate_video_level(tracks, cfg)};
}

}  // namespace samodal
