#pragma once

// On-disk formats. All masks use the RLE text form "H W c0 c1 ...".
//
// Scene spec (JSON):
//   {"video_id": "v", "height": 64, "width": 64, "frames": 10, "seed": 0,
//    "objects": [{"id": 1, "shape": "rect", "size": [8, 12],
//                 "start": [5.0, 7.0], "velocity": [0.0, 2.0],
//                 "velocities": [[0, 2], ...],        (optional, per step)
//                 "depth": 1, "class": 2},
//                {"id": 2, "shape": "ellipse", "semi_axes": [4, 6], ...}]}
//
// Scene document (JSON, one video): the spec plus per-frame ground truth
//   {"format": "samodal-scene", "version": 1, "spec": {...},
//    "video_id": "v", "height": 64, "width": 64,
//    "frames": [{"t": 1, "instances": [{"id": 1, "class": 2, "anchor": [5, 7],
//                                       "amodal": "<rle>", "visible": "<rle>"}]}]}
//
// Prediction stream (JSON lines, one record per video/frame/instance):
//   {"video": "v", "t": 1, "id": 3, "source": "visible", "score": 1.0,
//    "class": 2, "mask": "<rle>"}

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "samodal/error.hpp"
#include "samodal/metrics.hpp"
#include "samodal/pipeline.hpp"
#include "samodal/rle.hpp"
#include "samodal/scenegen.hpp"

namespace samodal::io {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Scene spec
// ---------------------------------------------------------------------------

namespace detail {

inline std::pair<double, double> real_pair(const json& j, const char* what)
{
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw InvalidArgument(std::string(what) + " must be a [h, w] pair");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline std::pair<int, int> int_pair(const json& j, const char* what)
{
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
        throw InvalidArgument(std::string(what) + " must be an integer [h, w] pair");
    return {j[0].get<int>(), j[1].get<int>()};
}

template <typename T>
T required(const json& j, const char* key)
{
    if (!j.contains(key))
        throw InvalidArgument(std::string("missing \"") + key + "\"");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw InvalidArgument(std::string("bad value for \"") + key + "\"");
    }
}

}  // namespace detail

inline json to_json(const ObjectSpec& o)
{
    json j;
    j["id"] = o.id.value;
    if (o.shape.kind == Shape::Kind::Rect) {
        j["shape"] = "rect";
        j["size"] = {o.shape.a, o.shape.b};
    } else {
        j["shape"] = "ellipse";
        j["semi_axes"] = {o.shape.a, o.shape.b};
    }
    j["start"] = {o.start_h, o.start_w};
    j["velocity"] = {o.velocity.dh, o.velocity.dw};
    if (!o.velocities.empty()) {
        j["velocities"] = json::array();
        for (const auto& v : o.velocities)
            j["velocities"].push_back({v.dh, v.dw});
    }
    j["depth"] = o.depth;
    j["class"] = o.class_label;
    return j;
}

inline ObjectSpec object_from_json(const json& j)
{
    using detail::required;
    ObjectSpec o;
    o.id = InstanceId{required<std::uint32_t>(j, "id")};
    const auto shape = required<std::string>(j, "shape");
    if (shape == "rect") {
        const auto [a, b] = detail::int_pair(j.at("size"), "size");
        o.shape = Shape::rect(a, b);
    } else if (shape == "ellipse") {
        const auto [a, b] = detail::int_pair(j.at("semi_axes"), "semi_axes");
        o.shape = Shape::ellipse(a, b);
    } else {
        throw InvalidArgument("unknown shape \"" + shape + "\"");
    }
    std::tie(o.start_h, o.start_w) = detail::real_pair(j.at("start"), "start");
    if (j.contains("velocity"))
        std::tie(o.velocity.dh, o.velocity.dw) = detail::real_pair(j.at("velocity"), "velocity");
    if (j.contains("velocities"))
        for (const auto& v : j.at("velocities")) {
            const auto [dh, dw] = detail::real_pair(v, "velocities entry");
            o.velocities.push_back({dh, dw});
        }
    o.depth = required<int>(j, "depth");
    o.class_label = j.value("class", 0);
    return o;
}

inline json to_json(const SceneSpec& s)
{
    json j;
    j["video_id"] = s.video_id;
    j["height"] = s.dims.height;
    j["width"] = s.dims.width;
    j["frames"] = s.frames;
    j["seed"] = s.seed;
    j["objects"] = json::array();
    for (const auto& o : s.objects)
        j["objects"].push_back(to_json(o));
    return j;
}

inline SceneSpec scene_spec_from_json(const json& j)
{
    using detail::required;
    SceneSpec s;
    s.video_id = j.value("video_id", std::string("video"));
    s.dims = {required<int>(j, "height"), required<int>(j, "width")};
    s.frames = required<int>(j, "frames");
    s.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("objects"))
        for (const auto& o : j.at("objects"))
            s.objects.push_back(object_from_json(o));
    validate(s);
    return s;
}

// ---------------------------------------------------------------------------
// Scene document (spec + ground truth)
// ---------------------------------------------------------------------------

struct SceneDocument
{
    std::optional<SceneSpec> spec;
    SyntheticVideo video;
};

inline json to_json(const SyntheticVideo& video, const std::optional<SceneSpec>& spec)
{
    json j;
    j["format"] = "samodal-scene";
    j["version"] = 1;
    if (spec)
        j["spec"] = to_json(*spec);
    j["video_id"] = video.video_id;
    j["height"] = video.dims.height;
    j["width"] = video.dims.width;
    j["frames"] = json::array();
    for (const auto& f : video.frames) {
        json frame;
        frame["t"] = f.t;
        frame["instances"] = json::array();
        for (const auto& inst : f.instances)
            frame["instances"].push_back({{"id", inst.id.value},
                                          {"class", inst.class_label},
                                          {"anchor", {inst.anchor.h, inst.anchor.w}},
                                          {"amodal", mask_to_text(inst.amodal)},
                                          {"visible", mask_to_text(inst.visible)}});
        j["frames"].push_back(std::move(frame));
    }
    return j;
}

inline SceneDocument scene_from_json(const json& j, const std::string& source = "scene")
{
    using detail::required;
    try {
        if (j.value("format", std::string()) != "samodal-scene")
            throw InvalidArgument("not a samodal scene document");
        if (j.value("version", 0) != 1)
            throw InvalidArgument("unsupported scene document version");
        SceneDocument doc;
        if (j.contains("spec"))
            doc.spec = scene_spec_from_json(j.at("spec"));
        doc.video.video_id = required<std::string>(j, "video_id");
        doc.video.dims = {required<int>(j, "height"), required<int>(j, "width")};
        require_valid(doc.video.dims);
        FrameIndex expected = 1;
        for (const auto& jf : j.at("frames")) {
            FrameTruth frame;
            frame.t = required<int>(jf, "t");
            if (frame.t != expected)
                throw InvalidArgument("frame " + std::to_string(frame.t) + " out of order");
            ++expected;
            frame.image = {doc.video.dims, std::vector<std::uint32_t>(doc.video.dims.size(), 0)};
            for (const auto& ji : jf.at("instances")) {
                InstanceTruth inst;
                inst.id = InstanceId{required<std::uint32_t>(ji, "id")};
                inst.class_label = ji.value("class", 0);
                const auto [h, w] = detail::int_pair(ji.at("anchor"), "anchor");
                inst.anchor = {h, w};
                inst.amodal = mask_from_text(required<std::string>(ji, "amodal"));
                inst.visible = mask_from_text(required<std::string>(ji, "visible"));
                if (!(inst.amodal.dims() == doc.video.dims) || !(inst.visible.dims() == doc.video.dims))
                    throw DimensionMismatch("instance " + to_string(inst.id) + " masks do not match the video");
                if (!is_subset(inst.visible, inst.amodal))
                    throw InvalidArgument("instance " + to_string(inst.id) + ": visible not inside amodal");
                const auto bits = inst.visible.bits();
                for (std::size_t i = 0; i < bits.size(); ++i)
                    if (bits[i]) {
                        if (frame.image.labels[i] != 0)
                            throw InvalidArgument("visible masks overlap at pixel " + std::to_string(i + 1));
                        frame.image.labels[i] = inst.id.value;
                    }
                if (frame.find(inst.id))
                    throw InvalidArgument("duplicate instance " + to_string(inst.id));
                frame.instances.push_back(std::move(inst));
                std::sort(frame.instances.begin(), frame.instances.end(),
                          [](const auto& a, const auto& b) { return a.id < b.id; });
            }
            doc.video.frames.push_back(std::move(frame));
        }
        if (doc.video.frames.empty())
            throw InvalidArgument("scene has no frames");
        return doc;
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception& e) {
        throw FormatError(source, 0, e.what());
    }
}

inline json parse_json(std::istream& in, const std::string& source)
{
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(source, 0, e.what());
    }
}

// ---------------------------------------------------------------------------
// Prediction stream
// ---------------------------------------------------------------------------

struct PredictionRecord
{
    std::string video;
    FrameIndex t = 1;
    InstanceId id;
    Source source = Source::Visible;
    double score = 1.0;
    std::optional<int> class_label;
    BinaryMask mask;

    friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

inline std::string to_line(const PredictionRecord& r)
{
    json j;
    j["video"] = r.video;
    j["t"] = r.t;
    j["id"] = r.id.value;
    j["source"] = to_string(r.source);
    j["score"] = r.score;
    j["class"] = r.class_label ? json(*r.class_label) : json(nullptr);
    j["mask"] = mask_to_text(r.mask);
    return j.dump();
}

inline void write_predictions(std::ostream& out, const std::string& video, std::span<const FrameOutput> frames)
{
    for (const auto& f : frames)
        for (const auto& p : f.predictions)
            out << to_line({video, f.t, p.id, p.source, p.score, p.class_label, p.mask}) << '\n';
}

inline PredictionRecord record_from_line(const std::string& line, const std::string& source, std::size_t number)
{
    try {
        const auto j = json::parse(line);
        PredictionRecord r;
        r.video = detail::required<std::string>(j, "video");
        r.t = detail::required<int>(j, "t");
        if (r.t < 1)
            throw InvalidArgument("frame index must be >= 1");
        r.id = InstanceId{detail::required<std::uint32_t>(j, "id")};
        const auto src = detail::required<std::string>(j, "source");
        if (src == "visible")
            r.source = Source::Visible;
        else if (src == "tracked")
            r.source = Source::Tracked;
        else
            throw InvalidArgument("unknown source \"" + src + "\"");
        r.score = detail::required<double>(j, "score");
        if (j.contains("class") && !j.at("class").is_null())
            r.class_label = detail::required<int>(j, "class");
        r.mask = mask_from_text(detail::required<std::string>(j, "mask"));
        return r;
    } catch (const std::exception& e) {
        throw FormatError(source, number, e.what());
    }
}

/// Frame outputs per video id, dense from frame 1 to the last frame seen.
using PredictionStream = std::map<std::string, std::vector<FrameOutput>>;

inline PredictionStream read_predictions(std::istream& in, const std::string& source = "predictions")
{
    PredictionStream stream;
    std::set<std::tuple<std::string, FrameIndex, std::uint32_t>> seen;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        auto r = record_from_line(line, source, number);
        if (!seen.emplace(r.video, r.t, r.id.value).second)
            throw FormatError(source, number,
                              "duplicate record for video " + r.video + ", frame " + std::to_string(r.t) +
                                  ", instance " + to_string(r.id));
        auto& frames = stream[r.video];
        while (static_cast<FrameIndex>(frames.size()) < r.t)
            frames.push_back({static_cast<FrameIndex>(frames.size()) + 1, {}});
        frames[static_cast<std::size_t>(r.t - 1)].predictions.push_back(
            {r.id, std::move(r.mask), r.source, r.score, r.class_label});
    }
    return stream;
}

/// Pad with empty frames up to `length`.
inline std::vector<FrameOutput> densify(std::vector<FrameOutput> frames, int length)
{
    while (static_cast<int>(frames.size()) < length)
        frames.push_back({static_cast<FrameIndex>(frames.size()) + 1, {}});
    return frames;
}

/// Run metadata: tracking decisions and empty-amodal fallbacks.
inline json metadata_to_json(const std::string& video, const RunMetadata& meta)
{
    json events = json::array();
    for (const auto& e : meta.track_events)
        events.push_back({{"t", e.t},
                          {"id", e.id.value},
                          {"query_t", e.query_frame},
                          {"displacement", {e.displacement.dh, e.displacement.dw}},
                          {"occluded", e.occluded},
                          {"clipped", e.clipped},
                          {"shift_skipped", e.shift_skipped}});
    json fallbacks = json::array();
    for (const auto& [t, id] : meta.empty_amodal_fallbacks)
        fallbacks.push_back({t, id.value});
    return {{"video", video}, {"track_events", std::move(events)}, {"empty_amodal_fallbacks", std::move(fallbacks)}};
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json report_to_json(const EvalReport& report)
{
    auto j = nlohmann::ordered_json::object();
    for (const auto& [key, value] : report.entries())
        j[key] = value ? nlohmann::ordered_json(*value) : nlohmann::ordered_json(nullptr);
    return j;
}

inline std::string report_to_tsv(const EvalReport& report)
{
    std::string out = "metric\tvalue\n";
    for (const auto& [key, value] : report.entries()) {
        out += key + "\t";
        out += value ? json(*value).dump() : "n/a";
        out += "\n";
    }
    return out;
}

}  // namespace samodal::io
