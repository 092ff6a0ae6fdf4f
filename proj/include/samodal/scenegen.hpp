#pragma once

// Synthetic occlusion scenes: rectangles and ellipses translating over a
// canvas, layered by depth with the painter's algorithm. Produces exact
// visible/amodal ground truth per frame and the label-grid "images" the
// oracle backends read.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "samodal/error.hpp"
#include "samodal/mask.hpp"
#include "samodal/rng.hpp"
#include "samodal/types.hpp"

namespace samodal {

struct Shape
{
    enum class Kind { Rect, Ellipse };

    Kind kind = Kind::Rect;
    /// Rect: rows. Ellipse: vertical semi-axis.
    int a = 1;
    /// Rect: columns. Ellipse: horizontal semi-axis.
    int b = 1;

    static Shape rect(int rows, int cols) { return {Kind::Rect, rows, cols}; }
    static Shape ellipse(int semi_h, int semi_w) { return {Kind::Ellipse, semi_h, semi_w}; }

    int box_rows() const noexcept { return kind == Kind::Rect ? a : 2 * a + 1; }
    int box_cols() const noexcept { return kind == Kind::Rect ? b : 2 * b + 1; }

    /// Whether local box cell (i, j), 0-based, belongs to the shape.
    bool contains(int i, int j) const noexcept
    {
        if (kind == Kind::Rect)
            return i >= 0 && i < a && j >= 0 && j < b;
        const long long di = i - a;
        const long long dj = j - b;
        const long long aa = static_cast<long long>(a) * a;
        const long long bb = static_cast<long long>(b) * b;
        return di * di * bb + dj * dj * aa <= aa * bb;
    }

    friend bool operator==(const Shape&, const Shape&) = default;
};

struct ObjectSpec
{
    InstanceId id;
    Shape shape;
    /// Real-valued top-left of the shape's bounding box at frame 1 (1-based).
    double start_h = 1.0;
    double start_w = 1.0;
    /// Constant velocity in pixels/frame, used when `velocities` is empty.
    Displacement velocity;
    /// Per-step velocities: entry t-1 moves the object from frame t to t+1.
    /// Steps past the end reuse the last entry.
    std::vector<Displacement> velocities;
    /// Higher is closer to the camera.
    int depth = 0;
    int class_label = 0;

    Displacement step(FrameIndex t) const
    {
        if (velocities.empty())
            return velocity;
        const auto i = std::min<std::size_t>(static_cast<std::size_t>(t - 1), velocities.size() - 1);
        return velocities[i];
    }

    /// Integer top-left at frame t (same rounding rule as mask shifts).
    Coord anchor(FrameIndex t) const
    {
        double h = start_h;
        double w = start_w;
        for (FrameIndex s = 1; s < t; ++s) {
            const auto v = step(s);
            h += v.dh;
            w += v.dw;
        }
        return {round_pixel(h), round_pixel(w)};
    }

    friend bool operator==(const ObjectSpec&, const ObjectSpec&) = default;
};

struct SceneSpec
{
    std::string video_id = "video";
    GridDims dims{64, 64};
    int frames = 1;
    std::vector<ObjectSpec> objects;
    std::uint64_t seed = 0;

    friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

/// Per-pixel topmost object id; 0 is background.
struct LabelGrid
{
    GridDims dims;
    std::vector<std::uint32_t> labels;

    std::uint32_t at(PixelIndex p) const
    {
        if (!in_grid(dims, p))
            throw InvalidArgument("label lookup outside grid");
        return labels[p.value - 1];
    }

    BinaryMask region(InstanceId id) const
    {
        std::vector<std::uint8_t> bits(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i)
            bits[i] = labels[i] == id.value;
        return BinaryMask(dims, std::move(bits));
    }

    friend bool operator==(const LabelGrid&, const LabelGrid&) = default;
};

struct InstanceTruth
{
    InstanceId id;
    int class_label = 0;
    /// Integer top-left of the shape box (may lie off-canvas).
    Coord anchor;
    BinaryMask amodal;
    BinaryMask visible;

    friend bool operator==(const InstanceTruth&, const InstanceTruth&) = default;
};

struct FrameTruth
{
    FrameIndex t = 1;
    LabelGrid image;
    /// Every scene object, sorted by id; amodal is empty when off-canvas.
    std::vector<InstanceTruth> instances;

    const InstanceTruth* find(InstanceId id) const
    {
        auto it = std::lower_bound(instances.begin(), instances.end(), id,
                                   [](const InstanceTruth& x, InstanceId v) { return x.id < v; });
        return it != instances.end() && it->id == id ? &*it : nullptr;
    }

    friend bool operator==(const FrameTruth&, const FrameTruth&) = default;
};

struct SyntheticVideo
{
    std::string video_id;
    GridDims dims;
    std::vector<FrameTruth> frames;

    int length() const noexcept { return static_cast<int>(frames.size()); }

    const FrameTruth& frame(FrameIndex t) const
    {
        if (t < 1 || t > length())
            throw InvalidArgument("frame " + std::to_string(t) + " outside 1.." + std::to_string(length()));
        return frames[static_cast<std::size_t>(t - 1)];
    }

    /// The first `t` frames; the prefix of an online run.
    SyntheticVideo truncated(int t) const
    {
        SyntheticVideo out{video_id, dims, {}};
        out.frames.assign(frames.begin(), frames.begin() + std::clamp(t, 0, length()));
        return out;
    }

    friend bool operator==(const SyntheticVideo&, const SyntheticVideo&) = default;
};

inline void validate(const SceneSpec& spec)
{
    require_valid(spec.dims);
    if (spec.frames < 1)
        throw InvalidArgument("scene: T must be >= 1, got " + std::to_string(spec.frames));
    std::set<std::uint32_t> ids;
    std::set<int> depths;
    for (const auto& o : spec.objects) {
        if (o.id.value == 0)
            throw InvalidArgument("scene: object id 0 is reserved for background");
        if (!ids.insert(o.id.value).second)
            throw InvalidArgument("scene: duplicate object id " + to_string(o.id));
        if (!depths.insert(o.depth).second)
            throw InvalidArgument("scene: duplicate depth " + std::to_string(o.depth) + " (object " +
                                  to_string(o.id) + ")");
        if (o.shape.a < 1 || o.shape.b < 1)
            throw InvalidArgument("scene: object " + to_string(o.id) + " has a degenerate shape");
        if (o.shape.box_rows() > spec.dims.height || o.shape.box_cols() > spec.dims.width)
            throw InvalidArgument("scene: object " + to_string(o.id) + " does not fit the canvas");
        auto finite = [](const Displacement& d) { return std::isfinite(d.dh) && std::isfinite(d.dw); };
        if (!std::isfinite(o.start_h) || !std::isfinite(o.start_w) || !finite(o.velocity) ||
            !std::all_of(o.velocities.begin(), o.velocities.end(), finite))
            throw InvalidArgument("scene: object " + to_string(o.id) + " has non-finite motion");
    }
}

/// Shape rendered with its box top-left at `anchor`, clipped to the canvas.
inline BinaryMask render_shape(const GridDims& dims, const Shape& shape, Coord anchor)
{
    BinaryMask m(dims);
    for (int i = 0; i < shape.box_rows(); ++i)
        for (int j = 0; j < shape.box_cols(); ++j) {
            const Coord c{anchor.h + i, anchor.w + j};
            if (shape.contains(i, j) && in_grid(dims, c))
                m.set(c);
        }
    return m;
}

inline SyntheticVideo generate(const SceneSpec& spec)
{
    validate(spec);
    std::vector<const ObjectSpec*> by_depth;
    for (const auto& o : spec.objects)
        by_depth.push_back(&o);
    std::sort(by_depth.begin(), by_depth.end(), [](auto* x, auto* y) { return x->depth < y->depth; });

    SyntheticVideo video{spec.video_id, spec.dims, {}};
    for (FrameIndex t = 1; t <= spec.frames; ++t) {
        FrameTruth frame{t, {spec.dims, std::vector<std::uint32_t>(spec.dims.size(), 0)}, {}};
        std::map<std::uint32_t, InstanceTruth> truth;
        for (const auto* o : by_depth) {
            const Coord anchor = o->anchor(t);
            auto amodal = render_shape(spec.dims, o->shape, anchor);
            auto bits = amodal.bits();
            for (std::size_t i = 0; i < bits.size(); ++i)
                if (bits[i])
                    frame.image.labels[i] = o->id.value;
            truth[o->id.value] = InstanceTruth{o->id, o->class_label, anchor, std::move(amodal), {}};
        }
        for (auto& [id, inst] : truth) {
            inst.visible = frame.image.region(inst.id);
            frame.instances.push_back(std::move(inst));
        }
        video.frames.push_back(std::move(frame));
    }
    return video;
}

struct FrameOcclusion
{
    FrameIndex t = 1;
    /// Undefined when the object is entirely off-canvas.
    std::optional<double> rate;
    bool fully_occluded = false;
    bool out_of_frame = false;
};

struct OcclusionStreak
{
    FrameIndex start = 1;
    int length = 0;

    friend bool operator==(const OcclusionStreak&, const OcclusionStreak&) = default;
};

struct InstanceOcclusion
{
    InstanceId id;
    std::vector<FrameOcclusion> frames;
    /// Maximal runs of consecutive fully occluded, on-canvas frames.
    std::vector<OcclusionStreak> streaks;
};

inline std::vector<InstanceOcclusion> occlusion_report(const SyntheticVideo& video)
{
    std::map<std::uint32_t, InstanceOcclusion> report;
    for (const auto& frame : video.frames)
        for (const auto& inst : frame.instances) {
            auto& entry = report[inst.id.value];
            entry.id = inst.id;
            FrameOcclusion f{frame.t, std::nullopt, false, false};
            if (inst.amodal.empty()) {
                f.out_of_frame = true;
            } else {
                f.rate = occlusion_rate(inst.visible, inst.amodal);
                f.fully_occluded = inst.visible.empty();
            }
            entry.frames.push_back(f);
        }
    std::vector<InstanceOcclusion> out;
    for (auto& [id, entry] : report) {
        for (std::size_t i = 0; i < entry.frames.size(); ++i) {
            if (!entry.frames[i].fully_occluded)
                continue;
            const bool extends = i > 0 && entry.frames[i - 1].fully_occluded && !entry.streaks.empty();
            if (extends)
                ++entry.streaks.back().length;
            else
                entry.streaks.push_back({entry.frames[i].t, 1});
        }
        out.push_back(std::move(entry));
    }
    return out;
}

/// Knobs for random scene suites.
struct RandomSceneParams
{
    GridDims dims{64, 64};
    int frames = 10;
    int min_objects = 2;
    int max_objects = 5;
    int min_extent = 6;
    int max_extent = 16;
    /// Maximum absolute velocity component (pixels/frame).
    int max_speed = 2;
    bool integer_motion = true;
    /// Keep every object fully on-canvas for the whole video.
    bool keep_inside = true;
    double ellipse_fraction = 0.3;
    int num_classes = 3;
};

/// Deterministic random scene. Ids are 1..N; depths a random permutation.
inline SceneSpec random_scene(const RandomSceneParams& p, std::uint64_t seed, std::string video_id = "video")
{
    if (p.min_objects < 0 || p.max_objects < p.min_objects || p.min_extent < 1 || p.max_extent < p.min_extent ||
        p.frames < 1 || p.num_classes < 1)
        throw InvalidArgument("random_scene: inconsistent parameters");
    require_valid(p.dims);
    SplitMix64 rng(seed);
    auto uniform_int = [&](int lo, int hi) { return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))); };

    SceneSpec spec{std::move(video_id), p.dims, p.frames, {}, seed};
    const int count = uniform_int(p.min_objects, p.max_objects);
    std::vector<int> depths(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        depths[static_cast<std::size_t>(i)] = i + 1;
    for (int i = count - 1; i > 0; --i)
        std::swap(depths[static_cast<std::size_t>(i)], depths[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);

    const int steps = p.frames - 1;
    for (int i = 0; i < count; ++i) {
        ObjectSpec o;
        o.id = InstanceId{static_cast<std::uint32_t>(i + 1)};
        o.depth = depths[static_cast<std::size_t>(i)];
        o.class_label = uniform_int(1, p.num_classes);
        const bool ellipse = rng.uniform() < p.ellipse_fraction;
        const int max_extent = std::min({p.max_extent, p.dims.height, p.dims.width});
        const int min_extent = std::min(p.min_extent, max_extent);
        if (ellipse) {
            const int semi_max = std::max(1, (max_extent - 1) / 2);
            const int semi_min = std::clamp((min_extent - 1) / 2, 1, semi_max);
            o.shape = Shape::ellipse(uniform_int(semi_min, semi_max), uniform_int(semi_min, semi_max));
        } else {
            o.shape = Shape::rect(uniform_int(min_extent, max_extent), uniform_int(min_extent, max_extent));
        }
        const int rows = o.shape.box_rows();
        const int cols = o.shape.box_cols();

        // Velocity first, then a start that keeps the whole path on-canvas.
        auto pick_axis = [&](int extent, int canvas, double& start, double& vel) {
            const int room = canvas - extent;  // top-left range is 1..room+1
            int speed_cap = p.max_speed;
            if (p.keep_inside && steps > 0)
                speed_cap = std::min(speed_cap, room / steps);
            if (p.integer_motion) {
                vel = speed_cap > 0 ? uniform_int(-speed_cap, speed_cap) : 0;
            } else {
                vel = speed_cap > 0 ? (rng.uniform() * 2.0 - 1.0) * speed_cap : 0.0;
            }
            if (p.keep_inside) {
                const double travel = vel * steps;
                const double lo = 1.0 + std::max(0.0, -travel);
                const double hi = 1.0 + room - std::max(0.0, travel);
                const int lo_i = static_cast<int>(std::ceil(lo));
                const int hi_i = static_cast<int>(std::floor(hi));
                start = hi_i >= lo_i ? uniform_int(lo_i, hi_i) : 1.0;
            } else {
                start = uniform_int(1, room + 1);
            }
        };
        pick_axis(rows, p.dims.height, o.start_h, o.velocity.dh);
        pick_axis(cols, p.dims.width, o.start_w, o.velocity.dw);
        spec.objects.push_back(o);
    }
    return spec;
}

}  // namespace samodal
