#pragma once

// Image- and video-level mask AP in the MS-COCO style.
//
// Matching, per sample (an image, or a whole video for track metrics):
// predictions are visited in descending score order (stable on ties) and
// each claims the still-unmatched ground truth with the highest overlap,
// provided it reaches the threshold; overlap ties go to the lowest GT index.
// Detections from all samples are then pooled into one precision/recall
// curve, ordered by score (ties by sample, then by in-sample order).
//
// Bucketed variants (occlusion, size) keep the matching above and count
// only GT inside the bucket; a prediction matched to an out-of-bucket GT is
// ignored, an unmatched prediction stays a false positive.
//
// AP is the 101-point interpolated area under the monotone precision
// envelope, recall levels r_k = k / 100.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "samodal/error.hpp"
#include "samodal/mask.hpp"
#include "samodal/types.hpp"

namespace samodal {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class Interpolation { Coco101, AllPoints };

struct EvalConfig
{
    /// 0.50:0.05:0.95, each computed as n / 100.
    std::vector<double> iou_thresholds = default_thresholds();
    /// small: area < small_max_area; medium: in between; large: area >= large_min_area.
    double small_max_area = 32.0 * 32.0;
    double large_min_area = 96.0 * 96.0;
    /// Occlusion-rate ranges, both lower-exclusive / upper-inclusive.
    std::pair<double, double> partial_range{0.0, 0.5};
    std::pair<double, double> heavy_range{0.5, 1.0};
    bool class_agnostic = true;
    /// Image level: mean of per-frame APs instead of pooling detections.
    bool per_frame_mean = false;
    Interpolation interpolation = Interpolation::Coco101;

    static std::vector<double> default_thresholds()
    {
        std::vector<double> t;
        for (int n = 50; n <= 95; n += 5)
            t.push_back(n / 100.0);
        return t;
    }

    void validate() const
    {
        if (iou_thresholds.empty())
            throw InvalidArgument("eval: at least one IoU threshold required");
        for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
            const double t = iou_thresholds[i];
            if (!(t > 0.0 && t <= 1.0))
                throw InvalidArgument("eval: IoU thresholds must lie in (0, 1]");
            if (i > 0 && !(t > iou_thresholds[i - 1]))
                throw InvalidArgument("eval: IoU thresholds must be strictly increasing");
        }
        if (!(small_max_area > 0.0 && large_min_area >= small_max_area))
            throw InvalidArgument("eval: size buckets must satisfy 0 < small_max <= large_min");
        auto ok = [](std::pair<double, double> r) { return r.first >= 0.0 && r.second <= 1.0 && r.first < r.second; };
        if (!ok(partial_range) || !ok(heavy_range))
            throw InvalidArgument("eval: occlusion ranges must be non-empty sub-ranges of [0, 1]");
        if (partial_range.second > heavy_range.first && heavy_range.second > partial_range.first)
            throw InvalidArgument("eval: occlusion buckets overlap");
    }
};

// Bucket membership flags for ground truth.
enum Bucket : std::uint32_t {
    kBucketAll = 1u << 0,
    kBucketPartial = 1u << 1,
    kBucketHeavy = 1u << 2,
    kBucketSmall = 1u << 3,
    kBucketMedium = 1u << 4,
    kBucketLarge = 1u << 5,
};

inline bool in_range(double v, std::pair<double, double> r) { return v > r.first && v <= r.second; }

/// Bucket flags for a GT instance with the given occlusion rate and area.
inline std::uint32_t bucket_flags(double occlusion, double area, const EvalConfig& cfg)
{
    std::uint32_t flags = kBucketAll;
    if (in_range(occlusion, cfg.heavy_range))
        flags |= kBucketHeavy;
    else if (in_range(occlusion, cfg.partial_range))
        flags |= kBucketPartial;
    if (area < cfg.small_max_area)
        flags |= kBucketSmall;
    else if (area < cfg.large_min_area)
        flags |= kBucketMedium;
    else
        flags |= kBucketLarge;
    return flags;
}

// ---------------------------------------------------------------------------
// Generic matcher + PR integration
// ---------------------------------------------------------------------------

/// One image (or video): prediction scores, the prediction x GT overlap
/// matrix and GT bucket flags.
struct MatchSample
{
    std::vector<double> scores;
    std::vector<std::vector<double>> overlap;  // [pred][gt]
    std::vector<std::uint32_t> gt_buckets;
};

struct PrCurve
{
    double threshold = 0.0;
    std::vector<double> recall;
    std::vector<double> precision;
};

struct ApResult
{
    std::optional<double> ap;
    PrCurve curve;
    /// Overlaps of matched (TP) pairs.
    std::vector<double> matched_overlaps;
};

/// Prediction indices in matching order: score descending, stable.
inline std::vector<std::size_t> score_order(std::span<const double> scores)
{
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

/// Greedy matching of one sample; result[pred] = matched GT index or -1.
inline std::vector<int> greedy_match(const MatchSample& s, double threshold)
{
    const std::size_t num_gt = s.gt_buckets.size();
    std::vector<int> match(s.scores.size(), -1);
    std::vector<bool> taken(num_gt, false);
    for (auto p : score_order(s.scores)) {
        int best = -1;
        double best_overlap = -1.0;
        for (std::size_t g = 0; g < num_gt; ++g) {
            const double o = s.overlap[p][g];
            if (taken[g] || o < threshold)
                continue;
            if (o > best_overlap) {
                best = static_cast<int>(g);
                best_overlap = o;
            }
        }
        if (best >= 0) {
            taken[static_cast<std::size_t>(best)] = true;
            match[p] = best;
        }
    }
    return match;
}

inline double integrate_pr(const std::vector<double>& recall, const std::vector<double>& precision,
                           Interpolation interp)
{
    std::vector<double> envelope = precision;
    for (std::size_t i = envelope.size(); i-- > 1;)
        envelope[i - 1] = std::max(envelope[i - 1], envelope[i]);
    if (interp == Interpolation::AllPoints) {
        double ap = 0.0;
        double prev = 0.0;
        for (std::size_t i = 0; i < recall.size(); ++i) {
            ap += (recall[i] - prev) * envelope[i];
            prev = recall[i];
        }
        return ap;
    }
    double sum = 0.0;
    for (int k = 0; k <= 100; ++k) {
        const double level = k / 100.0;
        const auto it = std::lower_bound(recall.begin(), recall.end(), level);
        if (it != recall.end())
            sum += envelope[static_cast<std::size_t>(it - recall.begin())];
    }
    return sum / 101.0;
}

/// AP at one threshold over pooled samples, restricted to a GT bucket.
inline ApResult average_precision(std::span<const MatchSample> samples, double threshold, std::uint32_t bucket,
                                  Interpolation interp = Interpolation::Coco101)
{
    struct Det
    {
        double score;
        bool tp;
        double overlap;
    };
    std::vector<Det> dets;
    std::size_t num_gt = 0;
    for (const auto& s : samples) {
        if (s.overlap.size() != s.scores.size())
            throw InvalidArgument("eval: overlap rows != predictions");
        for (const auto& row : s.overlap)
            if (row.size() != s.gt_buckets.size())
                throw InvalidArgument("eval: overlap columns != ground truth");
        for (auto b : s.gt_buckets)
            num_gt += (b & bucket) != 0;
        const auto match = greedy_match(s, threshold);
        for (auto p : score_order(s.scores)) {
            const int g = match[p];
            if (g >= 0 && !(s.gt_buckets[static_cast<std::size_t>(g)] & bucket))
                continue;  // matched an out-of-bucket GT: ignored
            dets.push_back({s.scores[p], g >= 0, g >= 0 ? s.overlap[p][static_cast<std::size_t>(g)] : 0.0});
        }
    }

    ApResult result;
    result.curve.threshold = threshold;
    if (num_gt == 0)
        return result;
    std::stable_sort(dets.begin(), dets.end(), [](const Det& a, const Det& b) { return a.score > b.score; });
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (const auto& d : dets) {
        if (d.tp) {
            ++tp;
            result.matched_overlaps.push_back(d.overlap);
        } else {
            ++fp;
        }
        result.curve.recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
        result.curve.precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    }
    result.ap = integrate_pr(result.curve.recall, result.curve.precision, interp);
    return result;
}

/// Mean of per-threshold APs; undefined when the bucket has no GT.
inline std::optional<double> mean_ap(std::span<const MatchSample> samples, std::span<const double> thresholds,
                                     std::uint32_t bucket, Interpolation interp = Interpolation::Coco101)
{
    double sum = 0.0;
    for (double t : thresholds) {
        const auto r = average_precision(samples, t, bucket, interp);
        if (!r.ap)
            return std::nullopt;
        sum += *r.ap;
    }
    return sum / static_cast<double>(thresholds.size());
}

// ---------------------------------------------------------------------------
// Overlap functions
// ---------------------------------------------------------------------------

/// Per-frame masks of one instance; std::nullopt (absent) counts as empty.
struct InstanceTrack
{
    InstanceId id;
    std::vector<std::optional<BinaryMask>> masks;
    double score = 1.0;
    std::optional<int> class_label;
    /// Ground truth only: per-frame occlusion rate, absent where off-canvas.
    std::vector<std::optional<double>> occlusion;

    int length() const noexcept { return static_cast<int>(masks.size()); }
};

/// Video IoU: summed per-frame intersections over summed unions. Two tracks
/// that are empty everywhere score 1.
inline double viou(const InstanceTrack& pred, const InstanceTrack& gt)
{
    if (pred.masks.size() != gt.masks.size())
        throw InvalidArgument("viou: track lengths differ (" + std::to_string(pred.masks.size()) + " vs " +
                              std::to_string(gt.masks.size()) + ")");
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t t = 0; t < pred.masks.size(); ++t) {
        const auto& p = pred.masks[t];
        const auto& g = gt.masks[t];
        if (p && g) {
            const auto [i, u] = detail::overlap_counts(*p, *g);
            inter += i;
            uni += u;
        } else if (p) {
            uni += p->area();
        } else if (g) {
            uni += g->area();
        }
    }
    if (uni == 0)
        return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct LevelReport
{
    std::optional<double> ap, ap50, ap50_partial, ap50_heavy, ap50_large, ap50_medium, ap50_small;
    /// Mean overlap of pairs matched at 0.5 (image level: mIoU).
    std::optional<double> mean_overlap;
    std::vector<PrCurve> curves;
};

struct EvalReport
{
    LevelReport image;
    LevelReport video;

    /// Flat key/value view in table column order.
    std::vector<std::pair<std::string, std::optional<double>>> entries() const
    {
        auto level = [](const LevelReport& r, const std::string& p) {
            return std::vector<std::pair<std::string, std::optional<double>>>{
                {p + "AP", r.ap},
                {p + "AP50", r.ap50},
                {p + "AP50_P", r.ap50_partial},
                {p + "AP50_H", r.ap50_heavy},
                {p + "AP50_L", r.ap50_large},
                {p + "AP50_M", r.ap50_medium},
                {p + "AP50_S", r.ap50_small},
            };
        };
        auto out = level(image, "");
        out.emplace_back("mIoU", image.mean_overlap);
        for (auto& kv : level(video, "v"))
            out.push_back(std::move(kv));
        out.emplace_back("vIoU", video.mean_overlap);
        return out;
    }
};

namespace detail {

struct ClassedSample
{
    MatchSample sample;
    std::vector<std::optional<int>> pred_classes;
    std::vector<std::optional<int>> gt_classes;
};

inline MatchSample restrict_to_class(const ClassedSample& cs, int cls)
{
    MatchSample out;
    std::vector<std::size_t> gts;
    for (std::size_t g = 0; g < cs.gt_classes.size(); ++g)
        if (cs.gt_classes[g] == cls) {
            gts.push_back(g);
            out.gt_buckets.push_back(cs.sample.gt_buckets[g]);
        }
    for (std::size_t p = 0; p < cs.pred_classes.size(); ++p) {
        if (cs.pred_classes[p] != cls)
            continue;
        out.scores.push_back(cs.sample.scores[p]);
        std::vector<double> row;
        for (auto g : gts)
            row.push_back(cs.sample.overlap[p][g]);
        out.overlap.push_back(std::move(row));
    }
    return out;
}

// AP averaged over classes present in GT, or the class-agnostic AP.
template <typename Fn>
std::optional<double> per_class_mean(std::span<const ClassedSample> samples, bool agnostic, Fn&& fn)
{
    if (agnostic) {
        std::vector<MatchSample> plain;
        for (const auto& s : samples)
            plain.push_back(s.sample);
        return fn(std::span<const MatchSample>(plain));
    }
    std::set<int> classes;
    for (const auto& s : samples)
        for (const auto& c : s.gt_classes)
            classes.insert(c.value_or(0));
    double sum = 0.0;
    int defined = 0;
    for (int cls : classes) {
        std::vector<MatchSample> subset;
        for (const auto& s : samples) {
            auto copy = s;
            for (auto& c : copy.gt_classes)
                c = c.value_or(0);
            for (auto& c : copy.pred_classes)
                c = c.value_or(0);
            subset.push_back(restrict_to_class(copy, cls));
        }
        if (const auto v = fn(std::span<const MatchSample>(subset))) {
            sum += *v;
            ++defined;
        }
    }
    if (defined == 0)
        return std::nullopt;
    return sum / defined;
}

inline LevelReport evaluate_level(std::span<const ClassedSample> samples, const EvalConfig& cfg, bool per_sample_mean)
{
    LevelReport r;
    auto at = [&](std::span<const ClassedSample> s, double thr, std::uint32_t bucket) {
        return per_class_mean(s, cfg.class_agnostic, [&](std::span<const MatchSample> m) {
            return average_precision(m, thr, bucket, cfg.interpolation).ap;
        });
    };
    auto over_thresholds = [&](std::span<const ClassedSample> s) -> std::optional<double> {
        return per_class_mean(s, cfg.class_agnostic, [&](std::span<const MatchSample> m) {
            return mean_ap(m, cfg.iou_thresholds, kBucketAll, cfg.interpolation);
        });
    };
    // Pooled, or averaged over samples with defined values.
    auto reduce = [&](auto&& metric) -> std::optional<double> {
        if (!per_sample_mean)
            return metric(samples);
        double sum = 0.0;
        int defined = 0;
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (const auto v = metric(samples.subspan(i, 1))) {
                sum += *v;
                ++defined;
            }
        if (defined == 0)
            return std::nullopt;
        return sum / defined;
    };

    r.ap = reduce(over_thresholds);
    r.ap50 = reduce([&](auto s) { return at(s, 0.5, kBucketAll); });
    r.ap50_partial = reduce([&](auto s) { return at(s, 0.5, kBucketPartial); });
    r.ap50_heavy = reduce([&](auto s) { return at(s, 0.5, kBucketHeavy); });
    r.ap50_large = reduce([&](auto s) { return at(s, 0.5, kBucketLarge); });
    r.ap50_medium = reduce([&](auto s) { return at(s, 0.5, kBucketMedium); });
    r.ap50_small = reduce([&](auto s) { return at(s, 0.5, kBucketSmall); });

    std::vector<MatchSample> plain;
    for (const auto& s : samples)
        plain.push_back(s.sample);
    const auto matched = average_precision(plain, 0.5, kBucketAll, cfg.interpolation).matched_overlaps;
    if (!matched.empty())
        r.mean_overlap = std::accumulate(matched.begin(), matched.end(), 0.0) / static_cast<double>(matched.size());
    for (double t : cfg.iou_thresholds)
        r.curves.push_back(average_precision(plain, t, kBucketAll, cfg.interpolation).curve);
    return r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Image and video level entry points
// ---------------------------------------------------------------------------

struct ScoredMask
{
    BinaryMask mask;
    double score = 1.0;
    std::optional<int> class_label;
};

struct GroundTruthMask
{
    BinaryMask amodal;
    double occlusion_rate = 0.0;
    std::optional<int> class_label;
};

/// Predictions and ground truth of one frame.
struct FrameSample
{
    std::vector<ScoredMask> predictions;
    std::vector<GroundTruthMask> ground_truth;
};

inline LevelReport evaluate_image_level(std::span<const FrameSample> frames, const EvalConfig& cfg)
{
    cfg.validate();
    std::vector<detail::ClassedSample> samples;
    for (const auto& f : frames) {
        detail::ClassedSample cs;
        for (const auto& g : f.ground_truth) {
            cs.sample.gt_buckets.push_back(
                bucket_flags(g.occlusion_rate, static_cast<double>(g.amodal.area()), cfg));
            cs.gt_classes.push_back(g.class_label);
        }
        for (const auto& p : f.predictions) {
            cs.sample.scores.push_back(p.score);
            cs.pred_classes.push_back(p.class_label);
            std::vector<double> row;
            for (const auto& g : f.ground_truth)
                row.push_back(iou(p.mask, g.amodal));
            cs.sample.overlap.push_back(std::move(row));
        }
        samples.push_back(std::move(cs));
    }
    return detail::evaluate_level(samples, cfg, cfg.per_frame_mean);
}

/// Track-level bucket flags: size from the mean amodal area over frames where
/// the GT is present; heavy if its worst frame is heavily occluded, else
/// partial if any frame is partially occluded.
inline std::uint32_t track_bucket_flags(const InstanceTrack& gt, const EvalConfig& cfg)
{
    double area_sum = 0.0;
    int present = 0;
    double worst = -1.0;
    bool any_partial = false;
    for (std::size_t t = 0; t < gt.masks.size(); ++t) {
        if (!gt.masks[t] || gt.masks[t]->empty())
            continue;
        area_sum += static_cast<double>(gt.masks[t]->area());
        ++present;
        if (t < gt.occlusion.size() && gt.occlusion[t]) {
            worst = std::max(worst, *gt.occlusion[t]);
            any_partial = any_partial || in_range(*gt.occlusion[t], cfg.partial_range);
        }
    }
    std::uint32_t flags = kBucketAll;
    if (worst >= 0.0 && in_range(worst, cfg.heavy_range))
        flags |= kBucketHeavy;
    else if (any_partial)
        flags |= kBucketPartial;
    const double area = present ? area_sum / present : 0.0;
    if (area < cfg.small_max_area)
        flags |= kBucketSmall;
    else if (area < cfg.large_min_area)
        flags |= kBucketMedium;
    else
        flags |= kBucketLarge;
    return flags;
}

/// Predicted and ground-truth tracks of one video.
struct VideoSample
{
    std::vector<InstanceTrack> predictions;
    std::vector<InstanceTrack> ground_truth;
};

inline LevelReport evaluate_video_level(std::span<const VideoSample> videos, const EvalConfig& cfg)
{
    cfg.validate();
    std::vector<detail::ClassedSample> samples;
    for (const auto& v : videos) {
        detail::ClassedSample cs;
        for (const auto& g : v.ground_truth) {
            cs.sample.gt_buckets.push_back(track_bucket_flags(g, cfg));
            cs.gt_classes.push_back(g.class_label);
        }
        for (const auto& p : v.predictions) {
            cs.sample.scores.push_back(p.score);
            cs.pred_classes.push_back(p.class_label);
            std::vector<double> row;
            for (const auto& g : v.ground_truth)
                row.push_back(viou(p, g));
            cs.sample.overlap.push_back(std::move(row));
        }
        samples.push_back(std::move(cs));
    }
    return detail::evaluate_level(samples, cfg, false);
}

}  // namespace samodal
