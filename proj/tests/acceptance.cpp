// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "samodal/samodal.hpp"
#include "support/oracles.hpp"
#include "support/scenes.hpp"

using namespace samodal;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome
{
    bool ok = true;
    std::string detail;

    void fail(const std::string& why)
    {
        if (ok)
            detail = why;
        ok = false;
    }
};

int failures = 0;

void report(const char* name, const std::function<Outcome()>& check)
{
    const auto start = Clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    std::printf("%s  %-24s %6.2fs  %s\n", o.ok ? "PASS" : "FAIL", name, secs, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.ok;
}

bool all_defined_are_one(const LevelReport& r)
{
    for (const auto& v : {r.ap, r.ap50, r.ap50_partial, r.ap50_heavy, r.ap50_large, r.ap50_medium, r.ap50_small})
        if (v && *v != 1.0)
            return false;
    return r.ap == 1.0 && r.ap50 == 1.0;
}

BackendSet oracles(const SyntheticVideo& v) { return make_reference_backends(v, {}, {}, {}, 0); }

Outcome oracle_closure()
{
    Outcome o;
    std::vector<SyntheticVideo> scenes;
    for (std::uint64_t s = 0; s < 20; ++s)
        scenes.push_back(fixtures::closure_scene(s));
    const auto start = Clock::now();
    for (const auto& v : scenes) {
        const std::vector<VideoResult> res{{&v, run_sequence(v, oracles(v), {}).frames}};
        const auto r = evaluate(res, {});
        if (!all_defined_are_one(r.image) || !all_defined_are_one(r.video))
            o.fail(v.video_id + " scored below 1");
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (secs >= 5.0)
        o.fail("took " + std::to_string(secs) + "s");
    if (o.ok)
        o.detail = "20 scenes, pipeline + eval " + std::to_string(secs).substr(0, 5) + "s";
    return o;
}

Outcome occlusion_bridging()
{
    Outcome o;
    int tracked = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto v = fixtures::bridging_scene(s);
        const auto run = run_sequence(v, oracles(v), {});
        for (const auto& f : run.frames)
            for (const auto& p : f.predictions) {
                if (p.source != Source::Tracked)
                    continue;
                ++tracked;
                if (oracle::iou(p.mask, v.frame(f.t).find(p.id)->amodal) != 1.0)
                    o.fail(v.video_id + " frame " + std::to_string(f.t) + " tracked mask differs");
            }
        const std::vector<VideoResult> res{{&v, run.frames}};
        if (evaluate(res, {}).video.ap50 != 1.0)
            o.fail(v.video_id + " vAP50 below 1");
    }
    if (tracked == 0)
        o.fail("no tracked predictions");
    if (o.ok)
        o.detail = "20 scenes, " + std::to_string(tracked) + " tracked masks exact";
    return o;
}

Outcome metric_oracle()
{
    Outcome o;
    std::mt19937_64 rng(2024);
    const GridDims d{8, 8};
    auto close = [](std::optional<double> a, std::optional<double> b) {
        return a.has_value() == b.has_value() && (!a || std::abs(*a - *b) <= 1e-9);
    };
    int checked = 0;
    for (int trial = 0; trial < 250; ++trial) {
        // Image level: several 8x8 frames pooled.
        std::vector<FrameSample> frames(1 + rng() % 3);
        std::vector<oracle::Sample> ref;
        for (auto& f : frames) {
            const int ng = static_cast<int>(rng() % 4), np = static_cast<int>(rng() % 5);
            for (int g = 0; g < ng; ++g)
                f.ground_truth.push_back({oracle::random_blob(rng, d), static_cast<double>(rng() % 4) / 3.0, {}});
            for (int p = 0; p < np; ++p) {
                auto m = ng && rng() % 3 == 0 ? f.ground_truth[rng() % ng].amodal : oracle::random_blob(rng, d);
                f.predictions.push_back({m, static_cast<double>(rng() % 4), {}});
            }
            oracle::Sample s;
            for (const auto& p : f.predictions) {
                s.scores.push_back(p.score);
                std::vector<double> row;
                for (const auto& g : f.ground_truth)
                    row.push_back(oracle::iou(p.mask, g.amodal));
                s.overlap.push_back(row);
            }
            for (const auto& g : f.ground_truth)
                s.in_bucket.push_back(g.occlusion_rate > 0.5);
            ref.push_back(s);
        }
        const auto img = evaluate_image_level(frames, {});
        if (!close(img.ap50_heavy, oracle::brute_force_ap(ref, 0.5)))
            o.fail("image AP50_H mismatch, trial " + std::to_string(trial));
        for (auto& s : ref)
            s.in_bucket.assign(s.in_bucket.size(), true);
        std::optional<double> mean;
        double sum = 0;
        for (int n = 50; n <= 95; n += 5)
            if (const auto v = oracle::brute_force_ap(ref, n / 100.0)) {
                sum += *v;
                mean = sum / 10.0;
            }
        if (!close(img.ap, mean) || !close(img.ap50, oracle::brute_force_ap(ref, 0.5)))
            o.fail("image AP mismatch, trial " + std::to_string(trial));

        // Video level: up to 3 tracks x 4 frames.
        const int T = 1 + static_cast<int>(rng() % 4);
        VideoSample vs;
        auto random_track = [&] {
            InstanceTrack t;
            t.score = static_cast<double>(rng() % 3);
            for (int f = 0; f < T; ++f) {
                t.masks.push_back(rng() % 4 ? std::optional<BinaryMask>(oracle::random_blob(rng, d)) : std::nullopt);
                t.occlusion.push_back(0.0);
            }
            return t;
        };
        const int ng = static_cast<int>(rng() % 4), np = static_cast<int>(rng() % 4);
        for (int g = 0; g < ng; ++g)
            vs.ground_truth.push_back(random_track());
        for (int p = 0; p < np; ++p) {
            auto t = random_track();
            if (ng && rng() % 3 == 0)
                t.masks = vs.ground_truth[rng() % ng].masks;
            vs.predictions.push_back(t);
        }
        auto stacked = [&](const InstanceTrack& t) {
            std::vector<BinaryMask> out;
            for (const auto& m : t.masks)
                out.push_back(m ? *m : BinaryMask(d));
            return oracle::stack(out);
        };
        oracle::Sample s;
        for (const auto& p : vs.predictions) {
            s.scores.push_back(p.score);
            std::vector<double> row;
            for (const auto& g : vs.ground_truth)
                row.push_back(oracle::iou(stacked(p), stacked(g)));
            s.overlap.push_back(row);
        }
        s.in_bucket.assign(vs.ground_truth.size(), true);
        const std::vector<VideoSample> videos{vs};
        if (!close(evaluate_video_level(videos, {}).ap50, oracle::brute_force_ap({s}, 0.5)))
            o.fail("vAP50 mismatch, trial " + std::to_string(trial));
        ++checked;
    }
    if (o.ok)
        o.detail = std::to_string(checked) + " image + video instances within 1e-9";
    return o;
}

Outcome viou_identity()
{
    Outcome o;
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const GridDims d{1 + static_cast<int>(rng() % 10), 1 + static_cast<int>(rng() % 10)};
        const int T = 1 + static_cast<int>(rng() % 8);
        InstanceTrack a, b;
        std::vector<BinaryMask> sa, sb;
        for (int f = 0; f < T; ++f) {
            sa.push_back(oracle::random_mask(rng, d, 0.5));
            sb.push_back(oracle::random_mask(rng, d, 0.5));
            a.masks.push_back(sa.back());
            b.masks.push_back(sb.back());
        }
        if (std::abs(viou(a, b) - oracle::iou(oracle::stack(sa), oracle::stack(sb))) > 1e-12)
            o.fail("trial " + std::to_string(trial));
    }
    if (o.ok)
        o.detail = "100 track pairs within 1e-12";
    return o;
}

Outcome erosion_guarantee()
{
    Outcome o;
    std::mt19937_64 rng(11);
    int points = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const GridDims d{8 + static_cast<int>(rng() % 25), 8 + static_cast<int>(rng() % 25)};
        const auto m = trial % 2 ? oracle::random_blob(rng, d, 4) : oracle::random_mask(rng, d, 0.92);
        for (int k : {3, 7}) {
            if (erode(m, k).empty())
                continue;
            const auto t = sample_points(m, 5, SamplingStrategy::erosion(k), rng());
            for (auto p : t.points) {
                ++points;
                const auto c = to_coord(d, p);
                // Depth counts the boundary pixel as 1, so a clear k x k window means depth > k/2.
                if (oracle::chebyshev_depth(m, c.h, c.w) < k / 2 + 1)
                    o.fail("trial " + std::to_string(trial) + " k " + std::to_string(k));
            }
        }
    }
    if (o.ok)
        o.detail = std::to_string(points) + " sampled points clear of the border";
    return o;
}

Outcome ablation_shape()
{
    Outcome o;
    const auto suite = ablation_suite(12, 1);
    AblationConfig cfg;
    cfg.visible = parse_visible_choice("noisy:0:2");
    cfg.amodal = parse_amodal_choice("confusable");
    cfg.strategies = {SamplingStrategy::random(), SamplingStrategy::erosion(3), SamplingStrategy::erosion(7)};
    cfg.repeats = 3;
    const auto t = run_ablation(suite, cfg);
    if (t.rows != std::vector<std::string>{"AP", "AP50", "AP50_P", "AP50_H", "AP50_L", "AP50_M", "AP50_S"})
        o.fail("row set");
    for (const auto& row : t.cells)
        for (const auto& c : row)
            if (c.runs != 3 || !c.stddev)
                o.fail("cell without 3 defined runs");
    const double random = t.cells[0][0].mean, e3 = t.cells[0][1].mean, e7 = t.cells[0][2].mean;
    if (!(e7 >= e3 && e3 >= random))
        o.fail("ordering");
    char buf[160];
    std::snprintf(buf, sizeof buf, "AP erosion:7 %.4f >= erosion:3 %.4f >= random %.4f", e7, e3, random);
    o.detail = o.ok ? buf : o.detail + "; " + buf;
    return o;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism()
{
    Outcome o;
    const auto dir = fs::temp_directory_path() / "samodal_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string bin = SAMODAL_CLI;
    for (const char* run : {"a", "b"}) {
        const auto base = (dir / run).string();
        const std::string cmd = bin + " generate --random 42 --frames 16 -o " + base + "_gt.json && " + bin +
                                " run --scene " + base + "_gt.json --vis noisy:0.3:1 --amodal confusable" +
                                " --tracker noisy:1 -K 3 --points saliency --seed 9 -o " + base + "_pred.jsonl && " +
                                bin + " eval --pred " + base + "_pred.jsonl --gt " + base + "_gt.json -o " + base +
                                "_report.json";
        if (std::system(cmd.c_str()) != 0)
            o.fail("command failed");
    }
    for (const char* suffix : {"_gt.json", "_pred.jsonl", "_report.json"}) {
        const auto a = slurp(dir / (std::string("a") + suffix));
        if (a.empty() || a != slurp(dir / (std::string("b") + suffix)))
            o.fail(std::string(suffix) + " differs");
    }
    fs::remove_all(dir);
    if (o.ok)
        o.detail = "generate/run/eval outputs byte-identical";
    return o;
}

Outcome online_causality()
{
    Outcome o;
    for (std::uint64_t s = 0; s < 10; ++s) {
        RandomSceneParams p;
        p.frames = 12;
        p.keep_inside = false;
        const auto v = generate(random_scene(p, 500 + s));
        const auto vis = parse_visible_choice("noisy:0.3:1");
        const auto trk = parse_tracker_choice("noisy:1.5");
        PipelineConfig cfg;
        cfg.k = 2;
        cfg.seed = s;
        const auto full = run_sequence(v, make_reference_backends(v, vis, {}, trk, s), cfg);
        for (int t = 1; t < v.length(); ++t) {
            const auto prefix = v.truncated(t);
            const auto part = run_sequence(prefix, make_reference_backends(prefix, vis, {}, trk, s), cfg);
            for (int i = 0; i < t; ++i)
                if (!(part.frames[static_cast<std::size_t>(i)] == full.frames[static_cast<std::size_t>(i)]))
                    o.fail("scene " + std::to_string(s) + " frame " + std::to_string(i + 1));
        }
    }
    if (o.ok)
        o.detail = "10 scenes, every prefix";
    return o;
}

}  // namespace

int main()
{
    report("oracle-closure", oracle_closure);
    report("occlusion-bridging", occlusion_bridging);
    report("metric-oracle", metric_oracle);
    report("viou-identity", viou_identity);
    report("erosion-guarantee", erosion_guarantee);
    report("ablation-shape", ablation_shape);
    report("determinism", determinism);
    report("online-causality", online_causality);
    std::printf("%s\n", failures ? "ACCEPTANCE FAILED" : "ACCEPTANCE PASSED");
    return failures ? 1 : 0;
}
