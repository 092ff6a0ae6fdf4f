// samodal: generate | run | eval | ablate | render

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "samodal/bridge.hpp"
#include "samodal/samodal.hpp"

namespace fs = std::filesystem;
using namespace samodal;

namespace {

void write_file(const std::string& path, const std::string& content)
{
    if (path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << content))
        throw InvalidArgument("cannot write " + path);
}

io::SceneDocument load_scene(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw InvalidArgument("cannot open " + path);
    return io::scene_from_json(io::parse_json(in, path), path);
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    for (auto& part : samodal::detail::split(s, ','))
        if (!part.empty())
            out.push_back(part);
    return out;
}

// Env var wins over the flag.
std::uint64_t effective_seed(std::uint64_t flag)
{
    if (const char* env = std::getenv("SAMODAL_SEED")) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(env, &used);
            if (used == std::string(env).size())
                return v;
        } catch (const std::exception&) {
        }
        throw InvalidArgument(std::string("bad SAMODAL_SEED \"") + env + "\"");
    }
    return flag;
}

struct BackendFlags
{
    std::string vis = "oracle";
    std::string amodal = "oracle";
    std::string tracker = "oracle";

    void add(CLI::App* cmd)
    {
        cmd->add_option("--vis", vis, "oracle[:v] | noisy:<drop>[:<dilate>[:<from>]] | bridge")->capture_default_str();
        cmd->add_option("--amodal", amodal, "oracle | confusable | bridge")->capture_default_str();
        cmd->add_option("--tracker", tracker, "oracle | noisy:<sigma> | bridge")->capture_default_str();
    }
};

// ---------------------------------------------------------------------------

struct GenerateArgs
{
    std::string spec;
    std::optional<std::uint64_t> random;
    int height = 64;
    int width = 64;
    int frames = 10;
    std::string out = "-";
};

int cmd_generate(const GenerateArgs& a)
{
    SceneSpec spec;
    if (!a.spec.empty()) {
        std::ifstream in(a.spec);
        if (!in)
            throw InvalidArgument("cannot open " + a.spec);
        const auto j = io::parse_json(in, a.spec);
        try {
            spec = io::scene_spec_from_json(j);
        } catch (const Error& e) {
            throw FormatError(a.spec, 0, e.what());
        }
    } else if (a.random) {
        RandomSceneParams p;
        p.dims = {a.height, a.width};
        p.frames = a.frames;
        spec = random_scene(p, *a.random, "random" + std::to_string(*a.random));
    } else {
        throw InvalidArgument("generate: need --spec or --random");
    }
    const auto video = generate(spec);
    write_file(a.out, io::to_json(video, spec).dump() + "\n");
    return 0;
}

// ---------------------------------------------------------------------------

struct RunArgs
{
    std::vector<std::string> scenes;
    BackendFlags backends;
    std::string points = "random";
    int k = 1;
    std::uint64_t seed = 0;
    std::optional<int> max_occlusion;
    std::string track_from = "tracked";
    bool require_occluded_flag = false;
    std::string bridge_cmd;
    std::string bridge_transcript;
    std::string metadata_out;
    std::string out = "-";
};

int cmd_run(const RunArgs& a)
{
    PipelineConfig cfg;
    cfg.k = a.k;
    cfg.strategy = SamplingStrategy::parse(a.points);
    cfg.seed = effective_seed(a.seed);
    cfg.max_occlusion = a.max_occlusion;
    if (a.track_from == "tracked")
        cfg.track_from = TrackFrom::Tracked;
    else if (a.track_from == "last-visible")
        cfg.track_from = TrackFrom::LastVisible;
    else
        throw InvalidArgument("bad --track-from \"" + a.track_from + "\" (tracked|last-visible)");
    cfg.require_occluded_flag = a.require_occluded_flag;
    cfg.validate();

    const auto vis = parse_visible_choice(a.backends.vis);
    const auto amodal = parse_amodal_choice(a.backends.amodal);
    const auto tracker = parse_tracker_choice(a.backends.tracker);
    const bool uses_bridge = vis.kind == VisibleChoice::Kind::Bridge || amodal.kind == AmodalChoice::Kind::Bridge ||
                             tracker.kind == TrackerChoice::Kind::Bridge;
    if (uses_bridge && a.bridge_cmd.empty())
        throw InvalidArgument("a bridge backend needs --bridge-cmd");

    std::unique_ptr<std::ofstream> transcript;
    if (!a.bridge_transcript.empty()) {
        transcript = std::make_unique<std::ofstream>(a.bridge_transcript);
        if (!*transcript)
            throw InvalidArgument("cannot write " + a.bridge_transcript);
    }

    std::ostringstream stream;
    nlohmann::json metadata = nlohmann::json::array();
    for (const auto& path : a.scenes) {
        const auto doc = load_scene(path);
        const auto& video = doc.video;
        auto set = make_reference_backends(video, vis, amodal, tracker, cfg.seed);
        std::shared_ptr<bridge::BridgeClient> client;
        if (uses_bridge) {
            client = std::make_shared<bridge::BridgeClient>(a.bridge_cmd, fs::absolute(path).string(), transcript.get());
            if (!set.visible)
                set.visible = std::make_shared<bridge::BridgeVisible>(client);
            if (!set.amodal)
                set.amodal = std::make_shared<bridge::BridgeAmodal>(client);
            if (!set.tracker)
                set.tracker = std::make_shared<bridge::BridgeTracker>(client);
        }
        RunResult result;
        try {
            result = run_sequence(video, set, cfg);
        } catch (const Error& e) {
            throw Error(path + " (video " + video.video_id + "): " + e.what());
        }
        if (client && client->shutdown() != 0)
            throw BackendError(0, "bridge server exited with a nonzero status");
        io::write_predictions(stream, video.video_id, result.frames);
        metadata.push_back(io::metadata_to_json(video.video_id, result.metadata));
    }
    write_file(a.out, stream.str());
    if (!a.metadata_out.empty())
        write_file(a.metadata_out, metadata.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------------

struct EvalFlags
{
    std::string thresholds;
    std::string buckets;
    bool per_frame_mean = false;
    bool class_aware = false;
    std::string interpolation = "coco101";

    void add(CLI::App* cmd)
    {
        cmd->add_option("--thresholds", thresholds, "comma-separated IoU thresholds (default 0.50:0.05:0.95)");
        cmd->add_option("--buckets", buckets,
                        "bucket cutoffs, e.g. partial=0:0.5,heavy=0.5:1,small=1024,large=9216");
        cmd->add_flag("--per-frame-mean", per_frame_mean, "image AP as the mean of per-frame APs");
        cmd->add_flag("--class-aware", class_aware, "average AP over classes instead of class-agnostic");
        cmd->add_option("--interp", interpolation, "coco101 | all-points")->capture_default_str();
    }

    EvalConfig config() const
    {
        EvalConfig cfg;
        if (!thresholds.empty()) {
            cfg.iou_thresholds.clear();
            for (const auto& t : split_list(thresholds))
                cfg.iou_thresholds.push_back(samodal::detail::parse_real(t, "IoU threshold"));
        }
        for (const auto& item : split_list(buckets)) {
            const auto eq = item.find('=');
            if (eq == std::string::npos)
                throw InvalidArgument("bad bucket \"" + item + "\"");
            const auto key = item.substr(0, eq);
            const auto value = item.substr(eq + 1);
            auto range = [&] {
                const auto parts = samodal::detail::split(value, ':');
                if (parts.size() != 2)
                    throw InvalidArgument("bucket " + key + " needs lo:hi");
                return std::pair{samodal::detail::parse_real(parts[0], "bucket bound"),
                                 samodal::detail::parse_real(parts[1], "bucket bound")};
            };
            if (key == "partial")
                cfg.partial_range = range();
            else if (key == "heavy")
                cfg.heavy_range = range();
            else if (key == "small")
                cfg.small_max_area = samodal::detail::parse_real(value, "small cutoff");
            else if (key == "large")
                cfg.large_min_area = samodal::detail::parse_real(value, "large cutoff");
            else
                throw InvalidArgument("unknown bucket \"" + key + "\" (partial|heavy|small|large)");
        }
        cfg.per_frame_mean = per_frame_mean;
        cfg.class_agnostic = !class_aware;
        if (interpolation == "coco101")
            cfg.interpolation = Interpolation::Coco101;
        else if (interpolation == "all-points")
            cfg.interpolation = Interpolation::AllPoints;
        else
            throw InvalidArgument("bad --interp \"" + interpolation + "\"");
        cfg.validate();
        return cfg;
    }
};

struct EvalArgs
{
    std::string pred;
    std::vector<std::string> gt;
    EvalFlags flags;
    std::string format = "json";
    std::string out = "-";
};

int cmd_eval(const EvalArgs& a)
{
    const auto cfg = a.flags.config();
    std::ifstream in(a.pred);
    if (!in)
        throw InvalidArgument("cannot open " + a.pred);
    auto stream = io::read_predictions(in, a.pred);

    std::vector<io::SceneDocument> docs;
    for (const auto& path : a.gt)
        docs.push_back(load_scene(path));
    std::vector<VideoResult> results;
    for (const auto& doc : docs) {
        auto it = stream.find(doc.video.video_id);
        std::vector<FrameOutput> frames;
        if (it != stream.end()) {
            frames = std::move(it->second);
            stream.erase(it);
        }
        results.push_back({&doc.video, io::densify(std::move(frames), doc.video.length())});
    }
    if (!stream.empty())
        throw InvalidArgument(a.pred + ": predictions for video \"" + stream.begin()->first +
                              "\" which has no ground truth");
    const auto report = evaluate(results, cfg);
    if (a.format == "json")
        write_file(a.out, io::report_to_json(report).dump(2) + "\n");
    else if (a.format == "tsv")
        write_file(a.out, io::report_to_tsv(report));
    else
        throw InvalidArgument("bad --format \"" + a.format + "\" (json|tsv)");
    return 0;
}

// ---------------------------------------------------------------------------

struct AblateArgs
{
    std::string ks = "1";
    std::string strategies = "random,saliency,erosion:3,erosion:7";
    int repeats = 3;
    std::uint64_t seed = 0;
    std::vector<std::string> scenes;
    int suite = 12;
    std::uint64_t suite_seed = 1;
    BackendFlags backends{"noisy:0:2", "confusable", "oracle"};
    EvalFlags eval;
    std::optional<int> max_occlusion;
    std::string format = "text";
    std::string out = "-";
};

int cmd_ablate(const AblateArgs& a)
{
    AblationConfig cfg;
    cfg.ks.clear();
    for (const auto& k : split_list(a.ks))
        cfg.ks.push_back(samodal::detail::parse_int(k, "K"));
    cfg.strategies.clear();
    for (const auto& s : split_list(a.strategies))
        cfg.strategies.push_back(SamplingStrategy::parse(s));
    cfg.repeats = a.repeats;
    cfg.seed = effective_seed(a.seed);
    cfg.visible = parse_visible_choice(a.backends.vis);
    cfg.amodal = parse_amodal_choice(a.backends.amodal);
    cfg.tracker = parse_tracker_choice(a.backends.tracker);
    cfg.eval = a.eval.config();
    cfg.max_occlusion = a.max_occlusion;

    std::vector<SyntheticVideo> suite;
    if (a.scenes.empty())
        suite = ablation_suite(a.suite, a.suite_seed);
    for (const auto& path : a.scenes)
        suite.push_back(load_scene(path).video);
    const auto table = run_ablation(suite, cfg);

    if (a.format == "text") {
        write_file(a.out, format_table(table));
    } else if (a.format == "json") {
        auto j = nlohmann::ordered_json::object();
        j["columns"] = table.columns;
        auto rows = nlohmann::ordered_json::object();
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            auto cells = nlohmann::ordered_json::array();
            for (const auto& c : table.cells[r]) {
                nlohmann::ordered_json cell = {{"runs", c.runs}};
                cell["mean"] = c.runs ? nlohmann::ordered_json(c.mean) : nlohmann::ordered_json(nullptr);
                cell["std"] = c.stddev ? nlohmann::ordered_json(*c.stddev) : nlohmann::ordered_json(nullptr);
                cells.push_back(std::move(cell));
            }
            rows[table.rows[r]] = std::move(cells);
        }
        j["rows"] = std::move(rows);
        write_file(a.out, j.dump(2) + "\n");
    } else {
        throw InvalidArgument("bad --format \"" + a.format + "\" (text|json)");
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct RenderArgs
{
    std::string scene;
    std::string pred;
    std::string out_dir = ".";
    int scale = 4;
};

int cmd_render(const RenderArgs& a)
{
    const auto doc = load_scene(a.scene);
    const auto& video = doc.video;
    std::vector<FrameOutput> frames;
    if (!a.pred.empty()) {
        std::ifstream in(a.pred);
        if (!in)
            throw InvalidArgument("cannot open " + a.pred);
        auto stream = io::read_predictions(in, a.pred);
        if (auto it = stream.find(video.video_id); it != stream.end())
            frames = std::move(it->second);
    }
    frames = io::densify(std::move(frames), video.length());
    fs::create_directories(a.out_dir);
    for (const auto& f : video.frames) {
        const auto& preds = frames[static_cast<std::size_t>(f.t - 1)].predictions;
        for (const auto& p : preds)
            if (!(p.mask.dims() == video.dims))
                throw DimensionMismatch(a.pred + ": frame " + std::to_string(f.t) + ", instance " + to_string(p.id) +
                                        ": mask does not match the scene");
        char name[64];
        std::snprintf(name, sizeof name, "_t%03d.ppm", f.t);
        const auto path = (fs::path(a.out_dir) / (video.video_id + name)).string();
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw InvalidArgument("cannot write " + path);
        write_ppm(out, render_overlay(f, preds, a.scale));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Amodal video instance segmentation on synthetic scenes"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "render a scene spec into a ground-truth scene document");
    g->add_option("--spec", gen.spec, "scene spec JSON")->check(CLI::ExistingFile);
    g->add_option("--random", gen.random, "generate a random scene with this seed instead");
    g->add_option("--height", gen.height)->capture_default_str();
    g->add_option("--width", gen.width)->capture_default_str();
    g->add_option("--frames", gen.frames)->capture_default_str();
    g->add_option("--gt-out,-o", gen.out, "output scene document")->capture_default_str();

    RunArgs run;
    auto* r = app.add_subcommand("run", "run the online pipeline over scenes");
    r->add_option("--scene", run.scenes, "scene document (repeatable)")->required()->check(CLI::ExistingFile);
    run.backends.add(r);
    r->add_option("--points", run.points, "random | saliency | erosion[:K]")->capture_default_str();
    r->add_option("-K", run.k, "point prompts per instance")->capture_default_str();
    r->add_option("--seed", run.seed)->capture_default_str();
    r->add_option("--max-occlusion", run.max_occlusion, "drop instances missing for this many frames");
    r->add_option("--track-from", run.track_from, "tracked | last-visible")->capture_default_str();
    r->add_flag("--require-occluded-flag", run.require_occluded_flag,
                "keep the stored mask in place unless some tracked point is flagged occluded");
    r->add_option("--bridge-cmd", run.bridge_cmd, "server command for bridge backends");
    r->add_option("--bridge-transcript", run.bridge_transcript, "log every bridge message here");
    r->add_option("--metadata-out", run.metadata_out, "tracking decisions as JSON");
    r->add_option("-o,--out", run.out, "prediction stream (JSON lines)")->capture_default_str();

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "score a prediction stream against ground truth");
    e->add_option("--pred", ev.pred, "prediction stream")->required();
    e->add_option("--gt", ev.gt, "scene document (repeatable)")->required()->check(CLI::ExistingFile);
    ev.flags.add(e);
    e->add_option("--format", ev.format, "json | tsv")->capture_default_str();
    e->add_option("-o,--out", ev.out)->capture_default_str();

    AblateArgs ab;
    auto* b = app.add_subcommand("ablate", "point prompt ablation table");
    b->add_option("-K", ab.ks, "comma-separated K values")->capture_default_str();
    b->add_option("--strategies", ab.strategies, "comma-separated strategies")->capture_default_str();
    b->add_option("--repeats", ab.repeats)->capture_default_str();
    b->add_option("--seed", ab.seed)->capture_default_str();
    b->add_option("--scene", ab.scenes, "scene document (repeatable); default is a random suite")
        ->check(CLI::ExistingFile);
    b->add_option("--suite", ab.suite, "random suite size")->capture_default_str();
    b->add_option("--suite-seed", ab.suite_seed)->capture_default_str();
    ab.backends.add(b);
    ab.eval.add(b);
    b->add_option("--max-occlusion", ab.max_occlusion);
    b->add_option("--format", ab.format, "text | json")->capture_default_str();
    b->add_option("-o,--out", ab.out)->capture_default_str();

    RenderArgs rd;
    auto* v = app.add_subcommand("render", "write per-frame PPM overlays");
    v->add_option("--scene", rd.scene)->required()->check(CLI::ExistingFile);
    v->add_option("--pred", rd.pred, "prediction stream to overlay");
    v->add_option("--out-dir", rd.out_dir)->capture_default_str();
    v->add_option("--scale", rd.scale)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (g->parsed())
            return cmd_generate(gen);
        if (r->parsed())
            return cmd_run(run);
        if (e->parsed())
            return cmd_eval(ev);
        if (b->parsed())
            return cmd_ablate(ab);
        if (v->parsed())
            return cmd_render(rd);
    } catch (const std::exception& ex) {
        std::cerr << "samodal: error: " << ex.what() << '\n';
        return 1;
    }
    return 1;
}
