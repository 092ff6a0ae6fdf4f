#pragma once

// Prompt ablation harness: image-level metrics over a grid of
// (number of points K) x (point selection strategy), repeated with distinct
// seeds and summarised as mean +- sample standard deviation.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "samodal/backends.hpp"
#include "samodal/evaluate.hpp"
#include "samodal/metrics.hpp"
#include "samodal/pipeline.hpp"
#include "samodal/rng.hpp"
#include "samodal/sampling.hpp"
#include "samodal/scenegen.hpp"

namespace samodal {

struct AblationConfig
{
    std::vector<int> ks{1};
    std::vector<SamplingStrategy> strategies{SamplingStrategy::random(), SamplingStrategy::saliency(),
                                             SamplingStrategy::erosion(3), SamplingStrategy::erosion(7)};
    int repeats = 3;
    std::uint64_t seed = 0;
    VisibleChoice visible;
    AmodalChoice amodal;
    TrackerChoice tracker;
    EvalConfig eval;
    std::optional<int> max_occlusion;

    void validate() const
    {
        if (repeats < 1)
            throw InvalidArgument("ablation: repeats must be >= 1");
        if (ks.empty() || strategies.empty())
            throw InvalidArgument("ablation: need at least one K and one strategy");
        for (int k : ks)
            if (k < 1)
                throw InvalidArgument("ablation: K must be >= 1");
        if (visible.kind == VisibleChoice::Kind::Bridge || amodal.kind == AmodalChoice::Kind::Bridge ||
            tracker.kind == TrackerChoice::Kind::Bridge)
            throw InvalidArgument("ablation: bridge backends are not supported");
        eval.validate();
    }
};

struct CellSummary
{
    /// Runs where the metric was defined.
    int runs = 0;
    double mean = 0.0;
    /// Sample standard deviation; only when runs >= 2.
    std::optional<double> stddev;
};

struct AblationTable
{
    std::vector<std::string> rows;
    std::vector<std::string> columns;
    /// cells[row][column]
    std::vector<std::vector<CellSummary>> cells;
    /// Raw per-run values, [row][column][repeat]; undefined runs absent.
    std::vector<std::vector<std::vector<double>>> samples;
};

inline const std::vector<std::string>& ablation_rows()
{
    static const std::vector<std::string> rows{"AP", "AP50", "AP50_P", "AP50_H", "AP50_L", "AP50_M", "AP50_S"};
    return rows;
}

inline CellSummary summarise(const std::vector<double>& values)
{
    CellSummary s;
    s.runs = static_cast<int>(values.size());
    if (values.empty())
        return s;
    double sum = 0.0;
    for (double v : values)
        sum += v;
    s.mean = sum / values.size();
    if (values.size() >= 2) {
        double sq = 0.0;
        for (double v : values)
            sq += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(sq / (values.size() - 1));
    }
    return s;
}

/// Default suite: crowded scenes with objects in all three size buckets,
/// so prompts near a mask boundary often land on a neighbour or background.
inline std::vector<SyntheticVideo> ablation_suite(int count, std::uint64_t seed)
{
    RandomSceneParams p;
    p.dims = {160, 160};
    p.frames = 8;
    p.min_objects = 3;
    p.max_objects = 6;
    p.min_extent = 8;
    p.max_extent = 120;
    p.max_speed = 2;
    std::vector<SyntheticVideo> suite;
    for (int i = 0; i < count; ++i)
        suite.push_back(generate(random_scene(p, mix64(seed ^ mix64(static_cast<std::uint64_t>(i) + 1)), "suite" + std::to_string(i + 1))));
    return suite;
}

/// Seed of repeat r; shared by every cell so cells differ only in the prompt.
inline std::uint64_t repeat_seed(std::uint64_t base, int repeat) { return mix64(base ^ (0x5eedULL + static_cast<std::uint64_t>(repeat))); }

inline AblationTable run_ablation(std::span<const SyntheticVideo> suite, const AblationConfig& cfg)
{
    cfg.validate();
    if (suite.empty())
        throw InvalidArgument("ablation: empty scene suite");

    AblationTable table;
    table.rows = ablation_rows();
    struct Column
    {
        int k;
        SamplingStrategy strategy;
    };
    std::vector<Column> columns;
    for (int k : cfg.ks)
        for (const auto& s : cfg.strategies) {
            columns.push_back({k, s});
            std::string name = s.name();
            if (cfg.ks.size() > 1 || cfg.strategies.size() == 1)
                name = "K=" + std::to_string(k) + (cfg.strategies.size() > 1 ? " " + name : "");
            table.columns.push_back(name);
        }
    table.samples.assign(table.rows.size(), std::vector<std::vector<double>>(columns.size()));

    for (std::size_t c = 0; c < columns.size(); ++c)
        for (int r = 0; r < cfg.repeats; ++r) {
            const auto seed = repeat_seed(cfg.seed, r);
            PipelineConfig pcfg;
            pcfg.k = columns[c].k;
            pcfg.strategy = columns[c].strategy;
            pcfg.seed = seed;
            pcfg.max_occlusion = cfg.max_occlusion;

            std::vector<VideoResult> results;
            for (const auto& video : suite) {
                auto backends = make_reference_backends(video, cfg.visible, cfg.amodal, cfg.tracker, seed);
                results.push_back({&video, run_sequence(video, backends, pcfg).frames});
            }
            const auto report = evaluate(results, cfg.eval).image;
            const std::optional<double> values[] = {report.ap,         report.ap50,        report.ap50_partial,
                                                    report.ap50_heavy, report.ap50_large,  report.ap50_medium,
                                                    report.ap50_small};
            for (std::size_t row = 0; row < table.rows.size(); ++row)
                if (values[row])
                    table.samples[row][c].push_back(*values[row]);
        }

    table.cells.assign(table.rows.size(), std::vector<CellSummary>(columns.size()));
    for (std::size_t row = 0; row < table.rows.size(); ++row)
        for (std::size_t c = 0; c < columns.size(); ++c)
            table.cells[row][c] = summarise(table.samples[row][c]);
    return table;
}

inline std::string format_cell(const CellSummary& s)
{
    if (s.runs == 0)
        return "n/a";
    char buf[64];
    if (s.stddev)
        std::snprintf(buf, sizeof buf, "%.4f ± %.4f", s.mean, *s.stddev);
    else
        std::snprintf(buf, sizeof buf, "%.4f", s.mean);
    return buf;
}

/// Fixed-width text table, one metric per row.
inline std::string format_table(const AblationTable& t)
{
    std::vector<std::vector<std::string>> grid;
    grid.push_back({"metric"});
    for (const auto& c : t.columns)
        grid.back().push_back(c);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        grid.push_back({t.rows[r]});
        for (const auto& cell : t.cells[r])
            grid.back().push_back(format_cell(cell));
    }
    // "±" is two bytes but one column wide.
    auto width = [](const std::string& s) {
        std::size_t w = 0;
        for (unsigned char ch : s)
            w += (ch & 0xC0) != 0x80;
        return w;
    };
    std::vector<std::size_t> widths(grid.front().size(), 0);
    for (const auto& line : grid)
        for (std::size_t i = 0; i < line.size(); ++i)
            widths[i] = std::max(widths[i], width(line[i]));
    std::string out;
    for (const auto& line : grid) {
        for (std::size_t i = 0; i < line.size(); ++i) {
            out += line[i];
            if (i + 1 < line.size())
                out += std::string(widths[i] - width(line[i]) + 2, ' ');
        }
        out += '\n';
    }
    return out;
}

}  // namespace samodal
