#pragma once

// Test-side reference implementations. These deliberately share no code
// with the library beyond the plain data types: masks are read cell by cell,
// matchings are found by exhaustive search, AP by scanning every cut point.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "samodal/mask.hpp"

namespace oracle {

using samodal::BinaryMask;
using samodal::GridDims;

inline std::pair<std::size_t, std::size_t> cell_counts(const BinaryMask& a, const BinaryMask& b)
{
    std::size_t inter = 0, uni = 0;
    for (int h = 1; h <= a.dims().height; ++h)
        for (int w = 1; w <= a.dims().width; ++w) {
            const bool x = a.test(samodal::Coord{h, w});
            const bool y = b.test(samodal::Coord{h, w});
            inter += x && y;
            uni += x || y;
        }
    return {inter, uni};
}

inline double iou(const BinaryMask& a, const BinaryMask& b)
{
    const auto [i, u] = cell_counts(a, b);
    return u == 0 ? 1.0 : static_cast<double>(i) / static_cast<double>(u);
}

/// Masks of a track stacked along the row axis into one (T*H) x W mask.
inline BinaryMask stack(const std::vector<BinaryMask>& frames)
{
    const auto d = frames.front().dims();
    BinaryMask out(GridDims{d.height * static_cast<int>(frames.size()), d.width});
    for (std::size_t t = 0; t < frames.size(); ++t)
        for (int h = 1; h <= d.height; ++h)
            for (int w = 1; w <= d.width; ++w)
                if (frames[t].test(samodal::Coord{h, w}))
                    out.set(samodal::Coord{static_cast<int>(t) * d.height + h, w});
    return out;
}

/// Chebyshev distance from pixel (h, w) to the nearest unset cell, treating
/// everything off-grid as unset. Brute force over all cells.
inline int chebyshev_depth(const BinaryMask& m, int h, int w)
{
    const auto d = m.dims();
    int best = std::min({h, w, d.height - h + 1, d.width - w + 1});
    for (int y = 1; y <= d.height; ++y)
        for (int x = 1; x <= d.width; ++x)
            if (!m.test(samodal::Coord{y, x}))
                best = std::min(best, std::max(std::abs(y - h), std::abs(x - w)));
    return best;
}

// ---------------------------------------------------------------------------
// Matching and AP
// ---------------------------------------------------------------------------

struct Sample
{
    std::vector<double> scores;
    std::vector<std::vector<double>> overlap;  // [pred][gt]
    std::vector<bool> in_bucket;               // per gt
};

// Order in which predictions are considered: higher score first, then lower index.
inline std::vector<int> visit_order(const std::vector<double>& scores)
{
    std::vector<std::tuple<double, int>> keyed;
    for (int i = 0; i < static_cast<int>(scores.size()); ++i)
        keyed.emplace_back(-scores[i], i);
    std::sort(keyed.begin(), keyed.end());
    std::vector<int> out;
    for (auto& [s, i] : keyed)
        out.push_back(i);
    return out;
}

/// Enumerate every injective partial assignment pred -> gt and return the
/// unique one satisfying the greedy rules: in visit order, each prediction
/// holds the best still-free GT at or above the threshold (lowest index on
/// ties), or nothing when no free GT reaches the threshold.
inline std::vector<int> brute_force_match(const Sample& s, double threshold)
{
    const int np = static_cast<int>(s.scores.size());
    const int ng = static_cast<int>(s.in_bucket.size());
    const auto order = visit_order(s.scores);
    std::vector<int> assign(np, -1);
    std::vector<std::vector<int>> found;

    auto consistent = [&] {
        std::vector<bool> used(ng, false);
        for (int p : order) {
            int want = -1;
            double best = -1;
            for (int g = 0; g < ng; ++g)
                if (!used[g] && s.overlap[p][g] >= threshold && s.overlap[p][g] > best) {
                    best = s.overlap[p][g];
                    want = g;
                }
            if (assign[p] != want)
                return false;
            if (want >= 0)
                used[want] = true;
        }
        return true;
    };
    std::function<void(int, std::vector<bool>&)> rec = [&](int p, std::vector<bool>& used) {
        if (p == np) {
            if (consistent())
                found.push_back(assign);
            return;
        }
        assign[p] = -1;
        rec(p + 1, used);
        for (int g = 0; g < ng; ++g) {
            if (used[g])
                continue;
            used[g] = true;
            assign[p] = g;
            rec(p + 1, used);
            used[g] = false;
            assign[p] = -1;
        }
    };
    std::vector<bool> used(ng, false);
    rec(0, used);
    if (found.size() != 1)
        throw std::logic_error("oracle: greedy assignment not unique");
    return found.front();
}

/// 101-point AP of pooled samples: for each recall level r, the best
/// precision over all cut points whose recall reaches r.
inline std::optional<double> brute_force_ap(const std::vector<Sample>& samples, double threshold)
{
    struct Det
    {
        double score;
        int sample;
        int rank;
        bool tp;
    };
    std::vector<Det> dets;
    int num_gt = 0;
    for (int si = 0; si < static_cast<int>(samples.size()); ++si) {
        const auto& s = samples[si];
        for (bool b : s.in_bucket)
            num_gt += b;
        const auto match = brute_force_match(s, threshold);
        const auto order = visit_order(s.scores);
        for (int rank = 0; rank < static_cast<int>(order.size()); ++rank) {
            const int p = order[rank];
            if (match[p] >= 0 && !s.in_bucket[match[p]])
                continue;
            dets.push_back({s.scores[p], si, rank, match[p] >= 0});
        }
    }
    if (num_gt == 0)
        return std::nullopt;
    std::sort(dets.begin(), dets.end(), [](const Det& a, const Det& b) {
        return std::tuple(-a.score, a.sample, a.rank) < std::tuple(-b.score, b.sample, b.rank);
    });
    std::vector<std::pair<double, double>> cuts;  // (recall, precision) after each detection
    int tp = 0;
    for (std::size_t i = 0; i < dets.size(); ++i) {
        tp += dets[i].tp;
        cuts.emplace_back(static_cast<double>(tp) / num_gt, static_cast<double>(tp) / static_cast<double>(i + 1));
    }
    double sum = 0;
    for (int k = 0; k <= 100; ++k) {
        const double r = k / 100.0;
        double best = 0;
        for (auto [rec, prec] : cuts)
            if (rec >= r)
                best = std::max(best, prec);
        sum += best;
    }
    return sum / 101.0;
}

// ---------------------------------------------------------------------------
// Random inputs
// ---------------------------------------------------------------------------

inline BinaryMask random_mask(std::mt19937_64& rng, GridDims d, double density)
{
    std::bernoulli_distribution bit(density);
    std::vector<std::uint8_t> bits(d.size());
    for (auto& b : bits)
        b = bit(rng);
    return BinaryMask(d, std::move(bits));
}

/// Random blob: union of a few random rectangles, never empty.
inline BinaryMask random_blob(std::mt19937_64& rng, GridDims d, int pieces = 3)
{
    BinaryMask m(d);
    std::uniform_int_distribution<int> count(1, pieces);
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
        std::uniform_int_distribution<int> rows(1, d.height), cols(1, d.width);
        const int h0 = rows(rng), w0 = cols(rng);
        std::uniform_int_distribution<int> hh(1, d.height - h0 + 1), ww(1, d.width - w0 + 1);
        m = samodal::unite(m, BinaryMask::rect(d, {h0, w0}, hh(rng), ww(rng)));
    }
    return m;
}

}  // namespace oracle
