#pragma once

// Point-prompt selection from a visible mask.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "samodal/error.hpp"
#include "samodal/mask.hpp"
#include "samodal/rng.hpp"

namespace samodal {

/// K pixel indices with their prompt labels (1 = positive).
struct PointTuple
{
    std::vector<PixelIndex> points;
    std::vector<std::uint8_t> labels;

    std::size_t size() const noexcept { return points.size(); }

    static PointTuple positive(std::vector<PixelIndex> pts)
    {
        PointTuple t{std::move(pts), {}};
        t.labels.assign(t.points.size(), 1);
        return t;
    }

    friend bool operator==(const PointTuple&, const PointTuple&) = default;
};

class SamplingStrategy
{
public:
    enum class Kind { Random, Saliency, Erosion };

    static SamplingStrategy random() { return SamplingStrategy(Kind::Random, 1); }
    static SamplingStrategy saliency() { return SamplingStrategy(Kind::Saliency, 1); }

    static SamplingStrategy erosion(int kernel)
    {
        if (kernel < 3 || kernel % 2 == 0)
            throw InvalidArgument("erosion kernel must be odd and >= 3, got " + std::to_string(kernel));
        return SamplingStrategy(Kind::Erosion, kernel);
    }

    /// "random" | "saliency" | "erosion" | "erosion:<k>" (erosion alone means k = 3).
    static SamplingStrategy parse(std::string_view s)
    {
        if (s == "random")
            return random();
        if (s == "saliency")
            return saliency();
        if (s == "erosion")
            return erosion(3);
        if (s.starts_with("erosion:")) {
            const std::string k(s.substr(8));
            std::size_t used = 0;
            int kernel = 0;
            try {
                kernel = std::stoi(k, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != k.size() || k.empty())
                throw InvalidArgument("bad erosion kernel \"" + k + "\"");
            return erosion(kernel);
        }
        throw InvalidArgument("unknown point strategy \"" + std::string(s) + "\" (random|saliency|erosion:K)");
    }

    Kind kind() const noexcept { return kind_; }
    int kernel() const noexcept { return kernel_; }

    std::string name() const
    {
        switch (kind_) {
        case Kind::Random: return "random";
        case Kind::Saliency: return "saliency";
        case Kind::Erosion: return "erosion:" + std::to_string(kernel_);
        }
        return {};
    }

    friend bool operator==(const SamplingStrategy&, const SamplingStrategy&) = default;

private:
    SamplingStrategy(Kind k, int kernel) : kind_(k), kernel_(kernel) {}

    Kind kind_;
    int kernel_;
};

/// Chebyshev distance from each set pixel to the nearest unset pixel, where
/// everything outside the grid counts as unset. Zero outside the mask.
inline std::vector<double> saliency_map(const BinaryMask& m)
{
    const auto& d = m.dims();
    const int rows = d.height;
    const int cols = d.width;
    constexpr int inf = std::numeric_limits<int>::max() / 2;
    std::vector<int> dist(d.size());
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            dist[static_cast<std::size_t>(r) * cols + c] = m.at0(r, c) ? inf : 0;

    auto get = [&](int r, int c) {
        if (r < 0 || r >= rows || c < 0 || c >= cols)
            return 0;
        return dist[static_cast<std::size_t>(r) * cols + c];
    };
    // Two-pass chamfer; unit weights on the 8-neighbourhood give the exact
    // chessboard distance.
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            int& v = dist[static_cast<std::size_t>(r) * cols + c];
            if (v == 0)
                continue;
            v = std::min({v, get(r - 1, c - 1) + 1, get(r - 1, c) + 1, get(r - 1, c + 1) + 1, get(r, c - 1) + 1});
        }
    for (int r = rows - 1; r >= 0; --r)
        for (int c = cols - 1; c >= 0; --c) {
            int& v = dist[static_cast<std::size_t>(r) * cols + c];
            if (v == 0)
                continue;
            v = std::min({v, get(r + 1, c + 1) + 1, get(r + 1, c) + 1, get(r + 1, c - 1) + 1, get(r, c + 1) + 1});
        }
    return {dist.begin(), dist.end()};
}

namespace detail {

inline std::vector<PixelIndex> draw_uniform(const std::vector<PixelIndex>& candidates, std::size_t k,
                                            std::uint64_t seed)
{
    SplitMix64 rng(seed);
    std::vector<PixelIndex> out;
    out.reserve(k);
    const std::size_t n = candidates.size();
    if (n >= k) {
        // Partial Fisher-Yates: draw order is the prompt order.
        std::vector<PixelIndex> pool = candidates;
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
    } else {
        for (std::size_t i = 0; i < k; ++i)
            out.push_back(candidates[static_cast<std::size_t>(rng.below(n))]);
    }
    return out;
}

}  // namespace detail

/// Select K positive point prompts from `mask`.
///
/// Random draws uniformly without replacement (with replacement when the
/// mask has fewer than K pixels). Erosion draws the same way from the eroded
/// mask, falling back to the full mask when erosion leaves nothing. Saliency
/// takes the K most interior pixels, ties to the smallest index, cycling when
/// the mask is smaller than K; it ignores the seed.
inline PointTuple sample_points(const BinaryMask& mask, int k, const SamplingStrategy& strategy, std::uint64_t seed)
{
    if (k < 1)
        throw InvalidArgument("sample_points: K must be >= 1, got " + std::to_string(k));
    if (mask.empty())
        throw InvalidArgument("sample_points: empty mask");
    const auto count = static_cast<std::size_t>(k);

    switch (strategy.kind()) {
    case SamplingStrategy::Kind::Random:
        return PointTuple::positive(detail::draw_uniform(mask.indices(), count, seed));
    case SamplingStrategy::Kind::Erosion: {
        auto candidates = erode(mask, strategy.kernel()).indices();
        if (candidates.empty())
            candidates = mask.indices();
        return PointTuple::positive(detail::draw_uniform(candidates, count, seed));
    }
    case SamplingStrategy::Kind::Saliency: {
        const auto scores = saliency_map(mask);
        auto ranked = mask.indices();
        std::stable_sort(ranked.begin(), ranked.end(), [&](PixelIndex a, PixelIndex b) {
            return scores[a.value - 1] > scores[b.value - 1];
        });
        std::vector<PixelIndex> out;
        out.reserve(count);
        for (std::size_t i = 0; i < count; ++i)
            out.push_back(ranked[i % ranked.size()]);
        return PointTuple::positive(std::move(out));
    }
    }
    throw InvalidArgument("sample_points: unknown strategy");
}

}  // namespace samodal
