#pragma once

// Dense binary masks over an H x W grid plus the set algebra, morphology and
// translation used throughout the pipeline. Pixel indices are 1-based and
// row-major: index = (h - 1) * W + w for h in 1..H, w in 1..W.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "samodal/error.hpp"

namespace samodal {

struct GridDims
{
    int height = 0;
    int width = 0;

    constexpr std::size_t size() const noexcept
    {
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    }

    constexpr bool valid() const noexcept { return height >= 1 && width >= 1; }

    friend constexpr bool operator==(const GridDims&, const GridDims&) = default;
};

inline std::string to_string(const GridDims& d)
{
    return std::to_string(d.height) + "x" + std::to_string(d.width);
}

inline void require_valid(const GridDims& d)
{
    if (!d.valid())
        throw InvalidArgument("grid dims must be positive, got " + to_string(d));
}

/// 1-based (row, column) position on the grid.
struct Coord
{
    int h = 0;
    int w = 0;

    friend constexpr bool operator==(const Coord&, const Coord&) = default;
};

/// 1-based row-major pixel index in {1, ..., H*W}.
struct PixelIndex
{
    std::size_t value = 0;

    friend constexpr bool operator==(const PixelIndex&, const PixelIndex&) = default;
    friend constexpr auto operator<=>(const PixelIndex&, const PixelIndex&) = default;
};

inline bool in_grid(const GridDims& d, PixelIndex p) noexcept
{
    return p.value >= 1 && p.value <= d.size();
}

inline bool in_grid(const GridDims& d, Coord c) noexcept
{
    return c.h >= 1 && c.h <= d.height && c.w >= 1 && c.w <= d.width;
}

inline Coord to_coord(const GridDims& d, PixelIndex p)
{
    if (!in_grid(d, p))
        throw InvalidArgument("pixel index " + std::to_string(p.value) + " outside " + to_string(d));
    const std::size_t zero_based = p.value - 1;
    return {static_cast<int>(zero_based / d.width) + 1, static_cast<int>(zero_based % d.width) + 1};
}

inline PixelIndex to_index(const GridDims& d, Coord c)
{
    if (!in_grid(d, c))
        throw InvalidArgument("coordinate (" + std::to_string(c.h) + ", " + std::to_string(c.w) +
                              ") outside " + to_string(d));
    return {static_cast<std::size_t>(c.h - 1) * d.width + static_cast<std::size_t>(c.w)};
}

/// Clamp a coordinate onto the grid. Returns true when clamping changed it.
inline bool clamp_to_grid(const GridDims& d, Coord& c) noexcept
{
    const Coord before = c;
    c.h = std::clamp(c.h, 1, d.height);
    c.w = std::clamp(c.w, 1, d.width);
    return !(c == before);
}

/// Real-valued 2D offset; dh positive is down, dw positive is right.
struct Displacement
{
    double dh = 0.0;
    double dw = 0.0;

    friend constexpr bool operator==(const Displacement&, const Displacement&) = default;
};

/// Round half away from zero. This is the single rounding rule for every
/// real-to-pixel conversion (mask shifts, scene object positions).
inline int round_pixel(double v)
{
    if (!std::isfinite(v))
        throw InvalidArgument("non-finite pixel offset");
    const double r = std::round(v);
    if (r > std::numeric_limits<int>::max() / 2 || r < std::numeric_limits<int>::min() / 2)
        throw InvalidArgument("pixel offset out of range");
    return static_cast<int>(r);
}

class BinaryMask
{
public:
    BinaryMask() = default;

    explicit BinaryMask(GridDims dims) : dims_(dims)
    {
        require_valid(dims);
        bits_.assign(dims.size(), 0);
    }

    /// Bits in row-major order; any nonzero byte counts as set.
    BinaryMask(GridDims dims, std::vector<std::uint8_t> bits) : dims_(dims), bits_(std::move(bits))
    {
        require_valid(dims);
        if (bits_.size() != dims.size())
            throw DimensionMismatch("bit count " + std::to_string(bits_.size()) + " != " +
                                    std::to_string(dims.size()) + " for " + to_string(dims));
        for (auto& b : bits_)
            b = b ? 1 : 0;
    }

    static BinaryMask full(GridDims dims)
    {
        BinaryMask m(dims);
        std::fill(m.bits_.begin(), m.bits_.end(), std::uint8_t{1});
        return m;
    }

    static BinaryMask from_indices(GridDims dims, std::span<const PixelIndex> set)
    {
        BinaryMask m(dims);
        for (auto p : set)
            m.set(p);
        return m;
    }

    /// Axis-aligned block, 1-based inclusive top-left, clipped to the grid.
    static BinaryMask rect(GridDims dims, Coord top_left, int rows, int cols)
    {
        BinaryMask m(dims);
        for (int h = top_left.h; h < top_left.h + rows; ++h)
            for (int w = top_left.w; w < top_left.w + cols; ++w)
                if (in_grid(dims, Coord{h, w}))
                    m.set(Coord{h, w});
        return m;
    }

    const GridDims& dims() const noexcept { return dims_; }
    std::span<const std::uint8_t> bits() const noexcept { return bits_; }

    bool test(PixelIndex p) const
    {
        if (!in_grid(dims_, p))
            throw InvalidArgument("pixel index " + std::to_string(p.value) + " outside " + to_string(dims_));
        return bits_[p.value - 1] != 0;
    }

    bool test(Coord c) const { return test(to_index(dims_, c)); }

    /// Unchecked 0-based access for inner loops.
    bool at0(int row, int col) const noexcept
    {
        return bits_[static_cast<std::size_t>(row) * dims_.width + col] != 0;
    }

    void set(PixelIndex p, bool value = true)
    {
        if (!in_grid(dims_, p))
            throw InvalidArgument("pixel index " + std::to_string(p.value) + " outside " + to_string(dims_));
        bits_[p.value - 1] = value ? 1 : 0;
    }

    void set(Coord c, bool value = true) { set(to_index(dims_, c), value); }

    std::size_t area() const noexcept
    {
        return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
    }

    bool empty() const noexcept { return std::find(bits_.begin(), bits_.end(), std::uint8_t{1}) == bits_.end(); }

    /// Set pixels in increasing index order.
    std::vector<PixelIndex> indices() const
    {
        std::vector<PixelIndex> out;
        for (std::size_t i = 0; i < bits_.size(); ++i)
            if (bits_[i])
                out.push_back({i + 1});
        return out;
    }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    GridDims dims_;
    std::vector<std::uint8_t> bits_;
};

inline std::size_t area(const BinaryMask& m) noexcept { return m.area(); }

namespace detail {

inline void require_same_dims(const BinaryMask& a, const BinaryMask& b, const char* op)
{
    if (!(a.dims() == b.dims()))
        throw DimensionMismatch(std::string(op) + ": " + to_string(a.dims()) + " vs " + to_string(b.dims()));
}

template <typename Fn>
BinaryMask combine(const BinaryMask& a, const BinaryMask& b, const char* op, Fn fn)
{
    require_same_dims(a, b, op);
    std::vector<std::uint8_t> out(a.dims().size());
    auto x = a.bits();
    auto y = b.bits();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = fn(x[i], y[i]);
    return BinaryMask(a.dims(), std::move(out));
}

// Counts of (|a & b|, |a | b|) without materialising either mask.
inline std::pair<std::size_t, std::size_t> overlap_counts(const BinaryMask& a, const BinaryMask& b)
{
    require_same_dims(a, b, "overlap");
    std::size_t inter = 0;
    std::size_t uni = 0;
    auto x = a.bits();
    auto y = b.bits();
    for (std::size_t i = 0; i < x.size(); ++i) {
        inter += x[i] & y[i];
        uni += x[i] | y[i];
    }
    return {inter, uni};
}

}  // namespace detail

inline BinaryMask intersect(const BinaryMask& a, const BinaryMask& b)
{
    return detail::combine(a, b, "intersect", [](auto x, auto y) { return std::uint8_t(x & y); });
}

inline BinaryMask unite(const BinaryMask& a, const BinaryMask& b)
{
    return detail::combine(a, b, "unite", [](auto x, auto y) { return std::uint8_t(x | y); });
}

/// a AND NOT b
inline BinaryMask subtract(const BinaryMask& a, const BinaryMask& b)
{
    return detail::combine(a, b, "subtract", [](auto x, auto y) { return std::uint8_t(x & !y); });
}

/// a is contained in b.
inline bool is_subset(const BinaryMask& a, const BinaryMask& b)
{
    detail::require_same_dims(a, b, "is_subset");
    auto x = a.bits();
    auto y = b.bits();
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] && !y[i])
            return false;
    return true;
}

/// Intersection over union. Two empty masks have IoU 1.
inline double iou(const BinaryMask& a, const BinaryMask& b)
{
    const auto [inter, uni] = detail::overlap_counts(a, b);
    if (uni == 0)
        return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace detail {

// Sliding-window pass along one axis. For erosion a cell survives iff the
// whole window is in bounds and set; for dilation iff any in-bounds cell of
// the window is set.
inline std::vector<std::uint8_t> window_pass(const std::vector<std::uint8_t>& in, int rows, int cols, int radius,
                                             bool along_rows, bool erode)
{
    std::vector<std::uint8_t> out(in.size(), 0);
    const int lines = along_rows ? rows : cols;
    const int len = along_rows ? cols : rows;
    std::vector<int> prefix(static_cast<std::size_t>(len) + 1);
    for (int line = 0; line < lines; ++line) {
        auto idx = [&](int k) {
            return along_rows ? static_cast<std::size_t>(line) * cols + k
                              : static_cast<std::size_t>(k) * cols + line;
        };
        prefix[0] = 0;
        for (int k = 0; k < len; ++k)
            prefix[k + 1] = prefix[k] + in[idx(k)];
        for (int k = 0; k < len; ++k) {
            const int lo = k - radius;
            const int hi = k + radius;
            if (erode) {
                if (lo < 0 || hi >= len)
                    continue;
                out[idx(k)] = (prefix[hi + 1] - prefix[lo]) == 2 * radius + 1;
            } else {
                const int a = std::max(lo, 0);
                const int b = std::min(hi, len - 1);
                out[idx(k)] = (prefix[b + 1] - prefix[a]) > 0;
            }
        }
    }
    return out;
}

inline BinaryMask square_filter(const BinaryMask& m, int kernel, bool erode, const char* op)
{
    if (kernel < 1 || kernel % 2 == 0)
        throw InvalidArgument(std::string(op) + ": kernel must be odd and >= 1, got " + std::to_string(kernel));
    if (kernel == 1)
        return m;
    const auto& d = m.dims();
    const int r = kernel / 2;
    std::vector<std::uint8_t> bits(m.bits().begin(), m.bits().end());
    bits = window_pass(bits, d.height, d.width, r, true, erode);
    bits = window_pass(bits, d.height, d.width, r, false, erode);
    return BinaryMask(d, std::move(bits));
}

}  // namespace detail

/// Binary erosion with a k x k square window; out-of-grid cells count as
/// unset, so pixels within k/2 of the border always erode away.
inline BinaryMask erode(const BinaryMask& m, int kernel)
{
    return detail::square_filter(m, kernel, true, "erode");
}

/// Binary dilation with a k x k square window, clipped to the grid.
inline BinaryMask dilate(const BinaryMask& m, int kernel)
{
    return detail::square_filter(m, kernel, false, "dilate");
}

/// Integer offsets a displacement maps to (round half away from zero).
inline Coord pixel_offset(const Displacement& d) { return {round_pixel(d.dh), round_pixel(d.dw)}; }

/// Translate every set pixel by the rounded displacement; pixels leaving the
/// grid are dropped.
inline BinaryMask shift(const BinaryMask& m, const Displacement& d)
{
    const Coord off = pixel_offset(d);
    if (off.h == 0 && off.w == 0)
        return m;
    const auto& dims = m.dims();
    std::vector<std::uint8_t> bits(dims.size(), 0);
    for (int row = 0; row < dims.height; ++row) {
        const int to_row = row + off.h;
        if (to_row < 0 || to_row >= dims.height)
            continue;
        for (int col = 0; col < dims.width; ++col) {
            const int to_col = col + off.w;
            if (to_col < 0 || to_col >= dims.width || !m.at0(row, col))
                continue;
            bits[static_cast<std::size_t>(to_row) * dims.width + to_col] = 1;
        }
    }
    return BinaryMask(dims, std::move(bits));
}

/// r = 1 - |visible & amodal| / |amodal|.
inline double occlusion_rate(const BinaryMask& visible, const BinaryMask& amodal)
{
    detail::require_same_dims(visible, amodal, "occlusion_rate");
    const std::size_t total = amodal.area();
    if (total == 0)
        throw InvalidArgument("occlusion_rate: empty amodal mask");
    const std::size_t seen = detail::overlap_counts(visible, amodal).first;
    return 1.0 - static_cast<double>(seen) / static_cast<double>(total);
}

}  // namespace samodal
