#pragma once

// Overlay rendering to binary PPM (P6).

#include <array>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "samodal/pipeline.hpp"
#include "samodal/rng.hpp"
#include "samodal/scenegen.hpp"

namespace samodal {

struct RgbImage
{
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel
};

using Rgb = std::array<std::uint8_t, 3>;

/// Stable, saturated colour per instance id.
inline Rgb instance_color(InstanceId id)
{
    const auto h = mix64(id.value * 0x9E3779B97F4A7C15ULL + 1);
    Rgb c{static_cast<std::uint8_t>(64 + (h & 0xBF)), static_cast<std::uint8_t>(64 + ((h >> 8) & 0xBF)),
          static_cast<std::uint8_t>(64 + ((h >> 16) & 0xBF))};
    c[id.value % 3] = 255;
    return c;
}

/// Ground-truth visible regions are drawn dimmed in their instance colour;
/// predicted amodal masks are blended on top, tracked ones with a hatch so
/// the two sources are distinguishable.
inline RgbImage render_overlay(const FrameTruth& frame, std::span<const InstancePrediction> predictions, int scale = 4)
{
    const auto& dims = frame.image.dims;
    scale = std::max(scale, 1);
    std::vector<std::array<float, 3>> px(dims.size(), {24.f, 24.f, 24.f});
    for (std::size_t i = 0; i < dims.size(); ++i)
        if (const auto id = frame.image.labels[i]) {
            const auto c = instance_color(InstanceId{id});
            px[i] = {c[0] * 0.35f, c[1] * 0.35f, c[2] * 0.35f};
        }
    for (const auto& p : predictions) {
        const auto c = instance_color(p.id);
        const auto bits = p.mask.bits();
        for (std::size_t i = 0; i < bits.size() && i < px.size(); ++i) {
            if (!bits[i])
                continue;
            const auto row = i / dims.width;
            const auto col = i % dims.width;
            if (p.source == Source::Tracked && (row + col) % 2)
                continue;
            for (int ch = 0; ch < 3; ++ch)
                px[i][ch] = 0.45f * px[i][ch] + 0.55f * c[ch];
        }
    }
    RgbImage img{dims.width * scale, dims.height * scale, {}};
    img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const auto& v = px[static_cast<std::size_t>(y / scale) * dims.width + x / scale];
            auto* out = &img.rgb[(static_cast<std::size_t>(y) * img.width + x) * 3];
            for (int ch = 0; ch < 3; ++ch)
                out[ch] = static_cast<std::uint8_t>(std::clamp(v[ch], 0.f, 255.f));
        }
    return img;
}

inline void write_ppm(std::ostream& out, const RgbImage& img)
{
    out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
}

}  // namespace samodal
