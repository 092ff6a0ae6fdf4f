#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>

namespace samodal {

/// 1-based frame index, t in 1..T.
using FrameIndex = int;

/// Instance identity, stable across the frames of one video.
struct InstanceId
{
    std::uint32_t value = 0;

    friend constexpr bool operator==(const InstanceId&, const InstanceId&) = default;
    friend constexpr auto operator<=>(const InstanceId&, const InstanceId&) = default;
};

inline std::string to_string(InstanceId id) { return std::to_string(id.value); }

}  // namespace samodal

template <>
struct std::hash<samodal::InstanceId>
{
    std::size_t operator()(const samodal::InstanceId& id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};
