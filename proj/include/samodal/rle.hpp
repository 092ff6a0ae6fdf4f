#pragma once

// Run-length codec for BinaryMask. Counts alternate zeros/ones in row-major
// order and always start with a (possibly empty) run of zeros.
//
// Text form: "H W c0 c1 c2 ..." (decimal, single spaces).

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "samodal/mask.hpp"

namespace samodal {

struct RleMask
{
    GridDims dims;
    std::vector<std::int64_t> counts;

    friend bool operator==(const RleMask&, const RleMask&) = default;
};

inline RleMask rle_encode(const BinaryMask& m)
{
    RleMask r{m.dims(), {}};
    std::uint8_t current = 0;
    std::int64_t run = 0;
    for (auto b : m.bits()) {
        if (b != current) {
            r.counts.push_back(run);
            run = 0;
            current = b;
        }
        ++run;
    }
    r.counts.push_back(run);
    return r;
}

inline BinaryMask rle_decode(const RleMask& r)
{
    require_valid(r.dims);
    const auto total = static_cast<std::int64_t>(r.dims.size());
    std::vector<std::uint8_t> bits;
    bits.reserve(r.dims.size());
    std::int64_t sum = 0;
    std::uint8_t value = 0;
    for (auto c : r.counts) {
        if (c < 0)
            throw InvalidArgument("rle: negative run length " + std::to_string(c));
        sum += c;
        if (sum > total)
            throw InvalidArgument("rle: runs exceed " + std::to_string(total) + " pixels");
        bits.insert(bits.end(), static_cast<std::size_t>(c), value);
        value ^= 1;
    }
    if (sum != total)
        throw InvalidArgument("rle: runs sum to " + std::to_string(sum) + ", expected " + std::to_string(total));
    return BinaryMask(r.dims, std::move(bits));
}

inline std::string to_text(const RleMask& r)
{
    std::string out = std::to_string(r.dims.height) + " " + std::to_string(r.dims.width);
    for (auto c : r.counts) {
        out += ' ';
        out += std::to_string(c);
    }
    return out;
}

inline RleMask parse_rle(std::string_view text)
{
    std::vector<std::int64_t> numbers;
    const char* p = text.data();
    const char* end = text.data() + text.size();
    while (p < end) {
        while (p < end && *p == ' ')
            ++p;
        if (p == end)
            break;
        std::int64_t v = 0;
        auto [next, ec] = std::from_chars(p, end, v);
        if (ec != std::errc() || (next < end && *next != ' '))
            throw InvalidArgument("rle: bad token in \"" + std::string(text.substr(0, 40)) + "\"");
        numbers.push_back(v);
        p = next;
    }
    if (numbers.size() < 3)
        throw InvalidArgument("rle: expected \"H W c0 ...\"");
    if (numbers[0] < 1 || numbers[1] < 1 || numbers[0] > INT32_MAX || numbers[1] > INT32_MAX)
        throw InvalidArgument("rle: bad dims");
    RleMask r{{static_cast<int>(numbers[0]), static_cast<int>(numbers[1])},
              {numbers.begin() + 2, numbers.end()}};
    return r;
}

inline std::string mask_to_text(const BinaryMask& m) { return to_text(rle_encode(m)); }

inline BinaryMask mask_from_text(std::string_view text) { return rle_decode(parse_rle(text)); }

}  // namespace samodal
