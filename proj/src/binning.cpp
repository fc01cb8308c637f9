// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include <gemmsplat/binning.hpp>

#include <array>
#include <bit>
#include <cassert>
#include <string>

namespace gemmsplat {

std::uint64_t
makeSortKey(std::uint32_t tileId, float depth) {
    assert(depth > 0.f);
    return (static_cast<std::uint64_t>(tileId) << 32) | std::bit_cast<std::uint32_t>(depth);
}

std::vector<SortKey>
duplicateAndKey(std::span<const Splat2D> splats, std::span<const TouchedTiles> touched,
                const TileGrid &grid, std::size_t capacity) {
    if (splats.size() != touched.size()) {
        throw std::invalid_argument("splats and touched tiles differ in length");
    }
    std::size_t total = 0;
    for (const auto &t : touched) {
        if (!t.empty() &&
            (t.tx_min < 0 || t.ty_min < 0 || t.tx_max >= grid.tiles_x || t.ty_max >= grid.tiles_y)) {
            throw std::invalid_argument("touched tile rectangle outside the grid");
        }
        total += t.count();
        if (total > capacity) {
            throw CapacityError("duplication count exceeds capacity of " +
                                std::to_string(capacity) + " keys");
        }
    }

    std::vector<SortKey> keys;
    keys.reserve(total);
    for (std::size_t i = 0; i < splats.size(); ++i) {
        const TouchedTiles &t = touched[i];
        for (int ty = t.ty_min; ty <= t.ty_max; ++ty) {
            for (int tx = t.tx_min; tx <= t.tx_max; ++tx) {
                keys.push_back({makeSortKey(grid.tileId(tx, ty), splats[i].depth),
                                static_cast<std::uint32_t>(i)});
            }
        }
    }
    return keys;
}

void
sortKeys(std::vector<SortKey> &keys) {
    if (keys.size() < 2) {
        return;
    }
    std::vector<SortKey> scratch(keys.size());
    std::vector<SortKey> *src = &keys;
    std::vector<SortKey> *dst = &scratch;

    for (int pass = 0; pass < 8; ++pass) {
        const int shift = pass * 8;
        std::array<std::size_t, 257> offsets{};
        for (const SortKey &k : *src) {
            ++offsets[((k.key >> shift) & 0xFF) + 1];
        }
        // Every key shares this digit: the pass would be the identity permutation.
        bool trivial = false;
        for (std::size_t d = 1; d <= 256; ++d) {
            if (offsets[d] == src->size()) {
                trivial = true;
                break;
            }
        }
        if (trivial) {
            continue;
        }
        for (std::size_t d = 1; d <= 256; ++d) {
            offsets[d] += offsets[d - 1];
        }
        for (const SortKey &k : *src) {
            (*dst)[offsets[(k.key >> shift) & 0xFF]++] = k;
        }
        std::swap(src, dst);
    }
    if (src != &keys) {
        keys.swap(scratch);
    }
}

std::vector<TileRange>
tileRanges(std::span<const SortKey> sorted, const TileGrid &grid) {
    const auto tileCount = static_cast<std::size_t>(grid.tileCount());
    std::vector<TileRange> ranges(tileCount);
    const auto n = static_cast<std::uint32_t>(sorted.size());
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::uint32_t tile = sorted[i].tile();
        if (tile >= tileCount) {
            throw std::invalid_argument("sort key references tile outside the grid");
        }
        if (i == 0 || sorted[i - 1].tile() != tile) {
            ranges[tile].start = i;
        }
        if (i + 1 == n || sorted[i + 1].tile() != tile) {
            ranges[tile].end = i + 1;
        }
    }
    return ranges;
}

} // namespace gemmsplat
