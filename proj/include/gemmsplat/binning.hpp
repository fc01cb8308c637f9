// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Stages 2 and 3: duplicate each splat once per touched tile, sort the
// (tile, depth) keys and cut the sorted array into per-tile ranges.
#pragma once

#include <gemmsplat/preprocess.hpp>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace gemmsplat {

/// High 32 bits: tile id. Low 32 bits: binary32 pattern of a positive depth.
struct SortKey {
    std::uint64_t key   = 0;
    std::uint32_t value = 0; // splat index

    std::uint32_t tile() const { return static_cast<std::uint32_t>(key >> 32); }
    friend bool operator==(const SortKey &, const SortKey &) = default;
};

std::uint64_t makeSortKey(std::uint32_t tileId, float depth);

/// Half-open [start, end) into the sorted key array.
struct TileRange {
    std::uint32_t start = 0;
    std::uint32_t end   = 0;

    std::uint32_t size() const { return end - start; }
    bool empty() const { return start == end; }
    friend bool operator==(const TileRange &, const TileRange &) = default;
};

class CapacityError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// One key per (splat, touched tile) pair, splat-major, tiles row by row.
/// Throws CapacityError when the total exceeds `capacity`.
std::vector<SortKey> duplicateAndKey(std::span<const Splat2D> splats,
                                     std::span<const TouchedTiles> touched, const TileGrid &grid,
                                     std::size_t capacity);

/// Stable least-significant-digit radix sort, 8-bit digits over all 64 key bits.
void sortKeys(std::vector<SortKey> &keys);

/// One range per tile id; tiles without splats get empty ranges.
std::vector<TileRange> tileRanges(std::span<const SortKey> sorted, const TileGrid &grid);

} // namespace gemmsplat
