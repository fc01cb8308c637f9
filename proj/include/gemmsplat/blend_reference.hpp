// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Scalar per-pixel blending. Ground truth for the matrix-multiply backend.
#pragma once

#include <gemmsplat/tile.hpp>

#include <span>

namespace gemmsplat {

/// -1/2 A dx^2 - B dx dy - 1/2 C dy^2.
inline float
powerRef(const Conic &conic, float dx, float dy) {
    return -0.5f * (conic.a * dx * dx + conic.c * dy * dy) - conic.b * dx * dy;
}

/// Floating-point operations per (splat, pixel) pair in the scalar path: two
/// subtractions for the offset, seven multiplies and two adds for powerRef.
inline constexpr int kScalarFlopsPerPair = 11;

/// Composites one batch of features into `acc`, splat by splat, front to back.
void compositeBatchRef(std::span<const FeatureRecord> batch, const TileGeometry &tile,
                       const BlendParams &params, TileAccumulator &acc,
                       KernelCounters *counters = nullptr);

/// Blends depth-sorted splats over one tile.
TileImage blendTileRef(std::span<const Splat2D> sorted, const TileGeometry &tile,
                       const BlendParams &params = {});

} // namespace gemmsplat
