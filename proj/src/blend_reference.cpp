// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include <gemmsplat/blend_reference.hpp>

namespace gemmsplat {

void
compositeBatchRef(std::span<const FeatureRecord> batch, const TileGeometry &tile,
                  const BlendParams &params, TileAccumulator &acc, KernelCounters *counters) {
    const int ts = tile.tile_size;
    std::uint64_t evaluated = 0;
    for (const FeatureRecord &f : batch) {
        if (acc.allDone()) {
            break;
        }
        for (int py = 0; py < ts; ++py) {
            const float pixelY = static_cast<float>(tile.origin_y + py) + 0.5f;
            for (int px = 0; px < ts; ++px) {
                const int j = py * ts + px;
                if (acc.done[j]) {
                    continue;
                }
                const float pixelX = static_cast<float>(tile.origin_x + px) + 0.5f;
                const float power  = powerRef(f.conic, f.center.x() - pixelX, f.center.y() - pixelY);
                ++evaluated;
                acc.composite(j, power, f, params);
            }
        }
    }
    if (counters) {
        counters->pair_evaluations += evaluated;
        counters->scalar_flops += evaluated * kScalarFlopsPerPair;
        ++counters->batches;
    }
}

TileImage
blendTileRef(std::span<const Splat2D> sorted, const TileGeometry &tile, const BlendParams &params) {
    std::vector<FeatureRecord> features;
    features.reserve(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        features.push_back(makeFeatureRecord(sorted[i], static_cast<std::uint32_t>(i)));
    }
    TileAccumulator acc(tile.pixelCount());
    compositeBatchRef(features, tile, params, acc);
    return resolveTile(acc, tile.tile_size, params.background);
}

} // namespace gemmsplat
