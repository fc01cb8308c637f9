// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Per-tile state shared by both blending backends.
#pragma once

#include <gemmsplat/scene.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace gemmsplat {

struct BlendParams {
    Rgb background{};
    float termination_threshold = 1e-4f; // stop a pixel once T would drop below this
    float alpha_min = 1.f / 255.f;       // alpha-skip threshold
    float alpha_max = 0.99f;
};

/// Pixel extent of one tile. The origin is the integer index of its top-left pixel.
struct TileGeometry {
    int origin_x  = 0;
    int origin_y  = 0;
    int tile_size = 16;

    int pixelCount() const { return tile_size * tile_size; }
};

/// Splat attributes fetched into a batch buffer.
struct FeatureRecord {
    Conic conic;
    Eigen::Vector2f center = Eigen::Vector2f::Zero();
    float opacity = 0.f;
    Rgb color;
    std::uint32_t index = 0;
};

inline FeatureRecord
makeFeatureRecord(const Splat2D &s, std::uint32_t index) {
    return {s.conic, s.center, s.opacity, s.color, index};
}

/// Work accounting for the power evaluation, summed over tiles.
struct KernelCounters {
    std::uint64_t pair_evaluations = 0; // (splat, pixel) power values produced
    std::uint64_t macs = 0;             // multiply-accumulates issued by the GEMM micro-kernel
    std::uint64_t scalar_flops = 0;     // floating-point ops of the scalar expansion
    std::uint64_t batches = 0;

    KernelCounters &operator+=(const KernelCounters &o) {
        pair_evaluations += o.pair_evaluations;
        macs += o.macs;
        scalar_flops += o.scalar_flops;
        batches += o.batches;
        return *this;
    }
    friend bool operator==(const KernelCounters &, const KernelCounters &) = default;
};

/// Running transmittance and color of every pixel in one tile.
class TileAccumulator {
  public:
    explicit TileAccumulator(int pixelCount) { reset(pixelCount); }

    void reset(int pixelCount) {
        color.assign(static_cast<std::size_t>(pixelCount), Rgb{});
        transmittance.assign(static_cast<std::size_t>(pixelCount), 1.f);
        done.assign(static_cast<std::size_t>(pixelCount), 0);
        active = pixelCount;
    }

    bool allDone() const { return active == 0; }

    /// One front-to-back compositing step of splat `f` at pixel `j`.
    void composite(int j, float power, const FeatureRecord &f, const BlendParams &params) {
        if (power > 0.f) {
            return;
        }
        const float alpha = std::min(params.alpha_max, f.opacity * std::exp(power));
        if (alpha < params.alpha_min) {
            return;
        }
        float &t          = transmittance[j];
        const float nextT = t * (1.f - alpha);
        if (nextT < params.termination_threshold) {
            done[j] = 1;
            --active;
            return;
        }
        Rgb &c = color[j];
        c.r += f.color.r * alpha * t;
        c.g += f.color.g * alpha * t;
        c.b += f.color.b * alpha * t;
        t = nextT;
    }

    std::vector<Rgb> color;
    std::vector<float> transmittance;
    std::vector<std::uint8_t> done;
    int active = 0;
};

/// Final per-pixel output of one tile, row-major over the tile.
struct TileImage {
    int tile_size = 0;
    std::vector<Rgb> color; // accumulated color + T * background
    std::vector<float> transmittance;

    friend bool operator==(const TileImage &, const TileImage &) = default;
};

inline TileImage
resolveTile(const TileAccumulator &acc, int tileSize, const Rgb &background) {
    TileImage out;
    out.tile_size     = tileSize;
    out.transmittance = acc.transmittance;
    out.color.resize(acc.color.size());
    for (std::size_t j = 0; j < acc.color.size(); ++j) {
        const float t = acc.transmittance[j];
        out.color[j]  = {acc.color[j].r + t * background.r, acc.color[j].g + t * background.g,
                         acc.color[j].b + t * background.b};
    }
    return out;
}

} // namespace gemmsplat
