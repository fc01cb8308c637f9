// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end frame rendering: preprocess, duplicate, sort, blend.
#pragma once

#include <gemmsplat/binning.hpp>
#include <gemmsplat/pipeline.hpp>
#include <gemmsplat/preprocess.hpp>

#include <cstdint>
#include <vector>

namespace gemmsplat {

struct RenderConfig {
    Backend backend     = Backend::Gemm;
    Precision precision = Precision::Full;
    ReferencePixel reference_pixel = ReferencePixel::TopLeft;
    int tile_size  = 16;
    int batch_size = 256;
    float termination_threshold = 1e-4f;
    Rgb background{};
    int workers   = 1;
    bool prefetch = true;
    std::size_t max_duplicates = std::size_t{1} << 26;
    ProjectionParams projection;
};

/// Throws std::invalid_argument when a RenderConfig invariant does not hold.
void validateConfig(const RenderConfig &config);

struct StageTimings {
    double preprocess_ms = 0.0;
    double duplicate_ms  = 0.0;
    double sort_ms       = 0.0;
    double blend_ms      = 0.0;
    double total_ms      = 0.0;

    double stageSum() const { return preprocess_ms + duplicate_ms + sort_ms + blend_ms; }
};

struct RenderStats {
    std::size_t gaussians   = 0;
    std::size_t splats      = 0; // retained after culling
    std::size_t duplicates  = 0; // sort keys
    std::size_t busy_tiles  = 0; // tiles with a non-empty range
    KernelCounters kernel;
    StageTimings timings;
};

struct RenderFrame {
    int width  = 0;
    int height = 0;
    std::vector<Rgb> color;           // linear, row-major
    std::vector<float> transmittance; // final T per pixel
    RenderStats stats;

    const Rgb &pixel(int x, int y) const { return color[static_cast<std::size_t>(y) * width + x]; }
};

RenderFrame render(const Scene &scene, const Camera &camera, const RenderConfig &config);

/// Frame-wide intermediate products, exposed for inspection.
struct Binning {
    TileGrid grid;
    PreprocessResult preprocessed;
    std::vector<SortKey> keys; // sorted
    std::vector<TileRange> ranges;
};

Binning binScene(const Scene &scene, const Camera &camera, const RenderConfig &config);

} // namespace gemmsplat
