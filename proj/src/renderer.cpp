// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include <gemmsplat/renderer.hpp>

#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>

namespace gemmsplat {

namespace {

using Clock = std::chrono::steady_clock;

double
millisecondsSince(Clock::time_point start, Clock::time_point end) {
    return std::chrono::duration<double, std::milli>(end - start).count();
}

} // namespace

void
validateConfig(const RenderConfig &config) {
    if (config.tile_size < 1) {
        throw std::invalid_argument("tile_size must be >= 1");
    }
    if (config.batch_size < 1) {
        throw std::invalid_argument("batch_size must be >= 1");
    }
    if (config.workers < 1) {
        throw std::invalid_argument("workers must be >= 1");
    }
    if (!(config.termination_threshold >= 0.f && config.termination_threshold < 1.f)) {
        throw std::invalid_argument("termination threshold must lie in [0, 1)");
    }
}

Binning
binScene(const Scene &scene, const Camera &camera, const RenderConfig &config) {
    validateConfig(config);
    validateCamera(camera);
    Binning b;
    b.grid         = TileGrid::forImage(camera.width, camera.height, config.tile_size);
    b.preprocessed = preprocessScene(scene.gaussians, camera, b.grid, config.workers,
                                     config.projection);
    b.keys = duplicateAndKey(b.preprocessed.splats, b.preprocessed.touched, b.grid,
                             config.max_duplicates);
    sortKeys(b.keys);
    b.ranges = tileRanges(b.keys, b.grid);
    return b;
}

RenderFrame
render(const Scene &scene, const Camera &camera, const RenderConfig &config) {
    validateConfig(config);
    validateCamera(camera);

    const auto start = Clock::now();
    RenderFrame frame;
    frame.width  = camera.width;
    frame.height = camera.height;
    RenderStats &stats = frame.stats;
    stats.gaussians    = scene.gaussians.size();

    const TileGrid grid = TileGrid::forImage(camera.width, camera.height, config.tile_size);
    const PreprocessResult pre =
        preprocessScene(scene.gaussians, camera, grid, config.workers, config.projection);
    stats.splats = pre.splats.size();
    const auto preprocessed = Clock::now();

    std::vector<SortKey> keys =
        duplicateAndKey(pre.splats, pre.touched, grid, config.max_duplicates);
    stats.duplicates = keys.size();
    const auto duplicated = Clock::now();

    sortKeys(keys);
    const std::vector<TileRange> ranges = tileRanges(keys, grid);
    const auto sorted = Clock::now();

    const auto pixelCount = static_cast<std::size_t>(camera.width) * camera.height;
    frame.color.assign(pixelCount, config.background);
    frame.transmittance.assign(pixelCount, 1.f);

    std::optional<PixelMatrix> pixels;
    if (config.backend == Backend::Gemm) {
        pixels = PixelMatrix::build(config.tile_size, config.reference_pixel);
    }
    PipelineConfig pc;
    pc.backend    = config.backend;
    pc.precision  = config.precision;
    pc.batch_size = config.batch_size;
    pc.prefetch   = config.prefetch;
    pc.blend.background            = config.background;
    pc.blend.termination_threshold = config.termination_threshold;

    const int tileCount = grid.tileCount();
    std::atomic<int> nextTile{0};
    std::vector<KernelCounters> workerCounters(static_cast<std::size_t>(config.workers));
    std::vector<std::size_t> workerBusy(static_cast<std::size_t>(config.workers), 0);
    std::exception_ptr failure;
    std::mutex failureMutex;

    auto work = [&](int worker) {
        try {
            TilePipeline pipeline(pc, pixels ? &*pixels : nullptr);
            KernelCounters &counters = workerCounters[static_cast<std::size_t>(worker)];
            for (int t = nextTile.fetch_add(1); t < tileCount; t = nextTile.fetch_add(1)) {
                const TileRange range = ranges[static_cast<std::size_t>(t)];
                if (range.empty()) {
                    continue; // already background
                }
                ++workerBusy[static_cast<std::size_t>(worker)];
                TileGeometry tile;
                tile.tile_size = config.tile_size;
                tile.origin_x  = (t % grid.tiles_x) * config.tile_size;
                tile.origin_y  = (t / grid.tiles_x) * config.tile_size;
                const TileImage image = pipeline.run(
                    pre.splats, std::span<const SortKey>(keys).subspan(range.start, range.size()),
                    tile, &counters);

                // Pixels of edge tiles that fall outside the frame are dropped.
                const int xEnd = std::min(tile.tile_size, camera.width - tile.origin_x);
                const int yEnd = std::min(tile.tile_size, camera.height - tile.origin_y);
                for (int py = 0; py < yEnd; ++py) {
                    const std::size_t row =
                        static_cast<std::size_t>(tile.origin_y + py) * camera.width + tile.origin_x;
                    for (int px = 0; px < xEnd; ++px) {
                        const std::size_t j = static_cast<std::size_t>(py) * tile.tile_size + px;
                        frame.color[row + px]         = image.color[j];
                        frame.transmittance[row + px] = image.transmittance[j];
                    }
                }
            }
        } catch (...) {
            std::lock_guard lock(failureMutex);
            if (!failure) {
                failure = std::current_exception();
            }
            nextTile.store(tileCount);
        }
    };

    {
        std::vector<std::jthread> threads;
        for (int w = 1; w < config.workers; ++w) {
            threads.emplace_back(work, w);
        }
        work(0);
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    for (std::size_t w = 0; w < workerCounters.size(); ++w) {
        stats.kernel += workerCounters[w];
        stats.busy_tiles += workerBusy[w];
    }
    const auto blended = Clock::now();

    stats.timings.preprocess_ms = millisecondsSince(start, preprocessed);
    stats.timings.duplicate_ms  = millisecondsSince(preprocessed, duplicated);
    stats.timings.sort_ms       = millisecondsSince(duplicated, sorted);
    stats.timings.blend_ms      = millisecondsSince(sorted, blended);
    stats.timings.total_ms      = millisecondsSince(start, Clock::now());
    return frame;
}

} // namespace gemmsplat
