// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Three-stage batch pipeline for one tile:
//
//   Stage 1  load the batch's splat indices and fetch their features
//   Stage 2  build the Gaussian matrix (GEMM backend only)
//   Stage 3  multiply and composite, or composite directly (reference backend)
//
// Indices, features and the Gaussian matrix live in two buffer slots. With
// prefetching on, a producer thread runs Stage 1 for batch n+1 into the idle
// slot while the caller runs Stages 2-3 for batch n. Output is bit-identical
// to running the stages back to back.
#pragma once

#include <gemmsplat/binning.hpp>
#include <gemmsplat/blend_gemm.hpp>
#include <gemmsplat/blend_reference.hpp>

#include <array>
#include <atomic>
#include <memory>
#include <semaphore>
#include <span>
#include <thread>
#include <vector>

namespace gemmsplat {

enum class Backend { Reference, Gemm };

struct PipelineConfig {
    Backend backend     = Backend::Gemm;
    Precision precision = Precision::Full;
    int batch_size      = 256;
    bool prefetch       = true;
    BlendParams blend;
};

/// One buffer slot of the double buffer.
struct BatchSlot {
    std::vector<std::uint32_t> indices;
    std::vector<FeatureRecord> features;
    std::vector<float> gaussians; // packed M_g
};

/// Per-tile trace of the last run, for tests and reporting.
struct PipelineTrace {
    int batches_total    = 0; // batches the tile's list splits into
    int batches_consumed = 0; // batches that reached Stage 3
    int batches_fetched  = 0; // batches Stage 1 completed, including discarded prefetches
    bool terminated_early = false;
};

/// Runs tiles through the staged pipeline. Not thread-safe: use one instance
/// per worker. `pixels` must outlive the pipeline and is only needed for the
/// GEMM backend.
class TilePipeline {
  public:
    TilePipeline(const PipelineConfig &config, const PixelMatrix *pixels);
    ~TilePipeline();

    TilePipeline(const TilePipeline &)            = delete;
    TilePipeline &operator=(const TilePipeline &) = delete;

    /// Blends the tile whose depth-sorted keys are `tileKeys`; key payloads
    /// index into `splats`.
    TileImage run(std::span<const Splat2D> splats, std::span<const SortKey> tileKeys,
                  const TileGeometry &tile, KernelCounters *counters = nullptr);

    const PipelineTrace &lastTrace() const { return mTrace; }
    const PipelineConfig &config() const { return mConfig; }

  private:
    struct Job {
        std::span<const Splat2D> splats;
        std::span<const SortKey> keys;
        int batches = 0;
    };

    void fetch(int batch, BatchSlot &slot) const;
    void consume(BatchSlot &slot, const TileGeometry &tile, TileAccumulator &acc,
                 KernelCounters *counters);
    void producerLoop(std::stop_token stop);

    PipelineConfig mConfig;
    const PixelMatrix *mPixels;
    std::array<BatchSlot, 2> mSlots;
    std::vector<float> mPower;
    TileAccumulator mAcc{0};
    PipelineTrace mTrace;

    // Producer state; only used when prefetching.
    Job mJob;
    std::atomic<bool> mCancel{false};
    std::atomic<int> mFetched{0};
    std::binary_semaphore mJobReady{0};
    std::binary_semaphore mJobDone{0};
    std::array<std::binary_semaphore, 2> mSlotFree{std::binary_semaphore{1},
                                                   std::binary_semaphore{1}};
    std::array<std::binary_semaphore, 2> mSlotFilled{std::binary_semaphore{0},
                                                     std::binary_semaphore{0}};
    std::jthread mProducer;
};

/// Sequential or staged execution of one tile; convenience wrapper.
TileImage stagedTilePipeline(std::span<const Splat2D> splats, std::span<const SortKey> tileKeys,
                             const TileGeometry &tile, const PipelineConfig &config,
                             const PixelMatrix *pixels, KernelCounters *counters = nullptr);

} // namespace gemmsplat
