// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include <gemmsplat/pipeline.hpp>

#include <stdexcept>

namespace gemmsplat {

TilePipeline::TilePipeline(const PipelineConfig &config, const PixelMatrix *pixels)
    : mConfig(config), mPixels(pixels) {
    if (config.batch_size < 1) {
        throw std::invalid_argument("batch size must be >= 1");
    }
    if (config.backend == Backend::Gemm && pixels == nullptr) {
        throw std::invalid_argument("GEMM backend needs a pixel matrix");
    }
    if (config.prefetch) {
        mProducer = std::jthread([this](std::stop_token stop) { producerLoop(stop); });
    }
}

TilePipeline::~TilePipeline() {
    if (mProducer.joinable()) {
        mProducer.request_stop();
        mJobReady.release();
        mProducer.join();
    }
}

void
TilePipeline::fetch(int batch, BatchSlot &slot) const {
    const auto size  = static_cast<std::size_t>(mConfig.batch_size);
    const auto start = static_cast<std::size_t>(batch) * size;
    const auto end   = std::min(mJob.keys.size(), start + size);
    slot.indices.clear();
    slot.features.clear();
    for (std::size_t i = start; i < end; ++i) {
        slot.indices.push_back(mJob.keys[i].value);
    }
    for (std::uint32_t index : slot.indices) {
        slot.features.push_back(makeFeatureRecord(mJob.splats[index], index));
    }
}

void
TilePipeline::consume(BatchSlot &slot, const TileGeometry &tile, TileAccumulator &acc,
                      KernelCounters *counters) {
    if (mConfig.backend == Backend::Reference) {
        compositeBatchRef(slot.features, tile, mConfig.blend, acc, counters);
        return;
    }
    buildGaussianMatrix(slot.features, tile, *mPixels, slot.gaussians);
    compositeBatchGemm(slot.features, slot.gaussians, *mPixels, mConfig.precision, mConfig.blend,
                       mPower, acc, counters);
}

void
TilePipeline::producerLoop(std::stop_token stop) {
    while (true) {
        mJobReady.acquire();
        if (stop.stop_requested()) {
            return;
        }
        for (int n = 0; n < mJob.batches; ++n) {
            const int s = n % 2;
            mSlotFree[s].acquire();
            if (mCancel.load(std::memory_order_acquire)) {
                mSlotFree[s].release();
                break;
            }
            fetch(n, mSlots[s]);
            mFetched.fetch_add(1, std::memory_order_relaxed);
            mSlotFilled[s].release();
        }
        mJobDone.release();
    }
}

TileImage
TilePipeline::run(std::span<const Splat2D> splats, std::span<const SortKey> tileKeys,
                  const TileGeometry &tile, KernelCounters *counters) {
    if (mConfig.backend == Backend::Gemm && tile.tile_size != mPixels->tileSize()) {
        throw std::invalid_argument("pixel matrix built for a different tile size");
    }
    const auto size = static_cast<std::size_t>(mConfig.batch_size);
    const int batches = static_cast<int>((tileKeys.size() + size - 1) / size);

    mAcc.reset(tile.pixelCount());
    mTrace = {};
    mTrace.batches_total = batches;
    mJob = {splats, tileKeys, batches};

    if (!mConfig.prefetch || batches <= 1) {
        for (int n = 0; n < batches; ++n) {
            BatchSlot &slot = mSlots[n % 2];
            fetch(n, slot);
            ++mTrace.batches_fetched;
            consume(slot, tile, mAcc, counters);
            ++mTrace.batches_consumed;
            if (mAcc.allDone() && n + 1 < batches) {
                mTrace.terminated_early = true;
                break;
            }
        }
        return resolveTile(mAcc, tile.tile_size, mConfig.blend.background);
    }

    mCancel.store(false, std::memory_order_release);
    mFetched.store(0, std::memory_order_relaxed);
    mJobReady.release();
    for (int n = 0; n < batches; ++n) {
        const int s = n % 2;
        mSlotFilled[s].acquire();
        consume(mSlots[s], tile, mAcc, counters);
        ++mTrace.batches_consumed;
        const bool stop = mAcc.allDone() && n + 1 < batches;
        if (stop) {
            mCancel.store(true, std::memory_order_release);
            mTrace.terminated_early = true;
        }
        mSlotFree[s].release();
        if (stop) {
            break;
        }
    }
    mJobDone.acquire();
    // Discard prefetched batches that were never consumed.
    for (int s = 0; s < 2; ++s) {
        if (mSlotFilled[s].try_acquire()) {
            mSlotFree[s].release();
        }
    }
    mTrace.batches_fetched = mFetched.load(std::memory_order_relaxed);
    return resolveTile(mAcc, tile.tile_size, mConfig.blend.background);
}

TileImage
stagedTilePipeline(std::span<const Splat2D> splats, std::span<const SortKey> tileKeys,
                   const TileGeometry &tile, const PipelineConfig &config,
                   const PixelMatrix *pixels, KernelCounters *counters) {
    TilePipeline pipeline(config, pixels);
    return pipeline.run(splats, tileKeys, tile, counters);
}

} // namespace gemmsplat
