// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include <gemmsplat/blend_gemm.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace gemmsplat {

float
roundToHalf(float value) {
    if (!std::isfinite(value)) {
        return value;
    }
    const float magnitude = std::fabs(value);
    if (magnitude >= 65520.f) { // halfway between 65504 and the next binade
        return std::copysign(INFINITY, value);
    }
    if (magnitude < 6.103515625e-05f) { // below 2^-14: fixed quantum of 2^-24
        return std::nearbyint(value * 16777216.f) / 16777216.f;
    }
    // Normal range: drop 13 mantissa bits with round-to-nearest-even.
    std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
    bits += 0x0FFFu + ((bits >> 13) & 1u);
    bits &= ~0x1FFFu;
    return std::bit_cast<float>(bits);
}

namespace {

int
roundUp(int value, int multiple) {
    return (value + multiple - 1) / multiple * multiple;
}

// c[16 x 8] = a[16 x 8] * b[8 x 8]; a has row stride kPaddedDim, b and c have
// row stride ldb / ldc.
inline void
microKernel(const float *a, const float *b, int ldb, float *c, int ldc) {
    float acc[kBlockRows][kBlockCols] = {};
    for (int k = 0; k < kPaddedDim; ++k) {
        const float *bk = b + static_cast<std::ptrdiff_t>(k) * ldb;
        for (int i = 0; i < kBlockRows; ++i) {
            const float aik = a[i * kPaddedDim + k];
            for (int j = 0; j < kBlockCols; ++j) {
                acc[i][j] += aik * bk[j];
            }
        }
    }
    for (int i = 0; i < kBlockRows; ++i) {
        float *ci = c + static_cast<std::ptrdiff_t>(i) * ldc;
        for (int j = 0; j < kBlockCols; ++j) {
            ci[j] = acc[i][j];
        }
    }
}

void
blockedProduct(const float *a, int rows, const float *b, int cols, float *c,
               KernelCounters *counters) {
    // Column blocks outside so each 8 x 8 slice of b stays hot across row blocks.
    for (int j0 = 0; j0 < cols; j0 += kBlockCols) {
        for (int i0 = 0; i0 < rows; i0 += kBlockRows) {
            microKernel(a + static_cast<std::ptrdiff_t>(i0) * kPaddedDim, b + j0, cols,
                        c + static_cast<std::ptrdiff_t>(i0) * cols + j0, cols);
        }
    }
    if (counters) {
        const auto blocks = static_cast<std::uint64_t>(rows / kBlockRows) * (cols / kBlockCols);
        counters->macs += blocks * kBlockRows * kBlockCols * kPaddedDim;
        counters->pair_evaluations += static_cast<std::uint64_t>(rows) * cols;
    }
}

} // namespace

PixelMatrix
PixelMatrix::build(int tileSize, ReferencePixel reference) {
    if (tileSize < 1) {
        throw std::invalid_argument("tile_size must be >= 1");
    }
    PixelMatrix m;
    m.mTileSize        = tileSize;
    m.mPaddedColumns   = roundUp(tileSize * tileSize, kBlockCols);
    m.mReference       = reference;
    m.mReferenceOffset = reference == ReferencePixel::TopLeft ? 0.5 : tileSize / 2.0;
    m.mFull.assign(static_cast<std::size_t>(kPaddedDim) * m.mPaddedColumns, 0.f);

    const auto cols = static_cast<std::size_t>(m.mPaddedColumns);
    for (int py = 0; py < tileSize; ++py) {
        for (int px = 0; px < tileSize; ++px) {
            const std::size_t j = static_cast<std::size_t>(py) * tileSize + px;
            const double u      = px + 0.5 - m.mReferenceOffset;
            const double v      = py + 0.5 - m.mReferenceOffset;
            m.mFull[0 * cols + j] = static_cast<float>(u * u);
            m.mFull[1 * cols + j] = static_cast<float>(v * v);
            m.mFull[2 * cols + j] = static_cast<float>(u * v);
            m.mFull[3 * cols + j] = static_cast<float>(u);
            m.mFull[4 * cols + j] = static_cast<float>(v);
            m.mFull[5 * cols + j] = 1.f;
        }
    }
    m.mHalf.resize(m.mFull.size());
    for (std::size_t i = 0; i < m.mFull.size(); ++i) {
        m.mHalf[i] = roundToHalf(m.mFull[i]);
    }
    return m;
}

Matrix
PixelMatrix::unpadded() const {
    Matrix m(kVectorDim, pixelCount());
    for (int k = 0; k < kVectorDim; ++k) {
        for (int j = 0; j < pixelCount(); ++j) {
            m(k, j) = at(k, j);
        }
    }
    return m;
}

GaussianVector
buildGaussianVector(const Conic &conic, double offsetX, double offsetY) {
    const double a = conic.a, b = conic.b, c = conic.c;
    const double h = offsetX, k = offsetY;
    return {
        static_cast<float>(-0.5 * a),
        static_cast<float>(-0.5 * c),
        static_cast<float>(-b),
        static_cast<float>(-a * h - b * k),
        static_cast<float>(-c * k - b * h),
        static_cast<float>(-0.5 * a * h * h - 0.5 * c * k * k - b * h * k),
    };
}

void
packGaussianRow(const FeatureRecord &f, const TileGeometry &tile, const PixelMatrix &pixels,
                float *row) {
    const double refX = tile.origin_x + pixels.referenceX();
    const double refY = tile.origin_y + pixels.referenceY();
    const GaussianVector g =
        buildGaussianVector(f.conic, refX - static_cast<double>(f.center.x()),
                            refY - static_cast<double>(f.center.y()));
    for (int k = 0; k < kVectorDim; ++k) {
        row[k] = g[k];
    }
    for (int k = kVectorDim; k < kPaddedDim; ++k) {
        row[k] = 0.f;
    }
}

void
gemmPacked(std::span<const float> gaussians, int rows, const PixelMatrix &pixels,
           Precision precision, std::span<float> out, KernelCounters *counters) {
    const int cols = pixels.paddedColumns();
    if (rows % kBlockRows != 0 ||
        gaussians.size() != static_cast<std::size_t>(rows) * kPaddedDim ||
        out.size() < static_cast<std::size_t>(rows) * cols) {
        throw std::invalid_argument("gemmPacked: dimension mismatch");
    }
    const std::span<const float> b = pixels.data(precision);
    if (precision == Precision::Full) {
        blockedProduct(gaussians.data(), rows, b.data(), cols, out.data(), counters);
        return;
    }
    thread_local std::vector<float> rounded;
    rounded.resize(gaussians.size());
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        rounded[i] = roundToHalf(gaussians[i]);
    }
    blockedProduct(rounded.data(), rows, b.data(), cols, out.data(), counters);
}

Matrix
gemmBlock(const Matrix &mg, const Matrix &mp, Precision precision, KernelCounters *counters) {
    if (mg.cols != mp.rows) {
        throw std::invalid_argument("gemmBlock: inner dimensions differ (" +
                                    std::to_string(mg.cols) + " vs " + std::to_string(mp.rows) +
                                    ")");
    }
    if (mg.cols > kPaddedDim) {
        throw std::invalid_argument("gemmBlock: inner dimension exceeds " +
                                    std::to_string(kPaddedDim));
    }
    if (mg.rows % kBlockRows != 0) {
        throw std::invalid_argument("gemmBlock: row count must be a multiple of " +
                                    std::to_string(kBlockRows));
    }
    if (mp.cols % kBlockCols != 0) {
        throw std::invalid_argument("gemmBlock: column count must be a multiple of " +
                                    std::to_string(kBlockCols));
    }
    auto load = [precision](float v) { return precision == Precision::Mixed ? roundToHalf(v) : v; };

    std::vector<float> a(static_cast<std::size_t>(mg.rows) * kPaddedDim, 0.f);
    for (int i = 0; i < mg.rows; ++i) {
        for (int k = 0; k < mg.cols; ++k) {
            a[static_cast<std::size_t>(i) * kPaddedDim + k] = load(mg(i, k));
        }
    }
    std::vector<float> b(static_cast<std::size_t>(kPaddedDim) * mp.cols, 0.f);
    for (int k = 0; k < mp.rows; ++k) {
        for (int j = 0; j < mp.cols; ++j) {
            b[static_cast<std::size_t>(k) * mp.cols + j] = load(mp(k, j));
        }
    }
    Matrix out(mg.rows, mp.cols);
    blockedProduct(a.data(), mg.rows, b.data(), mp.cols, out.data.data(), counters);
    return out;
}

void
buildGaussianMatrix(std::span<const FeatureRecord> batch, const TileGeometry &tile,
                    const PixelMatrix &pixels, std::vector<float> &packed) {
    const int rows = roundUp(static_cast<int>(batch.size()), kBlockRows);
    // Padding rows stay zero and are masked out when compositing.
    packed.assign(static_cast<std::size_t>(rows) * kPaddedDim, 0.f);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        packGaussianRow(batch[i], tile, pixels, packed.data() + i * kPaddedDim);
    }
}

void
compositeBatchGemm(std::span<const FeatureRecord> batch, std::span<const float> packed,
                   const PixelMatrix &pixels, Precision precision, const BlendParams &params,
                   std::vector<float> &powerScratch, TileAccumulator &acc,
                   KernelCounters *counters) {
    const int rows = static_cast<int>(packed.size() / kPaddedDim);
    const int cols = pixels.paddedColumns();
    powerScratch.resize(static_cast<std::size_t>(rows) * cols);
    gemmPacked(packed, rows, pixels, precision, powerScratch, counters);
    if (counters) {
        ++counters->batches;
    }

    const int pixelCount = pixels.pixelCount();
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const float *row = powerScratch.data() + i * static_cast<std::size_t>(cols);
        for (int j = 0; j < pixelCount; ++j) {
            if (acc.done[j]) {
                continue;
            }
            // The exact product is non-positive for a positive-definite conic;
            // a positive value here is accumulated round-off.
            acc.composite(j, std::min(row[j], 0.f), batch[i], params);
        }
    }
}

TileImage
blendTileGemm(std::span<const Splat2D> sorted, const TileGeometry &tile, const PixelMatrix &pixels,
              int batchSize, Precision precision, const BlendParams &params) {
    if (batchSize < 1) {
        throw std::invalid_argument("batch size must be >= 1");
    }
    if (tile.tile_size != pixels.tileSize()) {
        throw std::invalid_argument("pixel matrix built for a different tile size");
    }
    TileAccumulator acc(tile.pixelCount());
    std::vector<FeatureRecord> batch;
    std::vector<float> packed, power;
    for (std::size_t start = 0; start < sorted.size(); start += static_cast<std::size_t>(batchSize)) {
        const std::size_t end = std::min(sorted.size(), start + static_cast<std::size_t>(batchSize));
        batch.clear();
        for (std::size_t i = start; i < end; ++i) {
            batch.push_back(makeFeatureRecord(sorted[i], static_cast<std::uint32_t>(i)));
        }
        buildGaussianMatrix(batch, tile, pixels, packed);
        compositeBatchGemm(batch, packed, pixels, precision, params, power, acc);
        if (acc.allDone()) {
            break;
        }
    }
    return resolveTile(acc, tile.tile_size, params.background);
}

} // namespace gemmsplat
