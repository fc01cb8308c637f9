// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Blending with the exponent computed as a matrix product.
//
// For a pixel at intra-tile coordinates (u, v) relative to a reference pixel
// p_c, and a splat whose center sits at offset (h, k) = p_c - center, the
// pixel-to-splat offset is (h + u, k + v) and the exponent splits into
//
//   power = g . [u^2, v^2, uv, u, v, 1]
//   g     = [-A/2, -C/2, -B, -A h - B k, -C k - B h, -A h^2/2 - C k^2/2 - B h k]
//
// The pixel factor is the same for every tile, so a batch of splats against
// all pixels of a tile is one (batch x 6) * (6 x P) product.
#pragma once

#include <gemmsplat/tile.hpp>

#include <array>
#include <span>
#include <vector>

namespace gemmsplat {

enum class Precision {
    Full,  // single-precision inputs and accumulation
    Mixed, // inputs rounded to binary16, single-precision accumulation
};

enum class ReferencePixel {
    TopLeft, // center of the tile's top-left pixel; coordinates are 0..ts-1
    Center,  // geometric tile center; coordinates are -(ts-1)/2..(ts-1)/2
};

/// Micro-kernel output block and padded inner dimension.
inline constexpr int kBlockRows  = 16;
inline constexpr int kBlockCols  = 8;
inline constexpr int kVectorDim  = 6;
inline constexpr int kPaddedDim  = 8;

/// Nearest binary16 value (ties to even), returned as float. Overflows to inf.
float roundToHalf(float value);

/// Dense row-major float matrix.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.f) {}

    float &operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    float operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

/// Tile-invariant pixel factor, stored as kPaddedDim rows (the last two zero)
/// by paddedColumns() columns (columns past pixelCount() zero).
class PixelMatrix {
  public:
    static PixelMatrix build(int tileSize, ReferencePixel reference = ReferencePixel::TopLeft);

    int tileSize() const { return mTileSize; }
    int pixelCount() const { return mTileSize * mTileSize; }
    int paddedColumns() const { return mPaddedColumns; }
    ReferencePixel reference() const { return mReference; }

    /// Position of the reference pixel relative to the tile's top-left corner.
    double referenceX() const { return mReferenceOffset; }
    double referenceY() const { return mReferenceOffset; }

    float at(int row, int column) const {
        return mFull[static_cast<std::size_t>(row) * mPaddedColumns + column];
    }
    std::span<const float> data(Precision precision) const {
        return precision == Precision::Full ? std::span<const float>(mFull)
                                            : std::span<const float>(mHalf);
    }
    /// The unpadded 6 x P matrix.
    Matrix unpadded() const;

  private:
    int mTileSize = 0;
    int mPaddedColumns = 0;
    ReferencePixel mReference = ReferencePixel::TopLeft;
    double mReferenceOffset = 0.5;
    std::vector<float> mFull;
    std::vector<float> mHalf;
};

using GaussianVector = std::array<float, kVectorDim>;

/// Exponent coefficients for one splat in one tile; (offsetX, offsetY) is the
/// reference pixel minus the splat center. Evaluated in double, rounded once.
GaussianVector buildGaussianVector(const Conic &conic, double offsetX, double offsetY);

/// Writes the Gaussian vector of `f` for a tile into `row` (kPaddedDim floats).
void packGaussianRow(const FeatureRecord &f, const TileGeometry &tile, const PixelMatrix &pixels,
                     float *row);

/// Blocked product of `rows` packed Gaussian rows (rows x kPaddedDim, rows a
/// multiple of kBlockRows) with the pixel matrix. `out` is rows x paddedColumns().
void gemmPacked(std::span<const float> gaussians, int rows, const PixelMatrix &pixels,
                Precision precision, std::span<float> out, KernelCounters *counters = nullptr);

/// General entry point: mg is b x K, mp is K x P with K <= kPaddedDim, b a
/// multiple of kBlockRows and P a multiple of kBlockCols. Throws
/// std::invalid_argument on any dimension mismatch.
Matrix gemmBlock(const Matrix &mg, const Matrix &mp, Precision precision = Precision::Full,
                 KernelCounters *counters = nullptr);

/// Scratch buffers for one batch; reused across batches and tiles.
struct GemmScratch {
    std::vector<float> gaussians; // packed M_g
    std::vector<float> power;     // M_power
};

/// Stage 2 of the batch: build the packed, zero-padded M_g for `batch`.
void buildGaussianMatrix(std::span<const FeatureRecord> batch, const TileGeometry &tile,
                         const PixelMatrix &pixels, std::vector<float> &packed);

/// Stage 3 of the batch: multiply and composite. `packed` comes from
/// buildGaussianMatrix for the same batch.
void compositeBatchGemm(std::span<const FeatureRecord> batch, std::span<const float> packed,
                        const PixelMatrix &pixels, Precision precision, const BlendParams &params,
                        std::vector<float> &powerScratch, TileAccumulator &acc,
                        KernelCounters *counters = nullptr);

/// Blends depth-sorted splats over one tile in batches of `batchSize`.
TileImage blendTileGemm(std::span<const Splat2D> sorted, const TileGeometry &tile,
                        const PixelMatrix &pixels, int batchSize = 256,
                        Precision precision = Precision::Full, const BlendParams &params = {});

} // namespace gemmsplat
