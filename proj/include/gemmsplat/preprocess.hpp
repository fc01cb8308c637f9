// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Stage 1 of the tile renderer: cull and project every Gaussian, evaluate its
// view-dependent color and find the tiles its footprint can reach.
#pragma once

#include <gemmsplat/scene.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace gemmsplat {

/// Projection constants shared with the tile-coverage test.
struct ProjectionParams {
    float dilation   = 0.3f; // added to both diagonal entries of the 2D covariance
    float guard_band = 1.3f; // frustum multiplier for center culling
    double min_det   = 1e-12; // dilated covariance determinant at or below this culls
};

struct TileGrid {
    int tile_size = 16;
    int tiles_x   = 1;
    int tiles_y   = 1;

    static TileGrid forImage(int width, int height, int tileSize);

    int tileCount() const { return tiles_x * tiles_y; }
    std::uint32_t tileId(int tx, int ty) const {
        return static_cast<std::uint32_t>(ty * tiles_x + tx);
    }
};

/// Inclusive tile rectangle. Empty when tx_min > tx_max or ty_min > ty_max.
struct TouchedTiles {
    int tx_min = 0;
    int tx_max = -1;
    int ty_min = 0;
    int ty_max = -1;

    bool empty() const { return tx_min > tx_max || ty_min > ty_max; }
    std::size_t count() const {
        return empty() ? 0
                       : static_cast<std::size_t>(tx_max - tx_min + 1) *
                             static_cast<std::size_t>(ty_max - ty_min + 1);
    }
    friend bool operator==(const TouchedTiles &, const TouchedTiles &) = default;
};

/// Returns std::nullopt when the Gaussian is culled.
std::optional<Splat2D> projectGaussian(const Gaussian3D &g, const Camera &camera,
                                       const ProjectionParams &params = {});

/// Real SH basis values for a unit direction, degree 0..3 in storage order.
std::array<float, kShBasisCount> shBasis(const Eigen::Vector3f &dir);

/// clamp_min(SH(dir) + 0.5, 0) per channel.
Rgb evalColor(const Gaussian3D &g, const Eigen::Vector3f &viewDir);

/// Radius multiplier applied to the largest standard deviation. Any pixel with
/// alpha >= 1/255 lies within this many sigmas, whatever the opacity.
inline constexpr float kFootprintSigmas = 3.3290429f; // sqrt(2 ln 255)

/// Standard deviation along the major axis of the splat's 2D covariance.
float majorSigma(const Conic &conic);

TouchedTiles touchedTiles(const Splat2D &splat, const TileGrid &grid);

/// Output of the whole preprocessing stage, in scene order.
struct PreprocessResult {
    std::vector<Splat2D> splats;
    std::vector<TouchedTiles> touched;
    std::vector<std::uint32_t> source; // index of the originating Gaussian
};

/// Projects all Gaussians on `workers` threads. Output order equals input
/// order whatever the worker count; splats touching no tile are dropped.
PreprocessResult preprocessScene(std::span<const Gaussian3D> gaussians, const Camera &camera,
                                 const TileGrid &grid, int workers,
                                 const ProjectionParams &params = {});

} // namespace gemmsplat
