// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include <gemmsplat/preprocess.hpp>

#include <algorithm>
#include <cmath>
#include <thread>

namespace gemmsplat {

TileGrid
TileGrid::forImage(int width, int height, int tileSize) {
    if (tileSize < 1) {
        throw std::invalid_argument("tile_size must be >= 1");
    }
    if (width < 1 || height < 1) {
        throw std::invalid_argument("image dimensions must be >= 1");
    }
    TileGrid grid;
    grid.tile_size = tileSize;
    grid.tiles_x   = (width + tileSize - 1) / tileSize;
    grid.tiles_y   = (height + tileSize - 1) / tileSize;
    return grid;
}

std::optional<Splat2D>
projectGaussian(const Gaussian3D &g, const Camera &camera, const ProjectionParams &params) {
    const Eigen::Matrix3d view  = camera.world_to_camera.topLeftCorner<3, 3>();
    const Eigen::Vector3d shift = camera.world_to_camera.topRightCorner<3, 1>();
    const Eigen::Vector3d t     = view * g.position.cast<double>() + shift;

    if (!(t.z() > camera.near_plane)) {
        return std::nullopt;
    }
    const double xn = t.x() / t.z();
    const double yn = t.y() / t.z();
    const double left   = -camera.cx / camera.fx;
    const double right  = (camera.width - camera.cx) / camera.fx;
    const double top    = -camera.cy / camera.fy;
    const double bottom = (camera.height - camera.cy) / camera.fy;
    const double guard  = params.guard_band;
    if (xn < guard * left || xn > guard * right || yn < guard * top || yn > guard * bottom) {
        return std::nullopt;
    }

    const Eigen::Matrix3d rotation = g.rotation.toRotationMatrix().cast<double>();
    const Eigen::Vector3d scale    = g.scale.cast<double>();
    const Eigen::Matrix3d m        = rotation * scale.asDiagonal();
    const Eigen::Matrix3d cov3d    = m * m.transpose();

    Eigen::Matrix<double, 2, 3> jacobian;
    const double invZ = 1.0 / t.z();
    jacobian << camera.fx * invZ, 0.0, -camera.fx * t.x() * invZ * invZ, //
        0.0, camera.fy * invZ, -camera.fy * t.y() * invZ * invZ;
    const Eigen::Matrix<double, 2, 3> tm = jacobian * view;
    Eigen::Matrix2d cov2d                = tm * cov3d * tm.transpose();

    cov2d(0, 0) += params.dilation;
    cov2d(1, 1) += params.dilation;
    const double a   = cov2d(0, 0);
    const double b   = 0.5 * (cov2d(0, 1) + cov2d(1, 0));
    const double c   = cov2d(1, 1);
    const double det = a * c - b * b;
    if (!(det > params.min_det)) {
        return std::nullopt;
    }

    Splat2D splat;
    splat.conic = {static_cast<float>(c / det), static_cast<float>(-b / det),
                   static_cast<float>(a / det)};
    if (!splat.conic.positive_definite()) {
        return std::nullopt;
    }
    splat.center = {static_cast<float>(camera.fx * xn + camera.cx),
                    static_cast<float>(camera.fy * yn + camera.cy)};
    splat.depth  = static_cast<float>(t.z());
    splat.opacity = g.opacity;

    const Eigen::Vector3d dir = g.position.cast<double>() - camera.center();
    const double len          = dir.norm();
    const Eigen::Vector3f unit =
        len > 0.0 ? Eigen::Vector3f((dir / len).cast<float>()) : Eigen::Vector3f(0.f, 0.f, 1.f);
    splat.color = evalColor(g, unit);
    return splat;
}

std::array<float, kShBasisCount>
shBasis(const Eigen::Vector3f &dir) {
    constexpr float C0   = 0.28209479177387814f;
    constexpr float C1   = 0.4886025119029199f;
    constexpr float C2[] = {1.0925484305920792f, -1.0925484305920792f, 0.31539156525252005f,
                            -1.0925484305920792f, 0.5462742152960396f};
    constexpr float C3[] = {-0.5900435899266435f, 2.890611442640554f, -0.4570457994644658f,
                            0.3731763325901154f,  -0.4570457994644658f, 1.445305721320277f,
                            -0.5900435899266435f};
    const float x = dir.x(), y = dir.y(), z = dir.z();
    const float xx = x * x, yy = y * y, zz = z * z;
    return {
        C0,
        -C1 * y,
        C1 * z,
        -C1 * x,
        C2[0] * x * y,
        C2[1] * y * z,
        C2[2] * (2.f * zz - xx - yy),
        C2[3] * x * z,
        C2[4] * (xx - yy),
        C3[0] * y * (3.f * xx - yy),
        C3[1] * x * y * z,
        C3[2] * y * (4.f * zz - xx - yy),
        C3[3] * z * (2.f * zz - 3.f * xx - 3.f * yy),
        C3[4] * x * (4.f * zz - xx - yy),
        C3[5] * z * (xx - yy),
        C3[6] * x * (xx - 3.f * yy),
    };
}

Rgb
evalColor(const Gaussian3D &g, const Eigen::Vector3f &viewDir) {
    const auto basis = shBasis(viewDir);
    Rgb sum;
    for (int k = 0; k < kShBasisCount; ++k) {
        sum.r += basis[k] * g.sh[k].r;
        sum.g += basis[k] * g.sh[k].g;
        sum.b += basis[k] * g.sh[k].b;
    }
    return {std::max(sum.r + 0.5f, 0.f), std::max(sum.g + 0.5f, 0.f),
            std::max(sum.b + 0.5f, 0.f)};
}

float
majorSigma(const Conic &conic) {
    // Covariance is the conic's inverse; its largest eigenvalue is the
    // reciprocal of the conic's smallest one.
    const double a = conic.a, b = conic.b, c = conic.c;
    const double mid     = 0.5 * (a + c);
    const double spread  = std::sqrt(std::max(0.0, 0.25 * (a - c) * (a - c) + b * b));
    const double lambdaMin = mid - spread;
    if (!(lambdaMin > 0.0)) {
        // Round-off on extremely elongated conics: fall back to det / lambda_max.
        const double det = a * c - b * b;
        return static_cast<float>(std::sqrt((mid + spread) / det));
    }
    return static_cast<float>(std::sqrt(1.0 / lambdaMin));
}

TouchedTiles
touchedTiles(const Splat2D &splat, const TileGrid &grid) {
    const double radius = kFootprintSigmas * static_cast<double>(majorSigma(splat.conic)) * 1.0001;
    const double ts     = grid.tile_size;

    const double x0 = std::floor((splat.center.x() - radius) / ts);
    const double x1 = std::floor((splat.center.x() + radius) / ts);
    const double y0 = std::floor((splat.center.y() - radius) / ts);
    const double y1 = std::floor((splat.center.y() + radius) / ts);

    TouchedTiles tiles;
    if (!(x1 >= 0.0 && y1 >= 0.0 && x0 <= grid.tiles_x - 1 && y0 <= grid.tiles_y - 1)) {
        return tiles; // empty
    }
    tiles.tx_min = static_cast<int>(std::max(x0, 0.0));
    tiles.tx_max = static_cast<int>(std::min(x1, grid.tiles_x - 1.0));
    tiles.ty_min = static_cast<int>(std::max(y0, 0.0));
    tiles.ty_max = static_cast<int>(std::min(y1, grid.tiles_y - 1.0));
    return tiles;
}

PreprocessResult
preprocessScene(std::span<const Gaussian3D> gaussians, const Camera &camera, const TileGrid &grid,
                int workers, const ProjectionParams &params) {
    const std::size_t n       = gaussians.size();
    const std::size_t chunks  = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)),
                                                        1, std::max<std::size_t>(n, 1));
    std::vector<PreprocessResult> partial(chunks);

    auto run = [&](std::size_t chunk) {
        const std::size_t begin = n * chunk / chunks;
        const std::size_t end   = n * (chunk + 1) / chunks;
        PreprocessResult &out   = partial[chunk];
        for (std::size_t i = begin; i < end; ++i) {
            const auto splat = projectGaussian(gaussians[i], camera, params);
            if (!splat) {
                continue;
            }
            const TouchedTiles tiles = touchedTiles(*splat, grid);
            if (tiles.empty()) {
                continue;
            }
            out.splats.push_back(*splat);
            out.touched.push_back(tiles);
            out.source.push_back(static_cast<std::uint32_t>(i));
        }
    };

    if (chunks == 1) {
        run(0);
        return std::move(partial[0]);
    }
    {
        std::vector<std::jthread> threads;
        threads.reserve(chunks - 1);
        for (std::size_t c = 1; c < chunks; ++c) {
            threads.emplace_back(run, c);
        }
        run(0);
    }

    PreprocessResult result;
    std::size_t total = 0;
    for (const auto &p : partial) {
        total += p.splats.size();
    }
    result.splats.reserve(total);
    result.touched.reserve(total);
    result.source.reserve(total);
    for (auto &p : partial) {
        result.splats.insert(result.splats.end(), p.splats.begin(), p.splats.end());
        result.touched.insert(result.touched.end(), p.touched.begin(), p.touched.end());
        result.source.insert(result.source.end(), p.source.begin(), p.source.end());
    }
    return result;
}

} // namespace gemmsplat
