// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Fixtures and independent oracles shared by the test binaries. Nothing here
// calls into the code under test except to build inputs.
#pragma once

#include <gemmsplat/scene.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

namespace gemmsplat::test {

inline std::filesystem::path
dataPath(const std::string &name) {
    return std::filesystem::path(GEMMSPLAT_TEST_DATA) / name;
}

inline std::string
readFile(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Fresh scratch directory under the build tree, removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string &tag)
        : mPath(std::filesystem::temp_directory_path() /
                ("gemmsplat-" + tag + "-" + std::to_string(std::random_device{}()))) {
        std::filesystem::create_directories(mPath);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(mPath, ec);
    }
    std::filesystem::path operator/(const std::string &name) const { return mPath / name; }

  private:
    std::filesystem::path mPath;
};

inline Splat2D
makeSplat(float x, float y, Conic conic, float opacity, Rgb color, float depth = 1.f) {
    Splat2D s;
    s.center  = {x, y};
    s.conic   = conic;
    s.opacity = opacity;
    s.color   = color;
    s.depth   = depth;
    return s;
}

/// Conic of a 2D covariance with standard deviations (sx, sy) rotated by theta,
/// after adding `dilation` to both diagonal entries.
inline Conic
conicFromAxes(double sx, double sy, double theta, double dilation = 0.0) {
    const double c = std::cos(theta), s = std::sin(theta);
    const double xx = c * c * sx * sx + s * s * sy * sy + dilation;
    const double yy = s * s * sx * sx + c * c * sy * sy + dilation;
    const double xy = c * s * (sx * sx - sy * sy);
    const double det = xx * yy - xy * xy;
    return {static_cast<float>(yy / det), static_cast<float>(-xy / det),
            static_cast<float>(xx / det)};
}

/// Random splats scattered over a `width` x `height` region with
/// log-uniform sizes and strictly increasing depth.
inline std::vector<Splat2D>
randomSplats(std::mt19937 &rng, int count, float width, float height, double minSigma = 0.3,
             double maxSigma = 12.0, float minOpacity = 0.05f, float maxOpacity = 0.99f) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Splat2D> out;
    for (int i = 0; i < count; ++i) {
        const double sx = minSigma * std::pow(maxSigma / minSigma, u(rng));
        const double sy = minSigma * std::pow(maxSigma / minSigma, u(rng));
        const Conic conic = conicFromAxes(sx, sy, u(rng) * 3.14159, 0.3);
        out.push_back(makeSplat(static_cast<float>(u(rng) * width),
                                static_cast<float>(u(rng) * height), conic,
                                minOpacity + (maxOpacity - minOpacity) * static_cast<float>(u(rng)),
                                {static_cast<float>(u(rng)), static_cast<float>(u(rng)),
                                 static_cast<float>(u(rng))},
                                1.f + 0.01f * static_cast<float>(i)));
    }
    return out;
}

/// Exponent of a splat at a pixel sample, in double.
inline double
powerOracle(const Conic &k, double dx, double dy) {
    return -0.5 * (double(k.a) * dx * dx + double(k.c) * dy * dy) - double(k.b) * dx * dy;
}

struct PixelOracle {
    double r = 0, g = 0, b = 0, t = 1;
};

/// Front-to-back compositing of one pixel sample, written out directly from
/// the compositing rules in double precision.
inline PixelOracle
compositeOracle(const std::vector<Splat2D> &sorted, double px, double py, Rgb background,
                double threshold = 1e-4) {
    PixelOracle o;
    for (const Splat2D &s : sorted) {
        const double power = powerOracle(s.conic, s.center.x() - px, s.center.y() - py);
        if (power > 0) {
            continue;
        }
        const double alpha = std::min(0.99, s.opacity * std::exp(power));
        if (alpha < 1.0 / 255.0) {
            continue;
        }
        const double next = o.t * (1 - alpha);
        if (next < threshold) {
            break;
        }
        o.r += s.color.r * alpha * o.t;
        o.g += s.color.g * alpha * o.t;
        o.b += s.color.b * alpha * o.t;
        o.t = next;
    }
    o.r += o.t * background.r;
    o.g += o.t * background.g;
    o.b += o.t * background.b;
    return o;
}

} // namespace gemmsplat::test
