// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
// 8-bit export of rendered frames and frame-to-frame error metrics.
#pragma once

#include <gemmsplat/renderer.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gemmsplat {

struct Image8 {
    int width  = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb; // interleaved, row-major

    friend bool operator==(const Image8 &, const Image8 &) = default;
};

/// Clamps every channel to [0, 1] and quantizes to round(255 * v).
Image8 toImage8(const RenderFrame &frame);

std::string encodePpm(const Image8 &image);
Image8 decodePpm(const std::string &bytes);
std::string encodePng(const Image8 &image);

/// Writes PNG for a ".png" extension, binary PPM otherwise.
void writeImage(const std::filesystem::path &path, const Image8 &image);
Image8 readPpm(const std::filesystem::path &path);

/// Upper edges of the per-pixel error histogram, in units of 1/255. The last
/// bin collects everything at or above the final edge.
inline constexpr std::array<double, 6> kErrorBinEdges = {0.5, 1.0, 2.0, 4.0, 8.0, 16.0};

struct FrameDiff {
    double psnr    = 0.0; // dB over clamped channels; +inf for identical frames
    double max_abs = 0.0; // largest clamped per-channel deviation
    double mse     = 0.0;
    std::array<std::size_t, kErrorBinEdges.size() + 1> histogram{}; // per-pixel max channel error
    std::size_t pixels = 0;

    bool identical() const { return mse == 0.0; }
};

/// Compares two frames of equal size on channels clamped to [0, 1].
FrameDiff compareFrames(const RenderFrame &a, const RenderFrame &b);

} // namespace gemmsplat
