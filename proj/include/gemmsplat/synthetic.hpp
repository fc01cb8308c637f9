// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Seeded random scenes for tests, parity checks and benchmarks.
#pragma once

#include <gemmsplat/scene.hpp>

#include <cstdint>

namespace gemmsplat {

struct SyntheticSpec {
    std::size_t count = 1000;
    int width  = 256;
    int height = 256;
    std::uint64_t seed = 1;
    int sh_degree = 3;
    // Projected standard deviations are drawn log-uniformly from this range.
    double min_pixel_sigma = 0.5;
    double max_pixel_sigma = 20.0;
    double min_opacity = 0.05;
    double max_opacity = 0.99;
};

struct SyntheticScene {
    Scene scene;
    Camera camera;
};

/// Camera at the origin looking down +z with a 60 degree horizontal field of
/// view; Gaussians lie at depth 2..10 and project inside the frame (10% margin).
/// Same spec and seed give the same scene on every platform.
SyntheticScene makeSyntheticScene(const SyntheticSpec &spec);

} // namespace gemmsplat
