// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include <gemmsplat/synthetic.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace gemmsplat {

namespace {

// Degree-0 SH constant; DC coefficient d yields color d * kC0 + 0.5.
constexpr double kC0 = 0.28209479177387814;

// std distributions are implementation-defined; these helpers are not.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : mEngine(seed) {}

    double uniform() { return static_cast<double>(mEngine() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal() {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

  private:
    std::mt19937_64 mEngine;
};

} // namespace

SyntheticScene
makeSyntheticScene(const SyntheticSpec &spec) {
    if (spec.width < 1 || spec.height < 1) {
        throw std::invalid_argument("synthetic frame must be at least 1x1");
    }
    if (spec.sh_degree < 0 || spec.sh_degree > kMaxShDegree) {
        throw std::invalid_argument("synthetic SH degree must be in [0, 3]");
    }
    if (!(spec.min_pixel_sigma > 0.0 && spec.min_pixel_sigma <= spec.max_pixel_sigma)) {
        throw std::invalid_argument("invalid synthetic sigma range");
    }

    SyntheticScene out;
    Camera &cam = out.camera;
    cam.width   = spec.width;
    cam.height  = spec.height;
    cam.fx      = focalFromFov(std::numbers::pi / 3.0, spec.width);
    cam.fy      = cam.fx;
    cam.cx      = spec.width / 2.0;
    cam.cy      = spec.height / 2.0;

    Rng rng(spec.seed);
    const int basisUsed = (spec.sh_degree + 1) * (spec.sh_degree + 1);
    const double logMin = std::log(spec.min_pixel_sigma);
    const double logMax = std::log(spec.max_pixel_sigma);

    out.scene.sh_degree = spec.sh_degree;
    out.scene.gaussians.reserve(spec.count);
    for (std::size_t i = 0; i < spec.count; ++i) {
        Gaussian3D g;
        const double z = rng.uniform(2.0, 10.0);
        const double u = rng.uniform(-0.1, 1.1) * spec.width;
        const double v = rng.uniform(-0.1, 1.1) * spec.height;
        g.position = Eigen::Vector3f(static_cast<float>((u - cam.cx) / cam.fx * z),
                                     static_cast<float>((v - cam.cy) / cam.fy * z),
                                     static_cast<float>(z));

        const double worldSigma = std::exp(rng.uniform(logMin, logMax)) * z / cam.fx;
        for (int a = 0; a < 3; ++a) {
            g.scale[a] = static_cast<float>(worldSigma * rng.uniform(0.3, 1.0));
        }
        Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        g.rotation = q.normalized().cast<float>();
        g.opacity  = static_cast<float>(rng.uniform(spec.min_opacity, spec.max_opacity));

        g.sh[0] = {static_cast<float>((rng.uniform(0.1, 0.9) - 0.5) / kC0),
                   static_cast<float>((rng.uniform(0.1, 0.9) - 0.5) / kC0),
                   static_cast<float>((rng.uniform(0.1, 0.9) - 0.5) / kC0)};
        for (int k = 1; k < basisUsed; ++k) {
            g.sh[k] = {static_cast<float>(rng.uniform(-0.02, 0.02)),
                       static_cast<float>(rng.uniform(-0.02, 0.02)),
                       static_cast<float>(rng.uniform(-0.02, 0.02))};
        }
        out.scene.gaussians.push_back(g);
    }
    return out;
}

} // namespace gemmsplat
