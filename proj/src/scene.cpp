// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include <gemmsplat/scene.hpp>

#include <cmath>
#include <limits>

namespace gemmsplat {

namespace {

// Sigmoid evaluated in double, then rounded into the open interval (0, 1).
float
sigmoidOpen(float logit) {
    const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(logit)));
    float o        = static_cast<float>(s);
    if (o >= 1.f) {
        o = std::nextafter(1.f, 0.f);
    } else if (o <= 0.f) {
        o = std::numeric_limits<float>::denorm_min();
    }
    return o;
}

void
checkFinite(float value, std::size_t index, const char *what) {
    if (!std::isfinite(value)) {
        throw LoadError("gaussian " + std::to_string(index) + ": non-finite " + what);
    }
}

} // namespace

Scene
activate(const RawScene &raw) {
    Scene scene;
    scene.sh_degree = raw.sh_degree;
    scene.gaussians.resize(raw.records.size());

    const int restPerChannel = restCountForDegree(raw.sh_degree) / 3;
    for (std::size_t i = 0; i < raw.records.size(); ++i) {
        const RawGaussian &r = raw.records[i];
        Gaussian3D &g        = scene.gaussians[i];

        for (int k = 0; k < 3; ++k) {
            checkFinite(r.position[k], i, "position");
            checkFinite(r.log_scale[k], i, "scale");
            g.position[k] = r.position[k];
            g.scale[k]    = std::exp(r.log_scale[k]);
            if (!(g.scale[k] > 0.f) || !std::isfinite(g.scale[k])) {
                throw LoadError("gaussian " + std::to_string(i) + ": scale_" +
                                std::to_string(k) + " = exp(" + std::to_string(r.log_scale[k]) +
                                ") is not a positive finite value");
            }
        }

        checkFinite(r.opacity_logit, i, "opacity");
        g.opacity = sigmoidOpen(r.opacity_logit);

        double norm2 = 0.0;
        for (float q : r.rot) {
            checkFinite(q, i, "rotation");
            norm2 += static_cast<double>(q) * q;
        }
        if (!(norm2 > 0.0)) {
            throw LoadError("gaussian " + std::to_string(i) + ": zero-length rotation quaternion");
        }
        const double norm = std::sqrt(norm2);
        if (std::abs(norm - 1.0) > 1e-6) {
            ++scene.normalized_rotations;
        }
        g.rotation = Eigen::Quaternionf(static_cast<float>(r.rot[0] / norm),
                                        static_cast<float>(r.rot[1] / norm),
                                        static_cast<float>(r.rot[2] / norm),
                                        static_cast<float>(r.rot[3] / norm));

        g.sh    = {};
        g.sh[0] = {r.f_dc[0], r.f_dc[1], r.f_dc[2]};
        for (int k = 1; k <= restPerChannel; ++k) {
            g.sh[k].r = r.f_rest[0 * restPerChannel + (k - 1)];
            g.sh[k].g = r.f_rest[1 * restPerChannel + (k - 1)];
            g.sh[k].b = r.f_rest[2 * restPerChannel + (k - 1)];
        }
    }
    return scene;
}

RawScene
deactivate(const Scene &scene) {
    RawScene raw;
    raw.sh_degree = scene.sh_degree;
    raw.records.resize(scene.gaussians.size());

    const int restPerChannel = restCountForDegree(scene.sh_degree) / 3;
    for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
        const Gaussian3D &g = scene.gaussians[i];
        RawGaussian &r      = raw.records[i];
        for (int k = 0; k < 3; ++k) {
            r.position[k]  = g.position[k];
            r.log_scale[k] = std::log(g.scale[k]);
        }
        const double o  = g.opacity;
        r.opacity_logit = static_cast<float>(std::log(o / (1.0 - o)));
        r.rot           = {g.rotation.w(), g.rotation.x(), g.rotation.y(), g.rotation.z()};
        r.f_dc          = {g.sh[0].r, g.sh[0].g, g.sh[0].b};
        for (int k = 1; k <= restPerChannel; ++k) {
            r.f_rest[0 * restPerChannel + (k - 1)] = g.sh[k].r;
            r.f_rest[1 * restPerChannel + (k - 1)] = g.sh[k].g;
            r.f_rest[2 * restPerChannel + (k - 1)] = g.sh[k].b;
        }
    }
    return raw;
}

Scene
loadScene(const std::filesystem::path &path) {
    return activate(readPly(path));
}

void
saveScene(const std::filesystem::path &path, const Scene &scene) {
    writePly(path, deactivate(scene));
}

} // namespace gemmsplat
