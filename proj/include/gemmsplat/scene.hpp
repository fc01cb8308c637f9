// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Scene primitives, cameras and projected splats, plus the on-disk formats
// they are read from.
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gemmsplat {

struct Rgb {
    float r = 0.f;
    float g = 0.f;
    float b = 0.f;

    friend bool operator==(const Rgb &, const Rgb &) = default;
};

/// Number of real spherical-harmonic basis functions up to degree 3.
inline constexpr int kShBasisCount = 16;
inline constexpr int kMaxShDegree  = 3;

/// A trained scene primitive with activations applied.
struct Gaussian3D {
    Eigen::Vector3f position = Eigen::Vector3f::Zero();
    Eigen::Vector3f scale    = Eigen::Vector3f::Ones(); // world units, > 0
    Eigen::Quaternionf rotation = Eigen::Quaternionf::Identity(); // unit norm
    float opacity = 0.5f;                                          // in (0, 1)
    std::array<Rgb, kShBasisCount> sh{}; // [basis][channel], degree-0 first
};

struct Scene {
    std::vector<Gaussian3D> gaussians;
    int sh_degree = 0;
    /// Records whose stored quaternion was not unit length and got normalized.
    std::size_t normalized_rotations = 0;
};

/// Inverse 2D covariance [[a, b], [b, c]].
struct Conic {
    float a = 0.f;
    float b = 0.f;
    float c = 0.f;

    bool positive_definite() const { return a > 0.f && c > 0.f && a * c - b * b > 0.f; }
};

/// A Gaussian projected onto the image plane.
struct Splat2D {
    Eigen::Vector2f center = Eigen::Vector2f::Zero(); // pixel coordinates
    Conic conic;
    Rgb color;
    float opacity = 0.f;
    float depth   = 0.f; // camera-space z
};

/// Pinhole camera. Pixel (i, j) is sampled at image coordinates (i + 0.5, j + 0.5).
struct Camera {
    Eigen::Matrix4d world_to_camera = Eigen::Matrix4d::Identity();
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.5;
    double cy = 0.5;
    int width  = 1;
    int height = 1;
    double near_plane = 0.01;

    Eigen::Vector3d center() const;
    /// Same pose with resolution and intrinsics multiplied by `factor`.
    Camera scaled(double factor) const;

    friend bool operator==(const Camera &, const Camera &) = default;
};

class LoadError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Scene-file failure. `offset` is the byte offset into the file and
/// `property` the property being read when the failure occurred (may be empty).
class PlyError : public LoadError {
  public:
    PlyError(const std::string &what, std::size_t offset, std::string property);

    std::size_t offset() const { return mOffset; }
    const std::string &property() const { return mProperty; }

  private:
    std::size_t mOffset;
    std::string mProperty;
};

class CameraError : public LoadError {
  public:
    using LoadError::LoadError;
};

// ---------------------------------------------------------------------------
// Scene files: binary little-endian point clouds with one `vertex` element.

/// One vertex record exactly as stored, before activations.
struct RawGaussian {
    std::array<float, 3> position{};
    std::array<float, 3> normal{};
    std::array<float, 3> f_dc{};
    std::array<float, 45> f_rest{}; // channel-major, only the first 3*(K-1) used
    float opacity_logit = 0.f;
    std::array<float, 3> log_scale{};
    std::array<float, 4> rot{1.f, 0.f, 0.f, 0.f}; // w, x, y, z

    friend bool operator==(const RawGaussian &, const RawGaussian &) = default;
};

struct RawScene {
    int sh_degree = 0;
    std::vector<RawGaussian> records;
};

/// Number of f_rest_* values stored for a given SH degree.
constexpr int restCountForDegree(int degree) { return 3 * ((degree + 1) * (degree + 1) - 1); }

RawScene readPly(const std::filesystem::path &path);
RawScene parsePly(std::string_view bytes);
/// Canonical layout: x y z nx ny nz f_dc_0..2 f_rest_* opacity scale_0..2 rot_0..3.
std::string encodePly(const RawScene &scene);
void writePly(const std::filesystem::path &path, const RawScene &scene);

/// exp on scale, sigmoid on opacity, quaternion normalization.
Scene activate(const RawScene &raw);
/// Inverse of activate(); used to export synthetic scenes.
RawScene deactivate(const Scene &scene);

Scene loadScene(const std::filesystem::path &path);
void saveScene(const std::filesystem::path &path, const Scene &scene);

// ---------------------------------------------------------------------------
// Camera files: JSON objects, see README for the schema.

Camera parseCamera(std::string_view text);
Camera loadCamera(const std::filesystem::path &path);
std::string serializeCamera(const Camera &camera);
void saveCamera(const std::filesystem::path &path, const Camera &camera);
/// Throws CameraError when a Camera invariant does not hold.
void validateCamera(const Camera &camera);

/// focal = dim / (2 tan(fov / 2)), fov in radians.
double focalFromFov(double fov, int dim);

} // namespace gemmsplat
