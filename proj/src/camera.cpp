// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include <gemmsplat/scene.hpp>

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iterator>

namespace gemmsplat {

using nlohmann::json;

Eigen::Vector3d
Camera::center() const {
    const Eigen::Matrix3d rotation    = world_to_camera.topLeftCorner<3, 3>();
    const Eigen::Vector3d translation = world_to_camera.topRightCorner<3, 1>();
    return -rotation.transpose() * translation;
}

Camera
Camera::scaled(double factor) const {
    Camera out = *this;
    out.width  = static_cast<int>(std::lround(width * factor));
    out.height = static_cast<int>(std::lround(height * factor));
    out.fx *= factor;
    out.fy *= factor;
    out.cx *= factor;
    out.cy *= factor;
    return out;
}

double
focalFromFov(double fov, int dim) {
    return dim / (2.0 * std::tan(fov / 2.0));
}

void
validateCamera(const Camera &camera) {
    if (camera.width < 1 || camera.height < 1) {
        throw CameraError("non-positive resolution");
    }
    if (!(camera.fx > 0.0) || !(camera.fy > 0.0) || !std::isfinite(camera.fx) ||
        !std::isfinite(camera.fy)) {
        throw CameraError("non-positive focal length");
    }
    if (!(camera.near_plane > 0.0)) {
        throw CameraError("non-positive near plane");
    }
    if (!camera.world_to_camera.allFinite()) {
        throw CameraError("non-finite world_to_camera");
    }
}

namespace {

const json &
field(const json &doc, const char *name) {
    const auto it = doc.find(name);
    if (it == doc.end()) {
        throw CameraError(std::string("missing field '") + name + "'");
    }
    return *it;
}

double
number(const json &doc, const char *name) {
    const json &value = field(doc, name);
    if (!value.is_number()) {
        throw CameraError(std::string("field '") + name + "' must be a number");
    }
    return value.get<double>();
}

int
integer(const json &doc, const char *name) {
    const json &value = field(doc, name);
    if (!value.is_number_integer()) {
        throw CameraError(std::string("field '") + name + "' must be an integer");
    }
    return value.get<int>();
}

} // namespace

Camera
parseCamera(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error &e) {
        throw CameraError(std::string("malformed camera file: ") + e.what());
    }
    if (!doc.is_object()) {
        throw CameraError("camera file must be a JSON object");
    }

    Camera camera;
    camera.width  = integer(doc, "width");
    camera.height = integer(doc, "height");
    if (camera.width < 1 || camera.height < 1) {
        throw CameraError("non-positive resolution");
    }

    const bool hasFocal = doc.contains("fx") || doc.contains("fy");
    const bool hasFov   = doc.contains("fov_x") || doc.contains("fov_y");
    if (hasFocal && hasFov) {
        throw CameraError("specify either fx/fy or fov_x/fov_y, not both");
    }
    if (hasFov) {
        const double fovX = number(doc, "fov_x");
        const double fovY = number(doc, "fov_y");
        if (!(fovX > 0.0 && fovX < M_PI) || !(fovY > 0.0 && fovY < M_PI)) {
            throw CameraError("field of view must lie in (0, pi) radians");
        }
        camera.fx = focalFromFov(fovX, camera.width);
        camera.fy = focalFromFov(fovY, camera.height);
    } else {
        camera.fx = number(doc, "fx");
        camera.fy = number(doc, "fy");
    }
    camera.cx = doc.contains("cx") ? number(doc, "cx") : camera.width / 2.0;
    camera.cy = doc.contains("cy") ? number(doc, "cy") : camera.height / 2.0;
    if (doc.contains("near")) {
        camera.near_plane = number(doc, "near");
    }

    const json &matrix = field(doc, "world_to_camera");
    if (!matrix.is_array() || matrix.size() != 16) {
        throw CameraError("field 'world_to_camera' must be an array of 16 numbers");
    }
    for (int i = 0; i < 16; ++i) {
        if (!matrix[i].is_number()) {
            throw CameraError("field 'world_to_camera' must be an array of 16 numbers");
        }
        camera.world_to_camera(i / 4, i % 4) = matrix[i].get<double>();
    }

    validateCamera(camera);
    return camera;
}

Camera
loadCamera(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw CameraError("cannot open camera file '" + path.string() + "'");
    }
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parseCamera(text);
}

std::string
serializeCamera(const Camera &camera) {
    json doc;
    doc["width"]  = camera.width;
    doc["height"] = camera.height;
    doc["fx"]     = camera.fx;
    doc["fy"]     = camera.fy;
    doc["cx"]     = camera.cx;
    doc["cy"]     = camera.cy;
    doc["near"]   = camera.near_plane;
    json matrix   = json::array();
    for (int i = 0; i < 16; ++i) {
        matrix.push_back(camera.world_to_camera(i / 4, i % 4));
    }
    doc["world_to_camera"] = std::move(matrix);
    return doc.dump(2) + "\n";
}

void
saveCamera(const std::filesystem::path &path, const Camera &camera) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    out << serializeCamera(camera);
}

} // namespace gemmsplat
