// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include <gemmsplat/scene.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <unordered_map>

namespace gemmsplat {

static_assert(std::endian::native == std::endian::little,
              "scene files are little-endian; big-endian hosts are not supported");

PlyError::PlyError(const std::string &what, std::size_t offset, std::string property)
    : LoadError(what + " (byte offset " + std::to_string(offset) +
                (property.empty() ? std::string() : ", property '" + property + "'") + ")"),
      mOffset(offset), mProperty(std::move(property)) {}

namespace {

enum class ScalarType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

std::optional<ScalarType>
scalarTypeFromName(std::string_view name) {
    static const std::unordered_map<std::string_view, ScalarType> kTypes = {
        {"char", ScalarType::Int8},      {"int8", ScalarType::Int8},
        {"uchar", ScalarType::UInt8},    {"uint8", ScalarType::UInt8},
        {"short", ScalarType::Int16},    {"int16", ScalarType::Int16},
        {"ushort", ScalarType::UInt16},  {"uint16", ScalarType::UInt16},
        {"int", ScalarType::Int32},      {"int32", ScalarType::Int32},
        {"uint", ScalarType::UInt32},    {"uint32", ScalarType::UInt32},
        {"float", ScalarType::Float32},  {"float32", ScalarType::Float32},
        {"double", ScalarType::Float64}, {"float64", ScalarType::Float64},
    };
    const auto it = kTypes.find(name);
    if (it == kTypes.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::size_t
scalarSize(ScalarType type) {
    switch (type) {
    case ScalarType::Int8:
    case ScalarType::UInt8: return 1;
    case ScalarType::Int16:
    case ScalarType::UInt16: return 2;
    case ScalarType::Int32:
    case ScalarType::UInt32:
    case ScalarType::Float32: return 4;
    case ScalarType::Float64: return 8;
    }
    return 0;
}

struct PropertyDecl {
    std::string name;
    ScalarType type;
    std::size_t offset; // within the record
};

struct Header {
    std::size_t vertexCount = 0;
    std::size_t recordSize  = 0;
    std::size_t payloadOffset = 0;
    std::vector<PropertyDecl> properties;
};

std::vector<std::string_view>
splitWords(std::string_view line) {
    std::vector<std::string_view> words;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) {
            ++i;
        }
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') {
            ++i;
        }
        if (i > start) {
            words.push_back(line.substr(start, i - start));
        }
    }
    return words;
}

Header
parseHeader(std::string_view bytes) {
    Header header;
    std::size_t pos = 0;
    bool sawMagic = false, sawFormat = false, inVertex = false, sawVertex = false;

    while (true) {
        const std::size_t lineStart = pos;
        const std::size_t eol = bytes.find('\n', pos);
        if (eol == std::string_view::npos) {
            throw PlyError("malformed header: missing end_header", lineStart, "");
        }
        const std::string_view line = bytes.substr(pos, eol - pos);
        pos = eol + 1;
        const auto words = splitWords(line);

        if (!sawMagic) {
            if (words.size() != 1 || words[0] != "ply") {
                throw PlyError("malformed header: missing 'ply' magic", lineStart, "");
            }
            sawMagic = true;
            continue;
        }
        if (words.empty() || words[0] == "comment" || words[0] == "obj_info") {
            continue;
        }
        if (words[0] == "format") {
            if (words.size() != 3 || words[2] != "1.0") {
                throw PlyError("malformed header: bad format line", lineStart, "");
            }
            if (words[1] != "binary_little_endian") {
                throw PlyError("unsupported format '" + std::string(words[1]) +
                                   "', expected binary_little_endian",
                               lineStart, "");
            }
            sawFormat = true;
        } else if (words[0] == "element") {
            if (words.size() != 3) {
                throw PlyError("malformed header: bad element line", lineStart, "");
            }
            if (sawVertex) {
                // Trailing elements after the vertex block are ignored.
                inVertex = false;
                continue;
            }
            if (words[1] != "vertex") {
                throw PlyError("unsupported element '" + std::string(words[1]) +
                                   "' before vertex element",
                               lineStart, "");
            }
            std::uint64_t count = 0;
            const auto [ptr, ec] =
                std::from_chars(words[2].data(), words[2].data() + words[2].size(), count);
            if (ec != std::errc() || ptr != words[2].data() + words[2].size()) {
                throw PlyError("malformed header: bad vertex count", lineStart, "");
            }
            header.vertexCount = static_cast<std::size_t>(count);
            sawVertex = inVertex = true;
        } else if (words[0] == "property") {
            if (!inVertex) {
                if (sawVertex) {
                    continue;
                }
                throw PlyError("malformed header: property outside element", lineStart, "");
            }
            if (words.size() >= 2 && words[1] == "list") {
                throw PlyError("list properties are not supported in vertex element", lineStart,
                               words.size() >= 5 ? std::string(words[4]) : std::string());
            }
            if (words.size() != 3) {
                throw PlyError("malformed header: bad property line", lineStart, "");
            }
            const auto type = scalarTypeFromName(words[1]);
            if (!type) {
                throw PlyError("unknown property type '" + std::string(words[1]) + "'",
                               lineStart, std::string(words[2]));
            }
            header.properties.push_back({std::string(words[2]), *type, header.recordSize});
            header.recordSize += scalarSize(*type);
        } else if (words[0] == "end_header") {
            break;
        } else {
            throw PlyError("malformed header: unexpected keyword '" + std::string(words[0]) + "'",
                           lineStart, "");
        }
    }
    if (!sawFormat) {
        throw PlyError("malformed header: missing format line", 0, "");
    }
    if (!sawVertex) {
        throw PlyError("malformed header: missing vertex element", 0, "");
    }
    header.payloadOffset = pos;
    return header;
}

std::string
indexedName(std::string_view prefix, int index) {
    return std::string(prefix) + std::to_string(index);
}

} // namespace

RawScene
parsePly(std::string_view bytes) {
    const Header header = parseHeader(bytes);

    std::unordered_map<std::string_view, const PropertyDecl *> byName;
    for (const auto &prop : header.properties) {
        byName.emplace(prop.name, &prop);
    }
    auto require = [&](const std::string &name) -> std::size_t {
        const auto it = byName.find(name);
        if (it == byName.end()) {
            throw PlyError("missing required property", header.payloadOffset, name);
        }
        if (it->second->type != ScalarType::Float32) {
            throw PlyError("property must be float32", header.payloadOffset, name);
        }
        return it->second->offset;
    };

    int restCount = 0;
    while (byName.contains(indexedName("f_rest_", restCount))) {
        ++restCount;
    }
    RawScene scene;
    scene.sh_degree = -1;
    for (int degree = 0; degree <= kMaxShDegree; ++degree) {
        if (restCountForDegree(degree) == restCount) {
            scene.sh_degree = degree;
        }
    }
    if (scene.sh_degree < 0) {
        throw PlyError("unsupported number of f_rest properties (" + std::to_string(restCount) +
                           "); expected 0, 9, 24 or 45",
                       header.payloadOffset, indexedName("f_rest_", restCount));
    }

    struct Field {
        std::size_t fileOffset;
        float *(*target)(RawGaussian &, int);
        int index;
    };
    std::vector<Field> fields;
    auto add = [&](const std::string &name, float *(*target)(RawGaussian &, int), int index) {
        fields.push_back({require(name), target, index});
    };
    for (int i = 0; i < 3; ++i) {
        add(std::string(1, "xyz"[i]), [](RawGaussian &g, int k) { return &g.position[k]; }, i);
    }
    for (int i = 0; i < 3; ++i) {
        // Normals are optional; absent normals read as zero.
        const std::string name = std::string("n") + "xyz"[i];
        if (byName.contains(name)) {
            add(name, [](RawGaussian &g, int k) { return &g.normal[k]; }, i);
        }
    }
    for (int i = 0; i < 3; ++i) {
        add(indexedName("f_dc_", i), [](RawGaussian &g, int k) { return &g.f_dc[k]; }, i);
    }
    for (int i = 0; i < restCount; ++i) {
        add(indexedName("f_rest_", i), [](RawGaussian &g, int k) { return &g.f_rest[k]; }, i);
    }
    add("opacity", [](RawGaussian &g, int) { return &g.opacity_logit; }, 0);
    for (int i = 0; i < 3; ++i) {
        add(indexedName("scale_", i), [](RawGaussian &g, int k) { return &g.log_scale[k]; }, i);
    }
    for (int i = 0; i < 4; ++i) {
        add(indexedName("rot_", i), [](RawGaussian &g, int k) { return &g.rot[k]; }, i);
    }

    const std::size_t available = bytes.size() - header.payloadOffset;
    if (header.recordSize == 0 ||
        header.vertexCount > available / header.recordSize) {
        // Locate the first property that does not fit.
        const std::size_t complete = header.recordSize ? available / header.recordSize : 0;
        const std::size_t partial = available - complete * header.recordSize;
        std::string missing;
        for (const auto &prop : header.properties) {
            if (prop.offset + scalarSize(prop.type) > partial) {
                missing = prop.name;
                break;
            }
        }
        throw PlyError("truncated payload: header declares " + std::to_string(header.vertexCount) +
                           " vertices but only " + std::to_string(complete) + " are complete",
                       header.payloadOffset + complete * header.recordSize + partial, missing);
    }

    scene.records.resize(header.vertexCount);
    const char *payload = bytes.data() + header.payloadOffset;
    for (std::size_t v = 0; v < header.vertexCount; ++v) {
        const char *record = payload + v * header.recordSize;
        RawGaussian &g = scene.records[v];
        for (const Field &field : fields) {
            std::memcpy(field.target(g, field.index), record + field.fileOffset, sizeof(float));
        }
    }
    return scene;
}

RawScene
readPly(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError("cannot open scene file '" + path.string() + "'");
    }
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parsePly(bytes);
}

std::string
encodePly(const RawScene &scene) {
    if (scene.sh_degree < 0 || scene.sh_degree > kMaxShDegree) {
        throw std::invalid_argument("sh_degree must be in [0, 3]");
    }
    const int restCount = restCountForDegree(scene.sh_degree);

    std::ostringstream header;
    header << "ply\nformat binary_little_endian 1.0\n";
    header << "element vertex " << scene.records.size() << "\n";
    for (const char *name : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"}) {
        header << "property float " << name << "\n";
    }
    for (int i = 0; i < restCount; ++i) {
        header << "property float f_rest_" << i << "\n";
    }
    header << "property float opacity\n";
    for (int i = 0; i < 3; ++i) {
        header << "property float scale_" << i << "\n";
    }
    for (int i = 0; i < 4; ++i) {
        header << "property float rot_" << i << "\n";
    }
    header << "end_header\n";

    std::string out = header.str();
    const std::size_t floatsPerRecord = 3 + 3 + 3 + restCount + 1 + 3 + 4;
    std::vector<float> record;
    record.reserve(floatsPerRecord);
    out.reserve(out.size() + scene.records.size() * floatsPerRecord * sizeof(float));
    for (const auto &g : scene.records) {
        record.clear();
        record.insert(record.end(), g.position.begin(), g.position.end());
        record.insert(record.end(), g.normal.begin(), g.normal.end());
        record.insert(record.end(), g.f_dc.begin(), g.f_dc.end());
        record.insert(record.end(), g.f_rest.begin(), g.f_rest.begin() + restCount);
        record.push_back(g.opacity_logit);
        record.insert(record.end(), g.log_scale.begin(), g.log_scale.end());
        record.insert(record.end(), g.rot.begin(), g.rot.end());
        out.append(reinterpret_cast<const char *>(record.data()), record.size() * sizeof(float));
    }
    return out;
}

void
writePly(const std::filesystem::path &path, const RawScene &scene) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    const std::string bytes = encodePly(scene);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("failed writing '" + path.string() + "'");
    }
}

} // namespace gemmsplat
