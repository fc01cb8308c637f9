// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include <gemmsplat/image.hpp>

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace gemmsplat {

namespace {

float
clamp01(float v) {
    return std::clamp(v, 0.f, 1.f);
}

std::uint8_t
quantize(float v) {
    return static_cast<std::uint8_t>(std::lround(clamp01(v) * 255.f));
}

void
putU32(std::string &out, std::uint32_t v) {
    out.push_back(static_cast<char>(v >> 24));
    out.push_back(static_cast<char>(v >> 16));
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v));
}

void
putChunk(std::string &out, const char *type, const std::string &data) {
    putU32(out, static_cast<std::uint32_t>(data.size()));
    std::string body(type, 4);
    body += data;
    out += body;
    putU32(out, static_cast<std::uint32_t>(
                    crc32(0L, reinterpret_cast<const Bytef *>(body.data()), body.size())));
}

} // namespace

Image8
toImage8(const RenderFrame &frame) {
    Image8 image;
    image.width  = frame.width;
    image.height = frame.height;
    image.rgb.reserve(frame.color.size() * 3);
    for (const Rgb &c : frame.color) {
        image.rgb.push_back(quantize(c.r));
        image.rgb.push_back(quantize(c.g));
        image.rgb.push_back(quantize(c.b));
    }
    return image;
}

std::string
encodePpm(const Image8 &image) {
    std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                      "\n255\n";
    out.append(reinterpret_cast<const char *>(image.rgb.data()), image.rgb.size());
    return out;
}

Image8
decodePpm(const std::string &bytes) {
    std::istringstream in(bytes);
    std::string magic;
    int maxValue = 0;
    Image8 image;
    in >> magic >> image.width >> image.height >> maxValue;
    if (!in || magic != "P6" || maxValue != 255 || image.width < 1 || image.height < 1) {
        throw std::runtime_error("not an 8-bit binary PPM");
    }
    in.get(); // single whitespace after the header
    image.rgb.resize(static_cast<std::size_t>(image.width) * image.height * 3);
    in.read(reinterpret_cast<char *>(image.rgb.data()),
            static_cast<std::streamsize>(image.rgb.size()));
    if (in.gcount() != static_cast<std::streamsize>(image.rgb.size())) {
        throw std::runtime_error("truncated PPM payload");
    }
    return image;
}

std::string
encodePng(const Image8 &image) {
    std::string raw;
    const std::size_t stride = static_cast<std::size_t>(image.width) * 3;
    raw.reserve((stride + 1) * image.height);
    for (int y = 0; y < image.height; ++y) {
        raw.push_back('\0'); // filter: none
        raw.append(reinterpret_cast<const char *>(image.rgb.data()) + y * stride, stride);
    }
    uLongf compressedSize = compressBound(raw.size());
    std::string compressed(compressedSize, '\0');
    if (compress2(reinterpret_cast<Bytef *>(compressed.data()), &compressedSize,
                  reinterpret_cast<const Bytef *>(raw.data()), raw.size(), 6) != Z_OK) {
        throw std::runtime_error("zlib compression failed");
    }
    compressed.resize(compressedSize);

    std::string out("\x89PNG\r\n\x1a\n", 8);
    std::string header;
    putU32(header, static_cast<std::uint32_t>(image.width));
    putU32(header, static_cast<std::uint32_t>(image.height));
    header += std::string("\x08\x02\x00\x00\x00", 5); // 8-bit RGB, no interlace
    putChunk(out, "IHDR", header);
    putChunk(out, "IDAT", compressed);
    putChunk(out, "IEND", std::string());
    return out;
}

void
writeImage(const std::filesystem::path &path, const Image8 &image) {
    const std::string bytes = path.extension() == ".png" ? encodePng(image) : encodePpm(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("failed writing '" + path.string() + "'");
    }
}

Image8
readPpm(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open '" + path.string() + "'");
    }
    return decodePpm(std::string((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>()));
}

FrameDiff
compareFrames(const RenderFrame &a, const RenderFrame &b) {
    if (a.width != b.width || a.height != b.height) {
        throw std::invalid_argument("frames differ in size");
    }
    FrameDiff diff;
    diff.pixels = a.color.size();
    double sumSq = 0.0;
    for (std::size_t i = 0; i < a.color.size(); ++i) {
        const double dr = clamp01(a.color[i].r) - clamp01(b.color[i].r);
        const double dg = clamp01(a.color[i].g) - clamp01(b.color[i].g);
        const double db = clamp01(a.color[i].b) - clamp01(b.color[i].b);
        sumSq += dr * dr + dg * dg + db * db;
        const double worst = std::max({std::abs(dr), std::abs(dg), std::abs(db)});
        diff.max_abs       = std::max(diff.max_abs, worst);

        std::size_t bin = kErrorBinEdges.size();
        for (std::size_t e = 0; e < kErrorBinEdges.size(); ++e) {
            if (worst * 255.0 < kErrorBinEdges[e]) {
                bin = e;
                break;
            }
        }
        ++diff.histogram[bin];
    }
    const double channels = 3.0 * static_cast<double>(std::max<std::size_t>(diff.pixels, 1));
    diff.mse  = sumSq / channels;
    diff.psnr = diff.mse == 0.0 ? std::numeric_limits<double>::infinity()
                                : 10.0 * std::log10(1.0 / diff.mse);
    return diff;
}

} // namespace gemmsplat
