// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "support.hpp"

#include "cli.hpp"

#include <gemmsplat/image.hpp>

#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

using namespace gemmsplat;
using namespace gemmsplat::test;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

Result
runCli(std::vector<std::string> args) {
    args.insert(args.begin(), "gemmsplat");
    std::vector<const char *> argv;
    for (const auto &a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out, err;
    Result r;
    r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out  = out.str();
    r.err  = err.str();
    return r;
}

std::vector<std::string>
splitLines(const std::string &text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        lines.push_back(line);
    }
    return lines;
}

const std::string kScene  = dataPath("golden_scene.ply").string();
const std::string kCamera = dataPath("golden_camera.json").string();

} // namespace

TEST_CASE("render matches the committed goldens bit for bit") {
    TempDir dir("cli-golden");
    for (std::string backend : {"reference", "gemm"}) {
        const std::string out = (dir / (backend + ".ppm")).string();
        const Result r = runCli({"render", "--scene", kScene, "--camera", kCamera, "--backend",
                                 backend, "--out", out});
        REQUIRE(r.code == cli::kExitOk);
        CHECK(readFile(out) == readFile(dataPath("golden_" + backend + ".ppm")));
        CHECK(r.out.find("splats: 3\n") != std::string::npos);
        CHECK(r.out.find("duplicates: ") != std::string::npos);
        CHECK(r.out.find("blend_ms: ") != std::string::npos);
        CHECK(r.out.find("normalized_rotations: 2\n") != std::string::npos);
    }
}

TEST_CASE("render writes PNG when asked") {
    TempDir dir("cli-png");
    const std::string out = (dir / "frame.png").string();
    REQUIRE(runCli({"render", "--scene", kScene, "--camera", kCamera, "--out", out}).code == 0);
    CHECK(readFile(out).substr(1, 3) == "PNG");
}

TEST_CASE("empty scene renders a solid background image") {
    TempDir dir("cli-empty");
    saveScene(dir / "empty.ply", Scene{});
    const std::string out = (dir / "bg.ppm").string();
    const Result r = runCli({"render", "--scene", (dir / "empty.ply").string(), "--camera", kCamera,
                             "--background", "0.2,0.4,1", "--out", out});
    REQUIRE(r.code == 0);
    const Image8 img = readPpm(out);
    CHECK(img.width == 64);
    CHECK(img.height == 48);
    for (std::size_t i = 0; i < img.rgb.size(); i += 3) {
        CHECK(img.rgb[i] == 51);
        CHECK(img.rgb[i + 1] == 102);
        CHECK(img.rgb[i + 2] == 255);
    }
}

TEST_CASE("usage and input errors exit with code 2") {
    SUBCASE("missing scene file") {
        const Result r = runCli({"render", "--scene", "/nonexistent/scene.ply", "--camera", kCamera});
        CHECK(r.code == cli::kExitUsage);
        CHECK(r.err.find("/nonexistent/scene.ply") != std::string::npos);
    }
    SUBCASE("missing required flag") {
        const Result r = runCli({"render", "--camera", kCamera});
        CHECK(r.code == cli::kExitUsage);
        CHECK(r.err.find("--scene") != std::string::npos);
    }
    SUBCASE("no subcommand") {
        CHECK(runCli({}).code == cli::kExitUsage);
    }
    SUBCASE("bad enum value") {
        CHECK(runCli({"render", "--scene", kScene, "--camera", kCamera, "--backend", "gpu"}).code ==
              cli::kExitUsage);
    }
    SUBCASE("bad background") {
        const Result r = runCli(
            {"render", "--scene", kScene, "--camera", kCamera, "--background", "1,2"});
        CHECK(r.code == cli::kExitUsage);
        CHECK(r.err.find("--background") != std::string::npos);
    }
    SUBCASE("non-positive tile size") {
        CHECK(runCli({"render", "--scene", kScene, "--camera", kCamera, "--tile-size", "0"}).code ==
              cli::kExitUsage);
    }
    SUBCASE("malformed camera") {
        TempDir dir("cli-cam");
        std::ofstream(dir / "cam.json") << R"({"width": 0, "height": 4, "fx": 1, "fy": 1,
            "world_to_camera": [1,0,0,0,0,1,0,0,0,0,1,0,0,0,0,1]})";
        const Result r = runCli({"render", "--scene", kScene, "--camera", (dir / "cam.json").string()});
        CHECK(r.code == cli::kExitUsage);
        CHECK(r.err.find("non-positive resolution") != std::string::npos);
    }
    SUBCASE("unwritable output") {
        CHECK(runCli({"render", "--scene", kScene, "--camera", kCamera, "--out",
                      "/nonexistent/dir/x.ppm"})
                  .code == cli::kExitUsage);
    }
}

TEST_CASE("compare") {
    SUBCASE("a backend against itself reports the infinity sentinel") {
        const Result r = runCli({"compare", "--scene", kScene, "--camera", kCamera, "--baseline",
                                 "gemm", "--backend", "gemm"});
        CHECK(r.code == 0);
        CHECK(r.out.find("psnr_db: inf\n") != std::string::npos);
        CHECK(r.out.find("max_abs_error: 0.000000") != std::string::npos);
        CHECK(r.out.find("  [0, 0.5): 3072\n") != std::string::npos);
    }
    SUBCASE("reference against full-precision gemm clears the default floor") {
        const Result r = runCli({"compare", "--scene", kScene, "--camera", kCamera});
        CHECK(r.code == 0);
        CHECK(r.out.find("psnr_floor: 45\n") != std::string::npos);
        CHECK(r.out.find("result: PASS") != std::string::npos);
    }
    SUBCASE("mixed precision has no floor by default") {
        const Result r = runCli(
            {"compare", "--scene", kScene, "--camera", kCamera, "--precision", "mixed"});
        CHECK(r.code == 0);
        CHECK(r.out.find("psnr_floor: none\n") != std::string::npos);
        CHECK(r.out.find("candidate: gemm (mixed)") != std::string::npos);
    }
    SUBCASE("a floor above the measured PSNR exits 1") {
        TempDir dir("cli-floor");
        const Result synth = runCli({"synth", "--count", "400", "--width", "64", "--height", "64",
                                     "--scene", (dir / "s.ply").string(), "--camera",
                                     (dir / "c.json").string()});
        REQUIRE(synth.code == 0);
        const Result r =
            runCli({"compare", "--scene", (dir / "s.ply").string(), "--camera",
                    (dir / "c.json").string(), "--precision", "mixed", "--psnr-floor", "500"});
        CHECK(r.code == cli::kExitFloorBelow);
        CHECK(r.out.find("result: FAIL") != std::string::npos);
    }
}

TEST_CASE("bench emits one CSV row per combination") {
    TempDir dir("cli-bench");
    const std::string csv = (dir / "bench.csv").string();
    const Result r = runCli({"bench", "--synthetic-count", "300", "--synthetic-size", "48",
                             "--reps", "1", "--warmup", "0", "--out", csv});
    REQUIRE(r.code == 0);
    const auto lines = splitLines(readFile(csv));
    REQUIRE(lines.size() == 1 + 2 * 3 * 4);
    CHECK(lines[0] == cli::kBenchCsvHeader);
    const auto columns = std::count(lines[0].begin(), lines[0].end(), ',') + 1;
    std::set<std::string> combos;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        CHECK(std::count(lines[i].begin(), lines[i].end(), ',') + 1 == columns);
        std::istringstream row(lines[i]);
        std::vector<std::string> cells;
        for (std::string cell; std::getline(row, cell, ',');) {
            cells.push_back(cell);
        }
        combos.insert(cells[1] + "/" + cells[3] + "/" + cells[4]);
        const auto pairs = std::stoull(cells[14]);
        const auto macs  = std::stoull(cells[15]);
        const auto flops = std::stoull(cells[16]);
        if (cells[1] == "gemm") {
            CHECK(macs == 8 * pairs);
            CHECK(flops == 0);
        } else {
            CHECK(macs == 0);
            CHECK(flops == 11 * pairs);
        }
    }
    CHECK(combos.size() == 24);
    CHECK(combos.count("gemm/32/3") == 1);
    CHECK(combos.count("reference/256/1") == 1);
}

TEST_CASE("bench counters repeat exactly across runs") {
    auto counters = [] {
        const Result r = runCli({"bench", "--synthetic-count", "200", "--synthetic-size", "40",
                                 "--reps", "2", "--warmup", "1", "--res-scale", "1",
                                 "--batch-size", "64", "--backend", "gemm"});
        REQUIRE(r.code == 0);
        const auto lines = splitLines(r.out);
        REQUIRE(lines.size() == 2);
        std::vector<std::string> cells;
        std::istringstream row(lines[1]);
        for (std::string cell; std::getline(row, cell, ',');) {
            cells.push_back(cell);
        }
        return std::vector<std::string>(cells.end() - 3, cells.end());
    };
    CHECK(counters() == counters());
}

TEST_CASE("bench on a scene file") {
    const Result r = runCli({"bench", "--scene", kScene, "--camera", kCamera, "--reps", "1",
                             "--warmup", "0", "--res-scale", "1,2", "--batch-size", "32,256"});
    REQUIRE(r.code == 0);
    const auto lines = splitLines(r.out);
    CHECK(lines.size() == 1 + 2 * 2 * 2);
    CHECK(lines[1].rfind("golden_scene,", 0) == 0);
    CHECK(runCli({"bench", "--scene", kScene}).code == cli::kExitUsage);
}

TEST_CASE("help lists every documented flag") {
    for (const auto &[command, flags] :
         std::vector<std::pair<std::string, std::vector<std::string>>>{
             {"render",
              {"--scene", "--camera", "--backend", "--precision", "--tile-size", "--batch-size",
               "--workers", "--background", "--out"}},
             {"compare",
              {"--scene", "--camera", "--backend", "--baseline", "--precision", "--tile-size",
               "--batch-size", "--workers", "--background", "--psnr-floor"}},
             {"bench",
              {"--scene", "--camera", "--backend", "--precision", "--tile-size", "--batch-size",
               "--workers", "--background", "--out", "--reps", "--warmup", "--res-scale"}},
         }) {
        const Result r = runCli({command, "--help"});
        CHECK(r.code == 0);
        for (const auto &flag : flags) {
            CAPTURE(command);
            CAPTURE(flag);
            CHECK(r.out.find(flag) != std::string::npos);
        }
    }
}

TEST_CASE("synth writes a loadable scene and camera") {
    TempDir dir("cli-synth");
    const Result r = runCli({"synth", "--count", "50", "--width", "32", "--height", "24",
                             "--seed", "3", "--scene", (dir / "s.ply").string(), "--camera",
                             (dir / "c.json").string()});
    REQUIRE(r.code == 0);
    CHECK(loadScene(dir / "s.ply").gaussians.size() == 50);
    CHECK(loadCamera(dir / "c.json").width == 32);
}
