// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "cli.hpp"

#include <gemmsplat/image.hpp>
#include <gemmsplat/renderer.hpp>
#include <gemmsplat/synthetic.hpp>

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

namespace gemmsplat::cli {

namespace {

class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

const std::map<std::string, Backend> kBackends = {{"reference", Backend::Reference},
                                                  {"gemm", Backend::Gemm}};
const std::map<std::string, Precision> kPrecisions = {{"full", Precision::Full},
                                                      {"mixed", Precision::Mixed}};

const char *
backendName(Backend b) {
    return b == Backend::Reference ? "reference" : "gemm";
}

const char *
precisionName(Precision p) {
    return p == Precision::Full ? "full" : "mixed";
}

Rgb
parseBackground(const std::string &text) {
    std::vector<float> values;
    std::stringstream in(text);
    for (std::string part; std::getline(in, part, ',');) {
        std::size_t used = 0;
        float v          = 0.f;
        try {
            v = std::stof(part, &used);
        } catch (const std::exception &) {
            used = 0;
        }
        if (used == 0 || used != part.size() || !std::isfinite(v)) {
            throw UsageError("--background expects three numbers r,g,b, got '" + text + "'");
        }
        values.push_back(v);
    }
    if (values.size() != 3) {
        throw UsageError("--background expects three numbers r,g,b, got '" + text + "'");
    }
    return {values[0], values[1], values[2]};
}

/// Flags shared by every subcommand that renders.
struct FrameOptions {
    std::string scene;
    std::string camera;
    Precision precision = Precision::Full;
    int tile_size  = 16;
    int workers    = 1;
    std::string background = "0,0,0";

    void addTo(CLI::App &cmd, bool requireInputs) {
        auto *s = cmd.add_option("--scene", scene, "Scene file (binary PLY)");
        auto *c = cmd.add_option("--camera", camera, "Camera file (JSON)");
        if (requireInputs) {
            s->required();
            c->required();
        }
        cmd.add_option("--precision", precision, "GEMM operand precision")
            ->transform(CLI::CheckedTransformer(kPrecisions, CLI::ignore_case))
            ->capture_default_str();
        cmd.add_option("--tile-size", tile_size, "Tile edge in pixels")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd.add_option("--workers", workers, "Tile worker threads")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd.add_option("--background", background, "Background color r,g,b")
            ->capture_default_str();
    }

    RenderConfig config(Backend backend, int batchSize) const {
        RenderConfig rc;
        rc.backend    = backend;
        rc.precision  = precision;
        rc.tile_size  = tile_size;
        rc.batch_size = batchSize;
        rc.workers    = workers;
        rc.background = parseBackground(background);
        return rc;
    }
};

void
printStats(std::ostream &out, const RenderConfig &config, const Scene &scene,
           const RenderFrame &frame) {
    const RenderStats &s = frame.stats;
    out << std::fixed << std::setprecision(3);
    out << "backend: " << backendName(config.backend) << '\n'
        << "precision: " << precisionName(config.precision) << '\n'
        << "resolution: " << frame.width << 'x' << frame.height << '\n'
        << "gaussians: " << s.gaussians << '\n'
        << "normalized_rotations: " << scene.normalized_rotations << '\n'
        << "splats: " << s.splats << '\n'
        << "duplicates: " << s.duplicates << '\n'
        << "busy_tiles: " << s.busy_tiles << '\n'
        << "preprocess_ms: " << s.timings.preprocess_ms << '\n'
        << "duplicate_ms: " << s.timings.duplicate_ms << '\n'
        << "sort_ms: " << s.timings.sort_ms << '\n'
        << "blend_ms: " << s.timings.blend_ms << '\n'
        << "total_ms: " << s.timings.total_ms << '\n'
        << "pair_evaluations: " << s.kernel.pair_evaluations << '\n'
        << "macs: " << s.kernel.macs << '\n'
        << "scalar_flops: " << s.kernel.scalar_flops << '\n';
    out.unsetf(std::ios::floatfield);
}

struct RenderCommand {
    FrameOptions frame;
    Backend backend = Backend::Gemm;
    int batch_size  = 256;
    std::string out = "render.ppm";

    void addTo(CLI::App &cmd) {
        frame.addTo(cmd, true);
        cmd.add_option("--backend", backend, "Blend backend")
            ->transform(CLI::CheckedTransformer(kBackends, CLI::ignore_case))
            ->capture_default_str();
        cmd.add_option("--batch-size", batch_size, "Splats per blend batch")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd.add_option("--out", out, "Output image (.ppm or .png)")->capture_default_str();
    }

    int run(std::ostream &os) const {
        const RenderConfig config = frame.config(backend, batch_size);
        const Scene scene         = loadScene(frame.scene);
        const Camera camera       = loadCamera(frame.camera);
        const RenderFrame result  = render(scene, camera, config);
        writeImage(out, toImage8(result));
        os << "image: " << out << '\n';
        printStats(os, config, scene, result);
        return kExitOk;
    }
};

struct CompareCommand {
    FrameOptions frame;
    Backend baseline  = Backend::Reference;
    Backend candidate = Backend::Gemm;
    int batch_size    = 256;
    std::optional<double> psnr_floor;

    void addTo(CLI::App &cmd) {
        frame.addTo(cmd, true);
        cmd.add_option("--baseline", baseline, "Backend treated as ground truth")
            ->transform(CLI::CheckedTransformer(kBackends, CLI::ignore_case))
            ->capture_default_str();
        cmd.add_option("--backend", candidate, "Backend under test")
            ->transform(CLI::CheckedTransformer(kBackends, CLI::ignore_case))
            ->capture_default_str();
        cmd.add_option("--batch-size", batch_size, "Splats per blend batch")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd.add_option("--psnr-floor", psnr_floor,
                       "Minimum PSNR in dB (default 45, none for mixed precision)");
    }

    /// The baseline always runs at full precision.
    int run(std::ostream &os) const {
        const Scene scene   = loadScene(frame.scene);
        const Camera camera = loadCamera(frame.camera);
        RenderConfig baseConfig = frame.config(baseline, batch_size);
        baseConfig.precision    = Precision::Full;
        const RenderConfig testConfig = frame.config(candidate, batch_size);
        const RenderFrame a = render(scene, camera, baseConfig);
        const RenderFrame b = render(scene, camera, testConfig);
        const FrameDiff diff = compareFrames(a, b);

        std::optional<double> floor = psnr_floor;
        if (!floor && !(candidate == Backend::Gemm && frame.precision == Precision::Mixed)) {
            floor = 45.0;
        }
        const bool pass = !floor || diff.psnr >= *floor;

        os << "baseline: " << backendName(baseline) << " (full)\n"
           << "candidate: " << backendName(candidate) << " (" << precisionName(frame.precision)
           << ")\n";
        os << "psnr_db: ";
        if (diff.identical()) {
            os << "inf\n";
        } else {
            os << std::fixed << std::setprecision(3) << diff.psnr << '\n';
        }
        os << std::fixed << std::setprecision(6) << "max_abs_error: " << diff.max_abs << " ("
           << std::setprecision(3) << diff.max_abs * 255.0 << "/255)\n";
        os.unsetf(std::ios::floatfield);
        os << "pixels: " << diff.pixels << '\n'
           << "histogram (per-pixel max channel error, units of 1/255):\n";
        double lower = 0.0;
        for (std::size_t i = 0; i < diff.histogram.size(); ++i) {
            os << "  [" << lower << ", ";
            if (i < kErrorBinEdges.size()) {
                os << kErrorBinEdges[i];
                lower = kErrorBinEdges[i];
            } else {
                os << "inf";
            }
            os << "): " << diff.histogram[i] << '\n';
        }
        os << "psnr_floor: ";
        if (floor) {
            os << *floor << '\n';
        } else {
            os << "none\n";
        }
        os << "result: " << (pass ? "PASS" : "FAIL") << '\n';
        return pass ? kExitOk : kExitFloorBelow;
    }
};

struct BenchCommand {
    FrameOptions frame;
    std::vector<Backend> backends = {Backend::Reference, Backend::Gemm};
    std::vector<int> batch_sizes  = {32, 64, 128, 256};
    std::vector<double> res_scales = {1.0, 2.0, 3.0};
    int reps   = 10;
    int warmup = 2;
    std::size_t synthetic_count = 2000;
    int synthetic_size          = 256;
    std::uint64_t seed          = 1;
    std::string out;

    void addTo(CLI::App &cmd) {
        frame.addTo(cmd, false);
        cmd.add_option("--backend", backends, "Backends to time")
            ->transform(CLI::CheckedTransformer(kBackends, CLI::ignore_case))
            ->delimiter(',');
        cmd.add_option("--batch-size", batch_sizes, "Batch sizes to sweep")
            ->check(CLI::PositiveNumber)
            ->delimiter(',')
            ->capture_default_str();
        cmd.add_option("--res-scale", res_scales, "Resolution scales to sweep")
            ->check(CLI::PositiveNumber)
            ->delimiter(',')
            ->capture_default_str();
        cmd.add_option("--reps", reps, "Timed repetitions")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd.add_option("--warmup", warmup, "Untimed warmup runs")
            ->check(CLI::NonNegativeNumber)
            ->capture_default_str();
        cmd.add_option("--synthetic-count", synthetic_count,
                       "Gaussians in the built-in scene (used without --scene)")
            ->capture_default_str();
        cmd.add_option("--synthetic-size", synthetic_size, "Built-in scene frame edge in pixels")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd.add_option("--seed", seed, "Built-in scene seed")->capture_default_str();
        cmd.add_option("--out", out, "CSV destination (default: stdout)");
    }

    int run(std::ostream &os) const {
        if (frame.scene.empty() != frame.camera.empty()) {
            throw UsageError("--scene and --camera must be given together");
        }
        Scene scene;
        Camera camera;
        std::string name;
        if (frame.scene.empty()) {
            SyntheticSpec spec;
            spec.count  = synthetic_count;
            spec.width  = synthetic_size;
            spec.height = synthetic_size;
            spec.seed   = seed;
            SyntheticScene synth = makeSyntheticScene(spec);
            scene  = std::move(synth.scene);
            camera = synth.camera;
            name   = "synthetic-" + std::to_string(synthetic_count) + "-" + std::to_string(seed);
        } else {
            scene  = loadScene(frame.scene);
            camera = loadCamera(frame.camera);
            name   = std::filesystem::path(frame.scene).stem().string();
        }

        std::ofstream file;
        if (!out.empty()) {
            file.open(out);
            if (!file) {
                throw LoadError("cannot open '" + out + "' for writing");
            }
        }
        std::ostream &csv = out.empty() ? os : file;
        csv << kBenchCsvHeader << '\n';
        for (Backend backend : backends) {
            for (double scale : res_scales) {
                const Camera scaled = camera.scaled(scale);
                for (int batch : batch_sizes) {
                    csv << benchRow(name, scene, scaled, frame.config(backend, batch), scale)
                        << '\n';
                }
            }
        }
        return kExitOk;
    }

    std::string benchRow(const std::string &name, const Scene &scene, const Camera &camera,
                         const RenderConfig &config, double scale) const {
        for (int i = 0; i < warmup; ++i) {
            render(scene, camera, config);
        }
        std::vector<double> totals;
        StageTimings sums;
        std::optional<KernelCounters> kernel;
        for (int i = 0; i < reps; ++i) {
            const RenderFrame f = render(scene, camera, config);
            totals.push_back(f.stats.timings.total_ms);
            sums.preprocess_ms += f.stats.timings.preprocess_ms;
            sums.duplicate_ms += f.stats.timings.duplicate_ms;
            sums.sort_ms += f.stats.timings.sort_ms;
            sums.blend_ms += f.stats.timings.blend_ms;
            if (kernel && !(*kernel == f.stats.kernel)) {
                throw std::logic_error("kernel counters changed between repetitions");
            }
            kernel = f.stats.kernel;
        }
        const double n = static_cast<double>(reps);
        double mean    = 0.0;
        for (double t : totals) {
            mean += t;
        }
        mean /= n;
        double var = 0.0;
        for (double t : totals) {
            var += (t - mean) * (t - mean);
        }
        const double stddev = reps > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;

        std::ostringstream row;
        row << name << ',' << backendName(config.backend) << ','
            << precisionName(config.precision) << ',' << config.batch_size << ',' << scale << ','
            << camera.width << ',' << camera.height << ',' << reps << ',' << std::fixed
            << std::setprecision(4) << mean << ',' << stddev << ',' << sums.preprocess_ms / n
            << ',' << sums.duplicate_ms / n << ',' << sums.sort_ms / n << ','
            << sums.blend_ms / n << ',' << kernel->pair_evaluations << ',' << kernel->macs << ','
            << kernel->scalar_flops;
        return row.str();
    }
};

struct SynthCommand {
    SyntheticSpec spec;
    std::string scene;
    std::string camera;

    void addTo(CLI::App &cmd) {
        cmd.add_option("--count", spec.count, "Number of Gaussians")->capture_default_str();
        cmd.add_option("--width", spec.width, "Frame width")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd.add_option("--height", spec.height, "Frame height")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd.add_option("--seed", spec.seed, "Random seed")->capture_default_str();
        cmd.add_option("--sh-degree", spec.sh_degree, "SH degree")
            ->check(CLI::Range(0, kMaxShDegree))
            ->capture_default_str();
        cmd.add_option("--scene", scene, "Output scene file")->required();
        cmd.add_option("--camera", camera, "Output camera file")->required();
    }

    int run(std::ostream &os) const {
        const SyntheticScene s = makeSyntheticScene(spec);
        saveScene(scene, s.scene);
        saveCamera(camera, s.camera);
        os << "wrote " << s.scene.gaussians.size() << " gaussians to " << scene << " and camera to "
           << camera << '\n';
        return kExitOk;
    }
};

} // namespace

int
run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    CLI::App app{"Tile-based Gaussian splatting renderer with a GEMM blend backend", "gemmsplat"};
    app.require_subcommand(1);

    RenderCommand renderCmd;
    CompareCommand compareCmd;
    BenchCommand benchCmd;
    SynthCommand synthCmd;
    CLI::App *renderApp = app.add_subcommand("render", "Render one frame to an image");
    CLI::App *compareApp =
        app.add_subcommand("compare", "Render two backends and report the difference");
    CLI::App *benchApp = app.add_subcommand("bench", "Time render sweeps and emit CSV");
    CLI::App *synthApp = app.add_subcommand("synth", "Write a seeded random scene and camera");
    renderCmd.addTo(*renderApp);
    compareCmd.addTo(*compareApp);
    benchCmd.addTo(*benchApp);
    synthCmd.addTo(*synthApp);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (renderApp->parsed()) {
            return renderCmd.run(out);
        }
        if (compareApp->parsed()) {
            return compareCmd.run(out);
        }
        if (benchApp->parsed()) {
            return benchCmd.run(out);
        }
        return synthCmd.run(out);
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}

} // namespace gemmsplat::cli
