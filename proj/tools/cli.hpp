// Copyright Contributors to the gemmsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Kept out of main() so tests can drive it in-process.
#pragma once

#include <iosfwd>

namespace gemmsplat::cli {

inline constexpr int kExitOk         = 0;
inline constexpr int kExitFloorBelow = 1;
inline constexpr int kExitUsage      = 2;

/// Column order of `bench` output.
inline constexpr const char *kBenchCsvHeader =
    "scene,backend,precision,batch_size,resolution_scale,width,height,reps,mean_ms,stddev_ms,"
    "preprocess_ms,duplicate_ms,sort_ms,blend_ms,pair_evaluations,macs,scalar_flops";

/// Parses `argv` and runs the selected subcommand. Normal output goes to `out`,
/// diagnostics to `err`.
int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace gemmsplat::cli
