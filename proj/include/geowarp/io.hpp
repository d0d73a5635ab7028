// Copyright 2026 The geowarp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file io.hpp
 * @brief Readers and writers for the interchange formats.
 *
 *  - PGM (P5) / PPM (P6), 8 bit, linear map to [0,1]
 *  - PFM, little-endian (scale -1.0), rows stored bottom-to-top
 *  - Middlebury .flo: float32 magic 202021.25, int32 width, int32 height,
 *    interleaved float32 (u, v), row-major, little-endian
 *  - pose text: one pose per line, 12 numbers, row-major 3x4 [R | t]
 *
 * Writers are deterministic, so read -> write reproduces the file bytes.
 */

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "geowarp/core_types.hpp"
#include "geowarp/rigid_geometry.hpp"

namespace geowarp::io {

Image read_pnm(const std::filesystem::path& path);
/// Writes P5 for one channel, P6 for three.
void write_pnm(const std::filesystem::path& path, const Image& image);

Mask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const Mask& mask);

/// One ("Pf") or three ("PF") channel float grid.
Grid read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const Grid& grid);

FlowField read_flo(const std::filesystem::path& path);
void write_flo(const std::filesystem::path& path, const FlowField& flow);

std::vector<Matrix34> read_poses(const std::filesystem::path& path);
void write_poses(const std::filesystem::path& path, const std::vector<Matrix34>& poses);

/// Whole-file helpers shared by the writers and the CLI.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace geowarp::io
