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
 * @file gradcheck.hpp
 * @brief Finite-difference audit of every reverse-mode derivative.
 *
 * Each op is reduced to a scalar f(x) = <w, op(x)> with a random cotangent w
 * (or is already a scalar loss). Every input coordinate is compared against
 * the central difference (f(x + h) - f(x - h)) / 2h. Random instances keep
 * sample coordinates away from integer cell boundaries so no difference
 * straddles a kink.
 *
 * Error per coordinate is |analytic - numeric| / max(|analytic|, |numeric|, s),
 * with s = floor * (largest analytic component of the trial). Components far
 * below the gradient scale are thus held to an absolute bound, since the
 * difference quotient cannot resolve them relatively.
 */

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace geowarp {

struct GradcheckOptions {
  std::vector<std::string> ops;  // empty: all
  int trials = 20;
  int width = 12;
  int height = 8;
  std::uint64_t seed = 0;
  double step = 1e-6;
  double tolerance = 1e-4;
  double floor = 1e-3;
  /// Test hook: perturbs every analytic gradient so the audit must fail.
  bool corrupt = false;
};

struct GradcheckTrial {
  int trial = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t coordinates = 0;
};

struct GradcheckOpReport {
  std::string op;
  std::vector<GradcheckTrial> trials;
  double max_rel_error = 0.0;
  bool passed = true;
};

struct GradcheckReport {
  std::vector<GradcheckOpReport> ops;
  double tolerance = 0.0;
  bool passed = true;
  double seconds = 0.0;

  /// One line per op; with `per_trial`, a table row per trial as well.
  std::string to_text(bool per_trial = false) const;
};

/// bilinear_sample, inverse_warp, rigid_flow, ssim, photometric, smoothness,
/// flow_difference, consistency.
const std::vector<std::string>& gradcheck_op_names();

/// Throws InvalidSpecError for unknown op names or bad options.
GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace geowarp
