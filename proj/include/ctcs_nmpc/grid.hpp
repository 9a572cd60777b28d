// Copyright 2026 The ctcs-nmpc Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     https://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Uniform node grid over the horizon and first-order-hold controls.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "ctcs_nmpc/common.hpp"

namespace ctcs_nmpc {

// Nodes t_1 = t_c < ... < t_N = t_c + t_h with spacing t_h / (N - 1).
// Node indices are zero-based throughout the library.
struct GridConfig {
  double t_c = 0.0;
  double t_h = 1.0;
  int n_nodes = 2;

  void Validate() const {
    Require(n_nodes >= 2, "grid needs at least two nodes");
    Require(std::isfinite(t_c) && std::isfinite(t_h) && t_h > 0.0,
            "horizon length must be positive and finite");
  }

  double dt() const { return t_h / (n_nodes - 1); }
  int n_intervals() const { return n_nodes - 1; }
  double t_end() const { return t_c + t_h; }

  double Node(int k) const {
    if (k == n_nodes - 1) return t_end();
    return t_c + k * dt();
  }

  // Index k of the sub-interval [t_k, t_{k+1}] that contains t; node times
  // belong to the interval they start, except the final node.
  int IntervalIndex(double t) const {
    const double slack = 1e-12 * std::max(1.0, std::abs(t_end()));
    if (t < t_c - slack || t > t_end() + slack) {
      throw OutOfRangeError("time " + std::to_string(t) +
                            " outside horizon [" + std::to_string(t_c) + ", " +
                            std::to_string(t_end()) + "]");
    }
    const int k = static_cast<int>(std::floor((t - t_c) / dt()));
    return std::clamp(k, 0, n_nodes - 2);
  }
};

// u(t) = (t_{k+1} - t)/(t_{k+1} - t_k) u_k + (t - t_k)/(t_{k+1} - t_k) u_{k+1}
inline Vector InterpolateFoh(double t, double t_k, double t_k1,
                             const Vector& u_k, const Vector& u_k1) {
  const double span = t_k1 - t_k;
  const double a = (t_k1 - t) / span;
  const double b = (t - t_k) / span;
  return a * u_k + b * u_k1;
}

// `controls` holds one column per node.
inline Vector FohControl(double t, const GridConfig& grid,
                         const Matrix& controls) {
  Require(controls.cols() == grid.n_nodes,
          "control schedule must have one column per node");
  const int k = grid.IntervalIndex(t);
  return InterpolateFoh(t, grid.Node(k), grid.Node(k + 1), controls.col(k),
                        controls.col(k + 1));
}

}  // namespace ctcs_nmpc
