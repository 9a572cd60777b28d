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

// Multiple-shooting transcription: the exact discrete map
// x_{k+1} = f_k(x_k, u_k, u_{k+1}) and its first-order model
// x_{k+1} ~ A_k x_k + B_k^- u_k + B_k^+ u_{k+1} + w_k about an iterate.

#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

#include "ctcs_nmpc/common.hpp"
#include "ctcs_nmpc/grid.hpp"
#include "ctcs_nmpc/propagation.hpp"

namespace ctcs_nmpc {

// Node values Z = (x_1..x_N, u_1..u_N), one column per node.
struct TrajectoryIterate {
  Matrix states;
  Matrix controls;

  int n_nodes() const { return static_cast<int>(states.cols()); }

  void Validate(int n_x, int n_u, int n_nodes_expected) const {
    Require(states.rows() == n_x && controls.rows() == n_u,
            "trajectory iterate has wrong state/input dimension");
    Require(states.cols() == n_nodes_expected &&
                controls.cols() == n_nodes_expected,
            "trajectory iterate must have one column per node");
    Require(states.allFinite() && controls.allFinite(),
            "trajectory iterate contains non-finite entries");
  }
};

struct LinearizedSegment {
  Matrix a;
  Matrix b_minus;
  Matrix b_plus;
  Vector w;
  Vector x_prop_end;  // f_k evaluated at the linearization point
};

// f_k(x_k, u_k, u_{k+1}) for zero-based interval k in [0, N-2].
template <AugmentedSystem D>
Vector DiscretizeSegment(const D& dyn, int k, const TrajectoryIterate& z,
                         const GridConfig& grid, const IntegratorConfig& cfg) {
  Require(k >= 0 && k < grid.n_intervals(), "segment index out of range");
  try {
    return PropagateSegment(dyn, grid.Node(k), grid.Node(k + 1),
                            z.states.col(k), z.controls.col(k),
                            z.controls.col(k + 1), cfg);
  } catch (const PropagationDiverged& e) {
    throw e.WithSegment(k);
  }
}

template <AugmentedSystem D>
LinearizedSegment LinearizeSegment(const D& dyn, int k,
                                   const TrajectoryIterate& z,
                                   const GridConfig& grid,
                                   const IntegratorConfig& cfg) {
  SensitivityResult s;
  try {
    s = PropagateWithSensitivities(dyn, grid.Node(k), grid.Node(k + 1),
                                   z.states.col(k), z.controls.col(k),
                                   z.controls.col(k + 1), cfg);
  } catch (const PropagationDiverged& e) {
    throw e.WithSegment(k);
  }
  LinearizedSegment seg;
  seg.w = s.x_end - s.phi_x * z.states.col(k) -
          s.phi_u_minus * z.controls.col(k) -
          s.phi_u_plus * z.controls.col(k + 1);
  seg.a = std::move(s.phi_x);
  seg.b_minus = std::move(s.phi_u_minus);
  seg.b_plus = std::move(s.phi_u_plus);
  seg.x_prop_end = std::move(s.x_end);
  return seg;
}

// Linearizes every segment about `z`. Segments are independent; with
// `threads` > 1 they are split into contiguous chunks across workers and
// the result is ordered by k either way.
template <AugmentedSystem D>
std::vector<LinearizedSegment> LinearizeAll(const D& dyn,
                                            const TrajectoryIterate& z,
                                            const GridConfig& grid,
                                            const IntegratorConfig& cfg,
                                            int threads = 1) {
  grid.Validate();
  cfg.Validate();
  z.Validate(dyn.n_x(), dyn.n_u(), grid.n_nodes);
  const int n_seg = grid.n_intervals();
  std::vector<LinearizedSegment> segs(static_cast<size_t>(n_seg));
  const int workers = std::clamp(threads, 1, n_seg);
  if (workers == 1) {
    for (int k = 0; k < n_seg; ++k) {
      segs[k] = LinearizeSegment(dyn, k, z, grid, cfg);
    }
    return segs;
  }

  std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        const int begin = n_seg * w / workers;
        const int end = n_seg * (w + 1) / workers;
        try {
          for (int k = begin; k < end; ++k) {
            segs[k] = LinearizeSegment(dyn, k, z, grid, cfg);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return segs;
}

// Column k holds x_{k+1} - f_k(x_k, u_k, u_{k+1}).
template <AugmentedSystem D>
Matrix Defects(const D& dyn, const TrajectoryIterate& z,
               const GridConfig& grid, const IntegratorConfig& cfg) {
  Matrix d(dyn.n_x(), grid.n_intervals());
  for (int k = 0; k < grid.n_intervals(); ++k) {
    d.col(k) = z.states.col(k + 1) - DiscretizeSegment(dyn, k, z, grid, cfg);
  }
  return d;
}

template <AugmentedSystem D>
Matrix DefectsFromSegments(const TrajectoryIterate& z,
                           const std::vector<LinearizedSegment>& segs,
                           const D& dyn) {
  Matrix d(dyn.n_x(), static_cast<Eigen::Index>(segs.size()));
  for (size_t k = 0; k < segs.size(); ++k) {
    d.col(k) = z.states.col(k + 1) - segs[k].x_prop_end;
  }
  return d;
}

// States generated by chaining f_k from `x1` under `controls`; the result
// has zero defects by construction.
template <AugmentedSystem D>
TrajectoryIterate RolloutIterate(const D& dyn, const Vector& x1,
                                 const Matrix& controls,
                                 const GridConfig& grid,
                                 const IntegratorConfig& cfg) {
  TrajectoryIterate z{Matrix(dyn.n_x(), grid.n_nodes), controls};
  z.states.col(0) = x1;
  for (int k = 0; k < grid.n_intervals(); ++k) {
    z.states.col(k + 1) = DiscretizeSegment(dyn, k, z, grid, cfg);
  }
  return z;
}

}  // namespace ctcs_nmpc
