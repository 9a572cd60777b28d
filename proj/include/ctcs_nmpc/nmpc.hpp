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

// Receding-horizon loop: sense, solve a few SCP iterations, shift the
// solution forward as the next initialization, and apply the first K
// sub-intervals of FOH control to the plant.

#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ctcs_nmpc/common.hpp"
#include "ctcs_nmpc/grid.hpp"
#include "ctcs_nmpc/log.hpp"
#include "ctcs_nmpc/obstacles.hpp"
#include "ctcs_nmpc/problem.hpp"
#include "ctcs_nmpc/propagation.hpp"
#include "ctcs_nmpc/scp.hpp"
#include "ctcs_nmpc/transcription.hpp"

namespace ctcs_nmpc {

struct NmpcConfig {
  double total_time = 30.0;  // T
  double horizon = 8.0;      // t_h
  int shift = 4;             // K, nodes per MPC step
  int n_nodes = 17;          // N
  int j_max = 3;

  double dt() const { return horizon / (n_nodes - 1); }
  double dt_mpc() const { return shift * dt(); }

  // Runs at t_c = 0, dt_mpc, ... while t_c <= T.
  int NumRuns() const {
    return static_cast<int>(std::floor(total_time / dt_mpc() + 1e-9)) + 1;
  }

  void Validate() const {
    Require(n_nodes >= 2, "N must be >= 2");
    Require(horizon > 0.0 && std::isfinite(horizon), "t_h must be positive");
    Require(total_time >= 0.0 && std::isfinite(total_time),
            "T must be nonnegative");
    Require(shift >= 1 && shift <= n_nodes - 1, "K must satisfy 1 <= K <= N-1");
    Require(j_max >= 1, "j_max must be >= 1");
  }

  GridConfig Grid(double t_c) const { return {t_c, horizon, n_nodes}; }
};

struct SensorModel {
  double r_sens = 6.0;
  std::vector<EllipticalObstacle> obstacles;
};

struct SensedState {
  Vector x_hat;
  std::vector<int> active_obstacles;
};

// Exact-state sensor: resets the accumulators (l, y) for the new horizon and
// reports obstacles with ||S^i (r - r_obs^i)|| <= r_sens.
inline SensedState Sense(const Vector& x_true, double /*t_c*/,
                         const SensorModel& sensor) {
  Require(sensor.r_sens > 0.0, "sensor range must be positive");
  Require(x_true.size() >= 4, "sensing needs a position in the state");
  SensedState out;
  out.x_hat = x_true;
  out.x_hat.tail(2).setZero();
  const Eigen::Vector2d r = x_true.head<2>();
  for (size_t i = 0; i < sensor.obstacles.size(); ++i) {
    if (sensor.obstacles[i].ScaledDistance(r) <= sensor.r_sens) {
      out.active_obstacles.push_back(static_cast<int>(i));
    }
  }
  return out;
}

// Initialization for the next run from the solution on `grid`: nodes
// K+1..N move to 1..N-K, the last K controls repeat u_N, and the last K
// states are propagated from x_N under that constant control.
template <AugmentedSystem D>
TrajectoryIterate WarmStartShift(const D& dyn, const TrajectoryIterate& prev,
                                 int k_shift, const GridConfig& grid,
                                 const IntegratorConfig& cfg) {
  grid.Validate();
  const int n = grid.n_nodes;
  Require(k_shift >= 1 && k_shift <= n - 1, "K must satisfy 1 <= K <= N-1");
  prev.Validate(dyn.n_x(), dyn.n_u(), n);

  TrajectoryIterate next{Matrix(prev.states.rows(), n),
                         Matrix(prev.controls.rows(), n)};
  const int kept = n - k_shift;
  next.states.leftCols(kept) = prev.states.rightCols(kept);
  next.controls.leftCols(kept) = prev.controls.rightCols(kept);
  const Vector u_last = prev.controls.col(n - 1);
  for (int j = kept; j < n; ++j) next.controls.col(j) = u_last;

  const double dt = grid.dt();
  const double t_end = grid.t_end();
  Vector x = prev.states.col(n - 1);
  for (int j = 1; j <= k_shift; ++j) {
    const double ta = t_end + (j - 1) * dt;
    const double tb = t_end + j * dt;
    x = PropagateSegment(dyn, ta, tb, x, u_last, u_last, cfg);
    next.states.col(kept - 1 + j) = x;
  }
  return next;
}

// Shifts the running-cost and violation accumulators so node 1 starts at
// zero, matching the pinned x_c = (xi_c, 0, 0).
inline TrajectoryIterate RebaseAccumulators(TrajectoryIterate z) {
  const int il = static_cast<int>(z.states.rows()) - 2;
  const double l0 = z.states(il, 0);
  const double y0 = z.states(il + 1, 0);
  z.states.row(il).array() -= l0;
  z.states.row(il + 1).array() -= y0;
  return z;
}

struct EvolveResult {
  Vector x_next;
  std::vector<DenseSample> dense;
};

// Applies the FOH control of `z` on [t_c, t_c + K dt] to the plant by dense
// single shooting.
template <AugmentedSystem D>
EvolveResult Evolve(const D& plant, const Vector& x_true,
                    const GridConfig& grid, const TrajectoryIterate& z,
                    int k_shift, int dense_substeps) {
  Require(k_shift >= 1 && k_shift <= grid.n_intervals(),
          "evolve step must lie inside the horizon");
  EvolveResult out;
  out.dense = PropagateDense(plant, grid, z.controls, grid.t_c,
                             grid.Node(k_shift), x_true, dense_substeps);
  out.x_next = out.dense.back().x;
  return out;
}

struct NmpcRunRecord {
  int index = 0;
  double t_c = 0.0;
  std::vector<int> active_obstacles;
  TrajectoryIterate z;
  std::vector<ScpMetrics> metrics;
  Matrix defects;
  Matrix applied_controls;  // u_1..u_{K+1} of z
  std::vector<DenseSample> dense;
};

// Problem-specific pieces of the loop.
struct NmpcScenario {
  SensorModel sensor;
  // Horizon problem for the sensed state and active obstacle set.
  std::function<HorizonProblem(double t_c, const SensedState& sensed)>
      make_horizon;
  // Plant dynamics used by Evolve; its y integrates the audited violation.
  AugmentedDynamics plant;
  Vector x0;  // plant state at t = 0
};

struct NmpcOutcome {
  std::vector<NmpcRunRecord> records;
  std::optional<std::string> error;  // set if a stage aborted the loop

  bool ok() const { return !error.has_value(); }
};

inline NmpcOutcome RunNmpc(const NmpcConfig& cfg, const NmpcScenario& scenario,
                           const TrajectoryIterate& z_init, ScpConfig scp_cfg) {
  cfg.Validate();
  scp_cfg.j_max = cfg.j_max;
  NmpcOutcome outcome;
  Vector x_true = scenario.x0;
  TrajectoryIterate guess = z_init;
  const int runs = cfg.NumRuns();
  for (int i = 0; i < runs; ++i) {
    const double t_c = i * cfg.dt_mpc();
    try {
      SensedState sensed = Sense(x_true, t_c, scenario.sensor);
      const HorizonProblem hp = scenario.make_horizon(t_c, sensed);
      const ScpResult scp =
          ScpSolve(RebaseAccumulators(guess), hp, scp_cfg);
      guess = WarmStartShift(hp.dynamics, scp.z, cfg.shift, hp.grid,
                             scp_cfg.integrator);
      EvolveResult ev = Evolve(scenario.plant, x_true, hp.grid, scp.z,
                               cfg.shift, scp_cfg.integrator.dense_substeps);

      NmpcRunRecord rec;
      rec.index = i;
      rec.t_c = t_c;
      rec.active_obstacles = std::move(sensed.active_obstacles);
      rec.z = scp.z;
      rec.metrics = scp.metrics;
      rec.defects = scp.defects;
      rec.applied_controls = scp.z.controls.leftCols(cfg.shift + 1);
      rec.dense = std::move(ev.dense);
      Log()->info(
          "nmpc run={} t_c={:.3f} active={} scp_iters={} J_prox={:.3e} "
          "max_defect={:.3e}",
          i, t_c, rec.active_obstacles.size(), rec.metrics.size(),
          rec.metrics.back().j_prox,
          rec.defects.size() ? rec.defects.cwiseAbs().maxCoeff() : 0.0);
      outcome.records.push_back(std::move(rec));
      x_true = ev.x_next;
    } catch (const std::exception& e) {
      outcome.error = "run " + std::to_string(i) + ": " + e.what();
      Log()->error("nmpc aborted: {}", *outcome.error);
      break;
    }
  }
  return outcome;
}

}  // namespace ctcs_nmpc
