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

// Acceptance criteria for the primary library, each a self-contained check
// against an independent reference. Shared by the acceptance binary and the
// `check` subcommand of the command-line tool.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ctcs_nmpc/conic.hpp"
#include "ctcs_nmpc/double_integrator.hpp"
#include "ctcs_nmpc/nmpc.hpp"
#include "ctcs_nmpc/scp.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace ctcs_nmpc::acceptance {

namespace di = double_integrator;

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;
};

inline std::string Format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

// Closed-loop runs are expensive; each is computed once on first use.
class Context {
 public:
  explicit Context(di::DemoSetup setup) : setup_(std::move(setup)) {}

  const di::DemoSetup& setup() const { return setup_; }

  const di::DemoResult& Ctcs() { return Lazy(ctcs_, di::RunMode::kCtcs, setup_); }
  const di::DemoResult& NodeOnly() {
    return Lazy(node_, di::RunMode::kNodeOnly, setup_);
  }
  // Ten SCP iterations per run without early exit.
  const di::DemoResult& CtcsTenIterations() {
    di::DemoSetup s = setup_;
    s.nmpc.j_max = 10;
    s.scp.j_max = 10;
    s.scp.converge_tol = 0.0;
    return Lazy(ten_, di::RunMode::kCtcs, s);
  }

 private:
  static const di::DemoResult& Lazy(std::unique_ptr<di::DemoResult>& slot,
                                    di::RunMode mode,
                                    const di::DemoSetup& s) {
    if (!slot) slot = std::make_unique<di::DemoResult>(di::RunDemo(mode, s));
    return *slot;
  }

  di::DemoSetup setup_;
  std::unique_ptr<di::DemoResult> ctcs_;
  std::unique_ptr<di::DemoResult> node_;
  std::unique_ptr<di::DemoResult> ten_;
};

inline CriterionResult Criterion1(Context& ctx) {
  const di::DemoResult& r = ctx.Ctcs();
  const double v = r.summary.max_pointwise_violation;
  const double wall = r.summary.wall_seconds;
  return {1, "ctcs continuous-time obstacle satisfaction",
          r.outcome.ok() && v <= 1e-6 && wall < 10.0,
          Format("max pointwise violation %.3e (<= 1e-6), wall %.2f s (< 10)",
                 v, wall)};
}

inline CriterionResult Criterion2(Context& ctx) {
  const di::DemoResult& r = ctx.NodeOnly();
  const double node = r.summary.max_node_violation;
  const double inter = r.summary.max_pointwise_violation;
  return {2, "node-only inter-sample violation",
          r.outcome.ok() && node <= 1e-6 && inter > 1e-3,
          Format("max node g %.3e (<= 1e-6), max inter-sample violation "
                 "%.3e (> 1e-3)",
                 node, inter)};
}

// Relative gap measured against the node-only baseline.
inline CriterionResult Criterion3(Context& ctx) {
  const double c = ctx.Ctcs().summary.average_tracking_error;
  const double n = ctx.NodeOnly().summary.average_tracking_error;
  const double rel = std::abs(c - n) / n;
  return {3, "comparable tracking", rel <= 0.25,
          Format("ctcs %.4f m, node-only %.4f m, |diff|/node-only %.3f "
                 "(<= 0.25)",
                 c, n, rel)};
}

inline CriterionResult Criterion4(Context& ctx) {
  const di::DemoResult& r = ctx.CtcsTenIterations();
  double prox1 = 0.0;
  double prox3 = 0.0;
  double jy3 = 0.0;
  int runs = 0;
  for (const auto& rec : r.outcome.records) {
    if (rec.metrics.size() < 10) continue;
    prox1 += rec.metrics[0].j_prox;
    prox3 += rec.metrics[2].j_prox;
    jy3 += rec.metrics[2].j_y;
    ++runs;
  }
  const bool complete =
      r.outcome.ok() && runs == static_cast<int>(r.outcome.records.size());
  const double ratio = prox3 / prox1;
  const double mean_jy3 = jy3 / std::max(runs, 1);
  const double eps = ctx.setup().scp.epsilon;
  return {4, "premature termination after three iterations",
          complete && ratio <= 0.05 && mean_jy3 <= 10.0 * eps,
          Format("mean J_prox(3)/J_prox(1) %.4f (<= 0.05), mean J_y(3) %.3e "
                 "(<= %.1e), runs %d",
                 ratio, mean_jy3, 10.0 * eps, runs)};
}

inline CriterionResult Criterion5() {
  const AugmentedDynamics dyn = testing::DragWithObstacles();
  const IntegratorConfig cfg;
  std::mt19937 rng(505);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    Vector x(6);
    x << testing::RandomVector(rng, 1, 12.0), testing::RandomVector(rng, 1, 5.0),
        testing::RandomVector(rng, 2, 4.0), testing::RandomVector(rng, 2, 10.0);
    const Vector u0 = testing::RandomVector(rng, 2, 5.0);
    const Vector u1 = testing::RandomVector(rng, 2, 5.0);
    const double t0 = std::uniform_real_distribution<double>(0.0, 30.0)(rng);
    const SensitivityResult s =
        PropagateWithSensitivities(dyn, t0, t0 + 0.5, x, u0, u1, cfg);
    auto fk = [&](const Vector& xx, const Vector& a, const Vector& b) {
      return PropagateSegment(dyn, t0, t0 + 0.5, xx, a, b, cfg);
    };
    const Matrix fa = testing::CentralDifferenceJacobian(
        [&](const Vector& v) { return fk(v, u0, u1); }, x, 1e-5);
    const Matrix fm = testing::CentralDifferenceJacobian(
        [&](const Vector& v) { return fk(x, v, u1); }, u0, 1e-5);
    const Matrix fp = testing::CentralDifferenceJacobian(
        [&](const Vector& v) { return fk(x, u0, v); }, u1, 1e-5);
    worst = std::max({worst, (s.phi_x - fa).norm() / fa.norm(),
                      (s.phi_u_minus - fm).norm() / fm.norm(),
                      (s.phi_u_plus - fp).norm() / fp.norm()});
  }
  return {5, "sensitivities match finite differences", worst <= 1e-5,
          Format("worst relative error %.3e over 50 points (<= 1e-5)", worst)};
}

inline CriterionResult Criterion6() {
  const AugmentedDynamics dyn = testing::DragWithObstacles();
  const IntegratorConfig cfg;
  const GridConfig grid{0.0, 8.0, 17};
  std::mt19937 rng(606);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    Matrix u(2, 17);
    for (int k = 0; k < 17; ++k) u.col(k) = testing::RandomVector(rng, 2, 5.0);
    Vector x1(6);
    x1 << testing::RandomVector(rng, 2, 8.0), testing::RandomVector(rng, 2, 3.0),
        0.0, 0.0;
    const TrajectoryIterate z = RolloutIterate(dyn, x1, u, grid, cfg);
    for (int k_shift = 1; k_shift <= 16; ++k_shift) {
      const TrajectoryIterate next =
          WarmStartShift(dyn, z, k_shift, grid, cfg);
      const GridConfig shifted{grid.t_c + k_shift * grid.dt(), grid.t_h, 17};
      worst = std::max(worst,
                       Defects(dyn, next, shifted, cfg).cwiseAbs().maxCoeff());
    }
  }
  return {6, "warm-start shift preserves feasibility", worst <= 1e-10,
          Format("worst shifted defect %.3e (<= 1e-10)", worst)};
}

inline CriterionResult Criterion7() {
  const testing::LqrToyData d = testing::DefaultLqrToy();
  const HorizonProblem hp{testing::LqrDynamics(d),
                          GridConfig{0.0, d.t_h, d.n_nodes},
                          InitialAugmentedState(d.xi0), std::nullopt};
  ScpConfig cfg;
  cfg.w_prox = 0.3;
  cfg.w_ep = 1.01;
  cfg.j_max = 500;
  cfg.converge_tol = 1e-14;
  cfg.conic.tol = 1e-10;
  cfg.conic.max_iters = 200000;
  cfg.integrator.substeps_per_interval = d.substeps;
  const TrajectoryIterate init{hp.x_c.replicate(1, d.n_nodes),
                               Matrix::Zero(1, d.n_nodes)};
  const ScpResult res = ScpSolve(init, hp, cfg);
  const Matrix u_star = testing::LqrNormalEquationsOracle(d);
  const testing::LqrRollout roll = testing::LqrSimulate(d, u_star);
  const double defect = res.defects.cwiseAbs().maxCoeff();
  const double err =
      std::max((res.z.controls - u_star).lpNorm<Eigen::Infinity>(),
               (res.z.states.topRows(2) - roll.xi).lpNorm<Eigen::Infinity>());
  return {7, "exact-penalty recovery on the LQR toy",
          defect <= 1e-6 && err <= 1e-5,
          Format("max defect %.3e (<= 1e-6), oracle distance %.3e (<= 1e-5), "
                 "final w_ep %.2f",
                 defect, err, res.w_ep)};
}

inline CriterionResult Criterion8() {
  std::mt19937 rng(2024);
  ConicSettings settings;
  settings.tol = 1e-10;
  double worst = 0.0;
  int unsolved = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = testing::MakeRandomConicInstance(rng);
    const ConicSolution sol = SolveConic(inst.problem, std::nullopt, settings);
    if (!sol.solved()) ++unsolved;
    worst = std::max(worst,
                     (sol.z - testing::ConicOracle(inst.problem)).norm());
  }
  // Projections: second-order blocks against the closed form, bitwise.
  ConeSpec soc;
  soc.SecondOrder(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  int mismatched = 0;
  for (int i = 0; i < 1000; ++i) {
    Eigen::Vector4d v(normal(rng), normal(rng), normal(rng), normal(rng));
    if (ProjectCone(v, soc) != testing::SocProjectionClosedForm(v(0), v.tail(3))) {
      ++mismatched;
    }
  }
  return {8, "conic solver matches the oracle",
          worst <= 1e-6 && unsolved == 0 && mismatched == 0,
          Format("worst ||z - z*|| %.3e (<= 1e-6), unsolved %d, projection "
                 "mismatches %d",
                 worst, unsolved, mismatched)};
}

inline CriterionResult Criterion9(Context& ctx) {
  const double u_max = ctx.setup().scenario.u_max;
  double worst = 0.0;
  for (const di::DemoResult* r : {&ctx.Ctcs(), &ctx.NodeOnly()}) {
    for (const auto& rec : r->outcome.records) {
      for (const auto& s : rec.dense) worst = std::max(worst, s.u.norm());
    }
  }
  return {9, "dense control norm within bound", worst <= u_max + 1e-9,
          Format("max dense ||u|| %.12f (<= %.1f + 1e-9)", worst, u_max)};
}

inline CriterionResult Criterion10() {
  const AugmentedDynamics dyn = di::HorizonDynamics(
      di::DemoScenario{}, di::RunMode::kCtcs, {});
  Vector x(6);
  x << -10.0, 5.0, 4.0, -3.0, 0.0, 0.0;
  const Eigen::Vector2d u0(4.0, -2.0);
  const Eigen::Vector2d u1(-3.0, 3.0);
  auto end = [&](int n) {
    return Vector(PropagateSegment(dyn, 0.0, 2.0, x, u0, u1, n).head(4));
  };
  const Vector ref = end(4096);
  const double order = std::log2((end(8) - ref).norm() / (end(16) - ref).norm());
  return {10, "RK4 convergence order", order >= 3.7 && order <= 4.3,
          Format("observed order %.3f (in [3.7, 4.3])", order)};
}

inline CriterionResult RunCriterion(int id, Context& ctx) {
  switch (id) {
    case 1: return Criterion1(ctx);
    case 2: return Criterion2(ctx);
    case 3: return Criterion3(ctx);
    case 4: return Criterion4(ctx);
    case 5: return Criterion5();
    case 6: return Criterion6();
    case 7: return Criterion7();
    case 8: return Criterion8();
    case 9: return Criterion9(ctx);
    case 10: return Criterion10();
    default: throw ConfigurationError("unknown criterion " + std::to_string(id));
  }
}

inline std::string Line(const CriterionResult& r) {
  return Format("%s criterion %d: %s | %s", r.pass ? "PASS" : "FAIL", r.id,
                r.title.c_str(), r.detail.c_str());
}

}  // namespace ctcs_nmpc::acceptance
