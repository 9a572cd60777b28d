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

// Prox-linear sequential convex programming on the multiple-shooting
// transcription. Each iteration linearizes the shooting map about the
// current iterate Z^j and solves
//
//   minimize   grad L~_h(x_N^j)(x_N - x_N^j) + w_ep nu_h
//              + w_ep sum_k 1'(mu_k^+ + mu_k^-)
//              + w_prox/2 sum_k ||x_k - x_k^j||^2 + ||u_k - u_k^j||^2
//   subject to x_{k+1} = A_k x_k + B_k^- u_k + B_k^+ u_{k+1}
//                        + mu_k^+ - mu_k^- + w_k
//              E_y (x_{k+1} - x_k) <= epsilon
//              mu_k^+, mu_k^- >= 0,  u_k in U,  x_1 = x_c
//              P~_h(x_N^j) + grad P~_h(x_N^j)(x_N - x_N^j) <= nu_h, nu_h >= 0
//
// where L~_h = L_h + l_N, so E_l x_N always enters the objective linearly.

#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "ctcs_nmpc/common.hpp"
#include "ctcs_nmpc/conic.hpp"
#include "ctcs_nmpc/grid.hpp"
#include "ctcs_nmpc/log.hpp"
#include "ctcs_nmpc/problem.hpp"
#include "ctcs_nmpc/propagation.hpp"
#include "ctcs_nmpc/transcription.hpp"

namespace ctcs_nmpc {

// Affine map x = center + half_range .* x_hat applied to states before the
// subproblem is assembled. Controls share one scale with zero offset so the
// control ball stays a ball.
struct VariableScaling {
  Vector x_center;
  Vector x_half_range;
  double u_scale = 1.0;

  static VariableScaling Identity(int n_x) {
    return {Vector::Zero(n_x), Vector::Ones(n_x), 1.0};
  }

  void Validate(int n_x) const {
    Require(x_center.size() == n_x && x_half_range.size() == n_x,
            "state scaling has wrong dimension");
    Require((x_half_range.array() > 0.0).all() && u_scale > 0.0,
            "scaling ranges must be positive");
  }
};

struct ScpConfig {
  double w_ep = 1e2;
  double w_prox = 1.0;
  double epsilon = 1e-4;
  int j_max = 3;
  double converge_tol = 1e-6;
  // Radius of U = {u : ||u|| <= u_max}; infinity leaves u free.
  double u_max = std::numeric_limits<double>::infinity();
  // Per-state exact-penalty weights for the dynamics slacks; empty means
  // w_ep on every row.
  Vector w_ep_per_state;
  // Doubles w_ep when the iteration converges with defects above
  // defect_tol, while iterations remain.
  bool double_w_ep_on_defects = true;
  double defect_tol = 1e-6;
  std::optional<VariableScaling> scaling;
  IntegratorConfig integrator;
  ConicSettings conic = [] {
    ConicSettings s;
    s.max_iters = 10000;
    return s;
  }();
  int threads = 1;

  void Validate() const {
    Require(w_ep > 0.0 && w_prox > 0.0 && epsilon > 0.0,
            "w_ep, w_prox and epsilon must be positive");
    Require(j_max >= 1, "j_max must be >= 1");
    Require(converge_tol >= 0.0, "converge_tol must be nonnegative");
    Require(u_max > 0.0, "u_max must be positive");
    Require((w_ep_per_state.array() > 0.0).all(),
            "per-state penalty weights must be positive");
    integrator.Validate();
  }
};

// Inequalities g(t_k, xi_k, u_k) <= 0 imposed only at nodes 2..N (the pinned
// first node is excluded), linearized and l1-penalized. This is the
// node-only baseline's constraint pathway.
struct NodeConstraints {
  int n = 0;
  StateInputFn g;
  StateInputJacobianFn jac_xi;
  StateInputJacobianFn jac_u;
};

// One receding-horizon problem: dynamics, grid and the pinned start.
struct HorizonProblem {
  AugmentedDynamics dynamics;
  GridConfig grid;
  Vector x_c;
  std::optional<NodeConstraints> node_constraints;
};

struct SubproblemLayout {
  int n_nodes = 0;
  int n_x = 0;
  int n_u = 0;
  int x = 0;         // x_1..x_N
  int u = 0;         // u_1..u_N
  int mu_plus = 0;   // (N-1) n_x
  int mu_minus = 0;  // (N-1) n_x
  int eps_slack = 0;  // N-1, slack of E_y(x_{k+1} - x_k) <= epsilon
  int node_violation = -1;  // sigma >= 0, penalized
  int node_slack = -1;
  int n_node_rows = 0;
  int nu_h = -1;
  int terminal_slack = -1;
  int n_terminal_rows = 0;
  int n_vars = 0;
  int n_rows = 0;

  int XIndex(int k, int i) const { return x + k * n_x + i; }
  int UIndex(int k, int i) const { return u + k * n_u + i; }
  int MuPlusIndex(int k, int i) const { return mu_plus + k * n_x + i; }
  int MuMinusIndex(int k, int i) const { return mu_minus + k * n_x + i; }
};

struct AssembledSubproblem {
  ConicProblem problem;
  SubproblemLayout layout;
  VariableScaling scaling;
};

struct SubproblemSolution {
  TrajectoryIterate z_next;
  Matrix mu_plus;   // n_x x (N-1)
  Matrix mu_minus;  // n_x x (N-1)
  std::optional<double> nu_h;
  Vector node_violation;
  ConicSolution conic;
};

struct ScpMetrics {
  double j_l = 0.0;
  double j_y = 0.0;
  double j_prox = 0.0;
  int conic_iterations = 0;
  double wall_ms = 0.0;
  bool conic_solved = true;
};

struct ScpResult {
  TrajectoryIterate z;
  SubproblemSolution last;
  std::vector<ScpMetrics> metrics;
  Matrix defects;  // x_{k+1} - f_k(...) of the returned iterate
  double w_ep = 0.0;
};

namespace internal {

inline VariableScaling ResolveScaling(const ScpConfig& cfg, int n_x) {
  VariableScaling s = cfg.scaling ? *cfg.scaling : VariableScaling::Identity(n_x);
  s.Validate(n_x);
  return s;
}

inline Vector ScaleStates(const VariableScaling& s, const Vector& x) {
  return (x - s.x_center).cwiseQuotient(s.x_half_range);
}

inline Vector UnscaleStates(const VariableScaling& s, const Vector& xh) {
  return s.x_center + s.x_half_range.cwiseProduct(xh);
}

}  // namespace internal

// Builds the conic form of the prox-linear subproblem about `zj`. Decision
// variables are the scaled node states and controls followed by the slacks
// listed in SubproblemLayout.
inline AssembledSubproblem AssembleSubproblem(
    const TrajectoryIterate& zj, const std::vector<LinearizedSegment>& segs,
    const ScpConfig& cfg, const HorizonProblem& hp) {
  const AugmentedDynamics& dyn = hp.dynamics;
  const int nx = dyn.n_x();
  const int nu = dyn.n_u();
  const int nxi = dyn.n_xi();
  const int n_nodes = hp.grid.n_nodes;
  const int n_seg = n_nodes - 1;
  zj.Validate(nx, nu, n_nodes);
  Require(static_cast<int>(segs.size()) == n_seg,
          "need one linearized segment per interval");
  Require(hp.x_c.size() == nx, "initial state has wrong dimension");
  for (const auto& s : segs) {
    Require(s.a.rows() == nx && s.a.cols() == nx && s.b_minus.cols() == nu &&
                s.b_plus.cols() == nu && s.w.size() == nx,
            "linearized segment has wrong shape");
  }
  Require(cfg.w_ep_per_state.size() == 0 || cfg.w_ep_per_state.size() == nx,
          "per-state penalty weights must have n_x entries");

  const VariableScaling sc = internal::ResolveScaling(cfg, nx);
  const Vector& sx = sc.x_half_range;
  const Vector& cx = sc.x_center;
  const double su = sc.u_scale;
  const SelectorRows sel = dyn.selectors();

  const auto& term_cost = dyn.cost().terminal;
  const auto& term_con = dyn.cost().terminal_constraint;
  const bool has_term_con = term_con && term_con->n > 0;
  const bool penalize_term_con = has_term_con && !term_con->convex;
  const int n_node_rows =
      hp.node_constraints ? hp.node_constraints->n * (n_nodes - 1) : 0;

  SubproblemLayout lay;
  lay.n_nodes = n_nodes;
  lay.n_x = nx;
  lay.n_u = nu;
  int off = 0;
  lay.x = off;
  off += n_nodes * nx;
  lay.u = off;
  off += n_nodes * nu;
  lay.mu_plus = off;
  off += n_seg * nx;
  lay.mu_minus = off;
  off += n_seg * nx;
  lay.eps_slack = off;
  off += n_seg;
  if (n_node_rows > 0) {
    lay.n_node_rows = n_node_rows;
    lay.node_violation = off;
    off += n_node_rows;
    lay.node_slack = off;
    off += n_node_rows;
  }
  if (has_term_con) {
    lay.n_terminal_rows = term_con->n;
    if (penalize_term_con) lay.nu_h = off++;
    lay.terminal_slack = off;
    off += term_con->n;
  }
  lay.n_vars = off;

  const int row_pin = 0;
  const int row_dyn = row_pin + nx;
  const int row_eps = row_dyn + n_seg * nx;
  const int row_node = row_eps + n_seg;
  const int row_term = row_node + n_node_rows;
  lay.n_rows = row_term + lay.n_terminal_rows;

  std::vector<Eigen::Triplet<double>> ht;
  std::vector<Eigen::Triplet<double>> pt;
  Vector q = Vector::Zero(lay.n_vars);
  Vector b = Vector::Zero(lay.n_rows);
  ht.reserve(static_cast<size_t>(n_seg) * nx * (nx + 2 * nu + 3) +
             static_cast<size_t>(n_node_rows) * (nxi + nu + 2) + 64);

  // x_1 = x_c
  for (int i = 0; i < nx; ++i) {
    ht.emplace_back(row_pin + i, lay.XIndex(0, i), sx(i));
    b(row_pin + i) = hp.x_c(i) - cx(i);
  }

  // x_{k+1} - A x_k - B- u_k - B+ u_{k+1} - mu+ + mu- = w_k, in scaled
  // coordinates; centers move to the right-hand side.
  for (int k = 0; k < n_seg; ++k) {
    const LinearizedSegment& s = segs[k];
    const int r0 = row_dyn + k * nx;
    for (int i = 0; i < nx; ++i) {
      const int r = r0 + i;
      ht.emplace_back(r, lay.XIndex(k + 1, i), sx(i));
      for (int j = 0; j < nx; ++j) {
        if (s.a(i, j) != 0.0) {
          ht.emplace_back(r, lay.XIndex(k, j), -s.a(i, j) * sx(j));
        }
      }
      for (int j = 0; j < nu; ++j) {
        if (s.b_minus(i, j) != 0.0) {
          ht.emplace_back(r, lay.UIndex(k, j), -s.b_minus(i, j) * su);
        }
        if (s.b_plus(i, j) != 0.0) {
          ht.emplace_back(r, lay.UIndex(k + 1, j), -s.b_plus(i, j) * su);
        }
      }
      ht.emplace_back(r, lay.MuPlusIndex(k, i), -1.0);
      ht.emplace_back(r, lay.MuMinusIndex(k, i), 1.0);
    }
    b.segment(r0, nx) = s.w + s.a * cx - cx;
  }

  // s_y (y_{k+1} - y_k) + slack = epsilon
  const int iy = sel.y_index();
  for (int k = 0; k < n_seg; ++k) {
    const int r = row_eps + k;
    ht.emplace_back(r, lay.XIndex(k + 1, iy), sx(iy));
    ht.emplace_back(r, lay.XIndex(k, iy), -sx(iy));
    ht.emplace_back(r, lay.eps_slack + k, 1.0);
    b(r) = cfg.epsilon;
  }

  // g(z^j) + G (z - z^j) <= sigma at nodes 2..N:
  //   G z - sigma + slack = G z^j - g(z^j).
  if (n_node_rows > 0) {
    const NodeConstraints& nc = *hp.node_constraints;
    for (int k = 1; k < n_nodes; ++k) {
      const double t = hp.grid.Node(k);
      const Vector xi = zj.states.col(k).head(nxi);
      const Vector u = zj.controls.col(k);
      const Vector gv = nc.g(t, xi, u);
      const Matrix gx = nc.jac_xi(t, xi, u);
      const Matrix gu = nc.jac_u(t, xi, u);
      Require(gv.size() == nc.n && gx.rows() == nc.n && gx.cols() == nxi &&
                  gu.rows() == nc.n && gu.cols() == nu,
              "node constraint returned wrong shape");
      for (int c = 0; c < nc.n; ++c) {
        const int idx = (k - 1) * nc.n + c;
        const int r = row_node + idx;
        for (int j = 0; j < nxi; ++j) {
          if (gx(c, j) != 0.0) {
            ht.emplace_back(r, lay.XIndex(k, j), gx(c, j) * sx(j));
          }
        }
        for (int j = 0; j < nu; ++j) {
          if (gu(c, j) != 0.0) {
            ht.emplace_back(r, lay.UIndex(k, j), gu(c, j) * su);
          }
        }
        ht.emplace_back(r, lay.node_violation + idx, -1.0);
        ht.emplace_back(r, lay.node_slack + idx, 1.0);
        b(r) = gx.row(c).dot(xi - cx.head(nxi)) + gu.row(c).dot(u) - gv(c);
        q(lay.node_violation + idx) = cfg.w_ep;
      }
    }
  }

  // P_h(xi^j) + dP (xi_N - xi^j) <= nu_h  (nu_h omitted when convex).
  const Vector xi_n = zj.states.col(n_nodes - 1).head(nxi);
  if (has_term_con) {
    const Vector pv = term_con->value(xi_n);
    const Matrix pj = term_con->jacobian(xi_n);
    Require(pv.size() == term_con->n && pj.rows() == term_con->n &&
                pj.cols() == nxi,
            "terminal constraint returned wrong shape");
    for (int c = 0; c < term_con->n; ++c) {
      const int r = row_term + c;
      for (int j = 0; j < nxi; ++j) {
        if (pj(c, j) != 0.0) {
          ht.emplace_back(r, lay.XIndex(n_nodes - 1, j), pj(c, j) * sx(j));
        }
      }
      if (penalize_term_con) ht.emplace_back(r, lay.nu_h, -1.0);
      ht.emplace_back(r, lay.terminal_slack + c, 1.0);
      b(r) = pj.row(c).dot(xi_n - cx.head(nxi)) - pv(c);
    }
    if (penalize_term_con) q(lay.nu_h) = cfg.w_ep;
  }

  // Proximal term on the scaled states and controls.
  for (int k = 0; k < n_nodes; ++k) {
    const Vector xh = internal::ScaleStates(sc, zj.states.col(k));
    for (int i = 0; i < nx; ++i) {
      pt.emplace_back(lay.XIndex(k, i), lay.XIndex(k, i), cfg.w_prox);
      q(lay.XIndex(k, i)) -= cfg.w_prox * xh(i);
    }
    for (int i = 0; i < nu; ++i) {
      pt.emplace_back(lay.UIndex(k, i), lay.UIndex(k, i), cfg.w_prox);
      q(lay.UIndex(k, i)) -= cfg.w_prox * zj.controls(i, k) / su;
    }
  }

  // Exact penalty on dynamics slacks.
  for (int k = 0; k < n_seg; ++k) {
    for (int i = 0; i < nx; ++i) {
      const double w = cfg.w_ep_per_state.size() ? cfg.w_ep_per_state(i)
                                                 : cfg.w_ep;
      q(lay.MuPlusIndex(k, i)) = w;
      q(lay.MuMinusIndex(k, i)) = w;
    }
  }

  // L~_h = L_h(xi_N) + l_N.
  q(lay.XIndex(n_nodes - 1, sel.l_index())) += sx(sel.l_index());
  if (term_cost) {
    const Vector grad = term_cost->gradient(xi_n);
    Require(grad.size() == nxi, "terminal cost gradient has wrong length");
    const Vector sxi = sx.head(nxi);
    for (int j = 0; j < nxi; ++j) {
      q(lay.XIndex(n_nodes - 1, j)) += sxi(j) * grad(j);
    }
    if (term_cost->convex && term_cost->hessian) {
      const Matrix hess = term_cost->hessian(xi_n);
      Require(hess.rows() == nxi && hess.cols() == nxi,
              "terminal cost hessian has wrong shape");
      const Matrix hs = sxi.asDiagonal() * hess * sxi.asDiagonal();
      const Vector xh = internal::ScaleStates(sc, zj.states.col(n_nodes - 1));
      const Vector shift = hs * xh.head(nxi);
      for (int i = 0; i < nxi; ++i) {
        q(lay.XIndex(n_nodes - 1, i)) -= shift(i);
        for (int j = 0; j < nxi; ++j) {
          if (hs(i, j) != 0.0) {
            pt.emplace_back(lay.XIndex(n_nodes - 1, i),
                            lay.XIndex(n_nodes - 1, j), hs(i, j));
          }
        }
      }
    }
  }

  AssembledSubproblem out;
  out.layout = lay;
  out.scaling = sc;
  out.problem.p.resize(lay.n_vars, lay.n_vars);
  out.problem.p.setFromTriplets(pt.begin(), pt.end());
  out.problem.h.resize(lay.n_rows, lay.n_vars);
  out.problem.h.setFromTriplets(ht.begin(), ht.end());
  out.problem.q = q;
  out.problem.b = b;

  ConeSpec& cones = out.problem.cones;
  cones.Free(n_nodes * nx);
  if (nu > 0) {
    if (std::isfinite(cfg.u_max)) {
      for (int k = 0; k < n_nodes; ++k) cones.Ball(nu, cfg.u_max / su);
    } else {
      cones.Free(n_nodes * nu);
    }
  }
  cones.Nonnegative(2 * n_seg * nx + n_seg);
  if (n_node_rows > 0) cones.Nonnegative(2 * n_node_rows);
  if (has_term_con) {
    cones.Nonnegative((penalize_term_con ? 1 : 0) + term_con->n);
  }
  return out;
}

// Primal point of the subproblem corresponding to `z` with zero slacks,
// except those that keep the inequality rows consistent.
inline Vector SubproblemPrimalGuess(const AssembledSubproblem& sub,
                                    const TrajectoryIterate& z,
                                    double epsilon) {
  const SubproblemLayout& lay = sub.layout;
  Vector guess = Vector::Zero(lay.n_vars);
  for (int k = 0; k < lay.n_nodes; ++k) {
    guess.segment(lay.XIndex(k, 0), lay.n_x) =
        internal::ScaleStates(sub.scaling, z.states.col(k));
    guess.segment(lay.UIndex(k, 0), lay.n_u) =
        z.controls.col(k) / sub.scaling.u_scale;
  }
  const int iy = lay.n_x - 1;
  for (int k = 0; k + 1 < lay.n_nodes; ++k) {
    const double dy = z.states(iy, k + 1) - z.states(iy, k);
    guess(lay.eps_slack + k) = std::max(0.0, epsilon - dy);
  }
  return ProjectCone(guess, sub.problem.cones);
}

inline SubproblemSolution ExtractSolution(const AssembledSubproblem& sub,
                                          const ConicSolution& sol) {
  const SubproblemLayout& lay = sub.layout;
  SubproblemSolution out;
  out.z_next.states.resize(lay.n_x, lay.n_nodes);
  out.z_next.controls.resize(lay.n_u, lay.n_nodes);
  for (int k = 0; k < lay.n_nodes; ++k) {
    out.z_next.states.col(k) = internal::UnscaleStates(
        sub.scaling, sol.z.segment(lay.XIndex(k, 0), lay.n_x));
    out.z_next.controls.col(k) =
        sub.scaling.u_scale * sol.z.segment(lay.UIndex(k, 0), lay.n_u);
  }
  const int n_seg = lay.n_nodes - 1;
  out.mu_plus = Eigen::Map<const Matrix>(sol.z.data() + lay.mu_plus, lay.n_x,
                                         n_seg);
  out.mu_minus = Eigen::Map<const Matrix>(sol.z.data() + lay.mu_minus,
                                          lay.n_x, n_seg);
  if (lay.nu_h >= 0) out.nu_h = sol.z(lay.nu_h);
  if (lay.n_node_rows > 0) {
    out.node_violation = sol.z.segment(lay.node_violation, lay.n_node_rows);
  }
  out.conic = sol;
  return out;
}

// J_l = E_l sum(mu+ + mu-), J_y = E_y sum(mu+ + mu-),
// J_prox = sum ||x_k - x_k^j||^2 + ||u_k - u_k^j||^2, with the differences
// measured in the scaled variables the proximal term acts on.
inline ScpMetrics ComputeMetrics(const SubproblemSolution& sol,
                                 const TrajectoryIterate& zj,
                                 const SelectorRows& sel,
                                 const VariableScaling& scaling) {
  Require((sol.mu_plus.array() >= 0.0).all() &&
              (sol.mu_minus.array() >= 0.0).all(),
          "dynamics slacks must be nonnegative");
  ScpMetrics m;
  const Vector mu_sum = (sol.mu_plus + sol.mu_minus).rowwise().sum();
  m.j_l = mu_sum(sel.l_index());
  m.j_y = mu_sum(sel.y_index());
  const Matrix dx = (sol.z_next.states - zj.states).array().colwise() /
                    scaling.x_half_range.array();
  m.j_prox = dx.squaredNorm() +
             (sol.z_next.controls - zj.controls).squaredNorm() /
                 (scaling.u_scale * scaling.u_scale);
  m.conic_iterations = sol.conic.iterations;
  m.conic_solved = sol.conic.solved();
  return m;
}

inline ScpMetrics ComputeMetrics(const SubproblemSolution& sol,
                                 const TrajectoryIterate& zj,
                                 const SelectorRows& sel) {
  return ComputeMetrics(sol, zj, sel,
                        VariableScaling::Identity(
                            static_cast<int>(zj.states.rows())));
}

// Runs up to cfg.j_max prox-linear iterations from `z_init`, stopping early
// once J_prox <= cfg.converge_tol. The conic solver is warm-started from the
// previous subproblem's primal-dual pair.
inline ScpResult ScpSolve(const TrajectoryIterate& z_init,
                          const HorizonProblem& hp, ScpConfig cfg) {
  cfg.Validate();
  hp.grid.Validate();
  const AugmentedDynamics& dyn = hp.dynamics;
  z_init.Validate(dyn.n_x(), dyn.n_u(), hp.grid.n_nodes);

  ScpResult result;
  result.z = z_init;
  std::optional<ConicWarmStart> warm;
  for (int j = 1; j <= cfg.j_max; ++j) {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<LinearizedSegment> segs =
        LinearizeAll(dyn, result.z, hp.grid, cfg.integrator, cfg.threads);
    const AssembledSubproblem sub =
        AssembleSubproblem(result.z, segs, cfg, hp);
    ConicWarmStart guess{SubproblemPrimalGuess(sub, result.z, cfg.epsilon),
                         Vector()};
    if (warm && warm->dual.size() == sub.problem.m()) {
      guess.dual = warm->dual;
    }
    const ConicSolution sol = SolveConic(sub.problem, guess, cfg.conic);
    if (!sol.solved()) {
      Log()->warn(
          "scp iter={} conic solver hit max iterations (primal={:.3e} "
          "dual={:.3e}); continuing with best iterate",
          j, sol.primal_residual, sol.dual_residual);
    }
    warm = ConicWarmStart{sol.z, sol.dual};
    SubproblemSolution extracted = ExtractSolution(sub, sol);
    ScpMetrics metrics =
        ComputeMetrics(extracted, result.z, dyn.selectors(), sub.scaling);
    metrics.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - start)
                          .count();
    Log()->debug(
        "scp iter={} J_l={:.6e} J_y={:.6e} J_prox={:.6e} conic_iters={} "
        "wall_ms={:.3f}",
        j, metrics.j_l, metrics.j_y, metrics.j_prox,
        metrics.conic_iterations, metrics.wall_ms);
    result.metrics.push_back(metrics);
    result.z = extracted.z_next;
    result.last = std::move(extracted);

    if (metrics.j_prox <= cfg.converge_tol) {
      if (cfg.double_w_ep_on_defects && j < cfg.j_max) {
        const Matrix d = Defects(dyn, result.z, hp.grid, cfg.integrator);
        if (d.cwiseAbs().maxCoeff() > cfg.defect_tol) {
          cfg.w_ep *= 2.0;
          if (cfg.w_ep_per_state.size()) cfg.w_ep_per_state *= 2.0;
          Log()->info("scp iter={} converged with defects; w_ep -> {}", j,
                      cfg.w_ep);
          continue;
        }
      }
      break;
    }
  }
  result.defects = Defects(dyn, result.z, hp.grid, cfg.integrator);
  result.w_ep = cfg.w_ep;
  return result;
}

}  // namespace ctcs_nmpc
