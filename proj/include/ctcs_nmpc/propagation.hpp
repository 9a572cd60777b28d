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

// Fixed-step RK4 integration of augmented dynamics under first-order-hold
// controls, optionally carrying the variational equations
//
//   d/dt Phi_x  = A(t) Phi_x,                       Phi_x(t_k)  = I
//   d/dt Phi_u- = A(t) Phi_u- + B(t) (t_{k+1}-t)/dt, Phi_u-(t_k) = 0
//   d/dt Phi_u+ = A(t) Phi_u+ + B(t) (t-t_k)/dt,     Phi_u+(t_k) = 0
//
// through the same steps, so A_k = Phi_x(t_{k+1}), B_k^- = Phi_u-(t_{k+1})
// and B_k^+ = Phi_u+(t_{k+1}) are consistent with the propagated endpoint.

#pragma once

#include <concepts>
#include <vector>

#include "ctcs_nmpc/common.hpp"
#include "ctcs_nmpc/grid.hpp"
#include "ctcs_nmpc/problem.hpp"

namespace ctcs_nmpc {

template <typename D>
concept AugmentedSystem = requires(const D& d, double t, const Vector& x,
                                   const Vector& u) {
  { d.n_x() } -> std::convertible_to<int>;
  { d.n_u() } -> std::convertible_to<int>;
  { d.Rhs(t, x, u) } -> std::convertible_to<Vector>;
  { d.Jacobians(t, x, u) } -> std::convertible_to<AugmentedJacobians>;
};

struct IntegratorConfig {
  int substeps_per_interval = 10;
  int dense_substeps = 20;

  void Validate() const {
    Require(substeps_per_interval >= 1, "substeps_per_interval must be >= 1");
    Require(dense_substeps >= 1, "dense_substeps must be >= 1");
  }
};

struct SensitivityResult {
  Vector x_end;
  Matrix phi_x;
  Matrix phi_u_minus;
  Matrix phi_u_plus;
};

struct DenseSample {
  double t = 0.0;
  Vector x;
  Vector u;
};

namespace internal {

// Combines RK4 stages; shared by the plain and variational integrators so
// both produce bit-identical states.
template <typename T>
T Rk4Combine(const T& y, double h, const T& k1, const T& k2, const T& k3,
             const T& k4) {
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline double SubstepTime(double t_k, double t_k1, int i, int n) {
  if (i == n) return t_k1;
  return t_k + (t_k1 - t_k) * (static_cast<double>(i) / n);
}

inline void CheckFinite(const Vector& x, double t) {
  if (!x.allFinite()) throw PropagationDiverged(t);
}

}  // namespace internal

// x(t_{k+1}) from x(t_k) under the FOH input built from u_k, u_k1.
template <AugmentedSystem D>
Vector PropagateSegment(const D& dyn, double t_k, double t_k1,
                        const Vector& x_k, const Vector& u_k,
                        const Vector& u_k1, int substeps) {
  Require(t_k1 > t_k, "segment end must follow its start");
  Require(substeps >= 1, "substeps must be >= 1");
  Vector x = x_k;
  internal::CheckFinite(x, t_k);
  for (int i = 0; i < substeps; ++i) {
    const double t0 = internal::SubstepTime(t_k, t_k1, i, substeps);
    const double t1 = internal::SubstepTime(t_k, t_k1, i + 1, substeps);
    const double h = t1 - t0;
    const double tm = t0 + 0.5 * h;
    const Vector u0 = InterpolateFoh(t0, t_k, t_k1, u_k, u_k1);
    const Vector um = InterpolateFoh(tm, t_k, t_k1, u_k, u_k1);
    const Vector u1 = InterpolateFoh(t1, t_k, t_k1, u_k, u_k1);

    const Vector k1 = dyn.Rhs(t0, x, u0);
    const Vector k2 = dyn.Rhs(tm, x + (0.5 * h) * k1, um);
    const Vector k3 = dyn.Rhs(tm, x + (0.5 * h) * k2, um);
    const Vector k4 = dyn.Rhs(t1, x + h * k3, u1);
    x = internal::Rk4Combine(x, h, k1, k2, k3, k4);
    internal::CheckFinite(x, t0);
  }
  return x;
}

template <AugmentedSystem D>
Vector PropagateSegment(const D& dyn, double t_k, double t_k1,
                        const Vector& x_k, const Vector& u_k,
                        const Vector& u_k1, const IntegratorConfig& cfg) {
  return PropagateSegment(dyn, t_k, t_k1, x_k, u_k, u_k1,
                          cfg.substeps_per_interval);
}

template <AugmentedSystem D>
SensitivityResult PropagateWithSensitivities(const D& dyn, double t_k,
                                             double t_k1, const Vector& x_k,
                                             const Vector& u_k,
                                             const Vector& u_k1,
                                             const IntegratorConfig& cfg) {
  Require(t_k1 > t_k, "segment end must follow its start");
  const int substeps = cfg.substeps_per_interval;
  Require(substeps >= 1, "substeps must be >= 1");
  const int nx = static_cast<int>(x_k.size());
  const int nu = static_cast<int>(u_k.size());
  const double span = t_k1 - t_k;

  // Columns: [Phi_x | Phi_u- | Phi_u+].
  Matrix phi = Matrix::Zero(nx, nx + 2 * nu);
  phi.leftCols(nx).setIdentity();

  auto phi_rate = [&](double t, const Vector& x, const Vector& u,
                      const Matrix& p) {
    const AugmentedJacobians jac = dyn.Jacobians(t, x, u);
    Matrix rate = jac.dx * p;
    rate.middleCols(nx, nu) += jac.du * ((t_k1 - t) / span);
    rate.rightCols(nu) += jac.du * ((t - t_k) / span);
    return rate;
  };

  Vector x = x_k;
  internal::CheckFinite(x, t_k);
  for (int i = 0; i < substeps; ++i) {
    const double t0 = internal::SubstepTime(t_k, t_k1, i, substeps);
    const double t1 = internal::SubstepTime(t_k, t_k1, i + 1, substeps);
    const double h = t1 - t0;
    const double tm = t0 + 0.5 * h;
    const Vector u0 = InterpolateFoh(t0, t_k, t_k1, u_k, u_k1);
    const Vector um = InterpolateFoh(tm, t_k, t_k1, u_k, u_k1);
    const Vector u1 = InterpolateFoh(t1, t_k, t_k1, u_k, u_k1);

    const Vector k1 = dyn.Rhs(t0, x, u0);
    const Vector x2 = x + (0.5 * h) * k1;
    const Vector k2 = dyn.Rhs(tm, x2, um);
    const Vector x3 = x + (0.5 * h) * k2;
    const Vector k3 = dyn.Rhs(tm, x3, um);
    const Vector x4 = x + h * k3;
    const Vector k4 = dyn.Rhs(t1, x4, u1);

    const Matrix p1 = phi_rate(t0, x, u0, phi);
    const Matrix p2 = phi_rate(tm, x2, um, phi + (0.5 * h) * p1);
    const Matrix p3 = phi_rate(tm, x3, um, phi + (0.5 * h) * p2);
    const Matrix p4 = phi_rate(t1, x4, u1, phi + h * p3);

    x = internal::Rk4Combine(x, h, k1, k2, k3, k4);
    phi = internal::Rk4Combine(phi, h, p1, p2, p3, p4);
    internal::CheckFinite(x, t0);
    if (!phi.allFinite()) throw PropagationDiverged(t0);
  }
  return {x, phi.leftCols(nx), phi.middleCols(nx, nu), phi.rightCols(nu)};
}

// Single-shooting propagation over node-aligned [t0, t1] with
// `substeps` uniform RK4 steps per grid interval. Returns one sample per
// step boundary, starting with (t0, x0).
template <AugmentedSystem D>
std::vector<DenseSample> PropagateDense(const D& dyn, const GridConfig& grid,
                                        const Matrix& controls, double t0,
                                        double t1, const Vector& x0,
                                        int substeps) {
  grid.Validate();
  Require(substeps >= 1, "dense substeps must be >= 1");
  Require(controls.cols() == grid.n_nodes,
          "control schedule must have one column per node");
  const auto node_index = [&](double t) {
    const double pos = (t - grid.t_c) / grid.dt();
    const double rounded = std::round(pos);
    if (std::abs(pos - rounded) > 1e-9 || rounded < 0 ||
        rounded > grid.n_nodes - 1) {
      throw OutOfRangeError("dense propagation bounds must be grid nodes");
    }
    return static_cast<int>(rounded);
  };
  const int first = node_index(t0);
  const int last = node_index(t1);
  Require(last > first, "dense propagation needs t1 > t0");

  std::vector<DenseSample> samples;
  samples.reserve(static_cast<size_t>((last - first) * substeps + 1));
  Vector x = x0;
  samples.push_back({grid.Node(first), x, controls.col(first)});
  for (int k = first; k < last; ++k) {
    const double t_k = grid.Node(k);
    const double t_k1 = grid.Node(k + 1);
    for (int i = 0; i < substeps; ++i) {
      const double ta = internal::SubstepTime(t_k, t_k1, i, substeps);
      const double tb = internal::SubstepTime(t_k, t_k1, i + 1, substeps);
      x = PropagateSegment(dyn, ta, tb, x,
                           InterpolateFoh(ta, t_k, t_k1, controls.col(k),
                                          controls.col(k + 1)),
                           InterpolateFoh(tb, t_k, t_k1, controls.col(k),
                                          controls.col(k + 1)),
                           1);
      samples.push_back(
          {tb, x,
           InterpolateFoh(tb, t_k, t_k1, controls.col(k), controls.col(k + 1))});
    }
  }
  return samples;
}

}  // namespace ctcs_nmpc
