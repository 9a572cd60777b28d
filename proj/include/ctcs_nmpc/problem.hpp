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

// Continuous-time optimal control problem and its Mayer-form augmentation.
//
// The physical state xi is extended with two integrators,
//
//   x = (xi, l, y),   d/dt x = f(t, x, u) = ( F(t, xi, u),
//                                             L(t, xi, u),
//                                             sum_i |g_i + delta|_+^2
//                                               + sum_j h_j^2 ),
//
// so the running cost becomes the terminal value l(t_N) and path-constraint
// violation accumulates in y. Holding y constant over a sub-interval forces
// g <= -delta and h = 0 on the whole sub-interval, not only at its ends.

#pragma once

#include <functional>
#include <optional>
#include <utility>

#include "ctcs_nmpc/common.hpp"

namespace ctcs_nmpc {

using StateInputFn =
    std::function<Vector(double t, const Vector& xi, const Vector& u)>;
using StateInputJacobianFn =
    std::function<Matrix(double t, const Vector& xi, const Vector& u)>;

struct PhysicalSystem {
  int n_xi = 0;
  int n_u = 0;
  StateInputFn rhs;
  StateInputJacobianFn jac_xi;  // n_xi x n_xi
  StateInputJacobianFn jac_u;   // n_xi x n_u
};

// g(t, xi, u) <= 0 and h(t, xi, u) = 0. Either block may be empty.
struct PathConstraints {
  int n_g = 0;
  int n_h = 0;
  StateInputFn g;
  StateInputJacobianFn g_jac_xi;
  StateInputJacobianFn g_jac_u;
  StateInputFn h;
  StateInputJacobianFn h_jac_xi;
  StateInputJacobianFn h_jac_u;
  // Applied inside the violation integrand only: |g + tightening|_+^2.
  double tightening = 0.0;

  bool empty() const { return n_g == 0 && n_h == 0; }
};

struct RunningCost {
  std::function<double(double t, const Vector& xi, const Vector& u)> value;
  StateInputFn grad_xi;
  StateInputFn grad_u;
};

// L_h(xi_N). When `convex` is set the Hessian is passed to the subproblem
// as a quadratic term; otherwise only the gradient is used.
struct TerminalCost {
  std::function<double(const Vector& xi)> value;
  std::function<Vector(const Vector& xi)> gradient;
  std::function<Matrix(const Vector& xi)> hessian;
  bool convex = false;
};

// P_h(xi_N) <= 0. Convex (affine) constraints are imposed directly on the
// subproblem; others are linearized and l1-penalized through nu_h.
struct TerminalConstraint {
  int n = 0;
  std::function<Vector(const Vector& xi)> value;
  std::function<Matrix(const Vector& xi)> jacobian;
  bool convex = false;
};

struct CostSpec {
  std::optional<RunningCost> running;
  std::optional<TerminalCost> terminal;
  std::optional<TerminalConstraint> terminal_constraint;
};

// Selector rows over the augmented state: E_l x = l and E_y x = y.
struct SelectorRows {
  int n_xi = 0;

  int l_index() const { return n_xi; }
  int y_index() const { return n_xi + 1; }

  Eigen::RowVectorXd e_l() const {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n_xi + 2);
    row(l_index()) = 1.0;
    return row;
  }
  Eigen::RowVectorXd e_y() const {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n_xi + 2);
    row(y_index()) = 1.0;
    return row;
  }
};

struct AugmentedJacobians {
  Matrix dx;  // n_x x n_x
  Matrix du;  // n_x x n_u
};

// f(t, x, u) for x = (xi, l, y). Immutable after construction; all member
// functions are safe to call concurrently.
class AugmentedDynamics {
 public:
  AugmentedDynamics() = default;

  AugmentedDynamics(PhysicalSystem system, PathConstraints constraints,
                    CostSpec cost)
      : system_(std::move(system)),
        constraints_(std::move(constraints)),
        cost_(std::move(cost)) {
    Require(system_.n_xi > 0, "physical state dimension must be positive");
    Require(system_.n_u >= 0, "input dimension must be nonnegative");
    Require(static_cast<bool>(system_.rhs) &&
                static_cast<bool>(system_.jac_xi) &&
                static_cast<bool>(system_.jac_u),
            "physical system needs rhs and both jacobians");
    Require(constraints_.n_g >= 0 && constraints_.n_h >= 0,
            "constraint counts must be nonnegative");
    Require(constraints_.tightening >= 0.0,
            "constraint tightening must be nonnegative");
    if (constraints_.n_g > 0) {
      Require(constraints_.g && constraints_.g_jac_xi && constraints_.g_jac_u,
              "inequality constraints need g and its jacobians");
    }
    if (constraints_.n_h > 0) {
      Require(constraints_.h && constraints_.h_jac_xi && constraints_.h_jac_u,
              "equality constraints need h and its jacobians");
    }
    if (cost_.running) {
      Require(cost_.running->value && cost_.running->grad_xi &&
                  cost_.running->grad_u,
              "running cost needs value and gradients");
    }
  }

  int n_xi() const { return system_.n_xi; }
  int n_x() const { return system_.n_xi + 2; }
  int n_u() const { return system_.n_u; }
  SelectorRows selectors() const { return SelectorRows{system_.n_xi}; }

  const PhysicalSystem& system() const { return system_; }
  const PathConstraints& constraints() const { return constraints_; }
  const CostSpec& cost() const { return cost_; }

  Vector Rhs(double t, const Vector& x, const Vector& u) const {
    CheckDims(x, u);
    const int n = n_xi();
    const Vector xi = x.head(n);
    Vector rate(n_x());
    const Vector dxi = system_.rhs(t, xi, u);
    Require(dxi.size() == n, "physical rhs returned wrong dimension");
    rate.head(n) = dxi;
    rate(n) = cost_.running ? cost_.running->value(t, xi, u) : 0.0;
    rate(n + 1) = ViolationRate(t, xi, u);
    return rate;
  }

  AugmentedJacobians Jacobians(double t, const Vector& x,
                               const Vector& u) const {
    CheckDims(x, u);
    const int n = n_xi();
    const int m = n_u();
    const Vector xi = x.head(n);
    AugmentedJacobians jac{Matrix::Zero(n_x(), n_x()),
                           Matrix::Zero(n_x(), m)};

    const Matrix fx = system_.jac_xi(t, xi, u);
    const Matrix fu = system_.jac_u(t, xi, u);
    Require(fx.rows() == n && fx.cols() == n,
            "physical jac_xi has wrong shape");
    Require(fu.rows() == n && fu.cols() == m, "physical jac_u has wrong shape");
    jac.dx.topLeftCorner(n, n) = fx;
    jac.du.topRows(n) = fu;

    if (cost_.running) {
      jac.dx.block(n, 0, 1, n) = cost_.running->grad_xi(t, xi, u).transpose();
      jac.du.row(n) = cost_.running->grad_u(t, xi, u).transpose();
    }

    // d/dz |g + d|_+^2 = 2 |g + d|_+ dg/dz and d/dz h^2 = 2 h dh/dz.
    if (constraints_.n_g > 0) {
      const PositivePart active = TightenedPositivePart(t, xi, u);
      if (active.any_nonzero()) {
        jac.dx.block(n + 1, 0, 1, n) +=
            2.0 * active.values.transpose() * constraints_.g_jac_xi(t, xi, u);
        jac.du.row(n + 1) +=
            2.0 * active.values.transpose() * constraints_.g_jac_u(t, xi, u);
      }
    }
    if (constraints_.n_h > 0) {
      const Vector hv = constraints_.h(t, xi, u);
      jac.dx.block(n + 1, 0, 1, n) +=
          2.0 * hv.transpose() * constraints_.h_jac_xi(t, xi, u);
      jac.du.row(n + 1) += 2.0 * hv.transpose() * constraints_.h_jac_u(t, xi, u);
    }
    return jac;
  }

  // sum_i |g_i + delta|_+^2 + sum_j h_j^2 at (t, xi, u).
  double ViolationRate(double t, const Vector& xi, const Vector& u) const {
    double rate = 0.0;
    if (constraints_.n_g > 0) {
      rate += TightenedPositivePart(t, xi, u).values.squaredNorm();
    }
    if (constraints_.n_h > 0) {
      const Vector hv = constraints_.h(t, xi, u);
      Require(hv.size() == constraints_.n_h, "h returned wrong dimension");
      rate += hv.squaredNorm();
    }
    return rate;
  }

 private:
  struct PositivePart {
    Vector values;
    bool any_nonzero() const { return (values.array() > 0.0).any(); }
  };

  PositivePart TightenedPositivePart(double t, const Vector& xi,
                                     const Vector& u) const {
    const Vector gv = constraints_.g(t, xi, u);
    Require(gv.size() == constraints_.n_g, "g returned wrong dimension");
    return {(gv.array() + constraints_.tightening).max(0.0).matrix()};
  }

  void CheckDims(const Vector& x, const Vector& u) const {
    if (x.size() != n_x() || u.size() != n_u()) {
      throw ConfigurationError("augmented state/input dimension mismatch");
    }
  }

  PhysicalSystem system_;
  PathConstraints constraints_;
  CostSpec cost_;
};

// x_c = (xi_c, 0, 0).
inline Vector InitialAugmentedState(const Vector& xi_c) {
  Vector x = Vector::Zero(xi_c.size() + 2);
  x.head(xi_c.size()) = xi_c;
  return x;
}

}  // namespace ctcs_nmpc
