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

// Elliptical keep-out regions {r : ||S (r - c)|| < 1} and the constraint
// g(r) = 1 - ||S (r - c)|| <= 0 on the first two state components.

#pragma once

#include <Eigen/Core>

#include <vector>

#include "ctcs_nmpc/common.hpp"
#include "ctcs_nmpc/problem.hpp"

namespace ctcs_nmpc {

struct EllipticalObstacle {
  Eigen::Matrix2d shape = Eigen::Matrix2d::Identity();
  Eigen::Vector2d center = Eigen::Vector2d::Zero();

  double ScaledDistance(const Eigen::Vector2d& r) const {
    return (shape * (r - center)).norm();
  }

  double Constraint(const Eigen::Vector2d& r) const {
    return 1.0 - ScaledDistance(r);
  }

  // Gradient of g with respect to r. At the center the norm is not
  // differentiable; the direction e_1 stands in for the undefined unit
  // vector there.
  Eigen::RowVector2d ConstraintGradient(const Eigen::Vector2d& r) const {
    const Eigen::Vector2d d = shape * (r - center);
    const double n = d.norm();
    const Eigen::Vector2d unit = n > 0.0 ? Eigen::Vector2d(d / n)
                                         : Eigen::Vector2d::UnitX();
    return -(shape.transpose() * unit).transpose();
  }
};

// Stacks g_i for the given obstacles over a state whose first two entries
// are the position. `tightening` is forwarded to the violation integrand.
inline PathConstraints ObstacleConstraints(
    std::vector<EllipticalObstacle> obstacles, int n_xi, int n_u,
    double tightening) {
  Require(n_xi >= 2, "obstacle constraints need a 2D position");
  PathConstraints pc;
  pc.n_g = static_cast<int>(obstacles.size());
  pc.tightening = tightening;
  if (obstacles.empty()) return pc;
  pc.g = [obstacles](double, const Vector& xi, const Vector&) {
    Vector g(obstacles.size());
    const Eigen::Vector2d r = xi.head<2>();
    for (size_t i = 0; i < obstacles.size(); ++i) {
      g(i) = obstacles[i].Constraint(r);
    }
    return g;
  };
  pc.g_jac_xi = [obstacles, n_xi](double, const Vector& xi, const Vector&) {
    Matrix jac = Matrix::Zero(obstacles.size(), n_xi);
    const Eigen::Vector2d r = xi.head<2>();
    for (size_t i = 0; i < obstacles.size(); ++i) {
      jac.block<1, 2>(i, 0) = obstacles[i].ConstraintGradient(r);
    }
    return jac;
  };
  pc.g_jac_u = [m = obstacles.size(), n_u](double, const Vector&,
                                           const Vector&) {
    return Matrix::Zero(m, n_u);
  };
  return pc;
}

// 1'|g|_+ over the obstacles, the pointwise violation reported by audits.
inline double PointwiseViolation(
    const std::vector<EllipticalObstacle>& obstacles,
    const Eigen::Vector2d& r) {
  double v = 0.0;
  for (const auto& o : obstacles) v += std::max(0.0, o.Constraint(r));
  return v;
}

}  // namespace ctcs_nmpc
