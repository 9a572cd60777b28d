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

// Small problem builders shared by the unit and acceptance suites.

#pragma once

#include <Eigen/Dense>

#include <random>
#include <vector>

#include "ctcs_nmpc/double_integrator.hpp"
#include "ctcs_nmpc/problem.hpp"
#include "oracles.hpp"

namespace ctcs_nmpc::testing {

inline LqrToyData DefaultLqrToy() {
  LqrToyData d;
  d.a = (Eigen::MatrixXd(2, 2) << 0.0, 1.0, 0.0, -0.2).finished();
  d.b = (Eigen::MatrixXd(2, 1) << 0.0, 1.0).finished();
  d.rho = 0.5;
  d.xi_ref = Eigen::Vector2d(1.0, 0.0);
  d.xi0 = Eigen::Vector2d(-0.5, 0.3);
  d.t_h = 2.0;
  d.n_nodes = 6;
  d.substeps = 10;
  return d;
}

inline AugmentedDynamics LqrDynamics(const LqrToyData& d) {
  PhysicalSystem sys;
  sys.n_xi = static_cast<int>(d.a.rows());
  sys.n_u = static_cast<int>(d.b.cols());
  sys.rhs = [a = d.a, b = d.b](double, const Vector& xi, const Vector& u) {
    return Vector(a * xi + b * u);
  };
  sys.jac_xi = [a = d.a](double, const Vector&, const Vector&) { return a; };
  sys.jac_u = [b = d.b](double, const Vector&, const Vector&) { return b; };
  RunningCost cost;
  cost.value = [d](double, const Vector& xi, const Vector& u) {
    return 0.5 * (xi - d.xi_ref).squaredNorm() + 0.5 * d.rho * u.squaredNorm();
  };
  cost.grad_xi = [d](double, const Vector& xi, const Vector&) {
    return Vector(xi - d.xi_ref);
  };
  cost.grad_u = [d](double, const Vector&, const Vector& u) {
    return Vector(d.rho * u);
  };
  CostSpec cost_spec;
  cost_spec.running = cost;
  return AugmentedDynamics(std::move(sys), PathConstraints{},
                           std::move(cost_spec));
}

// Planar kinematic point r' = u with the equality h = ||u||^2 - 1 and one
// circular obstacle, used to exercise the equality pathway.
inline AugmentedDynamics KinematicUnitSpeed() {
  PhysicalSystem sys;
  sys.n_xi = 2;
  sys.n_u = 2;
  sys.rhs = [](double, const Vector&, const Vector& u) { return Vector(u); };
  sys.jac_xi = [](double, const Vector&, const Vector&) {
    return Matrix(Matrix::Zero(2, 2));
  };
  sys.jac_u = [](double, const Vector&, const Vector&) {
    return Matrix(Matrix::Identity(2, 2));
  };
  EllipticalObstacle o;
  o.center = Eigen::Vector2d(0.5, 0.2);
  PathConstraints pc = ObstacleConstraints({o}, 2, 2, 0.1);
  pc.n_h = 1;
  pc.h = [](double, const Vector&, const Vector& u) {
    return Vector::Constant(1, u.squaredNorm() - 1.0);
  };
  pc.h_jac_xi = [](double, const Vector&, const Vector&) {
    return Matrix(Matrix::Zero(1, 2));
  };
  pc.h_jac_u = [](double, const Vector&, const Vector& u) {
    return Matrix(2.0 * u.transpose());
  };
  return AugmentedDynamics(std::move(sys), std::move(pc), CostSpec{});
}

// Drag double integrator with every default obstacle active.
inline AugmentedDynamics DragWithObstacles() {
  const double_integrator::DemoScenario sc;
  std::vector<int> all;
  for (size_t i = 0; i < sc.obstacles.size(); ++i) {
    all.push_back(static_cast<int>(i));
  }
  return double_integrator::HorizonDynamics(
      sc, double_integrator::RunMode::kCtcs, all);
}

inline Vector RandomVector(std::mt19937& rng, int n, double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = dist(rng);
  return v;
}

}  // namespace ctcs_nmpc::testing
