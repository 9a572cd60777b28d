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

// Independent reference computations used by the unit and acceptance
// suites. Nothing here calls into the solver paths it is used to check.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

#include "ctcs_nmpc/conic.hpp"

namespace ctcs_nmpc::testing {

// Closed-form projections, written out separately from ProjectCone.
inline Eigen::VectorXd SocProjectionClosedForm(double t,
                                               const Eigen::VectorXd& x) {
  const double xn = x.norm();
  Eigen::VectorXd out(x.size() + 1);
  if (xn <= t) {
    out << t, x;
  } else if (xn <= -t) {
    out.setZero();
  } else {
    const double a = (t + xn) / 2.0;
    out << a, a * x / xn;
  }
  return out;
}

// Augmented-Lagrangian outer loop around accelerated projected gradient,
// using dense eigen-decompositions for its step sizes. Slow and accurate.
inline Eigen::VectorXd ConicOracle(const ConicProblem& prob,
                                   double tol = 1e-11) {
  const Eigen::MatrixXd p(prob.p);
  const Eigen::MatrixXd h(prob.h);
  const int n = prob.n();
  const int m = prob.m();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(p);
  const double mu = std::max(eig.eigenvalues().minCoeff(), 0.0);
  const double p_norm = eig.eigenvalues().maxCoeff();
  double h_norm2 = 0.0;
  if (m > 0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(h);
    h_norm2 = std::pow(svd.singularValues()(0), 2);
  }
  const double rho = m > 0 ? std::max(1.0, p_norm) / std::max(h_norm2, 1e-12)
                           : 0.0;
  const double lip = p_norm + rho * h_norm2;
  const double momentum = mu > 0.0
                              ? (std::sqrt(lip) - std::sqrt(mu)) /
                                    (std::sqrt(lip) + std::sqrt(mu))
                              : 0.9;

  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(m);
  for (int outer = 0; outer < 2000; ++outer) {
    Eigen::VectorXd y = z;
    Eigen::VectorXd z_prev = z;
    for (int inner = 0; inner < 200000; ++inner) {
      Eigen::VectorXd grad = p * y + prob.q;
      if (m > 0) grad += h.transpose() * (lam + rho * (h * y - prob.b));
      Eigen::VectorXd z_next = y - grad / lip;
      // Blockwise projection, inlined.
      int off = 0;
      for (const auto& blk : prob.cones.blocks) {
        auto seg = z_next.segment(off, blk.dim);
        if (blk.kind == ConeKind::kNonnegative) {
          seg = seg.cwiseMax(0.0);
        } else if (blk.kind == ConeKind::kSecondOrder) {
          seg = SocProjectionClosedForm(seg(0), seg.tail(blk.dim - 1));
        } else if (blk.kind == ConeKind::kBall) {
          const double nr = seg.norm();
          if (nr > blk.radius) seg *= blk.radius / nr;
        }
        off += blk.dim;
      }
      const double step = (z_next - y).norm();
      y = z_next + momentum * (z_next - z_prev);
      z_prev = z_next;
      z = z_next;
      if (step <= tol * 1e-2) break;
    }
    if (m == 0) break;
    const Eigen::VectorXd res = h * z - prob.b;
    lam += rho * res;
    if (res.lpNorm<Eigen::Infinity>() <= tol) break;
  }
  return z;
}

struct RandomConicInstance {
  ConicProblem problem;
  Eigen::VectorXd feasible_point;
};

// Strongly convex (P >= I) instance with free, nonnegative, second-order
// and ball blocks and a feasible equality system.
inline RandomConicInstance MakeRandomConicInstance(std::mt19937& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> small(2, 4);
  ConeSpec cones;
  cones.Free(small(rng))
      .Nonnegative(small(rng) + 2)
      .SecondOrder(small(rng) + 1)
      .Ball(small(rng), 1.5)
      .SecondOrder(3)
      .Nonnegative(small(rng));
  const int n = cones.dim();
  const int m = std::max(2, n / 4);

  // Feasible point strictly inside K.
  Eigen::VectorXd z0(n);
  int off = 0;
  for (const auto& blk : cones.blocks) {
    for (int i = 0; i < blk.dim; ++i) z0(off + i) = 0.5 * normal(rng);
    auto seg = z0.segment(off, blk.dim);
    if (blk.kind == ConeKind::kNonnegative) seg = seg.cwiseAbs();
    if (blk.kind == ConeKind::kSecondOrder) {
      seg(0) = seg.tail(blk.dim - 1).norm() + 0.5;
    }
    if (blk.kind == ConeKind::kBall && seg.norm() > 1.0) seg /= seg.norm();
    off += blk.dim;
  }

  Eigen::MatrixXd root(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) root(i, j) = normal(rng) / std::sqrt(n);
  const Eigen::MatrixXd p =
      root.transpose() * root + Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd h(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) h(i, j) = normal(rng);
  Eigen::VectorXd q(n);
  for (int i = 0; i < n; ++i) q(i) = 3.0 * normal(rng);

  RandomConicInstance inst;
  inst.problem.p = p.sparseView();
  inst.problem.q = q;
  inst.problem.h = h.sparseView();
  inst.problem.b = h * z0;
  inst.problem.cones = cones;
  inst.feasible_point = z0;
  return inst;
}

// Central-difference jacobian of fn at x.
template <typename Fn>
Eigen::MatrixXd CentralDifferenceJacobian(const Fn& fn,
                                          const Eigen::VectorXd& x,
                                          double step) {
  const Eigen::VectorXd f0 = fn(x);
  Eigen::MatrixXd jac(f0.size(), x.size());
  for (int j = 0; j < x.size(); ++j) {
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    xp(j) += step;
    xm(j) -= step;
    jac.col(j) = (fn(xp) - fn(xm)) / (2.0 * step);
  }
  return jac;
}

// Linear-quadratic toy: xi' = A xi + B u with running cost
// 0.5 ||xi - xi_ref||^2 + 0.5 rho ||u||^2, FOH controls on a uniform grid
// and `substeps` classical RK4 steps per interval. Integrates (xi, l) with
// its own loop and never touches the library propagators.
struct LqrToyData {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
  double rho = 1.0;
  Eigen::VectorXd xi_ref;
  Eigen::VectorXd xi0;
  double t_h = 1.0;
  int n_nodes = 6;
  int substeps = 10;
};

struct LqrRollout {
  Eigen::MatrixXd xi;  // one column per node
  Eigen::VectorXd l;   // accumulated cost at each node
};

inline LqrRollout LqrSimulate(const LqrToyData& d, const Eigen::MatrixXd& u) {
  const int n = static_cast<int>(d.xi0.size());
  const double dt = d.t_h / (d.n_nodes - 1);
  auto rate = [&](const Eigen::VectorXd& s, const Eigen::VectorXd& uu) {
    Eigen::VectorXd r(n + 1);
    const Eigen::VectorXd xi = s.head(n);
    r.head(n) = d.a * xi + d.b * uu;
    r(n) = 0.5 * (xi - d.xi_ref).squaredNorm() + 0.5 * d.rho * uu.squaredNorm();
    return r;
  };
  LqrRollout out{Eigen::MatrixXd(n, d.n_nodes), Eigen::VectorXd(d.n_nodes)};
  Eigen::VectorXd s(n + 1);
  s << d.xi0, 0.0;
  out.xi.col(0) = d.xi0;
  out.l(0) = 0.0;
  for (int k = 0; k + 1 < d.n_nodes; ++k) {
    const double h = dt / d.substeps;
    for (int i = 0; i < d.substeps; ++i) {
      // FOH weight of u_{k+1} at local time tau in [0, dt].
      auto uat = [&](double tau) -> Eigen::VectorXd {
        const double w = tau / dt;
        return (1.0 - w) * u.col(k) + w * u.col(k + 1);
      };
      const double t0 = i * h;
      const Eigen::VectorXd k1 = rate(s, uat(t0));
      const Eigen::VectorXd k2 = rate(s + 0.5 * h * k1, uat(t0 + 0.5 * h));
      const Eigen::VectorXd k3 = rate(s + 0.5 * h * k2, uat(t0 + 0.5 * h));
      const Eigen::VectorXd k4 = rate(s + h * k3, uat(t0 + h));
      s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    out.xi.col(k + 1) = s.head(n);
    out.l(k + 1) = s(n);
  }
  return out;
}

// The terminal accumulated cost is an exact quadratic in the stacked
// controls, so unit-step differences recover its gradient and Hessian
// without truncation error. The minimizer solves H u = -g.
inline Eigen::MatrixXd LqrNormalEquationsOracle(const LqrToyData& d) {
  const int m = static_cast<int>(d.b.cols());
  const int nv = m * d.n_nodes;
  auto cost = [&](const Eigen::VectorXd& v) {
    const Eigen::MatrixXd u =
        Eigen::Map<const Eigen::MatrixXd>(v.data(), m, d.n_nodes);
    return LqrSimulate(d, u).l(d.n_nodes - 1);
  };
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(nv);
  const double c0 = cost(zero);
  Eigen::VectorXd g(nv);
  Eigen::VectorXd ce(nv);
  for (int i = 0; i < nv; ++i) {
    const Eigen::VectorXd e = Eigen::VectorXd::Unit(nv, i);
    ce(i) = cost(e);
    g(i) = 0.5 * (ce(i) - cost(-e));
  }
  Eigen::MatrixXd hess(nv, nv);
  for (int i = 0; i < nv; ++i) {
    for (int j = i; j < nv; ++j) {
      const Eigen::VectorXd eij =
          Eigen::VectorXd::Unit(nv, i) + Eigen::VectorXd::Unit(nv, j);
      const double v = i == j ? 2.0 * (ce(i) - c0 - g(i))
                              : cost(eij) - ce(i) - ce(j) + c0;
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }
  const Eigen::VectorXd v = hess.ldlt().solve(-g);
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), m, d.n_nodes);
}

}  // namespace ctcs_nmpc::testing
