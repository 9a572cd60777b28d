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

// First-order solver for
//
//   minimize   1/2 z'Pz + q'z
//   subject to Hz = b,  z in K,
//
// where K is a product of free, nonnegative, second-order-cone and
// Euclidean-ball blocks. The iteration is the proportional-integral
// projected gradient scheme
//
//   z+   = proj_K(z - alpha (Pz + q + H'v))
//   w+   = w + beta (H z+ - b)          (integral term)
//   v+   = w+ + beta (H z+ - b)         (proportional term)
//
// run on a Ruiz-equilibrated copy of the problem, with restarts to the
// running average and primal/dual step rebalancing at each restart.

#pragma once

#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ctcs_nmpc/common.hpp"

namespace ctcs_nmpc {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class ConeKind { kFree, kNonnegative, kSecondOrder, kBall };

// kSecondOrder blocks are laid out (t, x) with ||x|| <= t. kBall blocks are
// {x : ||x|| <= radius}; they are not cones but project just as cheaply.
struct ConeBlock {
  ConeKind kind = ConeKind::kFree;
  int dim = 0;
  double radius = 0.0;
};

struct ConeSpec {
  std::vector<ConeBlock> blocks;

  ConeSpec& Free(int dim) { return Add({ConeKind::kFree, dim, 0.0}); }
  ConeSpec& Nonnegative(int dim) {
    return Add({ConeKind::kNonnegative, dim, 0.0});
  }
  ConeSpec& SecondOrder(int dim) {
    return Add({ConeKind::kSecondOrder, dim, 0.0});
  }
  ConeSpec& Ball(int dim, double radius) {
    return Add({ConeKind::kBall, dim, radius});
  }

  int dim() const {
    int n = 0;
    for (const auto& b : blocks) n += b.dim;
    return n;
  }

  void Validate() const {
    for (const auto& b : blocks) {
      Require(b.dim > 0, "cone blocks must have positive dimension");
      if (b.kind == ConeKind::kSecondOrder) {
        Require(b.dim >= 2, "second-order cone blocks need dim >= 2");
      }
      if (b.kind == ConeKind::kBall) {
        Require(b.radius >= 0.0, "ball radius must be nonnegative");
      }
    }
  }

 private:
  ConeSpec& Add(ConeBlock block) {
    // Adjacent free or nonnegative blocks merge; it changes nothing else.
    if (!blocks.empty() && blocks.back().kind == block.kind &&
        (block.kind == ConeKind::kFree ||
         block.kind == ConeKind::kNonnegative)) {
      blocks.back().dim += block.dim;
    } else {
      blocks.push_back(block);
    }
    return *this;
  }
};

struct ConicProblem {
  SparseMatrix p;  // symmetric positive semidefinite
  Vector q;
  SparseMatrix h;
  Vector b;
  ConeSpec cones;

  int n() const { return static_cast<int>(q.size()); }
  int m() const { return static_cast<int>(b.size()); }

  void Validate() const {
    cones.Validate();
    Require(p.rows() == n() && p.cols() == n(), "P must be n x n");
    Require(h.rows() == m() && h.cols() == n(), "H must be m x n");
    Require(cones.dim() == n(), "cone dimensions must sum to n");
    Require(q.allFinite() && b.allFinite(), "q and b must be finite");
  }
};

enum class ConicStatus { kSolved, kMaxIterations };

struct ConicSolution {
  Vector z;
  Vector dual;  // multipliers of Hz = b, Lagrangian term dual'(Hz - b)
  double primal_residual = 0.0;  // ||Hz - b||_inf
  double dual_residual = 0.0;    // ||z - proj_K(z - (Pz + q + H'dual))||_inf
  int iterations = 0;
  ConicStatus status = ConicStatus::kMaxIterations;
  // max(primal/(1+||b||), dual/(1+||q||)) at every residual check, when
  // ConicSettings::record_history is set.
  std::vector<double> residual_history;

  bool solved() const { return status == ConicStatus::kSolved; }
};

struct ConicWarmStart {
  Vector z;
  Vector dual;
};

struct ConicSettings {
  double tol = 1e-7;
  int max_iters = 50000;
  int ruiz_passes = 10;
  int check_every = 10;
  int restart_check_every = 50;
  bool record_history = false;
};

namespace internal {

inline void ProjectSecondOrder(Eigen::Ref<Vector> v) {
  const double t = v(0);
  const double xn = v.tail(v.size() - 1).norm();
  if (xn <= t) return;
  if (xn <= -t) {
    v.setZero();
    return;
  }
  const double s = 0.5 * (t + xn);
  v(0) = s;
  v.tail(v.size() - 1) = s * v.tail(v.size() - 1) / xn;
}

inline void ProjectBall(Eigen::Ref<Vector> v, double radius) {
  const double n = v.norm();
  if (n > radius) v *= (n > 0.0 ? radius / n : 0.0);
}

}  // namespace internal

// Blockwise Euclidean projection onto K.
inline Vector ProjectCone(const Vector& v, const ConeSpec& cones) {
  Require(v.size() == cones.dim(), "projection input has wrong length");
  Vector out = v;
  int offset = 0;
  for (const auto& b : cones.blocks) {
    auto seg = out.segment(offset, b.dim);
    switch (b.kind) {
      case ConeKind::kFree:
        break;
      case ConeKind::kNonnegative:
        seg = seg.cwiseMax(0.0);
        break;
      case ConeKind::kSecondOrder:
        internal::ProjectSecondOrder(seg);
        break;
      case ConeKind::kBall:
        internal::ProjectBall(seg, b.radius);
        break;
    }
    offset += b.dim;
  }
  return out;
}

// Power-iteration estimate of the spectral norm ||H||_2: at most 50
// iterations, stopping once the relative change drops below 1e-6. Returns 0
// for a zero (or empty) matrix.
template <typename MatrixType>
double EstimateOperatorNorm(const MatrixType& h) {
  if (h.rows() == 0 || h.cols() == 0) return 0.0;
  std::mt19937 rng(0x5eed);
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  Vector v(h.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = unif(rng);
  v.normalize();
  double estimate = 0.0;
  for (int it = 0; it < 50; ++it) {
    const Vector hv = h * v;
    Vector w = h.transpose() * hv;
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    const double next = std::sqrt(wn);
    v = w / wn;
    const bool settled =
        it > 0 && std::abs(next - estimate) <= 1e-6 * std::abs(next);
    estimate = next;
    if (settled) break;
  }
  return estimate;
}

namespace internal {

// Diagonal equilibration z = D zs, rows scaled by E, cost scaled by c:
// Ps = c D P D, qs = c D q, Hs = E H D, bs = E b.
struct Scaling {
  Vector d;
  Vector e;
  double c = 1.0;
};

inline Vector ColumnInfNorms(const SparseMatrix& m) {
  Vector norms = Vector::Zero(m.cols());
  for (int j = 0; j < m.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(m, j); it; ++it) {
      norms(j) = std::max(norms(j), std::abs(it.value()));
    }
  }
  return norms;
}

inline Vector RowInfNorms(const SparseMatrix& m) {
  Vector norms = Vector::Zero(m.rows());
  for (int j = 0; j < m.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(m, j); it; ++it) {
      norms(it.row()) = std::max(norms(it.row()), std::abs(it.value()));
    }
  }
  return norms;
}

inline double InvSqrtClamped(double norm) {
  if (norm < 1e-8) return 1.0;
  return std::clamp(1.0 / std::sqrt(norm), 1e-4, 1e4);
}

// Second-order and ball blocks must be scaled uniformly to stay in-family.
inline void UniformizeBlocks(Vector& d, const ConeSpec& cones) {
  int offset = 0;
  for (const auto& b : cones.blocks) {
    if (b.kind == ConeKind::kSecondOrder || b.kind == ConeKind::kBall) {
      const double mean = d.segment(offset, b.dim).mean();
      d.segment(offset, b.dim).setConstant(mean);
    }
    offset += b.dim;
  }
}

struct ScaledProblem {
  SparseMatrix p;
  SparseMatrix h;
  SparseMatrix ht;
  Vector q;
  Vector b;
  ConeSpec cones;
  Scaling scaling;
};

inline ScaledProblem Equilibrate(const ConicProblem& prob, int passes) {
  ScaledProblem s{prob.p, prob.h, SparseMatrix(), prob.q, prob.b, prob.cones,
                  {Vector::Ones(prob.n()), Vector::Ones(prob.m()), 1.0}};
  for (int pass = 0; pass < passes; ++pass) {
    const Vector pcol = ColumnInfNorms(s.p);
    const Vector hcol = ColumnInfNorms(s.h);
    const Vector hrow = RowInfNorms(s.h);
    Vector dvar(prob.n());
    for (int j = 0; j < prob.n(); ++j) {
      dvar(j) = InvSqrtClamped(std::max(pcol(j), hcol(j)));
    }
    UniformizeBlocks(dvar, prob.cones);
    Vector econ(prob.m());
    for (int i = 0; i < prob.m(); ++i) econ(i) = InvSqrtClamped(hrow(i));

    s.p = dvar.asDiagonal() * s.p * dvar.asDiagonal();
    s.h = econ.asDiagonal() * s.h * dvar.asDiagonal();
    s.q = dvar.cwiseProduct(s.q);
    s.b = econ.cwiseProduct(s.b);
    s.scaling.d = s.scaling.d.cwiseProduct(dvar);
    s.scaling.e = s.scaling.e.cwiseProduct(econ);
  }

  const Vector pcol = ColumnInfNorms(s.p);
  const double cost_norm =
      std::max(prob.n() > 0 ? pcol.mean() : 0.0,
               s.q.size() > 0 ? s.q.lpNorm<Eigen::Infinity>() : 0.0);
  s.scaling.c = cost_norm > 1e-8 ? std::clamp(1.0 / cost_norm, 1e-4, 1e4) : 1.0;
  s.p *= s.scaling.c;
  s.q *= s.scaling.c;

  int offset = 0;
  for (auto& b : s.cones.blocks) {
    if (b.kind == ConeKind::kBall) b.radius /= s.scaling.d(offset);
    offset += b.dim;
  }
  s.ht = s.h.transpose();
  return s;
}

struct Residuals {
  double primal = 0.0;
  double dual = 0.0;
};

inline Residuals UnscaledResiduals(const ConicProblem& prob, const Vector& z,
                                   const Vector& dual) {
  Residuals r;
  if (prob.m() > 0) {
    r.primal = (prob.h * z - prob.b).lpNorm<Eigen::Infinity>();
  }
  Vector grad = prob.p * z + prob.q;
  if (prob.m() > 0) grad += prob.h.transpose() * dual;
  if (prob.n() > 0) {
    r.dual = (z - ProjectCone(z - grad, prob.cones)).lpNorm<Eigen::Infinity>();
  }
  return r;
}

}  // namespace internal

// Residuals of a candidate primal-dual pair, as reported by SolveConic.
inline std::pair<double, double> ConicResiduals(const ConicProblem& prob,
                                                const Vector& z,
                                                const Vector& dual) {
  const auto r = internal::UnscaledResiduals(prob, z, dual);
  return {r.primal, r.dual};
}

inline ConicSolution SolveConic(
    const ConicProblem& prob,
    const std::optional<ConicWarmStart>& warm = std::nullopt,
    const ConicSettings& settings = {}) {
  prob.Validate();
  Require(settings.tol > 0.0 && settings.max_iters >= 1,
          "solver tolerance and iteration budget must be positive");
  const int n = prob.n();
  const int m = prob.m();
  const internal::ScaledProblem s =
      internal::Equilibrate(prob, settings.ruiz_passes);
  const Vector& d = s.scaling.d;
  const Vector& e = s.scaling.e;
  const double c = s.scaling.c;

  // Step sizes satisfy alpha * (lambda_p + beta sigma^2) = 1; both norm
  // estimates get 5% headroom.
  const double lambda_p = 1.05 * EstimateOperatorNorm(s.p);
  const double sigma = 1.05 * EstimateOperatorNorm(s.h);
  double omega = 1.0;
  double alpha = 1.0;
  double beta = 0.0;
  auto set_steps = [&] {
    const double disc = lambda_p * lambda_p + 4.0 * omega * sigma * sigma;
    alpha = disc > 0.0 ? 2.0 / (std::sqrt(disc) + lambda_p) : 1.0;
    beta = omega * alpha;
  };
  set_steps();

  Vector z = Vector::Zero(n);
  Vector w = Vector::Zero(m);
  if (warm) {
    Require(warm->z.size() == n, "warm-start primal has wrong length");
    z = warm->z.cwiseQuotient(d);
    if (warm->dual.size() == m) w = c * warm->dual.cwiseQuotient(e);
  }
  z = ProjectCone(z, s.cones);

  const double b_scale = 1.0 + (m > 0 ? prob.b.lpNorm<Eigen::Infinity>() : 0.0);
  const double q_scale = 1.0 + (n > 0 ? prob.q.lpNorm<Eigen::Infinity>() : 0.0);

  auto unscale = [&](const Vector& zs, const Vector& ws) {
    return std::make_pair(Vector(d.cwiseProduct(zs)),
                          Vector(e.cwiseProduct(ws) / c));
  };
  // Scaled-space KKT error used for restart decisions.
  auto kkt = [&](const Vector& zs, const Vector& ws) {
    double primal = 0.0;
    Vector grad = s.p * zs + s.q;
    if (m > 0) {
      primal = (s.h * zs - s.b).squaredNorm();
      grad += s.ht * ws;
    }
    const double dual = (zs - ProjectCone(zs - grad, s.cones)).squaredNorm();
    return std::sqrt(omega * primal + dual / omega);
  };

  ConicSolution best;
  best.iterations = 0;
  double best_score = std::numeric_limits<double>::infinity();

  Vector hz = m > 0 ? Vector(s.h * z - s.b) : Vector();
  Vector v = m > 0 ? Vector(w + beta * hz) : Vector();

  Vector z_sum = Vector::Zero(n);
  Vector w_sum = Vector::Zero(m);
  int since_restart = 0;
  Vector z_restart = z;
  Vector w_restart = w;
  double kkt_restart = kkt(z, w);
  double kkt_last_check = kkt_restart;

  for (int it = 1; it <= settings.max_iters; ++it) {
    Vector grad = s.p * z + s.q;
    if (m > 0) grad += s.ht * v;
    z = ProjectCone(z - alpha * grad, s.cones);
    if (m > 0) {
      hz = s.h * z - s.b;
      w += beta * hz;
      v = w + beta * hz;
    }
    z_sum += z;
    w_sum += w;
    ++since_restart;

    if (it % settings.check_every == 0 || it == settings.max_iters) {
      const auto [zu, wu] = unscale(z, w);
      const auto r = internal::UnscaledResiduals(prob, zu, wu);
      const double score =
          std::max(r.primal / b_scale, r.dual / q_scale);
      if (settings.record_history) best.residual_history.push_back(score);
      if (score < best_score) {
        best_score = score;
        best.z = zu;
        best.dual = wu;
        best.primal_residual = r.primal;
        best.dual_residual = r.dual;
        best.iterations = it;
      }
      if (r.primal <= settings.tol * b_scale &&
          r.dual <= settings.tol * q_scale) {
        best.z = zu;
        best.dual = wu;
        best.primal_residual = r.primal;
        best.dual_residual = r.dual;
        best.iterations = it;
        best.status = ConicStatus::kSolved;
        return best;
      }
    }

    if (it % settings.restart_check_every == 0) {
      const Vector z_avg = z_sum / since_restart;
      const Vector w_avg = w_sum / since_restart;
      const double kkt_cur = kkt(z, w);
      const double kkt_avg = kkt(z_avg, w_avg);
      const bool use_avg = kkt_avg < kkt_cur;
      const double kkt_cand = use_avg ? kkt_avg : kkt_cur;
      const bool sufficient = kkt_cand <= 0.2 * kkt_restart;
      const bool necessary =
          kkt_cand <= 0.8 * kkt_restart && kkt_cand > kkt_last_check;
      const bool long_run = since_restart >= 0.36 * it;
      kkt_last_check = kkt_cand;
      if (sufficient || necessary || long_run) {
        if (use_avg) {
          z = ProjectCone(z_avg, s.cones);
          w = w_avg;
        }
        if (m > 0) {
          const double dz = (z - z_restart).norm();
          const double dw = (w - w_restart).norm();
          if (dz > 1e-10 && dw > 1e-10) {
            const double target = std::log((dw / dz) * (dw / dz));
            omega = std::exp(0.5 * target + 0.5 * std::log(omega));
            omega = std::clamp(omega, 1e-6, 1e6);
            set_steps();
          }
          hz = s.h * z - s.b;
          v = w + beta * hz;
        }
        z_restart = z;
        w_restart = w;
        kkt_restart = kkt(z, w);
        kkt_last_check = kkt_restart;
        z_sum.setZero();
        w_sum.setZero();
        since_restart = 0;
      }
    }
  }
  best.status = ConicStatus::kMaxIterations;
  best.iterations = settings.max_iters;
  return best;
}

// Writes P, q, H, b as dense whitespace-separated text plus a cone list, one
// file each under `dir`, for cross-checking with external solvers.
inline void DumpConicProblem(const ConicProblem& prob,
                             const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write_matrix = [&](const std::string& name, const Matrix& mat) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << std::setprecision(17);
    for (Eigen::Index i = 0; i < mat.rows(); ++i) {
      for (Eigen::Index j = 0; j < mat.cols(); ++j) {
        out << (j ? " " : "") << mat(i, j);
      }
      out << '\n';
    }
  };
  write_matrix("P.txt", Matrix(prob.p));
  write_matrix("q.txt", prob.q);
  write_matrix("H.txt", Matrix(prob.h));
  write_matrix("b.txt", prob.b);
  std::ofstream cones(dir / "cones.txt");
  cones << std::setprecision(17);
  for (const auto& b : prob.cones.blocks) {
    switch (b.kind) {
      case ConeKind::kFree:
        cones << "free " << b.dim << '\n';
        break;
      case ConeKind::kNonnegative:
        cones << "nonneg " << b.dim << '\n';
        break;
      case ConeKind::kSecondOrder:
        cones << "soc " << b.dim << '\n';
        break;
      case ConeKind::kBall:
        cones << "ball " << b.dim << ' ' << b.radius << '\n';
        break;
    }
  }
}

}  // namespace ctcs_nmpc
