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

// Benchmark scenario: reference tracking with elliptical obstacle avoidance
// for a planar double integrator with quadratic drag,
//
//   d/dt r = v,   d/dt v = u - c_d ||v|| v,   ||u|| <= u_max,
//
// with running cost ||r - r_ref(t)||^2. Two constraint pathways share the
// rest of the machinery: the continuous-time one integrates
// |g + delta_obs|_+^2 into y, the node-only baseline imposes g <= 0 at the
// nodes and leaves y unused.

#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctcs_nmpc/common.hpp"
#include "ctcs_nmpc/nmpc.hpp"
#include "ctcs_nmpc/obstacles.hpp"
#include "ctcs_nmpc/problem.hpp"
#include "ctcs_nmpc/scp.hpp"

namespace ctcs_nmpc::double_integrator {

using Json = nlohmann::json;

inline constexpr int kStateDim = 4;
inline constexpr int kInputDim = 2;
inline constexpr int kSchemaVersion = 1;

enum class RunMode { kCtcs, kNodeOnly };

inline std::string ToString(RunMode mode) {
  return mode == RunMode::kCtcs ? "ctcs" : "node-only";
}

inline RunMode ParseRunMode(const std::string& s) {
  if (s == "ctcs") return RunMode::kCtcs;
  if (s == "node-only" || s == "node_only") return RunMode::kNodeOnly;
  throw ConfigurationError("unknown mode '" + s +
                           "' (expected ctcs or node-only)");
}

// r_ref(t) = (-10 + 2t/3, 5 exp(-0.05 t) sin(pi/2 + t/5 + t^2/36)).
inline Eigen::Vector2d Reference(double t) {
  return {-10.0 + 2.0 * t / 3.0,
          5.0 * std::exp(-0.05 * t) *
              std::sin(std::numbers::pi / 2.0 + t / 5.0 + t * t / 36.0)};
}

// Half-ranges of the scaled subproblem variables. The proximal term acts on
// the scaled values, so these also set its per-component weight.
struct DemoScaling {
  double position = 10.0;
  double velocity = 10.0;
  double control = 10.0;
  double cost = 1000.0;  // l; large so the accumulated cost moves freely
  double violation = 1.0;  // y

  VariableScaling ToVariableScaling() const {
    VariableScaling s;
    s.x_center = Vector::Zero(kStateDim + 2);
    s.x_half_range = Vector(kStateDim + 2);
    s.x_half_range << position, position, velocity, velocity, cost, violation;
    s.u_scale = control;
    return s;
  }
};

struct DemoScenario {
  double drag = 0.05;   // c_d, 1/m
  double u_max = 5.0;   // m/s^2
  double delta_obs = 0.05;
  double r_sens = 6.0;
  std::vector<EllipticalObstacle> obstacles = DefaultObstacles();
  Eigen::Vector4d initial_state{-10.0, 5.0, 0.0, 0.0};
  DemoScaling scaling;

  static std::vector<EllipticalObstacle> DefaultObstacles() {
    const Eigen::Matrix2d shape = Eigen::Vector2d(2.4, 0.4).asDiagonal();
    const double centers[5][2] = {
        {-6.5, -3.0}, {-1.8, 3.5}, {0.5, -3.5}, {2.7, 1.5}, {6.2, -3.0}};
    std::vector<EllipticalObstacle> out;
    for (const auto& c : centers) out.push_back({shape, {c[0], c[1]}});
    return out;
  }
};

// Tuned for the desk-scale scenario. The generic ScpConfig defaults are too
// soft on the prox term once variables are scaled, and the conic solver needs
// a larger iteration budget on the ctcs subproblems.
inline ScpConfig DemoScpDefaults() {
  ScpConfig scp;
  scp.w_ep = 1000.0;
  scp.w_prox = 100.0;
  scp.conic.max_iters = 100000;
  return scp;
}

struct DemoSetup {
  DemoScenario scenario;
  NmpcConfig nmpc;
  ScpConfig scp = DemoScpDefaults();
};

inline PhysicalSystem MakeSystem(double drag) {
  PhysicalSystem sys;
  sys.n_xi = kStateDim;
  sys.n_u = kInputDim;
  sys.rhs = [drag](double, const Vector& xi, const Vector& u) {
    const Eigen::Vector2d v = xi.segment<2>(2);
    Vector rate(kStateDim);
    rate.head<2>() = v;
    rate.tail<2>() = u - drag * v.norm() * v;
    return rate;
  };
  sys.jac_xi = [drag](double, const Vector& xi, const Vector&) {
    const Eigen::Vector2d v = xi.segment<2>(2);
    const double speed = v.norm();
    Matrix jac = Matrix::Zero(kStateDim, kStateDim);
    jac.block<2, 2>(0, 2).setIdentity();
    // d/dv (||v|| v) = ||v|| I + v v' / ||v||, which vanishes at v = 0.
    if (speed > 0.0) {
      jac.block<2, 2>(2, 2) =
          -drag * (speed * Eigen::Matrix2d::Identity() + v * v.transpose() / speed);
    }
    return jac;
  };
  sys.jac_u = [](double, const Vector&, const Vector&) {
    Matrix jac = Matrix::Zero(kStateDim, kInputDim);
    jac.block<2, 2>(2, 0).setIdentity();
    return jac;
  };
  return sys;
}

inline RunningCost TrackingCost() {
  RunningCost cost;
  cost.value = [](double t, const Vector& xi, const Vector&) {
    return (xi.head<2>() - Reference(t)).squaredNorm();
  };
  cost.grad_xi = [](double t, const Vector& xi, const Vector&) {
    Vector g = Vector::Zero(kStateDim);
    g.head<2>() = 2.0 * (xi.head<2>() - Reference(t));
    return g;
  };
  cost.grad_u = [](double, const Vector&, const Vector&) {
    return Vector::Zero(kInputDim);
  };
  return cost;
}

inline std::vector<EllipticalObstacle> Select(
    const std::vector<EllipticalObstacle>& all, const std::vector<int>& idx) {
  std::vector<EllipticalObstacle> out;
  for (int i : idx) out.push_back(all.at(static_cast<size_t>(i)));
  return out;
}

// Dynamics seen by the optimizer for one horizon.
inline AugmentedDynamics HorizonDynamics(const DemoScenario& sc,
                                         RunMode mode,
                                         const std::vector<int>& active) {
  CostSpec cost;
  cost.running = TrackingCost();
  PathConstraints pc;
  if (mode == RunMode::kCtcs) {
    pc = ObstacleConstraints(Select(sc.obstacles, active), kStateDim,
                             kInputDim, sc.delta_obs);
  }
  return AugmentedDynamics(MakeSystem(sc.drag), pc, cost);
}

// Plant used for evolution and auditing: every obstacle, untightened.
inline AugmentedDynamics PlantDynamics(const DemoScenario& sc) {
  CostSpec cost;
  cost.running = TrackingCost();
  return AugmentedDynamics(
      MakeSystem(sc.drag),
      ObstacleConstraints(sc.obstacles, kStateDim, kInputDim, 0.0), cost);
}

inline std::optional<NodeConstraints> NodeObstacleConstraints(
    const DemoScenario& sc, RunMode mode, const std::vector<int>& active) {
  if (mode != RunMode::kNodeOnly || active.empty()) return std::nullopt;
  const PathConstraints pc = ObstacleConstraints(
      Select(sc.obstacles, active), kStateDim, kInputDim, 0.0);
  return NodeConstraints{pc.n_g, pc.g, pc.g_jac_xi, pc.g_jac_u};
}

inline NmpcScenario MakeNmpcScenario(const DemoSetup& setup, RunMode mode) {
  NmpcScenario ns;
  ns.sensor.r_sens = setup.scenario.r_sens;
  ns.sensor.obstacles = setup.scenario.obstacles;
  ns.plant = PlantDynamics(setup.scenario);
  ns.x0 = InitialAugmentedState(setup.scenario.initial_state);
  const DemoScenario sc = setup.scenario;
  const NmpcConfig nc = setup.nmpc;
  ns.make_horizon = [sc, nc, mode](double t_c, const SensedState& sensed) {
    HorizonProblem hp;
    hp.dynamics = HorizonDynamics(sc, mode, sensed.active_obstacles);
    hp.grid = nc.Grid(t_c);
    hp.x_c = sensed.x_hat;
    hp.node_constraints =
        NodeObstacleConstraints(sc, mode, sensed.active_obstacles);
    return hp;
  };
  return ns;
}

// First-run initialization: every node holds x_c, controls are zero.
inline TrajectoryIterate HoldInitialization(const DemoSetup& setup) {
  const Vector xc = InitialAugmentedState(setup.scenario.initial_state);
  return {xc.replicate(1, setup.nmpc.n_nodes),
          Matrix::Zero(kInputDim, setup.nmpc.n_nodes)};
}

// ---------------------------------------------------------------------------
// Configuration

namespace internal {

template <typename T>
T Field(const Json& doc, const std::string& key, const std::string& path,
        T fallback) {
  if (!doc.contains(key)) return fallback;
  const Json& v = doc.at(key);
  try {
    if constexpr (std::is_same_v<T, int>) {
      if (!v.is_number_integer()) {
        throw ConfigurationError(path + key + ": expected an integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) {
        throw ConfigurationError(path + key + ": expected a number");
      }
    }
    return v.get<T>();
  } catch (const Json::exception& e) {
    throw ConfigurationError(path + key + ": " + e.what());
  }
}

inline Eigen::VectorXd VectorField(const Json& v, const std::string& where,
                                   int size) {
  if (!v.is_array() || static_cast<int>(v.size()) != size) {
    throw ConfigurationError(where + ": expected an array of " +
                             std::to_string(size) + " numbers");
  }
  Eigen::VectorXd out(size);
  for (int i = 0; i < size; ++i) {
    if (!v[i].is_number()) {
      throw ConfigurationError(where + "[" + std::to_string(i) +
                               "]: expected a number");
    }
    out(i) = v[i].get<double>();
  }
  return out;
}

}  // namespace internal

// Builds the full problem stack from a JSON document; omitted fields take
// the benchmark defaults (T = 30 s, t_h = 8 s, K = 4, N = 17, j_max = 3,
// c_d = 0.05, u_max = 5, delta_obs = 0.05, r_sens = 6, five obstacles).
inline DemoSetup BuildScenario(const Json& doc) {
  using internal::Field;
  if (!doc.is_object()) throw ConfigurationError("config: expected an object");
  DemoSetup setup;
  DemoScenario& sc = setup.scenario;
  NmpcConfig& nc = setup.nmpc;
  ScpConfig& scp = setup.scp;

  nc.total_time = Field(doc, "T", "config.", nc.total_time);
  nc.horizon = Field(doc, "t_h", "config.", nc.horizon);
  nc.shift = Field(doc, "K", "config.", nc.shift);
  nc.n_nodes = Field(doc, "N", "config.", nc.n_nodes);
  nc.j_max = Field(doc, "j_max", "config.", nc.j_max);
  sc.drag = Field(doc, "c_d", "config.", sc.drag);
  sc.u_max = Field(doc, "u_max", "config.", sc.u_max);
  sc.delta_obs = Field(doc, "delta_obs", "config.", sc.delta_obs);
  sc.r_sens = Field(doc, "r_sens", "config.", sc.r_sens);
  if (doc.contains("initial_state")) {
    sc.initial_state =
        internal::VectorField(doc["initial_state"], "config.initial_state", 4);
  }
  if (doc.contains("obstacles")) {
    const Json& obs = doc["obstacles"];
    if (!obs.is_array()) {
      throw ConfigurationError("config.obstacles: expected an array");
    }
    sc.obstacles.clear();
    for (size_t i = 0; i < obs.size(); ++i) {
      const std::string where = "config.obstacles[" + std::to_string(i) + "]";
      if (!obs[i].is_object() || !obs[i].contains("center")) {
        throw ConfigurationError(where + ": expected {shape, center}");
      }
      EllipticalObstacle o;
      o.center = internal::VectorField(obs[i]["center"], where + ".center", 2);
      if (obs[i].contains("shape")) {
        const Json& s = obs[i]["shape"];
        if (!s.is_array() || s.size() != 2) {
          throw ConfigurationError(where + ".shape: expected a 2x2 array");
        }
        o.shape.row(0) = internal::VectorField(s[0], where + ".shape[0]", 2);
        o.shape.row(1) = internal::VectorField(s[1], where + ".shape[1]", 2);
      } else {
        o.shape = Eigen::Vector2d(2.4, 0.4).asDiagonal();
      }
      sc.obstacles.push_back(o);
    }
  }

  const Json scale_doc = doc.value("scaling", Json::object());
  if (!scale_doc.is_object()) {
    throw ConfigurationError("config.scaling: expected an object");
  }
  DemoScaling& ds = sc.scaling;
  ds.position = Field(scale_doc, "position", "config.scaling.", ds.position);
  ds.velocity = Field(scale_doc, "velocity", "config.scaling.", ds.velocity);
  ds.control = Field(scale_doc, "control", "config.scaling.", ds.control);
  ds.cost = Field(scale_doc, "cost", "config.scaling.", ds.cost);
  ds.violation =
      Field(scale_doc, "violation", "config.scaling.", ds.violation);
  Require(ds.position > 0.0 && ds.velocity > 0.0 && ds.control > 0.0 &&
              ds.cost > 0.0 && ds.violation > 0.0,
          "config.scaling: every half-range must be positive");

  const Json scp_doc = doc.value("scp", Json::object());
  if (!scp_doc.is_object()) throw ConfigurationError("config.scp: expected an object");
  scp.w_ep = Field(scp_doc, "w_ep", "config.scp.", scp.w_ep);
  scp.w_prox = Field(scp_doc, "w_prox", "config.scp.", scp.w_prox);
  scp.epsilon = Field(scp_doc, "epsilon", "config.scp.", scp.epsilon);
  scp.converge_tol =
      Field(scp_doc, "converge_tol", "config.scp.", scp.converge_tol);
  scp.conic.tol = Field(scp_doc, "conic_tol", "config.scp.", scp.conic.tol);
  scp.conic.max_iters =
      Field(scp_doc, "conic_max_iters", "config.scp.", scp.conic.max_iters);
  scp.integrator.substeps_per_interval =
      Field(scp_doc, "substeps", "config.scp.",
            scp.integrator.substeps_per_interval);
  scp.integrator.dense_substeps = Field(scp_doc, "dense_substeps",
                                        "config.scp.",
                                        scp.integrator.dense_substeps);
  scp.threads = Field(scp_doc, "threads", "config.scp.", scp.threads);
  if (scp_doc.contains("w_ep_per_state")) {
    scp.w_ep_per_state = internal::VectorField(
        scp_doc["w_ep_per_state"], "config.scp.w_ep_per_state", kStateDim + 2);
  }

  Require(sc.drag >= 0.0, "config.c_d: must be nonnegative");
  Require(sc.u_max > 0.0, "config.u_max: must be positive");
  Require(sc.delta_obs >= 0.0, "config.delta_obs: must be nonnegative");
  Require(sc.r_sens > 0.0, "config.r_sens: must be positive");
  if (nc.shift > nc.n_nodes - 1 || nc.shift < 1) {
    throw ConfigurationError("config.K: must satisfy 1 <= K <= N-1");
  }
  nc.Validate();
  scp.u_max = sc.u_max;
  scp.j_max = nc.j_max;
  scp.scaling = sc.scaling.ToVariableScaling();
  scp.Validate();
  return setup;
}

inline DemoSetup BuildScenarioFromFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open config " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigurationError("config " + path.string() + ": " + e.what());
  }
  return BuildScenario(doc);
}

// ---------------------------------------------------------------------------
// Running and summarizing

struct DemoSummary {
  int runs = 0;
  double average_tracking_error = 0.0;  // mean ||r - r_ref|| over samples
  double max_pointwise_violation = 0.0;  // max_t 1'|g|_+ (all obstacles)
  double integral_violation = 0.0;       // trapezoid of 1'|g|_+
  double max_node_violation = 0.0;  // max g over solved nodes 2..N, active
  double max_control_norm = 0.0;    // over dense samples
  double max_defect = 0.0;          // largest final SCP defect of any run
  double wall_seconds = 0.0;
  int total_scp_iterations = 0;
  int dense_samples = 0;
};

struct DemoResult {
  RunMode mode = RunMode::kCtcs;
  DemoSetup setup;
  NmpcOutcome outcome;
  DemoSummary summary;
};

// Dense samples of all runs joined end to start, without the repeated
// boundary sample.
inline std::vector<DenseSample> JoinedDense(
    const std::vector<NmpcRunRecord>& records) {
  std::vector<DenseSample> out;
  for (const auto& rec : records) {
    const size_t first = out.empty() ? 0 : 1;
    for (size_t i = first; i < rec.dense.size(); ++i) out.push_back(rec.dense[i]);
  }
  return out;
}

inline DemoSummary Summarize(const DemoScenario& sc,
                             const std::vector<NmpcRunRecord>& records) {
  DemoSummary s;
  s.runs = static_cast<int>(records.size());
  const std::vector<DenseSample> dense = JoinedDense(records);
  s.dense_samples = static_cast<int>(dense.size());
  double prev_v = 0.0;
  for (size_t i = 0; i < dense.size(); ++i) {
    const Eigen::Vector2d r = dense[i].x.head<2>();
    s.average_tracking_error += (r - Reference(dense[i].t)).norm();
    const double v = PointwiseViolation(sc.obstacles, r);
    s.max_pointwise_violation = std::max(s.max_pointwise_violation, v);
    if (i > 0) {
      s.integral_violation += 0.5 * (v + prev_v) * (dense[i].t - dense[i - 1].t);
    }
    prev_v = v;
    s.max_control_norm = std::max(s.max_control_norm, dense[i].u.norm());
  }
  if (!dense.empty()) s.average_tracking_error /= dense.size();

  s.max_node_violation = -std::numeric_limits<double>::infinity();
  for (const auto& rec : records) {
    s.total_scp_iterations += static_cast<int>(rec.metrics.size());
    if (rec.defects.size()) {
      s.max_defect = std::max(s.max_defect, rec.defects.cwiseAbs().maxCoeff());
    }
    for (int k = 1; k < rec.z.n_nodes(); ++k) {
      const Eigen::Vector2d r = rec.z.states.col(k).head<2>();
      for (int i : rec.active_obstacles) {
        s.max_node_violation = std::max(
            s.max_node_violation, sc.obstacles[static_cast<size_t>(i)].Constraint(r));
      }
    }
  }
  if (!std::isfinite(s.max_node_violation)) s.max_node_violation = 0.0;
  return s;
}

inline DemoResult RunDemo(RunMode mode, const DemoSetup& setup) {
  DemoResult result;
  result.mode = mode;
  result.setup = setup;
  const auto start = std::chrono::steady_clock::now();
  result.outcome = RunNmpc(setup.nmpc, MakeNmpcScenario(setup, mode),
                           HoldInitialization(setup), setup.scp);
  result.summary = Summarize(setup.scenario, result.outcome.records);
  result.summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return result;
}

// Single horizon from the configured initial state (the `solve` command).
inline ScpResult SolveSingleHorizon(RunMode mode, const DemoSetup& setup) {
  const NmpcScenario ns = MakeNmpcScenario(setup, mode);
  const SensedState sensed = Sense(ns.x0, 0.0, ns.sensor);
  const HorizonProblem hp = ns.make_horizon(0.0, sensed);
  return ScpSolve(HoldInitialization(setup), hp, setup.scp);
}

// ---------------------------------------------------------------------------
// Export

inline const std::vector<std::string>& DenseColumns() {
  static const std::vector<std::string> cols = {
      "t",   "r_x", "r_y", "v_x", "v_y", "u_x", "u_y", "pointwise_violation",
      "l",   "y",   "r_ref_x", "r_ref_y", "tracking_error"};
  return cols;
}

inline const std::vector<std::string>& MetricsColumns() {
  static const std::vector<std::string> cols = {
      "run", "iter", "J_l", "J_y", "J_prox", "conic_iters", "wall_ms"};
  return cols;
}

inline const std::vector<std::string>& NodeColumns() {
  static const std::vector<std::string> cols = {
      "run", "node", "t", "r_x", "r_y", "v_x", "v_y", "l", "y", "u_x", "u_y"};
  return cols;
}

struct RunArtifacts {
  std::filesystem::path dense_csv;
  std::filesystem::path nodes_csv;
  std::filesystem::path metrics_csv;
  std::filesystem::path summary_json;
};

inline Json SummaryJson(const DemoResult& res) {
  const DemoSummary& s = res.summary;
  const DemoSetup& st = res.setup;
  Json obstacles = Json::array();
  for (const auto& o : st.scenario.obstacles) {
    obstacles.push_back(
        {{"shape",
          {{o.shape(0, 0), o.shape(0, 1)}, {o.shape(1, 0), o.shape(1, 1)}}},
         {"center", {o.center(0), o.center(1)}}});
  }
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["mode"] = ToString(res.mode);
  doc["ok"] = res.outcome.ok();
  if (res.outcome.error) doc["error"] = *res.outcome.error;
  doc["summary"] = {{"runs", s.runs},
                    {"average_tracking_error", s.average_tracking_error},
                    {"max_pointwise_violation", s.max_pointwise_violation},
                    {"integral_violation", s.integral_violation},
                    {"max_node_violation", s.max_node_violation},
                    {"max_control_norm", s.max_control_norm},
                    {"max_defect", s.max_defect},
                    {"total_scp_iterations", s.total_scp_iterations},
                    {"dense_samples", s.dense_samples},
                    {"wall_seconds", s.wall_seconds}};
  doc["config"] = {
      {"T", st.nmpc.total_time},
      {"t_h", st.nmpc.horizon},
      {"K", st.nmpc.shift},
      {"N", st.nmpc.n_nodes},
      {"j_max", st.nmpc.j_max},
      {"c_d", st.scenario.drag},
      {"u_max", st.scenario.u_max},
      {"delta_obs", st.scenario.delta_obs},
      {"r_sens", st.scenario.r_sens},
      {"initial_state",
       {st.scenario.initial_state(0), st.scenario.initial_state(1),
        st.scenario.initial_state(2), st.scenario.initial_state(3)}},
      {"obstacles", obstacles},
      {"scp",
       {{"w_ep", st.scp.w_ep},
        {"w_prox", st.scp.w_prox},
        {"epsilon", st.scp.epsilon},
        {"converge_tol", st.scp.converge_tol},
        {"conic_tol", st.scp.conic.tol},
        {"conic_max_iters", st.scp.conic.max_iters},
        {"substeps", st.scp.integrator.substeps_per_interval},
        {"dense_substeps", st.scp.integrator.dense_substeps}}}};
  return doc;
}

namespace internal {

inline std::ofstream OpenForWrite(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << std::setprecision(17);
  return out;
}

inline void WriteHeader(std::ofstream& out,
                        const std::vector<std::string>& cols) {
  for (size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
}

}  // namespace internal

inline RunArtifacts ExportArtifacts(const DemoResult& res,
                                    const std::filesystem::path& out_dir) {
  const auto& records = res.outcome.records;
  if (records.empty()) {
    throw std::runtime_error("no NMPC records to export");
  }
  std::filesystem::create_directories(out_dir);
  RunArtifacts art{out_dir / "dense.csv", out_dir / "nodes.csv",
                   out_dir / "metrics.csv", out_dir / "summary.json"};
  const auto& obstacles = res.setup.scenario.obstacles;

  {
    auto out = internal::OpenForWrite(art.dense_csv);
    internal::WriteHeader(out, DenseColumns());
    for (const DenseSample& s : JoinedDense(records)) {
      const Eigen::Vector2d r = s.x.head<2>();
      const Eigen::Vector2d ref = Reference(s.t);
      out << s.t << ',' << s.x(0) << ',' << s.x(1) << ',' << s.x(2) << ','
          << s.x(3) << ',' << s.u(0) << ',' << s.u(1) << ','
          << PointwiseViolation(obstacles, r) << ',' << s.x(4) << ','
          << s.x(5) << ',' << ref(0) << ',' << ref(1) << ','
          << (r - ref).norm() << '\n';
    }
  }
  {
    auto out = internal::OpenForWrite(art.nodes_csv);
    internal::WriteHeader(out, NodeColumns());
    for (const auto& rec : records) {
      const GridConfig grid = res.setup.nmpc.Grid(rec.t_c);
      for (int k = 0; k < rec.z.n_nodes(); ++k) {
        const auto x = rec.z.states.col(k);
        const auto u = rec.z.controls.col(k);
        out << rec.index << ',' << k << ',' << grid.Node(k) << ',' << x(0)
            << ',' << x(1) << ',' << x(2) << ',' << x(3) << ',' << x(4)
            << ',' << x(5) << ',' << u(0) << ',' << u(1) << '\n';
      }
    }
  }
  {
    auto out = internal::OpenForWrite(art.metrics_csv);
    internal::WriteHeader(out, MetricsColumns());
    for (const auto& rec : records) {
      for (size_t j = 0; j < rec.metrics.size(); ++j) {
        const ScpMetrics& m = rec.metrics[j];
        out << rec.index << ',' << j + 1 << ',' << m.j_l << ',' << m.j_y
            << ',' << m.j_prox << ',' << m.conic_iterations << ','
            << m.wall_ms << '\n';
      }
    }
  }
  {
    auto out = internal::OpenForWrite(art.summary_json);
    out << SummaryJson(res).dump(2) << '\n';
  }
  return art;
}

}  // namespace ctcs_nmpc::double_integrator
