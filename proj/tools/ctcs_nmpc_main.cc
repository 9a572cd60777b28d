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

// Command-line driver for the double-integrator benchmark.
//
//   ctcs-nmpc nmpc  --config cfg.json --mode ctcs --out runs/ctcs
//   ctcs-nmpc solve --config cfg.json --mode node-only
//   ctcs-nmpc check [--criterion N]...
//
// Exit status: 0 on success, 2 when a ctcs-mode run fails its continuous
// constraint audit, 1 on any error (including failed checks).

#include <algorithm>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "acceptance/criteria.hpp"
#include "ctcs_nmpc/double_integrator.hpp"

namespace {

namespace di = ctcs_nmpc::double_integrator;
namespace fs = std::filesystem;

constexpr double kAuditTolerance = 1e-6;
constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitAudit = 2;

struct CommonOptions {
  std::string config;
  std::string mode = "ctcs";
  std::string out;
  std::optional<int> dense_substeps;
};

void AddCommon(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--config", opt.config, "JSON configuration file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--mode", opt.mode, "ctcs or node-only")
      ->check(CLI::IsMember({"ctcs", "node-only", "node_only"}));
  cmd->add_option("--out", opt.out, "output directory for artifacts");
  cmd->add_option("--dense-substeps", opt.dense_substeps,
                  "RK4 steps per interval for the dense audit")
      ->check(CLI::PositiveNumber);
}

di::DemoSetup LoadSetup(const CommonOptions& opt) {
  di::DemoSetup setup = opt.config.empty()
                            ? di::BuildScenario(di::Json::object())
                            : di::BuildScenarioFromFile(opt.config);
  if (opt.dense_substeps) {
    setup.scp.integrator.dense_substeps = *opt.dense_substeps;
    setup.scp.Validate();
  }
  return setup;
}

int RunNmpcCommand(const CommonOptions& opt) {
  const di::DemoSetup setup = LoadSetup(opt);
  const di::RunMode mode = di::ParseRunMode(opt.mode);
  const di::DemoResult res = di::RunDemo(mode, setup);
  if (!opt.out.empty() && !res.outcome.records.empty()) {
    const di::RunArtifacts art = di::ExportArtifacts(res, opt.out);
    std::cerr << "wrote " << art.dense_csv.parent_path().string() << '\n';
  }
  std::cout << di::SummaryJson(res).dump(2) << '\n';
  if (!res.outcome.ok()) return kExitError;
  if (mode == di::RunMode::kCtcs &&
      res.summary.max_pointwise_violation > kAuditTolerance) {
    std::cerr << "constraint audit failed: max pointwise violation "
              << res.summary.max_pointwise_violation << '\n';
    return kExitAudit;
  }
  return kExitOk;
}

// One horizon from the configured start; the plant is propagated densely
// under the solved controls to audit the whole horizon.
int RunSolveCommand(const CommonOptions& opt) {
  using namespace ctcs_nmpc;
  const di::DemoSetup setup = LoadSetup(opt);
  const di::RunMode mode = di::ParseRunMode(opt.mode);
  const ScpResult scp = di::SolveSingleHorizon(mode, setup);
  const GridConfig grid = setup.nmpc.Grid(0.0);
  const AugmentedDynamics plant = di::PlantDynamics(setup.scenario);
  const auto dense = PropagateDense(
      plant, grid, scp.z.controls, grid.t_c, grid.t_end(),
      InitialAugmentedState(setup.scenario.initial_state),
      setup.scp.integrator.dense_substeps);
  double max_violation = 0.0;
  double max_u = 0.0;
  for (const auto& s : dense) {
    max_violation = std::max(
        max_violation,
        PointwiseViolation(setup.scenario.obstacles, s.x.head<2>()));
    max_u = std::max(max_u, s.u.norm());
  }

  di::Json doc;
  doc["schema_version"] = di::kSchemaVersion;
  doc["mode"] = di::ToString(mode);
  doc["max_pointwise_violation"] = max_violation;
  doc["max_control_norm"] = max_u;
  doc["max_defect"] =
      scp.defects.size() ? scp.defects.cwiseAbs().maxCoeff() : 0.0;
  doc["final_w_ep"] = scp.w_ep;
  di::Json iters = di::Json::array();
  for (const ScpMetrics& m : scp.metrics) {
    iters.push_back({{"J_l", m.j_l},
                     {"J_y", m.j_y},
                     {"J_prox", m.j_prox},
                     {"conic_iters", m.conic_iterations},
                     {"wall_ms", m.wall_ms}});
  }
  doc["iterations"] = iters;

  if (!opt.out.empty()) {
    fs::create_directories(opt.out);
    std::ofstream nodes(fs::path(opt.out) / "nodes.csv");
    if (!nodes) throw std::runtime_error("cannot write " + opt.out);
    nodes.precision(17);
    const auto& cols = di::NodeColumns();
    for (size_t i = 0; i < cols.size(); ++i) nodes << (i ? "," : "") << cols[i];
    nodes << '\n';
    for (int k = 0; k < grid.n_nodes; ++k) {
      const auto x = scp.z.states.col(k);
      const auto u = scp.z.controls.col(k);
      nodes << 0 << ',' << k << ',' << grid.Node(k) << ',' << x(0) << ','
            << x(1) << ',' << x(2) << ',' << x(3) << ',' << x(4) << ','
            << x(5) << ',' << u(0) << ',' << u(1) << '\n';
    }
    std::ofstream(fs::path(opt.out) / "solve.json") << doc.dump(2) << '\n';
  }
  std::cout << doc.dump(2) << '\n';
  if (mode == di::RunMode::kCtcs && max_violation > kAuditTolerance) {
    std::cerr << "constraint audit failed: max pointwise violation "
              << max_violation << '\n';
    return kExitAudit;
  }
  return kExitOk;
}

int RunCheckCommand(const std::string& config, std::vector<int> only) {
  namespace acc = ctcs_nmpc::acceptance;
  if (only.empty()) only = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  acc::Context ctx(config.empty() ? di::BuildScenario(di::Json::object())
                                  : di::BuildScenarioFromFile(config));
  int failures = 0;
  for (int id : only) {
    const acc::CriterionResult r = acc::RunCriterion(id, ctx);
    std::cout << acc::Line(r) << std::endl;
    if (!r.pass) ++failures;
  }
  return failures == 0 ? kExitOk : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CTCS nonlinear MPC on the double-integrator benchmark"};
  app.require_subcommand(1);

  CommonOptions nmpc_opt;
  CLI::App* nmpc = app.add_subcommand("nmpc", "run the full closed loop");
  AddCommon(nmpc, nmpc_opt);

  CommonOptions solve_opt;
  CLI::App* solve =
      app.add_subcommand("solve", "solve one horizon from the initial state");
  AddCommon(solve, solve_opt);

  std::string check_config;
  std::vector<int> check_only;
  CLI::App* check =
      app.add_subcommand("check", "run the acceptance checks");
  check->add_option("--config", check_config, "JSON configuration file")
      ->check(CLI::ExistingFile);
  check->add_option("--criterion", check_only, "criterion number(s)")
      ->check(CLI::Range(1, 10));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*nmpc) return RunNmpcCommand(nmpc_opt);
    if (*solve) return RunSolveCommand(solve_opt);
    if (*check) return RunCheckCommand(check_config, check_only);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
