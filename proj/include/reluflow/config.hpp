#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "reluflow/convergence.hpp"
#include "reluflow/gf_solver.hpp"
#include "reluflow/network.hpp"
#include "reluflow/piecewise.hpp"
#include "reluflow/problem.hpp"

namespace reluflow {

struct InitSpec {
  std::optional<std::vector<double>> theta;  // explicit theta_1..theta_D
  std::uint64_t seed = 0;                    // used when theta is absent
  double scale = 0.5;
};

struct DiagnosticsConfig {
  double probe_epsilon = 1e-2;
  std::size_t probe_n = 200;
  double fit_window_fraction = 0.1;
  std::size_t witness_n = 20;
  std::size_t instances = 100;  // gradcheck / crosscheck suite size
};

struct ExperimentConfig {
  NetworkShape shape;
  PiecewisePoly target;
  PiecewisePoly density;
  Evaluator evaluator = Evaluator::Exact1D;
  InitSpec init;
  SolverConfig solver;
  DiagnosticsConfig diagnostics;
  std::vector<std::string> warnings;

  [[nodiscard]] Problem problem() const;
  [[nodiscard]] ParamVector initial_theta() const;
};

/// Thrown for malformed or inconsistent configurations; `field` names the
/// offending entry ("problem.target.dim", "init.theta", ...).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message);
  std::string field;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every field with defaults filled in; parse_config(resolved_json(c))
/// reproduces c.
nlohmann::json resolved_json(const ExperimentConfig& config);

// ------------------------------------------------------------ artifacts

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
nlohmann::json events_json(const Trajectory& traj);
nlohmann::json certificate_json(const RateCertificate& rates, const LojaEstimate* loja);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace reluflow
