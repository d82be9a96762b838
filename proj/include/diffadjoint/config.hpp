#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffadjoint/model.hpp"
#include "diffadjoint/optimize.hpp"
#include "diffadjoint/sampler.hpp"
#include "diffadjoint/schedule.hpp"
#include "diffadjoint/types.hpp"

namespace diffadjoint {

/// Raised for malformed configs; the CLI maps it to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelSpec {
  enum class Type { Gaussian, Mlp };
  Type type = Type::Gaussian;
  int d = 2;
  int dim_z = 2;
  int hidden = 8;
  std::uint64_t seed = 0;
  double weight_scale = 1.0;
  Vec mu;             // gaussian
  double c = 1.0;     // gaussian
  std::optional<Vec> weights;  // mlp, overrides seeded init
};

struct GridSpec {
  int n = 20;
  GridSpacing spacing = GridSpacing::UniformTime;
  std::optional<double> t_eps;              // defaults to schedule.t_eps
  std::optional<std::vector<double>> times; // explicit grid, overrides n/spacing
};

struct AdjointSpec {
  int order = 1;
  int m = 20;
  ProcessKind kind = ProcessKind::Ode;
  GridSpacing grid_spacing = GridSpacing::UniformTime;
};

struct LossSpec {
  enum class Type { Zero, Target, TwoTarget };
  Type type = Type::Zero;
  Vec target;
  Vec target_a;
  Vec target_b;
};

struct OptimizeSpec {
  double learning_rate = 0.01;
  int n_opt_steps = 50;
  bool update_x = true;
  bool update_z = false;
  bool update_theta = false;
};

struct ConvergenceSpec {
  std::vector<int> m_values = {8, 16, 32, 64, 128};
  int reference_m = 4096;
};

/// Schema-validated run configuration; unknown keys anywhere are rejected.
struct RunConfig {
  VpSchedule schedule;
  ModelSpec model;
  GridSpec grid;
  AdjointSpec adjoint;
  LossSpec loss;
  OptimizeSpec optimize;
  ConvergenceSpec convergence;
  std::uint64_t seed = 0;
  std::string out;
  std::optional<Vec> z;
  std::optional<Vec> x_init;
  std::optional<Vec> x0_target;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

std::unique_ptr<NoisePredictionModel> build_model(const RunConfig& cfg);
TimeGrid build_sample_grid(const RunConfig& cfg);
TimeGrid build_adjoint_grid(const RunConfig& cfg);
std::unique_ptr<GuidanceLoss> build_loss(const RunConfig& cfg, int dim_x);
OptimizeConfig build_optimize_config(const RunConfig& cfg);

/// Initial conditioning: explicit "z" if given, else the gaussian model's mu
/// or zeros for the MLP.
Vec initial_z(const RunConfig& cfg);

/// Initial latent: explicit "x_init" if given, else a standard normal draw
/// from the config seed.
Vec initial_x(const RunConfig& cfg);

/// Loss gradient at the generated sample (zero spec gives a zero vector).
Vec loss_gradient(const RunConfig& cfg, const Vec& x_out);

}  // namespace diffadjoint
