#pragma once

#include <vector>

namespace diffadjoint {

/// Variance-preserving noise schedule with a linear beta ramp. All closed
/// forms follow from log alpha_t = -(beta1-beta0)/4 t^2 - beta0/2 t on
/// t in [0, 1], so alpha_t^2 + sigma_t^2 = 1 and the half log-SNR
/// lambda_t = log(alpha_t / sigma_t) is strictly decreasing.
///
/// d(sigma_t)/dt does not exist at t = 0, so lambda and the drift/diffusion
/// coefficients are only defined away from 0; grids start at t_eps.
struct VpSchedule {
  double beta0 = 0.1;
  double beta1 = 20.0;
  double t_eps = 1e-3;
  static constexpr double t_end = 1.0;

  double log_alpha(double t) const;  // t in [0, 1]
  double alpha(double t) const;      // t in [0, 1]
  double sigma(double t) const;      // t in [0, 1]
  double sigma_sq(double t) const;
  double lambda(double t) const;  // t in [t_eps, 1]

  /// Inverse of lambda. Solves the quadratic in t implied by log alpha_t;
  /// falls back to bisection (tolerance 1e-12 in lambda) if the analytic
  /// root drifts. `lam` must lie in [lambda(1), lambda(t_eps)].
  double t_of_lambda(double lam) const;

  double drift_coeff(double t) const;        // f(t), t in (0, 1]
  double diffusion_coeff_sq(double t) const; // g^2(t), t in (0, 1]

  double lambda_min() const { return lambda(t_end); }
  double lambda_max() const { return lambda(t_eps); }
};

enum class GridSpacing { UniformTime, UniformLogSnr };

/// Ordered timesteps t_0 < t_1 < ... < t_N within [t_eps, 1].
struct TimeGrid {
  std::vector<double> times;
  GridSpacing spacing = GridSpacing::UniformTime;

  int n_steps() const { return static_cast<int>(times.size()) - 1; }
  double front() const { return times.front(); }
  double back() const { return times.back(); }
};

/// Throws std::invalid_argument unless the grid has >= 2 strictly
/// increasing points inside [t_eps, 1].
void validate_grid(const TimeGrid& grid, double t_eps);

/// n_steps + 1 points from t_eps to 1. UniformTime spaces t linearly;
/// UniformLogSnr spaces lambda linearly and maps back through t_of_lambda.
TimeGrid make_grid(const VpSchedule& sched, int n_steps, GridSpacing spacing);
TimeGrid make_grid(const VpSchedule& sched, int n_steps, GridSpacing spacing,
                   double t_eps);

}  // namespace diffadjoint
