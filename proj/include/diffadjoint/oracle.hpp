#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "diffadjoint/adjoint.hpp"
#include "diffadjoint/model.hpp"
#include "diffadjoint/sampler.hpp"
#include "diffadjoint/types.hpp"

namespace diffadjoint {

/// Central-difference gradient of a deterministic scalar map. SDE maps must
/// freeze their noise sequence before calling.
Vec finite_diff_grad(const std::function<double(const Vec&)>& loss_of_inputs,
                     const Vec& input, double step = 1e-5);

struct SamplerGrads {
  Vec grad_x_init;                // dL/dx at t = 1
  Vec grad_z;                     // constant-z trajectories
  std::vector<Vec> grad_z_knots;  // scheduled-z trajectories
  Vec grad_theta;
};

/// Exact gradient of the discrete sampler composition, chained step-Jacobian
/// VJPs through all recorded steps (with the SDE noise term frozen). This is
/// the discretize-then-optimize reference the continuous adjoint solvers are
/// compared against. Requires a trajectory recorded with eps outputs.
SamplerGrads backprop_through_sampler(const Trajectory& traj,
                                      const Vec& loss_grad,
                                      const NoisePredictionModel& model,
                                      const VpSchedule& sched);

/// Reference gradients for the analytic Gaussian model. Its probability
/// flow ODE is affine in x, so the flow map x_1 -> x_{t_eps} and its
/// sensitivities reduce to scalar coefficient ODEs, integrated here with
/// RK4 at `n_quad` steps (converged below 1e-9 at the default 4096, checked
/// by grid halving).
struct LinearAdjointRef {
  Vec grad_x_init;
  Vec grad_z;
  Vec grad_theta;     // w.r.t. the data scale c
  double flow_mult;   // d x_{t_eps,i} / d x_{1,i}
  double input_mult;  // d x_{t_eps,i} / d mu_i
};

LinearAdjointRef exact_linear_adjoint(const AnalyticGaussianModel& model,
                                      const VpSchedule& sched,
                                      const Vec& x_init, const Vec& loss_grad,
                                      int n_quad = 4096);

/// Log-log least-squares fit of gradient error against the largest log-SNR
/// step. Errors at or below the 1e-13 roundoff floor are excluded; fewer
/// than 3 surviving points is an error.
struct OrderFit {
  std::vector<std::pair<double, double>> points;  // (h_max, error)
  double slope = 0.0;
  double intercept = 0.0;
};

OrderFit estimate_order(const std::vector<std::pair<double, double>>& points);

/// One adjoint-solver accuracy measurement against a dense reference.
struct ConvergenceRow {
  int m = 0;
  double h_max = 0.0;
  double err_ax = 0.0;
  double err_az = 0.0;
  double err_atheta = 0.0;
};

/// Solves the adjoint at each step count in `m_values` (grids spaced like
/// `spacing`) and measures max-abs errors against the order-2 solve at
/// `reference_m` on the same trajectory and loss gradient.
std::vector<ConvergenceRow> convergence_sweep(
    const Trajectory& traj, const NoisePredictionModel& model,
    const VpSchedule& sched, const Vec& loss_grad,
    const std::vector<int>& m_values, int order, ProcessKind kind,
    GridSpacing spacing, int reference_m = 4096);

double max_lambda_step(const VpSchedule& sched, const TimeGrid& grid);

}  // namespace diffadjoint
