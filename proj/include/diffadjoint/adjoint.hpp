#pragma once

#include <vector>

#include "diffadjoint/model.hpp"
#include "diffadjoint/sampler.hpp"
#include "diffadjoint/schedule.hpp"
#include "diffadjoint/types.hpp"

namespace diffadjoint {

/// phi_1(h) = (e^h - 1)/h and phi_2(h) = (e^h - h - 1)/h^2, the exponential
/// integrator weights. For |h| < 1e-6 the truncated series 1 + h/2 + h^2/6
/// resp. 1/2 + h/6 + h^2/24 replace the closed forms to avoid cancellation;
/// the closed forms are evaluated in extended precision so the branch
/// crossover is continuous at f64.
double phi1(double h);
double phi2(double h);

/// Loss cotangents (a_x, a_z, a_theta) at time t. The solve starts at
/// t = t_eps with a_x = dL/dx_{t_eps}, a_z = 0, a_theta = 0 and runs
/// forward in t toward 1.
struct AdjointState {
  Vec a_x;
  Vec a_z;
  Vec a_theta;
  double t = 0.0;
};

/// Scaled vector-Jacobian products buffered by the multistep solver:
///   v_x = alpha_t^2 a^T d(eps)/dx,  v_z = alpha_t a^T d(eps)/dz,
///   v_theta = alpha_t a^T d(eps)/dtheta.
struct ScaledVjp {
  Vec v_x;
  Vec v_z;
  Vec v_theta;
  double t = 0.0;
};

ScaledVjp scaled_vjp(const AdjointState& state, const Vec& x_t, const Vec& z_t,
                     const NoisePredictionModel& model,
                     const VpSchedule& sched);

/// First-order step of the adjoint equations from time t to s > t, with
/// h = lambda_s - lambda_t (negative, since lambda decreases in t):
///   a_x(s)  = (alpha_t/alpha_s) a_x(t)
///             + k sigma_s (e^h - 1) (alpha_t^2/alpha_s^2) a^T d(eps)/dx,
///   a_z(s)  = a_z(t) + k sigma_s (e^h - 1) (alpha_t/alpha_s) a^T d(eps)/dz,
///   a_theta analogous to a_z,
/// where k = sde_factor is 1 for the probability flow ODE and 2 for the
/// diffusion SDE (whose adjoint is the same ODE with a doubled nonlinear
/// term).
AdjointState adjoint_step_1(const AdjointState& state, double s, const Vec& x_t,
                            const Vec& z_t, const NoisePredictionModel& model,
                            const VpSchedule& sched, double sde_factor);

struct Adjoint2mResult {
  AdjointState next;
  ScaledVjp vjp_t;  // fresh buffer entry evaluated at the step's start
};

/// Second-order multistep variant. Reuses the buffered scaled VJP from a
/// previous time r < t; with rho = (lambda_t - lambda_r) / h the update adds
/// the correction (e^h - 1)/(2 rho) (V(t) - V(r)) to each channel, weighted
/// by 1/alpha_s^2 for a_x and 1/alpha_s for a_z, a_theta.
Adjoint2mResult adjoint_step_2m(const AdjointState& state, double s,
                                const ScaledVjp& prev, const Vec& x_t,
                                const Vec& z_t,
                                const NoisePredictionModel& model,
                                const VpSchedule& sched, double sde_factor);

/// Solves the adjoint equations from t_eps to 1 along `adjoint_grid`,
/// fetching states from the recorded trajectory (exactly at coincident
/// nodes, piecewise-linear interpolation otherwise). The adjoint grid may
/// use a different step count than the trajectory but must share its span.
/// order 2 bootstraps the first step at order 1. kind Sde requires an SDE
/// trajectory carrying its noise realization and applies sde_factor = 2.
///
/// Returns (a_x(1), a_z, a_theta) = (dL/dx_T, dL/dz, dL/dtheta) up to
/// discretization error.
AdjointState solve_adjoint(const Trajectory& traj,
                           const NoisePredictionModel& model,
                           const VpSchedule& sched, const Vec& loss_grad,
                           const TimeGrid& adjoint_grid, int order,
                           ProcessKind kind);

/// Adjoint solve for piecewise-constant conditioning: each a_z increment is
/// accumulated into the bucket of the knot active at the step's evaluation
/// time. Concatenated over knots this is the full conditioning gradient;
/// when the schedule is constant the buckets sum to the constant-z a_z.
/// First-order stepping only (the multistep derivative estimate does not
/// extend across conditioning discontinuities).
struct ScheduledAdjointResult {
  Vec a_x;
  std::vector<Vec> a_z_knots;
  Vec a_theta;
};

ScheduledAdjointResult solve_adjoint_scheduled_z(
    const Trajectory& traj, const NoisePredictionModel& model,
    const VpSchedule& sched, const Vec& loss_grad, const TimeGrid& adjoint_grid,
    ProcessKind kind);

}  // namespace diffadjoint
