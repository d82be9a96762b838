#include "diffadjoint/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace diffadjoint {

Vec finite_diff_grad(const std::function<double(const Vec&)>& loss_of_inputs,
                     const Vec& input, double step) {
  if (!(step > 0.0)) {
    throw std::invalid_argument("finite_diff_grad: step must be positive");
  }
  Vec grad(input.size());
  Vec probe = input;
  for (Eigen::Index i = 0; i < input.size(); ++i) {
    probe[i] = input[i] + step;
    const double hi = loss_of_inputs(probe);
    probe[i] = input[i] - step;
    const double lo = loss_of_inputs(probe);
    probe[i] = input[i];
    if (!std::isfinite(hi) || !std::isfinite(lo)) {
      throw std::runtime_error("finite_diff_grad: non-finite loss at coord " +
                               std::to_string(i));
    }
    grad[i] = (hi - lo) / (2.0 * step);
  }
  return grad;
}

SamplerGrads backprop_through_sampler(const Trajectory& traj,
                                      const Vec& loss_grad,
                                      const NoisePredictionModel& model,
                                      const VpSchedule& sched) {
  if (!traj.eps_outputs.has_value()) {
    throw std::invalid_argument(
        "backprop_through_sampler: trajectory recorded without eps outputs");
  }
  if (loss_grad.size() != model.dim_x()) {
    throw std::invalid_argument("backprop_through_sampler: loss grad length");
  }
  const int n = traj.n_steps();
  const bool sde = traj.kind == ProcessKind::Sde;
  const bool scheduled = traj.z_record.scheduled;

  SamplerGrads out;
  out.grad_theta = Vec::Zero(model.dim_theta());
  if (scheduled) {
    out.grad_z_knots.assign(traj.z_record.n_knots(),
                            Vec::Zero(model.dim_z()));
  } else {
    out.grad_z = Vec::Zero(model.dim_z());
  }

  // Cotangent of x at grid node i, starting from the generated sample.
  Vec v = loss_grad;
  for (int i = 0; i < n; ++i) {
    const double t = traj.grid.times[i];
    const double s = traj.grid.times[i + 1];
    const double h = sched.lambda(t) - sched.lambda(s);
    const double k = (sde ? 2.0 : 1.0) * sched.sigma(t) * std::expm1(h);
    const Vec& z_step = traj.z_record.at_step(i);
    const VjpBundle b = model.vjp(v, traj.states[i + 1], z_step, s);
    if (scheduled) {
      out.grad_z_knots[i] -= k * b.vjp_z;
    } else {
      out.grad_z -= k * b.vjp_z;
    }
    out.grad_theta -= k * b.vjp_theta;
    v = sched.alpha(t) / sched.alpha(s) * v - k * b.vjp_x;
  }
  out.grad_x_init = v;
  return out;
}

namespace {

// Scalar coefficients of the analytic model's affine flow
// dx/dt = p(t) x + q(t) mu, with derivatives in the data scale c.
struct AffineCoeffs {
  double p, q, p_c, q_c;
};

AffineCoeffs affine_coeffs(const VpSchedule& sched, double c, double t) {
  const double f = sched.drift_coeff(t);
  const double g2 = sched.diffusion_coeff_sq(t);
  const double a = sched.alpha(t);
  const double d = a * a * c * c + sched.sigma_sq(t);
  AffineCoeffs out;
  out.p = f + g2 / (2.0 * d);
  out.q = -g2 * a / (2.0 * d);
  out.p_c = -g2 * a * a * c / (d * d);
  out.q_c = g2 * a * a * a * c / (d * d);
  return out;
}

}  // namespace

LinearAdjointRef exact_linear_adjoint(const AnalyticGaussianModel& model,
                                      const VpSchedule& sched,
                                      const Vec& x_init, const Vec& loss_grad,
                                      int n_quad) {
  if (x_init.size() != model.dim_x() || loss_grad.size() != model.dim_x()) {
    throw std::invalid_argument("exact_linear_adjoint: length mismatch");
  }
  if (n_quad < 2) {
    throw std::invalid_argument("exact_linear_adjoint: n_quad too small");
  }
  const double c = model.c();

  // Sensitivity system integrated from t = 1 down to t_eps:
  //   phi' = p phi                      phi(1) = 1   (flow multiplier)
  //   psi' = p psi + q                  psi(1) = 0   (mu multiplier)
  //   phc' = p phc + p_c phi            phc(1) = 0   (d phi / dc)
  //   psc' = p psc + p_c psi + q_c      psc(1) = 0   (d psi / dc)
  Eigen::Vector4d y(1.0, 0.0, 0.0, 0.0);
  auto rhs = [&](double t, const Eigen::Vector4d& v) {
    const AffineCoeffs k = affine_coeffs(sched, c, t);
    return Eigen::Vector4d(k.p * v[0], k.p * v[1] + k.q,
                           k.p * v[2] + k.p_c * v[0],
                           k.p * v[3] + k.p_c * v[1] + k.q_c);
  };
  const double dt = (sched.t_eps - VpSchedule::t_end) / n_quad;
  double t = VpSchedule::t_end;
  for (int i = 0; i < n_quad; ++i) {
    const Eigen::Vector4d k1 = rhs(t, y);
    const Eigen::Vector4d k2 = rhs(t + dt / 2, y + dt / 2 * k1);
    const Eigen::Vector4d k3 = rhs(t + dt / 2, y + dt / 2 * k2);
    const Eigen::Vector4d k4 = rhs(t + dt, y + dt * k3);
    y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = VpSchedule::t_end + (i + 1) * dt;
  }

  LinearAdjointRef ref;
  ref.flow_mult = y[0];
  ref.input_mult = y[1];
  ref.grad_x_init = y[0] * loss_grad;
  ref.grad_z = y[1] * loss_grad;
  ref.grad_theta =
      Vec::Constant(1, loss_grad.dot(y[2] * x_init + y[3] * model.mu()));
  return ref;
}

OrderFit estimate_order(const std::vector<std::pair<double, double>>& points) {
  OrderFit fit;
  for (const auto& [h, err] : points) {
    if (!(err > 0.0)) {
      throw std::invalid_argument("estimate_order: errors must be positive");
    }
    if (err < 1e-13) continue;  // roundoff floor
    fit.points.emplace_back(h, err);
  }
  if (fit.points.size() < 3) {
    throw std::runtime_error(
        "estimate_order: fewer than 3 points above the roundoff floor");
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [h, err] : fit.points) {
    const double x = std::log(h);
    const double y = std::log(err);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(fit.points.size());
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / n;
  return fit;
}

double max_lambda_step(const VpSchedule& sched, const TimeGrid& grid) {
  double h_max = 0.0;
  for (int i = 0; i < grid.n_steps(); ++i) {
    h_max = std::max(h_max, std::abs(sched.lambda(grid.times[i + 1]) -
                                     sched.lambda(grid.times[i])));
  }
  return h_max;
}

std::vector<ConvergenceRow> convergence_sweep(
    const Trajectory& traj, const NoisePredictionModel& model,
    const VpSchedule& sched, const Vec& loss_grad,
    const std::vector<int>& m_values, int order, ProcessKind kind,
    GridSpacing spacing, int reference_m) {
  const double t_eps = traj.grid.front();
  const TimeGrid ref_grid = make_grid(sched, reference_m, spacing, t_eps);
  const AdjointState ref =
      solve_adjoint(traj, model, sched, loss_grad, ref_grid, 2, kind);

  std::vector<ConvergenceRow> rows;
  rows.reserve(m_values.size());
  for (int m : m_values) {
    const TimeGrid grid = make_grid(sched, m, spacing, t_eps);
    const AdjointState got =
        solve_adjoint(traj, model, sched, loss_grad, grid, order, kind);
    ConvergenceRow row;
    row.m = m;
    row.h_max = max_lambda_step(sched, grid);
    row.err_ax = (got.a_x - ref.a_x).cwiseAbs().maxCoeff();
    row.err_az = (got.a_z - ref.a_z).cwiseAbs().maxCoeff();
    row.err_atheta = (got.a_theta - ref.a_theta).cwiseAbs().maxCoeff();
    rows.push_back(row);
  }
  return rows;
}

}  // namespace diffadjoint
