#include "diffadjoint/adjoint.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace diffadjoint {

namespace {

constexpr double kMinRho = 1e-3;
constexpr double kSpanTol = 1e-12;

void check_finite(const AdjointState& st, double t) {
  if (!st.a_x.allFinite() || !st.a_z.allFinite() || !st.a_theta.allFinite()) {
    throw std::runtime_error("adjoint step produced non-finite values at t = " +
                             std::to_string(t));
  }
}

struct StepCoeffs {
  double alpha_ratio;  // alpha_t / alpha_s
  double ex;           // sigma_s (e^h - 1), h = lambda_s - lambda_t
  double inv_alpha_s;
  double lam_t;
  double lam_s;
};

StepCoeffs step_coeffs(const VpSchedule& sched, double t, double s) {
  if (!(s > t)) {
    throw std::invalid_argument("adjoint step: requires s > t, got t = " +
                                std::to_string(t) + ", s = " +
                                std::to_string(s));
  }
  StepCoeffs c;
  c.lam_t = sched.lambda(t);
  c.lam_s = sched.lambda(s);
  const double h = c.lam_s - c.lam_t;
  c.alpha_ratio = sched.alpha(t) / sched.alpha(s);
  c.ex = sched.sigma(s) * h * phi1(h);
  c.inv_alpha_s = 1.0 / sched.alpha(s);
  return c;
}

}  // namespace

double phi1(double h) {
  if (std::abs(h) < 1e-6) return 1.0 + h / 2.0 + h * h / 6.0;
  const long double hl = h;
  return static_cast<double>(std::expm1(hl) / hl);
}

double phi2(double h) {
  if (std::abs(h) < 1e-6) return 0.5 + h / 6.0 + h * h / 24.0;
  const long double hl = h;
  return static_cast<double>((std::expm1(hl) - hl) / (hl * hl));
}

ScaledVjp scaled_vjp(const AdjointState& state, const Vec& x_t, const Vec& z_t,
                     const NoisePredictionModel& model,
                     const VpSchedule& sched) {
  const double a = sched.alpha(state.t);
  const VjpBundle b = model.vjp(state.a_x, x_t, z_t, state.t);
  ScaledVjp v;
  v.v_x = a * a * b.vjp_x;
  v.v_z = a * b.vjp_z;
  v.v_theta = a * b.vjp_theta;
  v.t = state.t;
  return v;
}

AdjointState adjoint_step_1(const AdjointState& state, double s, const Vec& x_t,
                            const Vec& z_t, const NoisePredictionModel& model,
                            const VpSchedule& sched, double sde_factor) {
  const StepCoeffs c = step_coeffs(sched, state.t, s);
  const VjpBundle b = model.vjp(state.a_x, x_t, z_t, state.t);

  AdjointState out;
  out.t = s;
  out.a_x = c.alpha_ratio * state.a_x +
            sde_factor *
                (c.ex * c.alpha_ratio * c.alpha_ratio * b.vjp_x);
  out.a_z = state.a_z + sde_factor * (c.ex * c.alpha_ratio * b.vjp_z);
  out.a_theta =
      state.a_theta + sde_factor * (c.ex * c.alpha_ratio * b.vjp_theta);
  check_finite(out, s);
  return out;
}

Adjoint2mResult adjoint_step_2m(const AdjointState& state, double s,
                                const ScaledVjp& prev, const Vec& x_t,
                                const Vec& z_t,
                                const NoisePredictionModel& model,
                                const VpSchedule& sched, double sde_factor) {
  if (!(prev.t < state.t)) {
    throw std::invalid_argument(
        "adjoint_step_2m: buffered step must precede current time");
  }
  const StepCoeffs c = step_coeffs(sched, state.t, s);
  const double h = c.lam_s - c.lam_t;
  const double rho = (c.lam_t - sched.lambda(prev.t)) / h;
  if (!(rho > kMinRho)) {
    throw std::invalid_argument("adjoint_step_2m: step ratio rho = " +
                                std::to_string(rho) + " below " +
                                std::to_string(kMinRho));
  }
  const ScaledVjp cur = scaled_vjp(state, x_t, z_t, model, sched);
  const double w_hi = 1.0 + 1.0 / (2.0 * rho);
  const double w_lo = 1.0 / (2.0 * rho);

  Adjoint2mResult res;
  res.next.t = s;
  res.next.a_x =
      c.alpha_ratio * state.a_x +
      sde_factor * (c.ex * c.inv_alpha_s * c.inv_alpha_s *
                    (w_hi * cur.v_x - w_lo * prev.v_x));
  res.next.a_z = state.a_z + sde_factor * (c.ex * c.inv_alpha_s *
                                           (w_hi * cur.v_z - w_lo * prev.v_z));
  res.next.a_theta =
      state.a_theta + sde_factor * (c.ex * c.inv_alpha_s *
                                    (w_hi * cur.v_theta - w_lo * prev.v_theta));
  check_finite(res.next, s);
  res.vjp_t = cur;
  return res;
}

namespace {

void check_solve_inputs(const Trajectory& traj, const NoisePredictionModel& model,
                        const Vec& loss_grad, const TimeGrid& adjoint_grid,
                        int order, ProcessKind kind) {
  if (order != 1 && order != 2) {
    throw std::invalid_argument("solve_adjoint: order must be 1 or 2");
  }
  if (loss_grad.size() != model.dim_x()) {
    throw std::invalid_argument("solve_adjoint: loss gradient length mismatch");
  }
  if (traj.states.size() != traj.grid.times.size()) {
    throw std::invalid_argument("solve_adjoint: trajectory missing states");
  }
  if (kind == ProcessKind::Sde) {
    if (traj.kind != ProcessKind::Sde) {
      throw std::invalid_argument(
          "solve_adjoint: SDE solve requires an SDE trajectory");
    }
    if (!traj.noise_seq.has_value()) {
      throw std::invalid_argument(
          "solve_adjoint: SDE trajectory must carry its noise realization");
    }
  }
  if (adjoint_grid.times.size() < 2) {
    throw std::invalid_argument("solve_adjoint: adjoint grid too small");
  }
  if (std::abs(adjoint_grid.front() - traj.grid.front()) > kSpanTol ||
      std::abs(adjoint_grid.back() - traj.grid.back()) > kSpanTol) {
    throw std::invalid_argument(
        "solve_adjoint: adjoint grid must span the trajectory's time range");
  }
}

}  // namespace

AdjointState solve_adjoint(const Trajectory& traj,
                           const NoisePredictionModel& model,
                           const VpSchedule& sched, const Vec& loss_grad,
                           const TimeGrid& adjoint_grid, int order,
                           ProcessKind kind) {
  check_solve_inputs(traj, model, loss_grad, adjoint_grid, order, kind);
  const double sde_factor = kind == ProcessKind::Sde ? 2.0 : 1.0;
  const auto& ts = adjoint_grid.times;
  const int m = adjoint_grid.n_steps();

  AdjointState st;
  st.t = ts[0];
  st.a_x = loss_grad;
  st.a_z = Vec::Zero(model.dim_z());
  st.a_theta = Vec::Zero(model.dim_theta());

  ScaledVjp buffer;
  bool have_buffer = false;
  for (int j = 0; j < m; ++j) {
    const double t = ts[j];
    const double s = ts[j + 1];
    const Vec x_t = traj.state_at(t);
    const Vec& z_t = traj.z_at(t);
    if (order == 2 && have_buffer) {
      Adjoint2mResult res =
          adjoint_step_2m(st, s, buffer, x_t, z_t, model, sched, sde_factor);
      st = std::move(res.next);
      buffer = std::move(res.vjp_t);
    } else {
      if (order == 2) {
        buffer = scaled_vjp(st, x_t, z_t, model, sched);
        have_buffer = true;
      }
      st = adjoint_step_1(st, s, x_t, z_t, model, sched, sde_factor);
    }
  }
  return st;
}

ScheduledAdjointResult solve_adjoint_scheduled_z(
    const Trajectory& traj, const NoisePredictionModel& model,
    const VpSchedule& sched, const Vec& loss_grad, const TimeGrid& adjoint_grid,
    ProcessKind kind) {
  check_solve_inputs(traj, model, loss_grad, adjoint_grid, 1, kind);
  if (!traj.z_record.scheduled) {
    throw std::invalid_argument(
        "solve_adjoint_scheduled_z: trajectory has constant conditioning");
  }
  if (traj.z_record.n_knots() != traj.n_steps()) {
    throw std::invalid_argument(
        "solve_adjoint_scheduled_z: knot count does not match sampling grid");
  }
  const double sde_factor = kind == ProcessKind::Sde ? 2.0 : 1.0;
  const auto& ts = adjoint_grid.times;

  ScheduledAdjointResult out;
  out.a_z_knots.assign(traj.z_record.n_knots(), Vec::Zero(model.dim_z()));

  AdjointState st;
  st.t = ts[0];
  st.a_x = loss_grad;
  st.a_z = Vec::Zero(model.dim_z());
  st.a_theta = Vec::Zero(model.dim_theta());

  for (int j = 0; j < adjoint_grid.n_steps(); ++j) {
    const double t = ts[j];
    const Vec x_t = traj.state_at(t);
    const Vec& z_t = traj.z_at(t);
    AdjointState next =
        adjoint_step_1(st, ts[j + 1], x_t, z_t, model, sched, sde_factor);
    // Bucket of the knot active at the evaluation time.
    const auto& gt = traj.grid.times;
    int knot = static_cast<int>(
        std::upper_bound(gt.begin(), gt.end(), t) - gt.begin() - 1);
    knot = std::max(0, std::min(knot, traj.n_steps() - 1));
    out.a_z_knots[knot] += next.a_z - st.a_z;
    st = std::move(next);
  }
  out.a_x = std::move(st.a_x);
  out.a_theta = std::move(st.a_theta);
  return out;
}

}  // namespace diffadjoint
