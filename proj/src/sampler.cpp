#include "diffadjoint/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "diffadjoint/rng.hpp"

namespace diffadjoint {

namespace {

constexpr double kNodeTol = 1e-12;

void check_step_times(double s, double t, const VpSchedule& sched) {
  if (t > s) {
    throw std::invalid_argument("step: target time t = " + std::to_string(t) +
                                " exceeds source time s = " + std::to_string(s));
  }
  if (!(t >= sched.t_eps - 1e-15 && s <= VpSchedule::t_end + 1e-15)) {
    throw std::domain_error("step: times outside [t_eps, 1]");
  }
}

int step_index_at(const TimeGrid& grid, double t) {
  // Index i of the forward-time interval [t_i, t_{i+1}) containing t, with
  // the final node attributed to the last interval.
  const auto& ts = grid.times;
  if (t <= ts.front()) return 0;
  if (t >= ts.back()) return grid.n_steps() - 1;
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  return static_cast<int>(it - ts.begin()) - 1;
}

}  // namespace

Conditioning Conditioning::constant(Vec z) {
  Conditioning c;
  c.scheduled = false;
  c.knots.push_back(std::move(z));
  return c;
}

Conditioning Conditioning::piecewise(std::vector<Vec> knots) {
  if (knots.empty()) {
    throw std::invalid_argument("Conditioning: no knots");
  }
  Conditioning c;
  c.scheduled = true;
  c.knots = std::move(knots);
  return c;
}

Vec Trajectory::state_at(double t) const {
  const auto& ts = grid.times;
  if (t < ts.front() - kNodeTol || t > ts.back() + kNodeTol) {
    throw std::invalid_argument("state_at: t = " + std::to_string(t) +
                                " outside recorded span");
  }
  const int i = step_index_at(grid, t);
  if (std::abs(t - ts[i]) <= kNodeTol) return states[i];
  if (std::abs(t - ts[i + 1]) <= kNodeTol) return states[i + 1];
  const double w = (t - ts[i]) / (ts[i + 1] - ts[i]);
  return (1.0 - w) * states[i] + w * states[i + 1];
}

const Vec& Trajectory::z_at(double t) const {
  if (!z_record.scheduled) return z_record.knots.at(0);
  return z_record.knots.at(step_index_at(grid, t));
}

Vec ode_step(const Vec& x_s, double s, double t, const Vec& z,
             const NoisePredictionModel& model, const VpSchedule& sched) {
  check_step_times(s, t, sched);
  if (t == s) return x_s;
  const double h = sched.lambda(t) - sched.lambda(s);
  const double ratio = sched.alpha(t) / sched.alpha(s);
  return ratio * x_s - sched.sigma(t) * std::expm1(h) * model.eps(x_s, z, s);
}

Vec sde_step(const Vec& x_s, double s, double t, const Vec& z,
             const Vec& noise_draw, const NoisePredictionModel& model,
             const VpSchedule& sched) {
  check_step_times(s, t, sched);
  if (noise_draw.size() != x_s.size()) {
    throw std::invalid_argument("sde_step: noise draw length mismatch");
  }
  if (t == s) return x_s;
  const double h = sched.lambda(t) - sched.lambda(s);
  const double ratio = sched.alpha(t) / sched.alpha(s);
  const double sig_t = sched.sigma(t);
  return ratio * x_s - 2.0 * sig_t * std::expm1(h) * model.eps(x_s, z, s) +
         sig_t * std::sqrt(std::expm1(2.0 * h)) * noise_draw;
}

namespace {

Trajectory run_sampling(const NoisePredictionModel& model,
                        const VpSchedule& sched, const TimeGrid& grid,
                        const Vec& x_init, const Conditioning& z,
                        ProcessKind kind, std::uint64_t seed,
                        const std::vector<Vec>* injected_noise,
                        bool record_eps) {
  validate_grid(grid, sched.t_eps);
  if (x_init.size() != model.dim_x()) {
    throw std::invalid_argument("sample: x_init length mismatch");
  }
  const int n = grid.n_steps();
  if (z.scheduled && z.n_knots() != n) {
    throw std::invalid_argument("sample: scheduled z needs one knot per step (" +
                                std::to_string(n) + "), got " +
                                std::to_string(z.n_knots()));
  }
  if (injected_noise && static_cast<int>(injected_noise->size()) != n) {
    throw std::invalid_argument("replay: noise sequence length mismatch");
  }

  Trajectory traj;
  traj.grid = grid;
  traj.kind = kind;
  traj.z_record = z;
  traj.seed = seed;
  traj.states.assign(n + 1, Vec());
  traj.states[n] = x_init;
  if (kind == ProcessKind::Sde) traj.noise_seq.emplace(n, Vec());

  CounterRng rng(seed, /*stream=*/0x5de);
  for (int i = n - 1; i >= 0; --i) {
    const double s = grid.times[i + 1];
    const double t = grid.times[i];
    const Vec& z_step = z.at_step(i);
    if (kind == ProcessKind::Ode) {
      traj.states[i] = ode_step(traj.states[i + 1], s, t, z_step, model, sched);
    } else {
      Vec draw = injected_noise ? (*injected_noise)[i]
                                : rng.normal_vec(model.dim_x());
      traj.states[i] =
          sde_step(traj.states[i + 1], s, t, z_step, draw, model, sched);
      (*traj.noise_seq)[i] = std::move(draw);
    }
  }
  if (record_eps) {
    traj.eps_outputs.emplace(n + 1, Vec());
    for (int i = 0; i <= n; ++i) {
      (*traj.eps_outputs)[i] =
          model.eps(traj.states[i], traj.z_at(grid.times[i]), grid.times[i]);
    }
  }
  return traj;
}

}  // namespace

Trajectory sample(const NoisePredictionModel& model, const VpSchedule& sched,
                  const TimeGrid& grid, const Vec& x_init,
                  const Conditioning& z, ProcessKind kind, std::uint64_t seed,
                  bool record_eps) {
  return run_sampling(model, sched, grid, x_init, z, kind, seed, nullptr,
                      record_eps);
}

Trajectory replay_sde(const NoisePredictionModel& model,
                      const VpSchedule& sched, const TimeGrid& grid,
                      const Vec& x_init, const Conditioning& z,
                      const std::vector<Vec>& noise_seq, bool record_eps) {
  return run_sampling(model, sched, grid, x_init, z, ProcessKind::Sde, 0,
                      &noise_seq, record_eps);
}

std::vector<Vec> recover_noise(const std::vector<Vec>& states,
                               const TimeGrid& grid, const Conditioning& z,
                               const NoisePredictionModel& model,
                               const VpSchedule& sched) {
  validate_grid(grid, sched.t_eps);
  const int n = grid.n_steps();
  if (static_cast<int>(states.size()) != n + 1) {
    throw std::invalid_argument("recover_noise: state count mismatch");
  }
  std::vector<Vec> noise(n);
  for (int i = 0; i < n; ++i) {
    const double s = grid.times[i + 1];
    const double t = grid.times[i];
    const double h = sched.lambda(t) - sched.lambda(s);
    const double denom = sched.sigma(t) * std::sqrt(std::expm1(2.0 * h));
    if (!(denom > 0.0)) {
      throw std::invalid_argument(
          "recover_noise: degenerate step (h = 0) at index " +
          std::to_string(i));
    }
    const Vec& z_step = z.scheduled ? z.knots.at(i) : z.knots.at(0);
    noise[i] = (states[i] - sched.alpha(t) / sched.alpha(s) * states[i + 1] +
                2.0 * sched.sigma(t) * std::expm1(h) *
                    model.eps(states[i + 1], z_step, s)) /
               denom;
  }
  return noise;
}

Trajectory cycle_sde_invert(const Vec& x0_target, const TimeGrid& grid,
                            const Conditioning& z,
                            const NoisePredictionModel& model,
                            const VpSchedule& sched, const Vec& x_init) {
  validate_grid(grid, sched.t_eps);
  if (x0_target.size() != model.dim_x() || x_init.size() != model.dim_x()) {
    throw std::invalid_argument("cycle_sde_invert: state length mismatch");
  }
  const int n = grid.n_steps();
  // Single Wiener realization consistent with x_t ~ N(alpha_t x_0, sigma_t^2 I),
  // pinned so the sequence passes through x_init at t = 1.
  const double t_top = grid.times[n];
  const Vec xi =
      (x_init - sched.alpha(t_top) * x0_target) / sched.sigma(t_top);
  Trajectory traj;
  traj.grid = grid;
  traj.kind = ProcessKind::Sde;
  traj.z_record = z;
  traj.states.resize(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double t = grid.times[i];
    traj.states[i] = sched.alpha(t) * x0_target + sched.sigma(t) * xi;
  }
  traj.noise_seq = recover_noise(traj.states, grid, z, model, sched);
  return traj;
}

}  // namespace diffadjoint
