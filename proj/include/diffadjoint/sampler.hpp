#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "diffadjoint/model.hpp"
#include "diffadjoint/schedule.hpp"
#include "diffadjoint/types.hpp"

namespace diffadjoint {

enum class ProcessKind { Ode, Sde };

/// Conditioning record: a single constant vector, or one knot per grid step
/// for a piecewise-constant schedule. Knot i is the value of z over the
/// forward-time interval [t_i, t_{i+1}).
struct Conditioning {
  bool scheduled = false;
  std::vector<Vec> knots;  // size 1 when constant, n_steps when scheduled

  static Conditioning constant(Vec z);
  static Conditioning piecewise(std::vector<Vec> knots);

  const Vec& at_step(int step) const { return scheduled ? knots.at(step) : knots.at(0); }
  int n_knots() const { return static_cast<int>(knots.size()); }
};

/// Recorded solution of a sampling run. states[i] is x at grid.times[i]
/// (forward-time order, so states.front() is the generated sample at t_eps
/// and states.back() the initial latent at t = 1). noise_seq[i] is the
/// Gaussian draw injected by the SDE step ending at grid.times[i].
struct Trajectory {
  TimeGrid grid;
  ProcessKind kind = ProcessKind::Ode;
  std::vector<Vec> states;
  std::optional<std::vector<Vec>> eps_outputs;  // one per grid point
  std::optional<std::vector<Vec>> noise_seq;    // one per step, SDE only
  Conditioning z_record;
  std::uint64_t seed = 0;

  int n_steps() const { return grid.n_steps(); }
  const Vec& sample_out() const { return states.front(); }

  /// Recorded state at an arbitrary time inside the grid span: exact when
  /// `t` coincides with a grid node, piecewise-linear interpolation of the
  /// recorded states otherwise.
  Vec state_at(double t) const;

  /// Conditioning value active at time t.
  const Vec& z_at(double t) const;
};

/// One deterministic exponential-integrator (DDIM-form) step of the
/// probability flow ODE from time s down to t <= s, with h = lambda_t - lambda_s:
///   x_t = (alpha_t/alpha_s) x_s - sigma_t (e^h - 1) eps(x_s, z, s).
Vec ode_step(const Vec& x_s, double s, double t, const Vec& z,
             const NoisePredictionModel& model, const VpSchedule& sched);

/// First-order diffusion-SDE step from s down to t <= s:
///   x_t = (alpha_t/alpha_s) x_s - 2 sigma_t (e^h - 1) eps(x_s, z, s)
///         + sigma_t sqrt(e^{2h} - 1) noise_draw.
Vec sde_step(const Vec& x_s, double s, double t, const Vec& z,
             const Vec& noise_draw, const NoisePredictionModel& model,
             const VpSchedule& sched);

/// Runs steps from t = 1 down to t_eps along the grid, recording states,
/// eps outputs, and (SDE) the injected noise draws. ODE sampling ignores
/// the seed; SDE draws come from a counter-based generator so identical
/// seeds give bit-identical trajectories.
Trajectory sample(const NoisePredictionModel& model, const VpSchedule& sched,
                  const TimeGrid& grid, const Vec& x_init,
                  const Conditioning& z, ProcessKind kind, std::uint64_t seed,
                  bool record_eps = true);

/// Deterministic SDE re-run consuming a given noise sequence (one draw per
/// step, indexed like Trajectory::noise_seq).
Trajectory replay_sde(const NoisePredictionModel& model,
                      const VpSchedule& sched, const TimeGrid& grid,
                      const Vec& x_init, const Conditioning& z,
                      const std::vector<Vec>& noise_seq,
                      bool record_eps = true);

/// Recovers the per-step noise that makes the SDE step reproduce the given
/// forward-time state sequence exactly:
///   eps_s = (x_t - (alpha_t/alpha_s) x_s + 2 sigma_t (e^h - 1) eps(x_s,z,s))
///           / (sigma_t sqrt(e^{2h} - 1)).
std::vector<Vec> recover_noise(const std::vector<Vec>& states,
                               const TimeGrid& grid, const Conditioning& z,
                               const NoisePredictionModel& model,
                               const VpSchedule& sched);

/// Builds the forward-time state sequence consistent with the VP marginals
/// x_t = alpha_t x_0 + sigma_t xi, with xi pinned by the endpoint x_init at
/// t = 1, then recovers the noise sequence whose replay reconstructs it.
Trajectory cycle_sde_invert(const Vec& x0_target, const TimeGrid& grid,
                            const Conditioning& z,
                            const NoisePredictionModel& model,
                            const VpSchedule& sched, const Vec& x_init);

}  // namespace diffadjoint
