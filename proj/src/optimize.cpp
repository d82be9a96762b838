#include "diffadjoint/optimize.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "diffadjoint/rng.hpp"

namespace diffadjoint {

double TargetDistanceLoss::value(const Vec& x) const {
  return 0.5 * (x - target_).squaredNorm();
}

Vec TargetDistanceLoss::grad(const Vec& x) const { return x - target_; }

double TwoTargetLoss::value(const Vec& x) const {
  const double da = (x - a_).norm();
  const double db = (x - b_).norm();
  return da + db + std::abs(da - db);
}

Vec TwoTargetLoss::grad(const Vec& x) const {
  const Vec ra = x - a_;
  const Vec rb = x - b_;
  const double da = ra.norm();
  const double db = rb.norm();
  const Vec ga = da > 0.0 ? Vec(ra / da) : Vec(Vec::Zero(x.size()));
  const Vec gb = db > 0.0 ? Vec(rb / db) : Vec(Vec::Zero(x.size()));
  const double sgn = da > db ? 1.0 : (da < db ? -1.0 : 0.0);
  return ga + gb + sgn * (ga - gb);
}

OptimizeResult guided_generate(const NoisePredictionModel& model,
                               const VpSchedule& sched,
                               const TimeGrid& sample_grid, const Vec& x_init,
                               const Vec& z, const GuidanceLoss& loss,
                               const OptimizeConfig& config,
                               std::uint64_t seed) {
  if (!(config.learning_rate > 0.0) && config.learning_rate != 0.0) {
    throw std::invalid_argument("guided_generate: learning rate must be >= 0");
  }
  if (config.n_opt_steps < 1) {
    throw std::invalid_argument("guided_generate: n_opt_steps must be >= 1");
  }
  const TimeGrid adjoint_grid = make_grid(
      sched, config.adjoint_steps, config.adjoint_spacing, sample_grid.front());

  // One frozen noise realization for the whole loop (SDE only).
  std::vector<Vec> noise;
  if (config.kind == ProcessKind::Sde) {
    CounterRng rng(derive_seed(seed, /*tag=*/0x0a71), 0);
    noise.resize(sample_grid.n_steps());
    for (auto& draw : noise) draw = rng.normal_vec(model.dim_x());
  }

  OptimizeResult res;
  res.x_init = x_init;
  res.z = z;
  res.theta = model.theta();
  std::unique_ptr<NoisePredictionModel> owned;
  const NoisePredictionModel* cur = &model;

  auto run_forward = [&]() {
    const Conditioning cond = Conditioning::constant(res.z);
    return config.kind == ProcessKind::Sde
               ? replay_sde(*cur, sched, sample_grid, res.x_init, cond, noise)
               : sample(*cur, sched, sample_grid, res.x_init, cond,
                        ProcessKind::Ode, seed);
  };

  Trajectory traj = run_forward();
  double cur_loss = loss.value(traj.sample_out());
  res.loss_history.push_back(cur_loss);

  for (int step = 0; step < config.n_opt_steps; ++step) {
    if (!std::isfinite(cur_loss)) {
      throw std::runtime_error("guided_generate: non-finite loss at step " +
                               std::to_string(step));
    }
    const Vec loss_grad = loss.grad(traj.sample_out());
    const AdjointState grads =
        solve_adjoint(traj, *cur, sched, loss_grad, adjoint_grid,
                      config.adjoint_order, config.kind);
    if (!grads.a_x.allFinite() || !grads.a_z.allFinite() ||
        !grads.a_theta.allFinite()) {
      throw std::runtime_error("guided_generate: non-finite gradient at step " +
                               std::to_string(step));
    }
    res.grad_norm_x.push_back(grads.a_x.norm());
    res.grad_norm_z.push_back(grads.a_z.norm());

    if (config.update_x) res.x_init -= config.learning_rate * grads.a_x;
    if (config.update_z) res.z -= config.learning_rate * grads.a_z;
    if (config.update_theta) {
      res.theta -= config.learning_rate * grads.a_theta;
      owned = model.with_theta(res.theta);
      cur = owned.get();
    }

    traj = run_forward();
    cur_loss = loss.value(traj.sample_out());
    res.loss_history.push_back(cur_loss);
  }
  res.x_out = traj.sample_out();
  return res;
}

}  // namespace diffadjoint
