#include "diffadjoint/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace diffadjoint {

namespace {

void check_unit_range(double t, const char* what) {
  if (!(t >= 0.0 && t <= VpSchedule::t_end)) {
    throw std::domain_error(std::string(what) + ": t = " + std::to_string(t) +
                            " outside [0, 1]");
  }
}

// log(1 + e^x), stable for large |x|.
double softplus(double x) { return x > 40.0 ? x : std::log1p(std::exp(x)); }

}  // namespace

double VpSchedule::log_alpha(double t) const {
  check_unit_range(t, "log_alpha");
  return -(beta1 - beta0) / 4.0 * t * t - beta0 / 2.0 * t;
}

double VpSchedule::alpha(double t) const { return std::exp(log_alpha(t)); }

double VpSchedule::sigma_sq(double t) const {
  // 1 - alpha^2 via expm1 to keep precision near t = 0.
  return -std::expm1(2.0 * log_alpha(t));
}

double VpSchedule::sigma(double t) const { return std::sqrt(sigma_sq(t)); }

double VpSchedule::lambda(double t) const {
  check_unit_range(t, "lambda");
  double s2 = sigma_sq(t);
  if (s2 <= 0.0) {
    throw std::domain_error("lambda: sigma_t = 0 at t = " + std::to_string(t));
  }
  return log_alpha(t) - 0.5 * std::log(s2);
}

double VpSchedule::t_of_lambda(double lam) const {
  const double lam_lo = lambda(t_end);
  const double lam_hi = lambda(t_eps);
  if (!(lam >= lam_lo - 1e-12 && lam <= lam_hi + 1e-12)) {
    throw std::domain_error("t_of_lambda: lambda = " + std::to_string(lam) +
                            " outside [" + std::to_string(lam_lo) + ", " +
                            std::to_string(lam_hi) + "]");
  }
  // lambda fixes log alpha = -softplus(-2 lambda) / 2; solve the quadratic
  // (beta1-beta0)/4 t^2 + beta0/2 t + log alpha = 0 for its positive root,
  // written in the cancellation-free rationalized form.
  const double neg2_log_alpha = softplus(-2.0 * lam);
  double t = 2.0 * neg2_log_alpha /
             (std::sqrt(beta0 * beta0 + 2.0 * (beta1 - beta0) * neg2_log_alpha) +
              beta0);
  t = std::fmin(std::fmax(t, t_eps), t_end);
  if (std::abs(lambda(t) - lam) <= 1e-10) return t;

  // Bisection fallback on the monotone lambda(t).
  double lo = t_eps, hi = t_end;
  while (hi - lo > 1e-15) {
    const double mid = 0.5 * (lo + hi);
    const double lm = lambda(mid);
    if (std::abs(lm - lam) <= 1e-12) return mid;
    if (lm > lam) {
      lo = mid;  // lambda decreasing: target lies at larger t
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double VpSchedule::drift_coeff(double t) const {
  check_unit_range(t, "drift_coeff");
  if (t == 0.0) {
    throw std::domain_error("drift_coeff: undefined at t = 0");
  }
  return -(beta1 - beta0) / 2.0 * t - beta0 / 2.0;
}

double VpSchedule::diffusion_coeff_sq(double t) const {
  check_unit_range(t, "diffusion_coeff_sq");
  if (t == 0.0) {
    throw std::domain_error("diffusion_coeff_sq: undefined at t = 0");
  }
  // g^2 = d(sigma^2)/dt - 2 f sigma^2 with d(sigma^2)/dt = -2 f alpha^2.
  const double f = drift_coeff(t);
  const double a = alpha(t);
  return -2.0 * f * a * a - 2.0 * f * sigma_sq(t);
}

void validate_grid(const TimeGrid& grid, double t_eps) {
  if (grid.times.size() < 2) {
    throw std::invalid_argument("time grid needs at least 2 points");
  }
  for (std::size_t i = 0; i < grid.times.size(); ++i) {
    const double t = grid.times[i];
    if (!(t >= t_eps - 1e-15 && t <= VpSchedule::t_end + 1e-15)) {
      throw std::invalid_argument("time grid point " + std::to_string(t) +
                                  " outside [t_eps, 1]");
    }
    if (i > 0 && !(t > grid.times[i - 1])) {
      throw std::invalid_argument("time grid not strictly increasing at index " +
                                  std::to_string(i));
    }
  }
}

TimeGrid make_grid(const VpSchedule& sched, int n_steps, GridSpacing spacing) {
  return make_grid(sched, n_steps, spacing, sched.t_eps);
}

TimeGrid make_grid(const VpSchedule& sched, int n_steps, GridSpacing spacing,
                   double t_eps) {
  if (n_steps < 1) {
    throw std::invalid_argument("make_grid: n_steps must be >= 1");
  }
  if (!(t_eps > 0.0 && t_eps < VpSchedule::t_end)) {
    throw std::invalid_argument("make_grid: t_eps must lie in (0, 1)");
  }
  TimeGrid grid;
  grid.spacing = spacing;
  grid.times.resize(n_steps + 1);
  if (spacing == GridSpacing::UniformTime) {
    for (int i = 0; i <= n_steps; ++i) {
      grid.times[i] = t_eps + (VpSchedule::t_end - t_eps) * i / n_steps;
    }
  } else {
    VpSchedule s = sched;
    s.t_eps = t_eps;
    const double lam_hi = s.lambda(t_eps);
    const double lam_lo = s.lambda(VpSchedule::t_end);
    for (int i = 0; i <= n_steps; ++i) {
      const double lam = lam_hi + (lam_lo - lam_hi) * i / n_steps;
      grid.times[i] = s.t_of_lambda(lam);
    }
  }
  grid.times.front() = t_eps;
  grid.times.back() = VpSchedule::t_end;
  validate_grid(grid, t_eps);
  return grid;
}

}  // namespace diffadjoint
