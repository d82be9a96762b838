#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "diffadjoint/adjoint.hpp"
#include "diffadjoint/oracle.hpp"
#include "diffadjoint/rng.hpp"
#include "diffadjoint/sampler.hpp"
#include "helpers.hpp"

using namespace diffadjoint;
using diffadjoint::testing::ZeroModel;
using diffadjoint::testing::rel_err;

namespace {

AdjointState make_state(const Vec& a_x, int dim_z, int dim_theta, double t) {
  return {a_x, Vec::Zero(dim_z), Vec::Zero(dim_theta), t};
}

Trajectory zero_model_traj(const VpSchedule& sched, const TimeGrid& grid,
                           const ZeroModel& model, const Vec& x1) {
  return sample(model, sched, grid, x1,
                Conditioning::constant(Vec::Zero(model.dim_z())),
                ProcessKind::Ode, 0);
}

}  // namespace

TEST_CASE("phi functions") {
  CHECK(phi1(0.0) == 1.0);
  CHECK(phi2(0.0) == 0.5);
  SUBCASE("recurrence at h = 0.3") {
    CHECK(std::abs(phi2(0.3) - (phi1(0.3) - 1.0) / 0.3) <= 1e-12);
  }
  SUBCASE("closed forms away from zero") {
    for (double h : {-4.0, -0.5, 0.5, 4.0}) {
      CHECK(phi1(h) == doctest::Approx((std::exp(h) - 1.0) / h).epsilon(1e-13));
      CHECK(phi2(h) ==
            doctest::Approx((std::exp(h) - h - 1.0) / (h * h)).epsilon(1e-10));
    }
  }
  SUBCASE("branch crossover is continuous") {
    for (double sign : {1.0, -1.0}) {
      const double at = sign * 1e-6;
      const double inside = std::nextafter(at, 0.0);
      CHECK(std::abs(phi1(at) - phi1(inside)) <= 1e-12);
      CHECK(std::abs(phi2(at) - phi2(inside)) <= 1e-12);
    }
  }
}

TEST_CASE("first-order adjoint step") {
  VpSchedule sched;
  CounterRng rng(3, 0);

  SUBCASE("eps == 0 model propagates only the linear term") {
    ZeroModel zero(3, 2, 2);
    const AdjointState st = make_state(rng.normal_vec(3), 2, 2, 0.2);
    const AdjointState out =
        adjoint_step_1(st, 0.7, Vec::Zero(3), Vec::Zero(2), zero, sched, 1.0);
    const Vec want = sched.alpha(0.2) / sched.alpha(0.7) * st.a_x;
    CHECK((out.a_x - want).norm() == 0.0);
    CHECK(out.a_z.norm() == 0.0);
    CHECK(out.a_theta.norm() == 0.0);
  }
  SUBCASE("zero cotangent stays zero") {
    TinyMlpModel mlp(sched, 2, 2, 4, /*seed=*/5);
    const AdjointState st = make_state(Vec::Zero(2), 2, mlp.dim_theta(), 0.3);
    const AdjointState out = adjoint_step_1(st, 0.6, rng.normal_vec(2),
                                            rng.normal_vec(2), mlp, sched, 1.0);
    CHECK(out.a_x.norm() == 0.0);
    CHECK(out.a_z.norm() == 0.0);
    CHECK(out.a_theta.norm() == 0.0);
  }
  SUBCASE("time order enforced") {
    ZeroModel zero(1);
    const AdjointState st = make_state(Vec::Ones(1), 1, 1, 0.7);
    CHECK_THROWS_AS(
        adjoint_step_1(st, 0.2, Vec::Zero(1), Vec::Zero(1), zero, sched, 1.0),
        std::invalid_argument);
  }
}

TEST_CASE("sde factor-of-two identity") {
  VpSchedule sched;
  TinyMlpModel mlp(sched, 2, 2, 5, /*seed=*/8);
  for (int k = 0; k < 100; ++k) {
    CounterRng rng(500 + k, 0);
    const double t =
        sched.t_eps + (1.0 - sched.t_eps) * 0.98 * rng.next_uniform();
    const double s = t + (1.0 - t) * (0.01 + 0.99 * rng.next_uniform());
    const AdjointState st{rng.normal_vec(2), rng.normal_vec(2),
                          rng.normal_vec(mlp.dim_theta()), t};
    const Vec x_t = rng.normal_vec(2);
    const Vec z_t = rng.normal_vec(2);

    const AdjointState s1 = adjoint_step_1(st, s, x_t, z_t, mlp, sched, 1.0);
    const AdjointState s2 = adjoint_step_1(st, s, x_t, z_t, mlp, sched, 2.0);
    // Nonlinear increment of the factor-1 step.
    const Vec inc_x = s1.a_x - sched.alpha(t) / sched.alpha(s) * st.a_x;
    const Vec inc_z = s1.a_z - st.a_z;
    const Vec inc_th = s1.a_theta - st.a_theta;

    auto check = [](const Vec& two, const Vec& one, const Vec& inc) {
      const double denom = std::max(
          {two.cwiseAbs().maxCoeff(), one.cwiseAbs().maxCoeff(), 1e-30});
      CHECK((two - one - inc).cwiseAbs().maxCoeff() / denom <= 1e-14);
    };
    check(s2.a_x, s1.a_x, inc_x);
    check(s2.a_z, s1.a_z, inc_z);
    check(s2.a_theta, s1.a_theta, inc_th);
  }
}

TEST_CASE("multistep adjoint step") {
  VpSchedule sched;
  CounterRng rng(12, 0);

  SUBCASE("flat derivative collapses to the first-order step") {
    TinyMlpModel mlp(sched, 2, 2, 4, /*seed=*/4);
    const AdjointState st{rng.normal_vec(2), rng.normal_vec(2),
                          rng.normal_vec(mlp.dim_theta()), 0.4};
    const Vec x_t = rng.normal_vec(2), z_t = rng.normal_vec(2);
    ScaledVjp prev = scaled_vjp(st, x_t, z_t, mlp, sched);
    prev.t = 0.2;  // earlier time, same values: correction term vanishes
    const Adjoint2mResult res =
        adjoint_step_2m(st, 0.7, prev, x_t, z_t, mlp, sched, 1.0);
    const AdjointState first =
        adjoint_step_1(st, 0.7, x_t, z_t, mlp, sched, 1.0);
    CHECK(rel_err(res.next.a_x, first.a_x) <= 1e-12);
    CHECK(rel_err(res.next.a_z, first.a_z) <= 1e-12);
    CHECK(rel_err(res.next.a_theta, first.a_theta) <= 1e-12);
  }
  SUBCASE("eps == 0 gives linear-only propagation and zero buffer") {
    ZeroModel zero(2, 1, 1);
    const AdjointState st = make_state(rng.normal_vec(2), 1, 1, 0.3);
    ScaledVjp prev{Vec::Zero(2), Vec::Zero(1), Vec::Zero(1), 0.1};
    const Adjoint2mResult res = adjoint_step_2m(st, 0.8, prev, Vec::Zero(2),
                                                Vec::Zero(1), zero, sched, 1.0);
    const Vec want = sched.alpha(0.3) / sched.alpha(0.8) * st.a_x;
    CHECK((res.next.a_x - want).norm() == 0.0);
    CHECK(res.vjp_t.v_x.norm() == 0.0);
    CHECK(res.vjp_t.v_z.norm() == 0.0);
  }
  SUBCASE("degenerate step ratio rejected") {
    ZeroModel zero(1);
    const AdjointState st = make_state(Vec::Ones(1), 1, 1, 0.4);
    ScaledVjp prev{Vec::Zero(1), Vec::Zero(1), Vec::Zero(1), 0.3999999999};
    CHECK_THROWS_AS(adjoint_step_2m(st, 0.9, prev, Vec::Zero(1), Vec::Zero(1),
                                    zero, sched, 1.0),
                    std::invalid_argument);
  }
  SUBCASE("buffer must precede the current time") {
    ZeroModel zero(1);
    const AdjointState st = make_state(Vec::Ones(1), 1, 1, 0.4);
    ScaledVjp prev{Vec::Zero(1), Vec::Zero(1), Vec::Zero(1), 0.5};
    CHECK_THROWS_AS(adjoint_step_2m(st, 0.9, prev, Vec::Zero(1), Vec::Zero(1),
                                    zero, sched, 1.0),
                    std::invalid_argument);
  }
}

TEST_CASE("solve_adjoint basics") {
  VpSchedule sched;
  TinyMlpModel mlp(sched, 2, 2, 4, /*seed=*/31);
  const Conditioning z = Conditioning::constant(Vec::Ones(2) * 0.2);
  CounterRng rng(13, 0);
  const TimeGrid grid = make_grid(sched, 16, GridSpacing::UniformTime);
  const Trajectory traj =
      sample(mlp, sched, grid, rng.normal_vec(2), z, ProcessKind::Ode, 0);

  SUBCASE("zero loss gradient gives a zero state") {
    const AdjointState out = solve_adjoint(traj, mlp, sched, Vec::Zero(2), grid,
                                           1, ProcessKind::Ode);
    CHECK(out.a_x.norm() == 0.0);
    CHECK(out.a_z.norm() == 0.0);
    CHECK(out.a_theta.norm() == 0.0);
  }
  SUBCASE("linear in the loss gradient") {
    const Vec g1 = rng.normal_vec(2), g2 = rng.normal_vec(2);
    for (int order : {1, 2}) {
      const AdjointState o1 =
          solve_adjoint(traj, mlp, sched, g1, grid, order, ProcessKind::Ode);
      const AdjointState o2 =
          solve_adjoint(traj, mlp, sched, g2, grid, order, ProcessKind::Ode);
      const AdjointState o12 = solve_adjoint(traj, mlp, sched, Vec(g1 + g2),
                                             grid, order, ProcessKind::Ode);
      CHECK((o12.a_x - o1.a_x - o2.a_x).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK((o12.a_z - o1.a_z - o2.a_z).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK((o12.a_theta - o1.a_theta - o2.a_theta).cwiseAbs().maxCoeff() <=
            1e-10);
    }
  }
  SUBCASE("order-2 with M=3 returns finite values") {
    const TimeGrid small = make_grid(sched, 3, GridSpacing::UniformTime);
    const AdjointState out = solve_adjoint(traj, mlp, sched, Vec::Ones(2),
                                           small, 2, ProcessKind::Ode);
    CHECK(out.a_x.allFinite());
    CHECK(out.a_z.allFinite());
    CHECK(out.a_theta.allFinite());
  }
  SUBCASE("decoupled adjoint grid interpolates recorded states") {
    const TimeGrid m8 = make_grid(sched, 8, GridSpacing::UniformLogSnr);
    const AdjointState coarse =
        solve_adjoint(traj, mlp, sched, Vec::Ones(2), m8, 1, ProcessKind::Ode);
    const AdjointState fine =
        solve_adjoint(traj, mlp, sched, Vec::Ones(2), grid, 1, ProcessKind::Ode);
    CHECK(coarse.a_x.allFinite());
    CHECK(rel_err(coarse.a_x, fine.a_x) <= 0.5);
  }
  SUBCASE("error paths") {
    CHECK_THROWS_AS(solve_adjoint(traj, mlp, sched, Vec::Ones(2), grid, 3,
                                  ProcessKind::Ode),
                    std::invalid_argument);
    CHECK_THROWS_AS(solve_adjoint(traj, mlp, sched, Vec::Ones(3), grid, 1,
                                  ProcessKind::Ode),
                    std::invalid_argument);
    CHECK_THROWS_AS(solve_adjoint(traj, mlp, sched, Vec::Ones(2), grid, 1,
                                  ProcessKind::Sde),
                    std::invalid_argument);
    TimeGrid shifted = make_grid(sched, 8, GridSpacing::UniformTime, 5e-3);
    CHECK_THROWS_AS(solve_adjoint(traj, mlp, sched, Vec::Ones(2), shifted, 1,
                                  ProcessKind::Ode),
                    std::invalid_argument);
  }
}

TEST_CASE("linear-term exactness across grids") {
  VpSchedule sched;
  ZeroModel zero(2, 1, 1);
  CounterRng rng(17, 0);
  const Vec g = rng.normal_vec(2);
  const double total = sched.alpha(sched.t_eps) / sched.alpha(1.0);

  std::vector<TimeGrid> grids;
  TimeGrid irregular;
  irregular.times = {sched.t_eps, 0.31, 0.62, 1.0};
  grids.push_back(irregular);
  grids.push_back(make_grid(sched, 20, GridSpacing::UniformTime));
  grids.push_back(make_grid(sched, 20, GridSpacing::UniformLogSnr));

  for (const auto& grid : grids) {
    const Trajectory traj =
        zero_model_traj(sched, grid, zero, rng.normal_vec(2));
    for (int order : {1, 2}) {
      const AdjointState out =
          solve_adjoint(traj, zero, sched, g, grid, order, ProcessKind::Ode);
      CHECK((out.a_x - total * g).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK(out.a_z.norm() == 0.0);
      CHECK(out.a_theta.norm() == 0.0);
    }
  }
}

TEST_CASE("scheduled conditioning") {
  VpSchedule sched;
  const int n = 8;
  TinyMlpModel mlp(sched, 2, 2, 5, /*seed=*/77);
  const TimeGrid grid = make_grid(sched, n, GridSpacing::UniformTime);
  CounterRng rng(21, 0);
  const Vec x1 = rng.normal_vec(2);
  const Vec z0 = rng.normal_vec(2);

  SUBCASE("constant knots: buckets sum to the constant-z gradient") {
    std::vector<Vec> knots(n, z0);
    const Trajectory scheduled_traj = sample(
        mlp, sched, grid, x1, Conditioning::piecewise(knots), ProcessKind::Ode,
        0);
    const Trajectory const_traj = sample(
        mlp, sched, grid, x1, Conditioning::constant(z0), ProcessKind::Ode, 0);
    const Vec g = rng.normal_vec(2);
    const ScheduledAdjointResult bucketed = solve_adjoint_scheduled_z(
        scheduled_traj, mlp, sched, g, grid, ProcessKind::Ode);
    const AdjointState flat =
        solve_adjoint(const_traj, mlp, sched, g, grid, 1, ProcessKind::Ode);
    Vec sum = Vec::Zero(2);
    for (const auto& b : bucketed.a_z_knots) sum += b;
    CHECK((sum - flat.a_z).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((bucketed.a_x - flat.a_x).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((bucketed.a_theta - flat.a_theta).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("model that ignores z leaves every bucket zero") {
    TinyMlpModel silent(sched, 2, 2, 5, Vec(Vec::Zero(5 * 5 + 5 + 2 * 5 + 2)));
    std::vector<Vec> knots;
    for (int i = 0; i < n; ++i) knots.push_back(rng.normal_vec(2));
    const Trajectory traj =
        sample(silent, sched, grid, x1, Conditioning::piecewise(knots),
               ProcessKind::Ode, 0);
    const ScheduledAdjointResult out = solve_adjoint_scheduled_z(
        traj, silent, sched, Vec::Ones(2), grid, ProcessKind::Ode);
    for (const auto& b : out.a_z_knots) CHECK(b.norm() == 0.0);
  }
  SUBCASE("knot/grid mismatch rejected") {
    std::vector<Vec> knots(n + 1, z0);
    Trajectory traj = sample(mlp, sched, grid, x1, Conditioning::constant(z0),
                             ProcessKind::Ode, 0);
    traj.z_record = Conditioning::piecewise(knots);
    CHECK_THROWS_AS(solve_adjoint_scheduled_z(traj, mlp, sched, Vec::Ones(2),
                                              grid, ProcessKind::Ode),
                    std::invalid_argument);
  }
  SUBCASE("constant trajectory rejected") {
    const Trajectory traj = sample(
        mlp, sched, grid, x1, Conditioning::constant(z0), ProcessKind::Ode, 0);
    CHECK_THROWS_AS(solve_adjoint_scheduled_z(traj, mlp, sched, Vec::Ones(2),
                                              grid, ProcessKind::Ode),
                    std::invalid_argument);
  }
}
