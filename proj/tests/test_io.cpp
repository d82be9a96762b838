#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <string>
#include <limits>
#include <stdexcept>
#include <vector>

#include "diffadjoint/config.hpp"
#include "diffadjoint/io.hpp"
#include "diffadjoint/rng.hpp"
#include "diffadjoint/sampler.hpp"
#include "helpers.hpp"

using namespace diffadjoint;

TEST_CASE("format_double round-trips f64 exactly") {
  CounterRng rng(47, 0);
  std::vector<double> values = {0.0,    1.0,   -1.0,        1.0 / 3.0,
                                1e-300, 1e300, 5.0e-324,    M_PI,
                                -2.5,   1e-10, 0.1 + 0.2};
  for (int i = 0; i < 200; ++i) {
    values.push_back(std::ldexp(rng.next_normal(), (i % 120) - 60));
  }
  for (double v : values) {
    const std::string text = format_double(v);
    CHECK(std::strtod(text.c_str(), nullptr) == v);
  }
}

TEST_CASE("trajectory JSON round trip") {
  VpSchedule sched;
  TinyMlpModel model(sched, 3, 2, 4, /*seed=*/51);
  const TimeGrid grid = make_grid(sched, 6, GridSpacing::UniformLogSnr);
  CounterRng rng(52, 0);
  const Trajectory traj =
      sample(model, sched, grid, rng.normal_vec(3),
             Conditioning::constant(rng.normal_vec(2)), ProcessKind::Sde, 99);

  const std::string text = trajectory_to_json(traj);
  const Trajectory back = trajectory_from_json(text);
  REQUIRE(back.states.size() == traj.states.size());
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    CHECK((back.states[i] - traj.states[i]).norm() == 0.0);
    CHECK((back.eps_outputs->at(i) - traj.eps_outputs->at(i)).norm() == 0.0);
  }
  for (std::size_t i = 0; i < traj.noise_seq->size(); ++i) {
    CHECK((back.noise_seq->at(i) - traj.noise_seq->at(i)).norm() == 0.0);
  }
  CHECK(back.grid.times == traj.grid.times);
  CHECK(back.seed == traj.seed);
  CHECK(back.kind == traj.kind);
  CHECK(back.z_record.scheduled == traj.z_record.scheduled);
  // Serialization itself is stable.
  CHECK(trajectory_to_json(back) == text);
}

TEST_CASE("trajectory serialization round-trips across random configurations") {
  VpSchedule sched;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CounterRng rng(seed, 9);
    const int d = 1 + static_cast<int>(rng.next_u64() % 5);
    const int n = 2 + static_cast<int>(rng.next_u64() % 12);
    const ProcessKind kind =
        rng.next_u64() % 2 ? ProcessKind::Sde : ProcessKind::Ode;
    const GridSpacing spacing = rng.next_u64() % 2
                                    ? GridSpacing::UniformTime
                                    : GridSpacing::UniformLogSnr;
    TinyMlpModel model(sched, d, 2, 4, seed);
    Conditioning z = Conditioning::constant(rng.normal_vec(2));
    if (rng.next_u64() % 2) {
      std::vector<Vec> knots;
      for (int i = 0; i < n; ++i) knots.push_back(rng.normal_vec(2));
      z = Conditioning::piecewise(knots);
    }
    const Trajectory traj =
        sample(model, sched, make_grid(sched, n, spacing), rng.normal_vec(d),
               z, kind, seed, /*record_eps=*/seed % 2 == 0);
    const std::string text = trajectory_to_json(traj);
    CHECK(trajectory_to_json(trajectory_from_json(text)) == text);
  }
}

TEST_CASE("sde trajectory files must carry their noise realization") {
  VpSchedule sched;
  TinyMlpModel model(sched, 2, 1, 4, /*seed=*/1);
  const TimeGrid grid = make_grid(sched, 4, GridSpacing::UniformTime);
  CounterRng rng(54, 0);
  Trajectory traj = sample(model, sched, grid, rng.normal_vec(2),
                           Conditioning::constant(Vec::Zero(1)),
                           ProcessKind::Sde, 3);
  traj.noise_seq.reset();
  CHECK_THROWS_AS(trajectory_from_json(trajectory_to_json(traj)),
                  std::invalid_argument);
}

TEST_CASE("weights JSON round trip") {
  CounterRng rng(53, 0);
  const Vec theta = rng.normal_vec(37);
  const Vec back = weights_from_json(weights_to_json(theta));
  CHECK((back - theta).norm() == 0.0);
}

TEST_CASE("config parsing") {
  SUBCASE("defaults") {
    const RunConfig cfg = parse_config("{}");
    CHECK(cfg.schedule.beta0 == 0.1);
    CHECK(cfg.schedule.beta1 == 20.0);
    CHECK(cfg.grid.n == 20);
    CHECK(cfg.adjoint.m == 20);
    CHECK(cfg.adjoint.order == 1);
  }
  SUBCASE("full config builds objects") {
    const RunConfig cfg = parse_config(R"({
      "schedule": {"beta0": 0.1, "beta1": 20.0, "t_eps": 1e-3},
      "model": {"type": "mlp", "d": 2, "dim_z": 3, "hidden": 6, "seed": 4},
      "grid": {"N": 10, "spacing": "uniform-lambda"},
      "adjoint": {"order": 2, "M": 5, "kind": "sde", "grid_spacing": "uniform-t"},
      "loss": {"type": "target", "target": [0.1, 0.2]},
      "optimize": {"learning_rate": 0.05, "n_opt_steps": 3, "update": ["x", "z"]},
      "seed": 11,
      "out": "/tmp/x.json"
    })");
    const auto model = build_model(cfg);
    CHECK(model->dim_x() == 2);
    CHECK(model->dim_z() == 3);
    CHECK(build_sample_grid(cfg).n_steps() == 10);
    CHECK(build_adjoint_grid(cfg).n_steps() == 5);
    CHECK(build_adjoint_grid(cfg).spacing == GridSpacing::UniformTime);
    CHECK(build_loss(cfg, 2) != nullptr);
    CHECK(initial_z(cfg).size() == 3);
    CHECK(initial_x(cfg).size() == 2);
    const OptimizeConfig oc = build_optimize_config(cfg);
    CHECK(oc.update_z);
    CHECK(!oc.update_theta);
    CHECK(oc.kind == ProcessKind::Sde);
  }
  SUBCASE("unknown keys rejected at every level") {
    CHECK_THROWS_AS(parse_config(R"({"bogus": 1})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"schedule": {"beta2": 1}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"model": {"typ": "mlp"}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"grid": {"n": 3}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"adjoint": {"orders": 2}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"optimize": {"lr": 0.1}})"), ConfigError);
  }
  SUBCASE("invalid values rejected") {
    CHECK_THROWS_AS(parse_config(R"({"schedule": {"t_eps": 0.0}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"model": {"type": "unet"}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"adjoint": {"order": 3}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"grid": {"N": 0}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"loss": {"type": "target"}})"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config("not json"), ConfigError);
  }
  SUBCASE("explicit grid times accepted, degenerate rejected") {
    const RunConfig cfg = parse_config(
        R"({"grid": {"times": [1e-3, 0.4, 1.0], "spacing": "uniform-t"}})");
    CHECK(build_sample_grid(cfg).n_steps() == 2);
    const RunConfig bad = parse_config(
        R"({"grid": {"times": [1e-3, 0.4, 0.4, 1.0], "spacing": "uniform-t"}})");
    CHECK_THROWS_AS(build_sample_grid(bad), ConfigError);
  }
  SUBCASE("mlp weights override") {
    RunConfig cfg = parse_config(R"({
      "model": {"type": "mlp", "d": 1, "dim_z": 1, "hidden": 1, "weights":
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0]}
    })");
    const auto model = build_model(cfg);
    CHECK(model->eps(Vec::Ones(1), Vec::Ones(1), 0.5).cwiseAbs().maxCoeff() ==
          0.0);
  }
}
