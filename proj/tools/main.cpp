#include <algorithm>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "diffadjoint/adjoint.hpp"
#include "diffadjoint/config.hpp"
#include "diffadjoint/io.hpp"
#include "diffadjoint/oracle.hpp"
#include "diffadjoint/optimize.hpp"
#include "diffadjoint/rng.hpp"
#include "diffadjoint/sampler.hpp"

namespace da = diffadjoint;

namespace {

struct CliArgs {
  std::string config_path;
  std::string out;
  std::string traj_path;
  std::optional<std::uint64_t> seed;
};

da::RunConfig load_run_config(const CliArgs& args) {
  da::RunConfig cfg = da::load_config(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  if (!args.out.empty()) cfg.out = args.out;
  if (cfg.out.empty()) {
    throw da::ConfigError("no output path: set --out or config \"out\"");
  }
  return cfg;
}

std::string sibling_json_path(const std::string& out) {
  const auto dot = out.rfind('.');
  if (dot != std::string::npos && out.substr(dot) == ".csv") {
    return out.substr(0, dot) + ".json";
  }
  return out + ".json";
}

int cmd_sample(const CliArgs& args) {
  const da::RunConfig cfg = load_run_config(args);
  const auto model = da::build_model(cfg);
  const da::TimeGrid grid = da::build_sample_grid(cfg);
  const da::Vec x_init = da::initial_x(cfg);
  const da::Conditioning z = da::Conditioning::constant(da::initial_z(cfg));
  const da::Trajectory traj =
      da::sample(*model, cfg.schedule, grid, x_init, z, cfg.adjoint.kind,
                 cfg.seed);
  da::save_text(cfg.out, da::trajectory_to_json(traj));
  std::cout << "wrote " << cfg.out << " (" << traj.n_steps() << " steps, "
            << da::kind_name(traj.kind) << ")\n";
  return 0;
}

int cmd_grad(const CliArgs& args) {
  if (args.traj_path.empty()) {
    throw da::ConfigError("grad: requires --traj <trajectory file>");
  }
  const da::RunConfig cfg = load_run_config(args);
  const auto model = da::build_model(cfg);
  const da::Trajectory traj =
      da::trajectory_from_json(da::load_text(args.traj_path));
  if (traj.kind != cfg.adjoint.kind) {
    throw da::ConfigError("grad: trajectory kind \"" +
                          da::kind_name(traj.kind) +
                          "\" does not match config adjoint.kind \"" +
                          da::kind_name(cfg.adjoint.kind) + "\"");
  }
  const da::Vec loss_grad = da::loss_gradient(cfg, traj.sample_out());
  const da::TimeGrid adjoint_grid = da::build_adjoint_grid(cfg);
  std::string out_json;
  if (traj.z_record.scheduled) {
    if (cfg.adjoint.order != 1) {
      throw da::ConfigError(
          "grad: scheduled conditioning supports adjoint.order 1 only");
    }
    const da::ScheduledAdjointResult grads = da::solve_adjoint_scheduled_z(
        traj, *model, cfg.schedule, loss_grad, adjoint_grid, cfg.adjoint.kind);
    out_json = da::gradient_to_json(grads);
  } else {
    const da::AdjointState grads =
        da::solve_adjoint(traj, *model, cfg.schedule, loss_grad, adjoint_grid,
                          cfg.adjoint.order, cfg.adjoint.kind);
    out_json = da::gradient_to_json(grads);
  }
  da::save_text(cfg.out, out_json);
  std::cout << "wrote " << cfg.out << "\n";
  return 0;
}

int cmd_convergence(const CliArgs& args) {
  const da::RunConfig cfg = load_run_config(args);
  const auto model = da::build_model(cfg);
  const da::TimeGrid grid = da::build_sample_grid(cfg);
  const da::Vec x_init = da::initial_x(cfg);
  const da::Conditioning z = da::Conditioning::constant(da::initial_z(cfg));
  if (cfg.loss.type == da::LossSpec::Type::Zero) {
    throw da::ConfigError("convergence: requires a non-zero loss spec");
  }
  const da::Trajectory traj = da::sample(*model, cfg.schedule, grid, x_init, z,
                                         cfg.adjoint.kind, cfg.seed);
  const da::Vec loss_grad = da::loss_gradient(cfg, traj.sample_out());

  const auto rows = da::convergence_sweep(
      traj, *model, cfg.schedule, loss_grad, cfg.convergence.m_values,
      cfg.adjoint.order, cfg.adjoint.kind, cfg.adjoint.grid_spacing,
      cfg.convergence.reference_m);
  da::save_text(cfg.out, da::convergence_csv(rows, "adjoint-ei",
                                             cfg.adjoint.order,
                                             cfg.adjoint.kind));

  std::vector<std::pair<double, double>> pts;
  for (const auto& r : rows) {
    pts.emplace_back(r.h_max,
                     std::max({r.err_ax, r.err_az, r.err_atheta}));
  }
  const da::OrderFit fit = da::estimate_order(pts);
  std::cout << "wrote " << cfg.out << "\nslope=" << fit.slope
            << " (order " << cfg.adjoint.order << ", "
            << da::kind_name(cfg.adjoint.kind) << ")\n";
  return 0;
}

int cmd_optimize(const CliArgs& args) {
  const da::RunConfig cfg = load_run_config(args);
  const auto model = da::build_model(cfg);
  const da::TimeGrid grid = da::build_sample_grid(cfg);
  const auto loss = da::build_loss(cfg, cfg.model.d);
  if (!loss) {
    throw da::ConfigError("optimize: requires a non-zero loss spec");
  }
  const da::OptimizeResult res = da::guided_generate(
      *model, cfg.schedule, grid, da::initial_x(cfg), da::initial_z(cfg),
      *loss, da::build_optimize_config(cfg), cfg.seed);
  da::save_text(cfg.out, da::loss_history_csv(res));
  da::save_text(sibling_json_path(cfg.out), da::optimize_result_json(res));
  std::cout << "wrote " << cfg.out << " and " << sibling_json_path(cfg.out)
            << "\ninitial_loss=" << da::format_double(res.loss_history.front())
            << " final_loss=" << da::format_double(res.loss_history.back())
            << "\n";
  return 0;
}

int cmd_cycle_check(const CliArgs& args) {
  const da::RunConfig cfg = load_run_config(args);
  const auto model = da::build_model(cfg);
  const da::TimeGrid grid = da::build_sample_grid(cfg);
  const da::Conditioning z = da::Conditioning::constant(da::initial_z(cfg));
  da::CounterRng rng(da::derive_seed(cfg.seed, 0xcc1e), 0);
  const da::Vec x0_target =
      cfg.x0_target ? *cfg.x0_target : da::Vec(rng.normal_vec(cfg.model.d));
  const da::Vec x_init = da::initial_x(cfg);

  const da::Trajectory inverted = da::cycle_sde_invert(
      x0_target, grid, z, *model, cfg.schedule, x_init);
  const da::Trajectory replayed =
      da::replay_sde(*model, cfg.schedule, grid, x_init, z,
                     *inverted.noise_seq, /*record_eps=*/false);
  double max_err = 0.0;
  for (std::size_t i = 0; i < inverted.states.size(); ++i) {
    max_err = std::max(
        max_err,
        (inverted.states[i] - replayed.states[i]).cwiseAbs().maxCoeff());
  }
  da::save_text(cfg.out,
                da::cycle_report_json(grid.n_steps(), cfg.model.d, max_err));
  std::cout << "wrote " << cfg.out
            << " max_abs_error=" << da::format_double(max_err) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion sampling and adjoint gradients for VP diffusion models"};
  app.require_subcommand(1);

  CliArgs args;
  for (auto* sub :
       {app.add_subcommand("sample", "Sample a trajectory and write it as JSON"),
        app.add_subcommand("grad", "Solve the adjoint equations for a recorded trajectory"),
        app.add_subcommand("convergence", "Sweep adjoint step counts and fit the error slope"),
        app.add_subcommand("optimize", "Gradient-descent guided generation loop"),
        app.add_subcommand("cycle-check", "Invert-and-replay SDE reconstruction report")}) {
    sub->add_option("--config", args.config_path, "JSON config path")
        ->required();
    sub->add_option("--out", args.out, "output path (overrides config)");
    sub->add_option("--seed", args.seed, "seed override");
    if (sub->get_name() == "grad") {
      sub->add_option("--traj", args.traj_path, "trajectory JSON file");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand("sample")) return cmd_sample(args);
    if (app.got_subcommand("grad")) return cmd_grad(args);
    if (app.got_subcommand("convergence")) return cmd_convergence(args);
    if (app.got_subcommand("optimize")) return cmd_optimize(args);
    if (app.got_subcommand("cycle-check")) return cmd_cycle_check(args);
  } catch (const da::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
