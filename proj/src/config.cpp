#include "diffadjoint/config.hpp"

#include <set>

#include <json.hpp>

#include "diffadjoint/io.hpp"
#include "diffadjoint/rng.hpp"

namespace diffadjoint {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!obj.is_object()) {
    throw ConfigError("config: \"" + where + "\" must be an object");
  }
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      throw ConfigError("config: unknown key \"" + item.key() + "\" in " +
                        where);
    }
  }
}

double get_num(const json& obj, const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number()) {
    throw ConfigError("config: \"" + key + "\" must be a number");
  }
  return obj.at(key).get<double>();
}

int get_int(const json& obj, const std::string& key, int fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number_integer()) {
    throw ConfigError("config: \"" + key + "\" must be an integer");
  }
  return obj.at(key).get<int>();
}

std::string get_str(const json& obj, const std::string& key,
                    const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_string()) {
    throw ConfigError("config: \"" + key + "\" must be a string");
  }
  return obj.at(key).get<std::string>();
}

Vec get_vec(const json& obj, const std::string& key) {
  if (!obj.contains(key)) {
    throw ConfigError("config: missing required array \"" + key + "\"");
  }
  const json& arr = obj.at(key);
  if (!arr.is_array() || arr.empty()) {
    throw ConfigError("config: \"" + key + "\" must be a non-empty array");
  }
  Vec v(arr.size());
  Eigen::Index i = 0;
  for (const auto& x : arr) {
    if (!x.is_number()) {
      throw ConfigError("config: \"" + key + "\" must contain numbers");
    }
    v[i++] = x.get<double>();
  }
  return v;
}

}  // namespace

namespace {

RunConfig parse_config_impl(const json& j) {
  check_keys(j, "config root",
             {"schedule", "model", "grid", "adjoint", "loss", "optimize",
              "convergence", "seed", "out", "z", "x_init", "x0_target"});

  RunConfig cfg;
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    check_keys(s, "schedule", {"beta0", "beta1", "t_eps"});
    cfg.schedule.beta0 = get_num(s, "beta0", cfg.schedule.beta0);
    cfg.schedule.beta1 = get_num(s, "beta1", cfg.schedule.beta1);
    cfg.schedule.t_eps = get_num(s, "t_eps", cfg.schedule.t_eps);
    if (!(cfg.schedule.t_eps > 0.0 && cfg.schedule.t_eps < 1.0)) {
      throw ConfigError("config: schedule.t_eps must lie in (0, 1)");
    }
    if (!(cfg.schedule.beta1 > cfg.schedule.beta0 && cfg.schedule.beta0 > 0)) {
      throw ConfigError("config: requires 0 < beta0 < beta1");
    }
  }

  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, "model",
               {"type", "d", "dim_z", "hidden", "seed", "weight_scale", "mu",
                "c", "weights"});
    const std::string type = get_str(m, "type", "gaussian");
    if (type == "gaussian") {
      cfg.model.type = ModelSpec::Type::Gaussian;
    } else if (type == "mlp") {
      cfg.model.type = ModelSpec::Type::Mlp;
    } else {
      throw ConfigError("config: model.type must be \"gaussian\" or \"mlp\"");
    }
    cfg.model.d = get_int(m, "d", cfg.model.d);
    if (cfg.model.d < 1) throw ConfigError("config: model.d must be >= 1");
    cfg.model.dim_z = get_int(m, "dim_z", cfg.model.d);
    cfg.model.hidden = get_int(m, "hidden", cfg.model.hidden);
    cfg.model.seed = static_cast<std::uint64_t>(
        get_num(m, "seed", static_cast<double>(cfg.model.seed)));
    cfg.model.weight_scale =
        get_num(m, "weight_scale", cfg.model.weight_scale);
    cfg.model.c = get_num(m, "c", cfg.model.c);
    if (m.contains("mu")) {
      cfg.model.mu = get_vec(m, "mu");
    } else {
      cfg.model.mu = Vec::Zero(cfg.model.d);
    }
    if (cfg.model.type == ModelSpec::Type::Gaussian) {
      cfg.model.dim_z = cfg.model.d;
      if (cfg.model.mu.size() != cfg.model.d) {
        throw ConfigError("config: model.mu must have length model.d");
      }
    }
    if (m.contains("weights")) {
      if (cfg.model.type != ModelSpec::Type::Mlp) {
        throw ConfigError("config: weights only apply to the mlp model");
      }
      cfg.model.weights = get_vec(m, "weights");
    }
  }

  if (j.contains("grid")) {
    const json& g = j.at("grid");
    check_keys(g, "grid", {"N", "spacing", "t_eps", "times"});
    cfg.grid.n = get_int(g, "N", cfg.grid.n);
    cfg.grid.spacing = spacing_from_name(get_str(g, "spacing", "uniform-t"));
    if (g.contains("t_eps")) cfg.grid.t_eps = get_num(g, "t_eps", 0.0);
    if (g.contains("times")) {
      const json& arr = g.at("times");
      if (!arr.is_array()) throw ConfigError("config: grid.times must be an array");
      std::vector<double> times;
      for (const auto& x : arr) times.push_back(x.get<double>());
      cfg.grid.times = std::move(times);
    }
    if (cfg.grid.n < 1) throw ConfigError("config: grid.N must be >= 1");
  }

  if (j.contains("adjoint")) {
    const json& a = j.at("adjoint");
    check_keys(a, "adjoint", {"order", "M", "kind", "grid_spacing"});
    cfg.adjoint.order = get_int(a, "order", cfg.adjoint.order);
    if (cfg.adjoint.order != 1 && cfg.adjoint.order != 2) {
      throw ConfigError("config: adjoint.order must be 1 or 2");
    }
    cfg.adjoint.m = get_int(a, "M", cfg.grid.n);
    if (cfg.adjoint.m < 1) throw ConfigError("config: adjoint.M must be >= 1");
    cfg.adjoint.kind = kind_from_name(get_str(a, "kind", "ode"));
    cfg.adjoint.grid_spacing =
        spacing_from_name(get_str(a, "grid_spacing", spacing_name(cfg.grid.spacing)));
  } else {
    cfg.adjoint.m = cfg.grid.n;
    cfg.adjoint.grid_spacing = cfg.grid.spacing;
  }

  if (j.contains("loss")) {
    const json& l = j.at("loss");
    check_keys(l, "loss", {"type", "target", "a", "b"});
    const std::string type = get_str(l, "type", "zero");
    if (type == "zero") {
      cfg.loss.type = LossSpec::Type::Zero;
    } else if (type == "target") {
      cfg.loss.type = LossSpec::Type::Target;
      cfg.loss.target = get_vec(l, "target");
    } else if (type == "two_target") {
      cfg.loss.type = LossSpec::Type::TwoTarget;
      cfg.loss.target_a = get_vec(l, "a");
      cfg.loss.target_b = get_vec(l, "b");
    } else {
      throw ConfigError("config: loss.type must be zero|target|two_target");
    }
  }

  if (j.contains("optimize")) {
    const json& o = j.at("optimize");
    check_keys(o, "optimize", {"learning_rate", "n_opt_steps", "update"});
    cfg.optimize.learning_rate =
        get_num(o, "learning_rate", cfg.optimize.learning_rate);
    cfg.optimize.n_opt_steps =
        get_int(o, "n_opt_steps", cfg.optimize.n_opt_steps);
    if (cfg.optimize.learning_rate < 0.0) {
      throw ConfigError("config: optimize.learning_rate must be >= 0");
    }
    if (cfg.optimize.n_opt_steps < 1) {
      throw ConfigError("config: optimize.n_opt_steps must be >= 1");
    }
    if (o.contains("update")) {
      cfg.optimize.update_x = cfg.optimize.update_z = cfg.optimize.update_theta =
          false;
      for (const auto& u : o.at("update")) {
        const std::string name = u.get<std::string>();
        if (name == "x") {
          cfg.optimize.update_x = true;
        } else if (name == "z") {
          cfg.optimize.update_z = true;
        } else if (name == "theta") {
          cfg.optimize.update_theta = true;
        } else {
          throw ConfigError("config: optimize.update entries must be x|z|theta");
        }
      }
    }
  }

  if (j.contains("convergence")) {
    const json& c = j.at("convergence");
    check_keys(c, "convergence", {"M_values", "reference_M"});
    if (c.contains("M_values")) {
      cfg.convergence.m_values.clear();
      for (const auto& m : c.at("M_values")) {
        cfg.convergence.m_values.push_back(m.get<int>());
      }
      if (cfg.convergence.m_values.empty()) {
        throw ConfigError("config: convergence.M_values must be non-empty");
      }
    }
    cfg.convergence.reference_m =
        get_int(c, "reference_M", cfg.convergence.reference_m);
  }

  if (j.contains("seed")) {
    if (!j.at("seed").is_number()) throw ConfigError("config: seed must be a number");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  cfg.out = get_str(j, "out", "");
  if (j.contains("z")) cfg.z = get_vec(j, "z");
  if (j.contains("x_init")) cfg.x_init = get_vec(j, "x_init");
  if (j.contains("x0_target")) cfg.x0_target = get_vec(j, "x0_target");
  return cfg;
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  try {
    return parse_config_impl(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: malformed value: ") + e.what());
  }
}

RunConfig load_config(const std::string& path) {
  return parse_config(load_text(path));
}

std::unique_ptr<NoisePredictionModel> build_model(const RunConfig& cfg) {
  if (cfg.model.type == ModelSpec::Type::Gaussian) {
    return std::make_unique<AnalyticGaussianModel>(cfg.schedule, cfg.model.mu,
                                                   cfg.model.c);
  }
  if (cfg.model.weights) {
    return std::make_unique<TinyMlpModel>(cfg.schedule, cfg.model.d,
                                          cfg.model.dim_z, cfg.model.hidden,
                                          *cfg.model.weights);
  }
  return std::make_unique<TinyMlpModel>(cfg.schedule, cfg.model.d,
                                        cfg.model.dim_z, cfg.model.hidden,
                                        cfg.model.seed, cfg.model.weight_scale);
}

TimeGrid build_sample_grid(const RunConfig& cfg) {
  if (cfg.grid.times) {
    TimeGrid grid;
    grid.times = *cfg.grid.times;
    grid.spacing = cfg.grid.spacing;
    try {
      validate_grid(grid, cfg.grid.t_eps.value_or(cfg.schedule.t_eps));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: grid.times invalid: ") + e.what());
    }
    return grid;
  }
  return make_grid(cfg.schedule, cfg.grid.n, cfg.grid.spacing,
                   cfg.grid.t_eps.value_or(cfg.schedule.t_eps));
}

TimeGrid build_adjoint_grid(const RunConfig& cfg) {
  return make_grid(cfg.schedule, cfg.adjoint.m, cfg.adjoint.grid_spacing,
                   cfg.grid.t_eps.value_or(cfg.schedule.t_eps));
}

std::unique_ptr<GuidanceLoss> build_loss(const RunConfig& cfg, int dim_x) {
  switch (cfg.loss.type) {
    case LossSpec::Type::Target:
      if (cfg.loss.target.size() != dim_x) {
        throw ConfigError("config: loss.target length must match model.d");
      }
      return std::make_unique<TargetDistanceLoss>(cfg.loss.target);
    case LossSpec::Type::TwoTarget:
      if (cfg.loss.target_a.size() != dim_x ||
          cfg.loss.target_b.size() != dim_x) {
        throw ConfigError("config: loss anchors must match model.d");
      }
      return std::make_unique<TwoTargetLoss>(cfg.loss.target_a,
                                             cfg.loss.target_b);
    case LossSpec::Type::Zero:
      return nullptr;
  }
  return nullptr;
}

OptimizeConfig build_optimize_config(const RunConfig& cfg) {
  OptimizeConfig oc;
  oc.learning_rate = cfg.optimize.learning_rate;
  oc.n_opt_steps = cfg.optimize.n_opt_steps;
  oc.update_x = cfg.optimize.update_x;
  oc.update_z = cfg.optimize.update_z;
  oc.update_theta = cfg.optimize.update_theta;
  oc.adjoint_order = cfg.adjoint.order;
  oc.kind = cfg.adjoint.kind;
  oc.adjoint_steps = cfg.adjoint.m;
  oc.adjoint_spacing = cfg.adjoint.grid_spacing;
  return oc;
}

Vec initial_z(const RunConfig& cfg) {
  if (cfg.z) {
    const int want = cfg.model.type == ModelSpec::Type::Gaussian
                         ? cfg.model.d
                         : cfg.model.dim_z;
    if (cfg.z->size() != want) {
      throw ConfigError("config: z length must match the model's dim_z");
    }
    return *cfg.z;
  }
  if (cfg.model.type == ModelSpec::Type::Gaussian) return cfg.model.mu;
  return Vec::Zero(cfg.model.dim_z);
}

Vec initial_x(const RunConfig& cfg) {
  if (cfg.x_init) {
    if (cfg.x_init->size() != cfg.model.d) {
      throw ConfigError("config: x_init length must match model.d");
    }
    return *cfg.x_init;
  }
  CounterRng rng(derive_seed(cfg.seed, /*tag=*/0x1a7), 0);
  return rng.normal_vec(cfg.model.d);
}

Vec loss_gradient(const RunConfig& cfg, const Vec& x_out) {
  const auto loss = build_loss(cfg, static_cast<int>(x_out.size()));
  if (!loss) return Vec::Zero(x_out.size());
  return loss->grad(x_out);
}

}  // namespace diffadjoint
