#include "diffadjoint/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace diffadjoint {

namespace {

using nlohmann::json;

void append_vec(std::string& out, const Vec& v) {
  out += '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  out += ']';
}

void append_vec_list(std::string& out, const std::vector<Vec>& vs) {
  out += '[';
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (i) out += ',';
    append_vec(out, vs[i]);
  }
  out += ']';
}

Vec vec_from_json(const json& j) {
  Vec v(j.size());
  Eigen::Index i = 0;
  for (const auto& x : j) v[i++] = x.get<double>();
  return v;
}

std::vector<Vec> vec_list_from_json(const json& j) {
  std::vector<Vec> out;
  out.reserve(j.size());
  for (const auto& row : j) out.push_back(vec_from_json(row));
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string spacing_name(GridSpacing s) {
  return s == GridSpacing::UniformTime ? "uniform-t" : "uniform-lambda";
}

GridSpacing spacing_from_name(const std::string& name) {
  if (name == "uniform-t") return GridSpacing::UniformTime;
  if (name == "uniform-lambda") return GridSpacing::UniformLogSnr;
  throw std::invalid_argument("unknown spacing rule: " + name);
}

std::string kind_name(ProcessKind k) {
  return k == ProcessKind::Ode ? "ode" : "sde";
}

ProcessKind kind_from_name(const std::string& name) {
  if (name == "ode") return ProcessKind::Ode;
  if (name == "sde") return ProcessKind::Sde;
  throw std::invalid_argument("unknown process kind: " + name);
}

std::string trajectory_to_json(const Trajectory& traj) {
  std::string out = "{\"grid\":{\"times\":";
  Vec times = Eigen::Map<const Vec>(traj.grid.times.data(),
                                    static_cast<Eigen::Index>(traj.grid.times.size()));
  append_vec(out, times);
  out += ",\"spacing_rule\":\"" + spacing_name(traj.grid.spacing) + "\"}";
  out += ",\"kind\":\"" + kind_name(traj.kind) + "\"";
  out += ",\"states\":";
  append_vec_list(out, traj.states);
  if (traj.eps_outputs) {
    out += ",\"eps_outputs\":";
    append_vec_list(out, *traj.eps_outputs);
  }
  if (traj.noise_seq) {
    out += ",\"noise_seq\":";
    append_vec_list(out, *traj.noise_seq);
  }
  out += ",\"z_record\":{\"scheduled\":";
  out += traj.z_record.scheduled ? "true" : "false";
  out += ",\"knots\":";
  append_vec_list(out, traj.z_record.knots);
  out += "},\"seed\":" + std::to_string(traj.seed) + "}";
  return out;
}

Trajectory trajectory_from_json(const std::string& text) {
  json j = json::parse(text);
  Trajectory traj;
  for (const auto& t : j.at("grid").at("times")) {
    traj.grid.times.push_back(t.get<double>());
  }
  traj.grid.spacing =
      spacing_from_name(j.at("grid").at("spacing_rule").get<std::string>());
  traj.kind = kind_from_name(j.at("kind").get<std::string>());
  traj.states = vec_list_from_json(j.at("states"));
  if (j.contains("eps_outputs")) {
    traj.eps_outputs = vec_list_from_json(j.at("eps_outputs"));
  }
  if (j.contains("noise_seq")) {
    traj.noise_seq = vec_list_from_json(j.at("noise_seq"));
  }
  traj.z_record.scheduled = j.at("z_record").at("scheduled").get<bool>();
  traj.z_record.knots = vec_list_from_json(j.at("z_record").at("knots"));
  traj.seed = j.at("seed").get<std::uint64_t>();
  if (traj.states.size() != traj.grid.times.size()) {
    throw std::invalid_argument("trajectory file: state count mismatch");
  }
  if (traj.kind == ProcessKind::Sde &&
      (!traj.noise_seq ||
       traj.noise_seq->size() != static_cast<std::size_t>(traj.n_steps()))) {
    throw std::invalid_argument(
        "trajectory file: sde kind requires one noise draw per step");
  }
  return traj;
}

void save_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
}

std::string load_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string gradient_to_json(const AdjointState& grads) {
  std::string out = "{\"a_x\":";
  append_vec(out, grads.a_x);
  out += ",\"a_z\":";
  append_vec(out, grads.a_z);
  out += ",\"a_theta\":";
  append_vec(out, grads.a_theta);
  out += "}";
  return out;
}

std::string gradient_to_json(const ScheduledAdjointResult& grads) {
  std::string out = "{\"a_x\":";
  append_vec(out, grads.a_x);
  out += ",\"a_z_knots\":";
  append_vec_list(out, grads.a_z_knots);
  out += ",\"a_theta\":";
  append_vec(out, grads.a_theta);
  out += "}";
  return out;
}

std::string weights_to_json(const Vec& theta) {
  std::string out;
  append_vec(out, theta);
  return out;
}

Vec weights_from_json(const std::string& text) {
  return vec_from_json(json::parse(text));
}

std::string convergence_csv(const std::vector<ConvergenceRow>& rows,
                            const std::string& solver, int order,
                            ProcessKind kind) {
  std::string out = "solver,order,kind,M,h_max,err_ax,err_az,err_atheta\n";
  for (const auto& r : rows) {
    out += solver + ',' + std::to_string(order) + ',' + kind_name(kind) + ',' +
           std::to_string(r.m) + ',' + format_double(r.h_max) + ',' +
           format_double(r.err_ax) + ',' + format_double(r.err_az) + ',' +
           format_double(r.err_atheta) + '\n';
  }
  return out;
}

std::string loss_history_csv(const OptimizeResult& result) {
  std::string out = "step,loss,grad_norm_x,grad_norm_z\n";
  for (std::size_t i = 0; i < result.loss_history.size(); ++i) {
    const bool has_grad = i < result.grad_norm_x.size();
    out += std::to_string(i) + ',' + format_double(result.loss_history[i]) +
           ',' + format_double(has_grad ? result.grad_norm_x[i] : 0.0) + ',' +
           format_double(has_grad ? result.grad_norm_z[i] : 0.0) + '\n';
  }
  return out;
}

std::string optimize_result_json(const OptimizeResult& result) {
  std::string out = "{\"x_out\":";
  append_vec(out, result.x_out);
  out += ",\"x_init\":";
  append_vec(out, result.x_init);
  out += ",\"z\":";
  append_vec(out, result.z);
  out += ",\"theta\":";
  append_vec(out, result.theta);
  out += ",\"final_loss\":" + format_double(result.loss_history.back());
  out += ",\"initial_loss\":" + format_double(result.loss_history.front());
  out += "}";
  return out;
}

std::string cycle_report_json(int n_steps, int dim, double max_abs_error) {
  return "{\"n_steps\":" + std::to_string(n_steps) +
         ",\"dim\":" + std::to_string(dim) +
         ",\"max_abs_error\":" + format_double(max_abs_error) +
         ",\"pass\":" + (max_abs_error <= 1e-10 ? "true" : "false") + "}";
}

}  // namespace diffadjoint
