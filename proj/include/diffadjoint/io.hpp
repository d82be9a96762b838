#pragma once

#include <string>
#include <vector>

#include "diffadjoint/adjoint.hpp"
#include "diffadjoint/oracle.hpp"
#include "diffadjoint/optimize.hpp"
#include "diffadjoint/sampler.hpp"
#include "diffadjoint/types.hpp"

namespace diffadjoint {

/// Number rendering used in every file this library writes: 17 significant
/// digits, which round-trips f64 exactly.
std::string format_double(double v);

std::string spacing_name(GridSpacing s);
GridSpacing spacing_from_name(const std::string& name);
std::string kind_name(ProcessKind k);
ProcessKind kind_from_name(const std::string& name);

std::string trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const std::string& text);

void save_text(const std::string& path, const std::string& text);
std::string load_text(const std::string& path);

std::string gradient_to_json(const AdjointState& grads);
std::string gradient_to_json(const ScheduledAdjointResult& grads);

std::string weights_to_json(const Vec& theta);
Vec weights_from_json(const std::string& text);

std::string convergence_csv(const std::vector<ConvergenceRow>& rows,
                            const std::string& solver, int order,
                            ProcessKind kind);

std::string loss_history_csv(const OptimizeResult& result);
std::string optimize_result_json(const OptimizeResult& result);

std::string cycle_report_json(int n_steps, int dim, double max_abs_error);

}  // namespace diffadjoint
