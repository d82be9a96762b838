#pragma once

#include <memory>

#include "diffadjoint/model.hpp"
#include "diffadjoint/types.hpp"

namespace diffadjoint::testing {

/// eps identically zero with vanishing Jacobians in every argument; the
/// linear-term-only model used to check that composed steps are exact.
class ZeroModel final : public NoisePredictionModel {
 public:
  ZeroModel(int dim_x, int dim_z = 1, int dim_theta = 1)
      : dim_x_(dim_x), dim_z_(dim_z), dim_theta_(dim_theta) {}

  int dim_x() const override { return dim_x_; }
  int dim_z() const override { return dim_z_; }
  int dim_theta() const override { return dim_theta_; }

  Vec eps(const Vec& x, const Vec& z, double t) const override {
    check_dims(x, z, t);
    return Vec::Zero(dim_x_);
  }
  VjpBundle vjp(const Vec&, const Vec& x, const Vec& z,
                double t) const override {
    check_dims(x, z, t);
    return {Vec::Zero(dim_x_), Vec::Zero(dim_z_), Vec::Zero(dim_theta_)};
  }
  Vec theta() const override { return Vec::Zero(dim_theta_); }
  std::unique_ptr<NoisePredictionModel> with_theta(const Vec&) const override {
    return std::make_unique<ZeroModel>(dim_x_, dim_z_, dim_theta_);
  }

 private:
  int dim_x_;
  int dim_z_;
  int dim_theta_;
};

inline double rel_err(const Vec& got, const Vec& want) {
  const double denom = want.cwiseAbs().maxCoeff();
  if (denom == 0.0) return got.cwiseAbs().maxCoeff();
  return (got - want).cwiseAbs().maxCoeff() / denom;
}

inline double rel_err(double got, double want) {
  if (want == 0.0) return std::abs(got);
  return std::abs(got - want) / std::abs(want);
}

}  // namespace diffadjoint::testing
