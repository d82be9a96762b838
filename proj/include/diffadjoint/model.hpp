#pragma once

#include <cstdint>
#include <memory>

#include "diffadjoint/schedule.hpp"
#include "diffadjoint/types.hpp"

namespace diffadjoint {

/// Reverse-mode products a^T d(eps)/d{x, z, theta} for a single cotangent a.
struct VjpBundle {
  Vec vjp_x;      // length dim_x
  Vec vjp_z;      // length dim_z
  Vec vjp_theta;  // length dim_theta
};

/// Noise-prediction model eps(x, z, t) with exact hand-written VJPs, so the
/// adjoint solvers need no external autodiff. Implementations are immutable
/// after construction; eps and vjp are pure and thread-safe.
class NoisePredictionModel {
 public:
  virtual ~NoisePredictionModel() = default;

  virtual int dim_x() const = 0;
  virtual int dim_z() const = 0;
  virtual int dim_theta() const = 0;

  virtual Vec eps(const Vec& x, const Vec& z, double t) const = 0;
  virtual VjpBundle vjp(const Vec& a, const Vec& x, const Vec& z,
                        double t) const = 0;

  virtual Vec theta() const = 0;

  /// Copy of this model with replaced flattened parameters.
  virtual std::unique_ptr<NoisePredictionModel> with_theta(
      const Vec& theta) const = 0;

 protected:
  void check_dims(const Vec& x, const Vec& z, double t) const;
};

/// Exact scaled score for data ~ N(mu, c^2 I):
///   eps(x, z, t) = sigma_t (x - alpha_t z) / (alpha_t^2 c^2 + sigma_t^2),
/// where the conditioning z plays the role of the data mean and the single
/// parameter theta = (c) plays the data scale. All three Jacobians are
/// scalar multiples of the identity (or rank-one for c), giving closed-form
/// reference gradients on every adjoint channel.
class AnalyticGaussianModel final : public NoisePredictionModel {
 public:
  AnalyticGaussianModel(VpSchedule sched, Vec mu, double c);

  int dim_x() const override { return static_cast<int>(mu_.size()); }
  int dim_z() const override { return static_cast<int>(mu_.size()); }
  int dim_theta() const override { return 1; }

  Vec eps(const Vec& x, const Vec& z, double t) const override;
  VjpBundle vjp(const Vec& a, const Vec& x, const Vec& z,
                double t) const override;

  Vec theta() const override;
  std::unique_ptr<NoisePredictionModel> with_theta(
      const Vec& theta) const override;

  const Vec& mu() const { return mu_; }
  double c() const { return c_; }
  const VpSchedule& schedule() const { return sched_; }

 private:
  VpSchedule sched_;
  Vec mu_;
  double c_;
};

/// One-hidden-layer tanh network eps(x, z, t): input [x; z; tau(t)] where
/// tau is lambda_t rescaled to [-1, 1] over the schedule's lambda range.
/// theta flattens [vec(W1) | b1 | vec(W2) | b2] column-major.
class TinyMlpModel final : public NoisePredictionModel {
 public:
  /// Seeded N(0, 1/sqrt(fan_in)) init, scaled by `weight_scale`.
  TinyMlpModel(VpSchedule sched, int dim_x, int dim_z, int hidden,
               std::uint64_t seed, double weight_scale = 1.0);
  TinyMlpModel(VpSchedule sched, int dim_x, int dim_z, int hidden,
               const Vec& theta);

  int dim_x() const override { return dim_x_; }
  int dim_z() const override { return dim_z_; }
  int dim_theta() const override;

  Vec eps(const Vec& x, const Vec& z, double t) const override;
  VjpBundle vjp(const Vec& a, const Vec& x, const Vec& z,
                double t) const override;

  Vec theta() const override;
  std::unique_ptr<NoisePredictionModel> with_theta(
      const Vec& theta) const override;

  int hidden() const { return hidden_; }
  const VpSchedule& schedule() const { return sched_; }

 private:
  double time_feature(double t) const;

  VpSchedule sched_;
  int dim_x_;
  int dim_z_;
  int hidden_;
  double lam_lo_;
  double lam_hi_;
  Mat w1_;  // hidden x (dim_x + dim_z + 1)
  Vec b1_;
  Mat w2_;  // dim_x x hidden
  Vec b2_;
};

}  // namespace diffadjoint
