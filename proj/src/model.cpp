#include "diffadjoint/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "diffadjoint/rng.hpp"

namespace diffadjoint {

void NoisePredictionModel::check_dims(const Vec& x, const Vec& z,
                                      double t) const {
  if (x.size() != dim_x()) {
    throw std::invalid_argument("model: x has length " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(dim_x()));
  }
  if (z.size() != dim_z()) {
    throw std::invalid_argument("model: z has length " +
                                std::to_string(z.size()) + ", expected " +
                                std::to_string(dim_z()));
  }
  if (!(t >= 0.0 && t <= VpSchedule::t_end)) {
    throw std::domain_error("model: t = " + std::to_string(t) +
                            " outside [0, 1]");
  }
}

AnalyticGaussianModel::AnalyticGaussianModel(VpSchedule sched, Vec mu, double c)
    : sched_(sched), mu_(std::move(mu)), c_(c) {
  if (mu_.size() < 1) {
    throw std::invalid_argument("AnalyticGaussianModel: empty mu");
  }
}

Vec AnalyticGaussianModel::eps(const Vec& x, const Vec& z, double t) const {
  check_dims(x, z, t);
  const double a = sched_.alpha(t);
  const double s = sched_.sigma(t);
  const double denom = a * a * c_ * c_ + s * s;
  return (s / denom) * (x - a * z);
}

VjpBundle AnalyticGaussianModel::vjp(const Vec& a_cot, const Vec& x,
                                     const Vec& z, double t) const {
  check_dims(x, z, t);
  if (a_cot.size() != dim_x()) {
    throw std::invalid_argument("vjp: cotangent length mismatch");
  }
  const double a = sched_.alpha(t);
  const double s = sched_.sigma(t);
  const double denom = a * a * c_ * c_ + s * s;
  VjpBundle out;
  out.vjp_x = (s / denom) * a_cot;
  out.vjp_z = (-s * a / denom) * a_cot;
  // d(eps)/dc = -2 a^2 c sigma (x - alpha z) / denom^2
  out.vjp_theta = Vec::Constant(
      1, -2.0 * a * a * c_ * s / (denom * denom) * a_cot.dot(x - a * z));
  return out;
}

Vec AnalyticGaussianModel::theta() const { return Vec::Constant(1, c_); }

std::unique_ptr<NoisePredictionModel> AnalyticGaussianModel::with_theta(
    const Vec& theta) const {
  if (theta.size() != 1) {
    throw std::invalid_argument("AnalyticGaussianModel: theta must be length 1");
  }
  return std::make_unique<AnalyticGaussianModel>(sched_, mu_, theta[0]);
}

TinyMlpModel::TinyMlpModel(VpSchedule sched, int dim_x, int dim_z, int hidden,
                           std::uint64_t seed, double weight_scale)
    : sched_(sched),
      dim_x_(dim_x),
      dim_z_(dim_z),
      hidden_(hidden),
      lam_lo_(sched.lambda(VpSchedule::t_end)),
      lam_hi_(sched.lambda(sched.t_eps)) {
  if (dim_x < 1 || dim_z < 1 || hidden < 1) {
    throw std::invalid_argument("TinyMlpModel: dims must be positive");
  }
  const int in = dim_x_ + dim_z_ + 1;
  CounterRng rng(seed, /*stream=*/0x6d6c70);
  w1_ = Mat(hidden_, in);
  for (Eigen::Index j = 0; j < w1_.cols(); ++j)
    for (Eigen::Index i = 0; i < w1_.rows(); ++i)
      w1_(i, j) = weight_scale * rng.next_normal() / std::sqrt(double(in));
  b1_ = Vec::Zero(hidden_);
  w2_ = Mat(dim_x_, hidden_);
  for (Eigen::Index j = 0; j < w2_.cols(); ++j)
    for (Eigen::Index i = 0; i < w2_.rows(); ++i)
      w2_(i, j) = weight_scale * rng.next_normal() / std::sqrt(double(hidden_));
  b2_ = Vec::Zero(dim_x_);
}

TinyMlpModel::TinyMlpModel(VpSchedule sched, int dim_x, int dim_z, int hidden,
                           const Vec& theta)
    : sched_(sched),
      dim_x_(dim_x),
      dim_z_(dim_z),
      hidden_(hidden),
      lam_lo_(sched.lambda(VpSchedule::t_end)),
      lam_hi_(sched.lambda(sched.t_eps)) {
  const int in = dim_x_ + dim_z_ + 1;
  if (theta.size() != dim_theta()) {
    throw std::invalid_argument("TinyMlpModel: theta has length " +
                                std::to_string(theta.size()) + ", expected " +
                                std::to_string(dim_theta()));
  }
  Eigen::Index off = 0;
  w1_ = Eigen::Map<const Mat>(theta.data() + off, hidden_, in);
  off += hidden_ * in;
  b1_ = theta.segment(off, hidden_);
  off += hidden_;
  w2_ = Eigen::Map<const Mat>(theta.data() + off, dim_x_, hidden_);
  off += dim_x_ * hidden_;
  b2_ = theta.segment(off, dim_x_);
}

int TinyMlpModel::dim_theta() const {
  const int in = dim_x_ + dim_z_ + 1;
  return hidden_ * in + hidden_ + dim_x_ * hidden_ + dim_x_;
}

double TinyMlpModel::time_feature(double t) const {
  return 2.0 * (sched_.lambda(t) - lam_lo_) / (lam_hi_ - lam_lo_) - 1.0;
}

Vec TinyMlpModel::eps(const Vec& x, const Vec& z, double t) const {
  check_dims(x, z, t);
  Vec u(dim_x_ + dim_z_ + 1);
  u << x, z, time_feature(t);
  const Vec h1 = (w1_ * u + b1_).array().tanh().matrix();
  return w2_ * h1 + b2_;
}

VjpBundle TinyMlpModel::vjp(const Vec& a, const Vec& x, const Vec& z,
                            double t) const {
  check_dims(x, z, t);
  if (a.size() != dim_x_) {
    throw std::invalid_argument("vjp: cotangent length mismatch");
  }
  Vec u(dim_x_ + dim_z_ + 1);
  u << x, z, time_feature(t);
  const Vec h1 = (w1_ * u + b1_).array().tanh().matrix();
  const Vec grad_pre =
      (w2_.transpose() * a).cwiseProduct((1.0 - h1.array().square()).matrix());
  const Vec grad_u = w1_.transpose() * grad_pre;

  VjpBundle out;
  out.vjp_x = grad_u.head(dim_x_);
  out.vjp_z = grad_u.segment(dim_x_, dim_z_);
  out.vjp_theta = Vec(dim_theta());
  Eigen::Index off = 0;
  const Mat grad_w1 = grad_pre * u.transpose();
  out.vjp_theta.segment(off, grad_w1.size()) =
      Eigen::Map<const Vec>(grad_w1.data(), grad_w1.size());
  off += grad_w1.size();
  out.vjp_theta.segment(off, hidden_) = grad_pre;
  off += hidden_;
  const Mat grad_w2 = a * h1.transpose();
  out.vjp_theta.segment(off, grad_w2.size()) =
      Eigen::Map<const Vec>(grad_w2.data(), grad_w2.size());
  off += grad_w2.size();
  out.vjp_theta.segment(off, dim_x_) = a;
  return out;
}

Vec TinyMlpModel::theta() const {
  Vec th(dim_theta());
  Eigen::Index off = 0;
  th.segment(off, w1_.size()) = Eigen::Map<const Vec>(w1_.data(), w1_.size());
  off += w1_.size();
  th.segment(off, hidden_) = b1_;
  off += hidden_;
  th.segment(off, w2_.size()) = Eigen::Map<const Vec>(w2_.data(), w2_.size());
  off += w2_.size();
  th.segment(off, dim_x_) = b2_;
  return th;
}

std::unique_ptr<NoisePredictionModel> TinyMlpModel::with_theta(
    const Vec& theta) const {
  return std::make_unique<TinyMlpModel>(sched_, dim_x_, dim_z_, hidden_, theta);
}

}  // namespace diffadjoint
