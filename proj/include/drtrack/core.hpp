#pragma once

// Numerical kernels for composite online gradient descent on the setpoint
// tracking objective
//
//   F_t(mu) = (s_t - c_t^T mu)^2 + rho * ||<mu>_t||^2 + lambda * ||mu||_1
//
// All functions are pure; randomness is injected through a caller-owned
// uniform random bit generator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "drtrack/error.hpp"

namespace drtrack {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using VectorXd = Vector<double>;

/// Tolerance used to accept a perturbation direction as unit norm.
inline constexpr double kUnitNormTolerance = 1e-9;

/// Coordinate-wise interval constraint lo <= x <= hi.
template <typename Scalar = double>
struct Box {
  Vector<Scalar> lo;
  Vector<Scalar> hi;

  static Box symmetric(Eigen::Index n, Scalar radius) {
    return Box{Vector<Scalar>::Constant(n, -radius), Vector<Scalar>::Constant(n, radius)};
  }

  /// [delta - 1, 1 - delta]^n
  static Box shrunk(Eigen::Index n, Scalar delta) { return symmetric(n, Scalar(1) - delta); }

  Eigen::Index size() const { return lo.size(); }

  Scalar diameter() const { return (hi - lo).norm(); }

  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& x, Scalar tol = Scalar(0)) const {
    return x.size() == lo.size() && ((x.array() >= lo.array() - tol).all()) &&
           ((x.array() <= hi.array() + tol).all());
  }

  Box segment(Eigen::Index start, Eigen::Index n) const {
    return Box{lo.segment(start, n), hi.segment(start, n)};
  }

  void validate() const {
    require(lo.size() == hi.size(), ErrorCode::invalid_argument, "box bounds differ in length");
    require(lo.allFinite() && hi.allFinite(), ErrorCode::invalid_argument, "box bounds must be finite");
    require((lo.array() <= hi.array()).all(), ErrorCode::invalid_argument, "box requires lo <= hi");
  }
};

/// Running average <mu>_t of the signals played in rounds 1..t.
template <typename Scalar = double>
struct RunningMean {
  Vector<Scalar> mean;
  std::int64_t rounds = 0;

  static RunningMean zero(Eigen::Index n) { return RunningMean{Vector<Scalar>::Zero(n), 0}; }

  /// Mean that would result from appending `mu` as round t = rounds + 1.
  template <typename Derived>
  Vector<Scalar> preview(const Eigen::MatrixBase<Derived>& mu) const {
    const Scalar t = static_cast<Scalar>(rounds + 1);
    return (static_cast<Scalar>(rounds) * mean + mu) / t;
  }
};

struct LossParams {
  double rho = 0.0;
  double lambda = 0.0;

  void validate() const {
    require(rho >= 0.0 && std::isfinite(rho), ErrorCode::invalid_argument, "rho must be >= 0");
    require(lambda >= 0.0 && std::isfinite(lambda), ErrorCode::invalid_argument, "lambda must be >= 0");
  }
};

namespace detail {

template <typename A, typename B>
void check_same_length(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, const char* what) {
  require(a.size() == b.size(), ErrorCode::invalid_argument,
          std::string(what) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
              std::to_string(b.size()) + ")");
}

template <typename Scalar>
Scalar soft_threshold(Scalar y, Scalar threshold) {
  const Scalar magnitude = std::abs(y) - threshold;
  if (magnitude <= Scalar(0)) return Scalar(0);
  return y > Scalar(0) ? magnitude : -magnitude;
}

}  // namespace detail

/// (s_eff - c^T mu)^2
template <typename DerivedC, typename DerivedM>
typename DerivedC::Scalar tracking_loss(typename DerivedC::Scalar s_eff, const Eigen::MatrixBase<DerivedC>& c,
                                        const Eigen::MatrixBase<DerivedM>& mu) {
  detail::check_same_length(c, mu, "tracking_loss");
  const auto err = s_eff - c.dot(mu);
  return err * err;
}

/// f_t(mu): tracking loss plus rho * ||((t-1)<mu>_{t-1} + mu) / t||^2, where
/// `mean_prev` holds <mu>_{t-1} and t-1.
template <typename DerivedC, typename DerivedM>
typename DerivedC::Scalar smooth_loss(typename DerivedC::Scalar s_eff, const Eigen::MatrixBase<DerivedC>& c,
                                      const Eigen::MatrixBase<DerivedM>& mu, const LossParams& params,
                                      const RunningMean<typename DerivedC::Scalar>& mean_prev) {
  using Scalar = typename DerivedC::Scalar;
  detail::check_same_length(mu, mean_prev.mean, "smooth_loss");
  const Scalar track = tracking_loss(s_eff, c, mu);
  if (params.rho == 0.0) return track;
  return track + static_cast<Scalar>(params.rho) * mean_prev.preview(mu).squaredNorm();
}

/// Gradient of smooth_loss at mu for round t:
///   -2c(s_eff - c^T mu) + (2 rho / t) ((t-1)<mu>_{t-1} + mu) / t
template <typename DerivedC, typename DerivedM>
Vector<typename DerivedC::Scalar> full_gradient(typename DerivedC::Scalar s_eff,
                                                const Eigen::MatrixBase<DerivedC>& c,
                                                const Eigen::MatrixBase<DerivedM>& mu, const LossParams& params,
                                                const RunningMean<typename DerivedC::Scalar>& mean_prev,
                                                std::int64_t t) {
  using Scalar = typename DerivedC::Scalar;
  require(t >= 1, ErrorCode::invalid_argument, "full_gradient: round index must be >= 1");
  detail::check_same_length(c, mu, "full_gradient");
  detail::check_same_length(mu, mean_prev.mean, "full_gradient");
  const Scalar err = s_eff - c.dot(mu);
  Vector<Scalar> grad = Scalar(-2) * err * c;
  if (params.rho != 0.0) {
    const Scalar td = static_cast<Scalar>(t);
    const Vector<Scalar> mean_t = (static_cast<Scalar>(t - 1) * mean_prev.mean + mu) / td;
    grad += (Scalar(2) * static_cast<Scalar>(params.rho) / td) * mean_t;
  }
  return grad;
}

/// One-point gradient estimator (dim / delta) * f(mu + delta v) * v.
template <typename DerivedV>
Vector<typename DerivedV::Scalar> gradient_estimate(typename DerivedV::Scalar loss_value,
                                                    const Eigen::MatrixBase<DerivedV>& v, Eigen::Index dim,
                                                    typename DerivedV::Scalar delta) {
  using Scalar = typename DerivedV::Scalar;
  require(delta > Scalar(0), ErrorCode::invalid_argument, "gradient_estimate: delta must be > 0");
  require(dim >= 1, ErrorCode::invalid_argument, "gradient_estimate: dim must be >= 1");
  require(std::abs(v.norm() - Scalar(1)) <= static_cast<Scalar>(kUnitNormTolerance),
          ErrorCode::invalid_argument, "gradient_estimate: perturbation direction is not unit norm");
  return (static_cast<Scalar>(dim) / delta * loss_value) * v;
}

/// Uniform draw from the unit sphere in R^dim: normalized standard Gaussian,
/// with dim = 1 handled as a fair sign.
template <typename Scalar = double, typename Rng>
Vector<Scalar> sample_unit_sphere(Eigen::Index dim, Rng& rng) {
  require(dim >= 1, ErrorCode::invalid_argument, "sample_unit_sphere: dim must be >= 1");
  Vector<Scalar> v(dim);
  if (dim == 1) {
    std::bernoulli_distribution coin(0.5);
    v(0) = coin(rng) ? Scalar(1) : Scalar(-1);
    return v;
  }
  std::normal_distribution<Scalar> gauss(Scalar(0), Scalar(1));
  Scalar norm = Scalar(0);
  do {
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = gauss(rng);
    norm = v.norm();
  } while (norm == Scalar(0));
  return v / norm;
}

/// Closed-form minimizer of
///   eta g^T mu + 1/2 ||mu_t - mu||^2 + eta lambda ||mu||_1   over a box.
/// The objective is separable, so each coordinate is a soft-threshold of the
/// gradient step followed by a clip. Requires lo <= 0 <= hi everywhere.
template <typename DerivedM, typename DerivedG>
Vector<typename DerivedM::Scalar> prox_step(const Eigen::MatrixBase<DerivedM>& mu_t,
                                            const Eigen::MatrixBase<DerivedG>& grad,
                                            typename DerivedM::Scalar eta, typename DerivedM::Scalar lambda,
                                            const Box<typename DerivedM::Scalar>& box) {
  using Scalar = typename DerivedM::Scalar;
  detail::check_same_length(mu_t, grad, "prox_step");
  require(box.size() == mu_t.size(), ErrorCode::invalid_argument, "prox_step: box length mismatch");
  require(eta > Scalar(0), ErrorCode::invalid_argument, "prox_step: eta must be > 0");
  require(lambda >= Scalar(0), ErrorCode::invalid_argument, "prox_step: lambda must be >= 0");
  require((box.lo.array() <= Scalar(0)).all() && (box.hi.array() >= Scalar(0)).all(), ErrorCode::unsupported_box,
          "prox_step: closed form needs lo <= 0 <= hi on every coordinate");
  const Scalar threshold = eta * lambda;
  Vector<Scalar> out(mu_t.size());
  for (Eigen::Index i = 0; i < mu_t.size(); ++i) {
    const Scalar y = mu_t(i) - eta * grad(i);
    out(i) = std::clamp(detail::soft_threshold(y, threshold), box.lo(i), box.hi(i));
  }
  return out;
}

/// Euclidean projection onto [delta - 1, 1 - delta]^N (coordinate-wise clip).
template <typename DerivedM>
Vector<typename DerivedM::Scalar> project_shrunk_box(const Eigen::MatrixBase<DerivedM>& mu,
                                                     typename DerivedM::Scalar delta) {
  using Scalar = typename DerivedM::Scalar;
  require(delta > Scalar(0) && delta < Scalar(1), ErrorCode::invalid_argument,
          "project_shrunk_box: delta must lie in (0, 1)");
  const Scalar r = Scalar(1) - delta;
  return mu.cwiseMax(-r).cwiseMin(r);
}

/// Appends mu_t as round t = mean_prev.rounds + 1.
template <typename Scalar, typename DerivedM>
RunningMean<Scalar> running_mean_update(const RunningMean<Scalar>& mean_prev, const Eigen::MatrixBase<DerivedM>& mu_t) {
  require(mean_prev.rounds >= 0, ErrorCode::invalid_argument, "running_mean_update: negative round count");
  if (mean_prev.rounds == 0) {
    require(mean_prev.mean.size() == 0 || mean_prev.mean.size() == mu_t.size(), ErrorCode::invalid_argument,
            "running_mean_update: length mismatch");
    return RunningMean<Scalar>{mu_t, 1};
  }
  detail::check_same_length(mean_prev.mean, mu_t, "running_mean_update");
  return RunningMean<Scalar>{mean_prev.preview(mu_t), mean_prev.rounds + 1};
}

}  // namespace drtrack
