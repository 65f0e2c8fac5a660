#pragma once

// Objectives of the two-layer linear network x -> W2 W1 x:
//
//   f(Z)   = 1/2 ||W2 W1 X - Y||_F^2
//   rho(Z) = ||W2^T W2 - W1 X X^T W1^T||_F^2
//   g(Z)   = f(Z) + mu/4 rho(Z)
//   h(Z)   = f(Z) + mu/4 ||W2^T W2 - W1 W1^T||_F^2
//
// together with the gradient of g, its Hessian quadratic form, and
// finite-difference oracles for both.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "saddlescape/decompositions.hpp"
#include "saddlescape/error.hpp"
#include "saddlescape/matrix.hpp"

namespace saddlescape {

/// Training pair with cached decompositions. X is d0 x N and must have full
/// row rank; Y is d2 x N.
class Dataset {
 public:
  Dataset(Matrix x, Matrix y) : x_(std::move(x)), y_(std::move(y)) {
    if (x_.empty() || y_.rows() == 0) throw Error(Errc::BadDims, "empty training data");
    if (x_.cols() != y_.cols()) {
      throw Error(Errc::ShapeMismatch, "X is " + shape_string(x_) + " but Y is " + shape_string(y_));
    }
    if (x_.cols() < x_.rows()) throw Error(Errc::RankDeficient, "N < d0, X cannot have full row rank");
    if (!x_.all_finite() || !y_.all_finite()) throw Error(Errc::NonFinite, "training data is not finite");

    svd_x_ = reduced_svd(x_);
    if (svd_x_.rank() != x_.rows()) {
      throw Error(Errc::RankDeficient, "X has rank " + std::to_string(svd_x_.rank()) + " < d0 = " +
                                           std::to_string(x_.rows()));
    }
    xxt_ = x_ * x_.transpose();
    y_tilde_ = y_ * svd_x_.V;
    try {
      svd_y_tilde_ = reduced_svd(y_tilde_);
    } catch (const Error& e) {
      if (e.code() != Errc::ZeroMatrix) throw;
      svd_y_tilde_ = SvdTriple{Matrix(y_tilde_.rows(), 0), {}, Matrix(y_tilde_.cols(), 0)};
    }

    sigma_inv_ut_ = svd_x_.U.transpose();
    u_sigma_ = svd_x_.U;
    for (std::size_t i = 0; i < d0(); ++i) {
      for (std::size_t j = 0; j < d0(); ++j) {
        sigma_inv_ut_(i, j) /= svd_x_.S[i];
        u_sigma_(j, i) *= svd_x_.S[i];
      }
    }
  }

  const Matrix& X() const noexcept { return x_; }
  const Matrix& Y() const noexcept { return y_; }
  const Matrix& XXt() const noexcept { return xxt_; }
  /// Reduced SVD of X: U (d0 x d0), Sigma, V (N x d0).
  const SvdTriple& svd_x() const noexcept { return svd_x_; }
  /// Y V, d2 x d0.
  const Matrix& y_tilde() const noexcept { return y_tilde_; }
  /// Reduced SVD of Y V: P, Lambda (descending), Q. Empty when Y V = 0.
  const SvdTriple& svd_y_tilde() const noexcept { return svd_y_tilde_; }
  /// Sigma^{-1} U^T.
  const Matrix& sigma_inv_ut() const noexcept { return sigma_inv_ut_; }
  /// U Sigma.
  const Matrix& u_sigma() const noexcept { return u_sigma_; }

  std::size_t d0() const noexcept { return x_.rows(); }
  std::size_t d2() const noexcept { return y_.rows(); }
  std::size_t samples() const noexcept { return x_.cols(); }
  std::size_t rank() const noexcept { return svd_y_tilde_.rank(); }
  const Vector& lambdas() const noexcept { return svd_y_tilde_.S; }

  /// 1 + ||Y||_F ||X||_F, the reference magnitude for gradient tolerances.
  double scale() const { return 1.0 + y_.norm() * x_.norm(); }

  /// sum_i sigma_i^{-2}.
  double inverse_sigma_sq_sum() const {
    double s = 0.0;
    for (double sigma : svd_x_.S) s += 1.0 / (sigma * sigma);
    return s;
  }

 private:
  Matrix x_, y_, xxt_, y_tilde_, sigma_inv_ut_, u_sigma_;
  SvdTriple svd_x_, svd_y_tilde_;
};

/// The variable Z = [W2; W1^T]: W2 is d2 x d1, W1 is d1 x d0.
struct FactorPair {
  Matrix w2;
  Matrix w1;

  std::size_t hidden() const noexcept { return w2.cols(); }

  static FactorPair zeros(std::size_t d2, std::size_t d1, std::size_t d0) {
    return {Matrix(d2, d1), Matrix(d1, d0)};
  }

  friend bool operator==(const FactorPair&, const FactorPair&) = default;
};

/// A perturbation of a FactorPair, same shapes.
struct Direction {
  Matrix delta2;
  Matrix delta1;

  double squared_norm() const noexcept { return delta1.squared_norm() + delta2.squared_norm(); }
  double norm() const noexcept { return std::sqrt(squared_norm()); }

  friend bool operator==(const Direction&, const Direction&) = default;
};

/// Z + t D.
inline FactorPair displaced(const FactorPair& z, const Direction& d, double t) {
  FactorPair out = z;
  out.w2.add_scaled(t, d.delta2);
  out.w1.add_scaled(t, d.delta1);
  return out;
}

inline Direction scaled(Direction d, double s) {
  d.delta2 *= s;
  d.delta1 *= s;
  return d;
}

/// Flattening used by the dense Hessian: delta2 row-major, then delta1 row-major.
inline Vector flatten(const Direction& d) {
  Vector v(d.delta2.values().begin(), d.delta2.values().end());
  v.insert(v.end(), d.delta1.values().begin(), d.delta1.values().end());
  return v;
}

inline Direction unflatten(std::span<const double> v, std::size_t d2, std::size_t d1, std::size_t d0) {
  if (v.size() != d1 * (d2 + d0)) throw Error(Errc::ShapeMismatch, "flat direction has wrong length");
  const std::size_t split = d2 * d1;
  return {Matrix::from_values(d2, d1, Vector(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(split))),
          Matrix::from_values(d1, d0, Vector(v.begin() + static_cast<std::ptrdiff_t>(split), v.end()))};
}

namespace detail {

inline void check_shapes(const FactorPair& z, const Dataset& data) {
  const std::size_t d1 = z.w2.cols();
  if (z.w2.rows() != data.d2() || z.w1.rows() != d1 || z.w1.cols() != data.d0()) {
    throw Error(Errc::ShapeMismatch, "W2 " + shape_string(z.w2) + ", W1 " + shape_string(z.w1) + " against d0=" +
                                         std::to_string(data.d0()) + ", d2=" + std::to_string(data.d2()));
  }
}

inline void check_shapes(const FactorPair& z, const Direction& d) {
  if (d.delta2.rows() != z.w2.rows() || d.delta2.cols() != z.w2.cols() || d.delta1.rows() != z.w1.rows() ||
      d.delta1.cols() != z.w1.cols()) {
    throw Error(Errc::ShapeMismatch, "direction does not match factor shapes");
  }
}

inline void check_mu(double mu) {
  if (!(mu >= 0.0)) throw Error(Errc::NegativeMu, "mu must be >= 0");
}

}  // namespace detail

/// W2 W1 X - Y.
inline Matrix residual(const FactorPair& z, const Dataset& data) {
  detail::check_shapes(z, data);
  return z.w2 * (z.w1 * data.X()) - data.Y();
}

/// W2^T W2 - W1 X X^T W1^T; zero exactly when Z is balanced.
inline Matrix imbalance(const FactorPair& z, const Dataset& data) {
  detail::check_shapes(z, data);
  return z.w2.transpose() * z.w2 - z.w1 * data.XXt() * z.w1.transpose();
}

inline double objective_f(const FactorPair& z, const Dataset& data) {
  return 0.5 * residual(z, data).squared_norm();
}

inline double regularizer_rho(const FactorPair& z, const Dataset& data) {
  return imbalance(z, data).squared_norm();
}

inline double objective_g(const FactorPair& z, const Dataset& data, double mu) {
  detail::check_mu(mu);
  const double f = objective_f(z, data);
  return mu == 0.0 ? f : f + 0.25 * mu * regularizer_rho(z, data);
}

/// Balanced objective with the data-independent regularizer. Evaluation only.
inline double objective_h(const FactorPair& z, const Dataset& data, double mu) {
  detail::check_mu(mu);
  const double f = objective_f(z, data);
  const Matrix gap = z.w2.transpose() * z.w2 - z.w1 * z.w1.transpose();
  return f + 0.25 * mu * gap.squared_norm();
}

/// Gradient of g. mu = 0 gives the gradient of f.
inline Direction grad_g(const FactorPair& z, const Dataset& data, double mu) {
  detail::check_mu(mu);
  const Matrix rxt = residual(z, data) * data.X().transpose();  // (W2 W1 X - Y) X^T
  Direction g{rxt * z.w1.transpose(), z.w2.transpose() * rxt};
  if (mu != 0.0) {
    const Matrix m = imbalance(z, data);
    g.delta2.add_scaled(mu, z.w2 * m);
    g.delta1.add_scaled(-mu, m * z.w1 * data.XXt());
  }
  return g;
}

/// f, rho, g and the gradient of g from one pass over the data.
struct Evaluation {
  double f;
  double rho;
  double g;
  Direction grad;
};

inline Evaluation evaluate(const FactorPair& z, const Dataset& data, double mu) {
  detail::check_mu(mu);
  const Matrix r = residual(z, data);
  const Matrix rxt = r * data.X().transpose();
  const Matrix m = imbalance(z, data);
  Evaluation e{0.5 * r.squared_norm(), m.squared_norm(), 0.0, {rxt * z.w1.transpose(), z.w2.transpose() * rxt}};
  e.g = e.f + 0.25 * mu * e.rho;
  if (mu != 0.0) {
    e.grad.delta2.add_scaled(mu, z.w2 * m);
    e.grad.delta1.add_scaled(-mu, m * z.w1 * data.XXt());
  }
  return e;
}

inline double grad_norm(const FactorPair& z, const Dataset& data, double mu) {
  return grad_g(z, data, mu).norm();
}

/// Second directional derivative of g at Z along D. Always the full bilinear
/// form, so it is exact away from critical points as well.
inline double hessian_quadform_g(const FactorPair& z, const Direction& d, const Dataset& data, double mu) {
  detail::check_mu(mu);
  detail::check_shapes(z, data);
  detail::check_shapes(z, d);
  const Matrix& x = data.X();
  const Matrix linear = (z.w2 * d.delta1 + d.delta2 * z.w1) * x;
  const Matrix rxt = residual(z, data) * x.transpose();
  double q = linear.squared_norm() + 2.0 * inner(d.delta2 * d.delta1, rxt);
  if (mu != 0.0) {
    const Matrix& xxt = data.XXt();
    const Matrix m = imbalance(z, data);
    const Matrix second = d.delta2.transpose() * d.delta2 - d.delta1 * xxt * d.delta1.transpose();
    const Matrix w2t_d2 = z.w2.transpose() * d.delta2;
    const Matrix w1_xxt_d1t = z.w1 * xxt * d.delta1.transpose();
    const Matrix first = w2t_d2 + w2t_d2.transpose() - w1_xxt_d1t - w1_xxt_d1t.transpose();
    q += mu * (inner(m, second) + 0.5 * first.squared_norm());
  }
  return q;
}

inline constexpr std::size_t kMaxDenseHessian = 4096;

/// Dense Hessian of g in the flatten() coordinates, assembled by polarization
/// of the quadratic form: H(u, v) = (q(u + v) - q(u - v)) / 4.
inline Matrix assemble_hessian(const FactorPair& z, const Dataset& data, double mu) {
  detail::check_shapes(z, data);
  const std::size_t d2 = data.d2(), d1 = z.hidden(), d0 = data.d0();
  const std::size_t n = d1 * (d2 + d0);
  if (n > kMaxDenseHessian) throw Error(Errc::TooLarge, "dense Hessian of size " + std::to_string(n));
  Matrix h(n, n);
  Vector e(n, 0.0);
  auto quad = [&](const Vector& v) { return hessian_quadform_g(z, unflatten(v, d2, d1, d0), data, mu); };
  for (std::size_t i = 0; i < n; ++i) {
    e.assign(n, 0.0);
    e[i] = 1.0;
    h(i, i) = quad(e);
    for (std::size_t j = i + 1; j < n; ++j) {
      e[j] = 1.0;
      const double plus = quad(e);
      e[j] = -1.0;
      const double minus = quad(e);
      e[j] = 0.0;
      h(i, j) = h(j, i) = 0.25 * (plus - minus);
    }
  }
  return h;
}

/// Smallest Hessian eigenvalue and its unit eigenvector as a Direction.
struct CurvatureProbe {
  double min_eigenvalue;
  Direction direction;
};

inline CurvatureProbe min_curvature(const FactorPair& z, const Dataset& data, double mu) {
  const auto eig = sym_eig(assemble_hessian(z, data, mu));
  return {eig.values.front(), unflatten(eig.vectors.column(0), data.d2(), z.hidden(), data.d0())};
}

/// Max entrywise error between grad_g and central differences of g, relative
/// to max(1, |analytic entry|).
inline double fd_grad_check(const FactorPair& z, const Dataset& data, double mu, double step = 1e-5) {
  if (!(step >= 1e-7 && step <= 1e-3)) throw Error(Errc::InvalidArgument, "finite-difference step out of range");
  const Direction analytic = grad_g(z, data, mu);
  double worst = 0.0;
  auto probe = [&](Matrix FactorPair::*block, const Matrix& exact) {
    FactorPair zp = z;
    for (std::size_t k = 0; k < exact.size(); ++k) {
      double& entry = (zp.*block).values()[k];
      const double saved = entry;
      entry = saved + step;
      const double up = objective_g(zp, data, mu);
      entry = saved - step;
      const double down = objective_g(zp, data, mu);
      entry = saved;
      const double fd = (up - down) / (2.0 * step);
      const double a = exact.values()[k];
      worst = std::max(worst, std::abs(fd - a) / std::max(1.0, std::abs(a)));
    }
  };
  probe(&FactorPair::w2, analytic.delta2);
  probe(&FactorPair::w1, analytic.delta1);
  return worst;
}

/// Relative gap between the quadratic form and the second central difference
/// (g(Z + tD) - 2 g(Z) + g(Z - tD)) / t^2, relative to max(1, |quadform|).
inline double fd_quadform_check(const FactorPair& z, const Direction& d, const Dataset& data, double mu,
                                double t = 1e-4) {
  const double exact = hessian_quadform_g(z, d, data, mu);
  const double fd =
      (objective_g(displaced(z, d, t), data, mu) - 2.0 * objective_g(z, data, mu) +
       objective_g(displaced(z, d, -t), data, mu)) /
      (t * t);
  return std::abs(fd - exact) / std::max(1.0, std::abs(exact));
}

}  // namespace saddlescape
