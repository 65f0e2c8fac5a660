#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "saddlescape/error.hpp"
#include "saddlescape/matrix.hpp"

namespace saddlescape {

/// Reduced SVD A = U diag(S) V^T with S strictly positive and descending.
struct SvdTriple {
  Matrix U;  // m x k
  Vector S;  // k
  Matrix V;  // n x k

  std::size_t rank() const noexcept { return S.size(); }

  Matrix reconstruct() const {
    Matrix us = U;
    for (std::size_t i = 0; i < us.rows(); ++i)
      for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= S[j];
    return us * V.transpose();
  }
};

/// Full symmetric eigendecomposition, eigenvalues ascending; column i of
/// `vectors` pairs with values[i].
struct SymEig {
  Vector values;
  Matrix vectors;
};

namespace detail {

// Flips sign so the largest-magnitude entry is positive (first one wins ties).
inline bool needs_flip(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  return !v.empty() && v[best] < 0.0;
}

// One-sided (Hestenes) Jacobi on the columns of `a` (m x n, m >= n).
// On return the columns of `a` are mutually orthogonal and a_in = a * v^T.
inline void one_sided_jacobi(Matrix& a, Matrix& v) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  v = Matrix::identity(n);
  constexpr double eps = 1e-15;
  constexpr int max_sweeps = 80;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += a(i, p) * a(i, p);
          beta += a(i, q) * a(i, q);
          gamma += a(i, p) * a(i, q);
        }
        if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double ap = a(i, p);
          const double aq = a(i, q);
          a(i, p) = c * ap - s * aq;
          a(i, q) = s * ap + c * aq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v(i, p);
          const double vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) return;
  }
}

}  // namespace detail

/// Singular values below `drop_tol_factor * max(m, n) * sigma_max` are
/// treated as zero and removed. Left singular vectors are sign-normalized so
/// their largest-magnitude entry is positive.
inline SvdTriple reduced_svd(const Matrix& a, double drop_tol_factor = 1e-12) {
  if (a.empty()) throw Error(Errc::ZeroMatrix, "empty matrix");
  if (!a.all_finite()) throw Error(Errc::NonFinite, "SVD input is not finite");

  const bool wide = a.rows() < a.cols();
  Matrix work = wide ? a.transpose() : a;
  Matrix right;
  detail::one_sided_jacobi(work, right);

  const std::size_t m = work.rows();
  const std::size_t n = work.cols();
  Vector sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = norm2(work.column(j));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return sigma[i] > sigma[j]; });

  const double sigma_max = sigma[order[0]];
  const double cutoff = drop_tol_factor * static_cast<double>(std::max(a.rows(), a.cols())) * sigma_max;
  std::size_t k = 0;
  while (k < n && sigma[order[k]] > cutoff && sigma[order[k]] > 0.0) ++k;
  if (k == 0) throw Error(Errc::ZeroMatrix, "all singular values below drop tolerance");

  // In the tall frame: work = L diag(S) R^T with L = normalized columns.
  Matrix left(m, k), rv(n, k);
  Vector s(k);
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t j = order[c];
    s[c] = sigma[j];
    for (std::size_t i = 0; i < m; ++i) left(i, c) = work(i, j) / sigma[j];
    for (std::size_t i = 0; i < n; ++i) rv(i, c) = right(i, j);
  }

  SvdTriple out;
  out.S = std::move(s);
  out.U = wide ? std::move(rv) : std::move(left);
  out.V = wide ? std::move(left) : std::move(rv);
  for (std::size_t c = 0; c < k; ++c) {
    if (detail::needs_flip(out.U.column(c))) {
      for (std::size_t i = 0; i < out.U.rows(); ++i) out.U(i, c) = -out.U(i, c);
      for (std::size_t i = 0; i < out.V.rows(); ++i) out.V(i, c) = -out.V(i, c);
    }
  }
  return out;
}

/// Cyclic Jacobi eigensolver. The input is symmetrized as (A + A^T)/2 first.
inline SymEig sym_eig(const Matrix& input) {
  if (input.rows() != input.cols()) throw Error(Errc::NotSquare, "sym_eig on " + shape_string(input));
  const std::size_t n = input.rows();
  Matrix a = input;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (input(i, j) + input(j, i));
  Matrix v = Matrix::identity(n);

  const double scale = a.norm();
  constexpr int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps && scale > 0.0; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (std::sqrt(off) <= 1e-16 * scale) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

  SymEig out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = a(order[c], order[c]);
    auto col = v.column(order[c]);
    if (detail::needs_flip(col))
      for (double& x : col) x = -x;
    out.vectors.set_column(c, col);
  }
  return out;
}

/// i.i.d. N(0, scale^2) entries.
template <class Rng>
Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& x : m.values()) x = scale * normal(rng);
  return m;
}

/// Q factor of a thin QR (classical Gram-Schmidt, applied twice) with the
/// diagonal of R forced positive. Columns of `a` must be linearly independent.
inline Matrix orthonormalize_columns(const Matrix& a) {
  Matrix q = a;
  for (std::size_t j = 0; j < q.cols(); ++j) {
    auto col = q.column(j);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < j; ++i) {
        const auto qi = q.column(i);
        const double proj = dot(qi, col);
        for (std::size_t r = 0; r < col.size(); ++r) col[r] -= proj * qi[r];
      }
    }
    const double nrm = norm2(col);
    if (nrm == 0.0) throw Error(Errc::RankDeficient, "columns are linearly dependent");
    for (double& x : col) x /= nrm;
    q.set_column(j, col);
  }
  return q;
}

/// A random element of O_r: Gaussian sample followed by sign-fixed QR.
inline Matrix random_orthonormal(std::size_t r, std::uint64_t seed) {
  if (r == 0) throw Error(Errc::InvalidArgument, "random_orthonormal needs r >= 1");
  std::mt19937_64 rng(seed);
  for (;;) {
    Matrix g = gaussian_matrix(r, r, rng);
    try {
      return orthonormalize_columns(g);
    } catch (const Error&) {
      // measure-zero event; draw again
    }
  }
}

}  // namespace saddlescape
