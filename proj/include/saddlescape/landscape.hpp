#pragma once

// Critical points of g in closed form, their classification into global
// minima and strict saddles, explicit negative-curvature directions, and the
// balanced lift used to transfer those results to the unregularized f.
//
// Notation: X = U Sigma V^T (reduced), Y V = P Lambda Q^T = sum_j lambda_j p_j q_j^T.
// Every critical point of g has the form
//   W2 = W2~ R^T,  W1 = R W1~ Sigma^{-1} U^T,  R orthogonal,
// where column i of W2~ and row i of W1~ are either both zero or
// +-sqrt(lambda_j) (p_j, q_j), with each j used at most once.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "saddlescape/decompositions.hpp"
#include "saddlescape/error.hpp"
#include "saddlescape/matrix.hpp"
#include "saddlescape/model.hpp"
#include "saddlescape/tolerances.hpp"

namespace saddlescape {

/// One hidden unit's choice: singular pair `index` (0-based) with a sign.
struct SlotPick {
  std::size_t index = 0;
  int sign = 1;

  friend bool operator==(const SlotPick&, const SlotPick&) = default;
};

/// Identifies one element of the critical set: a pick (or nothing) per
/// hidden unit, and a d1 x d1 orthogonal rotation.
struct CriticalPointSpec {
  std::vector<std::optional<SlotPick>> slots;
  Matrix rotation;

  /// e.g. "[(2,+),-]" with 1-based indices; '-' marks an empty slot. Rotated
  /// specs carry a trailing "R".
  std::string label() const {
    std::string s = "[";
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (i > 0) s += ",";
      if (slots[i]) {
        s += "(" + std::to_string(slots[i]->index + 1) + (slots[i]->sign > 0 ? ",+)" : ",-)");
      } else {
        s += "-";
      }
    }
    s += "]";
    if (rotation != Matrix::identity(slots.size())) s += "R";
    return s;
  }

  static CriticalPointSpec empty(std::size_t d1) {
    return {std::vector<std::optional<SlotPick>>(d1), Matrix::identity(d1)};
  }

  friend bool operator==(const CriticalPointSpec&, const CriticalPointSpec&) = default;
};

enum class PointKind { GlobalMin, StrictSaddle, Unclassified };
enum class CaseTag { RankAtMostHidden, RankAboveHidden };
enum class CurvatureMethod { None, Constructive, LiftPullback, HessianEigen };

constexpr const char* to_string(PointKind k) {
  switch (k) {
    case PointKind::GlobalMin: return "GlobalMin";
    case PointKind::StrictSaddle: return "StrictSaddle";
    case PointKind::Unclassified: return "Unclassified";
  }
  return "?";
}

constexpr const char* to_string(CaseTag c) {
  return c == CaseTag::RankAtMostHidden ? "r<=d1" : "r>d1";
}

constexpr const char* to_string(CurvatureMethod m) {
  switch (m) {
    case CurvatureMethod::None: return "none";
    case CurvatureMethod::Constructive: return "constructive";
    case CurvatureMethod::LiftPullback: return "lift-pullback";
    case CurvatureMethod::HessianEigen: return "hessian-eigen";
  }
  return "?";
}

/// Result of classifying a critical point. For strict saddles `direction`
/// has strictly negative curvature; `rayleigh` is quadform / ||direction||^2
/// and `bound` is the closed-form upper bound on the smallest Hessian
/// eigenvalue (0 when only the sign is asserted).
struct Classification {
  PointKind kind = PointKind::Unclassified;
  CaseTag case_tag = CaseTag::RankAtMostHidden;
  CurvatureMethod method = CurvatureMethod::None;
  std::optional<Direction> direction;
  std::optional<double> quadform;
  std::optional<double> rayleigh;
  std::optional<double> bound;
  std::optional<std::size_t> escape_index;  // 0-based singular pair used
};

/// The escape direction together with the singular pair it was built from.
struct EscapeCertificate {
  Direction direction;
  std::size_t index;  // k, 0-based
  double lambda;      // lambda_k
};

/// Balanced factorization of the product W2 W1 (inner dimension = its rank).
struct LiftResult {
  FactorPair zbar;
  Vector theta;  // singular values of W2 W1 U Sigma
  Matrix phi;    // d2 x rank
  Matrix psi;    // d0 x rank
};

// ---------------------------------------------------------------------------
// Global optimum

/// Shared optimal value of f and g: best rank-min(d1, r) approximation error
/// of Y V, plus the part of Y outside the row space of X.
inline double global_min_value(const Dataset& data, std::size_t d1) {
  const Vector& lambda = data.lambdas();
  double tail = 0.0;
  for (std::size_t i = std::min(d1, lambda.size()); i < lambda.size(); ++i) tail += lambda[i] * lambda[i];
  const Matrix& v = data.svd_x().V;
  const Matrix outside = data.Y() - data.y_tilde() * v.transpose();
  return 0.5 * tail + 0.5 * outside.squared_norm();
}

// ---------------------------------------------------------------------------
// Enumeration

inline void validate_spec(const CriticalPointSpec& spec, std::size_t rank, std::size_t d1) {
  if (spec.slots.size() != d1) throw Error(Errc::InvalidSpec, "spec has wrong number of slots");
  if (spec.rotation.rows() != d1 || spec.rotation.cols() != d1 || orthonormality_defect(spec.rotation) > 1e-12) {
    throw Error(Errc::InvalidSpec, "rotation is not a " + std::to_string(d1) + "x" + std::to_string(d1) +
                                       " orthogonal matrix");
  }
  std::vector<bool> used(rank, false);
  for (const auto& slot : spec.slots) {
    if (!slot) continue;
    if (slot->index >= rank) throw Error(Errc::InvalidSpec, "singular pair index out of range");
    if (slot->sign != 1 && slot->sign != -1) throw Error(Errc::InvalidSpec, "sign must be +1 or -1");
    if (used[slot->index]) throw Error(Errc::InvalidSpec, "singular pair used twice");
    used[slot->index] = true;
  }
}

/// Builds the critical point described by `spec`.
inline FactorPair build_critical_point(const Dataset& data, std::size_t d1, const CriticalPointSpec& spec) {
  validate_spec(spec, data.rank(), d1);
  const SvdTriple& ysvd = data.svd_y_tilde();
  Matrix w2t(data.d2(), d1);  // W2~
  Matrix w1t(d1, data.d0());  // W1~
  for (std::size_t i = 0; i < d1; ++i) {
    if (!spec.slots[i]) continue;
    const std::size_t j = spec.slots[i]->index;
    const double amp = spec.slots[i]->sign * std::sqrt(ysvd.S[j]);
    for (std::size_t a = 0; a < data.d2(); ++a) w2t(a, i) = amp * ysvd.U(a, j);
    for (std::size_t b = 0; b < data.d0(); ++b) w1t(i, b) = amp * ysvd.V(b, j);
  }
  return {w2t * spec.rotation.transpose(), spec.rotation * w1t * data.sigma_inv_ut()};
}

namespace detail {

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  std::uint64_t c = 1;
  for (std::uint64_t i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

// Advances a strictly increasing combination of `c.size()` values from
// [0, n). Returns false after the last one.
inline bool next_combination(std::vector<std::size_t>& c, std::size_t n) {
  const std::size_t k = c.size();
  for (std::size_t i = k; i-- > 0;) {
    if (c[i] < n - k + i) {
      ++c[i];
      for (std::size_t j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
      return true;
    }
  }
  return false;
}

inline std::vector<std::size_t> first_combination(std::size_t k) {
  std::vector<std::size_t> c(k);
  for (std::size_t i = 0; i < k; ++i) c[i] = i;
  return c;
}

}  // namespace detail

inline constexpr std::uint64_t kMaxBaseSpecs = 100000;

/// Number of base specs: choose m singular pairs, their signs, and which m of
/// the d1 slots hold them (in increasing index order). Orderings within the
/// filled slots are permutations and therefore covered by R.
inline std::uint64_t count_base_specs(std::size_t rank, std::size_t d1) {
  std::uint64_t total = 0;
  for (std::size_t m = 0; m <= std::min(rank, d1); ++m) {
    total += detail::binomial(rank, m) * (std::uint64_t{1} << m) * detail::binomial(d1, m);
    if (total > kMaxBaseSpecs) return total;
  }
  return total;
}

/// Lazy stream over the critical-set parametrization. Each base spec (R = I)
/// is followed by `rotations` copies with seeded random rotations.
class SpecStream {
 public:
  SpecStream(std::size_t rank, std::size_t d1, std::size_t rotations, std::uint64_t seed)
      : rank_(rank), d1_(d1), rotations_(rotations), seed_(seed) {
    if (d1 == 0) throw Error(Errc::InvalidArgument, "hidden width must be positive");
    if (count_base_specs(rank, d1) > kMaxBaseSpecs) {
      throw Error(Errc::TooMany, "more than " + std::to_string(kMaxBaseSpecs) + " base specs");
    }
    reset_level(0);
  }

  std::optional<CriticalPointSpec> next() {
    if (done_) return std::nullopt;
    if (rotation_index_ > 0) {
      CriticalPointSpec s = base_;
      s.rotation = random_orthonormal(d1_, seed_ * 1000003ULL + emitted_base_ * 131ULL + rotation_index_);
      if (++rotation_index_ > rotations_) {
        rotation_index_ = 0;
        advance();
      }
      return s;
    }
    base_ = current();
    ++emitted_base_;
    if (rotations_ > 0) {
      rotation_index_ = 1;
    } else {
      advance();
    }
    return base_;
  }

  std::size_t base_count() const { return static_cast<std::size_t>(count_base_specs(rank_, d1_)); }

 private:
  CriticalPointSpec current() const {
    CriticalPointSpec s = CriticalPointSpec::empty(d1_);
    for (std::size_t i = 0; i < m_; ++i) {
      s.slots[slots_[i]] = SlotPick{indices_[i], (sign_mask_ >> i) & 1U ? -1 : 1};
    }
    return s;
  }

  void reset_level(std::size_t m) {
    m_ = m;
    indices_ = detail::first_combination(m);
    slots_ = detail::first_combination(m);
    sign_mask_ = 0;
  }

  void advance() {
    if (++sign_mask_ < (std::uint64_t{1} << m_)) return;
    sign_mask_ = 0;
    if (detail::next_combination(slots_, d1_)) return;
    slots_ = detail::first_combination(m_);
    if (detail::next_combination(indices_, rank_)) return;
    if (m_ + 1 <= std::min(rank_, d1_)) {
      reset_level(m_ + 1);
      return;
    }
    done_ = true;
  }

  std::size_t rank_, d1_, rotations_;
  std::uint64_t seed_;
  std::size_t m_ = 0;
  std::vector<std::size_t> indices_, slots_;
  std::uint64_t sign_mask_ = 0;
  std::size_t rotation_index_ = 0;
  std::uint64_t emitted_base_ = 0;
  CriticalPointSpec base_;
  bool done_ = false;
};

inline SpecStream iterate_all_specs(const Dataset& data, std::size_t d1, std::size_t include_rotations,
                                    std::uint64_t seed) {
  return SpecStream(data.rank(), d1, include_rotations, seed);
}

// ---------------------------------------------------------------------------
// Classification

/// Closed-form upper bound on lambda_min of the Hessian at a non-global
/// critical point, for hidden width d1.
inline double curvature_bound(const Dataset& data, std::size_t d1, const Tolerances& tol = {}) {
  const Vector& lambda = data.lambdas();
  const std::size_t r = lambda.size();
  const double denom = 1.0 + data.inverse_sigma_sq_sum();
  if (r == 0) return 0.0;
  if (r <= d1) return -2.0 * lambda[r - 1] / denom;
  const double pivot = lambda[d1 - 1];
  for (std::size_t j = d1; j < r; ++j) {
    if (lambda[j] < pivot * (1.0 - tol.tie)) return -2.0 * (pivot - lambda[j]) / denom;
  }
  return 0.0;  // everything below lambda_{d1} is tied with it
}

inline CaseTag case_of(const Dataset& data, std::size_t d1) {
  return data.rank() <= d1 ? CaseTag::RankAtMostHidden : CaseTag::RankAboveHidden;
}

inline bool matches_global_value(double value, double optimum, const Tolerances& tol) {
  return value - optimum <= tol.global_value * (1.0 + std::abs(optimum));
}

/// Which singular pairs of Y V appear in the critical point Z, read off from
/// p_j^T (W2 W1 U Sigma) q_j, which is lambda_j when pair j is present and 0
/// otherwise.
struct PairSelection {
  std::vector<std::size_t> included;
  std::vector<std::size_t> omitted;
};

inline PairSelection recover_selection(const FactorPair& z, const Dataset& data, const Tolerances& tol = {}) {
  const SvdTriple& ysvd = data.svd_y_tilde();
  const Matrix product = z.w2 * z.w1 * data.u_sigma();
  const double unit = std::max(1.0, ysvd.rank() > 0 ? ysvd.S[0] : 0.0);
  PairSelection sel;
  Matrix rebuilt(product.rows(), product.cols());
  for (std::size_t j = 0; j < ysvd.rank(); ++j) {
    const auto p = ysvd.U.column(j);
    const auto q = ysvd.V.column(j);
    const double c = dot(p, (product * column_matrix(q)).values());
    if (std::abs(c - ysvd.S[j]) <= tol.recovery * unit) {
      sel.included.push_back(j);
      rebuilt.add_scaled(ysvd.S[j], outer(p, q));
    } else if (std::abs(c) <= tol.recovery * unit) {
      sel.omitted.push_back(j);
    } else {
      throw Error(Errc::AmbiguousRecovery, "pair " + std::to_string(j + 1) + " has coefficient " +
                                               std::to_string(c) + " vs lambda " + std::to_string(ysvd.S[j]));
    }
  }
  if ((rebuilt - product).norm() > tol.recovery * unit * std::sqrt(static_cast<double>(ysvd.rank() + 1))) {
    throw Error(Errc::AmbiguousRecovery, "product is not a sum of singular pairs of Y V");
  }
  return sel;
}

/// Negative-curvature direction at a non-global critical point of g:
///   Delta2 = p_k b^T,  Delta1 = b q_k^T Sigma^{-1} U^T,
/// where k is the omitted singular pair with the largest lambda and b is a
/// unit vector minimizing b^T (W2^T W2 + W1 X X^T W1^T) b. With R the
/// rotation of Z, b = R alpha for alpha the corresponding eigenvector of
/// Z~^T Z~.
inline EscapeCertificate escape_certificate(const FactorPair& z, const Dataset& data, const Tolerances& tol = {}) {
  detail::check_shapes(z, data);
  const double unit = std::max(1.0, data.rank() > 0 ? data.lambdas()[0] : 0.0);
  if (grad_norm(z, data, 0.0) > tol.f_critical * data.scale() ||
      imbalance(z, data).norm() > tol.recovery * unit) {
    throw Error(Errc::NotCritical, "escape_direction needs a balanced critical point");
  }
  if (matches_global_value(objective_f(z, data), global_min_value(data, z.hidden()), tol)) {
    throw Error(Errc::IsGlobalMin, "point attains the global value");
  }
  const PairSelection sel = recover_selection(z, data, tol);
  if (sel.omitted.empty()) throw Error(Errc::AmbiguousRecovery, "no omitted singular pair");
  const std::size_t k = sel.omitted.front();

  const Matrix gram = z.w2.transpose() * z.w2 + z.w1 * data.XXt() * z.w1.transpose();
  const auto b = sym_eig(gram).vectors.column(0);
  const SvdTriple& ysvd = data.svd_y_tilde();
  const auto p = ysvd.U.column(k);
  const auto q = ysvd.V.column(k);
  Direction d{outer(p, b), outer(b, q) * data.sigma_inv_ut()};
  return {std::move(d), k, ysvd.S[k]};
}

inline Direction escape_direction(const FactorPair& z, const Dataset& data, const Tolerances& tol = {}) {
  return escape_certificate(z, data, tol).direction;
}

namespace detail {

inline Classification classify_by_hessian(const FactorPair& z, const Dataset& data, double mu, Classification c,
                                          const Tolerances& tol) {
  const CurvatureProbe probe = min_curvature(z, data, mu);
  c.method = CurvatureMethod::HessianEigen;
  if (probe.min_eigenvalue < -tol.negative_curvature) {
    c.kind = PointKind::StrictSaddle;
    c.direction = probe.direction;
    c.quadform = probe.min_eigenvalue;
    c.rayleigh = probe.min_eigenvalue;
  } else {
    c.kind = PointKind::Unclassified;
    c.rayleigh = probe.min_eigenvalue;
  }
  return c;
}

}  // namespace detail

/// Classifies a critical point of g. Global minima are detected by value;
/// everything else receives an explicit escape direction and the closed-form
/// curvature bound for its case. Falls back to the dense Hessian when the
/// singular-pair structure cannot be read off the point.
inline Classification classify(const FactorPair& z, const Dataset& data, double mu, const Tolerances& tol = {}) {
  detail::check_mu(mu);
  detail::check_shapes(z, data);
  if (grad_norm(z, data, mu) > tol.critical * data.scale()) {
    throw Error(Errc::NotCritical, "gradient norm above tolerance");
  }
  const std::size_t d1 = z.hidden();
  Classification c;
  c.case_tag = case_of(data, d1);
  if (matches_global_value(objective_g(z, data, mu), global_min_value(data, d1), tol)) {
    c.kind = PointKind::GlobalMin;
    return c;
  }
  c.bound = curvature_bound(data, d1, tol);
  try {
    EscapeCertificate cert = escape_certificate(z, data, tol);
    const double q = hessian_quadform_g(z, cert.direction, data, mu);
    c.kind = PointKind::StrictSaddle;
    c.method = CurvatureMethod::Constructive;
    c.quadform = q;
    c.rayleigh = q / cert.direction.squared_norm();
    c.escape_index = cert.index;
    c.direction = std::move(cert.direction);
    return c;
  } catch (const Error& e) {
    if (e.code() != Errc::AmbiguousRecovery) throw;
  }
  return detail::classify_by_hessian(z, data, mu, std::move(c), tol);
}

// ---------------------------------------------------------------------------
// Unregularized objective

/// Balanced factorization of the same product W2 W1:
///   W2 W1 U Sigma = Phi Theta Psi^T,  W2bar = Phi Theta^{1/2},
///   W1bar = Theta^{1/2} Psi^T Sigma^{-1} U^T.
inline LiftResult balanced_lift(const FactorPair& z, const Dataset& data, const Tolerances& tol = {}) {
  detail::check_shapes(z, data);
  if (grad_norm(z, data, 0.0) > tol.f_critical * data.scale()) {
    throw Error(Errc::NotCritical, "balanced_lift needs a critical point of f");
  }
  const Matrix product = z.w2 * z.w1 * data.u_sigma();
  SvdTriple svd;
  try {
    svd = reduced_svd(product);
  } catch (const Error& e) {
    if (e.code() == Errc::ZeroMatrix) throw Error(Errc::ZeroProduct, "W2 W1 = 0");
    throw;
  }
  const std::size_t k = svd.rank();
  Matrix w2bar = svd.U;
  Matrix root_psi_t = svd.V.transpose();  // Theta^{1/2} Psi^T
  for (std::size_t j = 0; j < k; ++j) {
    const double root = std::sqrt(svd.S[j]);
    for (std::size_t a = 0; a < w2bar.rows(); ++a) w2bar(a, j) *= root;
    for (std::size_t b = 0; b < root_psi_t.cols(); ++b) root_psi_t(j, b) *= root;
  }
  return {FactorPair{std::move(w2bar), root_psi_t * data.sigma_inv_ut()}, svd.S, svd.U, svd.V};
}

/// Maps a direction at the lifted point back to the original factorization:
///   Delta1 = W1 U Sigma Psi Theta^{-1/2} Delta1bar,
///   Delta2 = Delta2bar Theta^{-1/2} Phi^T W2.
/// Preserves W2 Delta1, Delta2 W1 and Delta2 Delta1, hence the f-curvature.
inline Direction pull_back(const Direction& dbar, const FactorPair& z, const LiftResult& lift, const Dataset& data) {
  Matrix right = z.w1 * data.u_sigma() * lift.psi;  // d1 x k
  Matrix left = lift.phi.transpose() * z.w2;         // k x d1
  for (std::size_t j = 0; j < lift.theta.size(); ++j) {
    const double inv_root = 1.0 / std::sqrt(lift.theta[j]);
    for (std::size_t a = 0; a < right.rows(); ++a) right(a, j) *= inv_root;
    for (std::size_t b = 0; b < left.cols(); ++b) left(j, b) *= inv_root;
  }
  return {dbar.delta2 * left, right * dbar.delta1};
}

/// Numerical rank of W2 W1 with a relative cutoff.
inline std::size_t product_rank(const FactorPair& z, double relative_cutoff) {
  const Matrix product = z.w2 * z.w1;
  if (product.max_abs() == 0.0) return 0;
  try {
    const SvdTriple svd = reduced_svd(product);
    return static_cast<std::size_t>(
        std::count_if(svd.S.begin(), svd.S.end(), [&](double s) { return s > relative_cutoff * svd.S[0]; }));
  } catch (const Error& e) {
    if (e.code() == Errc::ZeroMatrix) return 0;
    throw;
  }
}

/// Classifies a critical point of f (mu = 0). Non-degenerate points are
/// lifted to a balanced factorization, certified there, and the escape
/// direction is pulled back; degenerate points (rank W2 W1 below
/// min(d2, d1, d0)) are checked through the dense Hessian.
inline Classification classify_f_critical(const FactorPair& z, const Dataset& data, const Tolerances& tol = {}) {
  detail::check_shapes(z, data);
  if (grad_norm(z, data, 0.0) > tol.f_critical * data.scale()) {
    throw Error(Errc::NotCritical, "gradient of f above tolerance");
  }
  const std::size_t d1 = z.hidden();
  Classification c;
  c.case_tag = case_of(data, d1);
  if (matches_global_value(objective_f(z, data), global_min_value(data, d1), tol)) {
    c.kind = PointKind::GlobalMin;
    return c;
  }
  const std::size_t full = std::min({data.d2(), d1, data.d0()});
  if (product_rank(z, tol.degenerate_rank) < full) return detail::classify_by_hessian(z, data, 0.0, c, tol);

  try {
    const LiftResult lift = balanced_lift(z, data, tol);
    const EscapeCertificate cert = escape_certificate(lift.zbar, data, tol);
    Direction d = pull_back(cert.direction, z, lift, data);
    const double q = hessian_quadform_g(z, d, data, 0.0);
    if (q < 0.0) {
      c.kind = PointKind::StrictSaddle;
      c.method = CurvatureMethod::LiftPullback;
      c.quadform = q;
      c.rayleigh = q / d.squared_norm();
      c.bound = 0.0;
      c.escape_index = cert.index;
      c.direction = std::move(d);
      return c;
    }
  } catch (const Error& e) {
    if (e.code() != Errc::AmbiguousRecovery && e.code() != Errc::IsGlobalMin && e.code() != Errc::NotCritical) throw;
  }
  return detail::classify_by_hessian(z, data, 0.0, c, tol);
}

}  // namespace saddlescape
