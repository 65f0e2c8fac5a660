#pragma once

// First-order methods on g with instrumentation for checking convergence to
// the closed-form global value.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <variant>
#include <vector>

#include "saddlescape/decompositions.hpp"
#include "saddlescape/error.hpp"
#include "saddlescape/landscape.hpp"
#include "saddlescape/model.hpp"

namespace saddlescape {

struct OptConfig {
  double step_size = 0.01;
  std::size_t max_iters = 20000;
  double grad_tol = 1e-8;
  double noise_std = 0.01;       // noisy GD only
  double perturb_radius = 0.1;   // perturbed GD only
  std::size_t stall_window = 10; // perturbed GD: max consecutive perturbations
  std::uint64_t seed = 0;        // noise and perturbation draws
  std::size_t record_every = 100;
  double polish_fraction = 0.2;  // noisy GD: trailing share of iterations run without noise

  void validate() const {
    if (!(step_size > 0.0) || !std::isfinite(step_size)) throw Error(Errc::ConfigError, "step_size must be positive");
    if (max_iters < 1) throw Error(Errc::ConfigError, "max_iters must be at least 1");
    if (!(grad_tol > 0.0)) throw Error(Errc::ConfigError, "grad_tol must be positive");
    if (!(noise_std >= 0.0)) throw Error(Errc::ConfigError, "noise_std must be non-negative");
    if (!(polish_fraction >= 0.0 && polish_fraction <= 1.0))
      throw Error(Errc::ConfigError, "polish_fraction must lie in [0, 1]");
    if (record_every < 1) throw Error(Errc::ConfigError, "record_every must be at least 1");
  }
};

/// I.i.d. Gaussian entries with the given standard deviation.
struct RandomInit {
  double scale = 0.1;
  std::uint64_t seed = 0;
};

using Init = std::variant<FactorPair, RandomInit>;

struct TrajectorySample {
  std::size_t iteration;
  double g;
  double f;
  double grad_norm;
  double rho;

  friend bool operator==(const TrajectorySample&, const TrajectorySample&) = default;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  FactorPair final;
  bool converged = false;
  bool reached_global = false;
  bool escaped = false;  // g fell below g(init) - 0.1 |g(init)|
  std::size_t iterations = 0;
  std::size_t monotonicity_violations = 0;
  std::size_t perturbations = 0;
};

inline constexpr double kDivergenceThreshold = 1e12;

inline FactorPair initial_point(const Init& init, const Dataset& data, std::size_t d1) {
  if (const auto* z = std::get_if<FactorPair>(&init)) {
    detail::check_shapes(*z, data);
    if (z->hidden() != d1) throw Error(Errc::ShapeMismatch, "initial point has the wrong hidden width");
    return *z;
  }
  const auto& r = std::get<RandomInit>(init);
  if (!(r.scale >= 0.0)) throw Error(Errc::ConfigError, "init scale must be non-negative");
  std::mt19937_64 rng(r.seed);
  FactorPair z;
  z.w2 = gaussian_matrix(data.d2(), d1, rng, r.scale);
  z.w1 = gaussian_matrix(d1, data.d0(), rng, r.scale);
  return z;
}

/// The balanced global minimizer built from the leading singular pairs.
inline FactorPair leading_global_minimizer(const Dataset& data, std::size_t d1) {
  CriticalPointSpec spec = CriticalPointSpec::empty(d1);
  for (std::size_t i = 0; i < std::min(d1, data.rank()); ++i) spec.slots[i] = SlotPick{i, 1};
  return build_critical_point(data, d1, spec);
}

/// Minimizer with W2^T W2 = W1 W1^T and the same product as `z`. Plain
/// gradient descent on f from a small start ends close to this one.
inline FactorPair product_balanced(const FactorPair& z) {
  FactorPair out{Matrix(z.w2.rows(), z.hidden()), Matrix(z.hidden(), z.w1.cols())};
  const Matrix product = z.w2 * z.w1;
  if (product.max_abs() == 0.0) return out;
  const SvdTriple svd = reduced_svd(product);
  for (std::size_t k = 0; k < std::min(svd.rank(), z.hidden()); ++k) {
    const double root = std::sqrt(svd.S[k]);
    for (std::size_t i = 0; i < out.w2.rows(); ++i) out.w2(i, k) = root * svd.U(i, k);
    for (std::size_t j = 0; j < out.w1.cols(); ++j) out.w1(k, j) = root * svd.V(j, k);
  }
  return out;
}

/// 1 / (4 L), with L the largest Hessian eigenvalue seen at the start and at
/// the balanced global minimizer. Without the regularizer the minimizer
/// balanced by product_balanced is included as well.
inline double suggested_step(const Dataset& data, std::size_t d1, double mu, const FactorPair& init) {
  const FactorPair best = leading_global_minimizer(data, d1);
  double lipschitz = 1e-12;
  for (const FactorPair* z : {&init, &best}) {
    lipschitz = std::max(lipschitz, sym_eig(assemble_hessian(*z, data, mu)).values.back());
  }
  if (mu == 0.0) {
    lipschitz = std::max(lipschitz, sym_eig(assemble_hessian(product_balanced(best), data, mu)).values.back());
  }
  return 1.0 / (4.0 * lipschitz);
}

inline bool reaches_global_value(double g, double optimum) {
  return std::abs(g - optimum) <= 1e-6 * (1.0 + std::abs(optimum));
}

namespace detail {

inline TrajectorySample sample_of(std::size_t iter, const Evaluation& e) {
  return {iter, e.g, e.f, e.grad.norm(), e.rho};
}

inline void record(Trajectory& t, const TrajectorySample& s, std::size_t every, bool force = false) {
  if (!force && s.iteration % every != 0) return;
  if (t.samples.empty() || t.samples.back().iteration != s.iteration) t.samples.push_back(s);
}

inline Evaluation checked_evaluate(const FactorPair& z, const Dataset& data, double mu) {
  Evaluation e = evaluate(z, data, mu);
  if (!std::isfinite(e.g) || e.g > kDivergenceThreshold) throw Error(Errc::Diverged, "objective diverged");
  return e;
}

inline void add_gaussian(FactorPair& z, double std_dev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std_dev);
  for (double& x : z.w2.values()) x += normal(rng);
  for (double& x : z.w1.values()) x += normal(rng);
}

/// Uniform point in the Euclidean ball of the given radius around z.
inline void jump_in_ball(FactorPair& z, double radius, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t dim = z.w2.size() + z.w1.size();
  Vector v(dim);
  for (double& x : v) x = normal(rng);
  const double n = norm2(v);
  const double r = radius * std::pow(std::uniform_real_distribution<double>(0.0, 1.0)(rng), 1.0 / double(dim));
  const double s = n > 0.0 ? r / n : 0.0;
  std::size_t k = 0;
  for (double& x : z.w2.values()) x += s * v[k++];
  for (double& x : z.w1.values()) x += s * v[k++];
}

inline void descend(FactorPair& z, const Direction& grad, double eta) {
  z.w2.add_scaled(-eta, grad.delta2);
  z.w1.add_scaled(-eta, grad.delta1);
}

inline Trajectory finish(Trajectory t, const FactorPair& z, const TrajectorySample& last, double optimum,
                         double g_init, std::size_t every) {
  record(t, last, every, true);
  t.final = z;
  t.iterations = last.iteration;
  t.reached_global = reaches_global_value(last.g, optimum);
  t.escaped = last.g < g_init - 0.1 * std::abs(g_init);
  return t;
}

}  // namespace detail

inline Trajectory gradient_descent(const Dataset& data, std::size_t d1, double mu, const OptConfig& cfg,
                                   const Init& init) {
  cfg.validate();
  detail::check_mu(mu);
  FactorPair z = initial_point(init, data, d1);
  const double optimum = global_min_value(data, d1);
  Trajectory t;
  Evaluation e = detail::checked_evaluate(z, data, mu);
  const double g_init = e.g;
  for (std::size_t iter = 0;; ++iter) {
    const TrajectorySample s = detail::sample_of(iter, e);
    detail::record(t, s, cfg.record_every);
    if (s.grad_norm <= cfg.grad_tol) t.converged = true;
    if (t.converged || iter == cfg.max_iters) return detail::finish(std::move(t), z, s, optimum, g_init, cfg.record_every);
    detail::descend(z, e.grad, cfg.step_size);
    Evaluation next = detail::checked_evaluate(z, data, mu);
    if (next.g > e.g + 1e-12 * (1.0 + std::abs(e.g))) ++t.monotonicity_violations;
    e = std::move(next);
  }
}

/// Gaussian noise of standard deviation noise_std is added to every update
/// except during the trailing polish phase. Convergence is only tested while
/// polishing. noise_std = 0 is plain gradient descent.
inline Trajectory noisy_gradient_descent(const Dataset& data, std::size_t d1, double mu, const OptConfig& cfg,
                                         const Init& init) {
  cfg.validate();
  if (cfg.noise_std == 0.0) return gradient_descent(data, d1, mu, cfg, init);
  detail::check_mu(mu);
  FactorPair z = initial_point(init, data, d1);
  const double optimum = global_min_value(data, d1);
  std::mt19937_64 rng(cfg.seed);
  const auto polish = static_cast<std::size_t>(std::ceil(cfg.polish_fraction * double(cfg.max_iters)));
  const std::size_t noisy_iters = cfg.max_iters - std::min(polish, cfg.max_iters);
  Trajectory t;
  Evaluation e = detail::checked_evaluate(z, data, mu);
  const double g_init = e.g;
  for (std::size_t iter = 0;; ++iter) {
    const TrajectorySample s = detail::sample_of(iter, e);
    detail::record(t, s, cfg.record_every);
    const bool noisy = iter < noisy_iters;
    if (!noisy && s.grad_norm <= cfg.grad_tol) t.converged = true;
    if (t.converged || iter == cfg.max_iters) return detail::finish(std::move(t), z, s, optimum, g_init, cfg.record_every);
    detail::descend(z, e.grad, cfg.step_size);
    if (noisy) detail::add_gaussian(z, cfg.noise_std, rng);
    e = detail::checked_evaluate(z, data, mu);
  }
}

/// Gradient descent that, on stalling at a non-global value, jumps to a
/// uniform point in a ball of radius perturb_radius. Gives up after
/// stall_window consecutive perturbations that fall back to the same value.
inline Trajectory perturbed_gradient_descent(const Dataset& data, std::size_t d1, double mu, const OptConfig& cfg,
                                             const Init& init) {
  cfg.validate();
  if (!(cfg.perturb_radius > 0.0)) throw Error(Errc::ConfigError, "perturb_radius must be positive");
  detail::check_mu(mu);
  FactorPair z = initial_point(init, data, d1);
  const double optimum = global_min_value(data, d1);
  std::mt19937_64 rng(cfg.seed);
  Trajectory t;
  Evaluation e = detail::checked_evaluate(z, data, mu);
  const double g_init = e.g;
  std::size_t consecutive = 0;
  double stall_value = 0.0;
  for (std::size_t iter = 0;; ++iter) {
    const TrajectorySample s = detail::sample_of(iter, e);
    detail::record(t, s, cfg.record_every);
    if (s.grad_norm <= cfg.grad_tol) {
      // the value test comes before any perturbation
      const bool same_stall = consecutive > 0 && std::abs(s.g - stall_value) <= 1e-6 * (1.0 + std::abs(s.g));
      if (!same_stall) consecutive = 0;
      stall_value = s.g;
      if (reaches_global_value(s.g, optimum) || consecutive >= cfg.stall_window) {
        t.converged = true;
        return detail::finish(std::move(t), z, s, optimum, g_init, cfg.record_every);
      }
    }
    if (iter == cfg.max_iters) return detail::finish(std::move(t), z, s, optimum, g_init, cfg.record_every);
    if (s.grad_norm <= cfg.grad_tol) {
      detail::jump_in_ball(z, cfg.perturb_radius, rng);
      ++consecutive;
      ++t.perturbations;
    } else {
      detail::descend(z, e.grad, cfg.step_size);
    }
    e = detail::checked_evaluate(z, data, mu);
  }
}

}  // namespace saddlescape
