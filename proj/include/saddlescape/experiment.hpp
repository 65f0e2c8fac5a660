#pragma once

// Experiment driver: dataset generation, matrix fixtures, the verification
// suites and their JSON report.

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "saddlescape/decompositions.hpp"
#include "saddlescape/error.hpp"
#include "saddlescape/landscape.hpp"
#include "saddlescape/model.hpp"
#include "saddlescape/optimize.hpp"
#include "saddlescape/tolerances.hpp"

namespace saddlescape {

inline constexpr int kReportSchemaVersion = 1;

struct Dims {
  std::size_t d0 = 0, d1 = 0, d2 = 0, n = 0;

  void validate() const {
    if (d0 == 0 || d1 == 0 || d2 == 0 || n == 0) throw Error(Errc::BadDims, "dimensions must be positive");
    if (n < d0) throw Error(Errc::BadDims, "need N >= d0 for X to have full row rank");
  }
};

struct Planted {
  std::size_t rank = 1;
  double scale = 1.0;
};
struct RandomY {};
struct FromFile {
  std::string path;
};
using DataMode = std::variant<Planted, RandomY, FromFile>;

enum class Suite { Enumerate, Classify, Optimize, FdCheck, Lift };
enum class Optimizer { Plain, Noisy, Perturbed };

constexpr const char* to_string(Suite s) {
  switch (s) {
    case Suite::Enumerate: return "enumerate";
    case Suite::Classify: return "classify";
    case Suite::Optimize: return "optimize";
    case Suite::FdCheck: return "fdcheck";
    case Suite::Lift: return "lift";
  }
  return "?";
}

constexpr const char* to_string(Optimizer o) {
  switch (o) {
    case Optimizer::Plain: return "gd";
    case Optimizer::Noisy: return "noisy";
    case Optimizer::Perturbed: return "perturbed";
  }
  return "?";
}

inline Suite parse_suite(const std::string& s) {
  for (Suite v : {Suite::Enumerate, Suite::Classify, Suite::Optimize, Suite::FdCheck, Suite::Lift}) {
    if (s == to_string(v)) return v;
  }
  throw Error(Errc::ConfigError, "unknown suite: " + s);
}

inline Optimizer parse_optimizer(const std::string& s) {
  for (Optimizer v : {Optimizer::Plain, Optimizer::Noisy, Optimizer::Perturbed}) {
    if (s == to_string(v)) return v;
  }
  throw Error(Errc::ConfigError, "unknown optimizer: " + s);
}

struct ExperimentConfig {
  Dims dims;
  DataMode data_mode = RandomY{};
  double mu = 1.0;
  std::uint64_t data_seed = 1;
  std::vector<std::uint64_t> seeds{1};
  OptConfig opt;
  bool auto_step = true;  // ignore opt.step_size and use suggested_step per run
  Optimizer optimizer = Optimizer::Plain;
  double init_scale = 0.1;
  std::size_t rotations = 1;  // random rotations per enumerated spec
  std::size_t fd_samples = 20;
  double success_fraction = 0.95;
  std::size_t jobs = 1;
  std::vector<Suite> suites{Suite::Enumerate, Suite::Classify, Suite::Optimize, Suite::FdCheck, Suite::Lift};
  Tolerances tol;

  void validate() const {
    dims.validate();
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw Error(Errc::ConfigError, "mu must be a non-negative number");
    if (seeds.empty()) throw Error(Errc::ConfigError, "at least one seed is required");
    if (suites.empty()) throw Error(Errc::ConfigError, "at least one suite is required");
    if (jobs == 0) throw Error(Errc::ConfigError, "jobs must be positive");
    if (!(init_scale >= 0.0)) throw Error(Errc::ConfigError, "init scale must be non-negative");
    if (const auto* p = std::get_if<Planted>(&data_mode)) {
      if (p->rank == 0 || p->rank > std::min(dims.d0, dims.d2)) {
        throw Error(Errc::BadDims, "planted rank must lie in [1, min(d0, d2)]");
      }
    }
    if (auto copy = opt; auto_step) {
      copy.step_size = 1.0;
      copy.validate();
    } else {
      opt.validate();
    }
  }
};

// --- matrix fixtures ---------------------------------------------------------

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Header "rows cols", then one line per row, shortest round-trip decimals.
inline void write_matrix(std::ostream& out, const Matrix& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ' ';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

inline Matrix read_matrix(std::istream& in) {
  std::size_t rows = 0, cols = 0;
  if (!(in >> rows >> cols)) throw Error(Errc::Io, "missing matrix header");
  if (rows == 0 || cols == 0 || rows * cols > 1u << 24) throw Error(Errc::Io, "bad matrix shape");
  std::vector<double> values(rows * cols);
  for (double& v : values) {
    std::string token;
    if (!(in >> token)) throw Error(Errc::Io, "matrix ends early");
    const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
      throw Error(Errc::Io, "bad matrix entry: " + token);
    }
  }
  return Matrix::from_values(rows, cols, std::move(values));
}

/// X block followed by Y block.
inline void write_dataset(std::ostream& out, const Dataset& data) {
  write_matrix(out, data.X());
  write_matrix(out, data.Y());
}

inline Dataset read_dataset(std::istream& in) {
  Matrix x = read_matrix(in);
  Matrix y = read_matrix(in);
  std::string rest;
  if (in >> rest) throw Error(Errc::Io, "trailing content after the Y block");
  return Dataset(std::move(x), std::move(y));
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  return read_dataset(in);
}

// --- dataset generation ------------------------------------------------------

/// Gaussian X resampled until sigma_min >= 1e-6 sigma_max. Planted targets
/// are W2* W1* X with Gaussian factors of the requested rank.
inline Dataset generate_dataset(const Dims& dims, const DataMode& mode, std::uint64_t seed) {
  if (const auto* file = std::get_if<FromFile>(&mode)) {
    Dataset data = load_dataset(file->path);
    if (data.d0() != dims.d0 || data.d2() != dims.d2 || data.samples() != dims.n) {
      throw Error(Errc::BadDims, "fixture shape does not match the requested dimensions");
    }
    return data;
  }
  dims.validate();
  std::mt19937_64 rng(seed);
  Matrix x;
  for (;;) {
    x = gaussian_matrix(dims.d0, dims.n, rng);
    const SvdTriple svd = reduced_svd(x);
    if (svd.rank() == dims.d0 && svd.S.back() >= 1e-6 * svd.S.front()) break;
  }
  if (const auto* p = std::get_if<Planted>(&mode)) {
    if (p->rank == 0 || p->rank > std::min(dims.d0, dims.d2)) throw Error(Errc::BadDims, "bad planted rank");
    const Matrix w2 = gaussian_matrix(dims.d2, p->rank, rng, p->scale);
    const Matrix w1 = gaussian_matrix(p->rank, dims.d0, rng, p->scale);
    Matrix y = w2 * (w1 * x);
    return Dataset(std::move(x), std::move(y));
  }
  Matrix y = gaussian_matrix(dims.d2, dims.n, rng);
  return Dataset(std::move(x), std::move(y));
}

// --- report ------------------------------------------------------------------

struct PointRecord {
  std::string spec;
  double g = 0.0;
  double grad_norm = 0.0;
  double imbalance = 0.0;
  std::string kind;
  std::optional<double> rayleigh;
  std::optional<double> bound;

  friend bool operator==(const PointRecord&, const PointRecord&) = default;
};

struct RunRecord {
  std::uint64_t seed = 0;
  bool converged = false;
  bool reached_global = false;
  bool escaped = false;
  std::uint64_t iterations = 0;
  std::uint64_t perturbations = 0;
  std::uint64_t monotonicity_violations = 0;
  double step_size = 0.0;
  double final_g = 0.0;
  double final_f = 0.0;
  double final_grad_norm = 0.0;
  std::string kind;  // lift suite only

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

struct SuiteReport {
  std::string name;
  bool passed = false;
  std::map<std::string, std::uint64_t> counts;
  std::map<std::string, double> worst;
  std::vector<PointRecord> points;
  std::vector<RunRecord> runs;
  std::string message;

  friend bool operator==(const SuiteReport&, const SuiteReport&) = default;
};

struct DatasetSummary {
  std::uint64_t d0 = 0, d1 = 0, d2 = 0, n = 0, rank = 0;
  std::vector<double> lambdas;
  double global_min_value = 0.0;

  friend bool operator==(const DatasetSummary&, const DatasetSummary&) = default;
};

struct Report {
  int schema_version = kReportSchemaVersion;
  nlohmann::json config;
  DatasetSummary dataset;
  std::vector<SuiteReport> suites;
  bool passed = false;

  friend bool operator==(const Report&, const Report&) = default;
};

namespace detail {

inline void put_optional(nlohmann::json& j, const char* key, const std::optional<double>& v) {
  j[key] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline std::optional<double> get_optional(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const PointRecord& p) {
  j = {{"spec", p.spec}, {"g", p.g}, {"grad_norm", p.grad_norm}, {"imbalance", p.imbalance}, {"kind", p.kind}};
  detail::put_optional(j, "rayleigh", p.rayleigh);
  detail::put_optional(j, "bound", p.bound);
}

inline void from_json(const nlohmann::json& j, PointRecord& p) {
  j.at("spec").get_to(p.spec);
  j.at("g").get_to(p.g);
  j.at("grad_norm").get_to(p.grad_norm);
  j.at("imbalance").get_to(p.imbalance);
  j.at("kind").get_to(p.kind);
  p.rayleigh = detail::get_optional(j, "rayleigh");
  p.bound = detail::get_optional(j, "bound");
}

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RunRecord, seed, converged, reached_global, escaped, iterations, perturbations,
                                   monotonicity_violations, step_size, final_g, final_f, final_grad_norm, kind)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SuiteReport, name, passed, counts, worst, points, runs, message)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DatasetSummary, d0, d1, d2, n, rank, lambdas, global_min_value)

inline void to_json(nlohmann::json& j, const Report& r) {
  j = {{"schema_version", r.schema_version},
       {"config", r.config},
       {"dataset", r.dataset},
       {"suites", r.suites},
       {"passed", r.passed}};
}

inline void from_json(const nlohmann::json& j, Report& r) {
  j.at("schema_version").get_to(r.schema_version);
  if (r.schema_version != kReportSchemaVersion) throw Error(Errc::ConfigError, "unsupported report schema version");
  r.config = j.at("config");
  j.at("dataset").get_to(r.dataset);
  j.at("suites").get_to(r.suites);
  j.at("passed").get_to(r.passed);
}

inline std::string emit_report(const Report& r) { return nlohmann::json(r).dump(2) + "\n"; }

inline Report parse_report(const std::string& text) {
  try {
    return nlohmann::json::parse(text).get<Report>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Io, std::string("malformed report: ") + e.what());
  }
}

inline nlohmann::json config_json(const ExperimentConfig& c) {
  nlohmann::json mode;
  if (const auto* p = std::get_if<Planted>(&c.data_mode)) {
    mode = {{"kind", "planted"}, {"rank", p->rank}, {"scale", p->scale}};
  } else if (const auto* f = std::get_if<FromFile>(&c.data_mode)) {
    mode = {{"kind", "file"}, {"path", f->path}};
  } else {
    mode = {{"kind", "random"}};
  }
  std::vector<std::string> suites;
  for (Suite s : c.suites) suites.emplace_back(to_string(s));
  // jobs is left out on purpose: it must not change the report
  return {{"dims", {c.dims.d0, c.dims.d1, c.dims.d2, c.dims.n}},
          {"data_mode", mode},
          {"mu", c.mu},
          {"data_seed", c.data_seed},
          {"seeds", c.seeds},
          {"suites", suites},
          {"optimizer", to_string(c.optimizer)},
          {"step_size", c.auto_step ? nlohmann::json("auto") : nlohmann::json(c.opt.step_size)},
          {"max_iters", c.opt.max_iters},
          {"grad_tol", c.opt.grad_tol},
          {"noise_std", c.opt.noise_std},
          {"perturb_radius", c.opt.perturb_radius},
          {"stall_window", c.opt.stall_window},
          {"init_scale", c.init_scale},
          {"rotations", c.rotations},
          {"fd_samples", c.fd_samples},
          {"success_fraction", c.success_fraction},
          {"tol_critical", c.tol.critical}};
}

// --- suites ------------------------------------------------------------------

namespace detail {

/// Runs fn(i) for i in [0, count) on up to `jobs` threads. Results must be
/// written to slot i only.
template <class Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < count; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline void track_worst(SuiteReport& s, const std::string& key, double value) {
  auto [it, inserted] = s.worst.emplace(key, value);
  if (!inserted) it->second = std::max(it->second, value);
}

inline double balance_unit(const Dataset& data) {
  return std::max(1.0, data.rank() > 0 ? data.lambdas()[0] : 0.0);
}

inline SuiteReport run_enumerate(const ExperimentConfig& cfg, const Dataset& data) {
  SuiteReport s;
  s.name = "enumerate";
  const std::size_t d1 = cfg.dims.d1;
  const double optimum = global_min_value(data, d1);
  double best = INFINITY;
  std::uint64_t failures = 0;
  s.worst = {{"grad_g", 0.0}, {"grad_f", 0.0}, {"imbalance", 0.0}};
  SpecStream stream = iterate_all_specs(data, d1, cfg.rotations, cfg.data_seed);
  while (auto spec = stream.next()) {
    const FactorPair z = build_critical_point(data, d1, *spec);
    const double g = objective_g(z, data, cfg.mu);
    const double gg = grad_norm(z, data, cfg.mu) / data.scale();
    const double gf = grad_norm(z, data, 0.0) / data.scale();
    const double bal = imbalance(z, data).norm() / balance_unit(data);
    track_worst(s, "grad_g", gg);
    track_worst(s, "grad_f", gf);
    track_worst(s, "imbalance", bal);
    best = std::min(best, g);
    const bool ok = gg <= cfg.tol.critical && gf <= cfg.tol.critical && bal <= cfg.tol.balance;
    failures += !ok;
    s.points.push_back({spec->label(), g, gg, bal, ok ? "critical" : "not-critical", std::nullopt, std::nullopt});
  }
  s.counts["points"] = s.points.size();
  s.counts["base_specs"] = stream.base_count();
  s.counts["failures"] = failures;
  const double gap = std::abs(best - optimum) / (1.0 + std::abs(optimum));
  s.worst["min_value_gap"] = gap;
  s.passed = failures == 0 && gap <= cfg.tol.global_value;
  if (!s.passed) s.message = failures > 0 ? "enumerated point failed a criticality check" : "minimum value mismatch";
  return s;
}

inline SuiteReport run_classify(const ExperimentConfig& cfg, const Dataset& data) {
  SuiteReport s;
  s.name = "classify";
  const std::size_t d1 = cfg.dims.d1;
  std::uint64_t failures = 0;
  s.counts = {{"global_min", 0}, {"strict_saddle", 0}, {"unclassified", 0}};
  s.worst["rayleigh_minus_bound"] = -INFINITY;
  SpecStream stream = iterate_all_specs(data, d1, cfg.rotations, cfg.data_seed);
  while (auto spec = stream.next()) {
    const FactorPair z = build_critical_point(data, d1, *spec);
    const Classification c = classify(z, data, cfg.mu, cfg.tol);
    PointRecord rec{spec->label(), objective_g(z, data, cfg.mu), grad_norm(z, data, cfg.mu) / data.scale(),
                    imbalance(z, data).norm() / balance_unit(data), to_string(c.kind), c.rayleigh, c.bound};
    switch (c.kind) {
      case PointKind::GlobalMin: ++s.counts["global_min"]; break;
      case PointKind::StrictSaddle: {
        ++s.counts["strict_saddle"];
        const double excess = *c.rayleigh - *c.bound;
        track_worst(s, "rayleigh_minus_bound", excess);
        if (!(*c.rayleigh < 0.0) || excess > cfg.tol.certificate) ++failures;
        break;
      }
      case PointKind::Unclassified:
        ++s.counts["unclassified"];
        ++failures;
        break;
    }
    s.points.push_back(std::move(rec));
  }
  if (s.counts["strict_saddle"] == 0) s.worst.erase("rayleigh_minus_bound");
  s.counts["failures"] = failures;
  s.passed = failures == 0 && s.counts["global_min"] > 0;
  if (!s.passed) s.message = "a point lacks a valid certificate";
  return s;
}

inline RunRecord summarize(std::uint64_t seed, double step, const Trajectory& t, const Dataset& data, double mu) {
  return {seed,
          t.converged,
          t.reached_global,
          t.escaped,
          t.iterations,
          t.perturbations,
          t.monotonicity_violations,
          step,
          objective_g(t.final, data, mu),
          objective_f(t.final, data),
          grad_norm(t.final, data, mu),
          ""};
}

inline SuiteReport run_optimize(const ExperimentConfig& cfg, const Dataset& data) {
  SuiteReport s;
  s.name = "optimize";
  const std::size_t d1 = cfg.dims.d1;
  std::vector<RunRecord> runs(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.jobs, [&](std::size_t i) {
    const std::uint64_t seed = cfg.seeds[i];
    const FactorPair init = initial_point(RandomInit{cfg.init_scale, seed}, data, d1);
    OptConfig opt = cfg.opt;
    opt.seed = seed;
    if (cfg.auto_step) opt.step_size = suggested_step(data, d1, cfg.mu, init);
    try {
      Trajectory t;
      switch (cfg.optimizer) {
        case Optimizer::Plain: t = gradient_descent(data, d1, cfg.mu, opt, init); break;
        case Optimizer::Noisy: t = noisy_gradient_descent(data, d1, cfg.mu, opt, init); break;
        case Optimizer::Perturbed: t = perturbed_gradient_descent(data, d1, cfg.mu, opt, init); break;
      }
      runs[i] = summarize(seed, opt.step_size, t, data, cfg.mu);
    } catch (const Error& e) {
      if (e.code() != Errc::Diverged) throw;
      RunRecord r;
      r.seed = seed;
      r.step_size = opt.step_size;
      r.kind = "diverged";
      runs[i] = r;
    }
  });
  std::uint64_t reached = 0, diverged = 0, violations = 0;
  for (const auto& r : runs) {
    reached += r.reached_global;
    diverged += r.kind == "diverged";
    violations += r.monotonicity_violations;
  }
  s.runs = std::move(runs);
  s.counts = {{"runs", s.runs.size()}, {"reached_global", reached}, {"diverged", diverged},
              {"monotonicity_violations", violations}};
  s.passed = double(reached) >= cfg.success_fraction * double(s.runs.size());
  if (!s.passed) s.message = "too few runs reached the global value";
  return s;
}

inline SuiteReport run_fdcheck(const ExperimentConfig& cfg, const Dataset& data) {
  SuiteReport s;
  s.name = "fdcheck";
  std::mt19937_64 rng(cfg.data_seed ^ 0x9e3779b97f4a7c15ULL);
  const std::size_t d1 = cfg.dims.d1;
  s.worst = {{"gradient", 0.0}, {"quadform", 0.0}, {"assembled", 0.0}};
  for (std::size_t k = 0; k < cfg.fd_samples; ++k) {
    FactorPair z{gaussian_matrix(data.d2(), d1, rng, 0.5), gaussian_matrix(d1, data.d0(), rng, 0.5)};
    const Direction d{gaussian_matrix(data.d2(), d1, rng), gaussian_matrix(d1, data.d0(), rng)};
    track_worst(s, "gradient", fd_grad_check(z, data, cfg.mu));
    track_worst(s, "quadform", fd_quadform_check(z, d, data, cfg.mu));
    if (data.d2() * d1 + d1 * data.d0() <= 256) {
      const Matrix h = assemble_hessian(z, data, cfg.mu);
      const Vector v = flatten(d);
      const double via_matrix = dot(v, (h * column_matrix(v)).values());
      const double q = hessian_quadform_g(z, d, data, cfg.mu);
      track_worst(s, "assembled", std::abs(via_matrix - q) / std::max(1.0, std::abs(q)));
    }
  }
  s.counts["samples"] = cfg.fd_samples;
  s.passed = s.worst["gradient"] <= 1e-6 && s.worst["quadform"] <= 1e-4 && s.worst["assembled"] <= 1e-8;
  if (!s.passed) s.message = "derivative check exceeded its tolerance";
  return s;
}

inline SuiteReport run_lift(const ExperimentConfig& cfg, const Dataset& data) {
  SuiteReport s;
  s.name = "lift";
  const std::size_t d1 = cfg.dims.d1;
  std::vector<RunRecord> runs(cfg.seeds.size());
  std::vector<std::array<double, 2>> residuals(cfg.seeds.size(), {0.0, 0.0});
  std::vector<char> ok(cfg.seeds.size(), 1);
  parallel_for(cfg.seeds.size(), cfg.jobs, [&](std::size_t i) {
    const std::uint64_t seed = cfg.seeds[i];
    const FactorPair init = initial_point(RandomInit{cfg.init_scale, seed}, data, d1);
    OptConfig opt = cfg.opt;
    opt.seed = seed;
    opt.grad_tol = 0.1 * cfg.tol.f_critical * data.scale();
    if (cfg.auto_step) opt.step_size = suggested_step(data, d1, 0.0, init);
    const Trajectory t = gradient_descent(data, d1, 0.0, opt, init);
    RunRecord r = summarize(seed, opt.step_size, t, data, 0.0);
    if (!t.converged) {
      r.kind = "not-converged";
      runs[i] = r;
      return;
    }
    const Matrix product = t.final.w2 * t.final.w1;
    const Classification c = classify_f_critical(t.final, data, cfg.tol);
    r.kind = to_string(c.kind);
    if (c.kind == PointKind::Unclassified) ok[i] = 0;
    if (c.kind == PointKind::StrictSaddle && !(*c.rayleigh < 0.0)) ok[i] = 0;
    if (product.max_abs() > 0.0) {
      const LiftResult lift = balanced_lift(t.final, data, cfg.tol);
      residuals[i][0] = (lift.zbar.w2 * lift.zbar.w1 - product).norm() / product.norm();
      residuals[i][1] = imbalance(lift.zbar, data).norm() / balance_unit(data);
      if (residuals[i][0] > 1e-10 || residuals[i][1] > 1e-10) ok[i] = 0;
    }
    runs[i] = r;
  });
  std::uint64_t converged = 0, failures = 0;
  s.worst = {{"product", 0.0}, {"imbalance", 0.0}};
  for (std::size_t i = 0; i < runs.size(); ++i) {
    converged += runs[i].converged;
    failures += !ok[i];
    track_worst(s, "product", residuals[i][0]);
    track_worst(s, "imbalance", residuals[i][1]);
    if (runs[i].kind == "GlobalMin") ++s.counts["global_min"];
    if (runs[i].kind == "StrictSaddle") ++s.counts["strict_saddle"];
    if (runs[i].kind == "Unclassified") ++s.counts["unclassified"];
  }
  s.runs = std::move(runs);
  s.counts["runs"] = s.runs.size();
  s.counts["converged"] = converged;
  s.counts["failures"] = failures;
  s.passed = failures == 0 && converged > 0;
  if (!s.passed) s.message = converged == 0 ? "no run reached a critical point of f" : "lift check failed";
  return s;
}

}  // namespace detail

inline DatasetSummary summarize_dataset(const Dataset& data, std::size_t d1) {
  return {data.d0(), d1, data.d2(), data.samples(), data.rank(), data.lambdas(), global_min_value(data, d1)};
}

/// Runs every requested suite. Suite failures are recorded in the report;
/// configuration problems throw.
inline Report run(const ExperimentConfig& cfg) {
  cfg.validate();
  const Dataset data = generate_dataset(cfg.dims, cfg.data_mode, cfg.data_seed);
  Report report;
  report.config = config_json(cfg);
  report.dataset = summarize_dataset(data, cfg.dims.d1);
  report.passed = true;
  for (Suite suite : cfg.suites) {
    SuiteReport s;
    switch (suite) {
      case Suite::Enumerate: s = detail::run_enumerate(cfg, data); break;
      case Suite::Classify: s = detail::run_classify(cfg, data); break;
      case Suite::Optimize: s = detail::run_optimize(cfg, data); break;
      case Suite::FdCheck: s = detail::run_fdcheck(cfg, data); break;
      case Suite::Lift: s = detail::run_lift(cfg, data); break;
    }
    report.passed = report.passed && s.passed;
    report.suites.push_back(std::move(s));
  }
  return report;
}

inline int exit_code(const Report& r) { return r.passed ? 0 : 1; }

}  // namespace saddlescape
