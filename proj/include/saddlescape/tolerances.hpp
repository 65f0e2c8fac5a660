#pragma once

#include <cstdlib>
#include <string>

#include "saddlescape/error.hpp"

namespace saddlescape {

/// Numerical thresholds shared by the landscape checks. Relative quantities
/// are documented per field.
struct Tolerances {
  double critical = 1e-9;            // ||grad g|| / Dataset::scale() at enumerated points
  double f_critical = 1e-8;          // ||grad f|| / Dataset::scale() for critical points of f
  double balance = 1e-10;            // ||W2^T W2 - W1 X X^T W1^T|| / max(1, lambda_1)
  double global_value = 1e-8;        // (value - optimum) / (1 + |optimum|)
  double recovery = 1e-8;            // singular-pair projections / max(1, lambda_1)
  double tie = 1e-9;                 // relative gap below which singular values count as equal
  double degenerate_rank = 1e-6;     // singular values of W2 W1 below this * sigma_max are zero
  double negative_curvature = 1e-8;  // lambda_min below -this is a strict saddle
  double certificate = 1e-9;         // slack in rayleigh <= bound

  Tolerances scaled(double factor) const {
    Tolerances t = *this;
    t.critical *= factor;
    t.f_critical *= factor;
    t.balance *= factor;
    t.global_value *= factor;
    t.recovery *= factor;
    t.tie *= factor;
    t.degenerate_rank *= factor;
    t.negative_curvature *= factor;
    t.certificate *= factor;
    return t;
  }

  /// Defaults multiplied by SADDLESCAPE_TOL_SCALE when it is set.
  static Tolerances from_env() {
    const char* raw = std::getenv("SADDLESCAPE_TOL_SCALE");
    if (raw == nullptr || *raw == '\0') return {};
    char* end = nullptr;
    const double factor = std::strtod(raw, &end);
    if (end == raw || *end != '\0' || !(factor > 0.0)) {
      throw Error(Errc::ConfigError, std::string("SADDLESCAPE_TOL_SCALE is not a positive number: ") + raw);
    }
    return Tolerances{}.scaled(factor);
  }
};

}  // namespace saddlescape
