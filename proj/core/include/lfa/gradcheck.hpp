#pragma once

#include <cstdint>

#include "lfa/types.hpp"

namespace lfa {

/// Finite-difference verification of the analytic backward passes through
/// the full pipeline (aggregate -> optional chi2 map -> cross-entropy).
struct GradcheckOptions {
  EncoderKind encoder = EncoderKind::T1;
  int trials = 100;
  std::uint64_t seed = 0;
  bool use_chi2_map = true;  // must be off for T2
  double fd_step = 1e-6;
  double tolerance = 1e-4;
  // Test hook: adds a deliberate offset to one analytic gradient component
  // so the harness's sensitivity itself can be verified.
  bool perturb = false;
};

struct GradcheckReport {
  double max_err_codebook = 0.0;
  double max_err_log_precisions = 0.0;
  double max_err_weights = 0.0;
  double max_err_map_input = 0.0;  // stays 0 when the map is off
  int trials = 0;

  double worst() const;
  bool passed(double tolerance) const { return worst() < tolerance; }
};

/// Runs random small instances (D <= 5, K <= 4, N_F <= 6) and reports the
/// max relative error per parameter group against central differences.
/// Relative error uses a guarded denominator max(|a|, |n|, 1e-3) so that
/// components at finite-difference noise level do not dominate.
GradcheckReport gradcheck(const GradcheckOptions& opts);

}  // namespace lfa
