#pragma once

// Run configuration: line-oriented "key = value" text with '#' comments.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "g2/error.hpp"
#include "g2/flow.hpp"

namespace g2::app {

/// Missing input files, unknown commands and similar caller mistakes.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string text;  // verbatim source

  FlowKind flow = FlowKind::laplacian;
  double A = 1.0;
  std::string driver = "ricci";

  std::vector<int> axes{1};  // 1-based coordinate ids
  std::vector<int> n{32};
  std::vector<double> length{1.0};
  double inactive_period = 1.0;

  std::string init = "flat";  // flat | conformal | closed | coclosed | snapshot
  double epsilon = 0.0;
  std::vector<int> modes{1};
  std::string snapshot;

  double t_max = std::numeric_limits<double>::infinity();
  double lambda_max = std::numeric_limits<double>::infinity();
  long max_steps = 1000;
  int diag_every = 1;
  double cfl = 0.25;
  double dt = 0.0;  // > 0 forces a fixed step
  int trajectory_every = 1;
  bool rescaled_snapshots = true;

  std::vector<double> tau;  // empty: half the stored span, then the span
  double reference_time = std::numeric_limits<double>::quiet_NaN();
  double mu_tol = 1e-8;
  long mu_max_iter = 100000;
  int mu_starts = 1;
  bool dwdt = true;
  std::string trajectory;  // empty: <output>/trajectory

  double rho = std::numeric_limits<double>::quiet_NaN();  // NaN: a quarter of the shortest period
  int center_stride = 4;
  int collapse_every = 1;

  std::string diagnostics;  // empty: <output>/diagnostics.csv
  double fit_t_min = -std::numeric_limits<double>::infinity();

  std::string output = "out";
  std::uint64_t seed = 1;

  Grid grid() const;
  std::array<double, kDim> inactive_periods() const;
  std::array<int, 3> mode_array() const;
  std::string trajectory_dir() const;
  std::string diagnostics_path() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Every key with its resolved value, one "key = value" line each.
std::string resolved_dump(const RunConfig& cfg);

}  // namespace g2::app
