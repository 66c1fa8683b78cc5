#pragma once

// The validate / evolve / entropy / collapse / fit-blowup commands. Every
// output lands under the configured directory through atomic renames.

#include <string>
#include <vector>

#include "app/config.hpp"
#include "g2/entropy.hpp"

namespace g2::app {

struct CommandResult {
  std::string summary;  // "key = value" lines
  bool singular = false;
  bool checks_passed = true;
};

FlowSpec flow_spec(const RunConfig& cfg);
/// Initial data from the config. Throws UsageError for a missing snapshot.
FlowState initial_state(const RunConfig& cfg);

/// Reads samples written by evolve. Throws UsageError when the directory or
/// its index is missing.
Trajectory load_trajectory(const std::string& dir, const std::array<double, kDim>& inactive_periods);

CommandResult run_validate(const RunConfig& cfg);
CommandResult run_evolve(const RunConfig& cfg);
CommandResult run_entropy(const RunConfig& cfg);
CommandResult run_collapse(const RunConfig& cfg);
CommandResult run_fit_blowup(const RunConfig& cfg);

/// Dispatches on "validate", "evolve", "entropy", "collapse" or "fit-blowup".
CommandResult run_command(const std::string& name, const RunConfig& cfg);

}  // namespace g2::app
