#pragma once

#include "llb/config.hpp"
#include "llb/report.hpp"

#include <cstdint>
#include <iosfwd>

namespace llb {

enum ExitCode : int { exit_ok = 0, exit_failure = 1, exit_config = 2, exit_blowup = 3 };

struct IdentityResult {
  int cross_samples = 0;
  int qv_samples = 0;
  double max_cross = 0;  // max |<a x b, a>| / (|a| |b|)
  double max_qv = 0;     // max relative quadratic-variation residual
};

/// Fuzzes the pointwise identity <a x b, a> = 0 over `samples` random pairs
/// and the quadratic-variation cancellation over samples / 10 random
/// (u, basis) pairs. Vector magnitudes span two decades around 1.
IdentityResult identity_suite(int samples, std::uint64_t seed);

/// Runs the configured experiment in-process. A blow-up yields a report
/// with status "blowup" holding whatever was computed.
Report run_experiment(const ExperimentConfig& cfg, unsigned threads = 0);

/// Runs the experiment and writes the report under cfg.out_dir. Errors go
/// to `err` as one JSON object.
int run(const ExperimentConfig& cfg, unsigned threads, std::ostream& err);

}  // namespace llb
