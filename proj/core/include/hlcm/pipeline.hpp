#pragma once

// Replication driver: simulate -> two-stage tune -> recover -> evaluate, with
// deterministic per-replication RNG substreams and optional replication-level
// parallelism. Emits the per-cell summary row used by the results tables.

#include "hlcm/estimator.hpp"
#include "hlcm/evaluate.hpp"
#include "hlcm/selection.hpp"
#include "hlcm/simulate.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hlcm {

struct PipelineSpec {
  ModelType model = ModelType::dina;
  HierarchyTemplate hierarchy = HierarchyTemplate::linear;
  int n_subjects = 1000;
  int n_items = 30;
  double noise = 0.1;          // theta_low = noise, theta_high = 1 - noise
  double missing_rate = 0.0;
  int reps = 10;
  std::uint64_t seed = 0;
  int jobs = 1;
  EmConfig base;               // m_upper etc.; lambda/tau come from the grid
  TuningGrid grid = TuningGrid::defaults();
  std::string init = "spectral";  // or "random"
  double eps_gamma = 0.01;
  double t = -1.0;             // < 0: auto, one tolerated violating item
  std::string out_dir;         // empty: no artifacts written
  bool write_artifacts = true;

  // Auto tolerance admits exactly one violating item (floor(t*J) = 1). More
  // is destructive: weak class pairs are separated by as few as two items of
  // a noiseless design, and a tolerance at or above that count makes them
  // mutually dominating, collapsing genuinely distinct classes.
  double resolved_t() const { return t >= 0 ? t : 1.5 / n_items; }
};

struct RepOutcome {
  Metrics metrics;
  int m_hat = 0;
  bool converged = false;
  bool recovery_ok = false;
  std::string error;           // recovery failure message, if any
  double seconds = 0.0;
};

struct PipelineResult {
  std::vector<RepOutcome> reps;
  double mean_acc_m = 0.0;
  double mean_acc_p = 0.0;
  double mean_acc_e = 0.0;
  std::optional<double> mean_mse_theta;  // over reps with acc_m = 1
  std::optional<double> mean_acc_q;      // over reps with acc_e = 1
};

// RNG substream slots per replication; replication r uses streams
// [r * stream_stride, (r+1) * stream_stride).
inline constexpr std::uint64_t stream_stride = 16;

PipelineResult run_pipeline(const PipelineSpec& spec);

// One line of the results-table CSV (means over replications).
std::string metrics_csv_header();
std::string metrics_csv_row(const PipelineSpec& spec, const PipelineResult& result);

}  // namespace hlcm
