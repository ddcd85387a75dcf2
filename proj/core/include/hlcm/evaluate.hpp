#pragma once

// Scoring of recovered structure against simulation ground truth: Hungarian
// column matching of indicator matrices and the five accuracy metrics.

#include "hlcm/estimator.hpp"
#include "hlcm/model.hpp"
#include "hlcm/recovery.hpp"
#include "hlcm/simulate.hpp"

#include <optional>
#include <vector>

namespace hlcm {

struct Metrics {
  int acc_m = 0;   // estimated number of classes equals |A0|
  int acc_p = 0;   // matched partial-order matrix equals the true one
  int acc_e = 0;   // recovered hierarchy isomorphic to the true one
  std::optional<double> mse_theta;  // present iff acc_m = 1
  std::optional<double> acc_q;      // present iff acc_e = 1
};

// Minimum-cost assignment (Hungarian algorithm, O(n^3)) on an n x n cost
// matrix; returns the column assigned to each row. Exposed for oracle tests.
std::vector<int> hungarian(const Matrix& cost);

// Matches estimated to true indicator columns by Hamming distance; the
// narrower matrix is padded with sentinel columns of cost J. Entry i is the
// true column matched to estimated column i, or -1 for a padding match.
std::vector<int> match_columns(const IndicatorMatrix& gamma_hat,
                               const IndicatorMatrix& gamma_true);

// True hierarchies are compared as labeled DAGs up to attribute permutation
// (transitive closures compared entrywise). Exposed for the metric tests.
bool hierarchies_isomorphic(const Hierarchy& a, const Hierarchy& b);

// The five metrics. The true indicator/partial order/canonical Q are derived
// from truth.theta exactly (eps 0, t 0). mse_theta averages squared errors of
// the Hungarian-matched theta columns; acc_q is the entrywise agreement with
// the canonical true Q (reconstruct_q on the true structure) maximized over
// hierarchy isomorphisms. `t` is accepted for interface symmetry with
// recover; the estimate's structure is taken from `recovery` as-is.
Metrics score(const RecoveryResult& recovery, const FitResult& fit,
              const GroundTruth& truth, double t);

}  // namespace hlcm
