#pragma once

// BIC over selected classes and distinct item-parameter levels, and the
// two-stage hyperparameter search: stage 1 tunes (lambda1, lambda2) at a wide
// truncation knot to select the significant classes; stage 2 restarts from
// the stage-1 winner with lambda1 = 0 and tunes (lambda2, tau) to fuse item
// parameters. The overall minimum-BIC fit wins; ties break toward fewer
// classes, then fewer parameters.

#include "hlcm/estimator.hpp"
#include "hlcm/model.hpp"

#include <functional>
#include <vector>

namespace hlcm {

struct TuningGrid {
  std::vector<double> stage1_lambda1;
  std::vector<double> stage1_lambda2;
  double stage1_tau = 0.3;
  std::vector<double> stage2_lambda2;
  std::vector<double> stage2_tau;

  // The defaults: lambda1 in {0.01, 0.015, ..., 0.05}, lambda2 in
  // {0.001, 0.005, 0.01, 0.015}, tau = 0.3; then log lambda2 in {-1, ..., 3}
  // (natural log) and tau in {0.03, 0.05, 0.1}.
  static TuningGrid defaults();
  void validate() const;
};

struct BicRow {
  int stage = 0;        // 1 or 2
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double tau = 0.0;
  double loglik = 0.0;
  int m_hat = 0;
  int dim_total = 0;    // sum over items of distinct active theta levels
  double bic = 0.0;
};

// Number of distinct theta values among active classes for item j; exact
// comparison, so apply merge_item_params first.
int item_dim(const Matrix& theta, const std::vector<int>& active, int j);

// -2 * loglik + log(N) * (M_rho - 1 + sum_j dim(theta_j)).
double bic(const FitResult& fit, const ResponseData& data, double rho);

// Optional resume support: load returns true (and fills the result) when a
// previously computed grid point is available; save persists a fresh one.
struct GridHooks {
  std::function<bool(int stage, int index, FitResult&)> load;
  std::function<void(int stage, int index, const FitResult&)> save;
};

struct TwoStageResult {
  FitResult best;
  EmConfig chosen;              // base config with the winning hyperparameters
  std::vector<BicRow> table;    // stage-1 rows then stage-2 rows, grid order
  int best_row = -1;            // index into table
};

// Fits every stage-1 point from `init`, then every stage-2 point warm-started
// from the stage-1 winner's params. `jobs` > 1 evaluates the points of each
// stage concurrently; the table order and the selection are independent of
// scheduling.
TwoStageResult two_stage_search(const ResponseData& data, const TuningGrid& grid,
                                const EmConfig& base, const LcmParams& init,
                                int jobs = 1, const GridHooks& hooks = {});

}  // namespace hlcm
