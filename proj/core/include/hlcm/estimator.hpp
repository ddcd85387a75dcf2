#pragma once

// Penalized EM for latent class models with an unknown number of classes.
//
// The estimator maximizes
//
//   l_N(pi, Theta) - lambda1*N * sum_k log_[rho] pi_k
//                  - lambda2*N * sum_j J_{tau,rho}(theta_j)
//
// where log_[rho] is the log truncated at rho and J_{tau,rho} sums the
// truncated Lasso penalty TLP(x; tau) = min(|x|, tau) over the pairwise
// differences of item parameters among significant classes (pi > rho).
// lambda1/lambda2 are the per-subject weights (the tilde scale used by the
// tuning grids). The log penalty drives redundant class proportions to zero;
// the TLP fuses item parameters so classes become distinguishable by their
// response-probability levels.
//
// The M-step for Theta handles the TLP by difference-of-convex majorization
// plus an ADMM split on the pairwise differences d_jkl = theta_jk - theta_jl
// with scaled duals mu_jkl; the per-parameter convex subproblem is solved by
// projected gradient descent with backtracking. With lambda2 = 0 the split is
// unnecessary and the analytic posterior-weighted M-step is used instead,
// which preserves classical EM monotonicity.
//
// Objective sign convention: penalized_objective returns the value to
// MAXIMIZE; objective_trace stores its negation (the minimization form), so
// the trace is non-increasing on well-behaved runs.

#include "hlcm/model.hpp"
#include "hlcm/rng.hpp"

#include <cstdint>
#include <vector>

namespace hlcm {

struct EmConfig {
  int m_upper = 16;          // M, upper bound on the number of latent classes
  double lambda1 = 0.0;      // per-subject log-penalty weight (must be < 1/M)
  double lambda2 = 0.0;      // per-subject TLP weight
  double tau = 0.3;          // TLP truncation knot
  double gamma = 1.0;        // ADMM quadratic penalty
  double rho = 1e-4;         // proportion threshold for "significant" classes
  double theta_floor = 1e-4; // theta clamped to [floor, 1-floor]
  int max_outer_iters = 500;
  double outer_tol = 1e-6;   // relative change of the penalized objective
  int inner_gd_iters = 25;   // projected gradient steps per theta update
  double inner_gd_step = 0.05;
  double merge_tol = 0.01;   // post-hoc single-linkage gap for exact ties

  void validate() const;  // throws invalid_input on violated constraints
};

// N x M posterior class memberships s_ik; rows sum to 1.
using PosteriorMatrix = Matrix;

// ADMM working state over all unordered class pairs (k < l); pair indices are
// allocated once from m_upper and stay stable while classes deactivate.
struct AdmmState {
  Matrix d;   // J x M(M-1)/2 pairwise differences
  Matrix mu;  // scaled duals, same shape

  static int n_pairs(int m) { return m * (m - 1) / 2; }
  // Flat index of pair (k, l), k < l, under m classes.
  static int pair_index(int k, int l, int m);
};

struct FitResult {
  LcmParams params;        // merged (exact ties) on return from fit
  PosteriorMatrix posterior;
  std::vector<double> objective_trace;  // minimization form, one entry/iteration
  double loglik = 0.0;     // observed-data log-likelihood of `params`
  int n_selected = 0;      // number of classes with pi > rho
  bool converged = false;
  int iterations = 0;
  std::vector<std::uint8_t> active;  // per-class activity flags at exit
  AdmmState admm;
  int warnings = 0;        // non-finite gradient clamps during theta updates
};

// Observed-data log-likelihood; masked cells contribute nothing (a fully
// masked subject contributes log sum_k pi_k = 0).
double log_likelihood(const ResponseData& data, const LcmParams& params);

// Truncated Lasso penalty min(|x|, tau).
double tlp(double x, double tau);

// Soft-thresholding sign(x) * max(|x| - t, 0).
double soft_threshold(double x, double t);

// The maximized objective described at the top of this header.
double penalized_objective(const ResponseData& data, const LcmParams& params,
                           const EmConfig& config);

// Bayes posterior of class membership per subject, computed via log-sum-exp.
PosteriorMatrix e_step(const ResponseData& data, const LcmParams& params);

// Closed-form penalized proportion update applied to currently active classes
// (current_pi > rho): (mean_i s_ik - lambda1) / (1 - M * lambda1), with M the
// configured upper bound. Updated values at or below rho are floored to
// rho/10 and permanently deactivated; the active block is rescaled so the
// whole vector sums to 1. Classes already at or below rho stay frozen.
Vector update_proportions(const PosteriorMatrix& posterior, const EmConfig& config,
                          const Vector& current_pi);

// One DC/ADMM sweep over all active (item, class) cells: projected-gradient
// theta update (Gauss-Seidel in k: pairs with l < k see the new theta_jl),
// then the DC d-update (soft-threshold with lambda2/gamma only while
// |d| < tau), then the scaled dual update. Inactive columns are untouched.
// Increments *warnings when a non-finite gradient had to be clamped.
void update_item_params(const ResponseData& data, const PosteriorMatrix& posterior,
                        Matrix& theta, AdmmState& admm, const Vector& pi,
                        const EmConfig& config, int* warnings = nullptr);

// Penalized EM until the relative objective change drops below outer_tol or
// max_outer_iters is hit. init must be m_upper classes wide. The returned
// params have merge_item_params applied (exact ties for counting levels).
FitResult fit(const ResponseData& data, const EmConfig& config, const LcmParams& init);

// Same loop with masked sums (per-item effective sample sizes). Requires a
// mask; an all-ones mask reduces to fit() exactly.
FitResult fit_missing(const ResponseData& data, const EmConfig& config,
                      const LcmParams& init);

struct StochasticOptions {
  double row_frac = 1.0;         // subject subsample fraction per iteration
  double col_frac = 1.0;         // item subsample fraction per iteration
  std::vector<double> weights;   // averaging weights w_c; empty = (c+1)^-0.6
  std::uint64_t seed = 0;        // subsampling stream
};

// Stochastic variant: E-step on a row subsample restricted to an item
// subsample; the unchanged M-step yields intermediate parameters which are
// blended as new = (1-w_c)*old + w_c*intermediate. With both fractions 1 and
// weights identically 1 this reproduces fit() exactly.
FitResult fit_stochastic(const ResponseData& data, const EmConfig& config,
                         const LcmParams& init, const StochasticOptions& opts);

// Spectral initialization: embed subjects via the top-M left singular vectors
// of the degree-normalized response matrix D_r^{-1/2} R D_c^{-1/2} (zero
// degrees replaced by 1), cluster with k-means, and read off cluster
// frequencies and per-cluster item means. Deterministic for fixed input.
LcmParams spectral_init(const ResponseData& data, int m);

// Random restart, data-free: Dirichlet proportions and uniform theta in
// (0.1, 0.9). Columns drawn this far apart tend to starve most classes of
// posterior mass within a few iterations, so this start finds only coarse
// structure; prefer the data-aware overload for model fitting.
LcmParams random_init(int n_items, int m, PhiloxRng& rng, double theta_floor = 1e-4);

// Random restart around the pooled estimate: near-uniform proportions and
// theta = per-item observed mean plus a small uniform jitter. Every class
// keeps appreciable posterior mass early on, and the jitter seeds the
// symmetry breaking that lets EM carve classes apart gradually.
LcmParams random_init(const ResponseData& data, int m, PhiloxRng& rng,
                      double theta_floor = 1e-4);

// Best-of-R random initialization: draws n_starts pooled-mean restarts, runs
// the penalized EM under `screening` on each (the masked variant when the
// data carry a mask), and returns the parameters of the run with the highest
// penalized objective. Callers that go on to scan a lambda grid should screen
// at the smallest lambda1 they will visit with lambda2 = 0: heavier pruning
// or fusion pressure during screening can only hide classes from the scan,
// never recover them.
LcmParams screened_random_init(const ResponseData& data, const EmConfig& screening,
                               int n_starts, PhiloxRng& rng);

// Per item row, single-linkage clustering of the active-class theta values
// with gap threshold merge_tol; every cluster collapses to its weighted mean
// so ties become exact. `weights` defaults to the proportions; fit() passes
// posterior column sums. Inactive columns are untouched.
LcmParams merge_item_params(const LcmParams& params, const EmConfig& config,
                            const Vector& weights = Vector());

}  // namespace hlcm
