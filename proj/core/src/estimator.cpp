#include "hlcm/estimator.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hlcm {

namespace {

constexpr double kTinyWeight = 1e-12;

double clamp_unit(double x, double floor) { return std::clamp(x, floor, 1.0 - floor); }

// One dense likelihood pass: returns the observed-data log-likelihood and, if
// requested, overwrites *posterior with the row-normalized class memberships.
// `r_eff` must hold values*mask when a mask is present (masked cells zeroed).
double fused_pass(const Matrix& r_eff, const Matrix* mask, const LcmParams& params,
                  Matrix* posterior) {
  const auto theta = params.item_params.array();
  const Matrix w = (theta.log() - (1.0 - theta).log()).matrix();   // J x M
  const Matrix l1 = (1.0 - theta).log().matrix();                  // J x M
  const Eigen::ArrayXd logpi = params.proportions.array().log();   // -inf for zero mass is fine

  Matrix ll = r_eff * w;  // N x M
  if (mask != nullptr) {
    ll.noalias() += (*mask) * l1;
    ll.array().rowwise() += logpi.transpose();
  } else {
    const Eigen::RowVectorXd base = l1.colwise().sum() + logpi.matrix().transpose();
    ll.array().rowwise() += base.array();
  }

  double total = 0.0;
  for (int i = 0; i < ll.rows(); ++i) {
    const double m = ll.row(i).maxCoeff();
    const double lse = m + std::log((ll.row(i).array() - m).exp().sum());
    total += lse;
    if (posterior != nullptr) ll.row(i) = (ll.row(i).array() - lse).exp();
  }
  if (posterior != nullptr) *posterior = std::move(ll);
  return total;
}

Matrix effective_responses(const ResponseData& data) {
  if (data.mask) return data.values.cwiseProduct(*data.mask);
  return data.values;
}

// Truncated-log penalty sum over all classes (log rho at or below rho).
double log_penalty(const Vector& pi, double rho) {
  double total = 0.0;
  for (int k = 0; k < pi.size(); ++k)
    total += std::log(pi[k] > rho ? pi[k] : rho);
  return total;
}

// TLP sum over pairwise theta differences among active classes, all items.
double tlp_penalty(const Matrix& theta, const std::vector<int>& active, double tau) {
  double total = 0.0;
  for (int j = 0; j < theta.rows(); ++j)
    for (std::size_t a = 0; a < active.size(); ++a)
      for (std::size_t b = a + 1; b < active.size(); ++b)
        total += tlp(theta(j, active[a]) - theta(j, active[b]), tau);
  return total;
}

double penalized_from_parts(double loglik, const LcmParams& params, const EmConfig& config,
                            int n_subjects) {
  double value = loglik;
  if (config.lambda1 > 0.0)
    value -= config.lambda1 * n_subjects * log_penalty(params.proportions, config.rho);
  if (config.lambda2 > 0.0) {
    const auto act = active_classes(params.proportions, config.rho);
    value -= config.lambda2 * n_subjects * tlp_penalty(params.item_params, act, config.tau);
  }
  return value;
}

// Convex per-cell loss of the ADMM theta subproblem:
//   f(x) = -a log x - b log(1-x) + (gamma/2) sum_l (x - t_l)^2
// (additive constants dropped; they cancel in backtracking comparisons).
struct CellLoss {
  double a = 0.0, b = 0.0, gamma = 0.0;
  int n_targets = 0;
  double target_sum = 0.0;

  double value(double x) const {
    return -a * std::log(x) - b * std::log(1.0 - x) +
           0.5 * gamma * (n_targets * x * x - 2.0 * target_sum * x);
  }
  double grad(double x) const {
    return -a / x + b / (1.0 - x) + gamma * (n_targets * x - target_sum);
  }
};

// Projected gradient descent with halving backtracking; never increases f.
double minimize_cell(const CellLoss& loss, double x0, const EmConfig& config, int* warnings) {
  const double lo = config.theta_floor, hi = 1.0 - config.theta_floor;
  double x = std::clamp(x0, lo, hi);
  double fx = loss.value(x);
  for (int it = 0; it < config.inner_gd_iters; ++it) {
    double g = loss.grad(x);
    if (!std::isfinite(g)) {
      if (warnings != nullptr) ++*warnings;
      if (std::isnan(g)) break;
      g = std::clamp(g, -1e6, 1e6);
    }
    double step = config.inner_gd_step;
    double xn = x, fn = fx;
    while (true) {
      xn = std::clamp(x - step * g, lo, hi);
      fn = loss.value(xn);
      if (fn <= fx + 1e-12) break;  // accept only non-increasing moves
      step *= 0.5;
      if (step < 1e-14) {
        xn = x;
        fn = fx;
        break;
      }
    }
    const bool stalled = std::abs(xn - x) < 1e-13;
    x = xn;
    fx = fn;
    if (stalled) break;
  }
  return x;
}

// Posterior-weighted analytic M-step for theta (exact when lambda2 = 0).
void analytic_theta_update(const ResponseData& data, const Matrix& posterior, Matrix& theta,
                           const Vector& pi, const EmConfig& config) {
  const auto act = active_classes(pi, config.rho);
  const Matrix r_eff = effective_responses(data);
  const Matrix hits = r_eff.transpose() * posterior;  // J x M weighted correct counts
  Matrix totals;                                      // J x M weighted exposure
  if (data.mask) {
    totals = data.mask->transpose() * posterior;
  } else {
    const Eigen::RowVectorXd colsum = posterior.colwise().sum();
    totals = colsum.replicate(theta.rows(), 1);
  }
  for (int k : act)
    for (int j = 0; j < theta.rows(); ++j) {
      const double denom = totals(j, k);
      if (denom <= kTinyWeight) continue;  // no information: keep previous value
      theta(j, k) = clamp_unit(hits(j, k) / denom, config.theta_floor);
    }
}

void m_step(const ResponseData& data, const Matrix& posterior, LcmParams& params,
            AdmmState& admm, const EmConfig& config, bool use_admm, int* warnings) {
  params.proportions = update_proportions(posterior, config, params.proportions);
  if (use_admm)
    update_item_params(data, posterior, params.item_params, admm, params.proportions, config,
                       warnings);
  else
    analytic_theta_update(data, posterior, params.item_params, params.proportions, config);
}

LcmParams sanitize_init(const ResponseData& data, const EmConfig& config,
                        const LcmParams& init) {
  if (init.n_classes() != config.m_upper)
    throw invalid_input("fit: init must have exactly m_upper classes");
  if (init.item_params.rows() != data.n_items() || init.item_params.cols() != config.m_upper)
    throw invalid_input("fit: init item parameters must be n_items x m_upper");
  LcmParams params = init;
  double total = 0.0;
  for (int k = 0; k < params.proportions.size(); ++k) {
    if (!(params.proportions[k] >= 0.0) || !std::isfinite(params.proportions[k]))
      throw invalid_input("fit: init proportions must be finite and non-negative");
    total += params.proportions[k];
  }
  if (std::abs(total - 1.0) > 1e-6)
    throw invalid_input("fit: init proportions must sum to 1");
  params.proportions /= total;
  params.item_params = params.item_params.array()
                           .max(config.theta_floor)
                           .min(1.0 - config.theta_floor)
                           .matrix();
  return params;
}

AdmmState init_admm(const Matrix& theta, int m) {
  AdmmState admm;
  const int n_pairs = AdmmState::n_pairs(m);
  admm.d.resize(theta.rows(), n_pairs);
  admm.mu = Matrix::Zero(theta.rows(), n_pairs);
  for (int k = 0; k < m; ++k)
    for (int l = k + 1; l < m; ++l)
      admm.d.col(AdmmState::pair_index(k, l, m)) = theta.col(k) - theta.col(l);
  return admm;
}

FitResult run_em(const ResponseData& data, const EmConfig& config, const LcmParams& init) {
  config.validate();
  data.validate();
  LcmParams params = sanitize_init(data, config, init);

  const Matrix r_eff = effective_responses(data);
  const Matrix* mask = data.mask ? &*data.mask : nullptr;
  const bool use_admm = config.lambda2 > 0.0 && config.gamma > 0.0;

  FitResult result;
  result.admm = init_admm(params.item_params, config.m_upper);
  result.warnings = 0;

  Matrix posterior;
  double loglik = fused_pass(r_eff, mask, params, &posterior);
  double obj_prev = -penalized_from_parts(loglik, params, config, data.n_subjects());

  result.converged = false;
  result.iterations = 0;
  for (int c = 1; c <= config.max_outer_iters; ++c) {
    m_step(data, posterior, params, result.admm, config, use_admm, &result.warnings);
    loglik = fused_pass(r_eff, mask, params, &posterior);
    const double obj = -penalized_from_parts(loglik, params, config, data.n_subjects());
    result.objective_trace.push_back(obj);
    result.iterations = c;
    if (std::abs(obj - obj_prev) < config.outer_tol * std::max(1.0, std::abs(obj_prev))) {
      result.converged = true;
      break;
    }
    obj_prev = obj;
  }

  // Collapse near-ties exactly, then refresh the posterior and likelihood so
  // the reported quantities describe the returned parameters.
  const Eigen::RowVectorXd colsum = posterior.colwise().sum();
  Vector weights = colsum.transpose();
  params = merge_item_params(params, config, weights);
  result.loglik = fused_pass(r_eff, mask, params, &posterior);
  result.posterior = std::move(posterior);
  result.params = std::move(params);

  const auto act = active_classes(result.params.proportions, config.rho);
  result.n_selected = static_cast<int>(act.size());
  result.active.assign(static_cast<std::size_t>(config.m_upper), 0);
  for (int k : act) result.active[static_cast<std::size_t>(k)] = 1;
  return result;
}

}  // namespace

void EmConfig::validate() const {
  if (m_upper < 1) throw invalid_input("config: m_upper must be at least 1");
  if (lambda1 < 0.0 || lambda2 < 0.0) throw invalid_input("config: penalties must be >= 0");
  if (lambda1 * m_upper >= 1.0)
    throw invalid_input("config: lambda1 must be below 1/m_upper");
  if (!(tau > 0.0)) throw invalid_input("config: tau must be positive");
  if (gamma < 0.0) throw invalid_input("config: gamma must be >= 0");
  if (!(rho > 0.0 && rho < 1.0)) throw invalid_input("config: rho must lie in (0,1)");
  if (!(theta_floor > 0.0 && theta_floor < 0.5))
    throw invalid_input("config: theta_floor must lie in (0,0.5)");
  if (max_outer_iters < 1) throw invalid_input("config: max_outer_iters must be >= 1");
  if (!(outer_tol > 0.0)) throw invalid_input("config: outer_tol must be positive");
  if (inner_gd_iters < 1) throw invalid_input("config: inner_gd_iters must be >= 1");
  if (!(inner_gd_step > 0.0)) throw invalid_input("config: inner_gd_step must be positive");
  if (merge_tol < 0.0) throw invalid_input("config: merge_tol must be >= 0");
}

int AdmmState::pair_index(int k, int l, int m) {
  if (!(0 <= k && k < l && l < m)) throw invalid_input("pair_index: need 0 <= k < l < m");
  return k * (2 * m - k - 1) / 2 + (l - k - 1);
}

double log_likelihood(const ResponseData& data, const LcmParams& params) {
  const Matrix r_eff = effective_responses(data);
  const Matrix* mask = data.mask ? &*data.mask : nullptr;
  return fused_pass(r_eff, mask, params, nullptr);
}

double tlp(double x, double tau) { return std::min(std::abs(x), tau); }

double soft_threshold(double x, double t) {
  const double mag = std::abs(x) - t;
  return mag > 0.0 ? (x > 0.0 ? mag : -mag) : 0.0;
}

double penalized_objective(const ResponseData& data, const LcmParams& params,
                           const EmConfig& config) {
  return penalized_from_parts(log_likelihood(data, params), params, config, data.n_subjects());
}

PosteriorMatrix e_step(const ResponseData& data, const LcmParams& params) {
  const Matrix r_eff = effective_responses(data);
  const Matrix* mask = data.mask ? &*data.mask : nullptr;
  Matrix posterior;
  fused_pass(r_eff, mask, params, &posterior);
  return posterior;
}

Vector update_proportions(const PosteriorMatrix& posterior, const EmConfig& config,
                          const Vector& current_pi) {
  if (posterior.cols() != current_pi.size())
    throw invalid_input("update_proportions: posterior/proportion width mismatch");
  const int m = static_cast<int>(current_pi.size());
  const double denom = 1.0 - config.m_upper * config.lambda1;
  const double floor_value = config.rho / 10.0;
  const Eigen::RowVectorXd means = posterior.colwise().mean();

  Vector out = current_pi;
  std::vector<int> survivors, updatable;
  double frozen_mass = 0.0, survivor_raw = 0.0;
  for (int k = 0; k < m; ++k) {
    if (!(current_pi[k] > config.rho)) {  // frozen: never updated again
      frozen_mass += out[k];
      continue;
    }
    updatable.push_back(k);
    const double raw = (means[k] - config.lambda1) / denom;
    if (raw <= config.rho) {
      out[k] = floor_value;
      frozen_mass += floor_value;
    } else {
      out[k] = raw;
      survivors.push_back(k);
      survivor_raw += raw;
    }
  }
  if (survivors.empty()) {
    if (updatable.empty())
      throw invalid_input("update_proportions: no class above rho in current_pi");
    // Degenerate posterior: keep the best-supported updatable class so the
    // model never empties out entirely.
    int best = updatable.front();
    for (int k : updatable)
      if (means[k] > means[best]) best = k;
    frozen_mass -= out[best];
    survivors.push_back(best);
    survivor_raw = 1.0;
    out[best] = 1.0;
  }
  const double scale = (1.0 - frozen_mass) / survivor_raw;
  for (int k : survivors) out[k] *= scale;
  return out;
}

void update_item_params(const ResponseData& data, const PosteriorMatrix& posterior,
                        Matrix& theta, AdmmState& admm, const Vector& pi,
                        const EmConfig& config, int* warnings) {
  const int m = static_cast<int>(pi.size());
  if (theta.cols() != m) throw invalid_input("update_item_params: theta width mismatch");
  if (admm.d.cols() != AdmmState::n_pairs(m) || admm.d.rows() != theta.rows())
    throw invalid_input("update_item_params: ADMM state shape mismatch");
  const auto act = active_classes(pi, config.rho);

  const Matrix r_eff = effective_responses(data);
  const Matrix hits = r_eff.transpose() * posterior;  // J x M
  Matrix totals;
  Vector norm(theta.rows());
  if (data.mask) {
    totals = data.mask->transpose() * posterior;
    norm = data.mask->colwise().sum().transpose();  // per-item observed counts
  } else {
    const Eigen::RowVectorXd colsum = posterior.colwise().sum();
    totals = colsum.replicate(theta.rows(), 1);
    norm.setConstant(static_cast<double>(data.n_subjects()));
  }

  const double threshold = config.gamma > 0.0 ? config.lambda2 / config.gamma : 0.0;
  for (int j = 0; j < theta.rows(); ++j) {
    // Theta sweep, ascending in k: pairs with the smaller-indexed class see
    // the value updated earlier in this sweep.
    for (int k : act) {
      CellLoss loss;
      loss.a = hits(j, k) / norm[j];
      loss.b = (totals(j, k) - hits(j, k)) / norm[j];
      loss.gamma = config.gamma;
      for (int l : act) {
        if (l == k) continue;
        if (l > k) {
          const int p = AdmmState::pair_index(k, l, m);
          loss.target_sum += theta(j, l) + admm.d(j, p) + admm.mu(j, p);
        } else {
          const int p = AdmmState::pair_index(l, k, m);
          loss.target_sum += theta(j, l) - admm.d(j, p) - admm.mu(j, p);
        }
        ++loss.n_targets;
      }
      theta(j, k) = minimize_cell(loss, theta(j, k), config, warnings);
    }
    // DC split update and scaled dual ascent on the new theta values.
    for (std::size_t a = 0; a < act.size(); ++a)
      for (std::size_t b = a + 1; b < act.size(); ++b) {
        const int k = act[a], l = act[b];
        const int p = AdmmState::pair_index(k, l, m);
        const double diff = theta(j, k) - theta(j, l);
        const double v = diff - admm.mu(j, p);
        const double d_new =
            std::abs(admm.d(j, p)) >= config.tau ? v : soft_threshold(v, threshold);
        admm.mu(j, p) += d_new - diff;
        admm.d(j, p) = d_new;
      }
  }
}

FitResult fit(const ResponseData& data, const EmConfig& config, const LcmParams& init) {
  if (data.mask && !data.mask_all_ones())
    throw invalid_input("fit: data carries missing entries; use fit_missing");
  if (data.mask) {
    ResponseData unmasked;
    unmasked.values = data.values;
    return run_em(unmasked, config, init);
  }
  return run_em(data, config, init);
}

FitResult fit_missing(const ResponseData& data, const EmConfig& config,
                      const LcmParams& init) {
  if (!data.mask) throw invalid_input("fit_missing: data has no observation mask");
  if (data.mask_all_ones()) {
    ResponseData unmasked;
    unmasked.values = data.values;
    return run_em(unmasked, config, init);  // exact reduction to fit()
  }
  return run_em(data, config, init);
}

FitResult fit_stochastic(const ResponseData& data, const EmConfig& config,
                         const LcmParams& init, const StochasticOptions& opts) {
  config.validate();
  data.validate();
  if (!(opts.row_frac > 0.0 && opts.row_frac <= 1.0) ||
      !(opts.col_frac > 0.0 && opts.col_frac <= 1.0))
    throw invalid_input("fit_stochastic: fractions must lie in (0,1]");
  for (double w : opts.weights)
    if (!(w > 0.0 && w <= 1.0))
      throw invalid_input("fit_stochastic: explicit weights must lie in (0,1]");

  LcmParams params = sanitize_init(data, config, init);
  const Matrix r_eff = effective_responses(data);
  const Matrix* mask = data.mask ? &*data.mask : nullptr;
  const bool use_admm = config.lambda2 > 0.0 && config.gamma > 0.0;
  const int n = data.n_subjects(), j_total = data.n_items();
  const int n_rows = std::max(1, static_cast<int>(std::ceil(opts.row_frac * n)));
  const int n_cols = std::max(1, static_cast<int>(std::ceil(opts.col_frac * j_total)));
  const bool identity_rows = opts.row_frac == 1.0;
  const bool identity_cols = opts.col_frac == 1.0;

  PhiloxRng rng(opts.seed, 0);
  auto sample_indices = [&rng](int count, int from) {
    // Partial Fisher-Yates, then ascending order for stable reductions.
    std::vector<int> pool(static_cast<std::size_t>(from));
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < count; ++i) {
      const int pick = i + static_cast<int>(rng.uniform_int(
                               static_cast<std::uint64_t>(from - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick)]);
    }
    pool.resize(static_cast<std::size_t>(count));
    std::sort(pool.begin(), pool.end());
    return pool;
  };

  FitResult result;
  result.admm = init_admm(params.item_params, config.m_upper);
  result.warnings = 0;

  Matrix posterior;
  double loglik = fused_pass(r_eff, mask, params, &posterior);
  double obj_prev = -penalized_from_parts(loglik, params, config, n);

  result.converged = false;
  result.iterations = 0;
  for (int c = 1; c <= config.max_outer_iters; ++c) {
    const double w = opts.weights.empty()
                         ? std::pow(static_cast<double>(c) + 1.0, -0.6)
                         : opts.weights[std::min<std::size_t>(
                               static_cast<std::size_t>(c) - 1, opts.weights.size() - 1)];
    if (identity_rows && identity_cols && w == 1.0) {
      // Exact reduction: same update, same matrices, no blending.
      m_step(data, posterior, params, result.admm, config, use_admm, &result.warnings);
    } else {
      const std::vector<int> rows =
          identity_rows ? std::vector<int>() : sample_indices(n_rows, n);
      const std::vector<int> cols =
          identity_cols ? std::vector<int>() : sample_indices(n_cols, j_total);
      const int nr = identity_rows ? n : n_rows;
      const int nc = identity_cols ? j_total : n_cols;
      auto row_at = [&](int i) { return identity_rows ? i : rows[static_cast<std::size_t>(i)]; };
      auto col_at = [&](int j) { return identity_cols ? j : cols[static_cast<std::size_t>(j)]; };

      ResponseData sub;
      sub.values.resize(nr, nc);
      if (data.mask) sub.mask.emplace(nr, nc);
      for (int i = 0; i < nr; ++i)
        for (int j = 0; j < nc; ++j) {
          sub.values(i, j) = data.values(row_at(i), col_at(j));
          if (data.mask) (*sub.mask)(i, j) = (*data.mask)(row_at(i), col_at(j));
        }

      LcmParams scratch = params;
      scratch.item_params.resize(nc, config.m_upper);
      for (int j = 0; j < nc; ++j)
        scratch.item_params.row(j) = params.item_params.row(col_at(j));

      const Matrix sub_eff = effective_responses(sub);
      const Matrix* sub_mask = sub.mask ? &*sub.mask : nullptr;
      Matrix sub_posterior;
      fused_pass(sub_eff, sub_mask, scratch, &sub_posterior);

      AdmmState sub_admm;
      sub_admm.d.resize(nc, result.admm.d.cols());
      sub_admm.mu.resize(nc, result.admm.mu.cols());
      for (int j = 0; j < nc; ++j) {
        sub_admm.d.row(j) = result.admm.d.row(col_at(j));
        sub_admm.mu.row(j) = result.admm.mu.row(col_at(j));
      }

      m_step(sub, sub_posterior, scratch, sub_admm, config, use_admm, &result.warnings);

      // Blend intermediate into current; ADMM state is carried, not blended.
      params.proportions = (1.0 - w) * params.proportions + w * scratch.proportions;
      for (int j = 0; j < nc; ++j) {
        params.item_params.row(col_at(j)) = (1.0 - w) * params.item_params.row(col_at(j)) +
                                            w * scratch.item_params.row(j);
        result.admm.d.row(col_at(j)) = sub_admm.d.row(j);
        result.admm.mu.row(col_at(j)) = sub_admm.mu.row(j);
      }
    }
    loglik = fused_pass(r_eff, mask, params, &posterior);
    const double obj = -penalized_from_parts(loglik, params, config, n);
    result.objective_trace.push_back(obj);
    result.iterations = c;
    if (std::abs(obj - obj_prev) < config.outer_tol * std::max(1.0, std::abs(obj_prev))) {
      result.converged = true;
      break;
    }
    obj_prev = obj;
  }

  const Eigen::RowVectorXd colsum = posterior.colwise().sum();
  Vector weights = colsum.transpose();
  params = merge_item_params(params, config, weights);
  result.loglik = fused_pass(r_eff, mask, params, &posterior);
  result.posterior = std::move(posterior);
  result.params = std::move(params);

  const auto act = active_classes(result.params.proportions, config.rho);
  result.n_selected = static_cast<int>(act.size());
  result.active.assign(static_cast<std::size_t>(config.m_upper), 0);
  for (int k : act) result.active[static_cast<std::size_t>(k)] = 1;
  return result;
}

LcmParams spectral_init(const ResponseData& data, int m) {
  data.validate();
  if (m < 1) throw invalid_input("spectral_init: m must be positive");
  const int n = data.n_subjects(), j_total = data.n_items();
  if (m > n) throw invalid_input("spectral_init: more classes than subjects");

  const Matrix a = effective_responses(data);
  Vector dr = a.rowwise().sum();
  Vector dc = a.colwise().sum().transpose();
  // Regularized degrees (add the mean): plain D^{-1/2} scaling inflates the
  // noise of low-degree rows until it swamps the class geometry, so sparse
  // classes shatter into mixed k-means shards. Adding the average degree is
  // the usual regularized-Laplacian remedy and is inert for dense rows.
  dr.array() += dr.mean();
  dc.array() += dc.mean();
  for (int i = 0; i < n; ++i)
    if (dr[i] == 0.0) dr[i] = 1.0;
  for (int j = 0; j < j_total; ++j)
    if (dc[j] == 0.0) dc[j] = 1.0;
  const Matrix normalized = dr.cwiseInverse().cwiseSqrt().asDiagonal() * a *
                            dc.cwiseInverse().cwiseSqrt().asDiagonal();

  Eigen::BDCSVD<Matrix> svd(normalized, Eigen::ComputeThinU);
  const int dim = std::min<int>(m, static_cast<int>(svd.matrixU().cols()));
  // Scale coordinates by their singular values (spectral scores). Raw singular
  // vectors give every direction unit norm, so when the class structure is
  // concentrated in few directions the remaining near-noise coordinates can
  // dominate the k-means geometry; weighting by sigma keeps them subordinate.
  const Matrix embed = svd.matrixU().leftCols(dim) *
                       svd.singularValues().head(dim).asDiagonal();

  // k-means with k-means++ seeding from a fixed internal stream; ties and
  // repairs are index-deterministic, so the whole init is reproducible.
  PhiloxRng rng(0x9e3779b97f4a7c15ull, 0);
  Matrix centers(m, dim);
  std::vector<double> dist2(static_cast<std::size_t>(n),
                            std::numeric_limits<double>::infinity());
  {
    const int first = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
    centers.row(0) = embed.row(first);
    for (int c = 1; c < m; ++c) {
      for (int i = 0; i < n; ++i)
        dist2[static_cast<std::size_t>(i)] =
            std::min(dist2[static_cast<std::size_t>(i)],
                     (embed.row(i) - centers.row(c - 1)).squaredNorm());
      const double total = std::accumulate(dist2.begin(), dist2.end(), 0.0);
      int pick = 0;
      if (total > 0.0) {
        pick = rng.categorical(dist2);
      } else {
        pick = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
      }
      centers.row(c) = embed.row(pick);
    }
  }

  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  std::vector<int> counts(static_cast<std::size_t>(m), 0);
  for (int pass = 0; pass < 100; ++pass) {
    bool changed = false;
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (embed.row(i) - centers.row(0)).squaredNorm();
      for (int c = 1; c < m; ++c) {
        const double d = (embed.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[static_cast<std::size_t>(i)] != best) {
        assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
      ++counts[static_cast<std::size_t>(best)];
    }
    // Repair empty clusters so every class starts with positive mass: move the
    // farthest member of the largest cluster.
    for (int c = 0; c < m; ++c) {
      while (counts[static_cast<std::size_t>(c)] == 0) {
        const int donor = static_cast<int>(std::distance(
            counts.begin(), std::max_element(counts.begin(), counts.end())));
        int worst = -1;
        double worst_d = -1.0;
        for (int i = 0; i < n; ++i) {
          if (assign[static_cast<std::size_t>(i)] != donor) continue;
          const double d = (embed.row(i) - centers.row(donor)).squaredNorm();
          if (d > worst_d) {
            worst_d = d;
            worst = i;
          }
        }
        assign[static_cast<std::size_t>(worst)] = c;
        --counts[static_cast<std::size_t>(donor)];
        ++counts[static_cast<std::size_t>(c)];
        changed = true;
      }
    }
    centers.setZero();
    for (int i = 0; i < n; ++i) centers.row(assign[static_cast<std::size_t>(i)]) += embed.row(i);
    for (int c = 0; c < m; ++c) centers.row(c) /= counts[static_cast<std::size_t>(c)];
    if (!changed && pass > 0) break;
  }

  // Stable relabeling: big clusters first, ties by earliest member.
  std::vector<int> first_member(static_cast<std::size_t>(m), n);
  for (int i = n - 1; i >= 0; --i)
    first_member[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])] = i;
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a_, int b_) {
    if (counts[static_cast<std::size_t>(a_)] != counts[static_cast<std::size_t>(b_)])
      return counts[static_cast<std::size_t>(a_)] > counts[static_cast<std::size_t>(b_)];
    return first_member[static_cast<std::size_t>(a_)] < first_member[static_cast<std::size_t>(b_)];
  });
  std::vector<int> rank(static_cast<std::size_t>(m));
  for (int c = 0; c < m; ++c) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(c)])] = c;

  const double floor = 1e-4;
  LcmParams params;
  params.proportions.resize(m);
  params.item_params.resize(j_total, m);
  Matrix hit(j_total, m), seen(j_total, m);
  hit.setZero();
  seen.setZero();
  for (int i = 0; i < n; ++i) {
    const int c = rank[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    for (int j = 0; j < j_total; ++j) {
      const double obs = data.mask ? (*data.mask)(i, j) : 1.0;
      seen(j, c) += obs;
      hit(j, c) += obs * data.values(i, j);
    }
  }
  for (int c = 0; c < m; ++c) {
    params.proportions[rank[static_cast<std::size_t>(c)]] =
        static_cast<double>(counts[static_cast<std::size_t>(c)]) / n;
    for (int j = 0; j < j_total; ++j) {
      const int rc = rank[static_cast<std::size_t>(c)];
      params.item_params(j, rc) =
          seen(j, rc) > 0.0 ? clamp_unit(hit(j, rc) / seen(j, rc), floor) : 0.5;
    }
  }
  return params;
}

LcmParams random_init(int n_items, int m, PhiloxRng& rng, double theta_floor) {
  if (n_items < 1 || m < 1) throw invalid_input("random_init: dimensions must be positive");
  LcmParams params;
  params.proportions.resize(m);
  double total = 0.0;
  for (int k = 0; k < m; ++k) {
    const double e = -std::log(1.0 - rng.uniform());  // Exp(1) -> flat Dirichlet
    params.proportions[k] = e;
    total += e;
  }
  params.proportions /= total;
  params.item_params.resize(n_items, m);
  for (int j = 0; j < n_items; ++j)
    for (int k = 0; k < m; ++k)
      params.item_params(j, k) = clamp_unit(rng.uniform(0.1, 0.9), theta_floor);
  return params;
}

LcmParams random_init(const ResponseData& data, int m, PhiloxRng& rng,
                      double theta_floor) {
  if (m < 1) throw invalid_input("random_init: class count must be positive");
  data.validate();
  const int n = data.n_subjects();
  const int j_total = data.n_items();

  LcmParams params;
  params.proportions.resize(m);
  double total = 0.0;
  for (int k = 0; k < m; ++k) {
    const double w = 1.0 + 0.1 * rng.uniform();
    params.proportions[k] = w;
    total += w;
  }
  params.proportions /= total;

  constexpr double kJitter = 0.15;
  params.item_params.resize(j_total, m);
  for (int j = 0; j < j_total; ++j) {
    double seen = 0.0;
    double hit = 0.0;
    for (int i = 0; i < n; ++i) {
      const double obs = data.mask ? (*data.mask)(i, j) : 1.0;
      seen += obs;
      hit += obs * data.values(i, j);
    }
    const double pooled = seen > 0.0 ? hit / seen : 0.5;
    for (int k = 0; k < m; ++k)
      params.item_params(j, k) =
          clamp_unit(pooled + rng.uniform(-kJitter, kJitter), theta_floor);
  }
  return params;
}

LcmParams merge_item_params(const LcmParams& params, const EmConfig& config,
                            const Vector& weights) {
  const auto act = active_classes(params.proportions, config.rho);
  Vector w = weights.size() > 0 ? weights : params.proportions;
  if (w.size() != params.proportions.size())
    throw invalid_input("merge_item_params: weight length mismatch");

  LcmParams out = params;
  std::vector<std::pair<double, int>> cells;
  for (int j = 0; j < params.item_params.rows(); ++j) {
    cells.clear();
    for (int k : act) cells.emplace_back(params.item_params(j, k), k);
    std::sort(cells.begin(), cells.end());
    std::size_t start = 0;
    for (std::size_t i = 1; i <= cells.size(); ++i) {
      const bool split =
          i == cells.size() || cells[i].first - cells[i - 1].first > config.merge_tol;
      if (!split) continue;
      double mass = 0.0, value = 0.0;
      for (std::size_t t = start; t < i; ++t) mass += w[cells[t].second];
      if (mass > kTinyWeight) {
        for (std::size_t t = start; t < i; ++t)
          value += w[cells[t].second] / mass * cells[t].first;
      } else {
        for (std::size_t t = start; t < i; ++t) value += cells[t].first;
        value /= static_cast<double>(i - start);
      }
      for (std::size_t t = start; t < i; ++t) out.item_params(j, cells[t].second) = value;
      start = i;
    }
  }
  return out;
}

}  // namespace hlcm
