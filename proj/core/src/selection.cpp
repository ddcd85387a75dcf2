#include "hlcm/selection.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace hlcm {

namespace {

FitResult fit_auto(const ResponseData& data, const EmConfig& config, const LcmParams& init) {
  if (data.mask && !data.mask_all_ones()) return fit_missing(data, config, init);
  return fit(data, config, init);
}

struct GridPoint {
  int stage = 1;
  EmConfig config;
};

// Runs every point, optionally concurrently; output order matches input.
std::vector<FitResult> run_points(const ResponseData& data, const std::vector<GridPoint>& points,
                                  const LcmParams& init, int jobs, const GridHooks& hooks) {
  std::vector<FitResult> fits(points.size());
  std::atomic<std::size_t> cursor{0};
  std::exception_ptr failure;
  std::mutex failure_lock;

  auto worker = [&]() {
    while (true) {
      const std::size_t idx = cursor.fetch_add(1);
      if (idx >= points.size()) return;
      try {
        FitResult cached;
        if (hooks.load && hooks.load(points[idx].stage, static_cast<int>(idx), cached)) {
          fits[idx] = std::move(cached);
          continue;
        }
        fits[idx] = fit_auto(data, points[idx].config, init);
        if (hooks.save) hooks.save(points[idx].stage, static_cast<int>(idx), fits[idx]);
      } catch (...) {
        std::lock_guard<std::mutex> hold(failure_lock);
        if (!failure) failure = std::current_exception();
        cursor.store(points.size());
        return;
      }
    }
  };

  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(points.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return fits;
}

}  // namespace

TuningGrid TuningGrid::defaults() {
  TuningGrid g;
  for (int i = 0; i <= 8; ++i) g.stage1_lambda1.push_back(0.01 + 0.005 * i);
  g.stage1_lambda2 = {0.001, 0.005, 0.01, 0.015};
  g.stage1_tau = 0.3;
  for (int e = -1; e <= 3; ++e) g.stage2_lambda2.push_back(std::exp(static_cast<double>(e)));
  g.stage2_tau = {0.03, 0.05, 0.1};
  return g;
}

void TuningGrid::validate() const {
  if (stage1_lambda1.empty() || stage1_lambda2.empty() || stage2_lambda2.empty() ||
      stage2_tau.empty())
    throw invalid_input("tuning grid: every list must be non-empty");
  if (!(stage1_tau > 0.0)) throw invalid_input("tuning grid: stage1_tau must be positive");
  for (double v : stage1_lambda1)
    if (v < 0.0) throw invalid_input("tuning grid: lambda1 values must be >= 0");
  for (double v : stage1_lambda2)
    if (v < 0.0) throw invalid_input("tuning grid: lambda2 values must be >= 0");
  for (double v : stage2_lambda2)
    if (v < 0.0) throw invalid_input("tuning grid: lambda2 values must be >= 0");
  for (double v : stage2_tau)
    if (!(v > 0.0)) throw invalid_input("tuning grid: tau values must be positive");
}

int item_dim(const Matrix& theta, const std::vector<int>& active, int j) {
  if (active.empty()) return 0;
  std::vector<double> values;
  values.reserve(active.size());
  for (int k : active) values.push_back(theta(j, k));
  std::sort(values.begin(), values.end());
  int distinct = 1;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] != values[i - 1]) ++distinct;
  return distinct;
}

double bic(const FitResult& fit, const ResponseData& data, double rho) {
  const auto act = active_classes(fit.params.proportions, rho);
  int dim_total = 0;
  for (int j = 0; j < fit.params.item_params.rows(); ++j)
    dim_total += item_dim(fit.params.item_params, act, j);
  const double n_params = static_cast<double>(act.size()) - 1.0 + dim_total;
  return -2.0 * fit.loglik + std::log(static_cast<double>(data.n_subjects())) * n_params;
}

TwoStageResult two_stage_search(const ResponseData& data, const TuningGrid& grid,
                                const EmConfig& base, const LcmParams& init, int jobs,
                                const GridHooks& hooks) {
  grid.validate();
  data.validate();

  auto make_row = [&](int stage, const EmConfig& config, const FitResult& fr) {
    BicRow row;
    row.stage = stage;
    row.lambda1 = config.lambda1;
    row.lambda2 = config.lambda2;
    row.tau = config.tau;
    row.loglik = fr.loglik;
    const auto act = active_classes(fr.params.proportions, config.rho);
    row.m_hat = static_cast<int>(act.size());
    row.dim_total = 0;
    for (int j = 0; j < fr.params.item_params.rows(); ++j)
      row.dim_total += item_dim(fr.params.item_params, act, j);
    row.bic = -2.0 * fr.loglik +
              std::log(static_cast<double>(data.n_subjects())) *
                  (static_cast<double>(row.m_hat) - 1.0 + row.dim_total);
    return row;
  };

  // Ties break toward fewer classes, then fewer parameters, then grid order.
  auto better = [](const BicRow& a, int ia, const BicRow& b, int ib) {
    if (a.bic != b.bic) return a.bic < b.bic;
    if (a.m_hat != b.m_hat) return a.m_hat < b.m_hat;
    if (a.dim_total != b.dim_total) return a.dim_total < b.dim_total;
    return ia < ib;
  };

  std::vector<GridPoint> stage1;
  for (double l1 : grid.stage1_lambda1)
    for (double l2 : grid.stage1_lambda2) {
      GridPoint point;
      point.stage = 1;
      point.config = base;
      point.config.lambda1 = l1;
      point.config.lambda2 = l2;
      point.config.tau = grid.stage1_tau;
      stage1.push_back(point);
    }
  std::vector<FitResult> fits1 = run_points(data, stage1, init, jobs, hooks);

  TwoStageResult result;
  int best1 = -1;
  for (std::size_t i = 0; i < stage1.size(); ++i) {
    result.table.push_back(make_row(1, stage1[i].config, fits1[i]));
    if (best1 < 0 || better(result.table[i], static_cast<int>(i),
                            result.table[static_cast<std::size_t>(best1)], best1))
      best1 = static_cast<int>(i);
  }

  const LcmParams warm = fits1[static_cast<std::size_t>(best1)].params;
  std::vector<GridPoint> stage2;
  for (double l2 : grid.stage2_lambda2)
    for (double tau : grid.stage2_tau) {
      GridPoint point;
      point.stage = 2;
      point.config = base;
      point.config.lambda1 = 0.0;
      point.config.lambda2 = l2;
      point.config.tau = tau;
      stage2.push_back(point);
    }
  std::vector<FitResult> fits2 = run_points(data, stage2, warm, jobs, hooks);
  for (std::size_t i = 0; i < stage2.size(); ++i)
    result.table.push_back(make_row(2, stage2[i].config, fits2[i]));

  int best = -1;
  for (std::size_t i = 0; i < result.table.size(); ++i)
    if (best < 0 || better(result.table[i], static_cast<int>(i),
                           result.table[static_cast<std::size_t>(best)], best))
      best = static_cast<int>(i);

  result.best_row = best;
  const std::size_t n1 = stage1.size();
  if (static_cast<std::size_t>(best) < n1) {
    result.best = fits1[static_cast<std::size_t>(best)];
    result.chosen = stage1[static_cast<std::size_t>(best)].config;
  } else {
    result.best = fits2[static_cast<std::size_t>(best) - n1];
    result.chosen = stage2[static_cast<std::size_t>(best) - n1].config;
  }
  return result;
}

}  // namespace hlcm
