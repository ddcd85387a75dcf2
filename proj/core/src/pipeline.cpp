#include "hlcm/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <mutex>
#include <thread>

#include "hlcm/io.hpp"
#include "hlcm/recovery.hpp"

namespace hlcm {

namespace {

std::string rep_dir(const std::string& out_dir, int rep) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "rep_%03d", rep);
  return out_dir + "/" + buf;
}

// Metrics when recovery could not produce a structure: class count can still
// be judged, and theta error is defined whenever the count matches.
Metrics fallback_metrics(const FitResult& best, const GroundTruth& truth, double rho,
                         double eps_gamma) {
  RecoveryResult stub;
  stub.active = active_classes(best.params.proportions, rho);
  stub.gamma = indicator_matrix(best.params, rho, eps_gamma);
  stub.dag.n_nodes = 0;
  stub.hierarchy.n_attributes = 1;
  stub.q.n_attributes = 0;
  stub.q.rows.assign(static_cast<std::size_t>(stub.gamma.rows()), 0);
  stub.class_to_node.assign(static_cast<std::size_t>(stub.gamma.cols()), -1);
  stub.k_hat = 0;
  stub.degenerate = true;
  return score(stub, best, truth, 0.0);
}

}  // namespace

PipelineResult run_pipeline(const PipelineSpec& spec) {
  if (spec.reps < 1) throw invalid_input("pipeline: reps must be positive");
  if (!(spec.noise > 0.0 && spec.noise < 0.5))
    throw invalid_input("pipeline: noise must lie in (0, 0.5)");
  spec.base.validate();
  spec.grid.validate();
  if (spec.init != "spectral" && spec.init != "random")
    throw invalid_input("pipeline: init must be 'spectral' or 'random'");

  SimSpec sim;
  sim.model = spec.model;
  sim.hierarchy = hierarchy_template(spec.hierarchy, 4);
  sim.n_items = spec.n_items;
  sim.n_subjects = spec.n_subjects;
  sim.theta_high = 1.0 - spec.noise;
  sim.theta_low = spec.noise;
  sim.seed = spec.seed;
  sim.validate();

  const bool artifacts = spec.write_artifacts && !spec.out_dir.empty();
  if (artifacts) std::filesystem::create_directories(spec.out_dir);
  const int grid_jobs = spec.reps == 1 ? std::max(1, spec.jobs) : 1;

  PipelineResult result;
  result.reps.resize(static_cast<std::size_t>(spec.reps));

  std::atomic<int> cursor{0};
  std::exception_ptr failure;
  std::mutex failure_lock;

  auto run_rep = [&](int rep) {
    RepOutcome& outcome = result.reps[static_cast<std::size_t>(rep)];
    const auto started = std::chrono::steady_clock::now();
    const std::uint64_t stream_base = static_cast<std::uint64_t>(rep) * stream_stride;

    PhiloxRng truth_rng(sim.seed, stream_base + 0);
    GroundTruth truth = build_truth(sim, truth_rng);
    PhiloxRng response_rng(sim.seed, stream_base + 1);
    auto [data, memberships] = sample_responses(truth, sim.n_subjects, response_rng);
    truth.memberships = std::move(memberships);
    if (spec.missing_rate > 0.0) {
      PhiloxRng missing_rng(sim.seed, stream_base + 2);
      data = apply_missingness(data, spec.missing_rate, missing_rng);
    }

    LcmParams init;
    if (spec.init == "spectral") {
      init = spectral_init(data, spec.base.m_upper);
    } else {
      PhiloxRng init_rng(sim.seed, stream_base + 3);
      init = random_init(data, spec.base.m_upper, init_rng, spec.base.theta_floor);
    }

    TwoStageResult tuned = two_stage_search(data, spec.grid, spec.base, init, grid_jobs);
    outcome.m_hat = tuned.best.n_selected;
    outcome.converged = tuned.best.converged;

    RecoveryResult recovery;
    try {
      recovery = recover(tuned.best.params, spec.base.rho, spec.eps_gamma, spec.resolved_t());
      outcome.recovery_ok = true;
      outcome.metrics = score(recovery, tuned.best, truth, spec.resolved_t());
    } catch (const recovery_failed& e) {
      outcome.recovery_ok = false;
      outcome.error = e.what();
      outcome.metrics = fallback_metrics(tuned.best, truth, spec.base.rho, spec.eps_gamma);
    }

    if (artifacts) {
      const std::string dir = rep_dir(spec.out_dir, rep);
      std::filesystem::create_directories(dir);
      io::write_responses_csv(dir + "/responses.csv", data);
      io::write_truth_json(dir + "/truth.json", truth, sim);
      io::write_bic_table_csv(dir + "/bic_table.csv", tuned.table);
      io::write_fit_json(dir + "/fit.json", tuned.best, tuned.chosen,
                         bic(tuned.best, data, tuned.chosen.rho));
      if (outcome.recovery_ok)
        io::write_recovery_json(dir + "/recovery.json", recovery, spec.base.rho,
                                spec.eps_gamma, spec.resolved_t());
      io::write_metrics_json(dir + "/metrics.json", outcome.metrics);
    }
    outcome.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };

  auto worker = [&]() {
    while (true) {
      const int rep = cursor.fetch_add(1);
      if (rep >= spec.reps) return;
      try {
        run_rep(rep);
      } catch (...) {
        std::lock_guard<std::mutex> hold(failure_lock);
        if (!failure) failure = std::current_exception();
        cursor.store(spec.reps);
        return;
      }
    }
  };

  const int n_threads = std::max(1, std::min(spec.jobs, spec.reps));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  double acc_m = 0.0, acc_p = 0.0, acc_e = 0.0;
  double mse_sum = 0.0, q_sum = 0.0;
  int mse_n = 0, q_n = 0;
  for (const RepOutcome& r : result.reps) {
    acc_m += r.metrics.acc_m;
    acc_p += r.metrics.acc_p;
    acc_e += r.metrics.acc_e;
    if (r.metrics.mse_theta) {
      mse_sum += *r.metrics.mse_theta;
      ++mse_n;
    }
    if (r.metrics.acc_q) {
      q_sum += *r.metrics.acc_q;
      ++q_n;
    }
  }
  result.mean_acc_m = acc_m / spec.reps;
  result.mean_acc_p = acc_p / spec.reps;
  result.mean_acc_e = acc_e / spec.reps;
  if (mse_n > 0) result.mean_mse_theta = mse_sum / mse_n;
  if (q_n > 0) result.mean_acc_q = q_sum / q_n;
  return result;
}

std::string metrics_csv_header() {
  return "hierarchy,N,r,method,acc_m,acc_p,acc_e,mse_theta,acc_q";
}

std::string metrics_csv_row(const PipelineSpec& spec, const PipelineResult& result) {
  std::string row = to_string(spec.hierarchy);
  row += ',' + std::to_string(spec.n_subjects);
  row += ',' + io::format_double(spec.noise);
  row += ',' + to_string(spec.model);
  row += ',' + io::format_double(result.mean_acc_m);
  row += ',' + io::format_double(result.mean_acc_p);
  row += ',' + io::format_double(result.mean_acc_e);
  row += ',';
  row += result.mean_mse_theta ? io::format_double(*result.mean_mse_theta) : "NA";
  row += ',';
  row += result.mean_acc_q ? io::format_double(*result.mean_acc_q) : "NA";
  return row;
}

}  // namespace hlcm
