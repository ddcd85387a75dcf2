// hlcm: simulate, fit, tune, recover, evaluate and pipeline commands for
// hierarchical latent class models. See README.md for formats and examples.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hlcm/estimator.hpp"
#include "hlcm/evaluate.hpp"
#include "hlcm/io.hpp"
#include "hlcm/model.hpp"
#include "hlcm/pipeline.hpp"
#include "hlcm/recovery.hpp"
#include "hlcm/selection.hpp"
#include "hlcm/simulate.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitRecovery = 4;
constexpr int kExitNoConverge = 5;

// --config support: a JSON object whose entries override the parsed flags.
// Keys are the long option names without leading dashes; '_' and '-' are
// interchangeable.
class Overrides {
 public:
  template <class T>
  void bind(const std::string& flag, T* target) {
    setters_[normalize(flag)] = [target](const json& v) { *target = v.get<T>(); };
  }

  void apply(const std::string& path) const {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw hlcm::data_error(path + ": cannot open");
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw hlcm::data_error(path + ": " + e.what());
    }
    if (!j.is_object()) throw hlcm::data_error(path + ": config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      const auto it = setters_.find(normalize(key));
      if (it == setters_.end())
        throw hlcm::invalid_input("config key '" + key + "' does not match any flag");
      it->second(value);
    }
  }

 private:
  static std::string normalize(std::string s) {
    for (char& c : s)
      if (c == '_') c = '-';
    while (!s.empty() && s.front() == '-') s.erase(s.begin());
    return s;
  }

  std::map<std::string, std::function<void(const json&)>> setters_;
};

struct EstimatorFlags {
  hlcm::EmConfig config;

  void add(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("--m-upper", config.m_upper, "Upper bound on latent classes");
    cmd->add_option("--lambda1", config.lambda1, "Log-penalty weight (per subject)");
    cmd->add_option("--lambda2", config.lambda2, "TLP weight (per subject)");
    cmd->add_option("--tau", config.tau, "TLP truncation knot");
    cmd->add_option("--gamma", config.gamma, "ADMM quadratic penalty");
    cmd->add_option("--rho", config.rho, "Significance threshold on proportions");
    cmd->add_option("--theta-floor", config.theta_floor, "Box floor for item parameters");
    cmd->add_option("--max-iters", config.max_outer_iters, "Outer EM iteration cap");
    cmd->add_option("--tol", config.outer_tol, "Relative objective tolerance");
    cmd->add_option("--inner-iters", config.inner_gd_iters, "Gradient steps per theta cell");
    cmd->add_option("--inner-step", config.inner_gd_step, "Base gradient step size");
    cmd->add_option("--merge-tol", config.merge_tol, "Post-fit level merge gap");
    ov.bind("m-upper", &config.m_upper);
    ov.bind("lambda1", &config.lambda1);
    ov.bind("lambda2", &config.lambda2);
    ov.bind("tau", &config.tau);
    ov.bind("gamma", &config.gamma);
    ov.bind("rho", &config.rho);
    ov.bind("theta-floor", &config.theta_floor);
    ov.bind("max-iters", &config.max_outer_iters);
    ov.bind("tol", &config.outer_tol);
    ov.bind("inner-iters", &config.inner_gd_iters);
    ov.bind("inner-step", &config.inner_gd_step);
    ov.bind("merge-tol", &config.merge_tol);
  }
};

struct GridFlags {
  hlcm::TuningGrid grid = hlcm::TuningGrid::defaults();

  void add(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("--stage1-lambda1", grid.stage1_lambda1, "Stage-1 lambda1 grid");
    cmd->add_option("--stage1-lambda2", grid.stage1_lambda2, "Stage-1 lambda2 grid");
    cmd->add_option("--stage1-tau", grid.stage1_tau, "Stage-1 truncation knot");
    cmd->add_option("--stage2-lambda2", grid.stage2_lambda2, "Stage-2 lambda2 grid");
    cmd->add_option("--stage2-tau", grid.stage2_tau, "Stage-2 tau grid");
    ov.bind("stage1-lambda1", &grid.stage1_lambda1);
    ov.bind("stage1-lambda2", &grid.stage1_lambda2);
    ov.bind("stage1-tau", &grid.stage1_tau);
    ov.bind("stage2-lambda2", &grid.stage2_lambda2);
    ov.bind("stage2-tau", &grid.stage2_tau);
  }
};

hlcm::LcmParams make_init(const std::string& kind, const hlcm::ResponseData& data,
                          const hlcm::EmConfig& config, std::uint64_t seed) {
  if (kind == "spectral") return hlcm::spectral_init(data, config.m_upper);
  if (kind == "random") {
    hlcm::PhiloxRng rng(seed, 3);
    return hlcm::random_init(data, config.m_upper, rng, config.theta_floor);
  }
  throw hlcm::invalid_input("init must be 'spectral' or 'random', got '" + kind + "'");
}

hlcm::FitResult fit_auto(const hlcm::ResponseData& data, const hlcm::EmConfig& config,
                         const hlcm::LcmParams& init) {
  if (data.mask && !data.mask_all_ones()) return hlcm::fit_missing(data, config, init);
  return hlcm::fit(data, config, init);
}

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

void write_posterior_csv(const std::string& path, const hlcm::Matrix& posterior) {
  std::string out;
  for (int k = 0; k < posterior.cols(); ++k) {
    if (k > 0) out += ',';
    out += "class_" + std::to_string(k + 1);
  }
  out += '\n';
  for (int i = 0; i < posterior.rows(); ++i) {
    for (int k = 0; k < posterior.cols(); ++k) {
      if (k > 0) out += ',';
      out += hlcm::io::format_double(posterior(i, k));
    }
    out += '\n';
  }
  hlcm::io::write_text_file(path, out);
}

// Node-level indicator matrix used when re-deriving Q after a profile
// override: a node is indicated when any member class is.
hlcm::IndicatorMatrix node_indicators(const hlcm::RecoveryResult& r) {
  hlcm::IndicatorMatrix node_gamma =
      hlcm::IndicatorMatrix::Zero(r.gamma.rows(), r.dag.n_nodes);
  for (int j = 0; j < r.gamma.rows(); ++j)
    for (int c = 0; c < r.gamma.cols(); ++c)
      if (r.gamma(j, c) != 0) node_gamma(j, r.class_to_node[static_cast<std::size_t>(c)]) = 1;
  return node_gamma;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const std::string& model, const std::string& hierarchy, int n, int items,
                 double noise, double theta_high, double theta_low, double missing_rate,
                 std::uint64_t seed, const std::string& out) {
  hlcm::SimSpec spec;
  spec.model = hlcm::model_type_from_string(model);
  spec.hierarchy = hlcm::hierarchy_template(hlcm::hierarchy_template_from_string(hierarchy), 4);
  spec.n_subjects = n;
  spec.n_items = items;
  spec.theta_high = theta_high > 0.0 ? theta_high : 1.0 - noise;
  spec.theta_low = theta_low > 0.0 ? theta_low : noise;
  spec.seed = seed;
  spec.validate();
  if (!(missing_rate >= 0.0 && missing_rate < 1.0))
    throw hlcm::invalid_input("--missing-rate must lie in [0,1)");

  auto [truth, data] = hlcm::simulate_dataset(spec);
  if (missing_rate > 0.0) {
    hlcm::PhiloxRng missing_rng(spec.seed, 2);
    data = hlcm::apply_missingness(data, missing_rate, missing_rng);
  }

  ensure_dir(out);
  hlcm::io::write_responses_csv(out + "/responses.csv", data);
  hlcm::io::write_truth_json(out + "/truth.json", truth, spec);
  json meta;
  meta["schema_version"] = hlcm::io::schema_version;
  meta["command"] = "simulate";
  meta["model"] = hlcm::to_string(spec.model);
  meta["hierarchy"] = hierarchy;
  meta["n_subjects"] = spec.n_subjects;
  meta["n_items"] = spec.n_items;
  meta["theta_high"] = spec.theta_high;
  meta["theta_low"] = spec.theta_low;
  meta["missing_rate"] = missing_rate;
  meta["seed"] = spec.seed;
  hlcm::io::write_text_file(out + "/meta.json", meta.dump(2) + "\n");
  std::cout << "simulate: wrote " << out << "/responses.csv (" << data.n_subjects() << "x"
            << data.n_items() << "), truth.json, meta.json\n";
  return kExitOk;
}

int cmd_fit(const std::string& data_path, const EstimatorFlags& est, const std::string& init_kind,
            std::uint64_t seed, bool posterior, bool strict, const std::string& out) {
  const hlcm::ResponseData data = hlcm::io::read_responses_csv(data_path);
  const hlcm::LcmParams init = make_init(init_kind, data, est.config, seed);
  const hlcm::FitResult fit = fit_auto(data, est.config, init);

  ensure_dir(out);
  hlcm::io::write_fit_json(out + "/fit.json", fit, est.config,
                           hlcm::bic(fit, data, est.config.rho));
  if (posterior) write_posterior_csv(out + "/posterior.csv", fit.posterior);
  std::cout << "fit: m_hat=" << fit.n_selected << " loglik=" << hlcm::io::format_double(fit.loglik)
            << " iterations=" << fit.iterations
            << (fit.converged ? " (converged)" : " (not converged)") << "\n";
  if (strict && !fit.converged) {
    std::cerr << "error: EM did not converge within --max-iters\n";
    return kExitNoConverge;
  }
  return kExitOk;
}

int cmd_tune(const std::string& data_path, const EstimatorFlags& est, const GridFlags& grids,
             const std::string& init_kind, std::uint64_t seed, int jobs, bool resume,
             bool strict, const std::string& out) {
  const hlcm::ResponseData data = hlcm::io::read_responses_csv(data_path);
  const hlcm::LcmParams init = make_init(init_kind, data, est.config, seed);

  ensure_dir(out);
  hlcm::GridHooks hooks;
  if (resume) {
    const std::string points_dir = out + "/points";
    ensure_dir(points_dir);
    auto point_path = [points_dir](int stage, int index) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "point_s%d_%03d.json", stage, index);
      return points_dir + "/" + buf;
    };
    hooks.load = [point_path](int stage, int index, hlcm::FitResult& fit) {
      const std::string path = point_path(stage, index);
      if (!fs::exists(path)) return false;
      fit = hlcm::io::read_fit_json(path).fit;
      return true;
    };
    hooks.save = [point_path, &est](int stage, int index, const hlcm::FitResult& fit) {
      hlcm::io::write_fit_json(point_path(stage, index), fit, est.config, 0.0);
    };
  }

  const hlcm::TwoStageResult tuned =
      hlcm::two_stage_search(data, grids.grid, est.config, init, jobs, hooks);
  hlcm::io::write_bic_table_csv(out + "/bic_table.csv", tuned.table);
  hlcm::io::write_fit_json(out + "/fit.json", tuned.best, tuned.chosen,
                           hlcm::bic(tuned.best, data, tuned.chosen.rho));
  json meta;
  meta["schema_version"] = hlcm::io::schema_version;
  meta["command"] = "tune";
  meta["best_row"] = tuned.best_row;
  meta["chosen"] = json{{"stage", tuned.table[static_cast<std::size_t>(tuned.best_row)].stage},
                        {"lambda1", tuned.chosen.lambda1},
                        {"lambda2", tuned.chosen.lambda2},
                        {"tau", tuned.chosen.tau}};
  meta["m_hat"] = tuned.best.n_selected;
  hlcm::io::write_text_file(out + "/meta.json", meta.dump(2) + "\n");
  std::cout << "tune: best row " << tuned.best_row << " (stage "
            << tuned.table[static_cast<std::size_t>(tuned.best_row)].stage << ", lambda1="
            << hlcm::io::format_double(tuned.chosen.lambda1) << ", lambda2="
            << hlcm::io::format_double(tuned.chosen.lambda2) << ", tau="
            << hlcm::io::format_double(tuned.chosen.tau) << "), m_hat=" << tuned.best.n_selected
            << "\n";
  if (strict && !tuned.best.converged) {
    std::cerr << "error: the selected fit did not converge\n";
    return kExitNoConverge;
  }
  return kExitOk;
}

int cmd_recover(const std::string& fit_path, double eps_gamma, double t, double rho_flag,
                const std::string& profiles_path, bool dot, const std::string& out) {
  const hlcm::io::FitFile fit_file = hlcm::io::read_fit_json(fit_path);
  const double rho = rho_flag >= 0.0 ? rho_flag : fit_file.config.rho;

  hlcm::RecoveryResult result = hlcm::recover(fit_file.fit.params, rho, eps_gamma, t);

  if (!profiles_path.empty()) {
    // Expert override: substitute the binary representations (one bit-string
    // per DAG node, node order) and re-derive the hierarchy and Q from them.
    const std::string text = hlcm::io::read_text_file(profiles_path);
    hlcm::AttributeProfileSet replacement;
    std::string line;
    std::istringstream stream(text);
    while (std::getline(stream, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (replacement.profiles.empty()) replacement.n_attributes = static_cast<int>(line.size());
      if (static_cast<int>(line.size()) != replacement.n_attributes)
        throw hlcm::data_error(profiles_path + ": inconsistent profile width");
      replacement.profiles.push_back(hlcm::profile_from_string(line));
    }
    if (replacement.size() != result.dag.n_nodes)
      throw hlcm::invalid_input("profile override must list exactly one profile per node (" +
                                std::to_string(result.dag.n_nodes) + ")");
    result.profiles = replacement;
    result.k_hat = replacement.n_attributes;
    result.hierarchy = hlcm::extract_hierarchy(replacement);
    result.warnings.push_back("binary representations overridden from " + profiles_path);
    result.q = hlcm::reconstruct_q(node_indicators(result), replacement, &result.warnings);
  }

  ensure_dir(out);
  hlcm::io::write_recovery_json(out + "/recovery.json", result, rho, eps_gamma, t);
  if (dot) hlcm::io::write_hierarchy_dot(out + "/hierarchy.dot", result.hierarchy);
  std::cout << "recover: m_hat=" << result.gamma.cols() << " k_hat=" << result.k_hat << " edges="
            << result.hierarchy.edges.size() << (result.degenerate ? " (degenerate)" : "")
            << "\n";
  for (const std::string& w : result.warnings) std::cerr << "warning: " << w << "\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& truth_path, const std::string& fit_path, double eps_gamma,
                 double t, double rho_flag, const std::string& out) {
  const hlcm::io::TruthFile truth_file = hlcm::io::read_truth_json(truth_path);
  const hlcm::io::FitFile fit_file = hlcm::io::read_fit_json(fit_path);
  const double rho = rho_flag >= 0.0 ? rho_flag : fit_file.config.rho;

  const hlcm::RecoveryResult recovery = hlcm::recover(fit_file.fit.params, rho, eps_gamma, t);
  const hlcm::Metrics metrics = hlcm::score(recovery, fit_file.fit, truth_file.truth, t);

  ensure_dir(out);
  hlcm::io::write_metrics_json(out + "/metrics.json", metrics);
  std::cout << "evaluate: acc_m=" << metrics.acc_m << " acc_p=" << metrics.acc_p
            << " acc_e=" << metrics.acc_e << " mse_theta="
            << (metrics.mse_theta ? hlcm::io::format_double(*metrics.mse_theta) : "NA")
            << " acc_q=" << (metrics.acc_q ? hlcm::io::format_double(*metrics.acc_q) : "NA")
            << "\n";
  return kExitOk;
}

int cmd_pipeline(hlcm::PipelineSpec spec, bool full_scale, bool reps_given, bool strict) {
  std::vector<std::string> rows;
  bool all_converged = true;

  auto run_cell = [&](hlcm::PipelineSpec cell) {
    const hlcm::PipelineResult result = hlcm::run_pipeline(cell);
    rows.push_back(hlcm::metrics_csv_row(cell, result));
    std::cout << rows.back() << "\n";
    for (const hlcm::RepOutcome& rep : result.reps) {
      if (!rep.converged) all_converged = false;
      if (!rep.recovery_ok)
        std::cerr << "warning: replication recovery failed: " << rep.error << "\n";
    }
  };

  std::cout << hlcm::metrics_csv_header() << "\n";
  if (!full_scale) {
    run_cell(spec);
  } else {
    // The complete results grid: every model/hierarchy/size/noise cell, 50
    // replications unless --reps was given explicitly.
    if (!reps_given) spec.reps = 50;
    const std::string base_out = spec.out_dir;
    for (const hlcm::ModelType model :
         {hlcm::ModelType::dina, hlcm::ModelType::dina_dino_mix, hlcm::ModelType::gdina}) {
      const std::vector<int> sizes =
          model == hlcm::ModelType::gdina ? std::vector<int>{1000, 2000}
                                          : std::vector<int>{500, 1000};
      for (const hlcm::HierarchyTemplate hier :
           {hlcm::HierarchyTemplate::linear, hlcm::HierarchyTemplate::convergent,
            hlcm::HierarchyTemplate::divergent, hlcm::HierarchyTemplate::unstructured}) {
        for (const int n : sizes)
          for (const double noise : {0.1, 0.2}) {
            hlcm::PipelineSpec cell = spec;
            cell.model = model;
            cell.hierarchy = hier;
            cell.n_subjects = n;
            cell.noise = noise;
            if (!base_out.empty())
              cell.out_dir = base_out + "/" + hlcm::to_string(model) + "_" +
                             hlcm::to_string(hier) + "_N" + std::to_string(n) + "_r" +
                             hlcm::io::format_double(noise);
            run_cell(cell);
          }
      }
    }
  }

  if (!spec.out_dir.empty() || !full_scale) {
    std::string csv = hlcm::metrics_csv_header() + "\n";
    for (const std::string& row : rows) csv += row + "\n";
    const std::string dir = spec.out_dir.empty() ? "." : spec.out_dir;
    ensure_dir(dir);
    hlcm::io::write_text_file(dir + "/metrics.csv", csv);
  }
  if (strict && !all_converged) {
    std::cerr << "error: at least one replication did not converge\n";
    return kExitNoConverge;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical latent class models: estimation and structure recovery"};
  app.require_subcommand(1);

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  Overrides sim_ov;
  std::string sim_model = "dina", sim_hier = "linear", sim_out = "sim";
  std::string sim_config;
  int sim_n = 1000, sim_items = 30;
  double sim_noise = 0.1, sim_high = -1.0, sim_low = -1.0, sim_missing = 0.0;
  std::uint64_t sim_seed = 0;
  sim->add_option("--model", sim_model, "dina|dino|mixed|gdina")->capture_default_str();
  sim->add_option("--hierarchy", sim_hier, "linear|convergent|divergent|unstructured")
      ->capture_default_str();
  sim->add_option("--n", sim_n, "Subjects")->capture_default_str();
  sim->add_option("--items", sim_items, "Items")->capture_default_str();
  sim->add_option("--noise", sim_noise, "r: theta_low = r, theta_high = 1-r")
      ->capture_default_str();
  sim->add_option("--theta-high", sim_high, "Explicit upper response probability");
  sim->add_option("--theta-low", sim_low, "Explicit lower response probability");
  sim->add_option("--missing-rate", sim_missing, "MCAR cell-mask probability")
      ->capture_default_str();
  sim->add_option("--seed", sim_seed, "RNG seed")->capture_default_str();
  sim->add_option("--out", sim_out, "Output directory")->capture_default_str();
  sim->add_option("--config", sim_config, "JSON file overriding flags");
  sim_ov.bind("model", &sim_model);
  sim_ov.bind("hierarchy", &sim_hier);
  sim_ov.bind("n", &sim_n);
  sim_ov.bind("items", &sim_items);
  sim_ov.bind("noise", &sim_noise);
  sim_ov.bind("theta-high", &sim_high);
  sim_ov.bind("theta-low", &sim_low);
  sim_ov.bind("missing-rate", &sim_missing);
  sim_ov.bind("seed", &sim_seed);
  sim_ov.bind("out", &sim_out);

  // ---- fit ----
  auto* fitc = app.add_subcommand("fit", "Penalized EM on a response CSV");
  Overrides fit_ov;
  EstimatorFlags fit_est;
  std::string fit_data, fit_init = "spectral", fit_out = "fit", fit_config;
  std::uint64_t fit_seed = 0;
  bool fit_posterior = false, fit_strict = false;
  fitc->add_option("--data", fit_data, "responses.csv")->required();
  fit_est.add(fitc, fit_ov);
  fitc->add_option("--init", fit_init, "spectral|random")->capture_default_str();
  fitc->add_option("--seed", fit_seed, "RNG seed (random init)")->capture_default_str();
  fitc->add_flag("--posterior", fit_posterior, "Also write posterior.csv");
  fitc->add_flag("--strict", fit_strict, "Exit 5 when EM does not converge");
  fitc->add_option("--out", fit_out, "Output directory")->capture_default_str();
  fitc->add_option("--config", fit_config, "JSON file overriding flags");
  fit_ov.bind("data", &fit_data);
  fit_ov.bind("init", &fit_init);
  fit_ov.bind("seed", &fit_seed);
  fit_ov.bind("posterior", &fit_posterior);
  fit_ov.bind("strict", &fit_strict);
  fit_ov.bind("out", &fit_out);

  // ---- tune ----
  auto* tune = app.add_subcommand("tune", "Two-stage BIC hyperparameter search");
  Overrides tune_ov;
  EstimatorFlags tune_est;
  GridFlags tune_grid;
  std::string tune_data, tune_init = "spectral", tune_out = "tune", tune_config;
  std::uint64_t tune_seed = 0;
  int tune_jobs = 1;
  bool tune_resume = false, tune_strict = false;
  tune->add_option("--data", tune_data, "responses.csv")->required();
  tune_est.add(tune, tune_ov);
  tune_grid.add(tune, tune_ov);
  tune->add_option("--init", tune_init, "spectral|random")->capture_default_str();
  tune->add_option("--seed", tune_seed, "RNG seed (random init)")->capture_default_str();
  tune->add_option("--jobs", tune_jobs, "Concurrent grid points")->capture_default_str();
  tune->add_flag("--resume", tune_resume, "Cache/reuse per-point fits under out/points");
  tune->add_flag("--strict", tune_strict, "Exit 5 when the chosen fit did not converge");
  tune->add_option("--out", tune_out, "Output directory")->capture_default_str();
  tune->add_option("--config", tune_config, "JSON file overriding flags");
  tune_ov.bind("data", &tune_data);
  tune_ov.bind("init", &tune_init);
  tune_ov.bind("seed", &tune_seed);
  tune_ov.bind("jobs", &tune_jobs);
  tune_ov.bind("resume", &tune_resume);
  tune_ov.bind("strict", &tune_strict);
  tune_ov.bind("out", &tune_out);

  // ---- recover ----
  auto* rec = app.add_subcommand("recover", "Latent structure from a fit");
  Overrides rec_ov;
  std::string rec_fit, rec_profiles, rec_out = "recover", rec_config;
  double rec_eps = 0.01, rec_t = 0.0, rec_rho = -1.0;
  bool rec_dot = false;
  rec->add_option("--fit", rec_fit, "fit.json")->required();
  rec->add_option("--eps-gamma", rec_eps, "Indicator tolerance")->capture_default_str();
  rec->add_option("--t", rec_t, "Domination violation tolerance")->capture_default_str();
  rec->add_option("--rho", rec_rho, "Override the fit's significance threshold");
  rec->add_option("--profiles", rec_profiles,
                  "Bit-string file overriding the binary representations");
  rec->add_flag("--dot", rec_dot, "Also write hierarchy.dot");
  rec->add_option("--out", rec_out, "Output directory")->capture_default_str();
  rec->add_option("--config", rec_config, "JSON file overriding flags");
  rec_ov.bind("fit", &rec_fit);
  rec_ov.bind("eps-gamma", &rec_eps);
  rec_ov.bind("t", &rec_t);
  rec_ov.bind("rho", &rec_rho);
  rec_ov.bind("profiles", &rec_profiles);
  rec_ov.bind("dot", &rec_dot);
  rec_ov.bind("out", &rec_out);

  // ---- evaluate ----
  auto* ev = app.add_subcommand("evaluate", "Score a fit against simulation truth");
  Overrides ev_ov;
  std::string ev_truth, ev_fit, ev_out = "evaluate", ev_config;
  double ev_eps = 0.01, ev_t = 0.0, ev_rho = -1.0;
  ev->add_option("--truth", ev_truth, "truth.json")->required();
  ev->add_option("--fit", ev_fit, "fit.json")->required();
  ev->add_option("--eps-gamma", ev_eps, "Indicator tolerance")->capture_default_str();
  ev->add_option("--t", ev_t, "Domination violation tolerance")->capture_default_str();
  ev->add_option("--rho", ev_rho, "Override the fit's significance threshold");
  ev->add_option("--out", ev_out, "Output directory")->capture_default_str();
  ev->add_option("--config", ev_config, "JSON file overriding flags");
  ev_ov.bind("truth", &ev_truth);
  ev_ov.bind("fit", &ev_fit);
  ev_ov.bind("eps-gamma", &ev_eps);
  ev_ov.bind("t", &ev_t);
  ev_ov.bind("rho", &ev_rho);
  ev_ov.bind("out", &ev_out);

  // ---- pipeline ----
  auto* pipe = app.add_subcommand("pipeline", "simulate -> tune -> recover -> evaluate");
  Overrides pipe_ov;
  EstimatorFlags pipe_est;
  GridFlags pipe_grid;
  std::string pipe_model = "dina", pipe_hier = "linear", pipe_init = "spectral";
  std::string pipe_out, pipe_config;
  int pipe_n = 1000, pipe_items = 30, pipe_reps = 10, pipe_jobs = 1;
  double pipe_noise = 0.1, pipe_missing = 0.0, pipe_eps = 0.01, pipe_t = -1.0;
  std::uint64_t pipe_seed = 0;
  bool pipe_full = false, pipe_strict = false, pipe_no_artifacts = false;
  pipe->add_option("--model", pipe_model, "dina|dino|mixed|gdina")->capture_default_str();
  pipe->add_option("--hierarchy", pipe_hier, "linear|convergent|divergent|unstructured")
      ->capture_default_str();
  pipe->add_option("--n", pipe_n, "Subjects")->capture_default_str();
  pipe->add_option("--items", pipe_items, "Items")->capture_default_str();
  pipe->add_option("--noise", pipe_noise, "r: theta_low = r, theta_high = 1-r")
      ->capture_default_str();
  pipe->add_option("--missing-rate", pipe_missing, "MCAR cell-mask probability")
      ->capture_default_str();
  auto* reps_opt = pipe->add_option("--reps", pipe_reps, "Replications")->capture_default_str();
  pipe->add_option("--seed", pipe_seed, "RNG seed")->capture_default_str();
  pipe->add_option("--jobs", pipe_jobs, "Concurrent replications")->capture_default_str();
  pipe_est.add(pipe, pipe_ov);
  pipe_grid.add(pipe, pipe_ov);
  pipe->add_option("--init", pipe_init, "spectral|random")->capture_default_str();
  pipe->add_option("--eps-gamma", pipe_eps, "Indicator tolerance")->capture_default_str();
  pipe->add_option("--t", pipe_t, "Domination tolerance (<0: auto, one item)")
      ->capture_default_str();
  pipe->add_flag("--full-scale", pipe_full,
                 "Run every model/hierarchy/N/noise cell unattended (50 reps default)");
  pipe->add_flag("--no-artifacts", pipe_no_artifacts, "Skip per-replication files");
  pipe->add_flag("--strict", pipe_strict, "Exit 5 when any replication fails to converge");
  pipe->add_option("--out", pipe_out, "Output directory")->capture_default_str();
  pipe->add_option("--config", pipe_config, "JSON file overriding flags");
  pipe_ov.bind("model", &pipe_model);
  pipe_ov.bind("hierarchy", &pipe_hier);
  pipe_ov.bind("n", &pipe_n);
  pipe_ov.bind("items", &pipe_items);
  pipe_ov.bind("noise", &pipe_noise);
  pipe_ov.bind("missing-rate", &pipe_missing);
  pipe_ov.bind("reps", &pipe_reps);
  pipe_ov.bind("seed", &pipe_seed);
  pipe_ov.bind("jobs", &pipe_jobs);
  pipe_ov.bind("init", &pipe_init);
  pipe_ov.bind("eps-gamma", &pipe_eps);
  pipe_ov.bind("t", &pipe_t);
  pipe_ov.bind("full-scale", &pipe_full);
  pipe_ov.bind("no-artifacts", &pipe_no_artifacts);
  pipe_ov.bind("strict", &pipe_strict);
  pipe_ov.bind("out", &pipe_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (sim->parsed()) {
      sim_ov.apply(sim_config);
      return cmd_simulate(sim_model, sim_hier, sim_n, sim_items, sim_noise, sim_high, sim_low,
                          sim_missing, sim_seed, sim_out);
    }
    if (fitc->parsed()) {
      fit_ov.apply(fit_config);
      return cmd_fit(fit_data, fit_est, fit_init, fit_seed, fit_posterior, fit_strict, fit_out);
    }
    if (tune->parsed()) {
      tune_ov.apply(tune_config);
      return cmd_tune(tune_data, tune_est, tune_grid, tune_init, tune_seed, tune_jobs,
                      tune_resume, tune_strict, tune_out);
    }
    if (rec->parsed()) {
      rec_ov.apply(rec_config);
      return cmd_recover(rec_fit, rec_eps, rec_t, rec_rho, rec_profiles, rec_dot, rec_out);
    }
    if (ev->parsed()) {
      ev_ov.apply(ev_config);
      return cmd_evaluate(ev_truth, ev_fit, ev_eps, ev_t, ev_rho, ev_out);
    }
    if (pipe->parsed()) {
      pipe_ov.apply(pipe_config);
      hlcm::PipelineSpec spec;
      spec.model = hlcm::model_type_from_string(pipe_model);
      spec.hierarchy = hlcm::hierarchy_template_from_string(pipe_hier);
      spec.n_subjects = pipe_n;
      spec.n_items = pipe_items;
      spec.noise = pipe_noise;
      spec.missing_rate = pipe_missing;
      spec.reps = pipe_reps;
      spec.seed = pipe_seed;
      spec.jobs = pipe_jobs;
      spec.base = pipe_est.config;
      spec.grid = pipe_grid.grid;
      spec.init = pipe_init;
      spec.eps_gamma = pipe_eps;
      spec.t = pipe_t;
      spec.out_dir = pipe_out;
      spec.write_artifacts = !pipe_no_artifacts;
      return cmd_pipeline(spec, pipe_full, reps_opt->count() > 0, pipe_strict);
    }
  } catch (const hlcm::recovery_failed& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRecovery;
  } catch (const hlcm::data_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const hlcm::invalid_input& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
