#pragma once

// File formats. CSV: comma separated, header row, NA for missing cells, no
// quoting. JSON: UTF-8 with sorted keys and a schema_version field, so every
// artifact is byte-stable for a given input — golden tests depend on this.
// Attribute and class indices are 1-based in all files.

#include "hlcm/estimator.hpp"
#include "hlcm/evaluate.hpp"
#include "hlcm/model.hpp"
#include "hlcm/recovery.hpp"
#include "hlcm/selection.hpp"
#include "hlcm/simulate.hpp"

#include <string>
#include <vector>

namespace hlcm::io {

inline constexpr int schema_version = 1;

// responses.csv: header item_1..item_J, one 0/1/NA row per subject.
void write_responses_csv(const std::string& path, const ResponseData& data);
ResponseData read_responses_csv(const std::string& path);

// truth.json: generating spec, Q, profiles (bit-strings), hierarchy edges,
// proportions, theta, per-item model tags, memberships.
void write_truth_json(const std::string& path, const GroundTruth& truth,
                      const SimSpec& spec);
struct TruthFile {
  GroundTruth truth;
  SimSpec spec;
};
TruthFile read_truth_json(const std::string& path);

// fit.json: config, parameters, activity flags, likelihood, BIC, trace.
void write_fit_json(const std::string& path, const FitResult& fit,
                    const EmConfig& config, double bic_value);
struct FitFile {
  FitResult fit;
  EmConfig config;
  double bic = 0.0;
};
FitFile read_fit_json(const std::string& path);

// bic_table.csv: stage,lambda1,lambda2,tau,loglik,m_hat,dim_total,bic.
void write_bic_table_csv(const std::string& path, const std::vector<BicRow>& rows);

// recovery.json: gamma, reduced partial-order matrix, profiles as
// bit-strings, hierarchy edge list, Q rows, k_hat, warnings.
void write_recovery_json(const std::string& path, const RecoveryResult& result,
                         double rho, double eps_gamma, double t);

// metrics.json for a single replication.
void write_metrics_json(const std::string& path, const Metrics& metrics);

// Graphviz rendering of a hierarchy (attributes as a1..aK).
void write_hierarchy_dot(const std::string& path, const Hierarchy& hierarchy);

// Shared helpers.
std::string format_double(double x);  // shortest round-trip representation
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace hlcm::io
