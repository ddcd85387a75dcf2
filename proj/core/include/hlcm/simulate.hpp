#pragma once

// Ground-truth generation for the simulation protocol: Q-matrices with two
// identity blocks, DINA/DINO/GDINA item parameters over hierarchy-induced
// profiles, categorical class memberships, Bernoulli responses, and optional
// missing-completely-at-random masking.

#include "hlcm/model.hpp"
#include "hlcm/rng.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace hlcm {

enum class ModelType { dina, dino, dina_dino_mix, gdina };
ModelType model_type_from_string(const std::string& s);
std::string to_string(ModelType m);

struct SimSpec {
  ModelType model = ModelType::dina;
  Hierarchy hierarchy;
  int n_items = 30;
  int n_subjects = 1000;
  double theta_high = 0.9;  // correct-response probability of capable classes
  double theta_low = 0.1;   // ... of incapable classes (the noise level r)
  std::uint64_t seed = 0;

  void validate() const;  // 0 < low < high < 1, J >= 2K, hierarchy valid
};

struct GroundTruth {
  QMatrix q;
  AttributeProfileSet profiles;        // induced by the hierarchy, canonical order
  Vector proportions;                  // uniform over profiles
  Matrix theta;                        // J x |profiles|
  Hierarchy hierarchy;                 // the generating prerequisite relation
  std::vector<ModelType> item_models;  // per-item tag (dina/dino; mix splits halves)
  std::vector<int> memberships;        // filled by sample_responses
};

// Ideal responses: conjunctive (all required attributes) / disjunctive (any).
int ideal_response_dina(Profile q_row, Profile alpha);
int ideal_response_dino(Profile q_row, Profile alpha);

// Two stacked K x K identity blocks in the leading rows (one per model half
// for the mixed setting); remaining rows uniform over admissible masks:
// nonzero, and for GDINA at most 3 required attributes.
QMatrix generate_q(const SimSpec& spec, PhiloxRng& rng);

// Item response probabilities per (item, profile). DINA/DINO: theta_high on
// ideal responders, theta_low otherwise. GDINA: levels equally spaced in the
// number of possessed required attributes, theta_low + c/|K_j| * (high - low).
Matrix item_params(const SimSpec& spec, const QMatrix& q,
                   const AttributeProfileSet& profiles);

// Q + uniform proportions + theta for the spec (memberships left empty).
GroundTruth build_truth(const SimSpec& spec, PhiloxRng& rng);

// Memberships i.i.d. categorical(pi), responses Bernoulli(theta_{j,m_i}).
std::pair<ResponseData, std::vector<int>> sample_responses(const GroundTruth& truth,
                                                           int n_subjects,
                                                           PhiloxRng& rng);

// Independently masks each cell with probability `rate`, re-drawing any item
// column that would end up fully unobserved. rate = 0 yields an all-ones mask.
ResponseData apply_missingness(const ResponseData& data, double rate, PhiloxRng& rng);

// Convenience driver used by the CLI: derives substreams from spec.seed
// (stream 0: truth/Q, stream 1: responses) and returns both pieces.
std::pair<GroundTruth, ResponseData> simulate_dataset(const SimSpec& spec);

}  // namespace hlcm
