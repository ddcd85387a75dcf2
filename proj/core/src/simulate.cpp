#include "hlcm/simulate.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace hlcm {

ModelType model_type_from_string(const std::string& s) {
  if (s == "dina") return ModelType::dina;
  if (s == "dino") return ModelType::dino;
  if (s == "mixed" || s == "dina_dino_mix") return ModelType::dina_dino_mix;
  if (s == "gdina") return ModelType::gdina;
  throw invalid_input("unknown model type '" + s + "' (expected dina|mixed|gdina)");
}

std::string to_string(ModelType t) {
  switch (t) {
    case ModelType::dina: return "dina";
    case ModelType::dino: return "dino";
    case ModelType::dina_dino_mix: return "mixed";
    case ModelType::gdina: return "gdina";
  }
  return "?";
}

void SimSpec::validate() const {
  hierarchy.validate();
  const int k = hierarchy.n_attributes;
  if (k > 31) throw invalid_input("simulate: at most 31 attributes are supported");
  if (n_subjects < 1) throw invalid_input("simulate: n_subjects must be positive");
  if (!(theta_low > 0.0 && theta_low < theta_high && theta_high < 1.0))
    throw invalid_input("simulate: need 0 < theta_low < theta_high < 1");
  const int blocks = (model == ModelType::dina_dino_mix) ? 2 : 2;
  if (n_items < blocks * k)
    throw invalid_input("simulate: n_items must fit two identity blocks (need at least " +
                        std::to_string(blocks * k) + ")");
  if (model == ModelType::dina_dino_mix && n_items % 2 != 0)
    throw invalid_input("simulate: the mixed design splits items in half; n_items must be even");
}

int ideal_response_dina(Profile q_row, Profile alpha) {
  return (alpha & q_row) == q_row ? 1 : 0;
}

int ideal_response_dino(Profile q_row, Profile alpha) { return (alpha & q_row) != 0 ? 1 : 0; }

namespace {

std::vector<ModelType> item_models(const SimSpec& spec) {
  std::vector<ModelType> tags(static_cast<std::size_t>(spec.n_items), spec.model);
  if (spec.model == ModelType::dina_dino_mix) {
    for (int j = 0; j < spec.n_items; ++j)
      tags[static_cast<std::size_t>(j)] =
          (j < spec.n_items / 2) ? ModelType::dina : ModelType::dino;
  }
  return tags;
}

}  // namespace

QMatrix generate_q(const SimSpec& spec, PhiloxRng& rng) {
  spec.validate();
  const int k = spec.hierarchy.n_attributes;
  const int j_total = spec.n_items;
  QMatrix q;
  q.n_attributes = k;
  q.rows.assign(static_cast<std::size_t>(j_total), 0);

  // Identity blocks guarantee each attribute is measured in isolation.  The
  // single-model designs stack both blocks at the top; the mixed design puts
  // one block at the head of each half so both item types get one.
  std::vector<int> identity_rows;
  if (spec.model == ModelType::dina_dino_mix) {
    for (int r = 0; r < k; ++r) identity_rows.push_back(r);
    for (int r = 0; r < k; ++r) identity_rows.push_back(j_total / 2 + r);
  } else {
    for (int r = 0; r < 2 * k; ++r) identity_rows.push_back(r);
  }
  std::vector<char> fixed(static_cast<std::size_t>(j_total), 0);
  for (std::size_t i = 0; i < identity_rows.size(); ++i) {
    const int row = identity_rows[i];
    q.rows[static_cast<std::size_t>(row)] = Profile{1} << (i % static_cast<std::size_t>(k));
    fixed[static_cast<std::size_t>(row)] = 1;
  }

  const Profile n_patterns = Profile{1} << k;
  for (int j = 0; j < j_total; ++j) {
    if (fixed[static_cast<std::size_t>(j)]) continue;
    Profile row;
    do {
      row = static_cast<Profile>(rng.uniform_int(n_patterns - 1)) + 1;  // nonzero
    } while (spec.model == ModelType::gdina && std::popcount(row) > 3);
    q.rows[static_cast<std::size_t>(j)] = row;
  }
  return q;
}

Matrix item_params(const SimSpec& spec, const QMatrix& q, const AttributeProfileSet& profiles) {
  if (q.n_items() != spec.n_items) throw invalid_input("item_params: Q row count mismatch");
  const auto tags = item_models(spec);
  Matrix theta(spec.n_items, profiles.size());
  for (int j = 0; j < spec.n_items; ++j) {
    const Profile qj = q.rows[static_cast<std::size_t>(j)];
    for (int m = 0; m < profiles.size(); ++m) {
      const Profile alpha = profiles.profiles[static_cast<std::size_t>(m)];
      double value = 0.0;
      switch (tags[static_cast<std::size_t>(j)]) {
        case ModelType::dina:
          value = ideal_response_dina(qj, alpha) ? spec.theta_high : spec.theta_low;
          break;
        case ModelType::dino:
          value = ideal_response_dino(qj, alpha) ? spec.theta_high : spec.theta_low;
          break;
        case ModelType::gdina: {
          const int kj = std::popcount(qj);
          const int c = std::popcount(qj & alpha);
          value = spec.theta_low +
                  (spec.theta_high - spec.theta_low) * static_cast<double>(c) / kj;
          break;
        }
        case ModelType::dina_dino_mix:
          throw invalid_input("item_params: per-item tags must be concrete kernels");
      }
      theta(j, m) = value;
    }
  }
  return theta;
}

GroundTruth build_truth(const SimSpec& spec, PhiloxRng& rng) {
  spec.validate();
  GroundTruth truth;
  truth.hierarchy = spec.hierarchy;
  truth.profiles = induced_profiles(spec.hierarchy);
  truth.q = generate_q(spec, rng);
  truth.theta = item_params(spec, truth.q, truth.profiles);
  truth.proportions = Vector::Constant(truth.profiles.size(),
                                       1.0 / static_cast<double>(truth.profiles.size()));
  truth.item_models = item_models(spec);
  return truth;
}

std::pair<ResponseData, std::vector<int>> sample_responses(const GroundTruth& truth,
                                                           int n_subjects, PhiloxRng& rng) {
  if (n_subjects < 1) throw invalid_input("sample_responses: n_subjects must be positive");
  const int j_total = static_cast<int>(truth.theta.rows());
  std::vector<double> weights(truth.proportions.data(),
                              truth.proportions.data() + truth.proportions.size());
  ResponseData data;
  data.values.resize(n_subjects, j_total);
  std::vector<int> memberships(static_cast<std::size_t>(n_subjects));
  // Subject-major draw order (class, then that subject's items) keeps the
  // stream layout stable when n_subjects changes.
  for (int i = 0; i < n_subjects; ++i) {
    const int m = rng.categorical(weights);
    memberships[static_cast<std::size_t>(i)] = m;
    for (int j = 0; j < j_total; ++j)
      data.values(i, j) = rng.bernoulli(truth.theta(j, m)) ? 1.0 : 0.0;
  }
  return {std::move(data), std::move(memberships)};
}

ResponseData apply_missingness(const ResponseData& data, double rate, PhiloxRng& rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw invalid_input("apply_missingness: rate must lie in [0,1)");
  ResponseData out = data;
  if (rate == 0.0) {
    out.mask = Matrix::Ones(data.values.rows(), data.values.cols());
    return out;
  }
  const int n = static_cast<int>(data.values.rows());
  const int j_total = static_cast<int>(data.values.cols());
  Matrix mask(n, j_total);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < j_total; ++j) mask(i, j) = rng.bernoulli(rate) ? 0.0 : 1.0;
  // Every item must keep at least one observation; redraw empty columns.
  for (int j = 0; j < j_total; ++j) {
    while (mask.col(j).sum() == 0.0) {
      for (int i = 0; i < n; ++i) mask(i, j) = rng.bernoulli(rate) ? 0.0 : 1.0;
    }
  }
  out.values = data.values.cwiseProduct(mask);  // masked cells stored as 0
  out.mask = std::move(mask);
  return out;
}

std::pair<GroundTruth, ResponseData> simulate_dataset(const SimSpec& spec) {
  spec.validate();
  PhiloxRng truth_rng(spec.seed, 0);
  GroundTruth truth = build_truth(spec, truth_rng);
  PhiloxRng response_rng(spec.seed, 1);
  auto [data, memberships] = sample_responses(truth, spec.n_subjects, response_rng);
  truth.memberships = std::move(memberships);
  return {std::move(truth), std::move(data)};
}

}  // namespace hlcm
