#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "hlcm/evaluate.hpp"
#include "hlcm/model.hpp"
#include "hlcm/recovery.hpp"
#include "hlcm/rng.hpp"
#include "hlcm/simulate.hpp"

using namespace hlcm;

namespace {

// Oracle: exhaustive minimum-cost assignment over all row -> column bijections.
double brute_force_assignment_cost(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost(i, perm[static_cast<std::size_t>(i)]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double assignment_cost(const Matrix& cost, const std::vector<int>& assignment) {
  double total = 0.0;
  for (int i = 0; i < static_cast<int>(assignment.size()); ++i)
    total += cost(i, assignment[static_cast<std::size_t>(i)]);
  return total;
}

GroundTruth linear_truth(std::uint64_t seed) {
  SimSpec spec;
  spec.model = ModelType::dina;
  spec.hierarchy = hierarchy_template(HierarchyTemplate::linear, 4);
  spec.n_items = 30;
  spec.n_subjects = 200;
  spec.theta_low = 0.1;
  spec.theta_high = 0.9;
  PhiloxRng rng(seed, 0);
  return build_truth(spec, rng);
}

LcmParams params_of(const GroundTruth& truth) {
  LcmParams p;
  p.proportions = truth.proportions;
  p.item_params = truth.theta;
  return p;
}

FitResult fit_with_params(const LcmParams& params) {
  FitResult fit;
  fit.params = params;
  fit.n_selected = static_cast<int>(params.proportions.size());
  fit.converged = true;
  return fit;
}

}  // namespace

TEST_SUITE_BEGIN("evaluate");

TEST_CASE("hungarian solves a small instance with a known optimum") {
  Matrix cost(3, 3);
  cost << 4, 1, 3,
          2, 0, 5,
          3, 2, 2;
  const auto a = hungarian(cost);
  // Unique optimum: rows take columns 1, 0, 2 for a total of 5.
  CHECK(a == std::vector<int>{1, 0, 2});
  CHECK(assignment_cost(cost, a) == doctest::Approx(5.0));
}

TEST_CASE("hungarian matches exhaustive search on random instances") {
  PhiloxRng rng(17, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(6));
    Matrix cost(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) cost(i, j) = rng.uniform(0.0, 10.0);
    const auto a = hungarian(cost);
    // A permutation ...
    std::vector<int> seen(static_cast<std::size_t>(n), 0);
    for (int col : a) {
      REQUIRE(col >= 0);
      REQUIRE(col < n);
      ++seen[static_cast<std::size_t>(col)];
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    // ... whose cost equals the exhaustive optimum.
    CHECK(assignment_cost(cost, a) ==
          doctest::Approx(brute_force_assignment_cost(cost)).epsilon(1e-9));
  }
}

TEST_CASE("hungarian rejects non-square input") {
  CHECK_THROWS_AS(hungarian(Matrix::Zero(2, 3)), invalid_input);
}

TEST_CASE("match_columns pairs by hamming distance and pads with -1") {
  IndicatorMatrix gamma_true(4, 2);
  gamma_true << 0, 1,
                0, 1,
                0, 1,
                0, 1;
  IndicatorMatrix gamma_hat(4, 3);
  gamma_hat << 0, 1, 1,
               0, 1, 1,
               0, 1, 0,
               0, 1, 0;
  const auto matched = match_columns(gamma_hat, gamma_true);
  REQUIRE(matched.size() == 3);
  CHECK(matched[0] == 0);
  CHECK(matched[1] == 1);
  CHECK(matched[2] == -1);  // the surplus estimated column hits padding

  // The narrow side can also be the estimate; then no sentinel appears.
  const auto narrow = match_columns(gamma_true, gamma_hat);
  REQUIRE(narrow.size() == 2);
  CHECK(narrow[0] == 0);
  CHECK(narrow[1] == 1);
}

TEST_CASE("match_columns requires equal item counts") {
  CHECK_THROWS_AS(match_columns(IndicatorMatrix::Zero(3, 2), IndicatorMatrix::Zero(4, 2)),
                  invalid_input);
}

TEST_CASE("hierarchies compare up to attribute relabeling") {
  const Hierarchy chain = hierarchy_template(HierarchyTemplate::linear, 4);

  Hierarchy relabeled;  // the same chain written as 3 -> 1 -> 0 -> 2
  relabeled.n_attributes = 4;
  relabeled.edges = {{3, 1}, {1, 0}, {0, 2}};
  CHECK(hierarchies_isomorphic(chain, relabeled));
  CHECK(hierarchies_isomorphic(relabeled, chain));

  CHECK_FALSE(hierarchies_isomorphic(chain, hierarchy_template(HierarchyTemplate::divergent, 4)));
  CHECK_FALSE(
      hierarchies_isomorphic(hierarchy_template(HierarchyTemplate::convergent, 4),
                             hierarchy_template(HierarchyTemplate::divergent, 4)));

  Hierarchy shorter;
  shorter.n_attributes = 3;
  shorter.edges = {{0, 1}, {1, 2}};
  CHECK_FALSE(hierarchies_isomorphic(chain, shorter));

  // Closure comparison: a transitive edge added to the chain changes nothing.
  Hierarchy padded = chain;
  padded.edges.push_back({0, 2});
  CHECK(hierarchies_isomorphic(chain, padded));
}

TEST_CASE("scoring the truth against itself is a fixed point") {
  const GroundTruth truth = linear_truth(5);
  const LcmParams params = params_of(truth);
  const RecoveryResult rec = recover(params, 1e-4, 0.0, 0.0);
  const Metrics m = score(rec, fit_with_params(params), truth, 0.0);

  CHECK(m.acc_m == 1);
  CHECK(m.acc_p == 1);
  CHECK(m.acc_e == 1);
  REQUIRE(m.mse_theta.has_value());
  CHECK(*m.mse_theta == doctest::Approx(0.0).epsilon(1e-12));
  REQUIRE(m.acc_q.has_value());
  CHECK(*m.acc_q == doctest::Approx(1.0));
}

TEST_CASE("metrics are invariant to relabeling the latent classes") {
  const GroundTruth truth = linear_truth(6);
  const int m_true = truth.profiles.size();
  REQUIRE(m_true == 5);

  const std::vector<int> perm = {3, 0, 4, 1, 2};
  LcmParams shuffled;
  shuffled.proportions = Vector(m_true);
  shuffled.item_params = Matrix(truth.theta.rows(), m_true);
  for (int c = 0; c < m_true; ++c) {
    shuffled.proportions(c) = truth.proportions(perm[static_cast<std::size_t>(c)]);
    shuffled.item_params.col(c) = truth.theta.col(perm[static_cast<std::size_t>(c)]);
  }

  const RecoveryResult rec = recover(shuffled, 1e-4, 0.0, 0.0);
  const Metrics m = score(rec, fit_with_params(shuffled), truth, 0.0);
  CHECK(m.acc_m == 1);
  CHECK(m.acc_p == 1);
  CHECK(m.acc_e == 1);
  REQUIRE(m.mse_theta.has_value());
  CHECK(*m.mse_theta == doctest::Approx(0.0).epsilon(1e-12));
  REQUIRE(m.acc_q.has_value());
  CHECK(*m.acc_q == doctest::Approx(1.0));
}

TEST_CASE("a wrong class count suppresses mse and a wrong hierarchy suppresses acc_q") {
  const GroundTruth truth = linear_truth(7);

  // Keep classes 0, 2, 4 of the chain: still a staircase, but only 3 classes.
  LcmParams dropped;
  dropped.proportions = Vector(3);
  dropped.proportions << 0.4, 0.3, 0.3;
  dropped.item_params = Matrix(truth.theta.rows(), 3);
  dropped.item_params.col(0) = truth.theta.col(0);
  dropped.item_params.col(1) = truth.theta.col(2);
  dropped.item_params.col(2) = truth.theta.col(4);

  const RecoveryResult rec = recover(dropped, 1e-4, 0.0, 0.0);
  const Metrics m = score(rec, fit_with_params(dropped), truth, 0.0);
  CHECK(m.acc_m == 0);
  CHECK(m.acc_p == 0);
  CHECK(m.acc_e == 0);  // a 2-attribute chain cannot match the 4-attribute truth
  CHECK_FALSE(m.mse_theta.has_value());
  CHECK_FALSE(m.acc_q.has_value());
}

TEST_CASE("theta error shows up in mse but not in the structural metrics") {
  const GroundTruth truth = linear_truth(8);
  LcmParams noisy = params_of(truth);
  noisy.item_params.array() += 0.01;  // uniform shift keeps every argmax

  const RecoveryResult rec = recover(noisy, 1e-4, 0.0, 0.0);
  const Metrics m = score(rec, fit_with_params(noisy), truth, 0.0);
  CHECK(m.acc_m == 1);
  CHECK(m.acc_p == 1);
  CHECK(m.acc_e == 1);
  REQUIRE(m.mse_theta.has_value());
  CHECK(*m.mse_theta == doctest::Approx(0.0001).epsilon(1e-9));
  REQUIRE(m.acc_q.has_value());
  CHECK(*m.acc_q == doctest::Approx(1.0));
}

TEST_SUITE_END();
