#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "hlcm/estimator.hpp"
#include "hlcm/model.hpp"
#include "hlcm/rng.hpp"
#include "hlcm/simulate.hpp"

using namespace hlcm;

namespace {

// ---- Oracles (independent, direct-formula implementations) ----------------

// Mixture likelihood without log-sum-exp tricks; long double keeps the
// direct product stable at test sizes. Masked cells contribute nothing.
long double naive_subject_density(const ResponseData& data, const LcmParams& params,
                                  int i, int k) {
  long double prod = 1.0L;
  for (int j = 0; j < data.n_items(); ++j) {
    if (data.mask && (*data.mask)(i, j) == 0.0) continue;
    const long double theta = params.item_params(j, k);
    prod *= data.values(i, j) == 1.0 ? theta : 1.0L - theta;
  }
  return prod;
}

double naive_loglik(const ResponseData& data, const LcmParams& params) {
  long double total = 0.0L;
  for (int i = 0; i < data.n_subjects(); ++i) {
    long double mix = 0.0L;
    for (int k = 0; k < params.n_classes(); ++k)
      mix += static_cast<long double>(params.proportions(k)) *
             naive_subject_density(data, params, i, k);
    total += std::log(mix);
  }
  return static_cast<double>(total);
}

Matrix naive_posterior(const ResponseData& data, const LcmParams& params) {
  Matrix post(data.n_subjects(), params.n_classes());
  for (int i = 0; i < data.n_subjects(); ++i) {
    long double denom = 0.0L;
    for (int k = 0; k < params.n_classes(); ++k) {
      const long double w = static_cast<long double>(params.proportions(k)) *
                            naive_subject_density(data, params, i, k);
      post(i, k) = static_cast<double>(w);
      denom += w;
    }
    for (int k = 0; k < params.n_classes(); ++k)
      post(i, k) = static_cast<double>(post(i, k) / static_cast<double>(denom));
  }
  return post;
}

// Direct transcription of the penalized objective definition.
double naive_objective(const ResponseData& data, const LcmParams& params,
                       const EmConfig& config) {
  const double n = data.n_subjects();
  double log_pen = 0.0;
  for (int k = 0; k < params.n_classes(); ++k)
    log_pen += std::log(std::max(params.proportions(k), config.rho));
  double tlp_pen = 0.0;
  const std::vector<int> active = active_classes(params.proportions, config.rho);
  for (int j = 0; j < params.n_items(); ++j)
    for (std::size_t a = 0; a < active.size(); ++a)
      for (std::size_t b = a + 1; b < active.size(); ++b)
        tlp_pen += std::min(std::abs(params.item_params(j, active[a]) -
                                     params.item_params(j, active[b])),
                            config.tau);
  return naive_loglik(data, params) - config.lambda1 * n * log_pen -
         config.lambda2 * n * tlp_pen;
}

// ---- Shared fixtures -------------------------------------------------------

ResponseData random_responses(int n, int j, std::uint64_t seed) {
  ResponseData data;
  data.values = Matrix(n, j);
  PhiloxRng rng(seed, 0);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < j; ++c) data.values(i, c) = rng.bernoulli(0.4 + 0.2 * (c % 2));
  return data;
}

LcmParams random_params(int j, int m, std::uint64_t seed) {
  LcmParams p;
  PhiloxRng rng(seed, 1);
  p.proportions = Vector(m);
  double sum = 0.0;
  for (int k = 0; k < m; ++k) sum += p.proportions(k) = rng.uniform(0.2, 1.0);
  p.proportions /= sum;
  p.item_params = Matrix(j, m);
  for (int r = 0; r < j; ++r)
    for (int k = 0; k < m; ++k) p.item_params(r, k) = rng.uniform(0.1, 0.9);
  return p;
}

// Two well-separated classes; the workhorse for recovery-style assertions.
std::pair<ResponseData, LcmParams> two_class_instance(int n, int j, std::uint64_t seed) {
  LcmParams truth;
  truth.proportions = Vector(2);
  truth.proportions << 0.6, 0.4;
  truth.item_params = Matrix(j, 2);
  for (int r = 0; r < j; ++r) {
    truth.item_params(r, 0) = 0.85;
    truth.item_params(r, 1) = 0.15;
  }
  ResponseData data;
  data.values = Matrix(n, j);
  PhiloxRng rng(seed, 2);
  for (int i = 0; i < n; ++i) {
    const int k = rng.bernoulli(truth.proportions(1));
    for (int r = 0; r < j; ++r) data.values(i, r) = rng.bernoulli(truth.item_params(r, k));
  }
  return {data, truth};
}

EmConfig base_config(int m) {
  EmConfig c;
  c.m_upper = m;
  return c;
}

}  // namespace

TEST_SUITE_BEGIN("estimator");

TEST_CASE("soft threshold and tlp") {
  CHECK(soft_threshold(0.5, 0.2) == doctest::Approx(0.3));
  CHECK(soft_threshold(-0.5, 0.2) == doctest::Approx(-0.3));
  CHECK(soft_threshold(0.1, 0.2) == 0.0);
  CHECK(tlp(0.1, 0.3) == doctest::Approx(0.1));
  CHECK(tlp(-0.1, 0.3) == doctest::Approx(0.1));
  CHECK(tlp(0.7, 0.3) == doctest::Approx(0.3));
}

TEST_CASE("config validation") {
  EmConfig c = base_config(4);
  CHECK_NOTHROW(c.validate());
  c.lambda1 = 0.25;  // 4 * 0.25 = 1, not strictly feasible
  CHECK_THROWS_AS(c.validate(), invalid_input);
  c = base_config(4);
  c.tau = 0.0;
  CHECK_THROWS_AS(c.validate(), invalid_input);
  c = base_config(4);
  c.rho = 0.0;
  CHECK_THROWS_AS(c.validate(), invalid_input);
  c = base_config(0);
  CHECK_THROWS_AS(c.validate(), invalid_input);
}

TEST_CASE("admm pair index is a bijection onto 0..m(m-1)/2-1") {
  const int m = 6;
  std::set<int> seen;
  for (int k = 0; k < m; ++k)
    for (int l = k + 1; l < m; ++l) {
      const int idx = AdmmState::pair_index(k, l, m);
      CHECK(idx >= 0);
      CHECK(idx < AdmmState::n_pairs(m));
      seen.insert(idx);
    }
  CHECK(static_cast<int>(seen.size()) == AdmmState::n_pairs(m));
  CHECK_THROWS_AS(AdmmState::pair_index(3, 3, m), invalid_input);
}

TEST_CASE("log-likelihood matches the direct mixture formula") {
  const ResponseData data = random_responses(40, 6, 101);
  const LcmParams params = random_params(6, 3, 102);
  CHECK(log_likelihood(data, params) ==
        doctest::Approx(naive_loglik(data, params)).epsilon(1e-12));
}

TEST_CASE("e-step equals bayes rule and rows sum to one") {
  const ResponseData data = random_responses(30, 5, 201);
  const LcmParams params = random_params(5, 4, 202);
  const Matrix post = e_step(data, params);
  const Matrix want = naive_posterior(data, params);
  REQUIRE(post.rows() == 30);
  REQUIRE(post.cols() == 4);
  for (int i = 0; i < post.rows(); ++i) {
    CHECK(post.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (int k = 0; k < post.cols(); ++k)
      CHECK(post(i, k) == doctest::Approx(want(i, k)).epsilon(1e-10));
  }
}

TEST_CASE("masked likelihood and posterior skip unobserved cells") {
  ResponseData data = random_responses(25, 6, 301);
  data.mask = Matrix::Ones(25, 6);
  PhiloxRng rng(303, 0);
  for (int i = 1; i < 25; ++i)
    for (int j = 0; j < 6; ++j)
      if (rng.bernoulli(0.25)) {
        (*data.mask)(i, j) = 0.0;
        data.values(i, j) = 0.0;
      }
  // Subject 0 is fully unobserved.
  data.mask->row(0).setZero();
  data.values.row(0).setZero();
  data.validate();

  const LcmParams params = random_params(6, 3, 302);
  CHECK(log_likelihood(data, params) ==
        doctest::Approx(naive_loglik(data, params)).epsilon(1e-12));

  const Matrix post = e_step(data, params);
  const Matrix want = naive_posterior(data, params);
  for (int i = 0; i < post.rows(); ++i)
    for (int k = 0; k < post.cols(); ++k)
      CHECK(post(i, k) == doctest::Approx(want(i, k)).epsilon(1e-10));
  // A fully masked subject carries the prior.
  for (int k = 0; k < 3; ++k)
    CHECK(post(0, k) == doctest::Approx(params.proportions(k)).epsilon(1e-12));
}

TEST_CASE("penalized objective matches its definition") {
  const ResponseData data = random_responses(20, 4, 401);
  LcmParams params = random_params(4, 3, 402);
  EmConfig config = base_config(3);
  config.lambda1 = 0.05;
  config.lambda2 = 0.2;
  config.tau = 0.25;
  CHECK(penalized_objective(data, params, config) ==
        doctest::Approx(naive_objective(data, params, config)).epsilon(1e-12));

  // The log penalty truncates at rho: pushing a class below rho must change
  // the objective exactly as log(rho) does.
  params.proportions << 1.0 - 2e-5 - 0.3, 0.3, 2e-5;  // third class below rho
  CHECK(penalized_objective(data, params, config) ==
        doctest::Approx(naive_objective(data, params, config)).epsilon(1e-12));
}

TEST_CASE("proportion update: worked two-class examples") {
  EmConfig config = base_config(2);
  config.lambda1 = 0.1;
  Vector current(2);
  current << 0.5, 0.5;

  // Means (0.9, 0.1): raw_2 = (0.1 - 0.1) / (1 - 0.2) = 0 <= rho, so class 2
  // freezes at rho/10 and class 1 absorbs the rest.
  Matrix post(10, 2);
  for (int i = 0; i < 10; ++i) post.row(i) << 0.9, 0.1;
  const Vector updated = update_proportions(post, config, current);
  CHECK(updated(0) == doctest::Approx(1.0 - config.rho / 10).epsilon(1e-15));
  CHECK(updated(1) == doctest::Approx(config.rho / 10).epsilon(1e-15));
  CHECK(updated(0) > config.rho);
  CHECK(updated(1) <= config.rho);

  // Means (0.5, 0.5): raw = 0.4 / 0.8 = 0.5 on both sides; nothing changes.
  for (int i = 0; i < 10; ++i) post.row(i) << 0.5, 0.5;
  const Vector balanced = update_proportions(post, config, current);
  CHECK(balanced(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(balanced(1) == doctest::Approx(0.5).epsilon(1e-15));

  // Without the penalty the update is the posterior mean.
  config.lambda1 = 0.0;
  for (int i = 0; i < 10; ++i) post.row(i) << 0.73, 0.27;
  const Vector plain = update_proportions(post, config, current);
  CHECK(plain(0) == doctest::Approx(0.73).epsilon(1e-15));
  CHECK(plain(1) == doctest::Approx(0.27).epsilon(1e-15));
}

TEST_CASE("proportion update: frozen classes stay frozen") {
  EmConfig config = base_config(3);
  config.lambda1 = 0.05;
  Vector current(3);
  current << 0.7, 0.3 - config.rho / 10, config.rho / 10;  // class 3 already off

  Matrix post(8, 3);
  for (int i = 0; i < 8; ++i) post.row(i) << 0.2, 0.2, 0.6;  // mass on the dead class
  const Vector updated = update_proportions(post, config, current);
  CHECK(updated(2) == doctest::Approx(config.rho / 10).epsilon(1e-15));
  CHECK(updated(2) <= config.rho);
  CHECK(updated.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(updated(0) > config.rho);
  CHECK(updated(1) > config.rho);
}

TEST_CASE("proportion update: degenerate round resurrects the best class") {
  EmConfig config = base_config(4);
  config.lambda1 = 0.2;
  Vector current(4);
  current << 0.5, 0.5 - 2 * (config.rho / 10), config.rho / 10, config.rho / 10;

  // Active classes 1-2 both fall at/below the threshold this round because
  // the posterior mass sits on the frozen classes.
  Matrix post(6, 4);
  for (int i = 0; i < 6; ++i) post.row(i) << 0.08, 0.02, 0.5, 0.4;
  const Vector updated = update_proportions(post, config, current);
  CHECK(updated(0) > config.rho);       // argmax among this round's active set
  CHECK(updated(1) <= config.rho);
  CHECK(updated(2) <= config.rho);      // permanently frozen classes never return
  CHECK(updated(3) <= config.rho);
  CHECK(updated.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("one em step with lambda2 = 0 is the analytic posterior-weighted mean") {
  const ResponseData data = random_responses(30, 4, 501);
  const LcmParams init = random_params(4, 3, 502);

  EmConfig config = base_config(3);
  config.lambda1 = 0.02;
  config.max_outer_iters = 1;
  config.merge_tol = 1e-12;  // keep the post-fit merge from disturbing values

  // Oracle: the M-step must consume the posterior of the previous iteration's
  // parameters, i.e. of the initializer on the first pass.
  const Matrix post = e_step(data, init);
  const Vector pi_want = update_proportions(post, config, init.proportions);

  const FitResult result = fit(data, config, init);
  for (int k = 0; k < 3; ++k)
    CHECK(result.params.proportions(k) == doctest::Approx(pi_want(k)).epsilon(1e-12));
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 3; ++k) {
      double hits = 0.0, total = 0.0;
      for (int i = 0; i < 30; ++i) {
        hits += post(i, k) * data.values(i, j);
        total += post(i, k);
      }
      const double want =
          std::clamp(hits / total, config.theta_floor, 1.0 - config.theta_floor);
      CHECK(result.params.item_params(j, k) == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("admm sweep validates its state shape and stays in the box") {
  const ResponseData data = random_responses(30, 4, 511);
  const LcmParams params = random_params(4, 3, 512);
  const Matrix post = e_step(data, params);
  EmConfig config = base_config(3);
  config.lambda2 = 0.1;

  Matrix theta = params.item_params;
  AdmmState bad;  // unshaped
  CHECK_THROWS_AS(update_item_params(data, post, theta, bad, params.proportions, config),
                  invalid_input);

  AdmmState admm;
  admm.d = Matrix::Zero(4, AdmmState::n_pairs(3));
  admm.mu = Matrix::Zero(4, AdmmState::n_pairs(3));
  update_item_params(data, post, theta, admm, params.proportions, config);
  CHECK((theta.array() >= config.theta_floor).all());
  CHECK((theta.array() <= 1.0 - config.theta_floor).all());
  CHECK(theta.allFinite());
  CHECK(admm.d.allFinite());
  CHECK(admm.mu.allFinite());
}

TEST_CASE("em with no penalty: monotone objective and oracle-level fit") {
  const auto [data, truth] = two_class_instance(2000, 10, 601);
  EmConfig config = base_config(2);
  const FitResult result = fit(data, config, random_params(10, 2, 603));
  CHECK(result.converged);

  // Minimization-form trace must never increase (classical EM monotonicity).
  for (std::size_t i = 1; i < result.objective_trace.size(); ++i)
    CHECK(result.objective_trace[i] <= result.objective_trace[i - 1] + 1e-8);

  // The likelihood at the estimate at least matches the generating values.
  CHECK(result.loglik >= naive_loglik(data, truth) - 1e-6);

  // Parameter recovery up to the label swap.
  const bool swapped = result.params.item_params(0, 0) < 0.5;
  const int hi = swapped ? 1 : 0;
  CHECK(std::abs(result.params.proportions(hi) - 0.6) < 0.05);
  for (int j = 0; j < 10; ++j) {
    CHECK(std::abs(result.params.item_params(j, hi) - 0.85) < 0.05);
    CHECK(std::abs(result.params.item_params(j, 1 - hi) - 0.15) < 0.05);
  }
}

TEST_CASE("log penalty drives surplus classes out") {
  const auto [data, truth] = two_class_instance(1500, 12, 701);
  EmConfig config = base_config(6);
  config.lambda1 = 0.04;
  config.lambda2 = 0.01;
  const FitResult result = fit(data, config, spectral_init(data, 6));
  CHECK(result.n_selected == 2);
  const std::vector<int> active = active_classes(result.params.proportions, config.rho);
  REQUIRE(active.size() == 2);
  CHECK(static_cast<int>(result.active.size()) == 6);
}

TEST_CASE("tlp fuses matching item parameters") {
  // One true class split across an m = 2 fit: the penalty should pull the
  // duplicate columns together so the merge turns them into exact ties.
  ResponseData data;
  data.values = Matrix(800, 6);
  PhiloxRng rng(801, 0);
  for (int i = 0; i < 800; ++i)
    for (int j = 0; j < 6; ++j) data.values(i, j) = rng.bernoulli(0.3 + 0.05 * j);
  EmConfig config = base_config(2);
  config.lambda2 = 1.0;
  config.tau = 0.9;  // wide knot: every initial difference is inside the L1 zone
  const FitResult result = fit(data, config, random_params(6, 2, 802));
  for (int j = 0; j < 6; ++j)
    CHECK(result.params.item_params(j, 0) ==
          doctest::Approx(result.params.item_params(j, 1)).epsilon(1e-9));
}

TEST_CASE("missing-data fit with an all-ones mask reproduces fit exactly") {
  const auto [plain, truth] = two_class_instance(300, 8, 901);
  ResponseData masked = plain;
  masked.mask = Matrix::Ones(300, 8);

  EmConfig config = base_config(3);
  config.lambda1 = 0.02;
  config.lambda2 = 0.05;
  const LcmParams init = random_params(8, 3, 903);
  const FitResult a = fit(plain, config, init);
  const FitResult b = fit_missing(masked, config, init);

  // Bit-for-bit: identical trace, likelihood, and parameters.
  CHECK(a.loglik == b.loglik);
  CHECK(a.iterations == b.iterations);
  REQUIRE(a.objective_trace.size() == b.objective_trace.size());
  for (std::size_t i = 0; i < a.objective_trace.size(); ++i)
    CHECK(a.objective_trace[i] == b.objective_trace[i]);
  CHECK((a.params.proportions.array() == b.params.proportions.array()).all());
  CHECK((a.params.item_params.array() == b.params.item_params.array()).all());
  CHECK((a.posterior.array() == b.posterior.array()).all());
}

TEST_CASE("fit rejects a masked matrix and fit_missing requires one") {
  auto [data, truth] = two_class_instance(50, 6, 1001);
  const EmConfig config = base_config(2);
  const LcmParams init = random_params(6, 2, 1002);
  CHECK_THROWS_AS(fit_missing(data, config, init), invalid_input);
  data.mask = Matrix::Ones(50, 6);
  (*data.mask)(3, 2) = 0.0;
  data.values(3, 2) = 0.0;
  CHECK_THROWS_AS(fit(data, config, init), invalid_input);
  CHECK_NOTHROW(fit_missing(data, config, init));
}

TEST_CASE("masked fit keeps the prior on a fully hidden subject") {
  auto [data, truth] = two_class_instance(120, 7, 1101);
  data.mask = Matrix::Ones(120, 7);
  data.mask->row(5).setZero();
  data.values.row(5).setZero();

  const FitResult result = fit_missing(data, base_config(2), random_params(7, 2, 1102));
  for (int k = 0; k < 2; ++k)
    CHECK(result.posterior(5, k) ==
          doctest::Approx(result.params.proportions(k)).epsilon(1e-9));
}

TEST_CASE("stochastic em with identity subsets and unit weights equals fit") {
  const auto [data, truth] = two_class_instance(250, 6, 1201);
  EmConfig config = base_config(3);
  config.lambda1 = 0.03;
  const LcmParams init = random_params(6, 3, 1203);

  StochasticOptions opts;
  opts.row_frac = 1.0;
  opts.col_frac = 1.0;
  opts.weights = {1.0};
  const FitResult a = fit(data, config, init);
  const FitResult b = fit_stochastic(data, config, init, opts);
  CHECK(a.loglik == b.loglik);
  CHECK((a.params.proportions.array() == b.params.proportions.array()).all());
  CHECK((a.params.item_params.array() == b.params.item_params.array()).all());
}

TEST_CASE("stochastic em subsamples deterministically and stays sane") {
  const auto [data, truth] = two_class_instance(400, 8, 1301);
  EmConfig config = base_config(2);
  config.max_outer_iters = 60;
  StochasticOptions opts;
  opts.row_frac = 0.5;
  opts.col_frac = 0.75;
  opts.seed = 9;
  const LcmParams init = random_params(8, 2, 1302);
  const FitResult a = fit_stochastic(data, config, init, opts);
  const FitResult b = fit_stochastic(data, config, init, opts);
  CHECK(a.loglik == b.loglik);
  CHECK((a.params.item_params.array() == b.params.item_params.array()).all());
  a.params.validate(config.theta_floor);

  // The averaged estimate still lands near the two-class truth.
  const bool swapped = a.params.item_params(0, 0) < 0.5;
  CHECK(std::abs(a.params.item_params(0, swapped ? 1 : 0) - 0.85) < 0.1);
}

TEST_CASE("spectral initialization separates plain clusters") {
  const auto [data, truth] = two_class_instance(600, 10, 1401);
  const LcmParams init = spectral_init(data, 2);
  init.validate(0.0);
  const bool swapped = init.item_params(0, 0) < 0.5;
  const int hi = swapped ? 1 : 0;
  CHECK(std::abs(init.proportions(hi) - 0.6) < 0.1);
  for (int j = 0; j < 10; ++j) {
    CHECK(init.item_params(j, hi) > 0.6);
    CHECK(init.item_params(j, 1 - hi) < 0.4);
  }
  // Deterministic: same input, same embedding, same clustering.
  const LcmParams again = spectral_init(data, 2);
  CHECK((init.item_params.array() == again.item_params.array()).all());
}

TEST_CASE("random initialization is valid and reproducible") {
  PhiloxRng rng_a(7, 3), rng_b(7, 3);
  const LcmParams a = random_init(9, 4, rng_a);
  const LcmParams b = random_init(9, 4, rng_b);
  a.validate(1e-4);
  CHECK(a.proportions.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((a.item_params.array() >= 0.1).all());
  CHECK((a.item_params.array() <= 0.9).all());
  CHECK((a.item_params.array() == b.item_params.array()).all());
}

TEST_CASE("merge collapses levels by single linkage with weighted means") {
  LcmParams params;
  params.proportions = Vector(3);
  params.proportions << 0.25, 0.25, 0.5;
  params.item_params = Matrix(2, 3);
  params.item_params << 0.20, 0.21, 0.80,   // {0.20, 0.21} | {0.80}
                        0.30, 0.50, 0.70;   // all gaps exceed the tolerance
  EmConfig config = base_config(3);
  config.merge_tol = 0.05;

  const LcmParams merged = merge_item_params(params, config);
  const double fused = (0.25 * 0.20 + 0.25 * 0.21) / 0.5;
  CHECK(merged.item_params(0, 0) == doctest::Approx(fused).epsilon(1e-15));
  CHECK(merged.item_params(0, 1) == doctest::Approx(fused).epsilon(1e-15));
  CHECK(merged.item_params(0, 0) == merged.item_params(0, 1));  // exact tie
  CHECK(merged.item_params(0, 2) == 0.80);
  CHECK(merged.item_params(1, 0) == 0.30);
  CHECK(merged.item_params(1, 1) == 0.50);
  CHECK(merged.item_params(1, 2) == 0.70);

  // Explicit weights replace the proportions.
  Vector w(3);
  w << 3.0, 1.0, 1.0;
  const LcmParams custom = merge_item_params(params, config, w);
  CHECK(custom.item_params(0, 0) ==
        doctest::Approx((3.0 * 0.20 + 1.0 * 0.21) / 4.0).epsilon(1e-15));
}

TEST_CASE("merge ignores inactive columns and chains single linkage") {
  LcmParams params;
  params.proportions = Vector(3);
  params.proportions << 0.6, 0.4 - 1e-5, 1e-5;  // third class inactive at rho = 1e-4
  params.item_params = Matrix(1, 3);
  params.item_params << 0.40, 0.44, 0.41;
  EmConfig config = base_config(3);
  config.merge_tol = 0.05;

  const LcmParams merged = merge_item_params(params, config);
  const double fused = (0.6 * 0.40 + (0.4 - 1e-5) * 0.44) / (1.0 - 1e-5);
  CHECK(merged.item_params(0, 0) == doctest::Approx(fused).epsilon(1e-12));
  CHECK(merged.item_params(0, 1) == merged.item_params(0, 0));
  CHECK(merged.item_params(0, 2) == 0.41);  // untouched
}

TEST_SUITE_END();
