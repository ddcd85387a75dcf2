#include "hlcm/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace hlcm {

namespace {

// Transitive closure of a hierarchy as a dense 0/1 matrix (irreflexive).
IntMatrix hierarchy_closure(const Hierarchy& h) {
  const int k = h.n_attributes;
  IntMatrix reach = IntMatrix::Zero(k, k);
  for (const auto& [a, b] : h.edges) reach(a, b) = 1;
  for (int via = 0; via < k; ++via)
    for (int a = 0; a < k; ++a) {
      if (reach(a, via) == 0) continue;
      for (int b = 0; b < k; ++b)
        if (reach(via, b) != 0) reach(a, b) = 1;
    }
  return reach;
}

// Backtracking search over attribute bijections that preserve the closure;
// calls visit(mapping) for every complete isomorphism, stopping early when
// visit returns false. Returns true when at least one isomorphism was found.
bool for_each_isomorphism(const IntMatrix& ca, const IntMatrix& cb,
                          const std::function<bool(const std::vector<int>&)>& visit) {
  const int k = static_cast<int>(ca.rows());
  std::vector<int> in_a(static_cast<std::size_t>(k), 0), out_a(static_cast<std::size_t>(k), 0);
  std::vector<int> in_b(static_cast<std::size_t>(k), 0), out_b(static_cast<std::size_t>(k), 0);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) {
      in_a[static_cast<std::size_t>(b)] += ca(a, b);
      out_a[static_cast<std::size_t>(a)] += ca(a, b);
      in_b[static_cast<std::size_t>(b)] += cb(a, b);
      out_b[static_cast<std::size_t>(a)] += cb(a, b);
    }

  std::vector<int> map(static_cast<std::size_t>(k), -1);
  std::vector<char> used(static_cast<std::size_t>(k), 0);
  bool any = false, keep_going = true;

  std::function<void(int)> place = [&](int u) {
    if (!keep_going) return;
    if (u == k) {
      any = true;
      if (!visit(map)) keep_going = false;
      return;
    }
    for (int x = 0; x < k && keep_going; ++x) {
      if (used[static_cast<std::size_t>(x)]) continue;
      if (in_a[static_cast<std::size_t>(u)] != in_b[static_cast<std::size_t>(x)] ||
          out_a[static_cast<std::size_t>(u)] != out_b[static_cast<std::size_t>(x)])
        continue;
      bool ok = true;
      for (int v = 0; v < u && ok; ++v) {
        const int y = map[static_cast<std::size_t>(v)];
        ok = ca(u, v) == cb(x, y) && ca(v, u) == cb(y, x);
      }
      if (!ok) continue;
      used[static_cast<std::size_t>(x)] = 1;
      map[static_cast<std::size_t>(u)] = x;
      place(u + 1);
      used[static_cast<std::size_t>(x)] = 0;
      map[static_cast<std::size_t>(u)] = -1;
    }
  };
  place(0);
  return any;
}

}  // namespace

std::vector<int> hungarian(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n || n < 1) throw invalid_input("hungarian: need a square cost matrix");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      int j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (p[static_cast<std::size_t>(j)] > 0)
      assignment[static_cast<std::size_t>(p[static_cast<std::size_t>(j)]) - 1] = j - 1;
  return assignment;
}

std::vector<int> match_columns(const IndicatorMatrix& gamma_hat,
                               const IndicatorMatrix& gamma_true) {
  if (gamma_hat.rows() != gamma_true.rows())
    throw invalid_input("match_columns: item counts differ");
  const int j_total = static_cast<int>(gamma_hat.rows());
  const int ma = static_cast<int>(gamma_hat.cols());
  const int mt = static_cast<int>(gamma_true.cols());
  const int n = std::max(ma, mt);
  Matrix cost(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (a < ma && b < mt) {
        int hamming = 0;
        for (int j = 0; j < j_total; ++j)
          if (gamma_hat(j, a) != gamma_true(j, b)) ++hamming;
        cost(a, b) = hamming;
      } else {
        cost(a, b) = j_total;  // padding column on either side
      }
    }
  const auto assignment = hungarian(cost);
  std::vector<int> matched(static_cast<std::size_t>(ma));
  for (int a = 0; a < ma; ++a)
    matched[static_cast<std::size_t>(a)] = assignment[static_cast<std::size_t>(a)] < mt
                                               ? assignment[static_cast<std::size_t>(a)]
                                               : -1;
  return matched;
}

bool hierarchies_isomorphic(const Hierarchy& a, const Hierarchy& b) {
  a.validate();
  b.validate();
  if (a.n_attributes != b.n_attributes) return false;
  const IntMatrix ca = hierarchy_closure(a), cb = hierarchy_closure(b);
  return for_each_isomorphism(ca, cb, [](const std::vector<int>&) { return false; });
}

Metrics score(const RecoveryResult& recovery, const FitResult& fit, const GroundTruth& truth,
              double /*t*/) {
  Metrics metrics;
  const int m_true = truth.profiles.size();
  const int m_hat = static_cast<int>(recovery.gamma.cols());
  const int j_total = static_cast<int>(recovery.gamma.rows());
  if (truth.theta.rows() != j_total)
    throw invalid_input("score: item counts of estimate and truth differ");

  LcmParams truth_params;
  truth_params.proportions = truth.proportions;
  truth_params.item_params = truth.theta;
  const IndicatorMatrix gamma_true = indicator_matrix(truth_params, 0.0, 0.0);
  const PartialOrderDag dag_true = partial_orders(gamma_true, 0.0);
  if (dag_true.n_nodes != m_true)
    throw invalid_input("score: true classes are not separated by theta");

  metrics.acc_m = m_hat == m_true ? 1 : 0;
  const std::vector<int> matched = match_columns(recovery.gamma, gamma_true);

  if (metrics.acc_m == 1 && recovery.dag.n_nodes == m_hat) {
    bool same = true;
    for (int a = 0; a < m_hat && same; ++a)
      for (int b = 0; b < m_hat && same; ++b) {
        if (a == b) continue;
        const int est = recovery.dag.adjacency(recovery.class_to_node[static_cast<std::size_t>(a)],
                                               recovery.class_to_node[static_cast<std::size_t>(b)]);
        const int ref = dag_true.adjacency(matched[static_cast<std::size_t>(a)],
                                           matched[static_cast<std::size_t>(b)]);
        same = est == ref;
      }
    metrics.acc_p = same ? 1 : 0;
  }

  metrics.acc_e = hierarchies_isomorphic(recovery.hierarchy, truth.hierarchy) ? 1 : 0;

  if (metrics.acc_m == 1) {
    double sse = 0.0;
    for (int a = 0; a < m_hat; ++a) {
      const int col = recovery.active[static_cast<std::size_t>(a)];
      const int ref = matched[static_cast<std::size_t>(a)];
      for (int j = 0; j < j_total; ++j) {
        const double diff = fit.params.item_params(j, col) - truth.theta(j, ref);
        sse += diff * diff;
      }
    }
    metrics.mse_theta = sse / (static_cast<double>(j_total) * m_true);
  }

  if (metrics.acc_e == 1) {
    // Canonical true Q: the minimal indicated profile per item under the true
    // structure. Raw generating rows need not be identifiable under a
    // hierarchy, the canonical form is.
    IndicatorMatrix id_true = gamma_true;
    AttributeProfileSet profiles_true = truth.profiles;
    const QMatrix q_true = reconstruct_q(id_true, profiles_true);
    const IntMatrix ca = hierarchy_closure(recovery.hierarchy);
    const IntMatrix cb = hierarchy_closure(truth.hierarchy);
    const int k = truth.hierarchy.n_attributes;
    double best = 0.0;
    for_each_isomorphism(ca, cb, [&](const std::vector<int>& map) {
      int agree = 0;
      for (int j = 0; j < j_total; ++j)
        for (int r = 0; r < k; ++r) {
          const int est = (recovery.q.rows[static_cast<std::size_t>(j)] >> r) & 1u;
          const int ref =
              (q_true.rows[static_cast<std::size_t>(j)] >> map[static_cast<std::size_t>(r)]) & 1u;
          if (est == ref) ++agree;
        }
      best = std::max(best, static_cast<double>(agree) /
                                (static_cast<double>(j_total) * k));
      return true;
    });
    metrics.acc_q = best;
  }
  return metrics;
}

}  // namespace hlcm
