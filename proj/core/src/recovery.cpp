#include "hlcm/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hlcm {

namespace {

// Reachability closure of a 0/1 adjacency matrix (Floyd-Warshall on bools).
std::vector<std::vector<char>> closure(const IntMatrix& adj) {
  const int n = static_cast<int>(adj.rows());
  std::vector<std::vector<char>> reach(static_cast<std::size_t>(n),
                                       std::vector<char>(static_cast<std::size_t>(n), 0));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      reach[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = adj(a, b) != 0;
  for (int via = 0; via < n; ++via)
    for (int a = 0; a < n; ++a) {
      if (!reach[static_cast<std::size_t>(a)][static_cast<std::size_t>(via)]) continue;
      for (int b = 0; b < n; ++b)
        if (reach[static_cast<std::size_t>(via)][static_cast<std::size_t>(b)])
          reach[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = 1;
    }
  return reach;
}

// Zero every edge that also has a 2-step path. Applied to a DAG whose closure
// equals the closure of its reduction, this yields the transitive reduction;
// removals are computed against the input and applied simultaneously.
IntMatrix reduce_edges(const IntMatrix& adj) {
  const int n = static_cast<int>(adj.rows());
  IntMatrix out = adj;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (adj(a, b) == 0) continue;
      for (int via = 0; via < n; ++via)
        if (via != a && via != b && adj(a, via) != 0 && adj(via, b) != 0) {
          out(a, b) = 0;
          break;
        }
    }
  return out;
}

std::string join_classes(const std::vector<int>& indices) {
  std::string s;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (i > 0) s += ", ";
    s += std::to_string(indices[i] + 1);
  }
  return s;
}

}  // namespace

bool PartialOrderDag::collapsed() const {
  return std::any_of(members.begin(), members.end(),
                     [](const std::vector<int>& m) { return m.size() > 1; });
}

IndicatorMatrix indicator_matrix(const LcmParams& params, double rho, double eps_gamma) {
  if (eps_gamma < 0.0) throw invalid_input("indicator_matrix: eps_gamma must be >= 0");
  const auto act = active_classes(params.proportions, rho);
  if (act.empty()) throw invalid_input("indicator_matrix: no active classes");
  const int j_total = static_cast<int>(params.item_params.rows());
  IndicatorMatrix gamma(j_total, static_cast<int>(act.size()));
  for (int j = 0; j < j_total; ++j) {
    double top = params.item_params(j, act[0]);
    for (int a : act) top = std::max(top, params.item_params(j, a));
    for (std::size_t c = 0; c < act.size(); ++c)
      gamma(j, static_cast<int>(c)) =
          params.item_params(j, act[c]) >= top - eps_gamma ? 1 : 0;
  }
  return gamma;
}

PartialOrderDag partial_orders(const IndicatorMatrix& gamma, double t) {
  if (!(t >= 0.0 && t < 1.0)) throw invalid_input("partial_orders: t must lie in [0,1)");
  const int j_total = static_cast<int>(gamma.rows());
  const int m = static_cast<int>(gamma.cols());
  if (j_total < 1 || m < 1) throw invalid_input("partial_orders: empty indicator matrix");
  const int allowed = static_cast<int>(std::floor(t * j_total));

  IntMatrix raw = IntMatrix::Zero(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      if (a == b) continue;
      int violations = 0;
      for (int j = 0; j < j_total; ++j)
        if (gamma(j, a) > gamma(j, b)) ++violations;
      raw(a, b) = violations <= allowed ? 1 : 0;
    }

  // Strongly connected components of the tolerant relation. Only components
  // whose members all dominate each other directly may be collapsed, and only
  // when the tolerance is positive; everything else is a genuine cycle.
  const auto reach = closure(raw);
  std::vector<int> comp(static_cast<std::size_t>(m), -1);
  std::vector<std::vector<int>> groups;
  for (int a = 0; a < m; ++a) {
    if (comp[static_cast<std::size_t>(a)] >= 0) continue;
    const int id = static_cast<int>(groups.size());
    groups.emplace_back();
    for (int b = a; b < m; ++b) {
      const bool together =
          b == a || (reach[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] &&
                     reach[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)]);
      if (comp[static_cast<std::size_t>(b)] < 0 && together) {
        comp[static_cast<std::size_t>(b)] = id;
        groups.back().push_back(b);
      }
    }
  }

  PartialOrderDag dag;
  for (const auto& g : groups) {
    if (g.size() <= 1) continue;
    bool mutual = true;
    for (int a : g)
      for (int b : g)
        if (a != b && raw(a, b) == 0) mutual = false;
    if (t == 0.0 || !mutual)
      throw recovery_failed("domination relation contains a cycle through classes " +
                                join_classes(g),
                            g);
    dag.warnings.push_back("classes " + join_classes(g) +
                           " dominate each other within tolerance; collapsed into one node");
  }

  dag.n_nodes = static_cast<int>(groups.size());
  dag.members = std::move(groups);
  IntMatrix cond = IntMatrix::Zero(dag.n_nodes, dag.n_nodes);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      const int u = comp[static_cast<std::size_t>(a)], v = comp[static_cast<std::size_t>(b)];
      if (u != v && raw(a, b) != 0) cond(u, v) = 1;
    }
  dag.adjacency = reduce_edges(cond);
  return dag;
}

AttributeProfileSet binary_representations(const PartialOrderDag& dag,
                                           std::vector<std::string>* warnings) {
  const int n = dag.n_nodes;
  if (n < 1) throw invalid_input("binary_representations: empty DAG");
  if (dag.adjacency.rows() != n || dag.adjacency.cols() != n)
    throw invalid_input("binary_representations: adjacency shape mismatch");

  // Edge u -> v means u is dominated by v: v's profile must extend u's, so the
  // sweep walks from the minimal (root) nodes downward.
  std::vector<std::vector<int>> parents(static_cast<std::size_t>(n));
  std::vector<int> indeg(static_cast<std::size_t>(n), 0);
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v)
      if (dag.adjacency(u, v) != 0) {
        parents[static_cast<std::size_t>(v)].push_back(u);
        ++indeg[static_cast<std::size_t>(v)];
      }

  std::vector<int> sources;
  for (int v = 0; v < n; ++v)
    if (indeg[static_cast<std::size_t>(v)] == 0) sources.push_back(v);
  if (sources.empty())
    throw invalid_input("binary_representations: adjacency is not acyclic");

  constexpr int kVirtualRoot = -1;
  const bool virtual_root = sources.size() > 1;
  if (virtual_root) {
    if (warnings != nullptr)
      warnings->push_back(
          "domination DAG has several minimal nodes; attached a virtual all-zero root");
    for (int v : sources) parents[static_cast<std::size_t>(v)].push_back(kVirtualRoot);
  }

  // Longest-path layers, then a (layer, node index) sweep.
  std::vector<int> layer(static_cast<std::size_t>(n), 0);
  {
    std::vector<int> pending = indeg;
    std::vector<int> queue = sources;
    std::size_t done = 0;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.erase(queue.begin());
      ++done;
      for (int v = 0; v < n; ++v)
        if (dag.adjacency(u, v) != 0) {
          layer[static_cast<std::size_t>(v)] = std::max(
              layer[static_cast<std::size_t>(v)], layer[static_cast<std::size_t>(u)] + 1);
          if (--pending[static_cast<std::size_t>(v)] == 0) {
            queue.push_back(v);
            std::sort(queue.begin(), queue.end());
          }
        }
    }
    if (done != static_cast<std::size_t>(n))
      throw invalid_input("binary_representations: adjacency is not acyclic");
  }

  std::vector<int> visit(static_cast<std::size_t>(n));
  std::iota(visit.begin(), visit.end(), 0);
  std::sort(visit.begin(), visit.end(), [&](int a, int b) {
    if (layer[static_cast<std::size_t>(a)] != layer[static_cast<std::size_t>(b)])
      return layer[static_cast<std::size_t>(a)] < layer[static_cast<std::size_t>(b)];
    return a < b;
  });

  std::vector<Profile> bits(static_cast<std::size_t>(n), 0);
  std::vector<char> assigned(static_cast<std::size_t>(n), 0);
  auto profile_of = [&](int u) { return u == kVirtualRoot ? Profile{0} : bits[static_cast<std::size_t>(u)]; };
  auto is_taken = [&](Profile p) {
    if (virtual_root && p == 0) return true;
    for (int u = 0; u < n; ++u)
      if (assigned[static_cast<std::size_t>(u)] && bits[static_cast<std::size_t>(u)] == p)
        return true;
    return false;
  };

  int dims = 0;
  auto fresh_dim = [&]() {
    if (dims >= 31) throw recovery_failed("binary representation needs more than 31 attributes");
    return Profile{1} << dims++;
  };

  for (int v : visit) {
    const auto& ps = parents[static_cast<std::size_t>(v)];
    if (ps.empty()) {
      bits[static_cast<std::size_t>(v)] = 0;  // unique root keeps the empty profile
    } else if (ps.size() == 1) {
      bits[static_cast<std::size_t>(v)] = profile_of(ps.front()) | fresh_dim();
    } else {
      Profile u = 0;
      for (int p : ps) u |= profile_of(p);
      if (is_taken(u)) {
        if (warnings != nullptr)
          warnings->push_back("node " + std::to_string(v + 1) +
                              ": parent union duplicates an existing profile; "
                              "added a fresh attribute");
        u |= fresh_dim();
      }
      bits[static_cast<std::size_t>(v)] = u;
    }
    assigned[static_cast<std::size_t>(v)] = 1;
  }

  AttributeProfileSet out;
  out.n_attributes = dims;
  out.profiles = std::move(bits);
  return out;
}

Hierarchy extract_hierarchy(const AttributeProfileSet& profiles) {
  const int k = profiles.n_attributes;
  if (k < 1) throw invalid_input("extract_hierarchy: profile set has no attributes");
  Hierarchy h;
  h.n_attributes = k;
  if (k == 1) return h;  // a single attribute has no prerequisite pairs

  IntMatrix dom = IntMatrix::Zero(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) {
      if (a == b) continue;
      bool a_dominates = true, equal = true;
      for (Profile p : profiles.profiles) {
        const int xa = (p >> a) & 1u, xb = (p >> b) & 1u;
        if (xa < xb) a_dominates = false;
        if (xa != xb) equal = false;
      }
      // Identical columns have no prerequisite direction; leave both edges out.
      dom(a, b) = (a_dominates && !equal) ? 1 : 0;
    }
  const IntMatrix reduced = reduce_edges(dom);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b)
      if (reduced(a, b) != 0) h.edges.emplace_back(a, b);
  return h;
}

QMatrix reconstruct_q(const IndicatorMatrix& gamma, const AttributeProfileSet& profiles,
                      std::vector<std::string>* warnings) {
  const int m = static_cast<int>(gamma.cols());
  if (m != profiles.size())
    throw invalid_input("reconstruct_q: gamma columns must align with profile rows");
  QMatrix q;
  q.n_attributes = profiles.n_attributes;
  q.rows.resize(static_cast<std::size_t>(gamma.rows()));
  const Profile full = profiles.n_attributes >= 31
                           ? ~Profile{0}
                           : (Profile{1} << profiles.n_attributes) - 1;
  for (int j = 0; j < gamma.rows(); ++j) {
    std::vector<Profile> indicated;
    for (int c = 0; c < m; ++c)
      if (gamma(j, c) != 0) indicated.push_back(profiles.profiles[static_cast<std::size_t>(c)]);
    if (indicated.empty())
      throw invalid_input("reconstruct_q: item " + std::to_string(j + 1) +
                          " indicates no class");
    Profile minimal = 0;
    bool found = false;
    for (Profile cand : indicated) {
      bool below_all = true;
      for (Profile other : indicated)
        if (!profile_leq(cand, other)) {
          below_all = false;
          break;
        }
      if (below_all) {
        minimal = cand;
        found = true;
        break;
      }
    }
    if (!found) {
      minimal = full;
      for (Profile p : indicated) minimal &= p;
      if (warnings != nullptr)
        warnings->push_back("item " + std::to_string(j + 1) +
                            ": indicated profiles have no minimum; "
                            "using their componentwise intersection");
    }
    if (minimal == 0 && profiles.n_attributes > 0 && warnings != nullptr)
      warnings->push_back("item " + std::to_string(j + 1) + " measures no attribute");
    q.rows[static_cast<std::size_t>(j)] = minimal;
  }
  return q;
}

RecoveryResult recover(const LcmParams& params, double rho, double eps_gamma, double t) {
  RecoveryResult result;
  result.active = active_classes(params.proportions, rho);
  result.gamma = indicator_matrix(params, rho, eps_gamma);
  const int m = static_cast<int>(result.gamma.cols());

  auto fill_degenerate = [&](PartialOrderDag dag, const std::string& why) {
    result.degenerate = true;
    result.dag = std::move(dag);
    result.profiles.n_attributes = 0;
    result.profiles.profiles = {0};
    result.class_to_node.assign(static_cast<std::size_t>(m), 0);
    result.hierarchy.n_attributes = 1;
    result.q.n_attributes = 0;
    result.q.rows.assign(static_cast<std::size_t>(result.gamma.rows()), 0);
    result.k_hat = 0;
    result.warnings.push_back(why);
  };

  if (m == 1) {
    PartialOrderDag dag;
    dag.n_nodes = 1;
    dag.adjacency = IntMatrix::Zero(1, 1);
    dag.members = {{0}};
    fill_degenerate(std::move(dag), "only one class is active: no structure to recover");
    return result;
  }

  result.dag = partial_orders(result.gamma, t);
  result.warnings.insert(result.warnings.end(), result.dag.warnings.begin(),
                         result.dag.warnings.end());
  if (result.dag.n_nodes == 1) {
    auto dag = result.dag;
    fill_degenerate(std::move(dag),
                    "all active classes collapsed into one node: no structure to recover");
    return result;
  }

  result.class_to_node.assign(static_cast<std::size_t>(m), -1);
  for (int node = 0; node < result.dag.n_nodes; ++node)
    for (int c : result.dag.members[static_cast<std::size_t>(node)])
      result.class_to_node[static_cast<std::size_t>(c)] = node;

  result.profiles = binary_representations(result.dag, &result.warnings);
  result.k_hat = result.profiles.n_attributes;
  result.hierarchy = extract_hierarchy(result.profiles);

  // Node-level indicators (any member class attains the row maximum).
  IndicatorMatrix node_gamma = IndicatorMatrix::Zero(result.gamma.rows(), result.dag.n_nodes);
  for (int j = 0; j < result.gamma.rows(); ++j)
    for (int c = 0; c < m; ++c)
      if (result.gamma(j, c) != 0)
        node_gamma(j, result.class_to_node[static_cast<std::size_t>(c)]) = 1;
  result.q = reconstruct_q(node_gamma, result.profiles, &result.warnings);
  return result;
}

bool gdina_distinguishes(Profile q_row, Profile alpha, Profile alpha_prime) {
  return (q_row & alpha) != (q_row & alpha_prime);
}

}  // namespace hlcm
