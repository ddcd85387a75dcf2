#pragma once

// Latent-structure recovery from fitted (pi, Theta): indicator matrix of most
// capable classes, tolerant domination partial order with transitive
// reduction, layered binary representations (the recovered attribute
// profiles), the attribute hierarchy read off column dominance, and the
// Q-matrix as the minimal indicated profile per item.

#include "hlcm/model.hpp"

#include <string>
#include <vector>

namespace hlcm {

// Transitively reduced domination DAG over latent classes. Nodes normally
// correspond 1:1 to active classes; classes that dominate each other within
// tolerance are collapsed into one node (recorded in `members`, warned).
struct PartialOrderDag {
  int n_nodes = 0;
  IntMatrix adjacency;                    // reduced relation, 0/1
  std::vector<std::vector<int>> members;  // node -> column indices of gamma
  std::vector<std::string> warnings;

  bool collapsed() const;  // any node with more than one member
};

struct RecoveryResult {
  IndicatorMatrix gamma;       // J x M_hat over active classes
  PartialOrderDag dag;
  AttributeProfileSet profiles;  // one row per DAG node, aligned with dag
  std::vector<int> class_to_node;  // gamma column -> dag node / profile row
  Hierarchy hierarchy;
  QMatrix q;
  int k_hat = 0;
  std::vector<int> active;     // original class indices behind gamma columns
  std::vector<std::string> warnings;
  bool degenerate = false;     // single class, k_hat = 0
};

// Gamma over active classes (pi > rho): entry 1 when theta_jm reaches the
// active row maximum within eps_gamma.
IndicatorMatrix indicator_matrix(const LcmParams& params, double rho, double eps_gamma);

// Raw relation: column m1 precedes m2 when Gamma_{j,m1} <= Gamma_{j,m2} for
// all but at most floor(t * J) items. Mutual precedence collapses the classes
// (with a warning) when t > 0; any other cycle — and every cycle when t = 0 —
// raises recovery_failed carrying the offending classes. The surviving
// relation is transitively reduced by zeroing every entry with a 2-step path.
PartialOrderDag partial_orders(const IndicatorMatrix& gamma, double t);

// Layered sweep from the root (a virtual all-zero root is inserted when the
// DAG has several sources): a single-parent node extends its parent by one
// fresh attribute; a multi-parent node takes the union of its parents,
// disambiguated by a fresh attribute if the union would duplicate an existing
// profile. Returns one profile per node; width k_hat = attributes created.
AttributeProfileSet binary_representations(const PartialOrderDag& dag,
                                           std::vector<std::string>* warnings = nullptr);

// Prerequisite k -> l whenever profile column k dominates column l
// componentwise; reported transitively reduced.
Hierarchy extract_hierarchy(const AttributeProfileSet& profiles);

// q_j = the unique minimal profile among the indicated rows; if the indicated
// minima form an antichain, falls back to their componentwise AND (warned).
// gamma columns must align with profile rows.
QMatrix reconstruct_q(const IndicatorMatrix& gamma, const AttributeProfileSet& profiles,
                      std::vector<std::string>* warnings = nullptr);

// The full pipeline on merged parameters.
RecoveryResult recover(const LcmParams& params, double rho, double eps_gamma, double t);

// Under a GDINA-type item, two profiles are distinguishable iff they possess
// different subsets of the item's required attributes.
bool gdina_distinguishes(Profile q_row, Profile alpha, Profile alpha_prime);

}  // namespace hlcm
