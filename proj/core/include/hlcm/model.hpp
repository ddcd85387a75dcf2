#pragma once

// Core domain types for hierarchical latent class / cognitive diagnosis models:
// attribute profiles, hierarchies, Q-matrices, response data and model parameters.
//
// Conventions used throughout the library:
//   - Attribute profiles are stored as bitmasks (Profile); bit k (LSB first)
//     holds attribute k+1. User-facing I/O renders attribute 1 as the first
//     character of a bit-string, so mask 0b0011 with K=4 prints as "1100".
//   - Attribute and class indices are 0-based internally, 1-based in files
//     and on the command line.
//   - Matrices are Eigen; response matrices are N x J, item parameters J x M.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hlcm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntMatrix = Eigen::MatrixXi;

// A latent attribute profile as a bitmask; only the low K bits are meaningful.
using Profile = std::uint32_t;

// Thrown when inputs violate a documented precondition (dimension mismatches,
// malformed hierarchies, invalid parameter vectors, ...).
struct invalid_input : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown by I/O and parsing with file/line context attached by the caller.
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when the latent-structure recovery cannot produce a consistent
// result (e.g. the tolerant domination relation contains a genuine cycle).
struct recovery_failed : std::runtime_error {
  std::vector<int> cycle;  // offending class indices, if a cycle was found
  explicit recovery_failed(const std::string& msg, std::vector<int> cyc = {})
      : std::runtime_error(msg), cycle(std::move(cyc)) {}
};

// ---------------------------------------------------------------------------
// Profiles

// a "<=" b componentwise: every attribute of a is also in b.
inline bool profile_leq(Profile a, Profile b) { return (a & ~b) == 0; }

// Checked overload on explicit 0/1 vectors; throws on length mismatch.
bool profile_leq(const std::vector<int>& a, const std::vector<int>& b);

int profile_popcount(Profile p);

// Canonical order: by popcount, then lexicographically on the printed
// bit-string (attribute 1 first). Gives stable class indices across runs.
bool profile_canonical_less(Profile a, Profile b, int n_attributes);

// "1100" <-> mask with bits {0,1}. parse accepts only '0'/'1'.
std::string profile_to_string(Profile p, int n_attributes);
Profile profile_from_string(const std::string& s);

// Ordered list of distinct K-bit profiles (the rows of the matrix usually
// written as A). Producers choose the order: induced_profiles sorts
// canonically, recovery keeps rows aligned with latent-class columns.
struct AttributeProfileSet {
  int n_attributes = 0;
  std::vector<Profile> profiles;

  int size() const { return static_cast<int>(profiles.size()); }
  bool contains(Profile p) const;
  // Column k as a 0/1 vector over the rows; used for hierarchy extraction.
  std::vector<int> column(int k) const;
};

// ---------------------------------------------------------------------------
// Hierarchy

// Prerequisite relation among attributes: an edge (k, l) means k must be
// mastered before l, so profiles with attribute l but not k are excluded.
struct Hierarchy {
  int n_attributes = 0;
  std::vector<std::pair<int, int>> edges;  // 0-based (prerequisite, dependent)

  // Throws invalid_input on out-of-range endpoints, self-loops, or cycles.
  void validate() const;
};

enum class HierarchyTemplate { linear, convergent, divergent, unstructured };

// The four standard 4-attribute hierarchy shapes. Only K = 4 is defined.
Hierarchy hierarchy_template(HierarchyTemplate name, int n_attributes = 4);
HierarchyTemplate hierarchy_template_from_string(const std::string& s);
std::string to_string(HierarchyTemplate t);

// All profiles consistent with the hierarchy (attribute l present implies
// every prerequisite present), in canonical (popcount, lex) order.
AttributeProfileSet induced_profiles(const Hierarchy& hierarchy);

// ---------------------------------------------------------------------------
// Q-matrix

// J x K binary design matrix; row j lists the attributes item j measures.
struct QMatrix {
  int n_attributes = 0;
  std::vector<Profile> rows;

  int n_items() const { return static_cast<int>(rows.size()); }
  int entry(int j, int k) const { return (rows[j] >> k) & 1u; }
};

// ---------------------------------------------------------------------------
// Data and parameters

// N x J binary responses with an optional observation mask (1 = observed).
// Masked cells of `values` are ignored; by convention they are stored as 0.
struct ResponseData {
  Matrix values;
  std::optional<Matrix> mask;

  int n_subjects() const { return static_cast<int>(values.rows()); }
  int n_items() const { return static_cast<int>(values.cols()); }

  // Checks values (and mask, if any) are 0/1 and that every item column has
  // at least one observed entry. Throws invalid_input.
  void validate() const;
  bool mask_all_ones() const;
};

// Latent class model parameters: class proportions pi (length M) and item
// response probabilities theta (J x M).
struct LcmParams {
  Vector proportions;
  Matrix item_params;

  int n_classes() const { return static_cast<int>(proportions.size()); }
  int n_items() const { return static_cast<int>(item_params.rows()); }

  // proportions in [0,1] summing to 1 (1e-9), theta inside the floor box.
  void validate(double theta_floor) const;
};

// J x M indicator of the "most capable" classes per item: entry (j, m) is 1
// when class m attains the row maximum of theta (within a small tolerance).
using IndicatorMatrix = IntMatrix;

// Indices of classes whose proportion exceeds rho, in ascending order.
std::vector<int> active_classes(const Vector& proportions, double rho);

}  // namespace hlcm
