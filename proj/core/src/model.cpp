#include "hlcm/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <queue>

namespace hlcm {

bool profile_leq(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size())
    throw invalid_input("profile_leq: length mismatch (" + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()) + ")");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] > b[i]) return false;
  return true;
}

int profile_popcount(Profile p) { return std::popcount(p); }

bool profile_canonical_less(Profile a, Profile b, int n_attributes) {
  const int pa = std::popcount(a), pb = std::popcount(b);
  if (pa != pb) return pa < pb;
  for (int k = 0; k < n_attributes; ++k) {
    const unsigned ba = (a >> k) & 1u, bb = (b >> k) & 1u;
    if (ba != bb) return ba < bb;  // '0' sorts before '1' at the first difference
  }
  return false;
}

std::string profile_to_string(Profile p, int n_attributes) {
  std::string s(static_cast<std::size_t>(n_attributes), '0');
  for (int k = 0; k < n_attributes; ++k)
    if ((p >> k) & 1u) s[static_cast<std::size_t>(k)] = '1';
  return s;
}

Profile profile_from_string(const std::string& s) {
  if (s.size() > 31) throw invalid_input("profile string too long: " + s);
  Profile p = 0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] == '1')
      p |= (Profile{1} << k);
    else if (s[k] != '0')
      throw invalid_input("profile string must be 0/1, got '" + s + "'");
  }
  return p;
}

bool AttributeProfileSet::contains(Profile p) const {
  return std::find(profiles.begin(), profiles.end(), p) != profiles.end();
}

std::vector<int> AttributeProfileSet::column(int k) const {
  std::vector<int> col(profiles.size());
  for (std::size_t m = 0; m < profiles.size(); ++m) col[m] = (profiles[m] >> k) & 1u;
  return col;
}

void Hierarchy::validate() const {
  if (n_attributes <= 0) throw invalid_input("hierarchy: n_attributes must be positive");
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n_attributes));
  std::vector<int> indeg(static_cast<std::size_t>(n_attributes), 0);
  for (const auto& [a, b] : edges) {
    if (a < 0 || a >= n_attributes || b < 0 || b >= n_attributes)
      throw invalid_input("hierarchy: edge endpoint out of range");
    if (a == b) throw invalid_input("hierarchy: self-loop on attribute " + std::to_string(a + 1));
    out[static_cast<std::size_t>(a)].push_back(b);
    ++indeg[static_cast<std::size_t>(b)];
  }
  // Kahn's algorithm; leftover nodes indicate a cycle.
  std::queue<int> ready;
  for (int k = 0; k < n_attributes; ++k)
    if (indeg[static_cast<std::size_t>(k)] == 0) ready.push(k);
  int seen = 0;
  while (!ready.empty()) {
    const int k = ready.front();
    ready.pop();
    ++seen;
    for (int l : out[static_cast<std::size_t>(k)])
      if (--indeg[static_cast<std::size_t>(l)] == 0) ready.push(l);
  }
  if (seen != n_attributes) throw invalid_input("hierarchy: prerequisite relation has a cycle");
}

Hierarchy hierarchy_template(HierarchyTemplate name, int n_attributes) {
  if (n_attributes != 4)
    throw invalid_input("hierarchy_template: templates are defined for 4 attributes only");
  Hierarchy h;
  h.n_attributes = 4;
  switch (name) {
    case HierarchyTemplate::linear:
      h.edges = {{0, 1}, {1, 2}, {2, 3}};
      break;
    case HierarchyTemplate::convergent:
      h.edges = {{0, 1}, {0, 2}, {1, 3}, {2, 3}};
      break;
    case HierarchyTemplate::divergent:
      h.edges = {{0, 1}, {0, 2}, {2, 3}};
      break;
    case HierarchyTemplate::unstructured:
      h.edges = {{0, 1}, {0, 2}, {0, 3}};
      break;
  }
  return h;
}

HierarchyTemplate hierarchy_template_from_string(const std::string& s) {
  if (s == "linear") return HierarchyTemplate::linear;
  if (s == "convergent") return HierarchyTemplate::convergent;
  if (s == "divergent") return HierarchyTemplate::divergent;
  if (s == "unstructured") return HierarchyTemplate::unstructured;
  throw invalid_input("unknown hierarchy template '" + s + "'");
}

std::string to_string(HierarchyTemplate t) {
  switch (t) {
    case HierarchyTemplate::linear: return "linear";
    case HierarchyTemplate::convergent: return "convergent";
    case HierarchyTemplate::divergent: return "divergent";
    case HierarchyTemplate::unstructured: return "unstructured";
  }
  return "?";
}

AttributeProfileSet induced_profiles(const Hierarchy& hierarchy) {
  hierarchy.validate();
  const int k = hierarchy.n_attributes;
  AttributeProfileSet out;
  out.n_attributes = k;
  for (Profile p = 0; p < (Profile{1} << k); ++p) {
    bool ok = true;
    for (const auto& [a, b] : hierarchy.edges) {
      if (((p >> b) & 1u) && !((p >> a) & 1u)) {  // dependent without prerequisite
        ok = false;
        break;
      }
    }
    if (ok) out.profiles.push_back(p);
  }
  std::sort(out.profiles.begin(), out.profiles.end(),
            [k](Profile a, Profile b) { return profile_canonical_less(a, b, k); });
  return out;
}

void ResponseData::validate() const {
  if (values.rows() < 1 || values.cols() < 1)
    throw invalid_input("response data must have at least one subject and one item");
  if (mask && (mask->rows() != values.rows() || mask->cols() != values.cols()))
    throw invalid_input("mask dimensions do not match the response matrix");
  for (int i = 0; i < values.rows(); ++i)
    for (int j = 0; j < values.cols(); ++j) {
      const bool observed = !mask || (*mask)(i, j) != 0.0;
      if (mask) {
        const double m = (*mask)(i, j);
        if (m != 0.0 && m != 1.0) throw invalid_input("mask entries must be 0 or 1");
      }
      const double v = values(i, j);
      if (observed && v != 0.0 && v != 1.0)
        throw invalid_input("responses must be 0 or 1 (subject " + std::to_string(i + 1) +
                            ", item " + std::to_string(j + 1) + ")");
    }
  if (mask) {
    for (int j = 0; j < values.cols(); ++j)
      if (mask->col(j).sum() == 0.0)
        throw invalid_input("item " + std::to_string(j + 1) + " has no observed responses");
  }
}

bool ResponseData::mask_all_ones() const {
  if (!mask) return true;
  return (mask->array() == 1.0).all();
}

void LcmParams::validate(double theta_floor) const {
  if (proportions.size() < 1) throw invalid_input("params: empty proportion vector");
  if (item_params.cols() != proportions.size())
    throw invalid_input("params: theta column count does not match the proportion vector");
  double total = 0.0;
  for (int k = 0; k < proportions.size(); ++k) {
    const double p = proportions[k];
    if (!(p >= 0.0 && p <= 1.0)) throw invalid_input("params: proportions must lie in [0,1]");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw invalid_input("params: proportions must sum to 1");
  const double lo = theta_floor, hi = 1.0 - theta_floor;
  if ((item_params.array() < lo).any() || (item_params.array() > hi).any())
    throw invalid_input("params: item parameters outside the floor box");
}

std::vector<int> active_classes(const Vector& proportions, double rho) {
  std::vector<int> act;
  for (int k = 0; k < proportions.size(); ++k)
    if (proportions[k] > rho) act.push_back(k);
  return act;
}

}  // namespace hlcm
