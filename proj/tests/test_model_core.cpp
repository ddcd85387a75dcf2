#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "hlcm/model.hpp"

using namespace hlcm;

namespace {

// Independent oracle: enumerate all 2^K profiles and keep those respecting
// every prerequisite (edge k -> l forbids alpha_l = 1 with alpha_k = 0).
std::set<std::string> brute_force_induced(const Hierarchy& h) {
  std::set<std::string> keep;
  for (Profile a = 0; a < (Profile{1} << h.n_attributes); ++a) {
    bool ok = true;
    for (const auto& [k, l] : h.edges)
      if (((a >> l) & 1u) == 1u && ((a >> k) & 1u) == 0u) ok = false;
    if (ok) keep.insert(profile_to_string(a, h.n_attributes));
  }
  return keep;
}

std::set<std::string> as_strings(const AttributeProfileSet& s) {
  std::set<std::string> out;
  for (Profile p : s.profiles) out.insert(profile_to_string(p, s.n_attributes));
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("model_core");

TEST_CASE("profile string round trip and bit order") {
  // Character i of the string is attribute i+1 (LSB first).
  CHECK(profile_to_string(0b0001, 4) == "1000");
  CHECK(profile_to_string(0b1010, 4) == "0101");
  CHECK(profile_from_string("1000") == 0b0001);
  CHECK(profile_from_string("0101") == 0b1010);
  for (Profile p = 0; p < 32; ++p)
    CHECK(profile_from_string(profile_to_string(p, 5)) == p);
  CHECK_THROWS_AS(profile_from_string("01x1"), invalid_input);
}

TEST_CASE("profile helpers") {
  CHECK(profile_popcount(0b1011) == 3);
  CHECK(profile_leq(0b0001, 0b0011));
  CHECK_FALSE(profile_leq(0b0100, 0b0011));
  const std::vector<int> a{1, 0, 1}, b{1, 1, 1};
  CHECK(profile_leq(a, b));
  CHECK_FALSE(profile_leq(b, a));
}

TEST_CASE("canonical order sorts by popcount then lexicographically") {
  std::vector<Profile> all;
  for (Profile p = 0; p < 8; ++p) all.push_back(p);
  std::sort(all.begin(), all.end(),
            [](Profile x, Profile y) { return profile_canonical_less(x, y, 3); });
  std::vector<std::string> got;
  for (Profile p : all) got.push_back(profile_to_string(p, 3));
  // Within a popcount tier, bit-string order with '0' before '1'.
  const std::vector<std::string> want{"000", "001", "010", "100",
                                      "011", "101", "110", "111"};
  CHECK(got == want);
}

TEST_CASE("hierarchy validation") {
  Hierarchy h;
  h.n_attributes = 3;
  h.edges = {{0, 1}, {1, 2}};
  CHECK_NOTHROW(h.validate());
  h.edges.push_back({2, 0});  // cycle
  CHECK_THROWS_AS(h.validate(), invalid_input);
  h.edges = {{0, 0}};
  CHECK_THROWS_AS(h.validate(), invalid_input);
  h.edges = {{0, 3}};
  CHECK_THROWS_AS(h.validate(), invalid_input);
}

TEST_CASE("the four named templates") {
  using E = std::pair<int, int>;
  auto edges = [](HierarchyTemplate t) { return hierarchy_template(t, 4).edges; };
  CHECK(edges(HierarchyTemplate::linear) == std::vector<E>{{0, 1}, {1, 2}, {2, 3}});
  CHECK(edges(HierarchyTemplate::convergent) ==
        std::vector<E>{{0, 1}, {0, 2}, {1, 3}, {2, 3}});
  CHECK(edges(HierarchyTemplate::divergent) == std::vector<E>{{0, 1}, {0, 2}, {2, 3}});
  CHECK(edges(HierarchyTemplate::unstructured) ==
        std::vector<E>{{0, 1}, {0, 2}, {0, 3}});
  CHECK_THROWS_AS(hierarchy_template(HierarchyTemplate::linear, 3), invalid_input);
  CHECK(hierarchy_template_from_string("convergent") == HierarchyTemplate::convergent);
  CHECK(to_string(HierarchyTemplate::divergent) == "divergent");
  CHECK_THROWS_AS(hierarchy_template_from_string("ring"), invalid_input);
}

TEST_CASE("induced profile sets match the worked examples") {
  // Anchors: chain 5 profiles, convergent 6, divergent 7, unstructured 9.
  const auto linear = induced_profiles(hierarchy_template(HierarchyTemplate::linear, 4));
  CHECK(as_strings(linear) ==
        std::set<std::string>{"0000", "1000", "1100", "1110", "1111"});

  const auto convergent =
      induced_profiles(hierarchy_template(HierarchyTemplate::convergent, 4));
  CHECK(as_strings(convergent) ==
        std::set<std::string>{"0000", "1000", "1100", "1010", "1110", "1111"});

  const auto divergent =
      induced_profiles(hierarchy_template(HierarchyTemplate::divergent, 4));
  CHECK(as_strings(divergent) == std::set<std::string>{"0000", "1000", "1100", "1010",
                                                       "1011", "1110", "1111"});

  const auto unstructured =
      induced_profiles(hierarchy_template(HierarchyTemplate::unstructured, 4));
  CHECK(unstructured.size() == 9);
  CHECK(as_strings(unstructured) ==
        std::set<std::string>{"0000", "1000", "1100", "1010", "1001", "1110", "1101",
                              "1011", "1111"});
}

TEST_CASE("induced profiles agree with brute force on random DAGs") {
  for (int variant = 0; variant < 8; ++variant) {
    Hierarchy h;
    h.n_attributes = 5;
    // Layered random-ish DAGs: edge (k, l) only for k < l, picked by bit mix.
    for (int k = 0; k < 5; ++k)
      for (int l = k + 1; l < 5; ++l)
        if (((variant * 31 + k * 7 + l * 3) % 5) < 2) h.edges.push_back({k, l});
    h.validate();
    CHECK(as_strings(induced_profiles(h)) == brute_force_induced(h));
  }
}

TEST_CASE("induced profiles come back in canonical order") {
  const auto set = induced_profiles(hierarchy_template(HierarchyTemplate::divergent, 4));
  for (std::size_t i = 1; i < set.profiles.size(); ++i)
    CHECK(profile_canonical_less(set.profiles[i - 1], set.profiles[i], 4));
  CHECK(set.contains(profile_from_string("1011")));
  CHECK_FALSE(set.contains(profile_from_string("0100")));
}

TEST_CASE("response data validation") {
  ResponseData data;
  data.values = Matrix::Zero(3, 2);
  data.values(0, 0) = 1.0;
  CHECK_NOTHROW(data.validate());
  CHECK(data.mask_all_ones());  // no mask at all counts as fully observed

  data.values(1, 1) = 0.5;
  CHECK_THROWS_AS(data.validate(), invalid_input);
  data.values(1, 1) = 0.0;

  data.mask = Matrix::Ones(3, 2);
  CHECK(data.mask_all_ones());
  (*data.mask)(0, 1) = 0.0;
  CHECK_FALSE(data.mask_all_ones());
  CHECK_NOTHROW(data.validate());

  // A never-observed item is unusable.
  (*data.mask)(1, 1) = 0.0;
  (*data.mask)(2, 1) = 0.0;
  CHECK_THROWS_AS(data.validate(), invalid_input);
}

TEST_CASE("parameter validation and active classes") {
  LcmParams p;
  p.proportions = Vector(3);
  p.proportions << 0.5, 0.3, 0.2;
  p.item_params = Matrix::Constant(2, 3, 0.4);
  CHECK_NOTHROW(p.validate(1e-4));

  CHECK(active_classes(p.proportions, 0.25) == std::vector<int>{0, 1});
  CHECK(active_classes(p.proportions, 1e-4) == std::vector<int>{0, 1, 2});

  p.proportions(0) = 0.6;  // sums to 1.1
  CHECK_THROWS_AS(p.validate(1e-4), invalid_input);
  p.proportions(0) = 0.5;
  p.item_params(0, 0) = 1.0;  // outside the floor box
  CHECK_THROWS_AS(p.validate(1e-4), invalid_input);
}

TEST_SUITE_END();
