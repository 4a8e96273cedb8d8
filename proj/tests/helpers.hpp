#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cgm/graph.hpp"
#include "cgm/rng.hpp"
#include "cgm/table.hpp"

namespace cgm::test {

inline std::string fixture(const std::string& name) {
  return std::string(CGM_FIXTURES_DIR) + "/" + name;
}

inline ChainGraph load_fixture(const std::string& name) {
  return ChainGraph::load(fixture(name));
}

// Small graphs with mixed level counts used across the suites.
inline ChainGraph anchored_path(int d1 = 2, int d2 = 2, int d3 = 2, int d4 = 2) {
  return ChainGraph::parse("states 1=" + std::to_string(d1) + " 2=" + std::to_string(d2) +
                           " 3=" + std::to_string(d3) + " 4=" + std::to_string(d4) +
                           "\n1 -> 3\n2 -- 3\n3 -- 4\n");
}

inline ChainGraph anchored_triangle() {
  return ChainGraph::parse("1 -> 3\n2 -- 3\n3 -- 4\n2 -- 4\n");
}

// The two hand-picked 4-binary-variable tables (cell weights out of 32,
// canonical order with the last variable fastest) that separate the two
// branches of the type III membership characterization.
inline constexpr std::array<std::int64_t, 16> kWitnessMarginal = {
    1, 3, 3, 1, 3, 1, 1, 3, 1, 3, 3, 1, 3, 1, 1, 3};
inline constexpr std::array<std::int64_t, 16> kWitnessConditional = {
    2, 2, 2, 2, 2, 2, 1, 1, 3, 3, 2, 2, 3, 3, 1, 1};

inline JointTable witness_table(const std::array<std::int64_t, 16>& cells) {
  std::vector<double> probs(16);
  for (std::size_t i = 0; i < 16; ++i) probs[i] = static_cast<double>(cells[i]) / 32.0;
  return JointTable({1, 2, 3, 4}, {2, 2, 2, 2}, probs);
}

}  // namespace cgm::test
