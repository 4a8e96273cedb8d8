#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cgm {

// Mixed-radix cell indexing shared by tables and tensors. States are 1-based
// (a cell over dims (d1,...,dk) is a vector with 1 <= s[i] <= dims[i]); the
// LAST position varies fastest, matching how joint tables are displayed and
// how CSV rows are ordered.
inline std::size_t cell_count(std::span<const int> dims) {
  std::size_t n = 1;
  for (int d : dims) n *= static_cast<std::size_t>(d);
  return n;
}

inline std::size_t cell_index(std::span<const int> state, std::span<const int> dims) {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < dims.size(); ++i)
    idx = idx * static_cast<std::size_t>(dims[i]) + static_cast<std::size_t>(state[i] - 1);
  return idx;
}

inline std::vector<int> cell_state(std::size_t idx, std::span<const int> dims) {
  std::vector<int> s(dims.size());
  for (std::size_t i = dims.size(); i-- > 0;) {
    s[i] = static_cast<int>(idx % static_cast<std::size_t>(dims[i])) + 1;
    idx /= static_cast<std::size_t>(dims[i]);
  }
  return s;
}

// Odometer step; returns false after the last cell. Start from all-ones.
inline bool next_cell(std::vector<int>& state, std::span<const int> dims) {
  for (std::size_t i = dims.size(); i-- > 0;) {
    if (state[i] < dims[i]) {
      ++state[i];
      return true;
    }
    state[i] = 1;
  }
  return false;
}

}  // namespace cgm
