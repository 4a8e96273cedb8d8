#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cgm/markov.hpp"
#include "cgm/rng.hpp"

namespace cgm {

inline constexpr double kCiTol = 1e-9;
inline constexpr std::size_t kMaxCells = std::size_t{1} << 24;

// Joint probability table over a sorted variable list. Cells are stored with
// the last variable fastest; states are 1-based. Entries are nonnegative and
// sum to 1 within 1e-12. Immutable after construction.
class JointTable {
 public:
  JointTable(VertexSet vars, std::vector<int> levels, std::vector<double> probs);

  static JointTable uniform(VertexSet vars, std::vector<int> levels);

  const VertexSet& vars() const { return vars_; }
  const std::vector<int>& levels() const { return levels_; }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t size() const { return probs_.size(); }

  double at(std::span<const int> state) const;
  double min_prob() const;
  bool positive() const { return min_prob() > 0.0; }

  int position_of(Vertex v) const;  // index into vars()

 private:
  VertexSet vars_;
  std::vector<int> levels_;
  std::vector<double> probs_;
};

// Observed cell counts with the same layout conventions.
class CountTable {
 public:
  CountTable(VertexSet vars, std::vector<int> levels, std::vector<std::int64_t> counts);

  const VertexSet& vars() const { return vars_; }
  const std::vector<int>& levels() const { return levels_; }
  const std::vector<std::int64_t>& counts() const { return counts_; }
  std::int64_t total() const { return total_; }

  JointTable to_prob() const;  // error when total == 0

 private:
  VertexSet vars_;
  std::vector<int> levels_;
  std::vector<std::int64_t> counts_;
  std::int64_t total_;
};

JointTable marginal(const JointTable& p, const VertexSet& alpha);

// Distribution of target given (given = given_state); target and given must
// be disjoint. Errors when the conditioning event has probability <= 0.
JointTable conditional(const JointTable& p, const VertexSet& target, const VertexSet& given,
                       std::span<const int> given_state);

// Largest absolute bilinear residual p(a,b,g) p(g) - p(a,g) p(b,g) over all
// states, after marginalizing to alpha+beta+gamma.
double ci_residual(const JointTable& p, const CiStatement& s);
bool ci_holds(const JointTable& p, const CiStatement& s, double tol = kCiTol);
// Cross-check: numeric rank of every gamma-slice matrix is <= 1 (singular
// values below rel_tol * sigma_max are treated as zero).
bool ci_holds_rank(const JointTable& p, const CiStatement& s, double rel_tol = 1e-8);

struct MarkovReport {
  struct Entry {
    CiStatement statement;
    double residual;
    bool pass;
  };
  std::vector<Entry> entries;
  bool all_pass = true;
  double max_residual = 0.0;
};
MarkovReport obeys_markov(const JointTable& p, const ChainGraph& g, MarkovType type,
                          double tol = kCiTol);

// Multinomial sample of size n, deterministic for a given seed.
CountTable simulate_counts(const JointTable& p, std::int64_t n, std::uint64_t seed);

// Positive table with cells drawn uniformly from (0,1] and normalized.
JointTable random_table(VertexSet vars, std::vector<int> levels, Rng& rng);

// CSV: header is the vertex labels plus "prob" (or "count"); one row per
// nonzero cell; omitted cells are zero. Rows may come in any order; duplicate
// cells are an error. Without a graph, levels are inferred from the data
// (minimum 2); with one, columns must match its vertices and levels.
JointTable load_prob_csv(const std::string& path);
JointTable load_prob_csv(const std::string& path, const ChainGraph& g);
CountTable load_counts_csv(const std::string& path);
CountTable load_counts_csv(const std::string& path, const ChainGraph& g);
// Accepts either column and normalizes counts to probabilities.
JointTable load_table_csv(const std::string& path);
JointTable load_table_csv(const std::string& path, const ChainGraph& g);
std::string to_prob_csv(const JointTable& p);
std::string to_counts_csv(const CountTable& c);

}  // namespace cgm
