#pragma once

#include <string>
#include <vector>

#include "cgm/graph.hpp"

namespace cgm {

enum class MarkovType { I, II, III, IV };

MarkovType markov_type_from_string(const std::string& s);
std::string to_string(MarkovType t);

// A conditional independence statement alpha ci beta | gamma. Canonical form:
// alpha and beta sorted, disjoint, nonempty, with min(alpha) < min(beta);
// gamma disjoint from both (possibly empty). sources lists the block-recursive
// families that produced the statement ("C1", "C2a", "C2b", "C3a", "C3b").
struct CiStatement {
  VertexSet alpha, beta, gamma;
  std::vector<std::string> sources;

  bool same_triple(const CiStatement& o) const {
    return alpha == o.alpha && beta == o.beta && gamma == o.gamma;
  }
  std::string to_string() const;
};

CiStatement make_statement(VertexSet alpha, VertexSet beta, VertexSet gamma,
                           std::string source = {});

// Family lists (canonicalized, exact duplicates merged, otherwise unreduced).
// For statements_c2, reduced=true restricts sigma to connected sets, which
// yields an equivalent list for probability distributions.
std::vector<CiStatement> statements_c1(const ComponentDag& d);
std::vector<CiStatement> statements_c2(const ChainGraph& g, const ComponentDag& d, char variant,
                                       bool reduced = false, int cap = 16);
std::vector<CiStatement> statements_c3(const ChainGraph& g, const ComponentDag& d, char variant,
                                       int cap = 16);

// Full statement list for a Markov type: (C1) plus the type's (C2x)/(C3x)
// families. Type IV uses the connected-sigma reduction of (C2b). With
// reduce=true (default) each family is additionally pruned by the CI
// decomposition axiom: a statement is dropped when another statement of the
// same family and conditioning set contains it ((a,b,g) is implied by
// (a',b',g) when a is a subset of a' and b of b', or a of b' and b of a').
std::vector<CiStatement> statements(const ChainGraph& g, MarkovType type, bool reduce = true,
                                    int cap = 16);

}  // namespace cgm
