#include "cgm/markov.hpp"

#include <algorithm>

#include "cgm/error.hpp"

namespace cgm {

namespace {

[[noreturn]] void fail(const std::string& code, const std::string& msg) {
  throw DomainError("markov", code, msg);
}

// All nonempty subsets of tau, ordered by size then lexicographically.
std::vector<VertexSet> all_subsets(const VertexSet& tau, int cap) {
  if (static_cast<int>(tau.size()) > cap)
    fail("cap_exceeded", "subset enumeration over " + std::to_string(tau.size()) +
                             " vertices exceeds the cap of " + std::to_string(cap));
  std::vector<VertexSet> out;
  std::size_t n = tau.size();
  for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
    VertexSet sigma;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (std::size_t{1} << i)) sigma.push_back(tau[i]);
    out.push_back(std::move(sigma));
  }
  std::sort(out.begin(), out.end(), [](const VertexSet& a, const VertexSet& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });
  return out;
}

void append_merged(std::vector<CiStatement>& list, CiStatement s) {
  for (auto& t : list)
    if (t.same_triple(s)) {
      for (auto& src : s.sources)
        if (std::find(t.sources.begin(), t.sources.end(), src) == t.sources.end())
          t.sources.push_back(src);
      return;
    }
  list.push_back(std::move(s));
}

// Decomposition-axiom pruning within one family list: drop a statement whose
// alpha/beta both fit inside another statement with the same conditioning set.
std::vector<CiStatement> prune_subsumed(const std::vector<CiStatement>& list) {
  std::vector<CiStatement> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& s = list[i];
    bool dominated = false;
    for (std::size_t k = 0; k < list.size() && !dominated; ++k) {
      if (k == i) continue;
      const auto& t = list[k];
      if (t.gamma != s.gamma || t.same_triple(s)) continue;
      dominated = (is_subset(s.alpha, t.alpha) && is_subset(s.beta, t.beta)) ||
                  (is_subset(s.alpha, t.beta) && is_subset(s.beta, t.alpha));
    }
    if (!dominated) out.push_back(s);
  }
  return out;
}

}  // namespace

MarkovType markov_type_from_string(const std::string& s) {
  if (s == "I" || s == "i") return MarkovType::I;
  if (s == "II" || s == "ii") return MarkovType::II;
  if (s == "III" || s == "iii") return MarkovType::III;
  if (s == "IV" || s == "iv") return MarkovType::IV;
  fail("bad_type", "unknown Markov type '" + s + "' (expected I, II, III or IV)");
}

std::string to_string(MarkovType t) {
  switch (t) {
    case MarkovType::I: return "I";
    case MarkovType::II: return "II";
    case MarkovType::III: return "III";
    case MarkovType::IV: return "IV";
  }
  return "?";
}

std::string CiStatement::to_string() const {
  return set_to_string(alpha) + " ci " + set_to_string(beta) + " | " + set_to_string(gamma);
}

CiStatement make_statement(VertexSet alpha, VertexSet beta, VertexSet gamma, std::string source) {
  alpha = make_set(std::move(alpha));
  beta = make_set(std::move(beta));
  gamma = make_set(std::move(gamma));
  if (alpha.empty() || beta.empty()) fail("bad_statement", "alpha and beta must be nonempty");
  if (!disjoint(alpha, beta) || !disjoint(alpha, gamma) || !disjoint(beta, gamma))
    fail("bad_statement", "alpha, beta, gamma must be pairwise disjoint");
  if (alpha.front() > beta.front()) std::swap(alpha, beta);
  CiStatement s{std::move(alpha), std::move(beta), std::move(gamma), {}};
  if (!source.empty()) s.sources.push_back(std::move(source));
  return s;
}

std::vector<CiStatement> statements_c1(const ComponentDag& d) {
  std::vector<CiStatement> out;
  for (std::size_t t = 0; t < d.components().size(); ++t) {
    const VertexSet& tau = d.components()[t];
    VertexSet pa = d.parents(static_cast<int>(t));
    VertexSet rest = set_minus(d.non_descendants(static_cast<int>(t)), pa);
    if (rest.empty()) continue;
    append_merged(out, make_statement(tau, rest, pa, "C1"));
  }
  return out;
}

std::vector<CiStatement> statements_c2(const ChainGraph& g, const ComponentDag& d, char variant,
                                       bool reduced, int cap) {
  if (variant != 'a' && variant != 'b') fail("bad_variant", "variant must be 'a' or 'b'");
  std::vector<CiStatement> out;
  for (std::size_t t = 0; t < d.components().size(); ++t) {
    const VertexSet& tau = d.components()[t];
    VertexSet pa_d = d.parents(static_cast<int>(t));
    auto sigmas = reduced ? connected_sets(g, tau, cap) : all_subsets(tau, cap);
    for (const auto& sigma : sigmas) {
      VertexSet beta = set_minus(tau, g.closed_neighbor_set(sigma));
      if (beta.empty()) continue;
      VertexSet gamma = variant == 'a' ? set_union(pa_d, g.neighbor_set(sigma)) : pa_d;
      append_merged(out, make_statement(sigma, beta, gamma,
                                        variant == 'a' ? "C2a" : "C2b"));
    }
  }
  return out;
}

std::vector<CiStatement> statements_c3(const ChainGraph& g, const ComponentDag& d, char variant,
                                       int cap) {
  if (variant != 'a' && variant != 'b') fail("bad_variant", "variant must be 'a' or 'b'");
  std::vector<CiStatement> out;
  for (std::size_t t = 0; t < d.components().size(); ++t) {
    const VertexSet& tau = d.components()[t];
    VertexSet pa_d = d.parents(static_cast<int>(t));
    if (pa_d.empty()) continue;
    for (const auto& sigma : all_subsets(tau, cap)) {
      VertexSet pa_s = g.parent_set(sigma);
      VertexSet beta = set_minus(pa_d, pa_s);
      if (beta.empty()) continue;
      VertexSet gamma = variant == 'a' ? set_union(pa_s, g.neighbor_set(sigma)) : pa_s;
      append_merged(out, make_statement(sigma, beta, gamma,
                                        variant == 'a' ? "C3a" : "C3b"));
    }
  }
  return out;
}

std::vector<CiStatement> statements(const ChainGraph& g, MarkovType type, bool reduce, int cap) {
  ComponentDag d = chain_components(g);
  char c2 = (type == MarkovType::I || type == MarkovType::II) ? 'a' : 'b';
  char c3 = (type == MarkovType::I || type == MarkovType::III) ? 'a' : 'b';
  bool lemma4 = type == MarkovType::IV && c2 == 'b';

  auto f1 = statements_c1(d);
  auto f2 = statements_c2(g, d, c2, lemma4, cap);
  auto f3 = statements_c3(g, d, c3, cap);
  if (reduce) {
    f1 = prune_subsumed(f1);
    f2 = prune_subsumed(f2);
    f3 = prune_subsumed(f3);
  }
  std::vector<CiStatement> out;
  for (auto* family : {&f1, &f2, &f3})
    for (auto& s : *family) append_merged(out, std::move(s));
  return out;
}

}  // namespace cgm
