#include "cgm/probes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "cgm/error.hpp"
#include "cgm/graph.hpp"
#include "cgm/indexing.hpp"

namespace cgm {

namespace {

[[noreturn]] void fail(const std::string& code, const std::string& msg) {
  throw DomainError("probes", code, msg);
}

const VertexSet& four_vars() {
  static const VertexSet v = make_set({1, 2, 3, 4});
  return v;
}

void require_four(const JointTable& p, bool binary) {
  if (p.vars() != four_vars()) fail("bad_table", "table must be over vertices {1,2,3,4}");
  if (binary)
    for (int d : p.levels())
      if (d != 2) fail("bad_table", "table must be binary");
}

double cell4(const JointTable& p, int i, int j, int k, int l) {
  std::vector<int> s = {i, j, k, l};
  return p.probs()[cell_index(s, p.levels())];
}

int numeric_rank(const Eigen::MatrixXd& m, double rel_tol) {
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > rel_tol * sv(0)) ++r;
  return r;
}

}  // namespace

std::vector<QMatrix> build_q_matrices(const JointTable& p, double ci_tol) {
  require_four(p, false);
  CiStatement pre = make_statement(make_set({1}), make_set({2, 4}), {}, "model precondition");
  double r = ci_residual(p, pre);
  if (r > ci_tol)
    fail("not_in_model", "1 _||_ {2,4} fails with residual " + std::to_string(r) +
                             "; the table is not in the completed model");

  const std::vector<int>& d = p.levels();
  int d1 = d[0], d2 = d[1], d3 = d[2], d4 = d[3];
  JointTable m2 = marginal(p, make_set({2}));
  JointTable m4 = marginal(p, make_set({4}));
  JointTable m24 = marginal(p, make_set({2, 4}));

  auto at2 = [](const JointTable& t, int a, int b) {
    std::vector<int> s = {a, b};
    return t.probs()[cell_index(s, t.levels())];
  };

  std::vector<QMatrix> out;
  out.reserve(static_cast<std::size_t>(d1 * d3));
  std::vector<int> given(1);
  for (int i1 = 1; i1 <= d1; ++i1) {
    given[0] = i1;
    JointTable c234 = conditional(p, make_set({2, 3, 4}), make_set({1}), given);
    JointTable c23 = conditional(p, make_set({2, 3}), make_set({1}), given);
    JointTable c34 = conditional(p, make_set({3, 4}), make_set({1}), given);
    JointTable c3 = conditional(p, make_set({3}), make_set({1}), given);
    auto q234 = [&](int i2, int i3, int i4) {
      std::vector<int> s = {i2, i3, i4};
      return c234.probs()[cell_index(s, c234.levels())];
    };
    for (int i3 = 1; i3 <= d3; ++i3) {
      QMatrix qm;
      qm.i1 = i1;
      qm.i3 = i3;
      qm.entries.resize(d2, d4);
      for (int i2 = 1; i2 <= d2; ++i2)
        for (int i4 = 1; i4 <= d4; ++i4) {
          double v;
          if (i3 < d3) {
            if (i2 < d2 && i4 < d4)
              v = q234(i2, i3, i4);
            else if (i2 < d2)
              v = at2(c23, i2, i3);
            else if (i4 < d4)
              v = at2(c34, i3, i4);
            else
              v = c3.probs()[static_cast<std::size_t>(i3 - 1)];
          } else {
            // Top level of X3: complementary entries; "+" sums the non-top
            // states of X3 out of the corresponding parameter.
            if (i2 < d2 && i4 < d4) {
              double s = 0.0;
              for (int k = 1; k < d3; ++k) s += q234(i2, k, i4);
              v = at2(m24, i2, i4) - s;
            } else if (i2 < d2) {
              double s = 0.0;
              for (int k = 1; k < d3; ++k) s += at2(c23, i2, k);
              v = m2.probs()[static_cast<std::size_t>(i2 - 1)] - s;
            } else if (i4 < d4) {
              double s = 0.0;
              for (int k = 1; k < d3; ++k) s += at2(c34, k, i4);
              v = m4.probs()[static_cast<std::size_t>(i4 - 1)] - s;
            } else {
              double s = 0.0;
              for (int k = 1; k < d3; ++k) s += c3.probs()[static_cast<std::size_t>(k - 1)];
              v = 1.0 - s;
            }
          }
          qm.entries(i2 - 1, i4 - 1) = v;
        }
      out.push_back(std::move(qm));
    }
  }
  return out;
}

bool prop14_member(const JointTable& p, double ci_tol, double rank_tol) {
  for (const QMatrix& qm : build_q_matrices(p, ci_tol))
    if (numeric_rank(qm.entries, rank_tol) > 1) return false;
  return true;
}

const std::array<const char*, 11> kBinaryCoordLabels = {
    "q_2",    "q_4",    "q_24",   "q_3|1",  "q_23|1", "q_34|1",
    "q_234|1", "q_3|2",  "q_23|2", "q_34|2", "q_234|2"};

std::vector<double> binary_coords(const JointTable& p) {
  require_four(p, true);
  std::vector<double> c(11);
  c[0] = marginal(p, make_set({2})).probs()[0];
  c[1] = marginal(p, make_set({4})).probs()[0];
  c[2] = marginal(p, make_set({2, 4})).probs()[0];
  std::vector<int> given(1);
  for (int i = 1; i <= 2; ++i) {
    given[0] = i;
    std::size_t base = 3 + static_cast<std::size_t>(i - 1) * 4;
    c[base + 0] = conditional(p, make_set({3}), make_set({1}), given).probs()[0];
    c[base + 1] = conditional(p, make_set({2, 3}), make_set({1}), given).probs()[0];
    c[base + 2] = conditional(p, make_set({3, 4}), make_set({1}), given).probs()[0];
    c[base + 3] = conditional(p, make_set({2, 3, 4}), make_set({1}), given).probs()[0];
  }
  return c;
}

std::vector<double> binary_equations_5_6_7(std::span<const double> coords) {
  if (coords.size() != 11) fail("bad_dimension", "expected 11 coordinates");
  double q2 = coords[0], q4 = coords[1], q24 = coords[2];
  std::vector<double> r(4);
  for (int i = 0; i < 2; ++i) {
    double q3 = coords[3 + 4 * i], q23 = coords[4 + 4 * i];
    double q34 = coords[5 + 4 * i], q234 = coords[6 + 4 * i];
    r[static_cast<std::size_t>(i)] = q23 * q34 - q3 * q234;
    r[static_cast<std::size_t>(2 + i)] = q3 * q24 - q23 * q4 - q34 * q2 + q234 - (q24 - q2 * q4);
  }
  return r;
}

std::vector<double> singular_locus_residuals(std::span<const double> coords) {
  if (coords.size() != 11) fail("bad_dimension", "expected 11 coordinates");
  double q2 = coords[0], q4 = coords[1], q24 = coords[2];
  std::vector<double> r;
  r.reserve(7);
  r.push_back(q2 * q4 - q24);
  for (int i = 0; i < 2; ++i) {
    double q3 = coords[3 + 4 * i], q23 = coords[4 + 4 * i];
    double q34 = coords[5 + 4 * i], q234 = coords[6 + 4 * i];
    r.push_back(q3 * q2 - q23);
    r.push_back(q3 * q4 - q34);
    r.push_back(q2 * q3 * q4 - q234);
  }
  return r;
}

bool singular_locus_5_8(std::span<const double> coords, double tol) {
  for (double r : singular_locus_residuals(coords))
    if (std::abs(r) > tol) return false;
  return true;
}

ConstraintSystem system_5_6_7() {
  ConstraintSystem sys;
  sys.dim = 11;
  sys.labels.assign(kBinaryCoordLabels.begin(), kBinaryCoordLabels.end());
  sys.residuals = [](std::span<const double> x) { return binary_equations_5_6_7(x); };
  return sys;
}

ConstraintSystem invariance_system(const ChainGraph& g, int comp) {
  ComponentDag dag = chain_components(g);
  if (comp < 0 || comp >= static_cast<int>(dag.components().size()))
    fail("bad_component", "component index out of range");
  const VertexSet& tau = dag.components()[static_cast<std::size_t>(comp)];
  VertexSet pa = dag.parents(comp);
  std::vector<int> tau_levels = g.levels_of(tau);
  std::vector<int> pa_levels = g.levels_of(pa);
  std::size_t ncells = cell_count(tau_levels);
  std::size_t nstates = cell_count(pa_levels);

  ConstraintSystem sys;
  sys.dim = ncells * nstates;
  for (std::size_t s = 0; s < nstates; ++s)
    for (std::size_t c = 0; c < ncells; ++c)
      sys.labels.push_back("pa" + std::to_string(s) + "_cell" + std::to_string(c));

  // Pairs (a, b): coordinate a must equal coordinate b.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<int> digits, sub;
  for (std::size_t c = 0; c < ncells; ++c) {
    digits = cell_state(c, tau_levels);
    VertexSet sigma;
    for (std::size_t k = 0; k < tau.size(); ++k)
      if (digits[k] < tau_levels[k]) sigma.push_back(tau[k]);
    if (sigma.empty()) continue;
    VertexSet pg = g.parent_set(sigma);
    if (pg == pa) continue;
    std::vector<std::size_t> pg_pos;
    for (Vertex v : pg)
      pg_pos.push_back(
          static_cast<std::size_t>(std::lower_bound(pa.begin(), pa.end(), v) - pa.begin()));
    std::vector<int> pg_levels = g.levels_of(pg);
    std::vector<std::size_t> rep(cell_count(pg_levels), SIZE_MAX);
    for (std::size_t s = 0; s < nstates; ++s) {
      std::vector<int> full = cell_state(s, pa_levels);
      sub.assign(pg_pos.size(), 0);
      for (std::size_t k = 0; k < pg_pos.size(); ++k) sub[k] = full[pg_pos[k]];
      std::size_t key = cell_index(sub, pg_levels);
      if (rep[key] == SIZE_MAX)
        rep[key] = s;
      else
        pairs.emplace_back(s * ncells + c, rep[key] * ncells + c);
    }
  }

  std::size_t dim = sys.dim;
  sys.residuals = [pairs, dim](std::span<const double> x) {
    if (x.size() != dim) fail("bad_dimension", "point has wrong dimension");
    std::vector<double> r;
    r.reserve(pairs.size());
    for (auto [a, b] : pairs) r.push_back(x[a] - x[b]);
    return r;
  };
  return sys;
}

SmoothnessReport smoothness_probe(const ConstraintSystem& sys, std::span<const double> point,
                                  double step, double rank_tol) {
  if (point.size() != sys.dim) fail("bad_dimension", "point has wrong dimension");
  std::vector<double> r0 = sys.residuals(point);
  double worst = 0.0;
  for (double r : r0) worst = std::max(worst, std::abs(r));
  if (worst > 1e-8)
    fail("off_variety",
         "largest residual at the point is " + std::to_string(worst) + ", above 1e-8");

  SmoothnessReport rep;
  rep.jacobian.resize(static_cast<Eigen::Index>(r0.size()), static_cast<Eigen::Index>(sys.dim));
  std::vector<double> x(point.begin(), point.end());
  for (std::size_t k = 0; k < sys.dim; ++k) {
    double keep = x[k];
    x[k] = keep + step;
    std::vector<double> hi = sys.residuals(x);
    x[k] = keep - step;
    std::vector<double> lo = sys.residuals(x);
    x[k] = keep;
    for (std::size_t i = 0; i < r0.size(); ++i)
      rep.jacobian(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          (hi[i] - lo[i]) / (2.0 * step);
  }
  if (r0.empty()) return rep;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(rep.jacobian);
  const auto& sv = svd.singularValues();
  for (Eigen::Index i = 0; i < sv.size(); ++i) rep.singular_values.push_back(sv(i));
  if (!rep.singular_values.empty() && rep.singular_values[0] > 0.0)
    for (double s : rep.singular_values)
      if (s > rank_tol * rep.singular_values[0]) ++rep.rank;
  return rep;
}

Prop17Report prop17_classify(const JointTable& p, double tol) {
  require_four(p, true);
  Prop17Report rep;
  rep.r_1_rest = ci_residual(p, make_statement(make_set({1}), make_set({2, 3, 4}), {}, ""));
  rep.r_2_14 = ci_residual(p, make_statement(make_set({2}), make_set({1, 4}), {}, ""));
  rep.r_24_g1 = ci_residual(p, make_statement(make_set({2}), make_set({4}), make_set({1}), ""));
  rep.r_1_24_g3 =
      ci_residual(p, make_statement(make_set({1}), make_set({2, 4}), make_set({3}), ""));

  auto pc = [&](int i, int j, int k, int l) { return cell4(p, i, j, k, l); };
  rep.r_minors_a = (pc(1, 1, 2, 1) * pc(2, 2, 2, 2) - pc(1, 1, 2, 2) * pc(2, 2, 2, 1)) -
                   (pc(1, 1, 1, 1) * pc(2, 2, 1, 2) - pc(1, 1, 1, 2) * pc(2, 2, 1, 1));
  rep.r_minors_b = (pc(1, 2, 2, 1) * pc(2, 1, 2, 2) - pc(1, 2, 2, 2) * pc(2, 1, 2, 1)) -
                   (pc(1, 2, 1, 1) * pc(2, 1, 1, 2) - pc(1, 2, 1, 2) * pc(2, 1, 1, 1));

  rep.cond_i = rep.r_1_rest <= tol && rep.r_2_14 <= tol;
  rep.cond_ii = rep.r_24_g1 <= tol && rep.r_1_24_g3 <= tol && std::abs(rep.r_minors_a) <= tol &&
                std::abs(rep.r_minors_b) <= tol;
  return rep;
}

namespace {

// Exact conditional independence on integer cells over [2]^4: every 2x2
// minor of every gamma-slice (rows alpha-states, columns beta-states, the
// rest summed out) vanishes.
bool exact_ci(const std::array<std::int64_t, 16>& cells, const VertexSet& alpha,
              const VertexSet& beta, const VertexSet& gamma) {
  const std::vector<int> levels = {2, 2, 2, 2};
  VertexSet abg = set_union(set_union(alpha, beta), gamma);
  std::vector<int> la(alpha.size(), 2), lb(beta.size(), 2), lg(gamma.size(), 2);
  std::size_t na = cell_count(la), nb = cell_count(lb), ng = cell_count(lg);
  std::vector<std::int64_t> m(na * nb * ng, 0);

  std::vector<int> state = {1, 1, 1, 1};
  std::vector<int> sub;
  std::size_t idx = 0;
  auto restrict_index = [&](const VertexSet& set, const std::vector<int>& dims) {
    sub.clear();
    for (Vertex v : set) sub.push_back(state[static_cast<std::size_t>(v - 1)]);
    return cell_index(sub, dims);
  };
  do {
    std::size_t ia = restrict_index(alpha, la);
    std::size_t ib = restrict_index(beta, lb);
    std::size_t ig = restrict_index(gamma, lg);
    m[(ig * na + ia) * nb + ib] += cells[idx];
    ++idx;
  } while (next_cell(state, levels));

  for (std::size_t ig = 0; ig < ng; ++ig)
    for (std::size_t a1 = 0; a1 < na; ++a1)
      for (std::size_t a2 = a1 + 1; a2 < na; ++a2)
        for (std::size_t b1 = 0; b1 < nb; ++b1)
          for (std::size_t b2 = b1 + 1; b2 < nb; ++b2) {
            std::int64_t det = m[(ig * na + a1) * nb + b1] * m[(ig * na + a2) * nb + b2] -
                               m[(ig * na + a1) * nb + b2] * m[(ig * na + a2) * nb + b1];
            if (det != 0) return false;
          }
  return true;
}

}  // namespace

Prop17Exact prop17_exact(const std::array<std::int64_t, 16>& cells) {
  for (std::int64_t c : cells)
    if (c < 0) fail("bad_table", "cells must be nonnegative");
  Prop17Exact rep;
  rep.ci_1_rest = exact_ci(cells, make_set({1}), make_set({2, 3, 4}), {});
  rep.ci_2_14 = exact_ci(cells, make_set({2}), make_set({1, 4}), {});
  rep.ci_24_g1 = exact_ci(cells, make_set({2}), make_set({4}), make_set({1}));
  rep.ci_1_24_g3 = exact_ci(cells, make_set({1}), make_set({2, 4}), make_set({3}));

  static const std::vector<int> lv = {2, 2, 2, 2};
  auto nc = [&](int i, int j, int k, int l) {
    std::vector<int> s = {i, j, k, l};
    return cells[cell_index(s, lv)];
  };
  rep.minors_a = (nc(1, 1, 2, 1) * nc(2, 2, 2, 2) - nc(1, 1, 2, 2) * nc(2, 2, 2, 1)) -
                 (nc(1, 1, 1, 1) * nc(2, 2, 1, 2) - nc(1, 1, 1, 2) * nc(2, 2, 1, 1));
  rep.minors_b = (nc(1, 2, 2, 1) * nc(2, 1, 2, 2) - nc(1, 2, 2, 2) * nc(2, 1, 2, 1)) -
                 (nc(1, 2, 1, 1) * nc(2, 1, 1, 2) - nc(1, 2, 1, 2) * nc(2, 1, 1, 1));

  rep.cond_i = rep.ci_1_rest && rep.ci_2_14;
  rep.cond_ii = rep.ci_24_g1 && rep.ci_1_24_g3 && rep.minors_a == 0 && rep.minors_b == 0;
  return rep;
}

TypeIiiVerdict membership_type_iii_binary(const JointTable& p, double tol) {
  TypeIiiVerdict v;
  v.report = prop17_classify(p, tol);
  v.classified = v.report.member();
  CiStatement a = make_statement(make_set({2}), make_set({4}), make_set({1}), "");
  CiStatement b = make_statement(make_set({1}), make_set({2, 4}), make_set({3}), "");
  v.direct = ci_holds_rank(p, a) && ci_holds_rank(p, b);
  return v;
}

JointTable project_ci(const JointTable& p, const CiStatement& s) {
  VertexSet ag = set_union(s.alpha, s.gamma);
  VertexSet bg = set_union(s.beta, s.gamma);
  VertexSet abg = set_union(ag, s.beta);
  JointTable m_ag = marginal(p, ag);
  JointTable m_bg = marginal(p, bg);
  JointTable m_abg = marginal(p, abg);
  bool has_g = !s.gamma.empty();
  JointTable m_g = marginal(p, has_g ? s.gamma : VertexSet{});

  auto positions = [&](const VertexSet& sub) {
    std::vector<std::size_t> pos;
    for (Vertex v : sub) pos.push_back(static_cast<std::size_t>(p.position_of(v)));
    return pos;
  };
  std::vector<std::size_t> ag_pos = positions(ag), bg_pos = positions(bg), abg_pos = positions(abg),
                           g_pos = positions(s.gamma);

  auto restricted = [](const std::vector<int>& state, const std::vector<std::size_t>& pos,
                       const std::vector<int>& dims) {
    std::vector<int> sub(pos.size());
    for (std::size_t k = 0; k < pos.size(); ++k) sub[k] = state[pos[k]];
    return cell_index(sub, dims);
  };

  std::vector<double> out(p.size());
  std::vector<int> state(p.vars().size(), 1);
  std::size_t idx = 0;
  double sum = 0.0;
  do {
    double denom = m_abg.probs()[restricted(state, abg_pos, m_abg.levels())];
    double v = 0.0;
    if (denom > 0.0 && p.probs()[idx] > 0.0) {
      double num = m_ag.probs()[restricted(state, ag_pos, m_ag.levels())] *
                   m_bg.probs()[restricted(state, bg_pos, m_bg.levels())];
      double dg = has_g ? m_g.probs()[restricted(state, g_pos, m_g.levels())] : 1.0;
      if (dg > 0.0) v = p.probs()[idx] * num / (denom * dg);
    }
    out[idx] = v;
    sum += v;
    ++idx;
  } while (next_cell(state, p.levels()));

  if (!(sum > 0.0)) fail("projection_failed", "projection produced an empty table");
  for (double& v : out) v /= sum;
  return JointTable(p.vars(), p.levels(), std::move(out));
}

JointTable sample_ci_member(const VertexSet& vars, const std::vector<int>& levels,
                            const std::vector<CiStatement>& statements, std::uint64_t seed,
                            double tol, int max_sweeps) {
  Rng rng(seed);
  JointTable p = random_table(vars, levels, rng);
  double worst = 0.0;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    for (const CiStatement& s : statements) p = project_ci(p, s);
    worst = 0.0;
    for (const CiStatement& s : statements) worst = std::max(worst, ci_residual(p, s));
    if (worst < tol) return p;
  }
  fail("projection_failed", "residual " + std::to_string(worst) + " after " +
                                std::to_string(max_sweeps) + " sweeps");
}

}  // namespace cgm
