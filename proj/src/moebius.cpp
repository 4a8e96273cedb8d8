#include "cgm/moebius.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "cgm/error.hpp"
#include "cgm/indexing.hpp"
#include "cgm/rng.hpp"

namespace cgm {

namespace {

[[noreturn]] void fail(const std::string& code, const std::string& msg) {
  throw DomainError("moebius", code, msg);
}

// Iterate the fibers of one tensor axis: fn(base, stride) enumerates each
// 1-d slice {base + t*stride : 0 <= t < dims[axis]}.
template <typename Fn>
void for_each_fiber(std::span<const int> dims, int axis, Fn&& fn) {
  std::size_t stride = 1;
  for (std::size_t i = axis + 1; i < dims.size(); ++i) stride *= static_cast<std::size_t>(dims[i]);
  std::size_t outer = 1;
  for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(dims[i]);
  std::size_t block = stride * static_cast<std::size_t>(dims[axis]);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t s = 0; s < stride; ++s) fn(o * block + s, stride);
}

std::string state_to_string(std::span<const int> state) {
  std::string s = "(";
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(state[i]);
  }
  return s + ")";
}

}  // namespace

namespace detail {

// Per-axis forward map: the top digit becomes the sum over the whole fiber
// (summing the vertex out); the rest stay cell probabilities.
void forward_axis(std::vector<double>& t, std::span<const int> dims, int axis) {
  int d = dims[axis];
  for_each_fiber(dims, axis, [&](std::size_t base, std::size_t stride) {
    double sum = 0.0;
    for (int k = 0; k < d; ++k) sum += t[base + static_cast<std::size_t>(k) * stride];
    t[base + static_cast<std::size_t>(d - 1) * stride] = sum;
  });
}

// Inverse of forward_axis: top digit = total minus the lower digits.
void inverse_axis(std::vector<double>& t, std::span<const int> dims, int axis) {
  int d = dims[axis];
  for_each_fiber(dims, axis, [&](std::size_t base, std::size_t stride) {
    double rest = 0.0;
    for (int k = 0; k + 1 < d; ++k) rest += t[base + static_cast<std::size_t>(k) * stride];
    t[base + static_cast<std::size_t>(d - 1) * stride] -= rest;
  });
}

// Transpose of inverse_axis, used to pull cell-probability gradients back
// onto the transformed scale: the top entry feeds negatively into the rest.
void inverse_axis_adjoint(std::vector<double>& t, std::span<const int> dims, int axis) {
  int d = dims[axis];
  for_each_fiber(dims, axis, [&](std::size_t base, std::size_t stride) {
    double top = t[base + static_cast<std::size_t>(d - 1) * stride];
    for (int k = 0; k + 1 < d; ++k) t[base + static_cast<std::size_t>(k) * stride] -= top;
  });
}

}  // namespace detail

using detail::forward_axis;
using detail::inverse_axis;

double SaturatedMoebius::entry(const VertexSet& sigma, std::span<const int> j) const {
  if (j.size() != sigma.size()) fail("bad_state", "j has wrong arity for sigma");
  std::vector<int> digits(tau.size());
  for (std::size_t i = 0; i < tau.size(); ++i) digits[i] = levels[i];
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    auto it = std::lower_bound(tau.begin(), tau.end(), sigma[k]);
    if (it == tau.end() || *it != sigma[k])
      fail("bad_state", "vertex " + std::to_string(sigma[k]) + " is not in the component");
    auto pos = static_cast<std::size_t>(it - tau.begin());
    if (j[k] < 1 || j[k] >= levels[pos])
      fail("bad_state", "j out of range for vertex " + std::to_string(sigma[k]));
    digits[pos] = j[k];
  }
  return q[cell_index(digits, levels)];
}

SaturatedMoebius saturated_from_conditional(const JointTable& cond) {
  SaturatedMoebius m{cond.vars(), cond.levels(), cond.probs()};
  for (int axis = 0; axis < static_cast<int>(m.levels.size()); ++axis)
    forward_axis(m.q, m.levels, axis);
  return m;
}

JointTable conditional_from_saturated(const SaturatedMoebius& m) {
  std::vector<double> p = m.q;
  for (int axis = 0; axis < static_cast<int>(m.levels.size()); ++axis)
    inverse_axis(p, m.levels, axis);
  for (std::size_t i = 0; i < p.size(); ++i)
    if (!(p[i] > 0.0)) {
      auto state = cell_state(i, m.levels);
      fail("outside_parameter_region",
           "reconstructed probability at cell " + state_to_string(state) + " over " +
               set_to_string(m.tau) + " is " + std::to_string(p[i]) + ", not positive");
    }
  return JointTable(m.tau, m.levels, std::move(p));
}

MoebiusModel::MoebiusModel(const ChainGraph& g, int cap)
    : graph_(g), dag_(chain_components(g)) {
  int ncomp = static_cast<int>(dag_.components().size());
  comp_blocks_.resize(ncomp);
  layouts_.resize(ncomp);

  for (int c = 0; c < ncomp; ++c) {
    const VertexSet& tau = dag_.components()[c];
    for (const auto& gamma : connected_sets(graph_, tau, cap)) {
      ParamBlock b;
      b.component = c;
      b.gamma = gamma;
      b.pa = graph_.parent_set(gamma);
      for (Vertex v : gamma) b.j_dims.push_back(graph_.level(v) - 1);
      for (Vertex w : b.pa) b.pa_dims.push_back(graph_.level(w));
      b.j_size = cell_count(b.j_dims);
      b.pa_size = cell_count(b.pa_dims);
      b.offset = dim_;
      dim_ += b.j_size * b.pa_size;
      comp_blocks_[c].push_back(static_cast<int>(blocks_.size()));
      blocks_.push_back(std::move(b));
    }
  }

  for (int c = 0; c < ncomp; ++c) {
    ComponentLayout& L = layouts_[c];
    L.tau = dag_.components()[c];
    L.tau_levels = graph_.levels_of(L.tau);
    L.pa = dag_.parents(c);
    L.pa_levels = graph_.levels_of(L.pa);

    // Where each gamma-vertex sits in tau, per block, for j indexing.
    std::size_t cells = cell_count(L.tau_levels);
    L.cell_terms.resize(cells);
    std::map<VertexSet, int> local_of;
    for (std::size_t b = 0; b < comp_blocks_[c].size(); ++b)
      local_of[blocks_[comp_blocks_[c][b]].gamma] = static_cast<int>(b);

    std::vector<int> digits(L.tau.size(), 1);
    std::size_t idx = 0;
    do {
      VertexSet sigma;
      for (std::size_t i = 0; i < L.tau.size(); ++i)
        if (digits[i] < L.tau_levels[i]) sigma.push_back(L.tau[i]);
      if (!sigma.empty()) {
        auto parts = sigma.size() == 1 ? std::vector<VertexSet>{sigma}
                                       : maximal_connected_partition(graph_, sigma);
        for (const auto& part : parts) {
          int local = local_of.at(part);
          const ParamBlock& blk = blocks_[comp_blocks_[c][local]];
          std::vector<int> j(part.size());
          for (std::size_t k = 0; k < part.size(); ++k) {
            auto pos = static_cast<std::size_t>(
                std::lower_bound(L.tau.begin(), L.tau.end(), part[k]) - L.tau.begin());
            j[k] = digits[pos];
          }
          L.cell_terms[idx].push_back({local, cell_index(j, blk.j_dims)});
        }
      }
      ++idx;
    } while (next_cell(digits, L.tau_levels));

    // Parent-state restriction maps per block.
    std::size_t nstates = cell_count(L.pa_levels);
    L.block_pa.assign(comp_blocks_[c].size(), std::vector<std::size_t>(nstates, 0));
    for (std::size_t b = 0; b < comp_blocks_[c].size(); ++b) {
      const ParamBlock& blk = blocks_[comp_blocks_[c][b]];
      std::vector<std::size_t> pos;
      for (Vertex w : blk.pa)
        pos.push_back(static_cast<std::size_t>(
            std::lower_bound(L.pa.begin(), L.pa.end(), w) - L.pa.begin()));
      std::vector<int> pstate(L.pa.size(), 1);
      std::size_t s = 0;
      do {
        std::vector<int> sub(blk.pa.size());
        for (std::size_t k = 0; k < pos.size(); ++k) sub[k] = pstate[pos[k]];
        L.block_pa[b][s] = cell_index(sub, blk.pa_dims);
        ++s;
      } while (next_cell(pstate, L.pa_levels));
    }
  }
}

int MoebiusModel::block_index(int comp, const VertexSet& gamma) const {
  for (int b : comp_blocks_[comp])
    if (blocks_[b].gamma == gamma) return b;
  fail("unknown_block", set_to_string(gamma) + " is not a connected subset of component " +
                            set_to_string(dag_.components()[comp]));
}

std::pair<std::size_t, std::size_t> MoebiusModel::component_range(int comp) const {
  if (comp_blocks_[comp].empty()) return {0, 0};
  const ParamBlock& first = blocks_[comp_blocks_[comp].front()];
  const ParamBlock& last = blocks_[comp_blocks_[comp].back()];
  return {first.offset, last.offset + last.j_size * last.pa_size - first.offset};
}

std::vector<double> MoebiusModel::independence_point() const {
  std::vector<double> values(dim_);
  for (const auto& b : blocks_) {
    double v = 1.0;
    for (Vertex u : b.gamma) v /= static_cast<double>(graph_.level(u));
    std::fill(values.begin() + static_cast<std::ptrdiff_t>(b.offset),
              values.begin() + static_cast<std::ptrdiff_t>(b.offset + b.j_size * b.pa_size), v);
  }
  return values;
}

std::vector<double> MoebiusModel::extract(const JointTable& p) const {
  if (p.vars() != graph_.vertices() || p.levels() != graph_.levels_of(graph_.vertices()))
    fail("vars_mismatch", "table variables/levels do not match the graph");
  std::vector<double> values(dim_);
  for (const auto& b : blocks_) {
    std::vector<int> pstate(b.pa.size(), 1);
    std::size_t s = 0;
    do {
      JointTable cond = conditional(p, b.gamma, b.pa, pstate);
      std::vector<int> j(b.gamma.size(), 1);
      std::size_t ji = 0;
      do {
        values[b.offset + s * b.j_size + ji] = cond.at(j);
        ++ji;
      } while (next_cell(j, b.j_dims));
      ++s;
    } while (next_cell(pstate, b.pa_dims));
  }
  return values;
}

void MoebiusModel::fill_tensor(int comp, std::span<const double> values, std::size_t pa_state,
                               std::vector<double>& tensor) const {
  const ComponentLayout& L = layouts_[comp];
  std::vector<std::size_t> base(comp_blocks_[comp].size());
  for (std::size_t b = 0; b < base.size(); ++b) {
    const ParamBlock& blk = blocks_[comp_blocks_[comp][b]];
    base[b] = blk.offset + L.block_pa[b][pa_state] * blk.j_size;
  }
  tensor.assign(L.cell_terms.size(), 1.0);
  for (std::size_t c = 0; c < tensor.size(); ++c)
    for (const CellTerm& t : L.cell_terms[c]) tensor[c] *= values[base[t.block] + t.j_index];
}

std::vector<JointTable> MoebiusModel::component_conditionals(int comp,
                                                             std::span<const double> values) const {
  if (values.size() != dim_) fail("bad_values", "parameter vector has wrong length");
  const ComponentLayout& L = layouts_[comp];
  std::size_t nstates = cell_count(L.pa_levels);
  std::vector<JointTable> out;
  out.reserve(nstates);
  std::vector<double> tensor;
  for (std::size_t s = 0; s < nstates; ++s) {
    fill_tensor(comp, values, s, tensor);
    std::vector<double> p = tensor;
    for (int axis = 0; axis < static_cast<int>(L.tau_levels.size()); ++axis)
      inverse_axis(p, L.tau_levels, axis);
    for (std::size_t i = 0; i < p.size(); ++i)
      if (!(p[i] > 0.0)) {
        auto cell = cell_state(i, L.tau_levels);
        auto pstate = cell_state(s, L.pa_levels);
        fail("outside_parameter_region",
             "component " + set_to_string(L.tau) + ", parent state " + state_to_string(pstate) +
                 ": reconstructed probability at cell " + state_to_string(cell) + " is " +
                 std::to_string(p[i]) + ", not positive");
      }
    out.emplace_back(L.tau, L.tau_levels, std::move(p));
  }
  return out;
}

// p(i) = prod over components of p(i_tau | i_pa), given per-parent-state
// conditionals for every component.
JointTable joint_from_conditionals(const ChainGraph& g, const ComponentDag& dag,
                                   const std::vector<std::vector<JointTable>>& conds) {
  const VertexSet& vars = g.vertices();
  std::vector<int> levels = g.levels_of(vars);
  std::size_t cells = 1;
  for (int d : levels) {
    cells *= static_cast<std::size_t>(d);
    if (cells > kMaxCells) fail("cap_exceeded", "joint table exceeds the cap of 2^24 cells");
  }

  struct CompIndexer {
    std::vector<std::size_t> tau_pos, pa_pos;
    std::vector<int> tau_levels, pa_levels;
  };
  std::vector<CompIndexer> ix(dag.components().size());
  for (std::size_t c = 0; c < dag.components().size(); ++c) {
    const VertexSet& tau = dag.components()[c];
    VertexSet pa = dag.parents(static_cast<int>(c));
    for (Vertex v : tau)
      ix[c].tau_pos.push_back(static_cast<std::size_t>(
          std::lower_bound(vars.begin(), vars.end(), v) - vars.begin()));
    for (Vertex v : pa)
      ix[c].pa_pos.push_back(static_cast<std::size_t>(
          std::lower_bound(vars.begin(), vars.end(), v) - vars.begin()));
    ix[c].tau_levels = g.levels_of(tau);
    ix[c].pa_levels = g.levels_of(pa);
  }

  std::vector<double> probs(cells);
  std::vector<int> state(vars.size(), 1);
  std::size_t idx = 0;
  std::vector<int> sub;
  do {
    double v = 1.0;
    for (std::size_t c = 0; c < ix.size(); ++c) {
      sub.assign(ix[c].pa_pos.size(), 0);
      for (std::size_t k = 0; k < ix[c].pa_pos.size(); ++k) sub[k] = state[ix[c].pa_pos[k]];
      std::size_t s = cell_index(sub, ix[c].pa_levels);
      sub.assign(ix[c].tau_pos.size(), 0);
      for (std::size_t k = 0; k < ix[c].tau_pos.size(); ++k) sub[k] = state[ix[c].tau_pos[k]];
      v *= conds[c][s].probs()[cell_index(sub, ix[c].tau_levels)];
    }
    probs[idx] = v;
    ++idx;
  } while (next_cell(state, levels));
  return JointTable(vars, std::move(levels), std::move(probs));
}

JointTable MoebiusModel::to_joint(std::span<const double> values) const {
  std::vector<std::vector<JointTable>> conds;
  conds.reserve(dag_.components().size());
  for (int c = 0; c < static_cast<int>(dag_.components().size()); ++c)
    conds.push_back(component_conditionals(c, values));
  return joint_from_conditionals(graph_, dag_, conds);
}

MoebiusModel::Sample MoebiusModel::sample(std::uint64_t seed) const {
  Rng master(seed);
  std::vector<double> values = independence_point();
  std::vector<double> indep = values;
  int attempts = 0;
  for (int c = 0; c < static_cast<int>(dag_.components().size()); ++c) {
    Rng rng = master.fork(static_cast<std::uint64_t>(c));
    auto [off, len] = component_range(c);
    if (len == 0) continue;
    double w = rng.uniform(0.0, 0.5);
    std::vector<double> u(len);
    for (auto& x : u) x = rng.uniform01();
    for (int tries = 0;; ++tries) {
      if (tries > 64)
        fail("sampler_failed", "no feasible point for component " +
                                   set_to_string(dag_.components()[c]) + " after " +
                                   std::to_string(attempts) + " attempts");
      for (std::size_t k = 0; k < len; ++k)
        values[off + k] = (1.0 - w) * indep[off + k] + w * u[k];
      ++attempts;
      try {
        component_conditionals(c, values);
        break;
      } catch (const DomainError& e) {
        if (e.code() != "outside_parameter_region") throw;
        w *= 0.5;
      }
    }
  }
  return Sample{values, to_joint(values), attempts};
}

std::size_t model_dimension(const ChainGraph& g, int cap) {
  ComponentDag dag = chain_components(g);
  std::size_t dim = 0;
  for (std::size_t c = 0; c < dag.components().size(); ++c) {
    for (const auto& gamma : connected_sets(g, dag.components()[c], cap)) {
      std::size_t term = 1;
      for (Vertex v : gamma) term *= static_cast<std::size_t>(g.level(v) - 1);
      for (Vertex w : g.parent_set(gamma)) term *= static_cast<std::size_t>(g.level(w));
      dim += term;
    }
  }
  return dim;
}

JointTable to_joint(const ChainGraph& g, const MoebiusParams& params) {
  return MoebiusModel(g).to_joint(params.values);
}

MoebiusParams params_from_joint(const ChainGraph& g, const JointTable& p) {
  return MoebiusParams{MoebiusModel(g).extract(p)};
}

ModelPoint sample_model_point(const ChainGraph& g, std::uint64_t seed) {
  auto s = MoebiusModel(g).sample(seed);
  return ModelPoint{MoebiusParams{std::move(s.values)}, std::move(s.joint), s.attempts};
}

Theorem8Report check_theorem8(const JointTable& p, const ChainGraph& g, double tol) {
  if (p.vars() != g.vertices() || p.levels() != g.levels_of(g.vertices()))
    fail("vars_mismatch", "table variables/levels do not match the graph");
  if (!p.positive()) fail("not_positive", "membership test needs a strictly positive table");

  ComponentDag dag = chain_components(g);
  Theorem8Report report;

  // Conditionals of p itself along the component DAG.
  std::vector<std::vector<JointTable>> conds(dag.components().size());
  for (std::size_t c = 0; c < dag.components().size(); ++c) {
    const VertexSet& tau = dag.components()[c];
    VertexSet pa = dag.parents(static_cast<int>(c));
    auto pa_levels = g.levels_of(pa);
    std::vector<int> pstate(pa.size(), 1);
    do {
      conds[c].push_back(conditional(p, tau, pa, pstate));
    } while (next_cell(pstate, pa_levels));
  }

  JointTable factorized = joint_from_conditionals(g, dag, conds);
  for (std::size_t i = 0; i < p.size(); ++i)
    report.factorization_residual =
        std::max(report.factorization_residual, std::abs(p.probs()[i] - factorized.probs()[i]));
  report.factorization_ok = report.factorization_residual <= tol;

  for (std::size_t c = 0; c < dag.components().size(); ++c) {
    const VertexSet& tau = dag.components()[c];
    std::vector<int> tau_levels = g.levels_of(tau);
    VertexSet pa = dag.parents(static_cast<int>(c));
    auto pa_levels = g.levels_of(pa);
    std::size_t nstates = cell_count(pa_levels);

    std::vector<SaturatedMoebius> sat;
    sat.reserve(nstates);
    for (std::size_t s = 0; s < nstates; ++s)
      sat.push_back(saturated_from_conditional(conds[c][s]));

    // (ii) products over the maximal connected partition, per parent state.
    std::vector<int> digits(tau.size(), 1);
    std::size_t idx = 0;
    do {
      VertexSet sigma;
      std::vector<int> j;
      for (std::size_t i = 0; i < tau.size(); ++i)
        if (digits[i] < tau_levels[i]) {
          sigma.push_back(tau[i]);
          j.push_back(digits[i]);
        }
      if (sigma.size() >= 2) {
        auto parts = maximal_connected_partition(g, sigma);
        if (parts.size() >= 2) {
          for (std::size_t s = 0; s < nstates; ++s) {
            double prod = 1.0;
            for (const auto& part : parts) {
              std::vector<int> jp;
              for (std::size_t k = 0; k < sigma.size(); ++k)
                if (contains(part, sigma[k])) jp.push_back(j[k]);
              prod *= sat[s].entry(part, jp);
            }
            double r = std::abs(sat[s].q[idx] - prod);
            report.products.push_back(
                {tau, sigma, j, cell_state(s, pa_levels), r});
            report.max_product_residual = std::max(report.max_product_residual, r);
          }
        }
      }
      ++idx;
    } while (next_cell(digits, tau_levels));

    // (iii) invariance across parent states agreeing on pa(sigma).
    if (nstates > 1) {
      std::size_t n = tau.size();
      for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
        VertexSet sigma;
        for (std::size_t i = 0; i < n; ++i)
          if (mask & (std::size_t{1} << i)) sigma.push_back(tau[i]);
        VertexSet pg = g.parent_set(sigma);
        if (pg == pa) continue;  // parent states never agree twice
        std::vector<std::size_t> pg_pos;
        for (Vertex w : pg)
          pg_pos.push_back(static_cast<std::size_t>(
              std::lower_bound(pa.begin(), pa.end(), w) - pa.begin()));
        auto pg_levels = g.levels_of(pg);

        // Group parent states by their restriction to pa(sigma).
        std::size_t ngroups = cell_count(pg_levels);
        std::vector<int> jdims;
        for (Vertex v : sigma) jdims.push_back(g.level(v) - 1);

        std::vector<int> jstate(sigma.size(), 1);
        do {
          std::vector<double> lo(ngroups, 1e300), hi(ngroups, -1e300);
          std::vector<int> pstate(pa.size(), 1);
          std::size_t s = 0;
          do {
            std::vector<int> sub(pg.size());
            for (std::size_t k = 0; k < pg_pos.size(); ++k) sub[k] = pstate[pg_pos[k]];
            std::size_t gidx = cell_index(sub, pg_levels);
            double v = sat[s].entry(sigma, jstate);
            lo[gidx] = std::min(lo[gidx], v);
            hi[gidx] = std::max(hi[gidx], v);
            ++s;
          } while (next_cell(pstate, pa_levels));
          double spread = 0.0;
          for (std::size_t k = 0; k < ngroups; ++k)
            if (hi[k] >= lo[k]) spread = std::max(spread, hi[k] - lo[k]);
          report.invariances.push_back({tau, sigma, jstate, spread});
          report.max_invariance_residual = std::max(report.max_invariance_residual, spread);
        } while (next_cell(jstate, jdims));
      }
    }
  }

  report.products_ok = report.max_product_residual <= tol;
  report.invariances_ok = report.max_invariance_residual <= tol;
  return report;
}

std::vector<std::vector<double>> parametrization_jacobian(const ChainGraph& g,
                                                          const MoebiusParams& params,
                                                          double step) {
  MoebiusModel model(g);
  if (params.values.size() != model.dim()) fail("bad_values", "parameter vector has wrong length");
  std::size_t cells = to_joint(g, params).size();
  std::vector<std::vector<double>> jac(cells, std::vector<double>(model.dim()));
  std::vector<double> theta = params.values;
  for (std::size_t k = 0; k < model.dim(); ++k) {
    double saved = theta[k];
    theta[k] = saved + step;
    JointTable up = model.to_joint(theta);
    theta[k] = saved - step;
    JointTable dn = model.to_joint(theta);
    theta[k] = saved;
    for (std::size_t i = 0; i < cells; ++i)
      jac[i][k] = (up.probs()[i] - dn.probs()[i]) / (2.0 * step);
  }
  return jac;
}

int jacobian_rank(const std::vector<std::vector<double>>& jac, double rel_tol) {
  if (jac.empty()) return 0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(jac.size()), static_cast<Eigen::Index>(jac[0].size()));
  for (std::size_t i = 0; i < jac.size(); ++i)
    for (std::size_t k = 0; k < jac[i].size(); ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = jac[i][k];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > rel_tol * sv(0)) ++rank;
  return rank;
}

std::string params_to_json(const ChainGraph& g, const MoebiusParams& params) {
  MoebiusModel model(g);
  if (params.values.size() != model.dim()) fail("bad_values", "parameter vector has wrong length");
  nlohmann::ordered_json out;
  out["schema"] = "1";
  out["parameters"] = nlohmann::ordered_json::array();
  for (const auto& b : model.blocks()) {
    std::vector<int> pstate(b.pa.size(), 1);
    std::size_t s = 0;
    do {
      std::vector<int> j(b.gamma.size(), 1);
      std::size_t ji = 0;
      do {
        nlohmann::ordered_json rec;
        rec["component"] = model.dag().components()[static_cast<std::size_t>(b.component)];
        rec["gamma"] = b.gamma;
        rec["j"] = j;
        rec["pa_state"] = pstate;
        rec["value"] = params.values[b.offset + s * b.j_size + ji];
        out["parameters"].push_back(std::move(rec));
        ++ji;
      } while (next_cell(j, b.j_dims));
      ++s;
    } while (next_cell(pstate, b.pa_dims));
  }
  return out.dump(2);
}

MoebiusParams params_from_json(const ChainGraph& g, const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const std::exception& e) {
    fail("json", std::string("cannot parse parameter JSON: ") + e.what());
  }
  if (!doc.contains("parameters") || !doc["parameters"].is_array())
    fail("json", "parameter JSON needs a 'parameters' array");

  MoebiusModel model(g);
  std::vector<double> values(model.dim());
  std::vector<bool> seen(model.dim(), false);
  for (const auto& rec : doc["parameters"]) {
    VertexSet component = rec.at("component").get<VertexSet>();
    VertexSet gamma = rec.at("gamma").get<VertexSet>();
    std::vector<int> j = rec.at("j").get<std::vector<int>>();
    std::vector<int> pstate = rec.at("pa_state").get<std::vector<int>>();
    double value = rec.at("value").get<double>();

    int comp = model.dag().index_of(component);
    int bi = model.block_index(comp, gamma);
    const ParamBlock& b = model.blocks()[bi];
    if (j.size() != b.j_dims.size() || pstate.size() != b.pa_dims.size())
      fail("json", "record for " + set_to_string(gamma) + " has wrong arity");
    for (std::size_t k = 0; k < j.size(); ++k)
      if (j[k] < 1 || j[k] > b.j_dims[k]) fail("json", "j out of range");
    for (std::size_t k = 0; k < pstate.size(); ++k)
      if (pstate[k] < 1 || pstate[k] > b.pa_dims[k]) fail("json", "pa_state out of range");
    std::size_t slot = b.offset + cell_index(pstate, b.pa_dims) * b.j_size + cell_index(j, b.j_dims);
    if (seen[slot]) fail("json", "duplicate parameter record");
    seen[slot] = true;
    values[slot] = value;
  }
  if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }))
    fail("json", "parameter JSON does not cover every free parameter");
  return MoebiusParams{std::move(values)};
}

}  // namespace cgm
