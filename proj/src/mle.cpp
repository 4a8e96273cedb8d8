#include "cgm/mle.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cgm/error.hpp"
#include "cgm/indexing.hpp"
#include "cgm/rng.hpp"

namespace cgm {

namespace {

[[noreturn]] void fail(const std::string& code, const std::string& msg) {
  throw DomainError("mle", code, msg);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

// Friend of MoebiusModel: hands the fitter the component tensor layouts.
struct ComponentWork {
  static const auto& layout(const MoebiusModel& m, int comp) { return m.layouts_[comp]; }
  static void fill(const MoebiusModel& m, int comp, std::span<const double> values,
                   std::size_t pa_state, std::vector<double>& tensor) {
    m.fill_tensor(comp, values, pa_state, tensor);
  }
};

namespace {

// Count marginal of one component, reindexed as n[pa state][tau cell].
struct CompCounts {
  std::vector<std::vector<double>> n;  // [pa state][tau cell]
  std::vector<double> n_pa;            // margin per pa state
  double total = 0.0;
};

CompCounts component_counts(const MoebiusModel& model, int comp, const CountTable& counts) {
  const auto& L = ComponentWork::layout(model, comp);
  const VertexSet& vars = counts.vars();
  auto positions = [&](const VertexSet& sub) {
    std::vector<std::size_t> pos;
    pos.reserve(sub.size());
    for (Vertex v : sub)
      pos.push_back(
          static_cast<std::size_t>(std::lower_bound(vars.begin(), vars.end(), v) - vars.begin()));
    return pos;
  };
  std::vector<std::size_t> tau_pos = positions(L.tau);
  std::vector<std::size_t> pa_pos = positions(L.pa);

  CompCounts cc;
  std::size_t nstates = cell_count(L.pa_levels);
  std::size_t ncells = cell_count(L.tau_levels);
  cc.n.assign(nstates, std::vector<double>(ncells, 0.0));
  cc.n_pa.assign(nstates, 0.0);

  std::vector<int> state(vars.size(), 1);
  std::vector<int> sub;
  std::size_t idx = 0;
  do {
    double c = static_cast<double>(counts.counts()[idx]);
    ++idx;
    if (c == 0.0) continue;
    sub.assign(pa_pos.size(), 0);
    for (std::size_t k = 0; k < pa_pos.size(); ++k) sub[k] = state[pa_pos[k]];
    std::size_t s = cell_index(sub, L.pa_levels);
    sub.assign(tau_pos.size(), 0);
    for (std::size_t k = 0; k < tau_pos.size(); ++k) sub[k] = state[tau_pos[k]];
    cc.n[s][cell_index(sub, L.tau_levels)] += c;
    cc.n_pa[s] += c;
    cc.total += c;
  } while (next_cell(state, counts.levels()));
  return cc;
}

// Component log-likelihood at a full parameter vector; returns -inf when a
// conditional cell is not strictly positive at ANY parent state (the
// membership constraint, enforced even where the data are silent). When
// grad is non-null it receives d loglik / d values restricted to the
// component's slice (grad->size() == slice length).
double eval_component(const MoebiusModel& model, int comp, const CompCounts& cc,
                      std::span<const double> values, std::vector<double>* grad) {
  const auto& L = ComponentWork::layout(model, comp);
  auto [off, len] = model.component_range(comp);
  const std::vector<int>& local = model.component_blocks(comp);

  if (grad) grad->assign(len, 0.0);

  std::size_t nstates = cc.n.size();
  std::vector<double> q, p, gq;
  std::vector<std::size_t> base(local.size());
  std::vector<double> pre, suf;
  double ll = 0.0;

  for (std::size_t s = 0; s < nstates; ++s) {
    ComponentWork::fill(model, comp, values, s, q);
    p = q;
    for (int axis = 0; axis < static_cast<int>(L.tau_levels.size()); ++axis)
      detail::inverse_axis(p, L.tau_levels, axis);
    for (double cell : p)
      if (!(cell > 0.0)) return -kInf;

    const std::vector<double>& n = cc.n[s];
    for (std::size_t t = 0; t < p.size(); ++t)
      if (n[t] != 0.0) ll += n[t] * std::log(p[t]);

    if (!grad || cc.n_pa[s] == 0.0) continue;

    gq.assign(p.size(), 0.0);
    for (std::size_t t = 0; t < p.size(); ++t)
      if (n[t] != 0.0) gq[t] = n[t] / p[t];
    for (int axis = 0; axis < static_cast<int>(L.tau_levels.size()); ++axis)
      detail::inverse_axis_adjoint(gq, L.tau_levels, axis);

    for (std::size_t b = 0; b < local.size(); ++b) {
      const ParamBlock& blk = model.blocks()[local[b]];
      base[b] = blk.offset + L.block_pa[b][s] * blk.j_size;
    }
    for (std::size_t t = 0; t < gq.size(); ++t) {
      if (gq[t] == 0.0) continue;
      const auto& terms = L.cell_terms[t];
      if (terms.empty()) continue;
      std::size_t k = terms.size();
      pre.assign(k, 1.0);
      suf.assign(k, 1.0);
      for (std::size_t i = 1; i < k; ++i)
        pre[i] = pre[i - 1] * values[base[terms[i - 1].block] + terms[i - 1].j_index];
      for (std::size_t i = k; i-- > 1;)
        suf[i - 1] = suf[i] * values[base[terms[i].block] + terms[i].j_index];
      for (std::size_t i = 0; i < k; ++i)
        (*grad)[base[terms[i].block] + terms[i].j_index - off] += gq[t] * pre[i] * suf[i];
    }
  }
  return ll;
}

// Parent states that depend on at least one parameter slot never exposed by
// a positive-count parent state; those slots stay at independence values.
std::vector<std::size_t> unidentified_states(const MoebiusModel& model, int comp,
                                             const CompCounts& cc) {
  const auto& L = ComponentWork::layout(model, comp);
  std::size_t nstates = cc.n_pa.size();
  std::vector<std::vector<char>> exposed(L.block_pa.size());
  for (std::size_t b = 0; b < L.block_pa.size(); ++b) {
    const ParamBlock& blk = model.blocks()[model.component_blocks(comp)[b]];
    exposed[b].assign(blk.pa_size, 0);
    for (std::size_t s = 0; s < nstates; ++s)
      if (cc.n_pa[s] > 0.0) exposed[b][L.block_pa[b][s]] = 1;
  }
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < nstates; ++s)
    for (std::size_t b = 0; b < L.block_pa.size(); ++b)
      if (!exposed[b][L.block_pa[b][s]]) {
        out.push_back(s);
        break;
      }
  return out;
}

struct StartResult {
  Eigen::VectorXd x;
  double ll = -kInf;
  double scaled_grad_inf = kInf;
  double last_rel_change = kInf;
  int iterations = 0;
};

// BFGS with Armijo backtracking on F = -loglik / n, feasibility enforced by
// the -inf objective outside the positive region.
StartResult bfgs_start(const MoebiusModel& model, int comp, const CompCounts& cc,
                       std::vector<double>& scratch, std::size_t off, const Eigen::VectorXd& x0,
                       const FitOptions& options) {
  const double n_total = cc.total;
  auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    for (Eigen::Index i = 0; i < x.size(); ++i) scratch[off + static_cast<std::size_t>(i)] = x[i];
    std::vector<double> gslice;
    double ll = eval_component(model, comp, cc, scratch, g ? &gslice : nullptr);
    if (!std::isfinite(ll)) return kInf;
    if (g) {
      g->resize(x.size());
      for (Eigen::Index i = 0; i < x.size(); ++i)
        (*g)[i] = -gslice[static_cast<std::size_t>(i)] / n_total;
    }
    return -ll / n_total;
  };

  const Eigen::Index m = x0.size();
  Eigen::VectorXd x = x0, g(m), g2(m);
  double f = objective(x, &g);
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(m, m);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);

  StartResult r;
  r.scaled_grad_inf = g.lpNorm<Eigen::Infinity>();
  int small_steps = 0;
  for (int it = 0; it < options.max_iter; ++it) {
    Eigen::VectorXd d = -H * g;
    double gtd = g.dot(d);
    if (!(gtd < 0.0)) {
      d = -g;
      gtd = g.dot(d);
      H = I;
      if (!(gtd < 0.0)) break;  // zero gradient
    }
    double t = 1.0;
    double f2 = kInf;
    bool accepted = false;
    Eigen::VectorXd x2;
    for (int ls = 0; ls < 64; ++ls) {
      x2 = x + t * d;
      f2 = objective(x2, nullptr);
      if (f2 <= f + 1e-4 * t * gtd) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    objective(x2, &g2);

    Eigen::VectorXd s = x2 - x, y = g2 - g;
    double dll = (f - f2) * n_total;  // loglik gain, >= 0
    double rel = std::abs(dll) / (1.0 + std::abs(f2 * n_total));
    x = x2;
    f = f2;
    g = g2;
    ++r.iterations;
    r.scaled_grad_inf = g.lpNorm<Eigen::Infinity>();
    r.last_rel_change = rel;
    if (r.scaled_grad_inf < 1e-3 * options.grad_tol) break;
    if (rel < 1e-3 * options.rel_tol) {
      if (++small_steps >= 2) break;
    } else {
      small_steps = 0;
    }
    double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      double rho = 1.0 / sy;
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) +
          rho * s * s.transpose();
    }
  }
  r.x = x;
  r.ll = -f * n_total;
  return r;
}

std::vector<std::size_t> positions_in(const VertexSet& vars, const VertexSet& sub) {
  std::vector<std::size_t> pos;
  pos.reserve(sub.size());
  for (Vertex v : sub)
    pos.push_back(
        static_cast<std::size_t>(std::lower_bound(vars.begin(), vars.end(), v) - vars.begin()));
  return pos;
}

// Closed form for a singleton component {v}: empirical proportions of v
// conditional on pa(v), broadcast over the component DAG parent states;
// zero-margin parent states fall back to the uniform distribution.
ComponentFitDetail fit_singleton(const MoebiusModel& model, int comp, const CountTable& counts) {
  const auto& L = ComponentWork::layout(model, comp);
  const ParamBlock& blk = model.blocks()[model.component_blocks(comp)[0]];
  int d = L.tau_levels[0];

  // Counts over (v, pa(v)).
  std::vector<std::size_t> v_pos = positions_in(counts.vars(), L.tau);
  std::vector<std::size_t> pg_pos = positions_in(counts.vars(), blk.pa);
  std::vector<std::vector<double>> n(blk.pa_size, std::vector<double>(d, 0.0));
  std::vector<int> state(counts.vars().size(), 1);
  std::vector<int> sub;
  std::size_t idx = 0;
  do {
    double c = static_cast<double>(counts.counts()[idx]);
    ++idx;
    if (c == 0.0) continue;
    sub.assign(pg_pos.size(), 0);
    for (std::size_t k = 0; k < pg_pos.size(); ++k) sub[k] = state[pg_pos[k]];
    n[cell_index(sub, blk.pa_dims)][state[v_pos[0]] - 1] += c;
  } while (next_cell(state, counts.levels()));

  ComponentFitDetail out;
  out.values = model.independence_point();
  std::vector<std::vector<double>> cond(blk.pa_size, std::vector<double>(d, 1.0 / d));
  std::vector<char> identified(blk.pa_size, 0);
  for (std::size_t ip = 0; ip < blk.pa_size; ++ip) {
    double denom = 0.0;
    for (int j = 0; j < d; ++j) denom += n[ip][j];
    if (denom > 0.0) {
      identified[ip] = 1;
      for (int j = 0; j < d; ++j) cond[ip][j] = n[ip][j] / denom;
    }
    for (int j = 0; j + 1 < d; ++j)
      out.values[blk.offset + ip * blk.j_size + static_cast<std::size_t>(j)] = cond[ip][j];
  }

  // Broadcast over full parent states and collect the log-likelihood.
  CompCounts cc = component_counts(model, comp, counts);
  std::size_t nstates = cc.n_pa.size();
  out.conditionals.reserve(nstates);
  double ll = 0.0;
  for (std::size_t s = 0; s < nstates; ++s) {
    std::size_t ip = L.block_pa[0][s];
    for (int j = 0; j < d; ++j)
      if (cc.n[s][static_cast<std::size_t>(j)] != 0.0)
        ll += cc.n[s][static_cast<std::size_t>(j)] * std::log(cond[ip][static_cast<std::size_t>(j)]);
    out.conditionals.emplace_back(L.tau, L.tau_levels, std::vector<double>(cond[ip]));
    if (!identified[ip]) out.info.unidentified_pa_states.push_back(s);
  }

  out.info.component = L.tau;
  out.info.closed_form = true;
  out.info.converged = true;
  out.info.loglik = ll;
  return out;
}

// Closed form for a complete component without parents: the empirical
// marginal proportions over the component.
ComponentFitDetail fit_complete_free(const MoebiusModel& model, int comp,
                                     const CountTable& counts) {
  const auto& L = ComponentWork::layout(model, comp);
  CompCounts cc = component_counts(model, comp, counts);
  std::size_t ncells = cell_count(L.tau_levels);
  std::vector<double> phat(ncells);
  double ll = 0.0;
  for (std::size_t t = 0; t < ncells; ++t) {
    phat[t] = cc.n[0][t] / cc.total;
    if (cc.n[0][t] != 0.0) ll += cc.n[0][t] * std::log(phat[t]);
  }

  ComponentFitDetail out;
  out.values = model.independence_point();
  // Transformed scale: every q_gamma(j) is a face margin of phat.
  std::vector<double> q = phat;
  for (int axis = 0; axis < static_cast<int>(L.tau_levels.size()); ++axis)
    detail::forward_axis(q, L.tau_levels, axis);
  std::vector<int> digits;
  for (int b : model.component_blocks(comp)) {
    const ParamBlock& blk = model.blocks()[b];
    std::vector<std::size_t> gpos = positions_in(L.tau, blk.gamma);
    std::vector<int> j(blk.j_dims.size(), 1);
    std::size_t ji = 0;
    do {
      digits = L.tau_levels;
      for (std::size_t k = 0; k < gpos.size(); ++k) digits[gpos[k]] = j[k];
      out.values[blk.offset + ji] = q[cell_index(digits, L.tau_levels)];
      ++ji;
    } while (next_cell(j, blk.j_dims));
  }

  out.conditionals.emplace_back(L.tau, L.tau_levels, std::move(phat));
  out.info.component = L.tau;
  out.info.closed_form = true;
  out.info.converged = true;
  out.info.loglik = ll;
  return out;
}

}  // namespace

double loglik(const JointTable& p, const CountTable& counts) {
  if (p.vars() != counts.vars() || p.levels() != counts.levels())
    fail("vars_mismatch", "probability table and count table have different layouts");
  double ll = 0.0;
  for (std::size_t i = 0; i < p.probs().size(); ++i) {
    double n = static_cast<double>(counts.counts()[i]);
    if (n == 0.0) continue;
    if (!(p.probs()[i] > 0.0)) return -kInf;
    ll += n * std::log(p.probs()[i]);
  }
  return ll;
}

std::vector<int> closed_form_components(const ChainGraph& g) {
  ComponentDag dag = chain_components(g);
  std::vector<int> out;
  for (int c = 0; c < static_cast<int>(dag.components().size()); ++c) {
    const VertexSet& tau = dag.components()[c];
    if (tau.size() == 1) {
      out.push_back(c);
      continue;
    }
    if (!dag.parents(c).empty()) continue;
    bool complete = true;
    for (std::size_t i = 0; i < tau.size() && complete; ++i)
      for (std::size_t k = i + 1; k < tau.size(); ++k)
        if (!g.has_undirected(tau[i], tau[k])) {
          complete = false;
          break;
        }
    if (complete) out.push_back(c);
  }
  return out;
}

double component_loglik(const MoebiusModel& model, int comp, const CountTable& counts,
                        std::span<const double> values, std::vector<double>* grad) {
  if (counts.vars() != model.graph().vertices() || counts.levels() != model.graph().levels_of(counts.vars()))
    fail("vars_mismatch", "count table does not match the graph's vertices and levels");
  if (values.size() != model.dim()) fail("bad_values", "parameter vector has wrong length");
  CompCounts cc = component_counts(model, comp, counts);
  std::vector<double> gslice;
  double ll = eval_component(model, comp, cc, values, grad ? &gslice : nullptr);
  if (grad) {
    grad->assign(model.dim(), 0.0);
    if (std::isfinite(ll)) {
      auto [off, len] = model.component_range(comp);
      for (std::size_t i = 0; i < len; ++i) (*grad)[off + i] = gslice[i];
    }
  }
  return ll;
}

ComponentFitDetail fit_component(const MoebiusModel& model, int comp, const CountTable& counts,
                                 const FitOptions& options) {
  if (counts.vars() != model.graph().vertices() ||
      counts.levels() != model.graph().levels_of(counts.vars()))
    fail("vars_mismatch", "count table does not match the graph's vertices and levels");
  if (options.starts < 1) fail("bad_options", "starts must be at least 1");

  const auto& L = ComponentWork::layout(model, comp);
  auto [off, len] = model.component_range(comp);
  CompCounts cc = component_counts(model, comp, counts);

  ComponentFitDetail out;
  out.info.component = L.tau;
  out.values = model.independence_point();
  out.info.unidentified_pa_states = unidentified_states(model, comp, cc);

  if (cc.total == 0.0) {
    out.info.converged = true;
    out.conditionals = model.component_conditionals(comp, out.values);
    return out;
  }

  std::vector<double> scratch = out.values;
  const std::vector<double> indep = out.values;  // own a copy: out.values is mutated below

  Rng master(options.seed);
  std::vector<StartResult> results;
  results.reserve(static_cast<std::size_t>(options.starts));
  for (int k = 0; k < options.starts; ++k) {
    Eigen::VectorXd x0(static_cast<Eigen::Index>(len));
    if (k == 0) {
      for (std::size_t i = 0; i < len; ++i) x0[static_cast<Eigen::Index>(i)] = indep[off + i];
    } else {
      Rng rng = master.fork(static_cast<std::uint64_t>(comp) * 1000003ULL +
                            static_cast<std::uint64_t>(k));
      double w = rng.uniform(0.0, 0.5);
      std::vector<double> u(len);
      for (double& ui : u) ui = rng.uniform01();
      bool feasible = false;
      for (int attempt = 0; attempt < 64 && !feasible; ++attempt) {
        for (std::size_t i = 0; i < len; ++i) {
          double cand = (1.0 - w) * indep[off + i] + w * u[i];
          scratch[off + i] = cand;
          x0[static_cast<Eigen::Index>(i)] = cand;
        }
        feasible = std::isfinite(eval_component(model, comp, cc, scratch, nullptr));
        if (!feasible) w *= 0.5;
      }
      if (!feasible) continue;  // never reached: w -> 0 recovers independence
    }
    results.push_back(bfgs_start(model, comp, cc, scratch, off, x0, options));
  }

  std::size_t best = 0;
  double lo = kInf, hi = -kInf;
  for (std::size_t i = 0; i < results.size(); ++i) {
    lo = std::min(lo, results[i].ll);
    hi = std::max(hi, results[i].ll);
    if (results[i].ll > results[best].ll) best = i;
  }
  const StartResult& win = results[best];
  out.info.starts_used = static_cast<int>(results.size());
  out.info.loglik_spread = hi - lo;
  out.info.iterations = win.iterations;
  out.info.final_gradient_norm = win.scaled_grad_inf;
  out.info.converged =
      win.scaled_grad_inf < options.grad_tol || win.last_rel_change < options.rel_tol;
  out.info.loglik = win.ll;

  for (std::size_t i = 0; i < len; ++i) out.values[off + i] = win.x[static_cast<Eigen::Index>(i)];

  // Slots no positive-count parent state exposes carry no information; pin
  // them back to independence when that stays feasible.
  if (!out.info.unidentified_pa_states.empty()) {
    std::vector<std::vector<char>> exposed(L.block_pa.size());
    std::vector<double> pinned = out.values;
    for (std::size_t b = 0; b < L.block_pa.size(); ++b) {
      const ParamBlock& blk = model.blocks()[model.component_blocks(comp)[b]];
      exposed[b].assign(blk.pa_size, 0);
      for (std::size_t s = 0; s < cc.n_pa.size(); ++s)
        if (cc.n_pa[s] > 0.0) exposed[b][L.block_pa[b][s]] = 1;
      for (std::size_t ip = 0; ip < blk.pa_size; ++ip)
        if (!exposed[b][ip])
          for (std::size_t j = 0; j < blk.j_size; ++j)
            pinned[blk.offset + ip * blk.j_size + j] = indep[blk.offset + ip * blk.j_size + j];
    }
    if (std::isfinite(eval_component(model, comp, cc, pinned, nullptr))) out.values = pinned;
  }

  out.conditionals = model.component_conditionals(comp, out.values);
  return out;
}

FitResult fit(const ChainGraph& g, const CountTable& counts, const FitOptions& options) {
  if (counts.vars() != g.vertices() || counts.levels() != g.levels_of(counts.vars()))
    fail("vars_mismatch", "count table does not match the graph's vertices and levels");
  if (counts.total() == 0) fail("empty_counts", "count table is empty");

  MoebiusModel model(g);
  std::size_t ncomp = model.dag().components().size();
  std::vector<int> closed = closed_form_components(g);
  std::vector<char> is_closed(ncomp, 0);
  for (int c : closed) is_closed[static_cast<std::size_t>(c)] = 1;

  std::vector<ComponentFitDetail> details(ncomp);
  auto run = [&](int c) {
    if (!is_closed[static_cast<std::size_t>(c)])
      return fit_component(model, c, counts, options);
    if (model.dag().components()[static_cast<std::size_t>(c)].size() == 1)
      return fit_singleton(model, c, counts);
    return fit_complete_free(model, c, counts);
  };
  if (options.threads > 1 && ncomp > 1) {
    std::vector<std::future<ComponentFitDetail>> futs;
    futs.reserve(ncomp);
    for (std::size_t c = 0; c < ncomp; ++c)
      futs.push_back(std::async(std::launch::async, run, static_cast<int>(c)));
    for (std::size_t c = 0; c < ncomp; ++c) details[c] = futs[c].get();
  } else {
    for (std::size_t c = 0; c < ncomp; ++c) details[c] = run(static_cast<int>(c));
  }

  MoebiusParams q_hat{model.independence_point()};
  std::vector<std::vector<JointTable>> conds;
  std::vector<ComponentFit> per_component;
  conds.reserve(ncomp);
  per_component.reserve(ncomp);
  double ll = 0.0;
  for (std::size_t c = 0; c < ncomp; ++c) {
    auto [off, len] = model.component_range(static_cast<int>(c));
    for (std::size_t i = 0; i < len; ++i) q_hat.values[off + i] = details[c].values[off + i];
    ll += details[c].info.loglik;
    conds.push_back(std::move(details[c].conditionals));
    per_component.push_back(std::move(details[c].info));
  }
  std::size_t dim = model.dim();
  double b =
      -2.0 * ll + static_cast<double>(dim) * std::log(static_cast<double>(counts.total()));
  return FitResult{joint_from_conditionals(g, model.dag(), conds), std::move(q_hat), ll, dim, b,
                   std::move(per_component)};
}

double bic(const FitResult& r, const CountTable& counts) {
  if (counts.total() == 0) fail("empty_counts", "count table is empty");
  return -2.0 * r.loglik + static_cast<double>(r.dim) * std::log(static_cast<double>(counts.total()));
}

LrtResult lrt(const FitResult& null_fit, const FitResult& alt_fit) {
  LrtResult r;
  r.statistic = 2.0 * (alt_fit.loglik - null_fit.loglik);
  r.df = static_cast<int>(alt_fit.dim) - static_cast<int>(null_fit.dim);
  if (r.statistic < -1e-8)
    fail("negative_statistic",
         "alternative log-likelihood is below the null by " + std::to_string(-r.statistic / 2.0) +
             "; the models are not nested or a fit did not converge");
  if (r.statistic < 0.0) r.statistic = 0.0;
  return r;
}

}  // namespace cgm
