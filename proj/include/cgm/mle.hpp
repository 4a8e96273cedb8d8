#pragma once

#include <cstdint>
#include <vector>

#include "cgm/moebius.hpp"

namespace cgm {

// Multinomial log-likelihood sum n(i) log p(i); -inf when a cell with
// positive count has zero probability.
double loglik(const JointTable& p, const CountTable& counts);

// Identifies components with closed-form maximum likelihood estimates:
// complete components without parents (empirical marginal proportions) and
// singleton components (empirical proportions conditional on the vertex's
// own parents). Returns component indices.
std::vector<int> closed_form_components(const ChainGraph& g);

struct FitOptions {
  int starts = 5;
  std::uint64_t seed = 0;
  double grad_tol = 1e-8;  // convergence: per-observation gradient max-norm below this...
  double rel_tol = 1e-12;  // ...or relative log-likelihood change below this
  int max_iter = 10000;
  int threads = 1;  // components are maximized concurrently when > 1
};

struct ComponentFit {
  VertexSet component;
  bool closed_form = false;
  bool converged = false;
  int iterations = 0;
  double final_gradient_norm = 0.0;  // per-observation gradient max-norm
  int starts_used = 0;
  double loglik_spread = 0.0;  // best minus worst over the starts
  double loglik = 0.0;         // component block of the log-likelihood
  // Parent states with zero margin count leave parameters unidentified;
  // those were reset to independence values (flagged by parent state index).
  std::vector<std::size_t> unidentified_pa_states;
};

struct FitResult {
  JointTable p_hat;
  MoebiusParams q_hat;
  double loglik = 0.0;
  std::size_t dim = 0;
  double bic = 0.0;
  std::vector<ComponentFit> per_component;
};

FitResult fit(const ChainGraph& g, const CountTable& counts, const FitOptions& options = {});

// One component's maximization, exposed for diagnostics and tests: returns
// the fitted free parameters (aligned with the model's blocks for comp) and
// the conditional tables per parent state.
struct ComponentFitDetail {
  ComponentFit info;
  std::vector<double> values;  // full parameter vector with this component fitted
  std::vector<JointTable> conditionals;
};
ComponentFitDetail fit_component(const MoebiusModel& model, int comp, const CountTable& counts,
                                 const FitOptions& options = {});

// Component block of the log-likelihood: sum over cells of n(i_tau, i_pa)
// log p(i_tau | i_pa), evaluated at the parameter vector. -inf when some
// conditional cell is not strictly positive. When grad is non-null it
// receives d loglik / d values (full parameter-vector length; entries
// outside the component are zero).
double component_loglik(const MoebiusModel& model, int comp, const CountTable& counts,
                        std::span<const double> values, std::vector<double>* grad = nullptr);

double bic(const FitResult& r, const CountTable& counts);

struct LrtResult {
  double statistic = 0.0;
  int df = 0;
};
// 2 (l_alt - l_null) with df = dim_alt - dim_null; a statistic below -1e-8
// signals an optimization failure and is an error.
LrtResult lrt(const FitResult& null_fit, const FitResult& alt_fit);

}  // namespace cgm
