#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cgm/graph.hpp"
#include "cgm/table.hpp"

namespace cgm {

// Saturated mean parameters of a conditional distribution over tau: one value
// q(j_sigma) = P(X_sigma = j_sigma | context) for every subset sigma of tau
// and every j_sigma with all coordinates below the top level. Stored as a
// tensor over levels (d_v per axis) in which digit d_v means "v summed out";
// the all-summed-out cell is 1. The map to and from the conditional cell
// probabilities is linear, triangular per axis, and applied axis-wise.
struct SaturatedMoebius {
  VertexSet tau;
  std::vector<int> levels;
  std::vector<double> q;

  // q(j_sigma); j has one 1-based entry per vertex of sigma.
  double entry(const VertexSet& sigma, std::span<const int> j) const;
};

SaturatedMoebius saturated_from_conditional(const JointTable& cond);
// Inverts the transform; errors ("outside_parameter_region") when some
// reconstructed probability is not strictly positive, naming the cell.
JointTable conditional_from_saturated(const SaturatedMoebius& m);

// One free parameter block of the graph parametrization: the values
// q_gamma(j_gamma | i_pa) for a connected subset gamma of a chain component,
// indexed by the state of pa(gamma) and by j_gamma.
struct ParamBlock {
  int component;            // component index in the ComponentDag
  VertexSet gamma;          // connected subset, sorted
  VertexSet pa;             // pa(gamma), sorted
  std::vector<int> j_dims;  // d_v - 1 per vertex of gamma
  std::vector<int> pa_dims; // d_w per vertex of pa
  std::size_t offset;       // into the flat value vector
  std::size_t j_size;
  std::size_t pa_size;
};

// Parameter layout plus the machinery to evaluate the parametrization:
// assemble each component's saturated tensor from the blocks (products over
// the maximal connected partition for disconnected subsets), invert, and
// chain the conditionals along the component DAG.
class MoebiusModel {
 public:
  explicit MoebiusModel(const ChainGraph& g, int cap = 16);

  const ChainGraph& graph() const { return graph_; }
  const ComponentDag& dag() const { return dag_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  std::size_t dim() const { return dim_; }

  std::vector<double> independence_point() const;
  // Values from a positive joint table: q_gamma(j | i_pa) read off marginals.
  std::vector<double> extract(const JointTable& p) const;

  JointTable to_joint(std::span<const double> values) const;
  // Conditional tables of one component, one per parent state (last parent
  // vertex fastest); used by the fitter.
  std::vector<JointTable> component_conditionals(int comp, std::span<const double> values) const;

  struct Sample {
    std::vector<double> values;
    JointTable joint;
    int attempts;  // total inversion attempts over all components
  };
  Sample sample(std::uint64_t seed) const;

  int block_index(int comp, const VertexSet& gamma) const;
  const std::vector<int>& component_blocks(int comp) const { return comp_blocks_[comp]; }
  std::pair<std::size_t, std::size_t> component_range(int comp) const;  // [offset, size)

 private:
  friend struct ComponentWork;
  ChainGraph graph_;
  ComponentDag dag_;
  std::vector<ParamBlock> blocks_;
  std::vector<std::vector<int>> comp_blocks_;
  std::size_t dim_ = 0;

  struct CellTerm {
    int block;           // index into blocks_
    std::size_t j_index; // offset within the block's j range
  };
  struct ComponentLayout {
    VertexSet tau;
    std::vector<int> tau_levels;
    VertexSet pa;                  // pa_D(tau)
    std::vector<int> pa_levels;
    std::vector<std::vector<CellTerm>> cell_terms;   // per tensor cell
    std::vector<std::vector<std::size_t>> block_pa;  // [local block][pa state] -> pa index of block
  };
  std::vector<ComponentLayout> layouts_;

  void fill_tensor(int comp, std::span<const double> values, std::size_t pa_state,
                   std::vector<double>& tensor) const;
};

struct MoebiusParams {
  // Flat values aligned with MoebiusModel::blocks() of the same graph.
  std::vector<double> values;
};

std::size_t model_dimension(const ChainGraph& g, int cap = 16);

JointTable to_joint(const ChainGraph& g, const MoebiusParams& params);
MoebiusParams params_from_joint(const ChainGraph& g, const JointTable& p);

struct ModelPoint {
  MoebiusParams params;
  JointTable joint;
  int attempts;
};
ModelPoint sample_model_point(const ChainGraph& g, std::uint64_t seed);

// Membership test for a positive joint table: (i) the table factorizes along
// the component DAG; (ii) for every component, parent state, and disconnected
// subset, the saturated parameter is the product over the maximal connected
// partition; (iii) saturated parameters of a subset depend on the parent
// state only through pa(sigma). Residuals are reported per constraint.
struct Theorem8Report {
  struct ProductConstraint {
    VertexSet tau, delta;
    std::vector<int> j;
    std::vector<int> pa_state;
    double residual;
  };
  struct InvarianceConstraint {
    VertexSet tau, sigma;
    std::vector<int> j;
    double spread;  // max - min across parent states that agree on pa(sigma)
  };
  double factorization_residual = 0.0;
  std::vector<ProductConstraint> products;
  std::vector<InvarianceConstraint> invariances;
  double max_product_residual = 0.0;
  double max_invariance_residual = 0.0;
  bool factorization_ok = false, products_ok = false, invariances_ok = false;
  bool member() const { return factorization_ok && products_ok && invariances_ok; }
};
Theorem8Report check_theorem8(const JointTable& p, const ChainGraph& g, double tol = kCiTol);

// Finite-difference Jacobian of the parametrization (cells x dim, central
// differences) and its numeric rank (singular values below rel_tol times the
// largest are treated as zero).
std::vector<std::vector<double>> parametrization_jacobian(const ChainGraph& g,
                                                          const MoebiusParams& params,
                                                          double step = 1e-6);
int jacobian_rank(const std::vector<std::vector<double>>& jac, double rel_tol = 1e-7);

std::string params_to_json(const ChainGraph& g, const MoebiusParams& params);
MoebiusParams params_from_json(const ChainGraph& g, const std::string& json_text);

// Product assembly p(i) = prod_tau p(i_tau | i_pa) from per-parent-state
// component conditionals (parent states indexed with the last vertex fastest).
JointTable joint_from_conditionals(const ChainGraph& g, const ComponentDag& dag,
                                   const std::vector<std::vector<JointTable>>& conds);

namespace detail {
// The per-axis triangular factors of the saturated transform and the adjoint
// of the inverse, applied in place to a tensor with the given dims.
void forward_axis(std::vector<double>& t, std::span<const int> dims, int axis);
void inverse_axis(std::vector<double>& t, std::span<const int> dims, int axis);
void inverse_axis_adjoint(std::vector<double>& t, std::span<const int> dims, int axis);
}  // namespace detail

}  // namespace cgm
