#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cgm/markov.hpp"
#include "cgm/table.hpp"

namespace cgm {

// Case-study probes for the two four-variable chain graphs whose binary
// models are non-smooth: the anchored path 1 -> 3, 2 -- 3 -- 4 (called G
// below) and its completion G-bar with the extra edge 2 -- 4.

// One d2 x d4 block of the rank test: rows follow the state of X2, columns
// the state of X4. For i3 below the top level the entries are conditional
// mean parameters q(.|i1); at the top level they are the complementary
// differences with "+" denoting summation over the non-top states of X3.
struct QMatrix {
  int i1 = 0;
  int i3 = 0;
  Eigen::MatrixXd entries;
};

// All d1*d3 blocks for a table over vertices {1,2,3,4} (any levels) that
// lies in the completed model, i.e. satisfies 1 _||_ {2,4} within ci_tol
// (error "not_in_model" otherwise).
std::vector<QMatrix> build_q_matrices(const JointTable& p, double ci_tol = kCiTol);

// Membership in the type II model of G for a member of the completed model:
// every QMatrix block has numeric rank <= 1 (second singular value below
// rank_tol times the largest).
bool prop14_member(const JointTable& p, double ci_tol = kCiTol, double rank_tol = 1e-8);

// The eleven binary coordinates (q_2, q_4, q_24, then q_3|i, q_23|i,
// q_34|i, q_234|i for i = 1, 2), where q_A|i is the probability that the
// variables of A are all in state 1 given X1 = i, and q_2, q_4, q_24 are the
// corresponding unconditional probabilities.
extern const std::array<const char*, 11> kBinaryCoordLabels;
std::vector<double> binary_coords(const JointTable& p);

// Residuals of the four defining equations of the binary type II model:
// [q_23|i q_34|i - q_3|i q_234|i] for i = 1, 2, then
// [q_3|i q_24 - q_23|i q_4 - q_34|i q_2 + q_234|i - (q_24 - q_2 q_4)].
std::vector<double> binary_equations_5_6_7(std::span<const double> coords);

// Residuals of the seven equations cutting out the singular locus:
// q_2 q_4 - q_24, then per i = 1, 2 the triple (q_3|i q_2 - q_23|i,
// q_3|i q_4 - q_34|i, q_2 q_3|i q_4 - q_234|i).
std::vector<double> singular_locus_residuals(std::span<const double> coords);
bool singular_locus_5_8(std::span<const double> coords, double tol = 1e-9);

// A polynomial residual system over a labelled coordinate space.
struct ConstraintSystem {
  std::size_t dim = 0;
  std::vector<std::string> labels;  // one per coordinate
  std::function<std::vector<double>(std::span<const double>)> residuals;
};

// The four-equation system above as a ConstraintSystem over the eleven
// binary coordinates.
ConstraintSystem system_5_6_7();

// Linear system expressing the parameter-invariance requirement for one
// chain component: coordinates are the per-parent-state transformed tensors
// stacked (parent states outer, tensor cells inner), and each residual
// equates a tensor entry with its representative among the parent states
// that agree on the parents of the entry's subset.
ConstraintSystem invariance_system(const ChainGraph& g, int comp);

struct SmoothnessReport {
  Eigen::MatrixXd jacobian;  // residuals x coordinates
  std::vector<double> singular_values;
  int rank = 0;
};

// Central-difference Jacobian of sys at a point on the variety (largest
// residual must be <= 1e-8, error "off_variety" otherwise); rank counts
// singular values above rank_tol times the largest.
SmoothnessReport smoothness_probe(const ConstraintSystem& sys, std::span<const double> point,
                                  double step = 1e-6, double rank_tol = 1e-7);

// Two-condition classification of binary tables over {1,2,3,4} against the
// type III model of G: cond_i is marginal independence of X1 from the rest
// together with 2 _||_ {1,4}; cond_ii is the conditional pair 2 _||_ 4 | 1
// and 1 _||_ {2,4} | 3 plus two equalities of 2x2 minors. Membership in the
// type III model equals cond_i OR cond_ii.
struct Prop17Report {
  bool cond_i = false;
  bool cond_ii = false;
  double r_1_rest = 0.0;   // 1 _||_ {2,3,4}
  double r_2_14 = 0.0;     // 2 _||_ {1,4}
  double r_24_g1 = 0.0;    // 2 _||_ 4 | 1
  double r_1_24_g3 = 0.0;  // 1 _||_ {2,4} | 3
  double r_minors_a = 0.0;
  double r_minors_b = 0.0;
  bool member() const { return cond_i || cond_ii; }
};
Prop17Report prop17_classify(const JointTable& p, double tol = kCiTol);

// Same classification in exact integer arithmetic on integer cell weights
// (the common denominator cancels from every test).
struct Prop17Exact {
  bool cond_i = false;
  bool cond_ii = false;
  bool ci_1_rest = false;
  bool ci_2_14 = false;
  bool ci_24_g1 = false;
  bool ci_1_24_g3 = false;
  std::int64_t minors_a = 0;  // lhs - rhs of the first minor equality
  std::int64_t minors_b = 0;
  bool member() const { return cond_i || cond_ii; }
};
Prop17Exact prop17_exact(const std::array<std::int64_t, 16>& cells);

// Cross-validation of the classification against the direct rank check of
// the two defining statements 2 _||_ 4 | 1 and 1 _||_ {2,4} | 3.
struct TypeIiiVerdict {
  bool classified = false;  // cond_i OR cond_ii
  bool direct = false;      // both defining statements hold (rank tests)
  Prop17Report report;
};
TypeIiiVerdict membership_type_iii_binary(const JointTable& p, double tol = kCiTol);

// Single multiplicative adjustment making alpha _||_ beta | gamma hold while
// preserving the gamma-margin and all conditionals outside alpha x beta.
JointTable project_ci(const JointTable& p, const CiStatement& s);

// Cyclic projection onto a set of conditional independences, started from a
// random positive table: sweeps until the largest residual is below tol
// (error "projection_failed" after max_sweeps).
JointTable sample_ci_member(const VertexSet& vars, const std::vector<int>& levels,
                            const std::vector<CiStatement>& statements, std::uint64_t seed,
                            double tol = 1e-10, int max_sweeps = 10000);

}  // namespace cgm
