#include <array>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cgm/error.hpp"
#include "cgm/graph.hpp"
#include "cgm/markov.hpp"
#include "cgm/mle.hpp"
#include "cgm/moebius.hpp"
#include "cgm/probes.hpp"
#include "cgm/rng.hpp"
#include "cgm/table.hpp"

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json to_json(const cgm::VertexSet& s) {
  ordered_json a = ordered_json::array();
  for (int v : s) a.push_back(v);
  return a;
}

ordered_json to_json(const cgm::CiStatement& s) {
  ordered_json j;
  j["alpha"] = to_json(s.alpha);
  j["beta"] = to_json(s.beta);
  j["gamma"] = to_json(s.gamma);
  j["text"] = s.to_string();
  j["sources"] = s.sources;
  return j;
}

ordered_json report_shell() {
  ordered_json j;
  j["schema"] = "1";
  return j;
}

void emit(const ordered_json& j, const std::string& output_path) {
  std::string text = j.dump(2);
  std::cout << text << "\n";
  if (!output_path.empty()) {
    std::ofstream out(output_path);
    if (!out) throw cgm::DomainError("cli", "io_error", "cannot write " + output_path);
    out << text << "\n";
  }
}

ordered_json params_json(const cgm::ChainGraph& g, const cgm::MoebiusParams& params) {
  return ordered_json::parse(cgm::params_to_json(g, params))["parameters"];
}

ordered_json graph_summary(const cgm::ChainGraph& g) {
  ordered_json j;
  j["vertices"] = to_json(g.vertices());
  ordered_json levels;
  for (int v : g.vertices()) levels[std::to_string(v)] = g.level(v);
  j["levels"] = levels;
  cgm::ComponentDag dag = cgm::chain_components(g);
  ordered_json comps = ordered_json::array();
  for (const auto& c : dag.components()) comps.push_back(to_json(c));
  j["components"] = comps;
  ordered_json edges = ordered_json::array();
  for (const auto& [a, b] : dag.edges()) edges.push_back(ordered_json::array({a, b}));
  j["component_dag_edges"] = edges;
  j["topological_order"] = dag.topological_order();
  return j;
}

int run(int argc, char** argv) {
  CLI::App app{"discrete chain graph models: analysis, fitting, case-study probes"};
  app.require_subcommand(1);
  std::string output_path;
  app.add_option("--output", output_path, "also write the JSON report to this file");

  // validate
  auto* validate = app.add_subcommand("validate", "parse a graph file and report its structure");
  std::string v_graph;
  validate->add_option("graph", v_graph, "graph file")->required();

  // ci
  auto* ci = app.add_subcommand("ci", "list the Markov-property statements of a graph");
  std::string ci_graph, ci_type = "IV";
  bool ci_no_reduce = false;
  int ci_cap = 16;
  ci->add_option("graph", ci_graph, "graph file")->required();
  ci->add_option("--type", ci_type, "Markov property type: I, II, III or IV")->required();
  ci->add_flag("--no-reduce", ci_no_reduce, "keep statements implied by stronger ones");
  ci->add_option("--cap", ci_cap, "largest component size for subset enumeration");

  // dim
  auto* dim = app.add_subcommand("dim", "model dimension and parameter blocks");
  std::string dim_graph;
  dim->add_option("graph", dim_graph, "graph file")->required();

  // fit
  auto* fit = app.add_subcommand("fit", "maximum-likelihood fit from a counts CSV");
  std::string fit_graph, fit_counts, fit_table_out;
  cgm::FitOptions fit_opts;
  fit->add_option("graph", fit_graph, "graph file")->required();
  fit->add_option("counts", fit_counts, "counts CSV")->required();
  fit->add_option("--starts", fit_opts.starts, "optimizer starts per component");
  fit->add_option("--seed", fit_opts.seed, "seed for the extra starts");
  fit->add_option("--tol", fit_opts.grad_tol, "per-observation gradient tolerance");
  fit->add_option("--threads", fit_opts.threads, "fit components concurrently");
  fit->add_option("--table-out", fit_table_out, "write the fitted table as probability CSV");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "sample a model point and draw counts from it");
  std::string sim_graph, sim_table_out;
  std::int64_t sim_n = 0;
  std::uint64_t sim_seed = 0;
  simulate->add_option("graph", sim_graph, "graph file")->required();
  simulate->add_option("--n", sim_n, "sample size")->required()->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim_seed, "random seed")->required();
  simulate->add_option("--table-out", sim_table_out, "write the drawn counts as CSV");

  // check-membership
  auto* membership = app.add_subcommand("check-membership",
                                        "test whether a table obeys a graph's Markov property");
  std::string mem_graph, mem_table, mem_type = "IV";
  double mem_tol = cgm::kCiTol;
  membership->add_option("graph", mem_graph, "graph file")->required();
  membership->add_option("table", mem_table, "probability or counts CSV")->required();
  membership->add_option("--type", mem_type, "Markov property type: I, II, III or IV");
  membership->add_option("--tol", mem_tol, "residual tolerance");

  // probe
  auto* probe = app.add_subcommand("probe", "case-study probes for the two four-variable graphs");
  probe->require_subcommand(1);
  auto* prop14 = probe->add_subcommand("prop14", "rank-one membership test in the completed model");
  std::string p14_table;
  double p14_tol = cgm::kCiTol, p14_rank_tol = 1e-8;
  prop14->add_option("table", p14_table, "probability or counts CSV")->required();
  prop14->add_option("--tol", p14_tol, "model precondition tolerance");
  prop14->add_option("--rank-tol", p14_rank_tol, "relative singular value threshold");

  auto* prop17 = probe->add_subcommand("prop17", "two-condition type III classification");
  std::string p17_table;
  double p17_tol = cgm::kCiTol;
  bool p17_exact = false;
  prop17->add_option("table", p17_table, "probability or counts CSV")->required();
  prop17->add_option("--tol", p17_tol, "residual tolerance");
  prop17->add_flag("--exact", p17_exact, "exact integer arithmetic (requires a counts CSV)");

  auto* locus = probe->add_subcommand("locus58", "singular-locus membership of the coordinates");
  std::string loc_table;
  double loc_tol = 1e-9;
  locus->add_option("table", loc_table, "probability or counts CSV")->required();
  locus->add_option("--tol", loc_tol, "residual tolerance");

  auto* smooth = probe->add_subcommand("smoothness", "Jacobian rank of the defining equations");
  std::string smo_table;
  double smo_step = 1e-6, smo_rank_tol = 1e-7;
  smooth->add_option("table", smo_table, "probability or counts CSV")->required();
  smooth->add_option("--step", smo_step, "finite difference step");
  smooth->add_option("--rank-tol", smo_rank_tol, "relative singular value threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*validate) {
      cgm::ChainGraph g = cgm::ChainGraph::load(v_graph);
      ordered_json j = report_shell();
      j["valid"] = true;
      j.update(graph_summary(g));
      emit(j, output_path);
    } else if (*ci) {
      cgm::ChainGraph g = cgm::ChainGraph::load(ci_graph);
      cgm::MarkovType type = cgm::markov_type_from_string(ci_type);
      auto statements = cgm::statements(g, type, !ci_no_reduce, ci_cap);
      ordered_json j = report_shell();
      j["type"] = cgm::to_string(type);
      j["reduced"] = !ci_no_reduce;
      ordered_json arr = ordered_json::array();
      for (const auto& s : statements) arr.push_back(to_json(s));
      j["statements"] = arr;
      emit(j, output_path);
    } else if (*dim) {
      cgm::ChainGraph g = cgm::ChainGraph::load(dim_graph);
      cgm::MoebiusModel model(g);
      ordered_json j = report_shell();
      j["dimension"] = model.dim();
      ordered_json blocks = ordered_json::array();
      for (const auto& b : model.blocks()) {
        ordered_json jb;
        jb["component"] = to_json(model.dag().components()[static_cast<std::size_t>(b.component)]);
        jb["gamma"] = to_json(b.gamma);
        jb["pa"] = to_json(b.pa);
        jb["free_values"] = b.j_size * b.pa_size;
        blocks.push_back(jb);
      }
      j["blocks"] = blocks;
      emit(j, output_path);
    } else if (*fit) {
      cgm::ChainGraph g = cgm::ChainGraph::load(fit_graph);
      cgm::CountTable counts = cgm::load_counts_csv(fit_counts, g);
      cgm::FitResult r = cgm::fit(g, counts, fit_opts);
      ordered_json j = report_shell();
      j["n"] = counts.total();
      j["loglik"] = r.loglik;
      j["dim"] = r.dim;
      j["bic"] = r.bic;
      ordered_json pcs = ordered_json::array();
      for (const auto& c : r.per_component) {
        ordered_json jc;
        jc["component"] = to_json(c.component);
        jc["closed_form"] = c.closed_form;
        jc["converged"] = c.converged;
        jc["iterations"] = c.iterations;
        jc["final_gradient_norm"] = c.final_gradient_norm;
        jc["starts_used"] = c.starts_used;
        jc["loglik_spread"] = c.loglik_spread;
        jc["loglik"] = c.loglik;
        jc["unidentified_pa_states"] = c.unidentified_pa_states;
        pcs.push_back(jc);
      }
      j["per_component"] = pcs;
      j["parameters"] = params_json(g, r.q_hat);
      if (!fit_table_out.empty()) {
        std::ofstream out(fit_table_out);
        if (!out) throw cgm::DomainError("cli", "io_error", "cannot write " + fit_table_out);
        out << cgm::to_prob_csv(r.p_hat);
      }
      emit(j, output_path);
    } else if (*simulate) {
      cgm::ChainGraph g = cgm::ChainGraph::load(sim_graph);
      cgm::ModelPoint point = cgm::sample_model_point(g, sim_seed);
      std::uint64_t draw_seed = cgm::detail::splitmix64(sim_seed ^ cgm::detail::splitmix64(1));
      cgm::CountTable counts = cgm::simulate_counts(point.joint, sim_n, draw_seed);
      ordered_json j = report_shell();
      j["n"] = sim_n;
      j["seed"] = sim_seed;
      j["attempts"] = point.attempts;
      j["parameters"] = params_json(g, point.params);
      j["counts_csv"] = cgm::to_counts_csv(counts);
      if (!sim_table_out.empty()) {
        std::ofstream out(sim_table_out);
        if (!out) throw cgm::DomainError("cli", "io_error", "cannot write " + sim_table_out);
        out << cgm::to_counts_csv(counts);
      }
      emit(j, output_path);
    } else if (*membership) {
      cgm::ChainGraph g = cgm::ChainGraph::load(mem_graph);
      cgm::JointTable p = cgm::load_table_csv(mem_table, g);
      cgm::MarkovType type = cgm::markov_type_from_string(mem_type);
      cgm::MarkovReport rep = cgm::obeys_markov(p, g, type, mem_tol);
      ordered_json j = report_shell();
      j["type"] = cgm::to_string(type);
      j["tol"] = mem_tol;
      bool member = rep.all_pass;
      ordered_json stmts = ordered_json::array();
      for (const auto& e : rep.entries) {
        ordered_json je = to_json(e.statement);
        je["residual"] = e.residual;
        je["pass"] = e.pass;
        stmts.push_back(je);
      }
      j["statements"] = stmts;
      j["max_residual"] = rep.max_residual;
      if (type == cgm::MarkovType::IV) {
        cgm::Theorem8Report t8 = cgm::check_theorem8(p, g, mem_tol);
        ordered_json jt;
        jt["factorization_residual"] = t8.factorization_residual;
        jt["max_product_residual"] = t8.max_product_residual;
        jt["max_invariance_residual"] = t8.max_invariance_residual;
        jt["member"] = t8.member();
        j["parameter_check"] = jt;
        member = member && t8.member();
      }
      j["member"] = member;
      emit(j, output_path);
    } else if (*prop14) {
      cgm::JointTable p = cgm::load_table_csv(p14_table);
      auto matrices = cgm::build_q_matrices(p, p14_tol);
      bool member = cgm::prop14_member(p, p14_tol, p14_rank_tol);
      ordered_json j = report_shell();
      j["member"] = member;
      ordered_json arr = ordered_json::array();
      for (const auto& qm : matrices) {
        ordered_json jm;
        jm["i1"] = qm.i1;
        jm["i3"] = qm.i3;
        ordered_json rows = ordered_json::array();
        for (Eigen::Index r = 0; r < qm.entries.rows(); ++r) {
          ordered_json row = ordered_json::array();
          for (Eigen::Index c = 0; c < qm.entries.cols(); ++c) row.push_back(qm.entries(r, c));
          rows.push_back(row);
        }
        jm["entries"] = rows;
        arr.push_back(jm);
      }
      j["matrices"] = arr;
      emit(j, output_path);
    } else if (*prop17) {
      ordered_json j = report_shell();
      if (p17_exact) {
        cgm::CountTable counts = cgm::load_counts_csv(p17_table);
        if (counts.vars() != cgm::make_set({1, 2, 3, 4}) ||
            counts.levels() != std::vector<int>{2, 2, 2, 2})
          throw cgm::DomainError("cli", "bad_table", "exact mode needs binary counts over {1,2,3,4}");
        std::array<std::int64_t, 16> cells{};
        for (std::size_t i = 0; i < 16; ++i) cells[i] = counts.counts()[i];
        cgm::Prop17Exact rep = cgm::prop17_exact(cells);
        j["exact"] = true;
        j["cond_i"] = rep.cond_i;
        j["cond_ii"] = rep.cond_ii;
        j["member"] = rep.member();
        j["ci_1_rest"] = rep.ci_1_rest;
        j["ci_2_14"] = rep.ci_2_14;
        j["ci_24_given_1"] = rep.ci_24_g1;
        j["ci_1_24_given_3"] = rep.ci_1_24_g3;
        j["minors_a"] = rep.minors_a;
        j["minors_b"] = rep.minors_b;
      } else {
        cgm::JointTable p = cgm::load_table_csv(p17_table);
        cgm::Prop17Report rep = cgm::prop17_classify(p, p17_tol);
        j["exact"] = false;
        j["cond_i"] = rep.cond_i;
        j["cond_ii"] = rep.cond_ii;
        j["member"] = rep.member();
        j["residuals"] = {{"ci_1_rest", rep.r_1_rest},
                          {"ci_2_14", rep.r_2_14},
                          {"ci_24_given_1", rep.r_24_g1},
                          {"ci_1_24_given_3", rep.r_1_24_g3},
                          {"minors_a", rep.r_minors_a},
                          {"minors_b", rep.r_minors_b}};
      }
      emit(j, output_path);
    } else if (*locus) {
      cgm::JointTable p = cgm::load_table_csv(loc_table);
      std::vector<double> coords = cgm::binary_coords(p);
      ordered_json j = report_shell();
      ordered_json jc;
      for (std::size_t i = 0; i < coords.size(); ++i)
        jc[cgm::kBinaryCoordLabels[i]] = coords[i];
      j["coords"] = jc;
      j["equation_residuals"] = cgm::binary_equations_5_6_7(coords);
      j["locus_residuals"] = cgm::singular_locus_residuals(coords);
      j["on_locus"] = cgm::singular_locus_5_8(coords, loc_tol);
      j["tol"] = loc_tol;
      emit(j, output_path);
    } else if (*smooth) {
      cgm::JointTable p = cgm::load_table_csv(smo_table);
      std::vector<double> coords = cgm::binary_coords(p);
      cgm::ConstraintSystem sys = cgm::system_5_6_7();
      cgm::SmoothnessReport rep = cgm::smoothness_probe(sys, coords, smo_step, smo_rank_tol);
      ordered_json j = report_shell();
      j["rank"] = rep.rank;
      j["singular_values"] = rep.singular_values;
      j["residuals"] = cgm::binary_equations_5_6_7(coords);
      emit(j, output_path);
    }
  } catch (const cgm::DomainError& e) {
    ordered_json j = report_shell();
    j["error"] = {{"module", e.module()}, {"code", e.code()}, {"message", e.what()}};
    std::cout << j.dump(2) << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
