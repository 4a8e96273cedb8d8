// Python bindings for the chain graph model library: graphs, Markov
// statement generation, tables, the model parametrization, fitting, and the
// case-study probes. Structured results are returned as plain dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cgm/error.hpp"
#include "cgm/graph.hpp"
#include "cgm/markov.hpp"
#include "cgm/mle.hpp"
#include "cgm/moebius.hpp"
#include "cgm/probes.hpp"
#include "cgm/table.hpp"

namespace py = pybind11;
using namespace cgm;

namespace {

MarkovType parse_type(const std::string& type) { return markov_type_from_string(type); }

py::dict markov_report_dict(const MarkovReport& rep) {
  py::list entries;
  for (const auto& e : rep.entries) {
    py::dict d;
    d["statement"] = e.statement.to_string();
    d["residual"] = e.residual;
    d["pass"] = e.pass;
    entries.append(d);
  }
  py::dict out;
  out["entries"] = entries;
  out["all_pass"] = rep.all_pass;
  out["max_residual"] = rep.max_residual;
  return out;
}

py::dict theorem8_dict(const Theorem8Report& rep) {
  py::dict out;
  out["factorization_residual"] = rep.factorization_residual;
  out["max_product_residual"] = rep.max_product_residual;
  out["max_invariance_residual"] = rep.max_invariance_residual;
  out["factorization_ok"] = rep.factorization_ok;
  out["products_ok"] = rep.products_ok;
  out["invariances_ok"] = rep.invariances_ok;
  out["member"] = rep.member();
  return out;
}

py::dict fit_dict(const FitResult& r) {
  py::dict out;
  out["p_hat"] = r.p_hat;
  out["params"] = r.q_hat.values;
  out["loglik"] = r.loglik;
  out["dim"] = r.dim;
  out["bic"] = r.bic;
  py::list comps;
  for (const auto& c : r.per_component) {
    py::dict d;
    d["component"] = c.component;
    d["closed_form"] = c.closed_form;
    d["converged"] = c.converged;
    d["iterations"] = c.iterations;
    d["final_gradient_norm"] = c.final_gradient_norm;
    d["starts_used"] = c.starts_used;
    d["loglik_spread"] = c.loglik_spread;
    d["loglik"] = c.loglik;
    d["unidentified_pa_states"] = c.unidentified_pa_states;
    comps.append(d);
  }
  out["per_component"] = comps;
  return out;
}

std::vector<CiStatement> statements_from_triples(
    const std::vector<std::tuple<VertexSet, VertexSet, VertexSet>>& triples) {
  std::vector<CiStatement> out;
  out.reserve(triples.size());
  for (const auto& [alpha, beta, gamma] : triples)
    out.push_back(make_statement(alpha, beta, gamma));
  return out;
}

}  // namespace

PYBIND11_MODULE(cgmodels, m) {
  m.doc() = "Discrete chain graph models: Markov statements, parametrization, "
            "maximum likelihood, and case-study probes";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  py::class_<ChainGraph>(m, "Graph")
      .def_static("parse", &ChainGraph::parse, py::arg("text"),
                  "Parse a graph from text: one 'v -> w' or 'v -- w' edge per "
                  "line, optional 'states v=d ...' line, '#' comments.")
      .def_static("load", &ChainGraph::load, py::arg("path"))
      .def_property_readonly("vertices", &ChainGraph::vertices)
      .def("level", &ChainGraph::level, py::arg("v"))
      .def("parents", &ChainGraph::parents, py::arg("v"))
      .def("neighbors", &ChainGraph::neighbors, py::arg("v"))
      .def(
          "components",
          [](const ChainGraph& g) { return chain_components(g).components(); },
          "Chain components in topological order.")
      .def(
          "component_dag_edges",
          [](const ChainGraph& g) { return chain_components(g).edges(); },
          "Edges of the component DAG as index pairs into components().")
      .def("__repr__", [](const ChainGraph& g) {
        return "<cgmodels.Graph with " + std::to_string(g.vertices().size()) + " vertices>";
      });

  py::class_<CiStatement>(m, "Statement")
      .def_property_readonly("alpha", [](const CiStatement& s) { return s.alpha; })
      .def_property_readonly("beta", [](const CiStatement& s) { return s.beta; })
      .def_property_readonly("gamma", [](const CiStatement& s) { return s.gamma; })
      .def("__str__", &CiStatement::to_string)
      .def("__repr__", [](const CiStatement& s) { return "<" + s.to_string() + ">"; });

  m.def(
      "make_statement",
      [](const VertexSet& alpha, const VertexSet& beta, const VertexSet& gamma) {
        return make_statement(alpha, beta, gamma);
      },
      py::arg("alpha"), py::arg("beta"), py::arg("gamma"));

  m.def(
      "statements",
      [](const ChainGraph& g, const std::string& type, bool reduce, int cap) {
        return statements(g, parse_type(type), reduce, cap);
      },
      py::arg("graph"), py::arg("type"), py::arg("reduce") = true, py::arg("cap") = 16,
      "Defining conditional independence statements for one of the Markov "
      "family types 'I', 'II', 'III', 'IV'.");

  py::class_<JointTable>(m, "Table")
      .def(py::init<VertexSet, std::vector<int>, std::vector<double>>(), py::arg("vars"),
           py::arg("levels"), py::arg("probs"))
      .def_static("uniform", &JointTable::uniform, py::arg("vars"), py::arg("levels"))
      .def_static(
          "from_csv",
          [](const std::string& path) { return load_table_csv(path); },
          py::arg("path"))
      .def_property_readonly("vars", &JointTable::vars)
      .def_property_readonly("levels", &JointTable::levels)
      .def_property_readonly("probs", &JointTable::probs)
      .def("at",
           [](const JointTable& p, const std::vector<int>& state) {
             return p.at(std::span<const int>(state));
           })
      .def("min_prob", &JointTable::min_prob)
      .def("to_csv", [](const JointTable& p) { return to_prob_csv(p); })
      .def("__len__", &JointTable::size)
      .def("__repr__", [](const JointTable& p) {
        return "<cgmodels.Table over " + std::to_string(p.vars().size()) + " variables, " +
               std::to_string(p.size()) + " cells>";
      });

  py::class_<CountTable>(m, "Counts")
      .def(py::init<VertexSet, std::vector<int>, std::vector<std::int64_t>>(), py::arg("vars"),
           py::arg("levels"), py::arg("counts"))
      .def_static(
          "from_csv",
          [](const std::string& path) { return load_counts_csv(path); },
          py::arg("path"))
      .def_property_readonly("vars", &CountTable::vars)
      .def_property_readonly("levels", &CountTable::levels)
      .def_property_readonly("counts", &CountTable::counts)
      .def_property_readonly("total", &CountTable::total)
      .def("to_prob", &CountTable::to_prob)
      .def("to_csv", [](const CountTable& c) { return to_counts_csv(c); })
      .def("__repr__", [](const CountTable& c) {
        return "<cgmodels.Counts over " + std::to_string(c.vars().size()) + " variables, n=" +
               std::to_string(c.total()) + ">";
      });

  m.def("marginal", &marginal, py::arg("table"), py::arg("vars"));
  m.def(
      "conditional",
      [](const JointTable& p, const VertexSet& target, const VertexSet& given,
         const std::vector<int>& given_state) {
        return conditional(p, target, given, std::span<const int>(given_state));
      },
      py::arg("table"), py::arg("target"), py::arg("given"), py::arg("given_state"));
  m.def("ci_residual", &ci_residual, py::arg("table"), py::arg("statement"));
  m.def("ci_holds", &ci_holds, py::arg("table"), py::arg("statement"), py::arg("tol") = kCiTol);
  m.def(
      "obeys_markov",
      [](const JointTable& p, const ChainGraph& g, const std::string& type, double tol) {
        return markov_report_dict(obeys_markov(p, g, parse_type(type), tol));
      },
      py::arg("table"), py::arg("graph"), py::arg("type") = "IV", py::arg("tol") = kCiTol);
  m.def("simulate_counts", &simulate_counts, py::arg("table"), py::arg("n"), py::arg("seed"));

  m.def(
      "model_dimension", [](const ChainGraph& g) { return model_dimension(g); },
      py::arg("graph"));
  m.def(
      "sample_model_point",
      [](const ChainGraph& g, std::uint64_t seed) {
        ModelPoint pt = sample_model_point(g, seed);
        py::dict out;
        out["params"] = pt.params.values;
        out["joint"] = pt.joint;
        out["attempts"] = pt.attempts;
        return out;
      },
      py::arg("graph"), py::arg("seed"),
      "Random interior point of the model: parameter values and the joint "
      "table they parametrize.");
  m.def(
      "to_joint",
      [](const ChainGraph& g, const std::vector<double>& values) {
        return to_joint(g, MoebiusParams{values});
      },
      py::arg("graph"), py::arg("params"));
  m.def(
      "params_from_joint",
      [](const ChainGraph& g, const JointTable& p) { return params_from_joint(g, p).values; },
      py::arg("graph"), py::arg("table"));
  m.def(
      "check_membership",
      [](const JointTable& p, const ChainGraph& g, double tol) {
        return theorem8_dict(check_theorem8(p, g, tol));
      },
      py::arg("table"), py::arg("graph"), py::arg("tol") = kCiTol,
      "Factorization, product, and invariance residuals characterizing "
      "membership in the chain graph model.");

  m.def(
      "fit",
      [](const ChainGraph& g, const CountTable& counts, int starts, std::uint64_t seed,
         int threads) {
        FitOptions opts;
        opts.starts = starts;
        opts.seed = seed;
        opts.threads = threads;
        return fit_dict(fit(g, counts, opts));
      },
      py::arg("graph"), py::arg("counts"), py::arg("starts") = 5, py::arg("seed") = 0,
      py::arg("threads") = 1, "Maximum likelihood fit; per-component diagnostics included.");
  m.def("loglik", &loglik, py::arg("table"), py::arg("counts"));

  m.def("prop14_member", &prop14_member, py::arg("table"), py::arg("ci_tol") = kCiTol,
        py::arg("rank_tol") = 1e-8);
  m.def("binary_coords", &binary_coords, py::arg("table"));
  m.def("coord_labels", [] {
    return std::vector<std::string>(kBinaryCoordLabels.begin(), kBinaryCoordLabels.end());
  });
  m.def(
      "binary_equations_5_6_7",
      [](const std::vector<double>& coords) { return binary_equations_5_6_7(coords); },
      py::arg("coords"));
  m.def(
      "singular_locus_residuals",
      [](const std::vector<double>& coords) { return singular_locus_residuals(coords); },
      py::arg("coords"));
  m.def(
      "singular_locus_5_8",
      [](const std::vector<double>& coords, double tol) {
        return singular_locus_5_8(coords, tol);
      },
      py::arg("coords"), py::arg("tol") = 1e-9);
  m.def(
      "prop17_classify",
      [](const JointTable& p, double tol) {
        Prop17Report r = prop17_classify(p, tol);
        py::dict out;
        out["cond_i"] = r.cond_i;
        out["cond_ii"] = r.cond_ii;
        out["member"] = r.member();
        return out;
      },
      py::arg("table"), py::arg("tol") = kCiTol);
  m.def(
      "prop17_exact",
      [](const std::vector<std::int64_t>& cells) {
        if (cells.size() != 16) throw py::value_error("expected 16 cell counts");
        std::array<std::int64_t, 16> arr{};
        std::copy(cells.begin(), cells.end(), arr.begin());
        Prop17Exact r = prop17_exact(arr);
        py::dict out;
        out["cond_i"] = r.cond_i;
        out["cond_ii"] = r.cond_ii;
        out["minors_a"] = r.minors_a;
        out["minors_b"] = r.minors_b;
        out["member"] = r.member();
        return out;
      },
      py::arg("cells"), "Exact integer classification of a binary table given as 16 counts.");
  m.def(
      "sample_ci_member",
      [](const VertexSet& vars, const std::vector<int>& levels,
         const std::vector<std::tuple<VertexSet, VertexSet, VertexSet>>& triples,
         std::uint64_t seed, double tol, int max_sweeps) {
        return sample_ci_member(vars, levels, statements_from_triples(triples), seed, tol,
                                max_sweeps);
      },
      py::arg("vars"), py::arg("levels"), py::arg("statements"), py::arg("seed"),
      py::arg("tol") = 1e-10, py::arg("max_sweeps") = 10000,
      "Positive table satisfying the given (alpha, beta, gamma) independence "
      "statements, by cyclic projection.");
}
