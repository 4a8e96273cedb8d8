#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "cgm/error.hpp"
#include "cgm/mle.hpp"
#include "cgm/moebius.hpp"
#include "cgm/table.hpp"
#include "helpers.hpp"

using namespace cgm;
using cgm::test::load_fixture;

namespace {

CountTable simulate_from(const ChainGraph& g, std::uint64_t point_seed, std::int64_t n,
                         std::uint64_t draw_seed) {
  ModelPoint point = sample_model_point(g, point_seed);
  return simulate_counts(point.joint, n, draw_seed);
}

double tv_distance(const JointTable& a, const JointTable& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a.probs()[i] - b.probs()[i]);
  return s / 2;
}

}  // namespace

TEST_CASE("log-likelihood evaluation") {
  JointTable p({1}, {3}, {0.2, 0.3, 0.5});
  CountTable c({1}, {3}, {2, 0, 3});
  CHECK(loglik(p, c) == doctest::Approx(2 * std::log(0.2) + 3 * std::log(0.5)).epsilon(1e-14));

  JointTable zero({1}, {3}, {0.5, 0.5, 0.0});
  CHECK(loglik(zero, c) == -std::numeric_limits<double>::infinity());
  CountTable other({2}, {3}, {1, 1, 1});
  CHECK_THROWS_AS(loglik(p, other), DomainError);
}

TEST_CASE("closed-form components are identified structurally") {
  CHECK(closed_form_components(load_fixture("four_blocks.graph")) == std::vector<int>{0, 1});
  CHECK(closed_form_components(load_fixture("lone_arrow.graph")) ==
        std::vector<int>{0, 1, 2, 3});
  ChainGraph triangle = ChainGraph::parse("1 -- 2\n2 -- 3\n1 -- 3\n");
  CHECK(closed_form_components(triangle) == std::vector<int>{0});
  CHECK(closed_form_components(load_fixture("anchored_path.graph")) == std::vector<int>{0});
}

TEST_CASE("closed forms match the generic optimizer") {
  FitOptions opts;
  opts.starts = 3;

  // all-singleton graph: proportions conditional on the single parent
  ChainGraph arrow = load_fixture("lone_arrow.graph");
  CountTable counts = simulate_from(arrow, 4, 2000, 44);
  FitResult closed = fit(arrow, counts, opts);
  MoebiusModel model(arrow);
  for (int c = 0; c < 4; ++c) {
    CHECK(closed.per_component[c].closed_form);
    ComponentFitDetail numeric = fit_component(model, c, counts, opts);
    CHECK(closed.per_component[c].loglik ==
          doctest::Approx(numeric.info.loglik).epsilon(1e-10));
  }

  // complete component without parents: empirical marginal proportions
  ChainGraph triangle = ChainGraph::parse("states 1=2 2=3 3=2\n1 -- 2\n2 -- 3\n1 -- 3\n");
  CountTable tcounts = simulate_from(triangle, 5, 3000, 45);
  FitResult tclosed = fit(triangle, tcounts, opts);
  CHECK(tclosed.per_component[0].closed_form);
  JointTable empirical = tcounts.to_prob();
  CHECK(tv_distance(tclosed.p_hat, empirical) < 1e-12);
  MoebiusModel tmodel(triangle);
  ComponentFitDetail tnumeric = fit_component(tmodel, 0, tcounts, opts);
  CHECK(tclosed.loglik == doctest::Approx(tnumeric.info.loglik).epsilon(1e-10));
}

TEST_CASE("analytic component gradient matches central differences") {
  for (const char* name : {"anchored_path.graph", "anchored_triangle.graph"}) {
    ChainGraph g = load_fixture(name);
    MoebiusModel model(g);
    CountTable counts = simulate_from(g, 9, 500, 77);
    for (std::uint64_t seed : {21, 22, 23}) {
      std::vector<double> x = model.sample(seed).values;
      for (int comp = 0; comp < static_cast<int>(model.dag().components().size()); ++comp) {
        std::vector<double> grad;
        double f0 = component_loglik(model, comp, counts, x, &grad);
        REQUIRE(std::isfinite(f0));
        auto [off, len] = model.component_range(comp);
        const double h = 1e-6;
        for (std::size_t i = off; i < off + len; ++i) {
          std::vector<double> xp = x, xm = x;
          xp[i] += h;
          xm[i] -= h;
          double fd =
              (component_loglik(model, comp, counts, xp) - component_loglik(model, comp, counts, xm)) /
              (2 * h);
          CHECK(std::abs(fd - grad[i]) / (1 + std::abs(grad[i])) < 1e-6);
        }
      }
    }
  }
}

TEST_CASE("fitting is deterministic, also across thread counts") {
  ChainGraph g = load_fixture("four_blocks.graph");
  CountTable counts = simulate_from(g, 2, 4000, 11);
  FitOptions opts;
  opts.starts = 4;
  opts.seed = 5;
  FitResult a = fit(g, counts, opts);
  FitResult b = fit(g, counts, opts);
  CHECK(a.p_hat.probs() == b.p_hat.probs());
  CHECK(a.q_hat.values == b.q_hat.values);

  opts.threads = 3;
  FitResult c = fit(g, counts, opts);
  CHECK(a.p_hat.probs() == c.p_hat.probs());
  CHECK(a.loglik == doctest::Approx(c.loglik).epsilon(1e-15));
}

TEST_CASE("fit recovers the generating conditionals") {
  ChainGraph g = load_fixture("anchored_path.graph");
  ModelPoint truth = sample_model_point(g, 13);
  CountTable counts = simulate_counts(truth.joint, 20000, 131);
  FitResult r = fit(g, counts);
  CHECK(r.dim == 11);
  MoebiusModel model(g);
  for (int comp = 0; comp < 2; ++comp) {
    auto fitted = model.component_conditionals(comp, r.q_hat.values);
    auto expected = model.component_conditionals(comp, truth.params.values);
    REQUIRE(fitted.size() == expected.size());
    for (std::size_t s = 0; s < fitted.size(); ++s)
      CHECK(tv_distance(fitted[s], expected[s]) < 0.05);
  }
  // the fitted table is a model member
  CHECK(check_theorem8(r.p_hat, g, 1e-7).member());
}

TEST_CASE("unobserved parent states are flagged and defaulted") {
  ChainGraph g = load_fixture("anchored_path.graph");
  // X1 = 2 never occurs: the {2,3,4} conditional there is unidentified
  std::vector<std::int64_t> cells(16, 0);
  cells[0] = 7;   // (1,1,1,1)
  cells[3] = 5;   // (1,1,2,2)
  cells[5] = 6;   // (1,2,1,2)
  cells[6] = 9;   // (1,2,2,1)
  cells[1] = 4;   // (1,1,1,2)
  CountTable counts({1, 2, 3, 4}, {2, 2, 2, 2}, cells);
  FitResult r = fit(g, counts);
  const ComponentFit& cf = r.per_component[1];
  REQUIRE(cf.component == VertexSet{2, 3, 4});
  REQUIRE(cf.unidentified_pa_states.size() == 1);
  CHECK(cf.unidentified_pa_states[0] == 1);

  // parameter slots only that state exposes sit at their independence values
  MoebiusModel model(g);
  std::vector<double> indep = model.independence_point();
  for (int bi : model.component_blocks(1)) {
    const ParamBlock& blk = model.blocks()[bi];
    if (blk.pa != VertexSet{1}) continue;
    for (std::size_t j = 0; j < blk.j_size; ++j)
      CHECK(r.q_hat.values[blk.offset + blk.j_size + j] ==
            doctest::Approx(indep[blk.offset + blk.j_size + j]).epsilon(1e-12));
  }
  // while the observed parent state is fitted freely
  auto conds = model.component_conditionals(1, r.q_hat.values);
  CHECK(conds[0].probs()[0] > 0.0);
}

TEST_CASE("information criterion and likelihood-ratio comparisons") {
  ChainGraph path = load_fixture("anchored_path.graph");
  ChainGraph arrow = load_fixture("lone_arrow.graph");
  CountTable counts = simulate_from(path, 17, 3000, 19);

  FitResult alt = fit(path, counts);
  FitResult null = fit(arrow, counts);
  CHECK(alt.bic == doctest::Approx(-2 * alt.loglik +
                                   static_cast<double>(alt.dim) * std::log(3000.0)));
  CHECK(bic(alt, counts) == doctest::Approx(alt.bic));

  LrtResult l = lrt(null, alt);
  CHECK(l.df == 6);  // 11 - 5
  CHECK(l.statistic >= 0);
  CHECK(l.statistic > 1);  // the data really came from the larger model
}

TEST_CASE("fit input validation") {
  ChainGraph g = load_fixture("anchored_path.graph");
  CountTable empty({1, 2, 3, 4}, {2, 2, 2, 2}, std::vector<std::int64_t>(16, 0));
  CHECK_THROWS_AS(fit(g, empty), DomainError);
  CountTable wrong({1, 2}, {2, 2}, {1, 2, 3, 4});
  CHECK_THROWS_AS(fit(g, wrong), DomainError);
  FitOptions bad;
  bad.starts = 0;
  CountTable ok = simulate_from(g, 1, 100, 1);
  CHECK_THROWS_AS(fit(g, ok, bad), DomainError);
}
