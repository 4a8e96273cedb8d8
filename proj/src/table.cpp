#include "cgm/table.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cgm/error.hpp"
#include "cgm/indexing.hpp"

namespace cgm {

namespace {

[[noreturn]] void fail(const std::string& code, const std::string& msg) {
  throw DomainError("dist_table", code, msg);
}

void check_layout(const VertexSet& vars, const std::vector<int>& levels) {
  if (!std::is_sorted(vars.begin(), vars.end()) ||
      std::adjacent_find(vars.begin(), vars.end()) != vars.end())
    fail("bad_vars", "variables must be sorted and distinct");
  if (vars.size() != levels.size()) fail("bad_vars", "levels must match variables");
  std::size_t cells = 1;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i] <= 0) fail("bad_vars", "variables are positive integers");
    if (levels[i] < 2) fail("bad_level", "variable " + std::to_string(vars[i]) +
                                             " must have at least 2 levels");
    cells *= static_cast<std::size_t>(levels[i]);
    if (cells > kMaxCells)
      fail("cap_exceeded", "table exceeds the cap of 2^24 cells");
  }
}

std::vector<int> positions_of(const VertexSet& vars, const VertexSet& sub) {
  std::vector<int> pos;
  pos.reserve(sub.size());
  for (Vertex v : sub) {
    auto it = std::lower_bound(vars.begin(), vars.end(), v);
    if (it == vars.end() || *it != v)
      fail("not_subset", "variable " + std::to_string(v) + " is not in the table");
    pos.push_back(static_cast<int>(it - vars.begin()));
  }
  return pos;
}

// Strides (last variable fastest) for a dims vector.
std::vector<std::size_t> strides_of(std::span<const int> dims) {
  std::vector<std::size_t> s(dims.size(), 1);
  for (std::size_t i = dims.size(); i-- > 1;)
    s[i - 1] = s[i] * static_cast<std::size_t>(dims[i]);
  return s;
}

}  // namespace

JointTable::JointTable(VertexSet vars, std::vector<int> levels, std::vector<double> probs)
    : vars_(std::move(vars)), levels_(std::move(levels)), probs_(std::move(probs)) {
  check_layout(vars_, levels_);
  if (probs_.size() != cell_count(levels_))
    fail("bad_size", "expected " + std::to_string(cell_count(levels_)) + " cells, got " +
                         std::to_string(probs_.size()));
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0)) fail("negative_prob", "probabilities must be nonnegative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    fail("not_normalized", "probabilities sum to " + std::to_string(sum) + ", expected 1");
}

JointTable JointTable::uniform(VertexSet vars, std::vector<int> levels) {
  check_layout(vars, levels);
  std::size_t n = cell_count(levels);
  return JointTable(std::move(vars), std::move(levels),
                    std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

double JointTable::at(std::span<const int> state) const {
  if (state.size() != levels_.size()) fail("bad_state", "state has wrong arity");
  for (std::size_t i = 0; i < state.size(); ++i)
    if (state[i] < 1 || state[i] > levels_[i]) fail("bad_state", "state out of range");
  return probs_[cell_index(state, levels_)];
}

double JointTable::min_prob() const {
  return probs_.empty() ? 1.0 : *std::min_element(probs_.begin(), probs_.end());
}

int JointTable::position_of(Vertex v) const {
  auto it = std::lower_bound(vars_.begin(), vars_.end(), v);
  if (it == vars_.end() || *it != v)
    fail("not_subset", "variable " + std::to_string(v) + " is not in the table");
  return static_cast<int>(it - vars_.begin());
}

CountTable::CountTable(VertexSet vars, std::vector<int> levels, std::vector<std::int64_t> counts)
    : vars_(std::move(vars)), levels_(std::move(levels)), counts_(std::move(counts)) {
  check_layout(vars_, levels_);
  if (counts_.size() != cell_count(levels_))
    fail("bad_size", "expected " + std::to_string(cell_count(levels_)) + " cells, got " +
                         std::to_string(counts_.size()));
  total_ = 0;
  for (auto c : counts_) {
    if (c < 0) fail("negative_count", "counts must be nonnegative");
    total_ += c;
  }
}

JointTable CountTable::to_prob() const {
  if (total_ == 0) fail("empty_counts", "cannot normalize a table with zero total count");
  std::vector<double> p(counts_.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    p[i] = static_cast<double>(counts_[i]) / static_cast<double>(total_);
  return JointTable(vars_, levels_, std::move(p));
}

JointTable marginal(const JointTable& p, const VertexSet& alpha) {
  auto pos = positions_of(p.vars(), alpha);
  std::vector<int> out_levels;
  out_levels.reserve(alpha.size());
  for (int i : pos) out_levels.push_back(p.levels()[i]);

  auto out_strides = strides_of(out_levels);
  std::vector<double> out(cell_count(out_levels), 0.0);
  std::vector<int> state(p.levels().size(), 1);
  std::size_t idx = 0;
  do {
    std::size_t out_idx = 0;
    for (std::size_t k = 0; k < pos.size(); ++k)
      out_idx += out_strides[k] * static_cast<std::size_t>(state[pos[k]] - 1);
    out[out_idx] += p.probs()[idx];
    ++idx;
  } while (next_cell(state, p.levels()));
  return JointTable(alpha, std::move(out_levels), std::move(out));
}

JointTable conditional(const JointTable& p, const VertexSet& target, const VertexSet& given,
                       std::span<const int> given_state) {
  if (!disjoint(target, given)) fail("bad_state", "target and given must be disjoint");
  if (given_state.size() != given.size()) fail("bad_state", "given state has wrong arity");
  JointTable m = marginal(p, set_union(target, given));
  auto tpos = positions_of(m.vars(), target);
  auto gpos = positions_of(m.vars(), given);

  std::vector<int> t_levels;
  for (int i : tpos) t_levels.push_back(m.levels()[i]);

  std::vector<int> state(m.vars().size(), 1);
  for (std::size_t k = 0; k < gpos.size(); ++k) {
    if (given_state[k] < 1 || given_state[k] > m.levels()[gpos[k]])
      fail("bad_state", "given state out of range");
    state[gpos[k]] = given_state[k];
  }

  std::vector<double> vals(cell_count(t_levels));
  std::vector<int> tstate(target.size(), 1);
  double denom = 0.0;
  std::size_t i = 0;
  do {
    for (std::size_t k = 0; k < tpos.size(); ++k) state[tpos[k]] = tstate[k];
    vals[i] = m.probs()[cell_index(state, m.levels())];
    denom += vals[i];
    ++i;
  } while (next_cell(tstate, t_levels));
  if (denom <= 0.0)
    fail("zero_conditioning", "conditioning event has probability zero");
  for (double& v : vals) v /= denom;
  return JointTable(target, std::move(t_levels), std::move(vals));
}

double ci_residual(const JointTable& p, const CiStatement& s) {
  VertexSet abg = set_union(set_union(s.alpha, s.beta), s.gamma);
  JointTable m = marginal(p, abg);
  JointTable pag = marginal(m, set_union(s.alpha, s.gamma));
  JointTable pbg = marginal(m, set_union(s.beta, s.gamma));
  JointTable pg = marginal(m, s.gamma);

  auto gpos = positions_of(m.vars(), s.gamma);
  auto ag_pos = positions_of(m.vars(), pag.vars());
  auto bg_pos = positions_of(m.vars(), pbg.vars());

  auto ag_strides = strides_of(pag.levels());
  auto bg_strides = strides_of(pbg.levels());
  auto g_strides = strides_of(pg.levels());

  double worst = 0.0;
  std::vector<int> state(m.vars().size(), 1);
  std::size_t idx = 0;
  do {
    std::size_t iag = 0, ibg = 0, ig = 0;
    for (std::size_t k = 0; k < ag_pos.size(); ++k)
      iag += ag_strides[k] * static_cast<std::size_t>(state[ag_pos[k]] - 1);
    for (std::size_t k = 0; k < bg_pos.size(); ++k)
      ibg += bg_strides[k] * static_cast<std::size_t>(state[bg_pos[k]] - 1);
    for (std::size_t k = 0; k < gpos.size(); ++k)
      ig += g_strides[k] * static_cast<std::size_t>(state[gpos[k]] - 1);
    double r = m.probs()[idx] * pg.probs()[ig] - pag.probs()[iag] * pbg.probs()[ibg];
    worst = std::max(worst, std::abs(r));
    ++idx;
  } while (next_cell(state, m.levels()));
  return worst;
}

bool ci_holds(const JointTable& p, const CiStatement& s, double tol) {
  return ci_residual(p, s) <= tol;
}

bool ci_holds_rank(const JointTable& p, const CiStatement& s, double rel_tol) {
  VertexSet abg = set_union(set_union(s.alpha, s.beta), s.gamma);
  JointTable m = marginal(p, abg);
  auto apos = positions_of(m.vars(), s.alpha);
  auto bpos = positions_of(m.vars(), s.beta);
  auto gpos = positions_of(m.vars(), s.gamma);

  std::vector<int> a_levels, b_levels, g_levels;
  for (int i : apos) a_levels.push_back(m.levels()[i]);
  for (int i : bpos) b_levels.push_back(m.levels()[i]);
  for (int i : gpos) g_levels.push_back(m.levels()[i]);
  std::size_t na = cell_count(a_levels), nb = cell_count(b_levels);

  std::vector<int> gstate(gpos.size(), 1);
  std::vector<int> state(m.vars().size(), 1);
  do {
    Eigen::MatrixXd slab(na, nb);
    std::vector<int> astate(apos.size(), 1);
    std::size_t r = 0;
    do {
      std::vector<int> bstate(bpos.size(), 1);
      std::size_t c = 0;
      do {
        for (std::size_t k = 0; k < apos.size(); ++k) state[apos[k]] = astate[k];
        for (std::size_t k = 0; k < bpos.size(); ++k) state[bpos[k]] = bstate[k];
        for (std::size_t k = 0; k < gpos.size(); ++k) state[gpos[k]] = gstate[k];
        slab(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            m.probs()[cell_index(state, m.levels())];
        ++c;
      } while (next_cell(bstate, b_levels));
      ++r;
    } while (next_cell(astate, a_levels));

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(slab);
    const auto& sv = svd.singularValues();
    if (sv.size() > 1 && sv(0) > 0.0 && sv(1) > rel_tol * sv(0)) return false;
  } while (next_cell(gstate, g_levels));
  return true;
}

MarkovReport obeys_markov(const JointTable& p, const ChainGraph& g, MarkovType type, double tol) {
  if (p.vars() != g.vertices() || p.levels() != g.levels_of(g.vertices()))
    fail("vars_mismatch", "table variables/levels do not match the graph");
  MarkovReport report;
  for (auto& s : statements(g, type)) {
    double r = ci_residual(p, s);
    bool pass = r <= tol;
    report.all_pass = report.all_pass && pass;
    report.max_residual = std::max(report.max_residual, r);
    report.entries.push_back({std::move(s), r, pass});
  }
  return report;
}

CountTable simulate_counts(const JointTable& p, std::int64_t n, std::uint64_t seed) {
  if (n < 0) fail("bad_n", "sample size must be nonnegative");
  std::vector<std::size_t> support;
  std::vector<double> cdf;
  double cum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p.probs()[i] > 0.0) {
      cum += p.probs()[i];
      support.push_back(i);
      cdf.push_back(cum);
    }
  Rng rng(seed);
  std::vector<std::int64_t> counts(p.size(), 0);
  for (std::int64_t i = 0; i < n; ++i) {
    double u = rng.uniform01() * cum;
    auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()),
                                          support.size() - 1);
    ++counts[support[k]];
  }
  return CountTable(p.vars(), p.levels(), std::move(counts));
}

JointTable random_table(VertexSet vars, std::vector<int> levels, Rng& rng) {
  check_layout(vars, levels);
  std::vector<double> vals(cell_count(levels));
  double sum = 0.0;
  for (double& v : vals) {
    v = rng.uniform01();
    sum += v;
  }
  for (double& v : vals) v /= sum;
  return JointTable(std::move(vars), std::move(levels), std::move(vals));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    auto b = field.find_first_not_of(" \t\r");
    auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

struct RawTable {
  VertexSet vars;
  std::vector<int> levels;
  std::vector<std::int64_t> counts;   // used when is_counts
  std::vector<double> probs;          // used otherwise
  bool is_counts = false;
};

RawTable read_csv(const std::string& path, const VertexSet* want_vars,
                  const std::vector<int>* want_levels) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot open table file: " + path);
  std::string line;
  if (!std::getline(in, line)) fail("csv", "empty CSV file: " + path);
  auto header = split_csv_line(line);
  if (header.size() < 2) fail("csv", "header needs vertex columns plus count/prob");

  RawTable t;
  std::string value_col = header.back();
  if (value_col == "count")
    t.is_counts = true;
  else if (value_col != "prob")
    fail("csv", "last column must be 'count' or 'prob', got '" + value_col + "'");

  std::vector<Vertex> cols;
  for (std::size_t i = 0; i + 1 < header.size(); ++i) {
    try {
      std::size_t pos = 0;
      int v = std::stoi(header[i], &pos);
      if (pos != header[i].size() || v <= 0) throw std::invalid_argument("");
      cols.push_back(v);
    } catch (const std::exception&) {
      fail("csv", "bad vertex column '" + header[i] + "'");
    }
  }
  t.vars = make_set(cols);
  if (t.vars.size() != cols.size()) fail("csv", "duplicate vertex column");
  if (want_vars && t.vars != *want_vars)
    fail("vars_mismatch", "CSV columns do not match the expected variables");

  // Map header order to sorted order.
  std::vector<int> perm(cols.size());
  for (std::size_t i = 0; i < cols.size(); ++i)
    perm[i] = static_cast<int>(std::lower_bound(t.vars.begin(), t.vars.end(), cols[i]) -
                               t.vars.begin());

  struct Row {
    std::vector<int> state;
    double value;
    int line;
  };
  std::vector<Row> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      fail("csv", "line " + std::to_string(lineno) + ": expected " +
                      std::to_string(header.size()) + " fields");
    Row row;
    row.state.resize(cols.size());
    row.line = lineno;
    try {
      for (std::size_t i = 0; i < cols.size(); ++i) {
        std::size_t pos = 0;
        int s = std::stoi(fields[i], &pos);
        if (pos != fields[i].size() || s < 1) throw std::invalid_argument("");
        row.state[perm[i]] = s;
      }
      std::size_t pos = 0;
      row.value = std::stod(fields.back(), &pos);
      if (pos != fields.back().size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      fail("csv", "line " + std::to_string(lineno) + ": bad cell");
    }
    rows.push_back(std::move(row));
  }

  if (want_levels) {
    t.levels = *want_levels;
  } else {
    t.levels.assign(t.vars.size(), 2);
    for (const auto& row : rows)
      for (std::size_t i = 0; i < row.state.size(); ++i)
        t.levels[i] = std::max(t.levels[i], row.state[i]);
  }
  check_layout(t.vars, t.levels);

  std::size_t cells = cell_count(t.levels);
  std::vector<bool> seen(cells, false);
  t.counts.assign(t.is_counts ? cells : 0, 0);
  t.probs.assign(t.is_counts ? 0 : cells, 0.0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.state.size(); ++i)
      if (row.state[i] > t.levels[i])
        fail("csv", "line " + std::to_string(row.line) + ": state exceeds declared levels");
    std::size_t idx = cell_index(row.state, t.levels);
    if (seen[idx]) fail("csv", "line " + std::to_string(row.line) + ": duplicate cell");
    seen[idx] = true;
    if (t.is_counts) {
      auto c = static_cast<std::int64_t>(row.value);
      if (static_cast<double>(c) != row.value || c < 0)
        fail("csv", "line " + std::to_string(row.line) + ": counts must be nonnegative integers");
      t.counts[idx] = c;
    } else {
      if (row.value < 0.0)
        fail("csv", "line " + std::to_string(row.line) + ": probabilities must be nonnegative");
      t.probs[idx] = row.value;
    }
  }
  return t;
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

JointTable load_prob_csv(const std::string& path) {
  auto t = read_csv(path, nullptr, nullptr);
  if (t.is_counts) fail("csv", "expected a 'prob' column in " + path);
  return JointTable(t.vars, t.levels, std::move(t.probs));
}

JointTable load_prob_csv(const std::string& path, const ChainGraph& g) {
  auto levels = g.levels_of(g.vertices());
  auto t = read_csv(path, &g.vertices(), &levels);
  if (t.is_counts) fail("csv", "expected a 'prob' column in " + path);
  return JointTable(t.vars, t.levels, std::move(t.probs));
}

CountTable load_counts_csv(const std::string& path) {
  auto t = read_csv(path, nullptr, nullptr);
  if (!t.is_counts) fail("csv", "expected a 'count' column in " + path);
  return CountTable(t.vars, t.levels, std::move(t.counts));
}

CountTable load_counts_csv(const std::string& path, const ChainGraph& g) {
  auto levels = g.levels_of(g.vertices());
  auto t = read_csv(path, &g.vertices(), &levels);
  if (!t.is_counts) fail("csv", "expected a 'count' column in " + path);
  return CountTable(t.vars, t.levels, std::move(t.counts));
}

JointTable load_table_csv(const std::string& path) {
  auto t = read_csv(path, nullptr, nullptr);
  if (t.is_counts) return CountTable(t.vars, t.levels, std::move(t.counts)).to_prob();
  return JointTable(t.vars, t.levels, std::move(t.probs));
}

JointTable load_table_csv(const std::string& path, const ChainGraph& g) {
  auto levels = g.levels_of(g.vertices());
  auto t = read_csv(path, &g.vertices(), &levels);
  if (t.is_counts) return CountTable(t.vars, t.levels, std::move(t.counts)).to_prob();
  return JointTable(t.vars, t.levels, std::move(t.probs));
}

std::string to_prob_csv(const JointTable& p) {
  std::string out;
  for (Vertex v : p.vars()) out += std::to_string(v) + ",";
  out += "prob\n";
  std::vector<int> state(p.vars().size(), 1);
  std::size_t idx = 0;
  do {
    if (p.probs()[idx] != 0.0) {
      for (int s : state) out += std::to_string(s) + ",";
      out += format_value(p.probs()[idx]) + "\n";
    }
    ++idx;
  } while (next_cell(state, p.levels()));
  return out;
}

std::string to_counts_csv(const CountTable& c) {
  std::string out;
  for (Vertex v : c.vars()) out += std::to_string(v) + ",";
  out += "count\n";
  std::vector<int> state(c.vars().size(), 1);
  std::size_t idx = 0;
  do {
    if (c.counts()[idx] != 0) {
      for (int s : state) out += std::to_string(s) + ",";
      out += std::to_string(c.counts()[idx]) + "\n";
    }
    ++idx;
  } while (next_cell(state, c.levels()));
  return out;
}

}  // namespace cgm
