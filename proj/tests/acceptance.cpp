// Acceptance run: one PASS/FAIL line per criterion. Arguments select a
// subset of criteria ("acceptance 1 6 7"); no arguments runs all of them.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cqtrade/cqtrade.hpp"
#include "test_support.hpp"

using namespace cqtrade;
using cqtrade::testing::all_requests;
using cqtrade::testing::random_db_for;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---- criterion 1 and 8: oracle equivalence --------------------------------

struct Family {
  std::string name;
  std::string query;
  std::vector<std::string> extra_decompositions;  // JSON, beyond the enumerated ones
};

using Answerer = std::function<bool(const std::vector<std::string>&, CostMeter&)>;

struct NamedAnswerer {
  std::string name;
  Answerer answer;
};

const char* kHexagonChain = R"({"nodes":[{"id":"t1","bag":["x1","x6"],"in_A":true},
  {"id":"t2","bag":["x1","x2","x5","x6"]},{"id":"t3","bag":["x2","x3","x4","x5"]}],
  "edges":[["t1","t2"],["t2","t3"]]})";

const char* kSquareCorners = R"({"nodes":[{"id":"t1","bag":["x1","x3"],"in_A":true},
  {"id":"t2","bag":["x1","x2","x3"]},{"id":"t3","bag":["x1","x3","x4"]}],
  "edges":[["t1","t2"],["t1","t3"]]})";

const char* kNegatedChain = "Q(b x1, b x6) = R(x1,x2), !S(x2,x3), T(x3,x4), !U(x4,x5), V(x5,x6)";
const char* kOpenTriangle = "Q(b x2, b x3) = R1(x1,x2), !R2(x2,x3), R3(x1,x3)";

std::vector<Family> oracle_families() {
  std::vector<Family> out;
  for (std::size_t k = 2; k <= 4; ++k) out.push_back({std::to_string(k) + "-star", star_query_text(k), {}});
  for (std::size_t k = 2; k <= 6; ++k) out.push_back({std::to_string(k) + "-path", path_query_text(k), {}});
  out.push_back({"5-path-layered", path_query_text(5, true), {kHexagonChain}});
  out.push_back({"triangle", "Q(b x, b z) = E(x,y), E(y,z), E(x,z)", {}});
  out.push_back({"square", "Q(b x1, b x2) = E(x1,x2), E(x2,x3), E(x3,x4), E(x4,x1)", {}});
  out.push_back({"opposite-corner square", "Q(b x1, b x3) = R1(x1,x2), R1(x2,x3), R3(x3,x4), R4(x4,x1)", {kSquareCorners}});
  out.push_back({"negated chain", kNegatedChain, {}});
  out.push_back({"open triangle", kOpenTriangle, {}});
  return out;
}

/// Up to `limit` enumerated decompositions (first, last, then the rest) plus
/// the family's hand-written ones.
std::vector<ConnexDecomposition> decompositions_for(const Family& f, const Hypergraph& h, std::size_t limit = 3) {
  std::vector<ConnexDecomposition> out;
  for (const auto& text : f.extra_decompositions) out.push_back(decomposition_from_json(nlohmann::json::parse(text), h));
  auto all = enumerate_decompositions(h);
  std::vector<std::size_t> pick;
  if (!all.empty()) pick.push_back(0);
  if (all.size() > 1) pick.push_back(all.size() - 1);
  for (std::size_t i = 1; i + 1 < all.size() && pick.size() < limit; ++i) pick.push_back(i);
  for (auto i : pick) out.push_back(all[i]);
  // A second tree for families with a single enumerated decomposition: hang
  // a leaf holding one atom's variables below the deepest free bag.
  if (all.size() == 1) {
    auto d = all[0];
    for (std::size_t t = d.nodes.size(); t-- > 0;) {
      if (d.nodes[t].in_anchor) continue;
      for (const auto& e : h.edges) {
        if ((e.vars & ~d.nodes[t].bag) != 0 || (e.vars & h.free()) == 0) continue;
        DecompNode leaf = d.nodes[t];
        leaf.id = d.nodes[t].id + "_leaf";
        leaf.bag = e.vars;
        leaf.materialize_free = false;
        d.nodes.push_back(leaf);
        d.edges.emplace_back(t, d.nodes.size() - 1);
        validate_decomposition(h, d);
        out.push_back(d);
        return out;
      }
    }
  }
  return out;
}

std::vector<std::vector<std::string>> requests_for(std::size_t arity, std::size_t n, std::size_t cap,
                                                   std::mt19937_64& rng) {
  auto all = all_requests(arity, n);
  if (all.size() <= cap) return all;
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(cap);
  return all;
}

std::vector<NamedAnswerer> structures_for(const Family& f, const AdornedQuery& q, const Database& db,
                                          std::size_t trial, std::vector<std::unique_ptr<BuiltStructure>>& keep,
                                          std::vector<std::unique_ptr<DecompStructure>>& keep_d,
                                          std::set<std::string>& decomposition_ids) {
  static const std::vector<Rational> taus{Rational(0), make_rational(1, 3), make_rational(1, 2), Rational(1)};
  const Rational tau = taus[trial % taus.size()];
  auto h = hypergraph_of(q);
  std::vector<NamedAnswerer> out;
  auto add = [&](const std::string& name, BuildOptions o) {
    keep.push_back(std::make_unique<BuiltStructure>(BuiltStructure::build(q, db, o)));
    const BuiltStructure* s = keep.back().get();
    out.push_back({name, [s](const std::vector<std::string>& r, CostMeter& m) { return s->answer(r, m); }});
  };
  BuildOptions o;
  o.time_exponent = tau;
  if (q.has_negation()) {
    o.strategy = "negation";
    add("negation", o);
    return out;
  }
  o.strategy = "adstruct";
  add("adstruct", o);
  o.threshold = Rational(static_cast<long>(1 + trial % 5));
  add("adstruct-fixed-T", o);
  o.threshold.reset();
  if (h.free() != 0) {
    for (const auto& d : decompositions_for(f, h)) {
      auto tuned = with_uniform_delta(d, tau);
      decomposition_ids.insert(decomposition_to_json(d, h).dump());
      keep_d.push_back(std::make_unique<DecompStructure>(DecompStructure::build(q, db, tuned)));
      const DecompStructure* s = keep_d.back().get();
      out.push_back({"decomp", [s](const std::vector<std::string>& r, CostMeter& m) {
                       return s->answer(s->query().request(r), m);
                     }});
      auto opt = apply_materialization_optimizations(h, tuned);
      keep_d.push_back(std::make_unique<DecompStructure>(DecompStructure::build(q, db, opt)));
      const DecompStructure* so = keep_d.back().get();
      out.push_back({"decomp-materialized", [so](const std::vector<std::string>& r, CostMeter& m) {
                       return so->answer(so->query().request(r), m);
                     }});
    }
  }
  bool is_path = true;
  try {
    PathInstance::chain_of(q);
  } catch (const UnsupportedQueryError&) {
    is_path = false;
  }
  if (is_path) {
    o.strategy = "bfs";
    add("bfs", o);
    auto p = PathInstance::from_query(q, db);
    if (p.k() >= 4) {
      o.strategy = "path";
      std::uint64_t root = 1;
      while (root * root < p.size) ++root;
      for (std::uint64_t delta : {std::uint64_t{1}, std::uint64_t{2}, root, static_cast<std::uint64_t>(p.size)}) {
        o.delta = std::max<std::uint64_t>(1, delta);
        add("path", o);
      }
    }
  }
  return out;
}

Outcome criterion_oracle() {
  Outcome res;
  std::ostringstream d;
  std::size_t min_cases = SIZE_MAX, total_cases = 0, mismatches = 0, max_tuples = 0;
  std::set<std::string> strategies;
  std::size_t distinct_decomps_min = SIZE_MAX;
  for (const auto& f : oracle_families()) {
    auto q = parse_query(f.query);
    std::mt19937_64 rng(std::hash<std::string>{}(f.name) & 0xffffffff);
    std::size_t cases = 0, trial = 0;
    std::set<std::string> decomposition_ids;
    const std::size_t arity = hypergraph_of(q).bound_order.size();
    while (cases < 1200) {
      // Alternate small exhaustive instances with denser ones near 300 tuples.
      bool dense = trial % 3 == 2;
      std::size_t relations = 0;
      {
        std::set<std::string> names;
        for (const auto& a : q.body) names.insert(a.relation);
        relations = names.size();
      }
      std::size_t n = dense ? 24 : 4 + trial % 4;
      std::size_t max_m = dense ? 300 / relations : 4 * n;
      auto db = random_db_for(q, rng, n, max_m);
      max_tuples = std::max(max_tuples, db.total_size());
      std::vector<std::unique_ptr<BuiltStructure>> keep;
      std::vector<std::unique_ptr<DecompStructure>> keep_d;
      auto structures = structures_for(f, q, db, trial, keep, keep_d, decomposition_ids);
      for (const auto& s : structures) strategies.insert(s.name);
      for (const auto& r : requests_for(arity, n, dense ? 400 : 300, rng)) {
        bool want = brute_force_eval(q, db, r);
        for (const auto& s : structures) {
          CostMeter m;
          if (s.answer(r, m) != want) {
            if (mismatches < 5) {
              std::cerr << "mismatch: " << f.name << " " << s.name << " trial " << trial << " request";
              for (const auto& v : r) std::cerr << " " << v;
              std::cerr << "\n";
            }
            ++mismatches;
          }
        }
        ++cases;
      }
      ++trial;
    }
    min_cases = std::min(min_cases, cases);
    total_cases += cases;
    if (!decomposition_ids.empty()) distinct_decomps_min = std::min(distinct_decomps_min, decomposition_ids.size());
  }
  res.pass = mismatches == 0 && min_cases >= 1000 && max_tuples <= 300 && distinct_decomps_min >= 2;
  d << "families=" << oracle_families().size() << " min_cases_per_family=" << min_cases << " total=" << total_cases
    << " mismatches=" << mismatches << " max_tuples=" << max_tuples
    << " min_distinct_decompositions=" << distinct_decomps_min << " strategies=";
  bool first = true;
  for (const auto& s : strategies) {
    d << (first ? "" : ",") << s;
    first = false;
  }
  res.detail = d.str();
  return res;
}

Outcome criterion_negation_degenerate() {
  Outcome res;
  std::size_t cases = 0, mismatches = 0;
  for (const char* text : {kNegatedChain, kOpenTriangle}) {
    auto q = parse_query(text);
    auto pos = positive_part(q);
    std::set<std::string> negated;
    for (const auto& a : q.body) {
      if (a.negated) negated.insert(a.relation);
    }
    std::mt19937_64 rng(std::hash<std::string>{}(text) & 0xffffffff);
    for (std::size_t trial = 0; trial < 12; ++trial) {
      bool dense = trial % 3 == 2;
      std::size_t n = dense ? 24 : 4 + trial % 4;
      auto db = random_db_for(pos, rng, n, dense ? 100 : 4 * n);
      for (const auto& name : negated) db.add_relation(name, {"s", "t"}).assign({});
      for (const auto& tau : {Rational(0), make_rational(1, 2), Rational(1)}) {
        auto neg = build_negation_structure(q, db, tau);
        auto hp = hypergraph_of(pos);
        auto plus = DecompStructure::build(pos, db, constrained_negation_decomposition(pos, hp, tau));
        auto cover = CoverStructure::build(pos, db, best_cover_for_time(hp, tau),
                                           threshold_for(db.total_size(), tau));
        for (const auto& r : all_requests(2, n)) {
          CostMeter a, b, c;
          bool x = neg.answer(neg.query().request(r), a);
          if (x != plus.answer(plus.query().request(r), b)) ++mismatches;
          if (x != cover.answer(cover.query().request(r), c)) ++mismatches;
          ++cases;
        }
      }
    }
  }
  res.pass = mismatches == 0;
  res.detail = "cases=" + std::to_string(cases) + " mismatches=" + std::to_string(mismatches);
  return res;
}

// ---- criteria 2 and 3: cover structure laws -------------------------------

std::vector<BenchRow> g_star_rows;

const std::vector<BenchRow>& star_rows() {
  if (g_star_rows.empty()) {
    BenchConfig cfg;
    cfg.family = "star";
    cfg.k = 2;
    cfg.sizes = {2000, 10000};
    g_star_rows = run_bench(cfg);
  }
  return g_star_rows;
}

Outcome criterion_space_law() {
  Outcome res;
  const auto& rows = star_rows();
  std::ostringstream d;
  bool chain_ok = true;
  for (const auto& r : rows) chain_ok = chain_ok && r.note.empty();
  for (const auto& f : fit_slopes(rows)) {
    bool ok = f.slope && std::abs(*f.slope + 2) <= 0.25 && f.points.size() >= 3;
    res.pass = res.pass && ok;
    d << f.series << " slope=" << (f.slope ? fmt(*f.slope) : "none") << " points=" << f.points.size() << "; ";
  }
  res.pass = res.pass && chain_ok && rows.size() == 16;
  d << "stored*T<=sum residual on all " << rows.size() << " builds: " << (chain_ok ? "yes" : "no");
  res.detail = d.str();
  return res;
}

Outcome criterion_time_law() {
  Outcome res;
  double c = 0;
  std::size_t measured = 0;
  for (const auto& r : star_rows()) {
    c = std::max(c, r.time_constant);
    measured += r.requests_measured;
  }
  res.pass = c <= 8;
  res.detail = "c=" + fmt(c) + " (max steps / T over light requests, " + std::to_string(measured) + " metered)";
  return res;
}

// ---- criteria 4 and 5: path structures ------------------------------------

Outcome path_rows_outcome(std::size_t k, bool recursion) {
  Outcome res;
  double space_c = 0, time_c = 0, st_ratio = 0;
  std::size_t rows_total = 0, failed = 0;
  for (bool adversarial : {false, true}) {
    BenchConfig cfg;
    cfg.family = "path";
    cfg.k = k;
    cfg.sizes = {1000, 10000};
    cfg.adversarial = adversarial;
    for (const auto& r : run_bench(cfg)) {
      ++rows_total;
      if (!r.bound_ok) ++failed;
      space_c = std::max(space_c, r.space_constant);
      time_c = std::max(time_c, r.time_constant);
      if (!recursion) {
        double s = r.space_constant * static_cast<double>(r.db_size) * std::stod(r.threshold.substr(6));
        double st = s * static_cast<double>(r.max_answer_steps);
        st_ratio = std::max(st_ratio, st / (static_cast<double>(r.db_size) * r.db_size));
      }
    }
  }
  double c = std::max(space_c, time_c);
  res.pass = failed == 0 && c <= 8 && (recursion || st_ratio <= c * c);
  res.detail = "k=" + std::to_string(k) + " rows=" + std::to_string(rows_total) + " space_c=" + fmt(space_c) +
               " time_c=" + fmt(time_c);
  if (!recursion) res.detail += " max S*T/|D|^2=" + fmt(st_ratio) + " (<= c^2=" + fmt(c * c) + ")";
  return res;
}

Outcome criterion_four_path() { return path_rows_outcome(4, false); }

Outcome criterion_recursion() {
  Outcome res;
  std::string detail;
  for (std::size_t k : {5, 6}) {
    auto o = path_rows_outcome(k, true);
    res.pass = res.pass && o.pass;
    detail += o.detail + "; ";
  }
  // Differential check on graphs of at most 300 edges.
  std::size_t cases = 0, mismatches = 0;
  for (std::size_t k : {5, 6}) {
    auto q = parse_query(path_query_text(k));
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      std::uint64_t n = 20 + 5 * seed, m = std::min<std::uint64_t>(300, 40 * seed);
      auto db = seed % 2 ? random_digraph(n, m, seed) : adversarial_heavy(n, m - 2 * (n / 3), n / 3, seed);
      auto p = PathInstance::from_query(q, db);
      std::uint64_t root = 1;
      while (root * root < p.size) ++root;
      for (std::uint64_t delta : {std::uint64_t{2}, root, 2 * root, static_cast<std::uint64_t>(p.size)}) {
        auto s = PathStructure::build(p, delta);
        for (std::uint64_t a = 0; a <= n; ++a) {
          for (std::uint64_t b = 0; b <= n; ++b) {
            std::vector<std::string> r{std::to_string(a), std::to_string(b)};
            Value va = db.interner().lookup(r[0]), vb = db.interner().lookup(r[1]);
            CostMeter meter;
            bool got = va != kNoValue && vb != kNoValue && s.answer(va, vb, meter);
            if (got != brute_force_eval(q, db, r)) ++mismatches;
            ++cases;
          }
        }
      }
    }
  }
  res.pass = res.pass && mismatches == 0;
  res.detail = detail + "oracle cases=" + std::to_string(cases) + " mismatches=" + std::to_string(mismatches);
  return res;
}

// ---- criteria 6 and 7: symbolic analysis ----------------------------------

Outcome criterion_analyzer() {
  Outcome res;
  std::vector<std::string> failures;
  auto check = [&](const std::string& what, const std::string& got, const std::string& want) {
    if (got != want) failures.push_back(what + ": got '" + got + "' want '" + want + "'");
  };
  auto analyze = [](const std::string& text, const std::string& sym = "|D|") {
    AnalyzeOptions o;
    o.size_symbol = sym;
    return analyze_query(parse_query(text), o);
  };
  std::size_t checks = 0;
  check("rho*(triangle)", analyze("Q(b x, b z) = E(x,y), E(y,z), E(x,z)")["rho_star"], "3/2");
  ++checks;
  for (std::size_t k = 2; k <= 7; ++k, ++checks) {
    check("rho*(" + std::to_string(k) + "-path)", analyze(path_query_text(k))["rho_star"], std::to_string((k + 2) / 2));
  }
  for (std::size_t k = 2; k <= 5; ++k, checks += 2) {
    auto h = hypergraph_of(parse_query(star_query_text(k)));
    FractionalCover ones;
    ones.weights.assign(k, Rational(1));
    auto c = analyze_cover(h, ones);
    check("slack(" + std::to_string(k) + "-star)", c.slack ? to_string(*c.slack) : "inf", std::to_string(k));
    auto K = std::to_string(k);
    check(K + "-star tradeoff", analyze(star_query_text(k))["tradeoff"], "S·T^" + K + "=|D|^" + K);
  }
  auto q5 = parse_query("Q(b x1, b x6) = R1(x1,x2), R2(x2,x3), R3(x3,x4), R4(x4,x5), R5(x5,x6)");
  auto h5 = hypergraph_of(q5);
  auto p5 = decomposition_profile(h5, decomposition_from_json(nlohmann::json::parse(kHexagonChain), h5), 8, &q5);
  check("chain decomposition f", p5["f"], "2−τ");
  check("chain decomposition h", p5["h"], "2τ");
  auto qs = parse_query("Q(b x1, b x3) = R1(x1,x2), R1(x2,x3), R3(x3,x4), R4(x4,x1)");
  auto hs = hypergraph_of(qs);
  auto ps = decomposition_profile(hs, decomposition_from_json(nlohmann::json::parse(kSquareCorners), hs), 8, &qs);
  check("opposite-corner f", ps["f"], "2−2τ");
  check("opposite-corner h", ps["h"], "τ");
  check("triangle tradeoff", analyze("Q(b x, b z) = E(x,y), E(y,z), E(x,z)", "|E|")["tradeoff_quotient"],
        "S=|E|^{3/2}/T");
  check("square tradeoff",
        analyze("Q(b x1, b x2) = E(x1,x2), E(x2,x3), E(x3,x4), E(x4,x1)", "|E|")["tradeoff_quotient"], "S=|E|^2/T");
  check("negated chain", analyze(kNegatedChain)["negation"]["tradeoff"], "S=|D|^3/τ, T=τ");
  check("open triangle", analyze(kOpenTriangle, "|E|")["negation"]["tradeoff"], "S=|E|^2/τ^2, T=τ");
  checks += 8;
  res.pass = failures.empty();
  res.detail = std::to_string(checks) + " exact checks";
  for (const auto& f : failures) res.detail += "; " + f;
  return res;
}

Outcome criterion_frontier() {
  Outcome res;
  std::vector<std::string> failures;
  const Rational half = make_rational(1, 2);
  // Recursive path structure up to T = |D|^{1/2}.
  for (int i = 0; i <= 8; ++i) {
    Rational t = make_rational(i, 16);
    auto c = select_path_strategy(4, t);
    if (c.strategy != "path") failures.push_back("k=4 at t=" + to_string(t) + " picks " + c.strategy);
  }
  if (select_path_strategy(4, Rational(1)).strategy != "bfs") failures.push_back("k=4 at t=1 is not bfs");
  auto f4 = path_frontier(4);
  if (f4.empty() || f4.front().strategy != "path" || f4.front().from != 0 || f4.front().to < half) {
    failures.push_back("k=4 frontier does not open with the path curve on [0,1/2]");
  }
  auto sw4 = switch_points(f4);
  std::vector<Rational> want4{make_rational(3, 4), Rational(1)};
  if (sw4 != want4) failures.push_back("k=4 switch points differ");
  std::string pieces;
  for (const auto& p : f4) {
    pieces += p.strategy + "[" + to_string(p.from) + "," + to_string(p.to) + "]:" + p.expression() + " ";
  }
  auto sw6 = switch_points(path_frontier(6));
  std::string s6;
  for (const auto& t : sw6) s6 += to_string(t) + " ";
  if (select_path_strategy(6, Rational(1)).strategy != "bfs") failures.push_back("k=6 at t=1 is not bfs");
  res.pass = failures.empty();
  res.detail = "k=4: " + pieces + "switch at 3/4,1; k=6 switch: " + s6;
  for (const auto& f : failures) res.detail += "; " + f;
  return res;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, criterion_oracle},   {2, criterion_space_law},    {3, criterion_time_law},
      {4, criterion_four_path}, {5, criterion_recursion},    {6, criterion_analyzer},
      {7, criterion_frontier}, {8, criterion_negation_degenerate}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  bool all = true;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && !only.contains(id)) continue;
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << " (" << fmt(secs, 1) << "s) "
              << o.detail << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
