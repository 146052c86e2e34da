#include <gtest/gtest.h>

#include <random>

#include "cqtrade/decomp_structure.hpp"
#include "cqtrade/oracle.hpp"
#include "test_support.hpp"

using namespace cqtrade;

namespace {

const char* kPath5 = "Q(b x1, b x6) = R1(x1,x2), R2(x2,x3), R3(x3,x4), R4(x4,x5), R5(x5,x6)";
const char* kOpposite = "Q(b x1, b x3) = R1(x1,x2), R1(x2,x3), R3(x3,x4), R4(x4,x1)";

ConnexDecomposition from_json(const std::string& text, const Hypergraph& h) {
  return decomposition_from_json(nlohmann::json::parse(text), h);
}

const char* kHexagonChain = R"({"nodes":[{"id":"t1","bag":["x1","x6"],"in_A":true},
  {"id":"t2","bag":["x1","x2","x5","x6"]},{"id":"t3","bag":["x2","x3","x4","x5"]}],
  "edges":[["t1","t2"],["t2","t3"]]})";

const char* kSquareCorners = R"({"nodes":[{"id":"t1","bag":["x1","x3"],"in_A":true},
  {"id":"t2","bag":["x1","x2","x3"]},{"id":"t3","bag":["x1","x3","x4"]}],
  "edges":[["t1","t2"],["t1","t3"]]})";

std::vector<Rational> grid(int q, int top) {
  std::vector<Rational> out;
  for (int i = 0; i <= top; ++i) out.push_back(make_rational(i, q));
  return out;
}

void expect_matches_oracle(const AdornedQuery& q, const ConnexDecomposition& d, std::uint64_t seed, int trials = 5,
                           std::size_t n = 6, std::size_t max_m = 16) {
  std::mt19937_64 rng(seed);
  auto h = hypergraph_of(q);
  for (int trial = 0; trial < trials; ++trial) {
    auto db = cqtrade::testing::random_db_for(q, rng, n, max_m);
    auto s = DecompStructure::build(q, db, d);
    for (const auto& r : cqtrade::testing::all_requests(h.bound_order.size(), n)) {
      CostMeter m;
      ASSERT_EQ(s.answer(s.query().request(r), m), brute_force_eval(q, db, r)) << render(q);
    }
  }
}

}  // namespace

TEST(Decomp, HexagonChainWidthAndHeight) {
  auto h = hypergraph_of(parse_query(kPath5));
  auto d = from_json(kHexagonChain, h);
  for (const auto& tau : grid(8, 8)) {
    auto rep = validate_decomposition(h, with_uniform_delta(d, tau));
    EXPECT_EQ(rep.f, 2 - tau);
    EXPECT_EQ(rep.h, 2 * tau);
  }
  auto rep = validate_decomposition(h, d);
  EXPECT_EQ(rep.nodes[1].bound, h.set_of({"x1", "x6"}));
  EXPECT_EQ(rep.nodes[1].free, h.set_of({"x2", "x5"}));
  EXPECT_EQ(rep.nodes[2].bound, h.set_of({"x2", "x5"}));
  EXPECT_EQ(rep.nodes[2].free, h.set_of({"x3", "x4"}));
  EXPECT_FALSE(rep.nodes[0].width.has_value());
}

TEST(Decomp, OppositeCornerSquare) {
  auto h = hypergraph_of(parse_query(kOpposite));
  auto d = from_json(kSquareCorners, h);
  for (const auto& tau : grid(8, 8)) {
    auto rep = validate_decomposition(h, with_uniform_delta(d, tau));
    EXPECT_EQ(rep.f, 2 - 2 * tau);
    EXPECT_EQ(rep.h, tau);
  }
}

TEST(Decomp, SingleBagRecoversCoverTradeoff) {
  for (const char* text : {"Q(b x, b z) = R(x,y), S(y,z), T(x,z)", kPath5, kOpposite,
                           "Q(b y1, b y2) = R(x,y1), R(x,y2)"}) {
    auto h = hypergraph_of(parse_query(text));
    ConnexDecomposition d;
    d.nodes.push_back({"a", h.bound, true, 0, false});
    d.nodes.push_back({"all", h.nodes, false, 0, false});
    d.edges.emplace_back(0, 1);
    for (const auto& tau : grid(4, 4)) {
      auto rep = validate_decomposition(h, with_uniform_delta(d, tau));
      EXPECT_EQ(rep.f, best_cover_for_time(h, tau).space_exponent) << text << " tau=" << to_string(tau);
    }
  }
}

TEST(Decomp, ValidationNamesTheFailure) {
  auto h = hypergraph_of(parse_query(kPath5));
  auto expect_error = [&](const std::string& text, const std::string& needle) {
    try {
      validate_decomposition(h, from_json(text, h));
      ADD_FAILURE() << "accepted: " << text;
    } catch (const ValidationError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_error(R"({"nodes":[{"id":"t1","bag":["x1","x6"],"in_A":true},{"id":"t2","bag":["x1","x2","x6"]},
    {"id":"t3","bag":["x2","x3","x4","x5"]},{"id":"t4","bag":["x5","x6"]}],
    "edges":[["t1","t2"],["t2","t3"],["t1","t4"]]})",
               "x5");
  expect_error(R"({"nodes":[{"id":"t1","bag":["x1","x6"],"in_A":true},{"id":"t2","bag":["x1","x2","x5","x6"]},
    {"id":"t3","bag":["x2","x3","x5"]}],"edges":[["t1","t2"],["t2","t3"]]})",
               "{x3,x4}");
  expect_error(R"({"nodes":[{"id":"t1","bag":["x1"],"in_A":true},{"id":"t2","bag":["x1","x2","x5","x6"]},
    {"id":"t3","bag":["x2","x3","x4","x5"]}],"edges":[["t1","t2"],["t2","t3"]]})",
               "bound variables");
  expect_error(R"({"nodes":[{"id":"t1","bag":["x1","x6"],"in_A":true,"delta":"1/2"},{"id":"t2","bag":["x1","x2","x5","x6"]},
    {"id":"t3","bag":["x2","x3","x4","x5"]}],"edges":[["t1","t2"],["t2","t3"]]})",
               "t1");
  expect_error(R"({"nodes":[{"id":"t1","bag":["x1","x6"],"in_A":true},{"id":"t2","bag":["x1","x3","x6"]},
    {"id":"t3","bag":["x1","x2","x3"]},{"id":"t4","bag":["x3","x4","x5","x6"]}],
    "edges":[["t1","t2"],["t2","t3"],["t2","t4"]]})",
               "bag t2 is covered by no atom");
  expect_error(R"({"nodes":[{"id":"t1","bag":["x1","x6"],"in_A":true},{"id":"t2","bag":["x1","x2","x5","x6"]}],
    "edges":[]})",
               "tree");
  expect_error(R"({"nodes":[{"id":"t1","bag":["x1","x9"],"in_A":true}],"edges":[]})", "x9");
}

TEST(Decomp, JsonRoundTrip) {
  auto h = hypergraph_of(parse_query(kPath5));
  auto d = with_uniform_delta(from_json(kHexagonChain, h), make_rational(3, 8));
  d.materialize_root = true;
  auto back = decomposition_from_json(decomposition_to_json(d, h), h);
  ASSERT_EQ(back.nodes.size(), 3u);
  EXPECT_EQ(back.nodes[2].bag, d.nodes[2].bag);
  EXPECT_EQ(back.nodes[2].delta, make_rational(3, 8));
  EXPECT_EQ(back.edges, d.edges);
  EXPECT_TRUE(back.materialize_root);
}

TEST(Decomp, EnumerationFindsKnownDecompositions) {
  auto has_bags = [](const std::vector<ConnexDecomposition>& ds, std::vector<VarSet> bags) {
    std::sort(bags.begin(), bags.end());
    for (const auto& d : ds) {
      std::vector<VarSet> b;
      for (const auto& n : d.nodes) b.push_back(n.bag);
      std::sort(b.begin(), b.end());
      if (b == bags) return true;
    }
    return false;
  };
  auto h5 = hypergraph_of(parse_query(kPath5));
  auto ds = enumerate_decompositions(h5);
  EXPECT_TRUE(has_bags(ds, {h5.set_of({"x1", "x6"}), h5.set_of({"x1", "x2", "x5", "x6"}),
                            h5.set_of({"x2", "x3", "x4", "x5"})}));
  for (const auto& d : ds) EXPECT_NO_THROW(validate_decomposition(h5, d));

  auto ht = hypergraph_of(parse_query("Q(b x, b z) = R(x,y), S(y,z), T(x,z)"));
  EXPECT_TRUE(has_bags(enumerate_decompositions(ht), {ht.set_of({"x", "z"}), ht.nodes}));
  auto hs = hypergraph_of(parse_query("Q(b y1, b y2, b y3) = R(x,y1), R(x,y2), R(x,y3)"));
  EXPECT_TRUE(has_bags(enumerate_decompositions(hs), {hs.bound, hs.nodes}));
  auto hsq = hypergraph_of(parse_query(kOpposite));
  EXPECT_TRUE(has_bags(enumerate_decompositions(hsq),
                       {hsq.set_of({"x1", "x3"}), hsq.set_of({"x1", "x2", "x3"}), hsq.set_of({"x1", "x3", "x4"})}));

  std::string many = "Q(b x0) = ";
  for (int i = 0; i < 11; ++i) many += (i ? ", " : "") + std::string("R(x") + std::to_string(i) + ",x" + std::to_string(i + 1) + ")";
  EXPECT_THROW(enumerate_decompositions(hypergraph_of(parse_query(many))), ValidationError);
}

TEST(Decomp, OptimizeDelta) {
  auto h = hypergraph_of(parse_query(kPath5));
  auto d = from_json(kHexagonChain, h);
  auto best = optimize_delta(h, d, Rational(1));
  EXPECT_EQ(best.nodes[1].delta, make_rational(1, 2));
  EXPECT_EQ(best.nodes[2].delta, make_rational(1, 2));
  EXPECT_EQ(validate_decomposition(h, best).f, make_rational(3, 2));
  auto zero = optimize_delta(h, d, Rational(0));
  for (const auto& n : zero.nodes) EXPECT_EQ(n.delta, 0);
  EXPECT_EQ(validate_decomposition(h, zero).f, 2);
  auto quarter = optimize_delta(h, d, make_rational(1, 2), 4);
  EXPECT_EQ(validate_decomposition(h, quarter).f, make_rational(7, 4));
}

TEST(Decomp, HeightIsTheHeaviestRootLeafPath) {
  auto h = hypergraph_of(parse_query(kOpposite));
  auto d = from_json(kSquareCorners, h);
  d.nodes[1].delta = make_rational(1, 4);
  d.nodes[2].delta = make_rational(3, 4);
  EXPECT_EQ(validate_decomposition(h, d).h, make_rational(3, 4));
  auto h5 = hypergraph_of(parse_query(kPath5));
  auto d5 = from_json(kHexagonChain, h5);
  d5.nodes[1].delta = make_rational(1, 4);
  d5.nodes[2].delta = make_rational(3, 4);
  EXPECT_EQ(validate_decomposition(h5, d5).h, 1);
}

TEST(Decomp, MaterializationOptimizations) {
  auto q1 = parse_query(
      "Q(b x, b y, b z) = R(x,y), S(y,z), T(x,z), U(p,q), V(q,r), W(p,r), D(x,p), E(y,p), F(r,z)");
  auto h1 = hypergraph_of(q1);
  ConnexDecomposition d1;
  d1.nodes.push_back({"root", h1.bound, true, 0, false});
  d1.nodes.push_back({"child", h1.nodes, false, 0, false});
  d1.edges.emplace_back(0, 1);
  auto rep0 = validate_decomposition(h1, d1);
  EXPECT_EQ(rep0.f, 3);
  EXPECT_TRUE(apply_materialization_optimizations(h1, d1).materialize_root);
  EXPECT_EQ(rho_star(h1, h1.bound), make_rational(3, 2));
  EXPECT_FALSE(apply_materialization_optimizations(h1, with_uniform_delta(d1, 2)).materialize_root);

  auto q2 = parse_query("Q(b x1, b x2, b x3, b x4) = R(x1,y), S(x2,y), T(y,z), U(x3,z), V(x4,z)");
  auto h2 = hypergraph_of(q2);
  ConnexDecomposition d2;
  d2.nodes.push_back({"root", h2.bound, true, 0, false});
  d2.nodes.push_back({"child", h2.nodes, false, 1, false});
  d2.edges.emplace_back(0, 1);
  auto rep = validate_decomposition(h2, d2);
  EXPECT_EQ(rep.f, 2);
  EXPECT_EQ(*rep.nodes[1].cover.slack, 2);
  auto opt = apply_materialization_optimizations(h2, d2);
  EXPECT_TRUE(opt.nodes[1].materialize_free);
  auto rep2 = validate_decomposition(h2, opt);
  EXPECT_EQ(rep2.f, 1);
  EXPECT_EQ(rep2.h, 1);

  auto h5 = hypergraph_of(parse_query(kPath5));
  auto d5 = from_json(kHexagonChain, h5);
  auto same = apply_materialization_optimizations(h5, with_uniform_delta(d5, make_rational(1, 2)));
  EXPECT_FALSE(same.nodes[1].materialize_free);
  EXPECT_FALSE(same.materialize_root);
}

TEST(Decomp, NegationDecompositionShape) {
  auto q = parse_query("Q(b x1, b x6) = R(x1,x2), !S(x2,x3), T(x3,x4), !U(x4,x5), V(x5,x6)");
  auto h = hypergraph_of(q);
  auto d = constrained_negation_decomposition(q, h, make_rational(1, 2));
  ASSERT_EQ(d.nodes.size(), 4u);
  auto rep = validate_decomposition(h, d);
  EXPECT_EQ(rep.nodes[1].cover.cover.value(), 3);
  EXPECT_EQ(*rep.nodes[1].cover.slack, 1);
  EXPECT_FALSE(rep.nodes[2].width.has_value());
  EXPECT_EQ(rep.nodes[2].free, 0u);

  auto open = parse_query("Q(b x2, b x3) = R1(x1,x2), !R2(x2,x3), R3(x1,x3)");
  auto ho = hypergraph_of(open);
  auto od = constrained_negation_decomposition(open, ho, make_rational(1, 2));
  ASSERT_EQ(od.nodes.size(), 2u);
  auto orep = validate_decomposition(ho, od);
  EXPECT_EQ(orep.nodes[1].cover.cover.value(), 2);
  EXPECT_EQ(*orep.nodes[1].cover.slack, 2);
}

TEST(Decomp, StructureMatchesOracle) {
  auto q5 = parse_query(kPath5);
  auto h5 = hypergraph_of(q5);
  auto fig = from_json(kHexagonChain, h5);
  for (const auto& tau : {Rational(0), make_rational(1, 2), Rational(1)}) {
    expect_matches_oracle(q5, with_uniform_delta(fig, tau), 1);
  }
  auto ds = enumerate_decompositions(h5);
  ASSERT_GE(ds.size(), 2u);
  expect_matches_oracle(q5, with_uniform_delta(ds.back(), make_rational(1, 4)), 2);

  auto qs = parse_query(kOpposite);
  auto sq = from_json(kSquareCorners, hypergraph_of(qs));
  expect_matches_oracle(qs, with_uniform_delta(sq, make_rational(1, 4)), 3);

  auto qt = parse_query("Q(b x, b z) = R(x,y), R(y,z), R(x,z)");
  for (const auto& d : enumerate_decompositions(hypergraph_of(qt))) expect_matches_oracle(qt, d, 4);
}

TEST(Decomp, MaterializationModesMatchOracle) {
  auto q = parse_query("Q(b x1, b x2) = R(x1,y), S(x2,y), T(y,z), U(x1,z)");
  auto h = hypergraph_of(q);
  ConnexDecomposition d;
  d.nodes.push_back({"root", h.bound, true, 0, false});
  d.nodes.push_back({"child", h.nodes, false, 1, true});
  d.edges.emplace_back(0, 1);
  expect_matches_oracle(q, d, 5);
  d.nodes[1].materialize_free = false;
  d.materialize_root = true;
  expect_matches_oracle(q, d, 6);
}

TEST(Decomp, NegationStructureMatchesOracle) {
  for (const char* text : {"Q(b x1, b x6) = R(x1,x2), !S(x2,x3), T(x3,x4), !U(x4,x5), V(x5,x6)",
                           "Q(b x2, b x3) = R1(x1,x2), !R2(x2,x3), R3(x1,x3)"}) {
    auto q = parse_query(text);
    std::mt19937_64 rng(7);
    auto h = hypergraph_of(q);
    for (int trial = 0; trial < 5; ++trial) {
      auto db = cqtrade::testing::random_db_for(q, rng, 5, 14);
      for (const auto& tau : {Rational(0), make_rational(1, 2)}) {
        auto s = build_negation_structure(q, db, tau);
        for (const auto& r : cqtrade::testing::all_requests(2, 5)) {
          CostMeter m;
          ASSERT_EQ(s.answer(s.query().request(r), m), brute_force_eval(q, db, r)) << text;
        }
      }
    }
  }
}

TEST(Decomp, EmptyNegationsMatchPositivePart) {
  auto q = parse_query("Q(b x1, b x6) = R(x1,x2), !S(x2,x3), T(x3,x4), !U(x4,x5), V(x5,x6)");
  auto pos = positive_part(q);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 4; ++trial) {
    auto db = cqtrade::testing::random_db_for(pos, rng, 5, 14);
    db.add_relation("S", {"s", "t"}).assign({});
    db.add_relation("U", {"s", "t"}).assign({});
    auto neg = build_negation_structure(q, db, make_rational(1, 2));
    auto hp = hypergraph_of(pos);
    auto plus = DecompStructure::build(pos, db, constrained_negation_decomposition(pos, hp, make_rational(1, 2)));
    for (const auto& r : cqtrade::testing::all_requests(2, 5)) {
      CostMeter a, b;
      ASSERT_EQ(neg.answer(neg.query().request(r), a), plus.answer(plus.query().request(r), b));
    }
  }
}

TEST(Decomp, ZeroDeltaAnswersByLookups) {
  auto q = parse_query(kPath5);
  auto h = hypergraph_of(q);
  std::mt19937_64 rng(13);
  auto db = cqtrade::testing::random_db_for(q, rng, 12, 60);
  auto s = DecompStructure::build(q, db, from_json(kHexagonChain, h));
  for (const auto& r : cqtrade::testing::all_requests(2, 12)) {
    CostMeter m;
    s.answer(s.query().request(r), m);
    EXPECT_LE(m.steps(), 20u);
  }
}

TEST(Decomp, AnchorOnlyQuery) {
  auto q = parse_query("Q(b x, b y) = R(x,y)");
  Database db;
  db.add_relation("R", {"s", "t"}, {{"1", "2"}});
  auto h = hypergraph_of(q);
  ConnexDecomposition d;
  d.nodes.push_back({"root", h.bound, true, 0, false});
  auto s = DecompStructure::build(q, db, d);
  CostMeter m;
  EXPECT_TRUE(s.answer(s.query().request({"1", "2"}), m));
  EXPECT_FALSE(s.answer(s.query().request({"2", "1"}), m));
  EXPECT_EQ(s.ledger().stored_entries, 0u);
}

TEST(Decomp, SnapshotRestoreAndJobs) {
  auto q = parse_query(kPath5);
  auto h = hypergraph_of(q);
  std::mt19937_64 rng(17);
  auto db = cqtrade::testing::random_db_for(q, rng, 15, 80);
  auto d = with_uniform_delta(from_json(kHexagonChain, h), make_rational(1, 4));
  auto a = DecompStructure::build(q, db, d, 1);
  auto b = DecompStructure::build(q, db, d, 3);
  auto c = DecompStructure::restore(q, db, d, a.snapshot());
  EXPECT_EQ(a.ledger().stored_entries, b.ledger().stored_entries);
  EXPECT_EQ(a.ledger().stored_entries, c.ledger().stored_entries);
  for (const auto& r : cqtrade::testing::all_requests(2, 15)) {
    CostMeter m1, m2;
    auto req = a.query().request(r);
    EXPECT_EQ(a.answer(req, m1), c.answer(req, m2));
    EXPECT_EQ(m1.steps(), m2.steps());
  }
}
