#include <gtest/gtest.h>

#include <random>

#include "cqtrade/join.hpp"
#include "cqtrade/oracle.hpp"
#include "test_support.hpp"

using namespace cqtrade;

namespace {

Database disjointness_db() {
  Database db;
  db.add_relation("R", {"x", "y"}, {{"a", "S1"}, {"b", "S1"}, {"b", "S2"}, {"c", "S3"}});
  return db;
}

}  // namespace

TEST(Join, ResidualCostOfSetDisjointness) {
  auto db = disjointness_db();
  auto bq = BoundQuery::make(parse_query("Q(b y, b z) = R(x,y), R(x,z)"), db);
  CoverAnalysis c;
  c.cover.weights = {1, 1};
  c.slack = 2;
  auto t = residual_cost(bq, c, bq.request({"S1", "S2"}));
  EXPECT_EQ(t, PowerProduct::of(2, make_rational(1, 2)));
  EXPECT_TRUE(residual_cost(bq, c, bq.request({"S1", "S9"})).is_zero());
  auto all = BoundQuery::make(parse_query("Q(b x, b y) = R(x,y)"), db);
  CoverAnalysis ca;
  ca.cover.weights = {1};
  EXPECT_EQ(residual_cost(all, ca, all.request({"a", "S1"})), PowerProduct());
}

TEST(Join, EvalBoundExamples) {
  auto db = disjointness_db();
  auto bq = BoundQuery::make(parse_query("Q(b y, b z) = R(x,y), R(x,z)"), db);
  CostMeter m;
  EXPECT_TRUE(eval_bound(bq, bq.request({"S1", "S2"}), m));
  EXPECT_FALSE(eval_bound(bq, bq.request({"S1", "S3"}), m));
  EXPECT_FALSE(eval_bound(bq, bq.request({"S1", "nowhere"}), m));
  EXPECT_GT(m.steps(), 0u);
}

TEST(Join, OracleExamples) {
  Database db;
  db.add_relation("R", {"a", "b"}, {{"1", "2"}});
  db.add_relation("S", {"a", "b"}, {{"2", "3"}});
  db.add_relation("T", {"a", "b"}, {{"3", "4"}});
  db.add_relation("U", {"a", "b"}, {{"9", "9"}});
  db.add_relation("V", {"a", "b"}, {{"5", "6"}});
  auto q = parse_query("Q(b x1, b x6) = R(x1,x2), !S(x2,x3), T(x3,x4), !U(x4,x5), V(x5,x6)");
  EXPECT_FALSE(brute_force_eval(q, db, {"1", "6"}));
  Database empty;
  empty.add_relation("R", {"a", "b"}).assign({});
  EXPECT_FALSE(brute_force_eval(parse_query("Q(b x) = R(x,y)"), empty, {"1"}));
  EXPECT_TRUE(brute_force_eval(parse_query("Q(b x, b y) = R(x,y)"), db, {"1", "2"}));
}

namespace {

void differential(const std::string& text, int relations, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto q = parse_query(text);
  for (int trial = 0; trial < 12; ++trial) {
    Database db;
    std::size_t n = 4 + rng() % 6;
    for (int r = 0; r < relations; ++r) {
      std::string name = relations == 1 ? "R" : "R" + std::to_string(r + 1);
      db.add_edges(name, {"s", "t"}, cqtrade::testing::random_edges(rng, n, 3 + rng() % 14));
    }
    auto bq = BoundQuery::make(q, db);
    auto plan = eval_plan(bq);
    std::vector<std::vector<std::string>> requests{{}};
    for (std::size_t b = 0; b < bq.num_bound(); ++b) {
      std::vector<std::vector<std::string>> next;
      for (const auto& r : requests) {
        for (std::size_t v = 0; v <= n; ++v) {
          auto x = r;
          x.push_back(std::to_string(v));
          next.push_back(x);
        }
      }
      requests = std::move(next);
    }
    for (const auto& r : requests) {
      CostMeter m;
      ASSERT_EQ(eval_bound(bq, plan, bq.request(r), m), brute_force_eval(q, db, r)) << text;
    }
  }
}

}  // namespace

TEST(Join, MatchesOracleOnRandomDatabases) {
  differential("Q(b y, b z) = R(x,y), R(x,z)", 1, 1);
  differential("Q(b x1, b x4) = R1(x1,x2), R2(x2,x3), R3(x3,x4)", 3, 2);
  differential("Q(b x, b z) = R(x,y), R(y,z), R(x,z)", 1, 3);
  differential("Q(b x1, b x2) = R1(x1,x2), R2(x2,x3), R3(x3,x4), R4(x4,x1)", 4, 4);
  differential("Q(b x2, b x3) = R1(x1,x2), !R2(x2,x3), R3(x1,x3)", 3, 5);
  differential("Q(b y1, b y2, b y3) = R(x,y1), R(x,y2), R(x,y3)", 1, 6);
  differential("Q(b a) = R1(a,b), !R2(b,c), R3(c,a)", 3, 7);
}

TEST(Join, ResidualZeroIffEmptyPosting) {
  std::mt19937_64 rng(9);
  auto q = parse_query("Q(b y, b z) = R(x,y), R(x,z)");
  Database db;
  db.add_edges("R", {"x", "y"}, cqtrade::testing::random_edges(rng, 10, 25));
  auto bq = BoundQuery::make(q, db);
  CoverAnalysis c = best_cover_for_time(bq.h, Rational(1));
  for (int y = 0; y < 12; ++y) {
    for (int z = 0; z < 12; ++z) {
      auto r = bq.request({std::to_string(y), std::to_string(z)});
      CostMeter m;
      bool zero = residual_cost(bq, c, r).is_zero();
      if (zero) {
        EXPECT_FALSE(eval_bound(bq, r, m));
      }
    }
  }
}

TEST(Join, ValidRequestsAreTheBoundProjectionJoin) {
  Database db;
  db.add_relation("R", {"x", "y"}, {{"1", "a"}, {"2", "b"}});
  db.add_relation("S", {"y", "z"}, {{"c", "3"}, {"d", "4"}});
  auto bq = BoundQuery::make(parse_query("Q(b x, b z) = R(x,y), S(y,z)"), db);
  EXPECT_EQ(valid_requests(bq).size(), 4u);
}
