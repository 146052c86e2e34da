#include <gtest/gtest.h>

#include <random>

#include "cqtrade/generate.hpp"
#include "cqtrade/oracle.hpp"
#include "cqtrade/serialize.hpp"
#include "test_support.hpp"

using namespace cqtrade;

namespace {

void expect_round_trip(const std::string& text, const BuildOptions& o, std::uint64_t seed, std::size_t n = 6) {
  auto q = parse_query(text);
  std::mt19937_64 rng(seed);
  auto db = cqtrade::testing::random_db_for(q, rng, n, 24);
  auto built = BuiltStructure::build(q, db, o);
  auto file = built.to_json();
  auto loaded = BuiltStructure::from_json(nlohmann::json::parse(file.dump()), db);
  EXPECT_EQ(loaded.to_json(), file);
  EXPECT_EQ(loaded.ledger().stored_entries, built.ledger().stored_entries);
  for (const auto& r : cqtrade::testing::all_requests(2, n)) {
    CostMeter a, b;
    bool want = brute_force_eval(q, db, r);
    ASSERT_EQ(built.answer(r, a), want) << o.strategy << " " << text;
    ASSERT_EQ(loaded.answer(r, b), want) << o.strategy << " " << text;
  }
}

BuildOptions with(const std::string& strategy, Rational tau = make_rational(1, 2)) {
  BuildOptions o;
  o.strategy = strategy;
  o.time_exponent = tau;
  return o;
}

}  // namespace

TEST(Serialize, RoundTripsEveryStrategy) {
  const std::string tri = "Q(b x, b z) = R(x,y), R(y,z), R(x,z)";
  const std::string star = "Q(b y1, b y2) = R(x,y1), R(x,y2)";
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    expect_round_trip(tri, with("adstruct"), seed);
    expect_round_trip(star, with("adstruct", Rational(0)), seed);
    expect_round_trip(tri, with("decomp"), seed);
    expect_round_trip(path_query_text(3), with("decomp", make_rational(1, 4)), seed);
    expect_round_trip("Q(b x2, b x3) = R1(x1,x2), !R2(x2,x3), R3(x1,x3)", with("negation"), seed);
    expect_round_trip(path_query_text(4), with("path"), seed);
    expect_round_trip(path_query_text(5, true), with("path"), seed);
    expect_round_trip(path_query_text(3), with("bfs"), seed);
  }
}

TEST(Serialize, ExplicitThresholdAndDelta) {
  auto q = parse_query("Q(b y1, b y2) = R(x,y1), R(x,y2)");
  auto db = set_family({20, 60, 200, false}, 1);
  auto o = with("adstruct");
  o.threshold = Rational(4);
  auto s = BuiltStructure::build(q, db, o);
  EXPECT_EQ(s.summary()["threshold"], "4");
  EXPECT_EQ(s.to_json()["threshold"], "4");

  auto pq = parse_query(path_query_text(4));
  auto g = random_digraph(30, 200, 2);
  auto po = with("path");
  po.delta = 3;
  auto p = BuiltStructure::build(pq, g, po);
  EXPECT_EQ(p.to_json()["delta"], 3);
  EXPECT_TRUE(p.summary().contains("warning"));
}

TEST(Serialize, UnknownConstantsAnswerFalse) {
  auto q = parse_query("Q(b x, b z) = E(x,y), E(y,z), E(x,z)");
  auto db = random_digraph(10, 40, 1);
  for (const char* strategy : {"adstruct", "decomp"}) {
    auto s = BuiltStructure::build(q, db, with(strategy));
    CostMeter m;
    EXPECT_FALSE(s.answer({"nope", "0"}, m));
  }
  auto p = BuiltStructure::build(parse_query(path_query_text(4)), db, with("bfs"));
  CostMeter m;
  EXPECT_FALSE(p.answer({"0", "nope"}, m));
}

TEST(Serialize, Errors) {
  auto tri = parse_query("Q(b x, b z) = E(x,y), E(y,z), E(x,z)");
  auto db = random_digraph(10, 40, 1);
  EXPECT_THROW(BuiltStructure::build(tri, db, with("path")), UnsupportedQueryError);
  EXPECT_THROW(BuiltStructure::build(parse_query(path_query_text(3)), db, with("path")), UnsupportedQueryError);
  EXPECT_THROW(BuiltStructure::build(tri, db, with("nearest")), ValidationError);
  EXPECT_THROW(BuiltStructure::build(parse_query("Q(b x, b z) = E(x,y), E(y,z), !E(x,z)"), db, with("decomp")),
               UnsupportedQueryError);

  auto s = BuiltStructure::build(tri, db, with("adstruct"));
  CostMeter m;
  EXPECT_THROW(s.answer({"1"}, m), ValidationError);

  auto j = s.to_json();
  j["version"] = 99;
  EXPECT_THROW(BuiltStructure::from_json(j, db), ValidationError);
  j = s.to_json();
  j["format"] = "other";
  EXPECT_THROW(BuiltStructure::from_json(j, db), ValidationError);

  // Entries naming constants the database lacks.
  auto stars = parse_query("Q(b y1, b y2) = R(x,y1), R(x,y2)");
  auto sf = set_family({20, 60, 200, false}, 1);
  auto o = with("adstruct");
  o.threshold = Rational(1);
  auto built = BuiltStructure::build(stars, sf, o);
  auto file = built.to_json();
  ASSERT_FALSE(file["entries"].empty());
  auto other = set_family({20, 60, 200, false}, 1);
  Database renamed;
  renamed.add_relation("R", {"x", "y"}, std::vector<std::vector<std::string>>{{"a", "b"}});
  EXPECT_THROW(BuiltStructure::from_json(file, renamed), ValidationError);
  EXPECT_NO_THROW(BuiltStructure::from_json(file, other));
}
