#include <gtest/gtest.h>

#include <random>

#include "cqtrade/covers.hpp"

using namespace cqtrade;

namespace {

Hypergraph graph(const std::string& text) { return hypergraph_of(parse_query(text)); }

std::string path_query(int k) {
  std::string q = "P(b x1, b x" + std::to_string(k + 1) + ") = ";
  for (int i = 1; i <= k; ++i) {
    if (i > 1) q += ", ";
    q += "R" + std::to_string(i) + "(x" + std::to_string(i) + ",x" + std::to_string(i + 1) + ")";
  }
  return q;
}

std::string star_query(int k) {
  std::string head, body;
  for (int i = 1; i <= k; ++i) {
    if (i > 1) {
      head += ", ";
      body += ", ";
    }
    head += "b y" + std::to_string(i);
    body += "R(x,y" + std::to_string(i) + ")";
  }
  return "Q(" + head + ") = " + body;
}

FractionalCover cover_of(std::vector<Rational> w) { return FractionalCover{std::move(w), 0}; }

}  // namespace

TEST(Covers, TriangleRhoStar) {
  auto h = graph("Q(b x, b z) = R(x,y), R(y,z), R(x,z)");
  FractionalCover w;
  EXPECT_EQ(rho_star(h, h.nodes, &w), make_rational(3, 2));
  for (const auto& u : w.weights) EXPECT_EQ(u, make_rational(1, 2));
}

TEST(Covers, PathRhoStarIsCeilHalf) {
  for (int k = 2; k <= 7; ++k) {
    auto h = graph(path_query(k));
    EXPECT_EQ(rho_star(h, h.nodes), Rational((k + 2) / 2)) << k;
  }
}

TEST(Covers, SingleEdgeAndEmptySet) {
  auto h = graph("Q(b x) = R(x,y)");
  EXPECT_EQ(rho_star(h, bit(h.id("x"))), 1);
  EXPECT_EQ(rho_star(h, 0), 0);
}

TEST(Covers, SlackExamples) {
  for (int k = 1; k <= 5; ++k) {
    auto h = graph(star_query(k));
    EXPECT_EQ(slack_of(h, cover_of(std::vector<Rational>(k, Rational(1)))), Rational(k));
  }
  auto tri = graph("Q(b x, b z) = R(x,y), S(y,z), T(x,z)");
  EXPECT_EQ(slack_of(tri, cover_of({1, 1, 0})), Rational(2));
  auto half = make_rational(1, 2);
  EXPECT_EQ(slack_of(tri, cover_of({half, half, half})), Rational(1));
  EXPECT_THROW(slack_of(tri, cover_of({1, 0, 0})), ValidationError);
  auto all_bound = graph("Q(b x, b y) = R(x,y)");
  EXPECT_FALSE(slack_of(all_bound, cover_of({1})).has_value());
}

TEST(Covers, BestCoverForTime) {
  auto star = graph(star_query(3));
  auto a = best_cover_for_time(star, Rational(1));
  EXPECT_EQ(a.cover_value, 3);
  EXPECT_EQ(*a.slack, 3);
  EXPECT_EQ(a.space_exponent, 0);

  auto sq = graph("Q(b x1, b x2) = R1(x1,x2), R2(x2,x3), R3(x3,x4), R4(x4,x1)");
  auto s = best_cover_for_time(sq, make_rational(1, 2));
  EXPECT_EQ(s.cover_value, 2);
  EXPECT_EQ(*s.slack, 1);
  EXPECT_EQ(s.space_exponent, make_rational(3, 2));

  auto one = graph("Q(b x) = R(x,y,z)");
  auto o = best_cover_for_time(one, Rational(0));
  EXPECT_EQ(o.cover.weights, std::vector<Rational>{1});
}

TEST(Covers, TimeZeroGivesRhoStar) {
  for (const auto& q : {path_query(3), path_query(5), star_query(4), std::string("Q(b x, b z) = R(x,y), R(y,z), R(x,z)")}) {
    auto h = graph(q);
    EXPECT_EQ(best_cover_for_time(h, Rational(0)).cover_value, rho_star(h, h.nodes)) << q;
  }
}

TEST(Covers, ScaledCoverCoversFreeVariables) {
  for (const auto& q : {path_query(4), star_query(3), std::string("Q(b x, b z) = R(x,y), R(y,z), R(x,z)"),
                        std::string("Q(b x1, b x3) = R1(x1,x2), R1(x2,x3), R3(x3,x4), R4(x4,x1)")}) {
    auto h = graph(q);
    for (int t = 0; t <= 8; ++t) {
      auto a = best_cover_for_time(h, make_rational(t, 4));
      ASSERT_TRUE(a.slack.has_value());
      std::vector<VarSet> edges;
      for (const auto& e : h.edges) edges.push_back(e.vars);
      std::vector<Rational> scaled;
      for (const auto& w : a.cover.weights) scaled.push_back(w / *a.slack);
      EXPECT_TRUE(covers_exactly(edges, a.cover.weights, h.nodes));
      EXPECT_TRUE(covers_exactly(edges, scaled, h.free()));
      EXPECT_GE(*a.slack, 1);
    }
  }
}

TEST(Covers, RhoStarIsMonotone) {
  std::mt19937 rng(11);
  auto h = graph("Q(b a) = R(a,b), S(b,c), T(c,d), U(a,d), V(b,d)");
  for (int i = 0; i < 200; ++i) {
    VarSet s = rng() & h.nodes;
    VarSet t = s | (rng() & h.nodes);
    EXPECT_LE(rho_star(h, s), rho_star(h, t));
  }
}

TEST(Covers, BagWidthExamples) {
  auto p5 = graph(path_query(5));
  auto tau = make_rational(1, 4);
  VarSet bag = p5.set_of({"x1", "x2", "x5", "x6"});
  auto edges = p5.edges_within(bag);
  EXPECT_EQ(*bag_width(bag, p5.set_of({"x1", "x6"}), edges, tau), 2 - tau);

  auto sq = graph("Q(b x1, b x3) = R1(x1,x2), R1(x2,x3), R3(x3,x4), R4(x4,x1)");
  VarSet b2 = sq.set_of({"x1", "x2", "x3"});
  EXPECT_EQ(*bag_width(b2, sq.set_of({"x1", "x3"}), sq.edges_within(b2), tau), 2 - 2 * tau);

  EXPECT_EQ(*bag_width(bag, p5.set_of({"x1", "x6"}), edges, 0), rho_star_of(edges, bag));
  EXPECT_FALSE(bag_width(bag, bag, edges, tau).has_value());
  EXPECT_THROW(bag_width(p5.set_of({"x1", "x3"}), 0, p5.edges_within(p5.set_of({"x1", "x3"})), tau),
               ValidationError);
}
