#pragma once

// Fractional edge covers, slack, and the delta-parameterized bag width.
// All results are exact rationals.

#include <cmath>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "cqtrade/lp.hpp"
#include "cqtrade/query.hpp"
#include "cqtrade/rational.hpp"

namespace cqtrade {

struct FractionalCover {
  std::vector<Rational> weights;  // one per hyperedge, in edge order
  VarSet covered = 0;

  Rational value() const {
    Rational s = 0;
    for (const auto& w : weights) s += w;
    return s;
  }
};

struct CoverAnalysis {
  FractionalCover cover;
  Rational cover_value;
  /// nullopt encodes +infinity: every variable is bound.
  std::optional<Rational> slack;
  /// Objective value  sum u_F e_F - tau * alpha  (space exponent) when
  /// produced by best_cover_for_time; cover_value otherwise.
  Rational space_exponent;
};

/// Sum of weights landing on variable v.
inline Rational load_on(std::span<const VarSet> edges, std::span<const Rational> weights, VarId v) {
  Rational s = 0;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (contains(edges[i], v)) s += weights[i];
  }
  return s;
}

/// True iff every variable of `s` receives total weight >= 1.
inline bool covers_exactly(std::span<const VarSet> edges, std::span<const Rational> weights, VarSet s) {
  for (VarId v : members(s)) {
    if (load_on(edges, weights, v) < 1) return false;
  }
  for (const auto& w : weights) {
    if (w < 0) return false;
  }
  return true;
}

namespace detail {

inline std::vector<VarSet> edge_sets(const Hypergraph& h) {
  std::vector<VarSet> out;
  out.reserve(h.edges.size());
  for (const auto& e : h.edges) out.push_back(e.vars);
  return out;
}

inline std::vector<std::size_t> iota_order(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

/// Process-wide cache of exact LP results keyed by a rendering of the program.
template <class Result, class Solve>
Result memoized(const std::string& key, Solve&& solve) {
  static std::mutex mu;
  static absl::flat_hash_map<std::string, Result> memo;
  {
    std::lock_guard lock(mu);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
  }
  Result r = solve();
  std::lock_guard lock(mu);
  if (memo.size() > 200000) memo.clear();
  memo.emplace(key, r);
  return r;
}

inline std::string program_key(std::span<const VarSet> edges, std::span<const Rational> cost, std::string head) {
  for (std::size_t i = 0; i < edges.size(); ++i) head += "|" + std::to_string(edges[i]) + ":" + to_string(cost[i]);
  return head;
}

inline std::optional<std::vector<Rational>> solve_min_cover(std::span<const VarSet> edges, VarSet target,
                                                            std::span<const Rational> cost) {
  lp::Program prog(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) prog.objective[i] = cost[i];
  for (VarId v : members(target)) {
    auto& c = prog.add(lp::Sense::GreaterEq, 1);
    for (std::size_t i = 0; i < edges.size(); ++i) c.coeffs[i] = contains(edges[i], v) ? 1 : 0;
  }
  auto sol = lp::minimize_lexicographic(prog, iota_order(edges.size()));
  if (sol.status != lp::Status::Optimal) return std::nullopt;
  return sol.x;
}

/// Minimize sum_F cost_F u_F over covers of `target` (lexicographic tie-break).
inline std::optional<std::vector<Rational>> min_cover(std::span<const VarSet> edges, VarSet target,
                                                      std::span<const Rational> cost) {
  return memoized<std::optional<std::vector<Rational>>>(
      program_key(edges, cost, "cover|" + std::to_string(target)),
      [&] { return solve_min_cover(edges, target, cost); });
}

/// Joint LP in (u, alpha):
///   min  sum_F e_F u_F - tau * alpha
///   s.t. sum_{F ∋ x} u_F >= 1       for x in nodes
///        sum_{F ∋ x} u_F >= alpha   for x in free
///        alpha >= 1, 0 <= u_F <= 1
inline std::optional<CoverAnalysis> solve_tradeoff_lp(std::span<const VarSet> edges, VarSet nodes, VarSet free,
                                                      std::span<const Rational> exponents, const Rational& tau) {
  const std::size_t m = edges.size();
  if (free == 0) {
    auto u = min_cover(edges, nodes, exponents);
    if (!u) return std::nullopt;
    CoverAnalysis a;
    a.cover.weights = *u;
    a.cover.covered = nodes;
    a.cover_value = a.cover.value();
    a.space_exponent = 0;
    for (std::size_t i = 0; i < m; ++i) a.space_exponent += exponents[i] * (*u)[i];
    return a;
  }
  lp::Program prog(m + 1);
  const std::size_t alpha = m;
  for (std::size_t i = 0; i < m; ++i) prog.objective[i] = exponents[i];
  prog.objective[alpha] = -tau;
  for (VarId v : members(nodes)) {
    auto& c = prog.add(lp::Sense::GreaterEq, 1);
    for (std::size_t i = 0; i < m; ++i) c.coeffs[i] = contains(edges[i], v) ? 1 : 0;
  }
  for (VarId v : members(free)) {
    auto& c = prog.add(lp::Sense::GreaterEq, 0);
    for (std::size_t i = 0; i < m; ++i) c.coeffs[i] = contains(edges[i], v) ? 1 : 0;
    c.coeffs[alpha] = -1;
  }
  prog.add(lp::Sense::GreaterEq, 1).coeffs[alpha] = 1;
  for (std::size_t i = 0; i < m; ++i) prog.add(lp::Sense::LessEq, 1).coeffs[i] = 1;

  auto sol = lp::minimize_lexicographic(prog, iota_order(m));
  if (sol.status != lp::Status::Optimal) return std::nullopt;
  CoverAnalysis a;
  a.cover.weights.assign(sol.x.begin(), sol.x.begin() + static_cast<std::ptrdiff_t>(m));
  a.cover.covered = nodes;
  a.cover_value = a.cover.value();
  Rational slack;
  bool first = true;
  for (VarId v : members(free)) {
    Rational l = load_on(edges, a.cover.weights, v);
    if (first || l < slack) slack = l;
    first = false;
  }
  a.slack = slack;
  a.space_exponent = 0;
  for (std::size_t i = 0; i < m; ++i) a.space_exponent += exponents[i] * a.cover.weights[i];
  a.space_exponent -= tau * slack;
  return a;
}

/// Memoized: the analyzer and decomposition search solve the same bag
/// programs many times over.
inline std::optional<CoverAnalysis> tradeoff_lp(std::span<const VarSet> edges, VarSet nodes, VarSet free,
                                                std::span<const Rational> exponents, const Rational& tau) {
  return memoized<std::optional<CoverAnalysis>>(
      program_key(edges, exponents, std::to_string(nodes) + "|" + std::to_string(free) + "|" + to_string(tau)),
      [&] { return solve_tradeoff_lp(edges, nodes, free, exponents, tau); });
}

}  // namespace detail

/// Fractional edge cover number of `s` using all hyperedges of `h`.
inline Rational rho_star(const Hypergraph& h, VarSet s, FractionalCover* witness = nullptr) {
  if (s == 0) {
    if (witness) *witness = FractionalCover{std::vector<Rational>(h.edges.size()), 0};
    return 0;
  }
  auto edges = detail::edge_sets(h);
  std::vector<Rational> ones(edges.size(), Rational(1));
  auto u = detail::min_cover(edges, s, ones);
  if (!u) throw ValidationError("variable set " + h.format(s) + " is not coverable by the query's atoms");
  FractionalCover c{*u, s};
  if (witness) *witness = c;
  return c.value();
}

/// Cover number of `s` using an explicit edge list.
inline std::optional<Rational> rho_star_of(std::span<const VarSet> edges, VarSet s) {
  if (s == 0) return Rational(0);
  std::vector<Rational> ones(edges.size(), Rational(1));
  auto u = detail::min_cover(edges, s, ones);
  if (!u) return std::nullopt;
  Rational sum = 0;
  for (const auto& w : *u) sum += w;
  return sum;
}

/// min over non-bound variables of the weight landing on them;
/// nullopt when every variable is bound (slack = +infinity).
inline std::optional<Rational> slack_of(const Hypergraph& h, const FractionalCover& cover) {
  auto edges = detail::edge_sets(h);
  if (!covers_exactly(edges, cover.weights, h.nodes)) {
    throw ValidationError("weights do not form a fractional edge cover of the query variables");
  }
  std::optional<Rational> best;
  for (VarId v : members(h.free())) {
    Rational l = load_on(edges, cover.weights, v);
    if (!best || l < *best) best = l;
  }
  return best;
}

/// Per-atom size exponents relative to the largest relation: |R_F| = N^e_F.
/// Equal sizes map to exactly 1; otherwise log ratios are pinned to a 1/64 grid.
inline std::vector<Rational> size_exponents(std::span<const std::size_t> sizes) {
  std::size_t n = 0;
  for (auto s : sizes) n = std::max(n, s);
  std::vector<Rational> out;
  for (auto s : sizes) {
    if (s == n) {
      out.push_back(n <= 1 ? Rational(0) : Rational(1));
    } else if (s <= 1) {
      out.push_back(0);
    } else {
      out.push_back(round_to_grid(std::log(static_cast<double>(s)) / std::log(static_cast<double>(n)), 64));
    }
  }
  return out;
}

/// Cover minimizing the space exponent  sum u_F e_F - tau * alpha
/// for answering time N^tau.
inline CoverAnalysis best_cover_for_time(const Hypergraph& h, std::span<const Rational> exponents, const Rational& tau) {
  if (tau < 0) throw ValidationError("time exponent must be non-negative");
  if (exponents.size() != h.edges.size()) throw ValidationError("one size exponent per atom required");
  auto edges = detail::edge_sets(h);
  auto a = detail::tradeoff_lp(edges, h.nodes, h.free(), exponents, tau);
  if (!a) throw ValidationError("hypergraph has a variable contained in no atom");
  return *a;
}

inline CoverAnalysis best_cover_for_time(const Hypergraph& h, const Rational& tau) {
  std::vector<Rational> ones(h.edges.size(), Rational(1));
  return best_cover_for_time(h, ones, tau);
}

/// Cover analysis for a user-supplied cover.
inline CoverAnalysis analyze_cover(const Hypergraph& h, const FractionalCover& cover) {
  CoverAnalysis a;
  a.cover = cover;
  a.cover.covered = h.nodes;
  a.cover_value = cover.value();
  a.slack = slack_of(h, cover);
  a.space_exponent = a.cover_value;
  return a;
}

/// rho_t(delta) = min_u (sum u_F - delta * alpha) over covers of `bag` by
/// `edges` (edges must lie inside the bag), alpha taken over bag \ bag_bound.
/// nullopt when the bag has no free variables (alpha undefined). Throws when
/// the bag is not coverable.
inline std::optional<Rational> bag_width(VarSet bag, VarSet bag_bound, std::span<const VarSet> edges,
                                         const Rational& delta, CoverAnalysis* witness = nullptr) {
  if (delta < 0) throw ValidationError("delta must be non-negative");
  VarSet free = bag & ~bag_bound;
  if (free == 0) return std::nullopt;
  std::vector<Rational> ones(edges.size(), Rational(1));
  auto a = detail::tradeoff_lp(edges, bag, free, ones, delta);
  if (!a) throw ValidationError("bag is not coverable by the atoms it contains");
  if (witness) *witness = *a;
  return a->space_exponent;
}

}  // namespace cqtrade
