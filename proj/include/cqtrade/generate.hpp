#pragma once

// Seeded synthetic instances: set families, random digraphs, layered paths
// and digraphs with one high-degree middle vertex.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cqtrade/error.hpp"
#include "cqtrade/relcore.hpp"

namespace cqtrade {

namespace detail {

inline std::uint64_t zipf_total(std::uint64_t scale, std::uint64_t sets) {
  std::uint64_t s = 0;
  for (std::uint64_t i = 1; i <= sets; ++i) s += std::max<std::uint64_t>(1, scale / i);
  return s;
}

/// `count` distinct values from [0, universe) (Floyd's sampling).
inline std::vector<std::uint64_t> sample_distinct(std::mt19937_64& rng, std::uint64_t universe, std::uint64_t count) {
  std::set<std::uint64_t> chosen;
  for (std::uint64_t j = universe - count; j < universe; ++j) {
    std::uniform_int_distribution<std::uint64_t> pick(0, j);
    std::uint64_t t = pick(rng);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  return {chosen.begin(), chosen.end()};
}

}  // namespace detail

/// Smallest C with sum_{i<=C} floor(C/i) >= tuples: the Zipf family whose
/// smallest sets have one element.
inline std::uint64_t zipf_scale(std::uint64_t tuples) {
  std::uint64_t c = 1;
  while (detail::zipf_total(c, c) < tuples) ++c;
  return c;
}

struct SetFamilyParams {
  std::uint64_t sets = 0;  // 0 with zipf: derived from tuples
  std::uint64_t universe = 0;
  std::uint64_t tuples = 0;
  bool zipf = true;
};

/// Per-set sizes summing to exactly p.tuples.
inline std::vector<std::uint64_t> set_sizes(const SetFamilyParams& p) {
  if (p.tuples == 0) throw ValidationError("set family needs a positive tuple count");
  std::uint64_t sets = p.sets;
  std::vector<std::uint64_t> sizes;
  if (p.zipf) {
    std::uint64_t scale;
    if (sets == 0) {
      scale = zipf_scale(p.tuples);
      sets = scale;
    } else {
      if (p.tuples < sets) throw ValidationError("fewer tuples than sets");
      scale = 1;
      while (detail::zipf_total(scale, sets) < p.tuples) scale *= 2;
      std::uint64_t lo = scale / 2 + 1;
      while (lo < scale) {
        std::uint64_t mid = (lo + scale) / 2;
        if (detail::zipf_total(mid, sets) >= p.tuples) scale = mid;
        else lo = mid + 1;
      }
    }
    for (std::uint64_t i = 1; i <= sets; ++i) sizes.push_back(std::max<std::uint64_t>(1, scale / i));
    std::uint64_t excess = detail::zipf_total(scale, sets) - p.tuples;
    if (excess >= sizes[0]) throw ValidationError("cannot trim the Zipf family to the requested size");
    sizes[0] -= excess;
  } else {
    if (sets == 0) throw ValidationError("uniform set family needs --sets");
    if (p.tuples < sets) throw ValidationError("fewer tuples than sets");
    for (std::uint64_t i = 0; i < sets; ++i) sizes.push_back(p.tuples / sets + (i < p.tuples % sets ? 1 : 0));
  }
  return sizes;
}

/// R(x,y): element x ("e<i>") belongs to set y ("s<j>").
inline Database set_family(const SetFamilyParams& p, std::uint64_t seed) {
  auto sizes = set_sizes(p);
  std::uint64_t universe = p.universe == 0 ? p.tuples : p.universe;
  if (sizes.front() > universe) {
    throw ValidationError("largest set (" + std::to_string(sizes.front()) + ") exceeds the universe (" +
                          std::to_string(universe) + ")");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::string>> rows;
  rows.reserve(p.tuples);
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    for (auto e : detail::sample_distinct(rng, universe, sizes[j])) {
      rows.push_back({"e" + std::to_string(e), "s" + std::to_string(j)});
    }
  }
  Database db;
  db.add_relation("R", {"x", "y"}, rows);
  return db;
}

namespace detail {

inline std::vector<std::pair<std::uint64_t, std::uint64_t>> distinct_edges(std::mt19937_64& rng, std::uint64_t n,
                                                                            std::uint64_t m) {
  if (n < 2) throw ValidationError("a digraph needs at least 2 vertices");
  if (m > n * (n - 1)) throw ValidationError("more edges requested than vertex pairs");
  std::uniform_int_distribution<std::uint64_t> pick(0, n - 1);
  std::set<std::pair<std::uint64_t, std::uint64_t>> seen;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
  while (out.size() < m) {
    auto a = pick(rng), b = pick(rng);
    if (a != b && seen.emplace(a, b).second) out.emplace_back(a, b);
  }
  return out;
}

}  // namespace detail

/// E(s,t) with m distinct edges over vertices 0..n-1, no self-loops.
inline Database random_digraph(std::uint64_t n, std::uint64_t m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Database db;
  db.add_edges("E", {"s", "t"}, detail::distinct_edges(rng, n, m));
  return db;
}

/// Random digraph plus vertex n with `spike` in-edges and `spike` out-edges;
/// spike = 0 picks the smallest spike whose degree exceeds sqrt(|D|).
inline Database adversarial_heavy(std::uint64_t n, std::uint64_t m, std::uint64_t spike, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto edges = detail::distinct_edges(rng, n, m);
  if (spike == 0) {
    spike = 1;
    while (spike * spike <= m + 2 * spike) ++spike;
  }
  if (spike > n) throw ValidationError("spike degree exceeds the vertex count");
  for (auto v : detail::sample_distinct(rng, n, spike)) edges.emplace_back(v, n);
  for (auto v : detail::sample_distinct(rng, n, spike)) edges.emplace_back(n, v);
  Database db;
  db.add_edges("E", {"s", "t"}, edges);
  return db;
}

/// Relations R1..Rk between consecutive layers ("L<i>_<j>"); each pair is
/// kept with probability `density`.
inline Database layered_path(const std::vector<std::uint64_t>& widths, double density, std::uint64_t seed) {
  if (widths.size() < 2) throw ValidationError("layered path needs at least two layers");
  if (!(density > 0 && density <= 1)) throw ValidationError("density must lie in (0, 1]");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(density);
  Database db;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    std::vector<std::vector<std::string>> rows;
    for (std::uint64_t a = 0; a < widths[i]; ++a) {
      for (std::uint64_t b = 0; b < widths[i + 1]; ++b) {
        if (density == 1 || keep(rng)) {
          rows.push_back({"L" + std::to_string(i) + "_" + std::to_string(a), "L" + std::to_string(i + 1) + "_" + std::to_string(b)});
        }
      }
    }
    db.add_relation("R" + std::to_string(i + 1), {"s", "t"}, rows);
  }
  return db;
}

/// "Q(b x1, b x{k+1}) = E(x1,x2), ..., E(xk,x{k+1})", or R1..Rk when `layered`.
inline std::string path_query_text(std::size_t k, bool layered = false) {
  std::string body;
  for (std::size_t i = 1; i <= k; ++i) {
    if (i > 1) body += ", ";
    body += (layered ? "R" + std::to_string(i) : std::string("E")) + "(x" + std::to_string(i) + ",x" +
            std::to_string(i + 1) + ")";
  }
  return "Q(b x1, b x" + std::to_string(k + 1) + ") = " + body;
}

/// k-set disjointness over R(x,y): "Q(b y1, ..., b yk) = R(x,y1), ..., R(x,yk)".
inline std::string star_query_text(std::size_t k) {
  std::string head, body;
  for (std::size_t i = 1; i <= k; ++i) {
    if (i > 1) {
      head += ", ";
      body += ", ";
    }
    head += "b y" + std::to_string(i);
    body += "R(x,y" + std::to_string(i) + ")";
  }
  return "Q(" + head + ") = " + body;
}

}  // namespace cqtrade
