#pragma once

// C-connex tree decompositions (C = bound variables) with a per-node budget
// delta: validation, width/height report, enumeration, delta search and the
// materialization options.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cqtrade/covers.hpp"
#include "cqtrade/query.hpp"

namespace cqtrade {

struct DecompNode {
  std::string id;
  VarSet bag = 0;
  bool in_anchor = false;
  Rational delta = 0;
  /// Store the join over the free variables instead of heavy answers.
  bool materialize_free = false;
};

struct ConnexDecomposition {
  std::vector<DecompNode> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // (parent, child)
  /// Materialize every valid request's answer at the anchor.
  bool materialize_root = false;

  std::optional<std::size_t> parent(std::size_t t) const {
    for (const auto& [p, c] : edges) {
      if (c == t) return p;
    }
    return std::nullopt;
  }
  std::vector<std::size_t> children(std::size_t t) const {
    std::vector<std::size_t> out;
    for (const auto& [p, c] : edges) {
      if (p == t) out.push_back(c);
    }
    return out;
  }
  std::size_t root() const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!parent(i)) return i;
    }
    throw ValidationError("decomposition has no root");
  }
  /// Union of the bags of all proper ancestors of t.
  VarSet ancestor_vars(std::size_t t) const {
    VarSet s = 0;
    for (auto p = parent(t); p; p = parent(*p)) s |= nodes[*p].bag;
    return s;
  }
  VarSet bound_of(std::size_t t) const { return nodes[t].in_anchor ? nodes[t].bag : nodes[t].bag & ancestor_vars(t); }
  VarSet free_of(std::size_t t) const { return nodes[t].bag & ~bound_of(t); }
  /// Nodes in depth-first preorder from the root.
  std::vector<std::size_t> preorder() const {
    std::vector<std::size_t> out;
    std::function<void(std::size_t)> walk = [&](std::size_t t) {
      out.push_back(t);
      for (auto c : children(t)) walk(c);
    };
    walk(root());
    return out;
  }
  /// The anchor's non-anchor children: where answering starts.
  std::vector<std::size_t> top_nodes() const {
    std::vector<std::size_t> out;
    for (const auto& [p, c] : edges) {
      if (nodes[p].in_anchor && !nodes[c].in_anchor) out.push_back(c);
    }
    return out;
  }
  std::vector<Rational> deltas() const {
    std::vector<Rational> out;
    for (const auto& n : nodes) out.push_back(n.delta);
    return out;
  }
};

struct NodeReport {
  std::string id;
  VarSet bound = 0;
  VarSet free = 0;
  bool in_anchor = false;
  Rational delta = 0;
  /// rho_t(delta); nullopt for anchor nodes and bags without free variables.
  std::optional<Rational> width;
  /// Budget spent at the node while answering (delta, or rho* of the free
  /// variables when they are materialized).
  Rational time_weight = 0;
  CoverAnalysis cover;
};

struct DecompReport {
  Rational f = 0;  // delta-width
  Rational h = 0;  // delta-height
  std::vector<NodeReport> nodes;
};

namespace detail {

inline std::string atom_text(const Hypergraph& h, const HyperEdge& e, const AdornedQuery* q) {
  if (q) {
    const auto& a = q->body[e.atom_id];
    std::string s = a.relation + "(";
    for (std::size_t i = 0; i < a.vars.size(); ++i) s += (i ? "," : "") + a.vars[i];
    return s + ")";
  }
  return h.format(e.vars);
}

}  // namespace detail

/// Checks the tree-decomposition axioms, C-connexity for C = bound variables
/// and the delta constraints, then computes widths. Throws ValidationError
/// naming the failing bag or variable.
inline DecompReport validate_decomposition(const Hypergraph& h, const ConnexDecomposition& d,
                                           const AdornedQuery* q = nullptr) {
  const std::size_t n = d.nodes.size();
  if (n == 0) throw ValidationError("decomposition has no nodes");
  std::set<std::string> ids;
  for (const auto& nd : d.nodes) {
    if (!ids.insert(nd.id).second) throw ValidationError("duplicate node id " + nd.id);
    if (!subset_of(nd.bag, h.nodes)) throw ValidationError("bag " + nd.id + " mentions a variable outside the query");
    if (nd.delta < 0) throw ValidationError("bag " + nd.id + " has negative delta");
    if (nd.in_anchor && nd.delta != 0) throw ValidationError("anchor bag " + nd.id + " must have delta 0");
  }
  std::vector<int> parents(n, 0);
  for (const auto& [p, c] : d.edges) {
    if (p >= n || c >= n) throw ValidationError("edge refers to an unknown node");
    if (p == c) throw ValidationError("self-loop at bag " + d.nodes[p].id);
    ++parents[c];
  }
  std::size_t roots = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (parents[i] > 1) throw ValidationError("bag " + d.nodes[i].id + " has more than one parent");
    if (parents[i] == 0) ++roots;
  }
  if (roots != 1 || d.edges.size() != n - 1) throw ValidationError("decomposition is not a tree");
  std::size_t root = d.root();
  if (d.preorder().size() != n) throw ValidationError("decomposition is not connected");
  if (!d.nodes[root].in_anchor) throw ValidationError("root bag " + d.nodes[root].id + " must belong to the anchor set");

  VarSet anchor_union = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!d.nodes[i].in_anchor) continue;
    anchor_union |= d.nodes[i].bag;
    auto p = d.parent(i);
    if (p && !d.nodes[*p].in_anchor) throw ValidationError("anchor set is not connected at bag " + d.nodes[i].id);
  }
  if (anchor_union != h.bound) {
    throw ValidationError("anchor bags cover " + h.format(anchor_union) + " but the bound variables are " +
                          h.format(h.bound));
  }
  for (const auto& e : h.edges) {
    bool inside = std::any_of(d.nodes.begin(), d.nodes.end(), [&](const DecompNode& nd) { return subset_of(e.vars, nd.bag); });
    if (!inside) throw ValidationError("atom " + detail::atom_text(h, e, q) + " is contained in no bag");
  }
  for (VarId v : members(h.nodes)) {
    int tops = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!contains(d.nodes[i].bag, v)) continue;
      auto p = d.parent(i);
      if (!p || !contains(d.nodes[*p].bag, v)) ++tops;
    }
    if (tops > 1) throw ValidationError("variable " + h.var_names[v] + " violates the running intersection property");
  }

  DecompReport rep;
  bool any_width = false;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nd = d.nodes[i];
    NodeReport r;
    r.id = nd.id;
    r.in_anchor = nd.in_anchor;
    r.bound = d.bound_of(i);
    r.free = d.free_of(i);
    r.delta = nd.delta;
    r.time_weight = nd.delta;
    if (!nd.in_anchor && r.free) {
      auto edges = h.edges_within(nd.bag);
      VarSet covered = 0;
      for (auto e : edges) covered |= e;
      for (VarId v : members(nd.bag & ~covered)) {
        throw ValidationError("variable " + h.var_names[v] + " of bag " + nd.id + " is covered by no atom inside the bag");
      }
      CoverAnalysis w;
      r.width = bag_width(nd.bag, r.bound, edges, nd.delta, &w);
      r.cover = w;
      if (nd.materialize_free) {
        auto rho = rho_star_of(edges, r.free);
        r.width = *rho;
        r.time_weight = *rho;
      }
      if (!any_width || *r.width > rep.f) rep.f = *r.width;
      any_width = true;
    } else if (nd.materialize_free) {
      throw ValidationError("bag " + nd.id + " has no free variables to materialize");
    }
    rep.nodes.push_back(std::move(r));
  }
  std::function<void(std::size_t, Rational)> walk = [&](std::size_t t, Rational acc) {
    acc += rep.nodes[t].time_weight;
    auto ch = d.children(t);
    if (ch.empty() && acc > rep.h) rep.h = acc;
    for (auto c : ch) walk(c, acc);
  };
  walk(root, 0);
  return rep;
}

/// Decomposition with delta(t) = tau on every non-anchor bag that has free
/// variables, and 0 elsewhere.
inline ConnexDecomposition with_uniform_delta(ConnexDecomposition d, const Rational& tau) {
  for (std::size_t i = 0; i < d.nodes.size(); ++i) {
    d.nodes[i].delta = (!d.nodes[i].in_anchor && d.free_of(i)) ? tau : Rational(0);
  }
  return d;
}

// ---- JSON interchange ------------------------------------------------------

inline ConnexDecomposition decomposition_from_json(const nlohmann::json& j, const Hypergraph& h) {
  if (!j.contains("nodes") || !j["nodes"].is_array()) throw ValidationError("decomposition needs a \"nodes\" array");
  ConnexDecomposition d;
  std::map<std::string, std::size_t> index;
  auto id_of = [](const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  for (const auto& jn : j["nodes"]) {
    DecompNode nd;
    if (!jn.contains("id") || !jn.contains("bag")) throw ValidationError("decomposition nodes need id and bag");
    nd.id = id_of(jn["id"]);
    for (const auto& v : jn["bag"]) {
      auto id = h.find(v.get<std::string>());
      if (!id) throw ValidationError("bag " + nd.id + " mentions unknown variable " + v.get<std::string>());
      nd.bag |= bit(*id);
    }
    nd.in_anchor = jn.value("in_A", false);
    if (jn.contains("delta")) {
      nd.delta = jn["delta"].is_string() ? parse_rational(jn["delta"].get<std::string>())
                                         : Rational(jn["delta"].get<long long>());
    }
    nd.materialize_free = jn.value("materialize_free", false);
    if (index.contains(nd.id)) throw ValidationError("duplicate node id " + nd.id);
    index[nd.id] = d.nodes.size();
    d.nodes.push_back(nd);
  }
  if (j.contains("edges")) {
    for (const auto& je : j["edges"]) {
      if (!je.is_array() || je.size() != 2) throw ValidationError("decomposition edges are [parent, child] pairs");
      auto p = index.find(id_of(je[0]));
      auto c = index.find(id_of(je[1]));
      if (p == index.end() || c == index.end()) throw ValidationError("edge refers to an unknown node");
      d.edges.emplace_back(p->second, c->second);
    }
  }
  d.materialize_root = j.value("materialize_root", false);
  return d;
}

inline nlohmann::json decomposition_to_json(const ConnexDecomposition& d, const Hypergraph& h) {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (const auto& nd : d.nodes) {
    std::vector<std::string> bag;
    for (VarId v : members(nd.bag)) bag.push_back(h.var_names[v]);
    nlohmann::json jn = {{"id", nd.id}, {"bag", bag}, {"in_A", nd.in_anchor}, {"delta", to_string(nd.delta)}};
    if (nd.materialize_free) jn["materialize_free"] = true;
    j["nodes"].push_back(jn);
  }
  j["edges"] = nlohmann::json::array();
  for (const auto& [p, c] : d.edges) j["edges"].push_back({d.nodes[p].id, d.nodes[c].id});
  if (d.materialize_root) j["materialize_root"] = true;
  return j;
}

// ---- enumeration -----------------------------------------------------------

namespace detail {

/// Restricted-growth strings for all set partitions of n items.
inline void for_each_partition(std::size_t n, const std::function<void(const std::vector<std::size_t>&)>& f) {
  std::vector<std::size_t> label(n, 0);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t used) {
    if (i == n) {
      f(label);
      return;
    }
    for (std::size_t g = 0; g <= used && g < n; ++g) {
      label[i] = g;
      rec(i + 1, std::max(used, g + 1));
    }
  };
  if (n == 0) {
    f(label);
    return;
  }
  rec(0, 0);
}

/// Tree over `bags` (index 0 = anchor) maximizing shared variables; ties
/// prefer edges at the anchor, then lower indices. Returns (parent, child)
/// edges oriented away from the anchor.
inline std::vector<std::pair<std::size_t, std::size_t>> spanning_tree(const std::vector<VarSet>& bags) {
  struct E {
    int w;
    std::size_t a, b;
  };
  std::vector<E> es;
  for (std::size_t a = 0; a < bags.size(); ++a) {
    for (std::size_t b = a + 1; b < bags.size(); ++b) es.push_back({popcount(bags[a] & bags[b]), a, b});
  }
  std::stable_sort(es.begin(), es.end(), [](const E& x, const E& y) {
    if (x.w != y.w) return x.w > y.w;
    return (x.a == 0) > (y.a == 0);
  });
  std::vector<std::size_t> comp(bags.size());
  for (std::size_t i = 0; i < comp.size(); ++i) comp[i] = i;
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) { return comp[x] == x ? x : comp[x] = find(comp[x]); };
  std::vector<std::vector<std::size_t>> adj(bags.size());
  for (const auto& e : es) {
    auto ra = find(e.a), rb = find(e.b);
    if (ra == rb) continue;
    comp[ra] = rb;
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::vector<bool> seen(bags.size(), false);
  std::function<void(std::size_t)> orient = [&](std::size_t t) {
    seen[t] = true;
    for (auto c : adj[t]) {
      if (!seen[c]) {
        out.emplace_back(t, c);
        orient(c);
      }
    }
  };
  orient(0);
  return out;
}

}  // namespace detail

/// All anchor-rooted decompositions whose non-anchor bags are unions of
/// groups of atoms not contained in the bound variables, arranged by a
/// maximum-overlap spanning tree; invalid trees and redundant bags dropped.
inline std::vector<ConnexDecomposition> enumerate_decompositions(const Hypergraph& h, std::size_t max_vars = 10) {
  if (static_cast<std::size_t>(popcount(h.nodes)) > max_vars) {
    throw ValidationError("query has " + std::to_string(popcount(h.nodes)) +
                          " variables, above the enumeration limit; supply a decomposition file instead");
  }
  std::vector<VarSet> outside;
  for (const auto& e : h.edges) {
    if (!subset_of(e.vars, h.bound)) outside.push_back(e.vars);
  }
  if (outside.size() > 9) throw ValidationError("too many atoms to enumerate decompositions; supply a decomposition file");
  std::vector<ConnexDecomposition> out;
  std::set<std::vector<VarSet>> seen;
  detail::for_each_partition(outside.size(), [&](const std::vector<std::size_t>& label) {
    std::size_t groups = outside.empty() ? 0 : *std::max_element(label.begin(), label.end()) + 1;
    std::vector<VarSet> bags(groups + 1, 0);
    bags[0] = h.bound;
    for (std::size_t i = 0; i < outside.size(); ++i) bags[label[i] + 1] |= outside[i];
    for (std::size_t a = 1; a < bags.size(); ++a) {
      for (std::size_t b = 1; b < bags.size(); ++b) {
        if (a != b && subset_of(bags[a], bags[b])) return;
      }
      if (subset_of(bags[a], h.bound)) return;
    }
    std::vector<VarSet> key(bags.begin() + 1, bags.end());
    std::sort(key.begin(), key.end());
    if (seen.contains(key)) return;
    ConnexDecomposition d;
    for (std::size_t i = 0; i < bags.size(); ++i) {
      d.nodes.push_back({"t" + std::to_string(i + 1), bags[i], i == 0, 0, false});
    }
    d.edges = detail::spanning_tree(bags);
    try {
      validate_decomposition(h, d);
    } catch (const ValidationError&) {
      return;
    }
    seen.insert(key);
    out.push_back(std::move(d));
  });
  return out;
}

/// Grid search over delta(t) in {0, 1/q, 2/q, ...} on bags with free
/// variables, subject to delta-height <= budget, minimizing the delta-width;
/// ties go to the lexicographically smallest delta vector.
inline ConnexDecomposition optimize_delta(const Hypergraph& h, ConnexDecomposition d, const Rational& height_budget,
                                          int q = 8) {
  if (height_budget < 0) throw ValidationError("height budget must be non-negative");
  if (q <= 0) throw ValidationError("grid resolution must be positive");
  std::vector<std::size_t> tunable;
  for (std::size_t i = 0; i < d.nodes.size(); ++i) {
    d.nodes[i].delta = 0;
    if (!d.nodes[i].in_anchor && d.free_of(i)) tunable.push_back(i);
  }
  long long steps = (height_budget * q).convert_to<long long>();
  std::size_t combos = 1;
  for (std::size_t i = 0; i < tunable.size() && combos <= 200000; ++i) combos *= static_cast<std::size_t>(steps + 1);
  if (combos > 200000) throw ValidationError("delta grid too large; lower --grid-q or the budget");

  std::optional<Rational> best_f;
  std::vector<Rational> best_delta = d.deltas();
  std::vector<long long> idx(tunable.size(), 0);
  for (;;) {
    for (std::size_t i = 0; i < tunable.size(); ++i) d.nodes[tunable[i]].delta = make_rational(idx[i], q);
    auto rep = validate_decomposition(h, d);
    if (rep.h <= height_budget && (!best_f || rep.f < *best_f)) {
      best_f = rep.f;
      best_delta = d.deltas();
    }
    std::size_t k = tunable.size();
    while (k > 0) {
      --k;
      if (++idx[k] <= steps) break;
      idx[k] = 0;
      if (k == 0) {
        k = tunable.size() + 1;
        break;
      }
    }
    if (tunable.empty() || k == tunable.size() + 1) break;
  }
  for (std::size_t i = 0; i < d.nodes.size(); ++i) d.nodes[i].delta = best_delta[i];
  return d;
}

/// Materialization options: anchor materialization when rho* of the bound
/// variables is within the current width, and free-variable materialization
/// on bags where it lowers the width without raising the bag's time budget.
inline ConnexDecomposition apply_materialization_optimizations(const Hypergraph& h, ConnexDecomposition d) {
  auto rep = validate_decomposition(h, d);
  for (std::size_t i = 0; i < d.nodes.size(); ++i) {
    const auto& r = rep.nodes[i];
    if (!r.width || d.nodes[i].materialize_free) continue;
    auto rho = rho_star_of(h.edges_within(d.nodes[i].bag), r.free);
    if (rho && *rho < *r.width && *rho <= d.nodes[i].delta) d.nodes[i].materialize_free = true;
  }
  rep = validate_decomposition(h, d);
  std::vector<VarSet> all;
  for (const auto& e : h.edges) all.push_back(e.vars);
  auto root_rho = rho_star_of(all, h.bound);
  bool has_work = std::any_of(rep.nodes.begin(), rep.nodes.end(), [](const NodeReport& r) { return r.width.has_value(); });
  if (has_work && root_rho && *root_rho <= rep.f) d.materialize_root = true;
  return d;
}

/// Root C, one middle bag with all positive variables, and one leaf per
/// negated atom whose variables are not all bound (checked there by O(1)
/// membership). Negated atoms inside C are checked at the root.
inline ConnexDecomposition constrained_negation_decomposition(const AdornedQuery& q, const Hypergraph& h,
                                                              const Rational& delta) {
  ConnexDecomposition d;
  d.nodes.push_back({"root", h.bound, true, 0, false});
  if (h.nodes == h.bound) return d;
  d.nodes.push_back({"middle", h.nodes, false, delta, false});
  d.edges.emplace_back(0, 1);
  int leaf = 0;
  for (const auto& a : q.body) {
    if (!a.negated) continue;
    VarSet vs = h.set_of(a.vars);
    if (subset_of(vs, h.bound)) continue;
    d.nodes.push_back({"neg" + std::to_string(++leaf), vs, false, 0, false});
    d.edges.emplace_back(1, d.nodes.size() - 1);
  }
  return d;
}

// ---- symbolic rendering ----------------------------------------------------

/// Renders a + b*sym with unicode minus, e.g. "2−τ", "2τ", "3/2−τ/2", "0".
inline std::string format_affine(const Rational& a, const Rational& b, const std::string& sym = "τ") {
  std::string out;
  if (a != 0) out = to_string(a);
  if (b != 0) {
    Rational mag = b < 0 ? Rational(-b) : b;
    const BigInt& num = boost::multiprecision::numerator(mag);
    const BigInt& den = boost::multiprecision::denominator(mag);
    if (b < 0) {
      out += "−";
    } else if (!out.empty()) {
      out += "+";
    }
    out += (num == 1 ? std::string() : num.str()) + sym;
    if (den != 1) out += "/" + den.str();
  }
  return out.empty() ? "0" : out;
}

/// Fits f(tau) = a + b*tau through the grid points; nullopt when not affine.
inline std::optional<std::pair<Rational, Rational>> fit_affine(const std::vector<std::pair<Rational, Rational>>& pts) {
  if (pts.empty()) return std::nullopt;
  if (pts.size() == 1) return std::make_pair(pts[0].second, Rational(0));
  Rational b = (pts[1].second - pts[0].second) / (pts[1].first - pts[0].first);
  Rational a = pts[0].second - b * pts[0].first;
  for (const auto& [x, y] : pts) {
    if (a + b * x != y) return std::nullopt;
  }
  return std::make_pair(a, b);
}

}  // namespace cqtrade
