#pragma once

// Path queries P_k(x1, x_{k+1}) = R1(x1,x2), ..., Rk(xk,x_{k+1}): the
// heavy/light length-4 structure, the endpoint-splitting recursion for
// k >= 5, level-synchronous BFS, and the space frontier across strategies.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <absl/container/flat_hash_map.h>
#include <absl/container/flat_hash_set.h>

#include "cqtrade/adstruct.hpp"
#include "cqtrade/decomp.hpp"
#include "cqtrade/join.hpp"

namespace cqtrade {

/// One hop of a path: a binary relation read from column `src` to `dst`.
struct PathStep {
  const Relation* rel = nullptr;
  std::uint32_t src = 0, dst = 1;

  const ExtensionIndex& out() const { return rel->extension({src}, dst); }
  const ExtensionIndex& in() const { return rel->extension({dst}, src); }
  friend bool operator==(const PathStep& a, const PathStep& b) {
    return a.rel == b.rel && a.src == b.src && a.dst == b.dst;
  }
};

struct PathInstance {
  std::vector<PathStep> steps;
  std::uint64_t size = 0;  // |D|: total tuples over the distinct relations used

  std::size_t k() const { return steps.size(); }

  PathInstance slice(std::size_t lo, std::size_t hi) const {
    PathInstance p;
    p.steps.assign(steps.begin() + static_cast<std::ptrdiff_t>(lo), steps.begin() + static_cast<std::ptrdiff_t>(hi));
    p.size = size;
    return p;
  }

  /// Atom order and source column of a Boolean chain query read from the
  /// first bound variable to the second; throws UnsupportedQueryError for
  /// any other shape.
  static std::vector<std::pair<std::size_t, std::uint32_t>> chain_of(const AdornedQuery& q) {
    require_boolean(q);
    if (q.has_negation()) throw UnsupportedQueryError("path strategies do not handle negated atoms");
    auto h = hypergraph_of(q);
    if (h.bound_order.size() != 2) throw UnsupportedQueryError("path strategies need exactly two bound endpoints");
    std::vector<std::pair<std::size_t, std::uint32_t>> chain;
    std::vector<bool> used(q.body.size(), false);
    std::set<std::string> seen{h.var_names[h.bound_order[0]]};
    std::string cur = h.var_names[h.bound_order[0]];
    for (std::size_t i = 0; i < q.body.size(); ++i) {
      std::optional<std::size_t> next;
      for (std::size_t j = 0; j < q.body.size(); ++j) {
        const auto& a = q.body[j];
        if (used[j] || a.vars.size() != 2) continue;
        if (a.vars[0] == cur || a.vars[1] == cur) {
          if (next) throw UnsupportedQueryError("query is not a simple path: " + cur + " has several continuations");
          next = j;
        }
      }
      if (!next) throw UnsupportedQueryError("query is not a simple path of binary atoms");
      const auto& a = q.body[*next];
      used[*next] = true;
      std::uint32_t s = a.vars[0] == cur ? 0 : 1;
      const std::string& other = a.vars[1 - s];
      if (!seen.insert(other).second) throw UnsupportedQueryError("query is not a simple path: variable " + other + " repeats");
      chain.emplace_back(*next, s);
      cur = other;
    }
    if (cur != h.var_names[h.bound_order[1]]) {
      throw UnsupportedQueryError("path must end at the second bound variable");
    }
    return chain;
  }

  static PathInstance from_query(const AdornedQuery& q, const Database& db) {
    PathInstance p;
    for (auto [atom, s] : chain_of(q)) {
      const auto& a = q.body[atom];
      const Relation& rel = db.relation(a.relation);
      if (rel.arity() != 2) throw ValidationError("relation " + a.relation + " is not binary");
      p.steps.push_back({&rel, s, 1 - s});
    }
    std::set<const Relation*> rels;
    for (const auto& s : p.steps) {
      if (rels.insert(s.rel).second) p.size += s.rel->size();
    }
    return p;
  }
};

namespace detail {

inline std::uint64_t pack(Value a, Value b) { return (static_cast<std::uint64_t>(a) << 32) | b; }

inline const std::vector<Value>* lookup(const ExtensionIndex& ix, Value v) {
  TupleKey k;
  k.push(v);
  auto e = ix.find(k);
  return e ? &e->values : nullptr;
}

inline std::size_t degree(const ExtensionIndex& ix, Value v) {
  auto p = lookup(ix, v);
  return p ? p->size() : 0;
}

/// Endpoints reachable from `a` in exactly p.k() hops.
inline std::vector<Value> reach(const PathInstance& p, Value a, CostMeter& meter) {
  std::vector<Value> frontier{a};
  absl::flat_hash_set<Value> next;
  for (const auto& step : p.steps) {
    const auto& out = step.out();
    next.clear();
    for (Value v : frontier) {
      ++meter.probes;
      if (auto succ = lookup(out, v)) {
        for (Value w : *succ) {
          ++meter.tuples_touched;
          next.insert(w);
        }
      }
    }
    frontier.assign(next.begin(), next.end());
    if (frontier.empty()) break;
  }
  std::sort(frontier.begin(), frontier.end());
  return frontier;
}

}  // namespace detail

/// True iff `b` is reachable from `a` along R1..Rk in exactly k hops.
inline bool bfs_fallback(const PathInstance& p, Value a, Value b, CostMeter& meter) {
  auto ends = detail::reach(p, a, meter);
  return std::binary_search(ends.begin(), ends.end(), b);
}

struct PathStats {
  std::uint64_t heavy_values = 0;  // heavy middles (k = 4) or heavy endpoints
  std::uint64_t view_entries = 0;  // V1 + V2 + V3 or V
  std::uint64_t inner_entries = 0;
  std::optional<std::string> warning;
};

/// Heavy/light structure for k = 4 with middle degree threshold delta.
class Path4Structure {
 public:
  static Path4Structure build(const PathInstance& p, std::uint64_t delta, unsigned jobs = 1) {
    if (p.k() != 4) throw UnsupportedQueryError("the length-4 structure needs a 4-path, got k=" + std::to_string(p.k()));
    if (delta == 0) throw ValidationError("delta must be positive");
    Path4Structure s;
    s.p_ = p;
    s.delta_ = delta;
    auto root = static_cast<std::uint64_t>(std::ceil(std::sqrt(static_cast<double>(p.size))));
    while (root * root < p.size) ++root;
    while (root > 0 && (root - 1) * (root - 1) >= p.size) --root;
    if (delta < root) {
      s.stats_.warning = "delta " + std::to_string(delta) + " is below ceil(sqrt(|D|)) = " + std::to_string(root) +
                         "; the space bound O(|D|*delta) is not asserted";
    }
    const auto& r_in = p.steps[0].in();
    const auto& s_in = p.steps[1].in();
    const auto& t_out = p.steps[2].out();
    const auto& u_out = p.steps[3].out();

    // Middle values: x3 occurs as S.dst and T.src.
    std::vector<Value> heavy, light;
    std::set<Value> middles;
    for (std::size_t i = 0; i < p.steps[1].rel->size(); ++i) middles.insert(p.steps[1].rel->row(i)[p.steps[1].dst]);
    for (Value a : middles) {
      if (detail::degree(s_in, a) > delta && detail::degree(t_out, a) > delta) {
        heavy.push_back(a);
        s.heavy_.insert(a);
      } else {
        light.push_back(a);
      }
    }
    for (Value a : heavy) {
      for (Value x2 : *detail::lookup(s_in, a)) {
        if (auto x1s = detail::lookup(r_in, x2)) {
          for (Value x1 : *x1s) s.v1_[x1].push_back(a);
        }
      }
      for (Value x4 : *detail::lookup(t_out, a)) {
        if (auto x5s = detail::lookup(u_out, x4)) {
          for (Value x5 : *x5s) s.v2_[x5].push_back(a);
        }
      }
    }
    std::uint64_t views = 0;
    for (auto* v : {&s.v1_, &s.v2_}) {
      for (auto& [end, list] : *v) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
        views += list.size();
      }
    }
    for (const auto& [x1, list] : s.v1_) {
      for (Value a : list) s.v1_pairs_.insert(detail::pack(x1, a));
    }
    for (const auto& [x5, list] : s.v2_) {
      for (Value a : list) s.v2_pairs_.insert(detail::pack(x5, a));
    }

    std::vector<Value> v3;
    for (Value a : light) {
      auto x2s = detail::lookup(s_in, a);
      auto x4s = detail::lookup(t_out, a);
      if (!x2s || !x4s) continue;
      for (Value x2 : *x2s) {
        for (Value x4 : *x4s) {
          v3.push_back(x2);
          v3.push_back(x4);
        }
      }
    }
    s.inner_db_ = std::make_unique<Database>();
    auto copy = [&](const PathStep& st, const std::string& name) {
      std::vector<Value> flat;
      flat.reserve(st.rel->size() * 2);
      for (std::size_t i = 0; i < st.rel->size(); ++i) {
        flat.push_back(st.rel->row(i)[st.src]);
        flat.push_back(st.rel->row(i)[st.dst]);
      }
      s.inner_db_->add_relation(name, {"s", "t"}).assign(std::move(flat));
    };
    copy(p.steps[0], "A");
    s.inner_db_->add_relation("M", {"s", "t"}).assign(std::move(v3));
    copy(p.steps[3], "B");
    views += s.inner_db_->relation("M").size();

    // Rewritten 3-path, cover (1,0,1) with slack 1 and T = |D|/delta.
    auto q3 = parse_query("Q(b x1, b x5) = A(x1,x2), M(x2,x4), B(x4,x5)");
    FractionalCover u{{1, 0, 1}, 0};
    auto cover = analyze_cover(hypergraph_of(q3), u);
    s.inner_ = std::make_unique<CoverStructure>(
        CoverStructure::build(q3, *s.inner_db_, cover, make_rational(static_cast<std::int64_t>(p.size),
                                                                      static_cast<std::int64_t>(delta)),
                              jobs));

    s.stats_.heavy_values = heavy.size();
    s.stats_.view_entries = views;
    s.stats_.inner_entries = s.inner_->ledger().stored_entries;
    IndexTally tally;
    for (const auto* ix : {&r_in, &s_in, &t_out, &u_out}) tally.add(ix, ix->entries());
    s.ledger_.stored_entries = views + s.inner_->ledger().stored_entries;
    s.ledger_.index_entries = tally.total + s.inner_->ledger().index_entries + s.v1_pairs_.size() +
                              s.v2_pairs_.size() + s.v1_.size() + s.v2_.size();
    return s;
  }

  bool answer(Value a, Value b, CostMeter& meter) const {
    if (!heavy_.empty()) {
      ++meter.probes;
      auto it1 = v1_.find(a);
      if (it1 != v1_.end()) {
        ++meter.probes;
        auto it2 = v2_.find(b);
        if (it2 != v2_.end()) {
          bool first_shorter = it1->second.size() <= it2->second.size();
          const auto& shorter = first_shorter ? it1->second : it2->second;
          const auto& other = first_shorter ? v2_pairs_ : v1_pairs_;
          Value other_end = first_shorter ? b : a;
          for (Value c : shorter) {
            ++meter.tuples_touched;
            ++meter.probes;
            if (other.contains(detail::pack(other_end, c))) return true;
          }
        }
      }
    }
    return inner_->answer(AccessRequest{{a, b}}, meter);
  }

  std::uint64_t delta() const { return delta_; }
  const SpaceLedger& ledger() const { return ledger_; }
  const PathStats& stats() const { return stats_; }
  const CoverStructure& inner() const { return *inner_; }
  bool is_heavy_middle(Value v) const { return heavy_.contains(v); }

 private:
  PathInstance p_;
  std::uint64_t delta_ = 0;
  absl::flat_hash_set<Value> heavy_;
  absl::flat_hash_map<Value, std::vector<Value>> v1_, v2_;
  absl::flat_hash_set<std::uint64_t> v1_pairs_, v2_pairs_;
  std::unique_ptr<Database> inner_db_;
  std::unique_ptr<CoverStructure> inner_;
  SpaceLedger ledger_;
  PathStats stats_;
};

/// k >= 4: heavy-heavy endpoint view plus recursion on the (k-1)-paths
/// obtained by dropping the first or the last hop. Substructures are shared
/// between identical hop sequences.
class PathStructure {
 public:
  static PathStructure build(const PathInstance& p, std::uint64_t delta, unsigned jobs = 1) {
    if (p.k() < 4) throw UnsupportedQueryError("the path structure needs k >= 4, got k=" + std::to_string(p.k()));
    if (delta == 0) throw ValidationError("delta must be positive");
    PathStructure s;
    s.delta_ = delta;
    s.size_ = p.size;
    s.root_ = s.make(p, jobs);
    IndexTally tally;
    for (const auto& n : s.nodes_) {
      if (n.base) {
        s.ledger_ += n.base->ledger();
        s.stats_.inner_entries += n.base->ledger().stored_entries;
        s.stats_.heavy_values += n.base->stats().heavy_values;
        if (!s.stats_.warning) s.stats_.warning = n.base->stats().warning;
        continue;
      }
      s.ledger_.stored_entries += n.view.size();
      s.stats_.view_entries += n.view.size();
      s.stats_.heavy_values += n.heavy_ends;
      tally.add(&n.p.steps.front().out(), n.p.steps.front().out().entries());
      tally.add(&n.p.steps.back().in(), n.p.steps.back().in().entries());
    }
    s.ledger_.index_entries += tally.total;
    return s;
  }

  bool answer(Value a, Value b, CostMeter& meter) const { return answer_at(root_, a, b, meter); }

  std::uint64_t delta() const { return delta_; }
  const SpaceLedger& ledger() const { return ledger_; }
  const PathStats& stats() const { return stats_; }
  std::size_t substructures() const { return nodes_.size(); }

 private:
  struct Node {
    PathInstance p;
    std::unique_ptr<Path4Structure> base;
    absl::flat_hash_set<std::uint64_t> view;
    std::uint64_t heavy_ends = 0;
    std::size_t drop_first = 0, drop_last = 0;
  };
  using Signature = std::vector<std::tuple<const Relation*, std::uint32_t, std::uint32_t>>;

  /// deg > sqrt(|D|/delta), decided exactly as deg^2 * delta > |D|.
  bool heavy_degree(std::size_t deg) const {
    return static_cast<long double>(deg) * deg * delta_ > static_cast<long double>(size_);
  }

  std::size_t make(const PathInstance& p, unsigned jobs) {
    Signature sig;
    for (const auto& st : p.steps) sig.emplace_back(st.rel, st.src, st.dst);
    if (auto it = memo_.find(sig); it != memo_.end()) return it->second;
    Node n;
    n.p = p;
    if (p.k() == 4) {
      n.base = std::make_unique<Path4Structure>(Path4Structure::build(p, delta_, jobs));
    } else {
      n.drop_first = make(p.slice(1, p.k()), jobs);
      n.drop_last = make(p.slice(0, p.k() - 1), jobs);
      const auto& first_out = p.steps.front().out();
      const auto& last_in = p.steps.back().in();
      std::set<Value> starts;
      for (std::size_t i = 0; i < p.steps.front().rel->size(); ++i) {
        starts.insert(p.steps.front().rel->row(i)[p.steps.front().src]);
      }
      std::set<Value> heavy_last;
      for (std::size_t i = 0; i < p.steps.back().rel->size(); ++i) {
        Value v = p.steps.back().rel->row(i)[p.steps.back().dst];
        if (heavy_degree(detail::degree(last_in, v))) heavy_last.insert(v);
      }
      for (Value a : starts) {
        if (!heavy_degree(detail::degree(first_out, a))) continue;
        ++n.heavy_ends;
        CostMeter m;
        for (Value b : detail::reach(p, a, m)) {
          if (heavy_last.contains(b)) n.view.insert(detail::pack(a, b));
        }
      }
      n.heavy_ends += heavy_last.size();
    }
    nodes_.push_back(std::move(n));
    memo_[sig] = nodes_.size() - 1;
    return nodes_.size() - 1;
  }

  bool answer_at(std::size_t id, Value a, Value b, CostMeter& meter) const {
    const Node& n = nodes_[id];
    if (n.base) return n.base->answer(a, b, meter);
    meter.probes += 2;
    auto succ = detail::lookup(n.p.steps.front().out(), a);
    auto pred = detail::lookup(n.p.steps.back().in(), b);
    if (!succ || !pred) return false;
    bool h1 = heavy_degree(succ->size()), hk = heavy_degree(pred->size());
    if (h1 && hk) {
      ++meter.probes;
      return n.view.contains(detail::pack(a, b));
    }
    if (!h1 && (hk || succ->size() <= pred->size())) {
      for (Value x2 : *succ) {
        ++meter.tuples_touched;
        if (answer_at(n.drop_first, x2, b, meter)) return true;
      }
      return false;
    }
    for (Value xk : *pred) {
      ++meter.tuples_touched;
      if (answer_at(n.drop_last, a, xk, meter)) return true;
    }
    return false;
  }

  std::uint64_t delta_ = 0, size_ = 0;
  std::vector<Node> nodes_;
  std::map<Signature, std::size_t> memo_;
  std::size_t root_ = 0;
  SpaceLedger ledger_;
  PathStats stats_;
};

// ---- strategy frontier -----------------------------------------------------

/// Space exponent a + b*t of one strategy on t in [from, to] (T = |D|^t).
struct FrontierPiece {
  std::string strategy;  // "path", "decomp" or "bfs"
  Rational from, to;
  Rational a, b;

  Rational at(const Rational& t) const { return a + b * t; }
  std::string expression() const { return format_affine(a, b, "t"); }
};

namespace detail {

/// Candidate curves; earlier entries win ties.
inline std::vector<FrontierPiece> path_curves(int k) {
  if (k < 2) throw ValidationError("path length must be at least 2");
  std::vector<FrontierPiece> out{{"bfs", 1, Rational(1000000), 1, 0}};
  if (k >= 4) {
    Rational end = make_rational(k - 2, 4);
    out.push_back({"path", 0, end, 2, make_rational(-2, k - 2)});
    out.push_back({"path", end, Rational(1000000), make_rational(3, 2), 0});
  }
  Rational floor_at = make_rational(k - 1, 2);
  out.push_back({"decomp", 0, floor_at, 2, make_rational(-2, k - 1)});
  out.push_back({"decomp", floor_at, Rational(1000000), 1, 0});
  return out;
}

inline std::optional<FrontierPiece> best_at(const std::vector<FrontierPiece>& curves, const Rational& t) {
  std::optional<FrontierPiece> best;
  for (const auto& c : curves) {
    if (t < c.from || t > c.to) continue;
    if (!best || c.at(t) < best->at(t)) best = c;
  }
  return best;
}

}  // namespace detail

/// Lower envelope of the path strategies' space exponents over t in [0, 1];
/// adjacent pieces from the same curve are merged.
inline std::vector<FrontierPiece> path_frontier(int k) {
  auto curves = detail::path_curves(k);
  std::set<Rational> cuts{Rational(0), Rational(1)};
  for (const auto& c : curves) {
    for (const auto& x : {c.from, c.to}) {
      if (x >= 0 && x <= 1) cuts.insert(x);
    }
  }
  for (std::size_t i = 0; i < curves.size(); ++i) {
    for (std::size_t j = i + 1; j < curves.size(); ++j) {
      if (curves[i].b == curves[j].b) continue;
      Rational x = (curves[j].a - curves[i].a) / (curves[i].b - curves[j].b);
      if (x >= 0 && x <= 1) cuts.insert(x);
    }
  }
  std::vector<Rational> pts(cuts.begin(), cuts.end());
  std::vector<FrontierPiece> out;
  auto push = [&](FrontierPiece p, const Rational& from, const Rational& to) {
    if (!out.empty() && out.back().strategy == p.strategy && out.back().a == p.a && out.back().b == p.b) {
      out.back().to = to;
      return;
    }
    p.from = from;
    p.to = to;
    out.push_back(p);
  };
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    auto best = detail::best_at(curves, (pts[i] + pts[i + 1]) / 2);
    if (best) push(*best, pts[i], pts[i + 1]);
  }
  if (auto last = detail::best_at(curves, Rational(1))) push(*last, Rational(1), Rational(1));
  return out;
}

/// Values of t in (0, 1] where the recommended strategy changes.
inline std::vector<Rational> switch_points(const std::vector<FrontierPiece>& frontier) {
  std::vector<Rational> out;
  for (std::size_t i = 1; i < frontier.size(); ++i) {
    if (frontier[i].strategy != frontier[i - 1].strategy) out.push_back(frontier[i].from);
  }
  return out;
}

struct StrategyChoice {
  std::string strategy;
  Rational space_exponent;
  std::string expression;
};

/// Strategy with the smallest space exponent at T = |D|^t.
inline StrategyChoice select_path_strategy(int k, const Rational& t) {
  if (t < 0) throw ValidationError("time exponent must be non-negative");
  auto best = detail::best_at(detail::path_curves(k), t);
  return {best->strategy, best->at(t), best->expression()};
}

}  // namespace cqtrade
